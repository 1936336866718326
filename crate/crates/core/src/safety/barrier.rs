//! Field-of-view and depth barrier functions and their affine CBF rows.

use nalgebra::{Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::controller::ControlInput;
use crate::dynamics::pair_matrices;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, PairState, VehicleGeometry};

/// Camera visibility sector plus the barrier slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetySet {
    pub d_min: f64,
    pub d_max: f64,
    /// Half of the horizontal field of view.
    pub psi_max: f64,
    /// Linear extended class-K slopes, one per barrier.
    pub gamma: [f64; 4],
}

impl SafetySet {
    pub fn validate(&self) -> Result<()> {
        let ok = self.d_min > 0.0
            && self.d_min < self.d_max
            && self.d_max.is_finite()
            && self.psi_max > 0.0
            && self.psi_max < std::f64::consts::FRAC_PI_2
            && self.gamma.iter().all(|g| *g > 0.0 && g.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid safety set {self:?}")))
        }
    }

    /// True when `(L, phi)` lies inside the closed sector.
    pub fn contains(&self, l: f64, phi: f64) -> bool {
        l >= self.d_min && l <= self.d_max && phi.abs() <= self.psi_max
    }
}

impl Default for SafetySet {
    // 0.5236 is the camera half-angle as specified, not pi/6
    #[allow(clippy::approx_constant)]
    fn default() -> Self {
        Self {
            d_min: 0.6,
            d_max: 8.0,
            psi_max: 0.5236,
            gamma: [0.45; 4],
        }
    }
}

/// `h = (L - D_min, D_max - L, theta_l - theta_f - alpha + psi, -theta_l + theta_f + alpha + psi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierValues {
    pub h: [f64; 4],
}

impl BarrierValues {
    pub fn min(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Selection matrix acting on `r = (L, alpha)`.
fn a_mat() -> Matrix4x2<f64> {
    Matrix4x2::new(1.0, 0.0, -1.0, 0.0, 0.0, -1.0, 0.0, 1.0)
}

/// Coefficient of the heading difference `theta_f - theta_l`.
fn c_vec() -> Vector4<f64> {
    Vector4::new(0.0, 0.0, -1.0, 1.0)
}

pub fn barrier_values(p: &PairState, theta_leader: f64, theta_follower: f64, set: &SafetySet) -> BarrierValues {
    let offset = Vector4::new(-set.d_min, set.d_max, set.psi_max, set.psi_max);
    let r = Vector2::new(p.l, p.alpha);
    let heading_gap = wrap_angle(theta_follower - theta_leader);
    let mut h = a_mat() * r + offset + c_vec() * heading_gap;
    // Rows 3 and 4 carry psi +/- (theta_l - theta_f - alpha); the bracket is an
    // angle and must be taken on the same branch as phi.
    let bearing = wrap_angle(-p.alpha - heading_gap);
    h[2] = set.psi_max + bearing;
    h[3] = set.psi_max - bearing;
    BarrierValues {
        h: [h[0], h[1], h[2], h[3]],
    }
}

/// One affine constraint `a . u + b >= 0` on the follower command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintRow {
    pub a: Vector2<f64>,
    pub b: f64,
}

impl ConstraintRow {
    pub fn new(a0: f64, a1: f64, b: f64) -> Self {
        Self {
            a: Vector2::new(a0, a1),
            b,
        }
    }

    pub fn eval(&self, u: &ControlInput) -> f64 {
        self.a.dot(&u.as_vector()) + self.b
    }
}

/// The four CBF rows `[A g + C_bar] u + [A f - C_bar] u_leader + gamma h >= 0`.
pub fn assemble_cbf_constraints(
    p: &PairState,
    u_leader: &ControlInput,
    theta_leader: f64,
    theta_follower: f64,
    set: &SafetySet,
    geom: &VehicleGeometry,
) -> Result<[ConstraintRow; 4]> {
    let m = pair_matrices(p, geom)?;
    let h = barrier_values(p, theta_leader, theta_follower, set);
    // C_bar = C [0 1] only touches the angular-rate column.
    let mut c_bar = Matrix4x2::zeros();
    c_bar.set_column(1, &c_vec());
    let a_follower = a_mat() * m.g_mat + c_bar;
    let drift = (a_mat() * m.f_mat - c_bar) * u_leader.as_vector();
    Ok(std::array::from_fn(|k| ConstraintRow {
        a: Vector2::new(a_follower[(k, 0)], a_follower[(k, 1)]),
        b: drift[k] + set.gamma[k] * h.h[k],
    }))
}
