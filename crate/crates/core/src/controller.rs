//! Feedback-linearizing formation controller.
//!
//! Each follower inverts the follower input map of its pair dynamics so that
//! the distance and bearing errors obey decoupled first-order linear dynamics.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::{pair_matrices, PairDynamicsMatrices};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, PairState, VehicleGeometry};

/// Linear and angular velocity command of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub v: f64,
    pub omega: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn clamp(&self, bounds: &InputBounds) -> Self {
        Self {
            v: self.v.clamp(bounds.v_min, bounds.v_max),
            omega: self.omega.clamp(bounds.omega_min, bounds.omega_max),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.omega.is_finite()
    }
}

impl From<Vector2<f64>> for ControlInput {
    fn from(u: Vector2<f64>) -> Self {
        Self { v: u[0], omega: u[1] }
    }
}

/// Box describing the admissible input set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl InputBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = self.v_min <= self.v_max
            && self.omega_min <= self.omega_max
            && [self.v_min, self.v_max, self.omega_min, self.omega_max]
                .iter()
                .all(|b| b.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("malformed input box {self:?}")))
        }
    }

    pub fn contains(&self, u: &ControlInput) -> bool {
        (self.v_min..=self.v_max).contains(&u.v) && (self.omega_min..=self.omega_max).contains(&u.omega)
    }
}

impl Default for InputBounds {
    fn default() -> Self {
        Self {
            v_min: -1.0,
            v_max: 1.0,
            omega_min: -2.0,
            omega_max: 2.0,
        }
    }
}

/// Desired distance and bearing of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationSetpoint {
    pub l_d: f64,
    pub alpha_d: f64,
}

impl FormationSetpoint {
    pub fn new(l_d: f64, alpha_d: f64) -> Result<Self> {
        let sp = Self { l_d, alpha_d };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_d > 0.0 && self.l_d.is_finite() && self.alpha_d.is_finite() {
            Ok(())
        } else {
            Err(Error::config(format!("invalid setpoint {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    pub k_l: f64,
    pub k_alpha: f64,
}

impl ControllerGains {
    pub fn new(k_l: f64, k_alpha: f64) -> Result<Self> {
        let g = Self { k_l, k_alpha };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_l > 0.0 && self.k_alpha > 0.0 && self.k_l.is_finite() && self.k_alpha.is_finite() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "controller gains must be positive, got {self:?}"
            )))
        }
    }
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k_l: 1.0,
            k_alpha: 0.15,
        }
    }
}

/// Tracking errors `(L_d - L, wrap(alpha_d - alpha))`.
pub fn tracking_error(p: &PairState, sp: &FormationSetpoint) -> (f64, f64) {
    (sp.l_d - p.l, wrap_angle(sp.alpha_d - p.alpha))
}

/// Nominal follower command. The output is not saturated; the safety filter
/// owns the admissible set.
pub fn nominal_control(
    p: &PairState,
    u_leader: &ControlInput,
    sp: &FormationSetpoint,
    gains: &ControllerGains,
    geom: &VehicleGeometry,
) -> Result<ControlInput> {
    let m = pair_matrices(p, geom)?;
    let (e_l, e_alpha) = tracking_error(p, sp);
    let desired = Vector2::new(gains.k_l * e_l, gains.k_alpha * e_alpha);
    let decouple = PairDynamicsMatrices::g_inverse(p, geom);
    Ok((decouple * (desired - m.f_mat * u_leader.as_vector())).into())
}
