//! Agent poses, pair-relative coordinates and the maps between them.
//!
//! Angles follow one convention throughout the crate: they are wrapped to
//! `(-pi, pi]` and the follower bearing `phi` is positive when the leader
//! appears counter-clockwise (to the left) of the follower heading.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Pair distances below this are treated as coincident points.
pub const MIN_SEPARATION: f64 = 1e-9;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let two_pi = 2.0 * PI;
    let mut wrapped = angle.rem_euclid(two_pi);
    if wrapped > PI {
        wrapped -= two_pi;
    }
    // rem_euclid can land exactly on -pi after the shift through rounding
    if wrapped <= -PI {
        wrapped += two_pi;
    }
    wrapped
}

/// Global pose and applied input of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    /// Global heading, wrapped to `(-pi, pi]`.
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

impl AgentState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            v: 0.0,
            omega: 0.0,
        }
    }

    pub fn with_input(mut self, v: f64, omega: f64) -> Self {
        self.v = v;
        self.omega = omega;
        self
    }
}

/// Global coordinates of an agent's front midpoint, where the camera sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontPoint {
    pub x_bar: f64,
    pub y_bar: f64,
}

/// Relative coordinates of one leader-follower pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState {
    /// Distance from the follower's front midpoint to the leader's center.
    pub l: f64,
    /// Leader heading relative to the line of sight.
    pub alpha: f64,
    /// Line of sight relative to the follower heading.
    pub phi: f64,
}

impl PairState {
    pub fn new(l: f64, alpha: f64, phi: f64) -> Self {
        Self {
            l,
            alpha: wrap_angle(alpha),
            phi: wrap_angle(phi),
        }
    }

    /// Builds a pair state from distance and bearing, closing the angle triangle
    /// `alpha = theta_leader - theta_follower - phi`.
    pub fn from_bearing(l: f64, phi: f64, theta_leader: f64, theta_follower: f64) -> Self {
        Self::new(l, theta_leader - theta_follower - phi, phi)
    }

    pub(crate) fn check_separation(&self) -> Result<()> {
        if self.l.is_nan() || self.l < MIN_SEPARATION {
            return Err(Error::DegenerateGeometry {
                distance: self.l,
                threshold: MIN_SEPARATION,
            });
        }
        Ok(())
    }
}

/// Rigid-body geometry shared by all agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleGeometry {
    /// Center-to-front displacement in meters.
    pub d: f64,
}

impl VehicleGeometry {
    pub fn new(d: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::config(format!(
                "center-to-front displacement must be positive, got {d}"
            )));
        }
        Ok(Self { d })
    }
}

impl Default for VehicleGeometry {
    fn default() -> Self {
        Self { d: 0.1 }
    }
}

pub fn front_point(agent: &AgentState, geom: &VehicleGeometry) -> FrontPoint {
    FrontPoint {
        x_bar: agent.x + geom.d * agent.theta.cos(),
        y_bar: agent.y + geom.d * agent.theta.sin(),
    }
}

/// Derives `(L, alpha, phi)` for the pair formed by `leader` and `follower`.
pub fn pair_state_from_global(leader: &AgentState, follower: &AgentState, geom: &VehicleGeometry) -> Result<PairState> {
    let front = front_point(follower, geom);
    let dx = leader.x - front.x_bar;
    let dy = leader.y - front.y_bar;
    let l = dx.hypot(dy);
    if !(l >= MIN_SEPARATION) {
        return Err(Error::DegenerateGeometry {
            distance: l,
            threshold: MIN_SEPARATION,
        });
    }
    let phi = wrap_angle(dy.atan2(dx) - follower.theta);
    Ok(PairState::from_bearing(l, phi, leader.theta, follower.theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn geom() -> VehicleGeometry {
        VehicleGeometry::new(0.1).unwrap()
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(2.0 * PI + 0.25), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-2.0 * PI - 0.25), -0.25, epsilon = 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
    }

    #[test]
    fn front_point_axis_aligned() {
        let p = front_point(&AgentState::new(0.0, 0.0, 0.0), &geom());
        assert_eq!(p, FrontPoint { x_bar: 0.1, y_bar: 0.0 });
    }

    #[test]
    fn front_point_quarter_turn() {
        let p = front_point(&AgentState::new(1.0, 2.0, FRAC_PI_2), &geom());
        assert_abs_diff_eq!(p.x_bar, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y_bar, 2.1, epsilon = 1e-15);
    }

    #[test]
    fn front_point_general_pose() {
        // cos(0.7) = 0.7648421872844885, sin(0.7) = 0.644217687237691
        let p = front_point(&AgentState::new(0.3, -0.4, 0.7), &geom());
        assert_abs_diff_eq!(p.x_bar, 0.3 + 0.07648421872844885, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y_bar, -0.4 + 0.0644217687237691, epsilon = 1e-15);
    }

    #[test]
    fn collinear_pair() {
        let leader = AgentState::new(1.1, 0.0, 0.0);
        let follower = AgentState::new(0.0, 0.0, 0.0);
        let p = pair_state_from_global(&leader, &follower, &geom()).unwrap();
        assert_abs_diff_eq!(p.l, 1.0, epsilon = 1e-15);
        assert_eq!(p.phi, 0.0);
        assert_eq!(p.alpha, 0.0);
    }

    #[test]
    fn leader_directly_left() {
        let leader = AgentState::new(0.1, 1.0, 0.0);
        let follower = AgentState::new(0.0, 0.0, 0.0);
        let p = pair_state_from_global(&leader, &follower, &geom()).unwrap();
        assert_abs_diff_eq!(p.l, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.phi, FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(p.alpha, -FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn coincident_points_are_rejected() {
        let follower = AgentState::new(0.0, 0.0, 0.0);
        let leader = AgentState::new(0.1, 0.0, 1.0);
        assert!(matches!(
            pair_state_from_global(&leader, &follower, &geom()),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn random_pairs_close_the_angle_triangle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let leader = AgentState::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-PI..PI),
            );
            let follower = AgentState::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-PI..PI),
            );
            let p = pair_state_from_global(&leader, &follower, &geom()).unwrap();
            let residual = wrap_angle(p.alpha + p.phi + follower.theta - leader.theta);
            assert!(residual.abs() < 1e-12, "residual {residual}");
        }
    }

    fn pose() -> impl Strategy<Value = (f64, f64, f64)> {
        (-10.0..10.0f64, -10.0..10.0f64, -PI..PI)
    }

    proptest! {
        #[test]
        fn front_point_is_rigid_equivariant(
            (x, y, th) in pose(),
            rot in -PI..PI,
            (tx, ty) in (-5.0..5.0f64, -5.0..5.0f64),
        ) {
            let g = geom();
            let (s, c) = rot.sin_cos();
            let moved = AgentState::new(c * x - s * y + tx, s * x + c * y + ty, th + rot);
            let a = front_point(&moved, &g);
            let f = front_point(&AgentState::new(x, y, th), &g);
            let b = (c * f.x_bar - s * f.y_bar + tx, s * f.x_bar + c * f.y_bar + ty);
            prop_assert!((a.x_bar - b.0).abs() < 1e-12);
            prop_assert!((a.y_bar - b.1).abs() < 1e-12);
        }

        #[test]
        fn returned_angles_are_wrapped((lx, ly, lt) in pose(), (fx, fy, ft) in pose()) {
            let leader = AgentState::new(lx, ly, lt * 3.0);
            let follower = AgentState::new(fx, fy, ft * 3.0);
            if let Ok(p) = pair_state_from_global(&leader, &follower, &geom()) {
                for a in [p.alpha, p.phi, leader.theta, follower.theta] {
                    prop_assert!(a > -PI && a <= PI);
                }
            }
        }
    }
}
