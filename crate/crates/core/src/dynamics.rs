//! Unicycle kinematics and the relative dynamics of a leader-follower pair.

use nalgebra::{Matrix2, Vector2};

use crate::controller::ControlInput;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, AgentState, PairState, VehicleGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
}

impl IntegratorConfig {
    pub const MAX_DT: f64 = 0.1;

    pub fn new(dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0 && dt <= Self::MAX_DT) {
            return Err(Error::config(format!(
                "integration step must lie in (0, {}], got {dt}",
                Self::MAX_DT
            )));
        }
        Ok(Self { dt, scheme })
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            scheme: Scheme::Rk4,
        }
    }
}

fn unicycle_rate(theta: f64, u: &ControlInput) -> [f64; 3] {
    [u.v * theta.cos(), u.v * theta.sin(), u.omega]
}

/// Advances one agent by `cfg.dt` with the input held constant over the step.
pub fn step_agent(agent: &AgentState, u: &ControlInput, cfg: &IntegratorConfig) -> AgentState {
    let dt = cfg.dt;
    let (x, y, theta) = (agent.x, agent.y, agent.theta);
    let delta = match cfg.scheme {
        Scheme::Euler => unicycle_rate(theta, u).map(|r| r * dt),
        Scheme::Rk4 => {
            // Only theta feeds back into the rates, so each stage needs theta alone.
            let k1 = unicycle_rate(theta, u);
            let k2 = unicycle_rate(theta + 0.5 * dt * k1[2], u);
            let k3 = unicycle_rate(theta + 0.5 * dt * k2[2], u);
            let k4 = unicycle_rate(theta + dt * k3[2], u);
            [0, 1, 2].map(|i| dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        }
    };
    AgentState {
        x: x + delta[0],
        y: y + delta[1],
        theta: wrap_angle(theta + delta[2]),
        v: u.v,
        omega: u.omega,
    }
}

/// Input maps of the pair dynamics `r_dot = g u_follower + f u_leader`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDynamicsMatrices {
    /// Input map of the follower command.
    pub g_mat: Matrix2<f64>,
    /// Input map of the leader command.
    pub f_mat: Matrix2<f64>,
}

impl PairDynamicsMatrices {
    /// Closed-form inverse of `g_mat`; this is the decoupling matrix of the
    /// formation controller.
    pub fn g_inverse(p: &PairState, geom: &VehicleGeometry) -> Matrix2<f64> {
        let (s, c) = p.phi.sin_cos();
        let (l, d) = (p.l, geom.d);
        Matrix2::new(-c, -l * s, -s / d, l * c / d)
    }
}

pub fn pair_matrices(p: &PairState, geom: &VehicleGeometry) -> Result<PairDynamicsMatrices> {
    p.check_separation()?;
    let (sp, cp) = p.phi.sin_cos();
    let (sa, ca) = p.alpha.sin_cos();
    let (l, d) = (p.l, geom.d);
    Ok(PairDynamicsMatrices {
        g_mat: Matrix2::new(-cp, -d * sp, -sp / l, d * cp / l),
        f_mat: Matrix2::new(ca, 0.0, -sa / l, 1.0),
    })
}

/// Rate of change `(dL/dt, dalpha/dt)` of the pair coordinates.
pub fn pair_rate(
    p: &PairState,
    u_follower: &ControlInput,
    u_leader: &ControlInput,
    geom: &VehicleGeometry,
) -> Result<(f64, f64)> {
    let m = pair_matrices(p, geom)?;
    let rate = m.g_mat * u_follower.as_vector() + m.f_mat * u_leader.as_vector();
    Ok((rate[0], rate[1]))
}

impl ControlInput {
    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.v, self.omega)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pair_state_from_global;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn euler(dt: f64) -> IntegratorConfig {
        IntegratorConfig::new(dt, Scheme::Euler).unwrap()
    }

    fn rk4(dt: f64) -> IntegratorConfig {
        IntegratorConfig::new(dt, Scheme::Rk4).unwrap()
    }

    #[test]
    fn straight_motion() {
        let s = step_agent(
            &AgentState::new(0.0, 0.0, 0.0),
            &ControlInput::new(1.0, 0.0),
            &euler(0.05),
        );
        assert_abs_diff_eq!(s.x, 0.05, epsilon = 1e-15);
        assert_eq!(s.y, 0.0);
        assert_eq!(s.theta, 0.0);
        assert_eq!((s.v, s.omega), (1.0, 0.0));
    }

    #[test]
    fn pure_rotation() {
        let s = step_agent(
            &AgentState::new(0.0, 0.0, 0.0),
            &ControlInput::new(0.0, 1.0),
            &euler(0.05),
        );
        assert_eq!((s.x, s.y), (0.0, 0.0));
        assert_abs_diff_eq!(s.theta, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn rk4_matches_fine_euler_reference() {
        let u = ControlInput::new(1.0, 1.0);
        let coarse = step_agent(&AgentState::new(0.0, 0.0, 0.0), &u, &rk4(0.05));
        let fine_cfg = euler(1e-5);
        let mut fine = AgentState::new(0.0, 0.0, 0.0);
        for _ in 0..5000 {
            fine = step_agent(&fine, &u, &fine_cfg);
        }
        // Euler at 1e-5 carries ~1e-7 truncation error, well inside the bound.
        assert!((coarse.x - fine.x).abs() < 1e-6);
        assert!((coarse.y - fine.y).abs() < 1e-6);
        assert!((coarse.theta - fine.theta).abs() < 1e-6);
        // exact arc: x = sin(t), y = 1 - cos(t)
        assert_abs_diff_eq!(coarse.x, 0.05f64.sin(), epsilon = 1e-9);
        assert_abs_diff_eq!(coarse.y, 1.0 - 0.05f64.cos(), epsilon = 1e-9);
    }

    #[test]
    fn rk4_and_euler_agree_as_step_shrinks() {
        let u = ControlInput::new(0.7, -1.3);
        let start = AgentState::new(0.2, -0.1, 0.4);
        let gap = |dt: f64| {
            let steps = (0.2 / dt).round() as usize;
            let (mut a, mut b) = (start, start);
            for _ in 0..steps {
                a = step_agent(&a, &u, &euler(dt));
                b = step_agent(&b, &u, &rk4(dt));
            }
            (a.x - b.x).hypot(a.y - b.y)
        };
        let (g1, g2) = (gap(0.01), gap(0.005));
        // Euler is first order, so halving dt halves the gap.
        assert!(g2 < 0.55 * g1, "{g1} {g2}");
    }

    #[test]
    fn config_rejects_bad_step() {
        assert!(IntegratorConfig::new(0.0, Scheme::Rk4).is_err());
        assert!(IntegratorConfig::new(0.2, Scheme::Rk4).is_err());
        assert!(IntegratorConfig::new(0.1, Scheme::Euler).is_ok());
    }

    #[test]
    fn aligned_matrices() {
        let m = pair_matrices(&PairState::new(1.0, 0.0, 0.0), &VehicleGeometry::default()).unwrap();
        assert_eq!(m.g_mat, Matrix2::new(-1.0, -0.0, -0.0, 0.1));
        assert_eq!(m.f_mat, Matrix2::new(1.0, 0.0, -0.0, 1.0));
    }

    #[test]
    fn quarter_turn_matrices() {
        let m = pair_matrices(&PairState::new(2.0, 0.0, FRAC_PI_2), &VehicleGeometry::default()).unwrap();
        let expected = Matrix2::new(0.0, -0.1, -0.5, 0.0);
        assert!((m.g_mat - expected).abs().max() < 1e-15);
    }

    #[test]
    fn degenerate_pair_is_rejected() {
        let p = PairState::new(1e-12, 0.0, 0.0);
        assert!(matches!(
            pair_matrices(&p, &VehicleGeometry::default()),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn determinant_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let geom = VehicleGeometry::new(rng.gen_range(0.01..0.5)).unwrap();
            let p = PairState::new(
                rng.gen_range(0.05..10.0),
                rng.gen_range(-PI..PI),
                rng.gen_range(-PI..PI),
            );
            let m = pair_matrices(&p, &geom).unwrap();
            // det = -d cos^2/L - d sin^2/L
            assert!((m.g_mat.determinant() + geom.d / p.l).abs() < 1e-12);
            let inv = PairDynamicsMatrices::g_inverse(&p, &geom);
            let lu = m.g_mat.try_inverse().unwrap();
            assert!((inv - lu).abs().max() < 1e-10 * (1.0 + p.l / geom.d));
            assert!((inv * m.g_mat - Matrix2::identity()).abs().max() < 1e-10);
        }
    }

    #[test]
    fn rate_examples() {
        let geom = VehicleGeometry::default();
        let zero = ControlInput::new(0.0, 0.0);
        let p = PairState::new(1.3, 0.4, -0.2);
        assert_eq!(pair_rate(&p, &zero, &zero, &geom).unwrap(), (0.0, 0.0));
        let u = ControlInput::new(1.0, 0.0);
        let (dl, da) = pair_rate(&PairState::new(1.0, 0.0, 0.0), &u, &u, &geom).unwrap();
        assert_eq!((dl, da), (0.0, 0.0));
    }

    #[test]
    fn rate_matches_finite_difference_of_global_motion() {
        let geom = VehicleGeometry::default();
        let cfg = rk4(1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 100 {
            let leader = AgentState::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-PI..PI),
            );
            let follower = AgentState::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-PI..PI),
            );
            let p0 = pair_state_from_global(&leader, &follower, &geom).unwrap();
            if p0.l < 0.3 {
                continue;
            }
            let ul = ControlInput::new(rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..2.0));
            let uf = ControlInput::new(rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..2.0));
            let p1 = pair_state_from_global(
                &step_agent(&leader, &ul, &cfg),
                &step_agent(&follower, &uf, &cfg),
                &geom,
            )
            .unwrap();
            let fd = ((p1.l - p0.l) / cfg.dt, wrap_angle(p1.alpha - p0.alpha) / cfg.dt);
            let (dl, da) = pair_rate(&p0, &uf, &ul, &geom).unwrap();
            let scale_l = dl.abs().max(0.1);
            let scale_a = da.abs().max(0.1);
            assert!((fd.0 - dl).abs() / scale_l < 1e-2, "dL fd {} model {}", fd.0, dl);
            assert!((fd.1 - da).abs() / scale_a < 1e-2, "dalpha fd {} model {}", fd.1, da);
            checked += 1;
        }
    }
}
