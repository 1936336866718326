//! Barrier constraints and the CBF-QP safety filter.

mod barrier;
mod qp;

pub use barrier::{assemble_cbf_constraints, barrier_values, BarrierValues, ConstraintRow, SafetySet};
pub use qp::{solve_qp, QpProblem, QpSolution, QpStatus, EIGENVALUE_FLOOR};

use nalgebra::Matrix2;

use crate::controller::{ControlInput, InputBounds};
use crate::error::Result;
use crate::geometry::{PairState, VehicleGeometry};

/// Everything one filter invocation produced, for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub barrier: BarrierValues,
    pub rows: [ConstraintRow; 4],
    pub u_nominal: ControlInput,
    pub solution: QpSolution,
}

/// Minimally modifies `u_nominal` so that the four barrier conditions hold.
#[allow(clippy::too_many_arguments)]
pub fn safety_filter(
    p: &PairState,
    u_leader: &ControlInput,
    u_nominal: &ControlInput,
    theta_leader: f64,
    theta_follower: f64,
    set: &SafetySet,
    geom: &VehicleGeometry,
    cost: &Matrix2<f64>,
    bounds: &InputBounds,
) -> Result<FilterReport> {
    let barrier = barrier_values(p, theta_leader, theta_follower, set);
    let rows = assemble_cbf_constraints(p, u_leader, theta_leader, theta_follower, set, geom)?;
    let problem = QpProblem::new(*cost, *u_nominal, rows.to_vec(), *bounds);
    let solution = solve_qp(&problem)?;
    log::trace!(
        "cbf-qp h={:?} status={} active={:?} u_nom=({}, {}) u_safe=({}, {})",
        barrier.h,
        solution.status.as_str(),
        solution.active_set,
        u_nominal.v,
        u_nominal.omega,
        solution.u_safe.v,
        solution.u_safe.omega
    );
    Ok(FilterReport {
        barrier,
        rows,
        u_nominal: *u_nominal,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{nominal_control, ControllerGains, FormationSetpoint};
    use crate::dynamics::pair_rate;

    fn filter(p: &PairState, ul: &ControlInput, un: &ControlInput, tl: f64, tf: f64) -> FilterReport {
        safety_filter(
            p,
            ul,
            un,
            tl,
            tf,
            &SafetySet::default(),
            &VehicleGeometry::default(),
            &Matrix2::identity(),
            &InputBounds::default(),
        )
        .unwrap()
    }

    #[test]
    fn interior_state_leaves_nominal_alone() {
        let geom = VehicleGeometry::default();
        let p = PairState::from_bearing(1.5, 0.0, 0.0, 0.0);
        let ul = ControlInput::new(0.5, 0.0);
        let sp = FormationSetpoint::new(1.6, 0.05).unwrap();
        let un = nominal_control(&p, &ul, &sp, &ControllerGains::default(), &geom).unwrap();
        let report = filter(&p, &ul, &un, 0.0, 0.0);
        assert_eq!(report.solution.status, QpStatus::NominalFeasible);
        assert_eq!(report.solution.u_safe, un);
    }

    #[test]
    fn fov_edge_is_protected() {
        // Leader near the right edge of the view; the nominal command keeps
        // turning the follower left, pushing the leader further out.
        let geom = VehicleGeometry::default();
        let set = SafetySet::default();
        let (tl, tf) = (0.0, 0.1);
        let p = PairState::from_bearing(1.5, -0.5, tl, tf);
        let ul = ControlInput::new(0.5, 0.0);
        let un = ControlInput::new(0.5, 1.0);
        let report = filter(&p, &ul, &un, tl, tf);
        assert_eq!(report.solution.status, QpStatus::Filtered);
        assert!(report.solution.active_set.contains(&2));
        let u = report.solution.u_safe;
        let (_, da) = pair_rate(&p, &u, &ul, &geom).unwrap();
        let h3_rate = ul.omega - u.omega - da;
        assert!(h3_rate + set.gamma[2] * report.barrier.h[2] >= -1e-9);
        // the unfiltered command would have broken the same condition
        let (_, da_nom) = pair_rate(&p, &un, &ul, &geom).unwrap();
        assert!(ul.omega - un.omega - da_nom + set.gamma[2] * report.barrier.h[2] < 0.0);
    }

    #[test]
    fn min_distance_slows_the_follower() {
        let p = PairState::from_bearing(0.62, 0.0, 0.0, 0.0);
        let ul = ControlInput::ZERO;
        let un = ControlInput::new(0.4, 0.0);
        let report = filter(&p, &ul, &un, 0.0, 0.0);
        assert_eq!(report.solution.status, QpStatus::Filtered);
        assert_eq!(report.solution.active_set, vec![0]);
        assert!(report.solution.u_safe.v < un.v);
        // L_dot = -v must be at least -gamma (L - D_min)
        assert!((report.solution.u_safe.v - 0.45 * 0.02).abs() < 1e-12);
    }
}
