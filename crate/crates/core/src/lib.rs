//! Distributed leader-follower formation control for camera-equipped
//! unicycles, with a field-of-view safety filter.
//!
//! Each follower tracks a distance/bearing setpoint relative to its leader
//! with a feedback-linearizing controller. A control barrier function QP keeps
//! the leader inside the follower's camera sector. Bearing and distance are
//! estimated by signal-level models of a quantized bearing classifier and a
//! sigma-clipped depth patch, each smoothed by a first-order temporal filter.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod perception;
pub mod safety;

pub use controller::{nominal_control, ControlInput, ControllerGains, FormationSetpoint, InputBounds};
pub use dynamics::{pair_matrices, pair_rate, step_agent, IntegratorConfig, PairDynamicsMatrices, Scheme};
pub use error::{Error, Result};
pub use geometry::{
    front_point, pair_state_from_global, wrap_angle, AgentState, FrontPoint, PairState, VehicleGeometry,
};
pub use safety::{
    assemble_cbf_constraints, barrier_values, safety_filter, solve_qp, BarrierValues, ConstraintRow, QpProblem,
    QpSolution, QpStatus, SafetySet,
};
