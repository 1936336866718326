//! Synchronous chain simulation.

use serde::Serialize;

use super::channel::{MessageChannel, NeighborMessage};
use super::config::{PerceptionMode, ScenarioConfig};
use crate::controller::{nominal_control, tracking_error, ControlInput, FormationSetpoint};
use crate::dynamics::step_agent;
use crate::error::{Error, Result};
use crate::geometry::{pair_state_from_global, wrap_angle, AgentState, PairState, VehicleGeometry};
use crate::perception::PairEstimator;
use crate::safety::{barrier_values, safety_filter, QpStatus};

/// Poses of every agent plus the derived pair coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub time: f64,
    pub agents: Vec<AgentState>,
    /// `pairs[i]` links agent `i` (leader) and agent `i + 1` (follower).
    pub pairs: Vec<PairState>,
}

impl ChainState {
    pub fn new(time: f64, agents: Vec<AgentState>, geom: &VehicleGeometry) -> Result<Self> {
        let pairs = agents
            .windows(2)
            .map(|w| pair_state_from_global(&w[0], &w[1], geom))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { time, agents, pairs })
    }
}

/// How the applied follower command came about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    NominalFeasible,
    Filtered,
    Infeasible,
    /// Safety filter disabled; the nominal command was only saturated.
    Unfiltered,
    /// Leader not in view; the previous command is held with decaying speed.
    Blind,
}

impl StepStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepStatus::NominalFeasible => "nominal_feasible",
            StepStatus::Filtered => "filtered",
            StepStatus::Infeasible => "infeasible",
            StepStatus::Unfiltered => "unfiltered",
            StepStatus::Blind => "blind",
        }
    }
}

impl From<QpStatus> for StepStatus {
    fn from(s: QpStatus) -> Self {
        match s {
            QpStatus::NominalFeasible => StepStatus::NominalFeasible,
            QpStatus::Filtered => StepStatus::Filtered,
            QpStatus::Infeasible => StepStatus::Infeasible,
        }
    }
}

/// One logged step of one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLogRow {
    pub t: f64,
    pub truth: PairState,
    pub phi_raw: Option<f64>,
    pub phi_filtered: Option<f64>,
    pub l_raw: Option<f64>,
    pub l_filtered: Option<f64>,
    /// Barrier values of the true state.
    pub h: [f64; 4],
    pub u_nominal: ControlInput,
    pub u_applied: ControlInput,
    pub status: StepStatus,
    pub active_set: Vec<usize>,
    pub visible: bool,
    pub setpoint: FormationSetpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMetrics {
    /// 1-based pair index; pair `i` has agent `i` as follower.
    pub pair: usize,
    pub total_steps: usize,
    pub min_h: [f64; 4],
    pub fov_violation_steps: usize,
    pub first_violation_time: Option<f64>,
    pub blind_steps: usize,
    pub first_blind_time: Option<f64>,
    pub infeasible_steps: usize,
    pub filter_active_steps: usize,
    /// Per-stage RMSE of the true distance and bearing errors.
    pub rmse_l: Vec<f64>,
    pub rmse_alpha: Vec<f64>,
}

impl PairMetrics {
    pub fn min_barrier(&self) -> f64 {
        self.min_h.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub steps: usize,
    pub dt: f64,
    pub safety_filter_enabled: bool,
    pub pairs: Vec<PairMetrics>,
    /// Set when a geometric fault cut the run short.
    pub fault: Option<String>,
}

impl RunMetrics {
    pub fn fov_violations(&self) -> usize {
        self.pairs.iter().map(|p| p.fov_violation_steps).sum()
    }

    pub fn infeasible_steps(&self) -> usize {
        self.pairs.iter().map(|p| p.infeasible_steps).sum()
    }

    /// Faults and infeasible QPs make a run count as failed.
    pub fn is_clean(&self) -> bool {
        self.fault.is_none() && self.infeasible_steps() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    /// `pairs[i]` holds the rows of pair `i + 1`.
    pub pairs: Vec<Vec<PairLogRow>>,
    pub metrics: RunMetrics,
    /// Chain snapshots, one per step, when requested.
    pub chain: Vec<ChainState>,
}

#[derive(Default)]
struct Accumulator {
    sq_l: Vec<f64>,
    sq_alpha: Vec<f64>,
    count: Vec<usize>,
}

fn derive_seed(seed: u64, pair: usize) -> u64 {
    seed ^ (pair as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn initial_agents(cfg: &ScenarioConfig, geom: &VehicleGeometry) -> Vec<AgentState> {
    let start = cfg.leader_start;
    let cruise = cfg.leader_command(0.0);
    let mut agents = vec![AgentState::new(start.x, start.y, start.theta).with_input(cruise.v, cruise.omega)];
    for pair in 0..cfg.n_pairs() {
        let (l, alpha) = match &cfg.initial_pairs {
            Some(init) => (init[pair].l, init[pair].alpha),
            None => {
                let sp = cfg.setpoint(0, pair);
                (sp.l_d, sp.alpha_d)
            }
        };
        // Same heading as the leader, so the bearing closes the triangle as -alpha.
        let leader = agents[pair];
        let theta = leader.theta;
        let sight = theta - alpha;
        let front_x = leader.x - l * sight.cos();
        let front_y = leader.y - l * sight.sin();
        agents.push(
            AgentState::new(front_x - geom.d * theta.cos(), front_y - geom.d * theta.sin(), theta)
                .with_input(cruise.v, cruise.omega),
        );
    }
    agents
}

/// Options that do not belong in the scenario file.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep a [`ChainState`] snapshot for every step.
    pub record_chain: bool,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunLog> {
    run_scenario_with(cfg, RunOptions::default())
}

/// Runs the scenario: per step and per follower, sense, estimate, control,
/// filter, then actuate every agent at once.
pub fn run_scenario_with(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunLog> {
    cfg.validate()?;
    let geom = cfg.vehicle()?;
    let integ = cfg.integrator()?;
    let cost = cfg.cost_matrix();
    let bounds = cfg.qp.bounds;
    let set = cfg.safety;
    let n_pairs = cfg.n_pairs();
    let dt = integ.dt;
    let steps = (cfg.total_duration() / dt).round() as usize;
    let n_stages = cfg.stages.len();

    let mut estimators = (0..n_pairs)
        .map(|i| match cfg.perception.mode {
            PerceptionMode::Ideal => {
                PairEstimator::ideal(cfg.bearing_model(), cfg.perception.depth, cfg.perception.k_f)
            }
            PerceptionMode::Modeled => PairEstimator::new(
                cfg.bearing_model(),
                cfg.perception.depth,
                cfg.perception.k_f,
                derive_seed(cfg.seed, i + 1),
            ),
        })
        .collect::<Result<Vec<_>>>()?;

    let agents = initial_agents(cfg, &geom);
    let mut channels: Vec<MessageChannel> = agents[..n_pairs]
        .iter()
        .enumerate()
        .map(|(i, a)| {
            MessageChannel::new(
                cfg.communication.delay_steps,
                NeighborMessage {
                    sender: i,
                    u: ControlInput::new(a.v, a.omega),
                    theta: a.theta,
                    stamp: 0.0,
                },
            )
        })
        .collect();
    let mut last_command: Vec<ControlInput> = agents.iter().map(|a| ControlInput::new(a.v, a.omega)).collect();

    let mut pair_logs: Vec<Vec<PairLogRow>> = vec![Vec::with_capacity(steps); n_pairs];
    let mut metrics: Vec<PairMetrics> = (1..=n_pairs)
        .map(|pair| PairMetrics {
            pair,
            total_steps: 0,
            min_h: [f64::INFINITY; 4],
            fov_violation_steps: 0,
            first_violation_time: None,
            blind_steps: 0,
            first_blind_time: None,
            infeasible_steps: 0,
            filter_active_steps: 0,
            rmse_l: vec![0.0; n_stages],
            rmse_alpha: vec![0.0; n_stages],
        })
        .collect();
    let mut acc: Vec<Accumulator> = (0..n_pairs)
        .map(|_| Accumulator {
            sq_l: vec![0.0; n_stages],
            sq_alpha: vec![0.0; n_stages],
            count: vec![0; n_stages],
        })
        .collect();
    let mut snapshots = Vec::new();
    let mut fault = None;

    let mut state = ChainState::new(0.0, agents, &geom)?;

    'steps: for k in 0..steps {
        let t = k as f64 * dt;
        state.time = t;
        let stage = cfg.stage_index(t);
        if opts.record_chain {
            snapshots.push(state.clone());
        }
        let mut commands = vec![ControlInput::ZERO; cfg.n_agents];
        commands[0] = cfg.leader_command(t);

        for pair in 0..n_pairs {
            let (li, fi) = (pair, pair + 1);
            let leader = state.agents[li];
            let follower = state.agents[fi];
            let truth = state.pairs[pair];
            let sp = cfg.setpoint(stage, pair);

            let in_depth = truth.l >= set.d_min && truth.l <= set.d_max;
            let sample = estimators[pair].observe(t, truth.l, truth.phi, in_depth);
            let msg = channels[pair].exchange(NeighborMessage {
                sender: li,
                u: commands[li],
                theta: leader.theta,
                stamp: t,
            });

            let estimate = match (sample.l_filtered, sample.phi_filtered) {
                (Some(l), Some(phi)) => Some(PairState::new(l, wrap_angle(msg.theta - follower.theta - phi), phi)),
                _ => None,
            };
            let nominal = match estimate {
                Some(p) => match nominal_control(&p, &msg.u, &sp, &cfg.gains, &geom) {
                    Ok(u) => Some(u),
                    Err(e @ Error::DegenerateGeometry { .. }) => {
                        fault = Some(format!("pair {}: estimated state: {e}", pair + 1));
                        break 'steps;
                    }
                    Err(e) => return Err(e),
                },
                None => None,
            };

            let (applied, status, active_set) = match (sample.visible, estimate, nominal) {
                (true, Some(p), Some(u_nom)) => {
                    if cfg.safety_filter_enabled {
                        let report = safety_filter(
                            &p,
                            &msg.u,
                            &u_nom,
                            msg.theta,
                            follower.theta,
                            &set,
                            &geom,
                            &cost,
                            &bounds,
                        )?;
                        let s = report.solution;
                        (s.u_safe.clamp(&bounds), StepStatus::from(s.status), s.active_set)
                    } else {
                        (u_nom.clamp(&bounds), StepStatus::Unfiltered, vec![])
                    }
                }
                _ => {
                    let held = last_command[fi];
                    (
                        ControlInput::new(held.v * cfg.blind_decay, held.omega),
                        StepStatus::Blind,
                        vec![],
                    )
                }
            };
            commands[fi] = applied;
            last_command[fi] = applied;

            let h = barrier_values(&truth, leader.theta, follower.theta, &set).h;
            let m = &mut metrics[pair];
            m.total_steps += 1;
            for (lo, hk) in m.min_h.iter_mut().zip(h) {
                *lo = lo.min(hk);
            }
            let violating = truth.phi.abs() > set.psi_max || truth.l < set.d_min || truth.l > set.d_max;
            if violating {
                m.fov_violation_steps += 1;
                m.first_violation_time.get_or_insert(t);
            }
            if !sample.visible {
                m.blind_steps += 1;
                m.first_blind_time.get_or_insert(t);
            }
            match status {
                StepStatus::Infeasible => {
                    m.infeasible_steps += 1;
                    m.filter_active_steps += 1;
                }
                StepStatus::Filtered => m.filter_active_steps += 1,
                _ => {}
            }
            let (e_l, e_alpha) = tracking_error(&truth, &sp);
            let a = &mut acc[pair];
            a.sq_l[stage] += e_l * e_l;
            a.sq_alpha[stage] += e_alpha * e_alpha;
            a.count[stage] += 1;

            pair_logs[pair].push(PairLogRow {
                t,
                truth,
                phi_raw: sample.phi_raw,
                phi_filtered: sample.phi_filtered,
                l_raw: sample.l_raw,
                l_filtered: sample.l_filtered,
                h,
                u_nominal: nominal.unwrap_or(ControlInput::ZERO),
                u_applied: applied,
                status,
                active_set,
                visible: sample.visible,
                setpoint: sp,
            });
        }

        let next: Vec<AgentState> = state
            .agents
            .iter()
            .zip(&commands)
            .map(|(a, u)| step_agent(a, u, &integ))
            .collect();
        match ChainState::new(t + dt, next, &geom) {
            Ok(s) => state = s,
            Err(e) => {
                fault = Some(format!("t = {:.3}: {e}", t + dt));
                break;
            }
        }
    }

    for (m, a) in metrics.iter_mut().zip(&acc) {
        for s in 0..n_stages {
            if a.count[s] > 0 {
                m.rmse_l[s] = (a.sq_l[s] / a.count[s] as f64).sqrt();
                m.rmse_alpha[s] = (a.sq_alpha[s] / a.count[s] as f64).sqrt();
            }
        }
    }
    if let Some(f) = &fault {
        log::warn!("run terminated early: {f}");
    }

    Ok(RunLog {
        pairs: pair_logs,
        metrics: RunMetrics {
            steps,
            dt,
            safety_filter_enabled: cfg.safety_filter_enabled,
            pairs: metrics,
            fault,
        },
        chain: snapshots,
    })
}
