//! Exact solver for the two-variable CBF-QP.
//!
//! With two decision variables and at most a handful of rows, every optimum is
//! the equality-constrained minimizer over some set of at most two linearly
//! independent active constraints. The solver enumerates those sets and keeps
//! the one that satisfies the KKT conditions.

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use super::barrier::ConstraintRow;
use crate::controller::{ControlInput, InputBounds};
use crate::error::{Error, Result};

/// Smallest admissible eigenvalue of the cost matrix.
pub const EIGENVALUE_FLOOR: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-10;

/// `min 1/2 (u - u_nom)' P (u - u_nom)` subject to every row and the box.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub cost: Matrix2<f64>,
    pub nominal: ControlInput,
    pub rows: Vec<ConstraintRow>,
    pub bounds: InputBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    /// The nominal input already satisfied every constraint and was returned unchanged.
    NominalFeasible,
    Filtered,
    /// No admissible input exists; the returned input minimizes the largest violation.
    Infeasible,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::NominalFeasible => "nominal_feasible",
            QpStatus::Filtered => "filtered",
            QpStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u_safe: ControlInput,
    pub status: QpStatus,
    /// Indices of constraints holding with equality. Rows come first, then the
    /// box faces in the order `v_min, v_max, omega_min, omega_max`.
    pub active_set: Vec<usize>,
    /// Lagrange multipliers, aligned with `active_set`.
    pub multipliers: Vec<f64>,
    /// Uniform slack added to every row when the problem was infeasible.
    pub relaxation: f64,
}

impl QpProblem {
    pub fn new(cost: Matrix2<f64>, nominal: ControlInput, rows: Vec<ConstraintRow>, bounds: InputBounds) -> Self {
        Self {
            cost,
            nominal,
            rows,
            bounds,
        }
    }

    /// Rows followed by the four box faces.
    pub fn all_constraints(&self) -> Vec<ConstraintRow> {
        let b = &self.bounds;
        let mut all = self.rows.clone();
        all.extend([
            ConstraintRow::new(1.0, 0.0, -b.v_min),
            ConstraintRow::new(-1.0, 0.0, b.v_max),
            ConstraintRow::new(0.0, 1.0, -b.omega_min),
            ConstraintRow::new(0.0, -1.0, b.omega_max),
        ]);
        all
    }

    pub fn objective(&self, u: &ControlInput) -> f64 {
        let e = u.as_vector() - self.nominal.as_vector();
        0.5 * e.dot(&(self.cost * e))
    }
}

fn smallest_eigenvalue(p: &Matrix2<f64>) -> f64 {
    let half_trace = 0.5 * (p[(0, 0)] + p[(1, 1)]);
    let half_gap = 0.5 * (p[(0, 0)] - p[(1, 1)]);
    half_trace - half_gap.hypot(p[(0, 1)])
}

fn check_cost(p: &Matrix2<f64>) -> Result<()> {
    let scale = p.abs().max().max(1.0);
    let symmetric = (p[(0, 1)] - p[(1, 0)]).abs() <= 1e-12 * scale;
    let min_eigenvalue = if p.iter().all(|x| x.is_finite()) {
        smallest_eigenvalue(p)
    } else {
        f64::NAN
    };
    if !symmetric || !(min_eigenvalue >= EIGENVALUE_FLOOR) {
        return Err(Error::IllConditioned { min_eigenvalue });
    }
    Ok(())
}

fn row_tolerance(row: &ConstraintRow) -> f64 {
    PRIMAL_TOL * (1.0 + row.a.norm() + row.b.abs())
}

fn satisfies(rows: &[ConstraintRow], u: &ControlInput, tol_scale: f64) -> bool {
    rows.iter().all(|r| r.eval(u) >= -tol_scale * row_tolerance(r))
}

struct Candidate {
    u: Vector2<f64>,
    active: Vec<usize>,
    multipliers: Vec<f64>,
}

/// Minimizer of the cost with the rows in `active` held at equality.
fn equality_candidate(
    p: &Matrix2<f64>,
    p_inv: &Matrix2<f64>,
    nominal: &Vector2<f64>,
    rows: &[ConstraintRow],
    active: &[usize],
) -> Option<Candidate> {
    // u = u0 + P^-1 A' lambda with A u + b = 0
    let u = match *active {
        [] => *nominal,
        [i] => {
            let a = rows[i].a;
            let curvature = a.dot(&(p_inv * a));
            if curvature <= 1e-14 {
                return None;
            }
            let lambda = -(a.dot(nominal) + rows[i].b) / curvature;
            nominal + p_inv * a * lambda
        }
        [i, j] => {
            let a = Matrix2::from_rows(&[rows[i].a.transpose(), rows[j].a.transpose()]);
            let det = a.determinant();
            let scale = rows[i].a.norm() * rows[j].a.norm();
            if scale == 0.0 || det.abs() <= 1e-12 * scale {
                return None;
            }
            // Two independent equalities pin the point down completely.
            a.try_inverse()? * Vector2::new(-rows[i].b, -rows[j].b)
        }
        _ => unreachable!("at most two constraints are active in two dimensions"),
    };
    if !u.iter().all(|x| x.is_finite()) {
        return None;
    }
    let multipliers = multipliers_for(p, nominal, rows, active, &u)?;
    Some(Candidate {
        u,
        active: active.to_vec(),
        multipliers,
    })
}

/// Solves `P (u - u0) = sum lambda_k a_k` over the active rows.
fn multipliers_for(
    p: &Matrix2<f64>,
    nominal: &Vector2<f64>,
    rows: &[ConstraintRow],
    active: &[usize],
    u: &Vector2<f64>,
) -> Option<Vec<f64>> {
    let grad = p * (u - nominal);
    match *active {
        [] => Some(vec![]),
        [i] => {
            let a = rows[i].a;
            Some(vec![a.dot(&grad) / a.norm_squared()])
        }
        [i, j] => {
            let cols = Matrix2::from_columns(&[rows[i].a, rows[j].a]);
            let lambda = cols.try_inverse()? * grad;
            Some(vec![lambda[0], lambda[1]])
        }
        _ => None,
    }
}

fn index_sets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    let singles = (0..n).map(|i| vec![i]);
    let pairs = (0..n).flat_map(move |i| (i + 1..n).map(move |j| vec![i, j]));
    std::iter::once(vec![]).chain(singles).chain(pairs)
}

/// KKT enumeration over all active sets of size <= 2. Returns `None` when no
/// point satisfies every constraint.
fn solve_feasible(problem: &QpProblem, rows: &[ConstraintRow]) -> Option<Candidate> {
    let p = problem.cost;
    let p_inv = p.try_inverse()?;
    let nominal = problem.nominal.as_vector();
    let mut best_primal: Option<(f64, Candidate)> = None;
    for active in index_sets(rows.len()) {
        let Some(cand) = equality_candidate(&p, &p_inv, &nominal, rows, &active) else {
            continue;
        };
        let u = ControlInput::from(cand.u);
        if !satisfies(rows, &u, 1.0) {
            continue;
        }
        let scale = 1.0 + (p * (cand.u - nominal)).norm();
        if cand.multipliers.iter().all(|l| *l >= -DUAL_TOL * scale) {
            return Some(cand);
        }
        let value = problem.objective(&u);
        if best_primal.as_ref().is_none_or(|(v, _)| value < *v) {
            best_primal = Some((value, cand));
        }
    }
    // Only reached when rounding breaks every multiplier sign test.
    best_primal.map(|(_, c)| c)
}

/// Smallest uniform slack `t` such that some box point satisfies `a.u + b + t >= 0`
/// for every row. The largest violation is convex and piecewise linear, so
/// its minimum over the box sits on a vertex of the arrangement formed by the
/// box and the lines where two rows are equally violated.
fn min_max_violation(rows: &[ConstraintRow], bounds: &InputBounds) -> f64 {
    let violation = |u: &Vector2<f64>| {
        rows.iter()
            .map(|r| -(r.a.dot(u) + r.b))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let inside = |u: &Vector2<f64>| {
        let tol = 1e-12;
        u[0] >= bounds.v_min - tol
            && u[0] <= bounds.v_max + tol
            && u[1] >= bounds.omega_min - tol
            && u[1] <= bounds.omega_max + tol
    };
    let mut lines: Vec<ConstraintRow> = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            lines.push(ConstraintRow {
                a: rows[i].a - rows[j].a,
                b: rows[i].b - rows[j].b,
            });
        }
    }
    lines.extend([
        ConstraintRow::new(1.0, 0.0, -bounds.v_min),
        ConstraintRow::new(1.0, 0.0, -bounds.v_max),
        ConstraintRow::new(0.0, 1.0, -bounds.omega_min),
        ConstraintRow::new(0.0, 1.0, -bounds.omega_max),
    ]);
    let mut best = f64::INFINITY;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let m = Matrix2::from_rows(&[lines[i].a.transpose(), lines[j].a.transpose()]);
            let Some(inv) = m.try_inverse() else { continue };
            let u = inv * Vector2::new(-lines[i].b, -lines[j].b);
            if u.iter().all(|x| x.is_finite()) && inside(&u) {
                best = best.min(violation(&u));
            }
        }
    }
    best
}

/// Solves the CBF-QP exactly.
///
/// When the nominal input is admissible it is returned bit for bit. When no
/// admissible input exists the rows are relaxed by the smallest uniform slack
/// that makes them satisfiable inside the box and the relaxed problem is solved.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution> {
    check_cost(&problem.cost)?;
    if !problem.nominal.is_finite()
        || problem
            .rows
            .iter()
            .any(|r| !r.a.iter().all(|x| x.is_finite()) || !r.b.is_finite())
    {
        return Err(Error::config("QP data must be finite"));
    }
    problem.bounds.validate()?;

    let all = problem.all_constraints();
    if satisfies(&all, &problem.nominal, 1e-3) {
        return Ok(QpSolution {
            u_safe: problem.nominal,
            status: QpStatus::NominalFeasible,
            active_set: vec![],
            multipliers: vec![],
            relaxation: 0.0,
        });
    }

    if let Some(c) = solve_feasible(problem, &all) {
        return Ok(QpSolution {
            u_safe: ControlInput::from(c.u).clamp(&problem.bounds),
            status: QpStatus::Filtered,
            active_set: c.active,
            multipliers: c.multipliers,
            relaxation: 0.0,
        });
    }

    let slack = min_max_violation(&problem.rows, &problem.bounds).max(0.0);
    let mut relaxed = all.clone();
    for row in relaxed.iter_mut().take(problem.rows.len()) {
        row.b += slack;
    }
    let c = solve_feasible(problem, &relaxed).ok_or_else(|| Error::config("relaxed QP has no solution"))?;
    Ok(QpSolution {
        u_safe: ControlInput::from(c.u).clamp(&problem.bounds),
        status: QpStatus::Infeasible,
        active_set: c.active,
        multipliers: c.multipliers,
        relaxation: slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_problem(nominal: ControlInput, rows: Vec<ConstraintRow>) -> QpProblem {
        QpProblem::new(Matrix2::identity(), nominal, rows, InputBounds::default())
    }

    #[test]
    fn unconstrained_returns_nominal() {
        let q = identity_problem(ControlInput::new(0.3, -0.7), vec![]);
        let s = solve_qp(&q).unwrap();
        assert_eq!(s.status, QpStatus::NominalFeasible);
        assert_eq!(s.u_safe, q.nominal);
    }

    #[test]
    fn one_dimensional_projection() {
        let row = ConstraintRow::new(1.0, 0.0, -1.2);
        let nominal = ControlInput::new(1.0, 0.0);
        let bounds = InputBounds {
            v_max: 2.0,
            ..InputBounds::default()
        };
        let s = solve_qp(&QpProblem::new(Matrix2::identity(), nominal, vec![row], bounds)).unwrap();
        assert_eq!(s.status, QpStatus::Filtered);
        assert!((s.u_safe.v - 1.2).abs() < 1e-15 && s.u_safe.omega.abs() < 1e-15);
        assert_eq!(s.active_set, vec![0]);
        assert!((s.multipliers[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn box_only_projection() {
        let s = solve_qp(&identity_problem(ControlInput::new(3.0, -5.0), vec![])).unwrap();
        assert_eq!(s.status, QpStatus::Filtered);
        assert_eq!(s.u_safe, ControlInput::new(1.0, -2.0));
        let mut active = s.active_set.clone();
        active.sort();
        assert_eq!(active, vec![1, 2]);
    }

    #[test]
    fn weighted_cost_bends_the_projection() {
        // With P = diag(1, 4) moving omega is four times as expensive.
        let cost = Matrix2::new(1.0, 0.0, 0.0, 4.0);
        let row = ConstraintRow::new(1.0, 1.0, -1.0);
        let s = solve_qp(&QpProblem::new(
            cost,
            ControlInput::ZERO,
            vec![row],
            InputBounds::default(),
        ))
        .unwrap();
        // stationarity: (v, 4 w) = lambda (1, 1), v + w = 1  => v = 0.8, w = 0.2
        assert!((s.u_safe.v - 0.8).abs() < 1e-12);
        assert!((s.u_safe.omega - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_cost() {
        let q = QpProblem::new(
            Matrix2::new(1.0, 0.0, 0.0, -1.0),
            ControlInput::ZERO,
            vec![],
            InputBounds::default(),
        );
        assert!(matches!(solve_qp(&q), Err(Error::IllConditioned { .. })));
        let q = QpProblem::new(
            Matrix2::new(1.0, 0.5, 0.0, 1.0),
            ControlInput::ZERO,
            vec![],
            InputBounds::default(),
        );
        assert!(matches!(solve_qp(&q), Err(Error::IllConditioned { .. })));
        let q = QpProblem::new(
            Matrix2::new(1.0, 0.0, 0.0, 1e-12),
            ControlInput::ZERO,
            vec![],
            InputBounds::default(),
        );
        assert!(matches!(solve_qp(&q), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn contradictory_rows_minimize_largest_violation() {
        // v >= 0.5 and v <= -0.5 cannot both hold; the best compromise is v = 0
        // with both rows violated by 0.5.
        let rows = vec![ConstraintRow::new(1.0, 0.0, -0.5), ConstraintRow::new(-1.0, 0.0, -0.5)];
        let s = solve_qp(&identity_problem(ControlInput::new(0.2, 0.3), rows)).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
        assert!((s.relaxation - 0.5).abs() < 1e-12);
        assert!(s.u_safe.v.abs() < 1e-8, "{:?}", s.u_safe);
        // omega is free, so it stays at the nominal value
        assert!((s.u_safe.omega - 0.3).abs() < 1e-8);
    }

    #[test]
    fn row_outside_box_is_infeasible() {
        // v >= 1.5 is unreachable inside |v| <= 1
        let rows = vec![ConstraintRow::new(1.0, 0.0, -1.5)];
        let s = solve_qp(&identity_problem(ControlInput::ZERO, rows)).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
        assert!((s.u_safe.v - 1.0).abs() < 1e-12);
        assert!((s.relaxation - 0.5).abs() < 1e-12);
        assert!(InputBounds::default().contains(&s.u_safe));
    }

    #[test]
    fn feasible_nominal_is_returned_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let nominal = ControlInput::new(rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..2.0));
            let rows: Vec<_> = (0..4)
                .map(|_| {
                    let a = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    ConstraintRow {
                        a,
                        b: -a.dot(&nominal.as_vector()) + rng.gen_range(0.0..1.0),
                    }
                })
                .collect();
            let s = solve_qp(&identity_problem(nominal, rows)).unwrap();
            assert_eq!(s.status, QpStatus::NominalFeasible);
            assert_eq!(s.u_safe.v.to_bits(), nominal.v.to_bits());
            assert_eq!(s.u_safe.omega.to_bits(), nominal.omega.to_bits());
        }
    }

    #[test]
    fn random_solutions_satisfy_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let m = rng.gen_range(0..6);
            let center = Vector2::new(rng.gen_range(-0.9..0.9), rng.gen_range(-1.8..1.8));
            let rows: Vec<_> = (0..m)
                .map(|_| {
                    let a = Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                    ConstraintRow {
                        a,
                        b: -a.dot(&center) + rng.gen_range(0.0..0.5),
                    }
                })
                .collect();
            let r = Matrix2::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let cost = r * r.transpose() + Matrix2::identity() * 0.1;
            let nominal = ControlInput::new(rng.gen_range(-3.0..3.0), rng.gen_range(-5.0..5.0));
            let q = QpProblem::new(cost, nominal, rows, InputBounds::default());
            let s = solve_qp(&q).unwrap();
            assert_ne!(s.status, QpStatus::Infeasible);
            let all = q.all_constraints();
            for row in &all {
                assert!(row.eval(&s.u_safe) >= -1e-7);
            }
            let mut residual = cost * (s.u_safe.as_vector() - nominal.as_vector());
            for (k, lambda) in s.active_set.iter().zip(&s.multipliers) {
                assert!(*lambda >= -1e-9);
                assert!(all[*k].eval(&s.u_safe).abs() <= 1e-6);
                residual -= all[*k].a * *lambda;
            }
            assert!(residual.norm() <= 1e-6, "{residual:?}");
        }
    }
}
