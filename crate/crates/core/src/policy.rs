//! Policy computation: the omniscient optimal feasible policy, the ℓ1
//! optimistic-pessimistic step and the upper-bound-maximization step.
//!
//! Every procedure optimizes over the policy mean `z ∈ Co(D)` through the
//! perspective lift of the decision set and turns the optimal lifted
//! solution into a finite-support distribution over members of `D`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{purify_to_bfs, solve_conic, ConicSolution, SolveStatus, SolverTolerances};
use crate::decision_set::{
    extract_mixture, hull_lift, mixture_mean, DecisionSet, HullLift, LinearBound, EPS_ALPHA,
    MEMBERSHIP_TOL,
};
use crate::estimation::ConfidenceGeometry;
use crate::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A finite-support distribution over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    support: Vec<(DVector<f64>, f64)>,
    mean: DVector<f64>,
}

impl Policy {
    /// Positive weights summing to one; the mean is recomputed from the
    /// support.
    pub fn new(support: Vec<(DVector<f64>, f64)>) -> Result<Self> {
        let Some((first, _)) = support.first() else {
            return Err(Error::InvalidInput("policy with empty support".into()));
        };
        let d = first.len();
        if support.iter().any(|(p, _)| p.len() != d) {
            return Err(Error::InvalidInput(
                "policy points differ in dimension".into(),
            ));
        }
        if support.iter().any(|(_, w)| !(*w > 0.0)) {
            return Err(Error::InvalidInput(
                "policy weights must be positive".into(),
            ));
        }
        let total: f64 = support.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "policy weights sum to {total}, not 1"
            )));
        }
        let mean = mixture_mean(&support);
        Ok(Policy { support, mean })
    }

    pub fn deterministic(point: DVector<f64>) -> Self {
        Policy {
            mean: point.clone(),
            support: vec![(point, 1.0)],
        }
    }

    pub fn support(&self) -> &[(DVector<f64>, f64)] {
        &self.support
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Which procedure produced a round's policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "L1")]
    L1,
    #[serde(rename = "UBM-exact")]
    UbmExact,
    #[serde(rename = "SafeFallback")]
    SafeFallback,
    /// Played the omniscient policy.
    #[serde(rename = "Oracle")]
    Oracle,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::L1 => "L1",
            Branch::UbmExact => "UBM-exact",
            Branch::SafeFallback => "SafeFallback",
            Branch::Oracle => "Oracle",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L1" => Ok(Branch::L1),
            "UBM-exact" => Ok(Branch::UbmExact),
            "SafeFallback" => Ok(Branch::SafeFallback),
            "Oracle" => Ok(Branch::Oracle),
            other => Err(Error::InvalidInput(format!("unknown branch `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub policy: Policy,
    pub z_star: DVector<f64>,
    pub branch: Branch,
    pub objective_value: f64,
    /// Number of conic programs solved for this step.
    pub subproblem_solves: usize,
}

fn check_constraints(set: &DecisionSet, gamma: &DMatrix<f64>, tau: &DVector<f64>) -> Result<()> {
    if gamma.ncols() != set.dim() {
        return Err(Error::dim("cost matrix columns", set.dim(), gamma.ncols()));
    }
    if gamma.nrows() != tau.len() {
        return Err(Error::dim("threshold vector", gamma.nrows(), tau.len()));
    }
    Ok(())
}

/// The optimal feasible policy for known `θ` and `Γ`, with at most `m + 1`
/// support points.
pub fn oracle_policy(
    theta: &DVector<f64>,
    gamma: &DMatrix<f64>,
    tau: &DVector<f64>,
    set: &DecisionSet,
) -> Result<Policy> {
    check_constraints(set, gamma, tau)?;
    if theta.len() != set.dim() {
        return Err(Error::dim("reward parameter", set.dim(), theta.len()));
    }
    let safe_cost = gamma * set.safe_action();
    if let Some(j) = (0..tau.len()).find(|&j| safe_cost[j] >= tau[j]) {
        return Err(Error::Infeasible(format!(
            "safe action cost {} does not satisfy threshold {} in row {j}",
            safe_cost[j], tau[j]
        )));
    }

    let rows: Vec<LinearBound> = (0..tau.len())
        .map(|j| LinearBound {
            a: gamma.row(j).transpose(),
            t: tau[j],
        })
        .collect();
    let lift = hull_lift(set, theta, &rows, &[])?;
    let solution = solve_conic(&lift.program, &SolverTolerances::default())?;
    if !solution.is_optimal() {
        solution
            .clone()
            .into_optimal("optimal-policy hull program")?;
    }
    let mixture = extract_mixture(set, &lift, &solution, EPS_ALPHA)?;
    let (points, weights): (Vec<_>, Vec<_>) = mixture.into_iter().unzip();
    reduce_support(&points, &weights, theta, gamma, tau)
}

/// Reduces a feasible mixture to a basic feasible solution of
/// `max θᵀZβ s.t. ΓZβ ≤ τ, 1ᵀβ = 1, β ≥ 0` over the given points.
///
/// The inequality rows get slack variables, giving an `(m + 1)`-row standard
/// form LP whose basic solutions use at most `m + 1` points.
pub fn reduce_support(
    points: &[DVector<f64>],
    weights: &[f64],
    theta: &DVector<f64>,
    gamma: &DMatrix<f64>,
    tau: &DVector<f64>,
) -> Result<Policy> {
    let k = points.len();
    let m = tau.len();
    if k == 0 || weights.len() != k {
        return Err(Error::dim("support weights", k, weights.len()));
    }
    let d = theta.len();
    if points.iter().any(|p| p.len() != d) || gamma.shape() != (m, d) {
        return Err(Error::dim("support points", d, gamma.ncols()));
    }
    let total: f64 = weights.iter().sum();
    let beta = DVector::from_iterator(k, weights.iter().map(|w| w / total));
    let z = DMatrix::from_columns(points);
    let cost = gamma * &z * &beta;
    for j in 0..m {
        if cost[j] > tau[j] + 1e-6 * (1.0 + tau[j].abs()) {
            return Err(Error::InvalidInput(format!(
                "mixture cost {} exceeds threshold {} in row {j}",
                cost[j], tau[j]
            )));
        }
    }
    if k == 1 {
        return Ok(Policy::deterministic(points[0].clone()));
    }

    let q = k + m;
    let mut a = DMatrix::zeros(m + 1, q);
    a.view_mut((0, 0), (m, k)).copy_from(&(gamma * &z));
    a.view_mut((0, k), (m, m)).fill_with_identity();
    a.view_mut((m, 0), (1, k)).fill(1.0);
    let mut b = DVector::zeros(m + 1);
    b.rows_mut(0, m).copy_from(tau);
    b[m] = 1.0;
    let mut c = DVector::zeros(q);
    c.rows_mut(0, k).copy_from(&(z.transpose() * theta));
    let mut w = DVector::zeros(q);
    w.rows_mut(0, k).copy_from(&beta);
    for j in 0..m {
        w[k + j] = (tau[j] - cost[j]).max(0.0);
    }

    let reduced = purify_to_bfs(&a, &b, &c, &w)?;
    let kept: Vec<(DVector<f64>, f64)> = (0..k)
        .filter(|&i| reduced[i] > 0.0)
        .map(|i| (points[i].clone(), reduced[i]))
        .collect();
    let total: f64 = kept.iter().map(|(_, w)| w).sum();
    Policy::new(kept.into_iter().map(|(p, w)| (p, w / total)).collect())
}

/// One solved pessimistic subproblem.
struct Subproblem {
    lift: HullLift,
    solution: ConicSolution,
    value: f64,
    z: DVector<f64>,
}

/// `max objectiveᵀz` over `Co(set)` intersected with every pessimistic cost
/// constraint; `None` when that region is empty.
fn solve_pessimistic(
    objective: &DVector<f64>,
    geom: &ConfidenceGeometry,
    set: &DecisionSet,
    tau: &DVector<f64>,
) -> Result<Option<Subproblem>> {
    if tau.len() != geom.num_constraints() {
        return Err(Error::dim(
            "threshold vector",
            geom.num_constraints(),
            tau.len(),
        ));
    }
    if geom.dim() != set.dim() {
        return Err(Error::dim("confidence geometry", set.dim(), geom.dim()));
    }
    let socs: Vec<_> = (0..tau.len())
        .map(|j| geom.pessimistic_soc(j, tau[j]))
        .collect();
    let lift = hull_lift(set, objective, &[], &socs)?;
    let solution = solve_conic(&lift.program, &SolverTolerances::default())?;
    match solution.status {
        SolveStatus::Optimal => {
            let point = solution
                .point
                .as_ref()
                .expect("optimal solution has a point");
            let z = lift.z(point);
            Ok(Some(Subproblem {
                value: objective.dot(&z),
                z,
                lift,
                solution,
            }))
        }
        SolveStatus::Infeasible => Ok(None),
        _ => {
            solution.into_optimal("pessimistic subproblem")?;
            unreachable!()
        }
    }
}

/// `f(θ) = max θᵀz` over the pessimistic safe region within `Co(set)`.
pub fn evaluate_f(
    theta: &DVector<f64>,
    geom: &ConfidenceGeometry,
    set: &DecisionSet,
    tau: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    match solve_pessimistic(theta, geom, set, tau)? {
        Some(sub) => Ok((sub.value, sub.z)),
        None => Err(Error::Infeasible("pessimistic safe region is empty".into())),
    }
}

fn outcome_from(
    set: &DecisionSet,
    sub: &Subproblem,
    branch: Branch,
    objective_value: f64,
    subproblem_solves: usize,
) -> Result<StepOutcome> {
    let mixture = extract_mixture(set, &sub.lift, &sub.solution, EPS_ALPHA)?;
    debug_assert!(mixture
        .iter()
        .all(|(p, _)| set.contains(p, MEMBERSHIP_TOL).unwrap_or(false)));
    Ok(StepOutcome {
        policy: Policy::new(mixture)?,
        z_star: sub.z.clone(),
        branch,
        objective_value,
        subproblem_solves,
    })
}

fn safe_fallback(geom: &ConfidenceGeometry, set: &DecisionSet, solves: usize) -> StepOutcome {
    let x0 = set.safe_action().clone();
    StepOutcome {
        objective_value: geom.optimistic_reward(&x0),
        policy: Policy::deterministic(x0.clone()),
        z_star: x0,
        branch: Branch::SafeFallback,
        subproblem_solves: solves,
    }
}

/// Maximizes `f` over the ℓ1 reward confidence polytope by evaluating it at
/// the polytope's `2d` vertices. Ties keep the lowest vertex index.
pub fn l1_oplb_step(
    geom: &ConfidenceGeometry,
    set: &DecisionSet,
    tau: &DVector<f64>,
) -> Result<StepOutcome> {
    let vertices = geom.l1_vertices();
    let mut best: Option<Subproblem> = None;
    for theta in &vertices {
        if let Some(sub) = solve_pessimistic(theta, geom, set, tau)? {
            if best.as_ref().is_none_or(|b| sub.value > b.value) {
                best = Some(sub);
            }
        }
    }
    match best {
        Some(sub) => outcome_from(set, &sub, Branch::L1, sub.value, vertices.len()),
        None => {
            tracing::debug!("all ℓ1 vertex subproblems infeasible; playing the safe action");
            Ok(safe_fallback(geom, set, vertices.len()))
        }
    }
}

/// Relative activity tolerance `1e-6·(1 + |τ|)`.
pub fn default_activity_tol(tau: f64) -> f64 {
    1e-6 * (1.0 + tau.abs())
}

/// Maximizes the linear upper bound `ρτ + (θ̂ − ρμ̂)ᵀz` of the optimistic
/// ℓ2 objective over the pessimistic region. When the pessimistic
/// constraint is active at the maximizer the bound is tight there and the
/// maximizer solves the ℓ2 problem exactly; otherwise the step falls back to
/// [`l1_oplb_step`].
///
/// The bound is defined for a single cost constraint; with several rows the
/// step is the ℓ1 step.
pub fn ubm_step(
    geom: &ConfidenceGeometry,
    set: &DecisionSet,
    tau: &DVector<f64>,
    activity_tol: f64,
) -> Result<StepOutcome> {
    if tau.len() != 1 || geom.num_constraints() != 1 {
        return l1_oplb_step(geom, set, tau);
    }
    let mu_hat = geom.mu_hat.row(0).transpose();
    let slope = &geom.theta_hat - &mu_hat * geom.rho;
    if let Some(sub) = solve_pessimistic(&slope, geom, set, tau)? {
        let slack = tau[0] - geom.pessimistic_cost_bound(&sub.z, 0);
        if slack <= activity_tol {
            let value = geom.optimistic_reward(&sub.z);
            return outcome_from(set, &sub, Branch::UbmExact, value, 1);
        }
    }
    let mut outcome = l1_oplb_step(geom, set, tau)?;
    outcome.subproblem_solves += 1;
    Ok(outcome)
}
