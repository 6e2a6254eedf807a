//! The simulated constrained bandit and its regret ledger.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::policy::{Branch, Policy};
use crate::{Error, Result};

/// Tolerance of the expected-cost constraint check.
pub const VIOLATION_TOL: f64 = 1e-9;
/// Floor applied to per-round regret to absorb solver gap.
pub const REGRET_FLOOR: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub theta_star: DVector<f64>,
    /// `Γ*`, one row `μ*ⱼ` per constraint.
    pub cost_matrix: DMatrix<f64>,
    pub tau: DVector<f64>,
    /// Standard deviation of the Gaussian reward and cost noise.
    pub noise_scale: f64,
}

impl Environment {
    /// Checks dimensions and that `safe_action` is strictly feasible.
    pub fn new(
        theta_star: DVector<f64>,
        cost_matrix: DMatrix<f64>,
        tau: DVector<f64>,
        noise_scale: f64,
        safe_action: &DVector<f64>,
    ) -> Result<Self> {
        let d = theta_star.len();
        if cost_matrix.ncols() != d {
            return Err(Error::dim("cost matrix columns", d, cost_matrix.ncols()));
        }
        if cost_matrix.nrows() != tau.len() {
            return Err(Error::dim(
                "threshold vector",
                cost_matrix.nrows(),
                tau.len(),
            ));
        }
        if safe_action.len() != d {
            return Err(Error::dim("safe action", d, safe_action.len()));
        }
        if !(noise_scale >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise scale must be >= 0, got {noise_scale}"
            )));
        }
        let safe_cost = &cost_matrix * safe_action;
        if let Some(j) = (0..tau.len()).find(|&j| !(safe_cost[j] < tau[j])) {
            return Err(Error::InvalidInput(format!(
                "safe action cost {} is not below threshold {} in row {j}",
                safe_cost[j], tau[j]
            )));
        }
        Ok(Environment {
            theta_star,
            cost_matrix,
            tau,
            noise_scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.tau.len()
    }

    /// `(θ*ᵀx + η_r, Γ*x + η_c)` with independent `N(0, R²)` noise.
    pub fn observe<R: Rng + ?Sized>(&self, x: &DVector<f64>, rng: &mut R) -> (f64, DVector<f64>) {
        let eta: f64 = rng.sample(StandardNormal);
        let reward = self.theta_star.dot(x) + self.noise_scale * eta;
        let mut cost = &self.cost_matrix * x;
        for c in cost.iter_mut() {
            let eta: f64 = rng.sample(StandardNormal);
            *c += self.noise_scale * eta;
        }
        (reward, cost)
    }

    pub fn expected_reward(&self, mean: &DVector<f64>) -> f64 {
        self.theta_star.dot(mean)
    }

    pub fn expected_cost(&self, mean: &DVector<f64>) -> DVector<f64> {
        &self.cost_matrix * mean
    }

    /// `θ*ᵀoptimal_mean − θ*ᵀpolicy.mean`, floored at [`REGRET_FLOOR`].
    pub fn regret_increment(&self, optimal_mean: &DVector<f64>, policy: &Policy) -> f64 {
        (self.expected_reward(optimal_mean) - self.expected_reward(policy.mean())).max(REGRET_FLOOR)
    }

    /// Whether the policy's expected cost exceeds any threshold.
    pub fn violation_check(&self, policy: &Policy) -> bool {
        let cost = self.expected_cost(policy.mean());
        cost.iter()
            .zip(self.tau.iter())
            .any(|(c, t)| *c > t + VIOLATION_TOL)
    }
}

/// Draws support point `i` with probability `weightᵢ`; returns its index and
/// the point.
pub fn sample_action<R: Rng + ?Sized>(policy: &Policy, rng: &mut R) -> (usize, DVector<f64>) {
    let support = policy.support();
    if support.len() == 1 {
        return (0, support[0].0.clone());
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, (p, w)) in support.iter().enumerate() {
        acc += w;
        if u < acc {
            return (i, p.clone());
        }
    }
    let last = support.len() - 1;
    (last, support[last].0.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub optimal_value: f64,
    pub policy_value: f64,
    pub regret_increment: f64,
    pub cumulative_regret: f64,
    /// True expected cost `Γ*·mean`, one entry per constraint.
    pub costs: Vec<f64>,
    pub violation: bool,
    pub branch: Branch,
}

/// Per-round pseudo-regret and constraint bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretLedger {
    records: Vec<RoundRecord>,
    cumulative: f64,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a round; the cumulative column is the running sum.
    pub fn push(
        &mut self,
        optimal_value: f64,
        policy_value: f64,
        regret_increment: f64,
        costs: Vec<f64>,
        violation: bool,
        branch: Branch,
    ) {
        self.cumulative += regret_increment;
        self.records.push(RoundRecord {
            t: self.records.len() + 1,
            optimal_value,
            policy_value,
            regret_increment,
            cumulative_regret: self.cumulative,
            costs,
            violation,
            branch,
        });
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cumulative_regret(&self) -> f64 {
        self.cumulative
    }

    pub fn violation_count(&self) -> usize {
        self.records.iter().filter(|r| r.violation).count()
    }

    pub fn cumulative_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cumulative_regret).collect()
    }

    fn header(m: usize) -> Vec<String> {
        let mut h: Vec<String> = [
            "t",
            "optimal_value",
            "policy_value",
            "regret_increment",
            "cumulative_regret",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((1..=m).map(|j| format!("cost_{j}")));
        h.push("violation".into());
        h.push("branch".into());
        h
    }

    /// Writes `t, optimal_value, policy_value, regret_increment,
    /// cumulative_regret, cost_1..cost_m, violation, branch`.
    pub fn write_csv<W: Write>(&self, num_constraints: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::header(num_constraints))?;
        for r in &self.records {
            let mut row = vec![
                r.t.to_string(),
                r.optimal_value.to_string(),
                r.policy_value.to_string(),
                r.regret_increment.to_string(),
                r.cumulative_regret.to_string(),
            ];
            row.extend(r.costs.iter().map(f64::to_string));
            row.push(r.violation.to_string());
            row.push(r.branch.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("ledger", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn {
                    column: name.to_string(),
                    path: "ledger".into(),
                })
        };
        let t_col = col("t")?;
        let opt_col = col("optimal_value")?;
        let pol_col = col("policy_value")?;
        let inc_col = col("regret_increment")?;
        let cum_col = col("cumulative_regret")?;
        let vio_col = col("violation")?;
        let br_col = col("branch")?;
        let cost_cols: Vec<usize> = (1..)
            .map_while(|j| headers.iter().position(|h| h == format!("cost_{j}")))
            .collect();

        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("bad number `{s}` in ledger")))
        };
        let mut ledger = RegretLedger::new();
        for rec in rdr.records() {
            let rec = rec?;
            let record = RoundRecord {
                t: rec[t_col]
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad round `{}`", &rec[t_col])))?,
                optimal_value: parse_f(&rec[opt_col])?,
                policy_value: parse_f(&rec[pol_col])?,
                regret_increment: parse_f(&rec[inc_col])?,
                cumulative_regret: parse_f(&rec[cum_col])?,
                costs: cost_cols
                    .iter()
                    .map(|&c| parse_f(&rec[c]))
                    .collect::<Result<_>>()?,
                violation: rec[vio_col]
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad flag `{}`", &rec[vio_col])))?,
                branch: rec[br_col].parse()?,
            };
            ledger.cumulative = record.cumulative_regret;
            ledger.records.push(record);
        }
        Ok(ledger)
    }
}
