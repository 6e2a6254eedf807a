//! Conic programs over products of zero, nonnegative-orthant and
//! second-order cones, with a solving contract and LP vertex purification.
//!
//! A [`ConicProgram`] maximizes `cᵀx` subject to a list of affine-conic
//! constraints `A·x + b ∈ K`. [`solve_conic`] executes it and reports a
//! [`ConicSolution`] whose status is one of optimal, infeasible, unbounded or
//! numerical failure.

mod purify;
mod solver;

pub use purify::purify_to_bfs;
pub use solver::solve_conic;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// A closed convex cone of fixed dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `{s : s ≥ 0}`.
    Nonnegative(usize),
    /// `{(t, u) : ‖u‖₂ ≤ t}`; the first coordinate is the bound.
    SecondOrder(usize),
    /// `{0}`, i.e. equality rows.
    Zero(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Nonnegative(d) | Cone::SecondOrder(d) | Cone::Zero(d) => d,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            Cone::SecondOrder(d) if d < 2 => Err(Error::InvalidInput(format!(
                "second-order cone needs dimension >= 2, got {d}"
            ))),
            _ if self.dim() == 0 => Err(Error::InvalidInput("cone of dimension 0".into())),
            _ => Ok(()),
        }
    }

    /// Distance-like violation of `s ∈ K`; zero when `s` is a member.
    pub fn violation(&self, s: &[f64]) -> f64 {
        match self {
            Cone::Nonnegative(_) => s.iter().fold(0.0_f64, |acc, &v| acc.max(-v)),
            Cone::Zero(_) => s.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs())),
            Cone::SecondOrder(_) => {
                let tail = s[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                (tail - s[0]).max(0.0)
            }
        }
    }
}

/// One affine-conic constraint `a·x + b ∈ cone`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeConstraint {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub cone: Cone,
}

impl ConeConstraint {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, cone: Cone) -> Self {
        ConeConstraint { a, b, cone }
    }

    /// `a·x + b`.
    pub fn image(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b
    }

    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        self.cone.violation(self.image(x).as_slice())
    }
}

/// Maximize `objectiveᵀx` subject to every constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: DVector<f64>,
    pub constraints: Vec<ConeConstraint>,
}

impl ConicProgram {
    pub fn new(num_vars: usize, objective: DVector<f64>) -> Self {
        ConicProgram {
            num_vars,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn push(&mut self, a: DMatrix<f64>, b: DVector<f64>, cone: Cone) {
        self.constraints.push(ConeConstraint::new(a, b, cone));
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.iter().map(|c| c.cone.dim()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::dim(
                "conic objective",
                self.num_vars,
                self.objective.len(),
            ));
        }
        for c in &self.constraints {
            c.cone.check()?;
            if c.a.ncols() != self.num_vars {
                return Err(Error::dim("constraint columns", self.num_vars, c.a.ncols()));
            }
            if c.a.nrows() != c.cone.dim() {
                return Err(Error::dim("constraint rows", c.cone.dim(), c.a.nrows()));
            }
            if c.b.len() != c.cone.dim() {
                return Err(Error::dim("constraint offset", c.cone.dim(), c.b.len()));
            }
        }
        Ok(())
    }

    /// Largest cone violation over all constraints at `x`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max)
    }

    /// Scale used to make feasibility residuals relative.
    pub(crate) fn data_scale(&self) -> f64 {
        self.constraints
            .iter()
            .flat_map(|c| c.b.iter())
            .fold(1.0_f64, |acc, v| acc.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    /// Primal feasibility tolerance.
    pub feas: f64,
    /// Relative duality-gap tolerance.
    pub gap: f64,
    pub max_iter: u32,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        SolverTolerances {
            feas: 1e-8,
            gap: 1e-8,
            max_iter: 200,
        }
    }
}

/// Objective magnitude beyond which an "optimal" report is treated as
/// divergence to infinity.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal point, present iff `status == Optimal`.
    pub point: Option<DVector<f64>>,
    /// `cᵀ·point`, present iff `status == Optimal`.
    pub objective_value: Option<f64>,
    /// Solver-reported primal residual (scaled).
    pub primal_residual: f64,
    /// Solver-reported relative duality gap.
    pub gap: f64,
    pub iterations: u32,
}

impl ConicSolution {
    pub(crate) fn failed(status: SolveStatus, iterations: u32) -> Self {
        ConicSolution {
            status,
            point: None,
            objective_value: None,
            primal_residual: f64::NAN,
            gap: f64::NAN,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// The optimal point and value, or the status turned into an error.
    pub fn into_optimal(self, what: &str) -> Result<(DVector<f64>, f64)> {
        match (self.status, self.point, self.objective_value) {
            (SolveStatus::Optimal, Some(p), Some(v)) => Ok((p, v)),
            (SolveStatus::Infeasible, ..) => Err(Error::Infeasible(what.to_string())),
            (SolveStatus::Unbounded, ..) => Err(Error::Unbounded(what.to_string())),
            _ => Err(Error::NumericalFailure(format!(
                "{what}: solver did not converge in {} iterations",
                self.iterations
            ))),
        }
    }
}
