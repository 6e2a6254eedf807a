//! Adapter from [`ConicProgram`] onto the Clarabel interior-point solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DVector;

use super::{Cone, ConicProgram, ConicSolution, SolveStatus, SolverTolerances, DIVERGENCE_LIMIT};
use crate::{Error, Result};

/// Accepted primal violation of a reported optimum, relative to the data
/// scale. Anything beyond is treated as a numerical failure.
const ACCEPT_VIOLATION: f64 = 1e-6;

/// Solve `prog`. Only malformed programs are errors; every solver outcome,
/// including infeasibility, is reported through [`ConicSolution::status`].
pub fn solve_conic(prog: &ConicProgram, tol: &SolverTolerances) -> Result<ConicSolution> {
    prog.validate()?;
    let n = prog.num_vars;
    let rows = prog.num_rows();

    // Clarabel solves min qᵀx s.t. A'x + s = b', s ∈ K. With s = A·x + b this
    // is A' = -A, b' = b.
    let q: Vec<f64> = prog.objective.iter().map(|c| -c).collect();
    let p = CscMatrix::<f64>::zeros((n, n));
    let (a, b) = stack_constraints(prog, rows);
    let cones: Vec<SupportedConeT<f64>> = prog
        .constraints
        .iter()
        .map(|c| match c.cone {
            Cone::Nonnegative(d) => SupportedConeT::NonnegativeConeT(d),
            Cone::SecondOrder(d) => SupportedConeT::SecondOrderConeT(d),
            Cone::Zero(d) => SupportedConeT::ZeroConeT(d),
        })
        .collect();

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(tol.max_iter)
        .tol_feas(tol.feas)
        .tol_gap_abs(tol.gap)
        .tol_gap_rel(tol.gap)
        .build()
        .map_err(|e| Error::InvalidInput(format!("solver settings: {e}")))?;

    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| Error::InvalidInput(format!("solver setup: {e:?}")))?;
    solver.solve();

    let sol = &solver.solution;
    let iterations = sol.iterations;
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    };
    if status != SolveStatus::Optimal {
        return Ok(ConicSolution::failed(status, iterations));
    }

    let x = DVector::from_column_slice(&sol.x);
    let value = prog.objective.dot(&x);
    if !value.is_finite() || value.abs() > DIVERGENCE_LIMIT {
        return Ok(ConicSolution::failed(SolveStatus::Unbounded, iterations));
    }
    if prog.max_violation(&x) > ACCEPT_VIOLATION * prog.data_scale() {
        return Ok(ConicSolution::failed(
            SolveStatus::NumericalFailure,
            iterations,
        ));
    }

    Ok(ConicSolution {
        status,
        point: Some(x),
        objective_value: Some(value),
        primal_residual: solver.info.res_primal,
        gap: solver.info.gap_rel,
        iterations,
    })
}

fn stack_constraints(prog: &ConicProgram, rows: usize) -> (CscMatrix<f64>, Vec<f64>) {
    let n = prog.num_vars;
    let mut b = Vec::with_capacity(rows);
    for c in &prog.constraints {
        b.extend(c.b.iter().copied());
    }

    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for j in 0..n {
        let mut offset = 0;
        for c in &prog.constraints {
            for (i, &v) in c.a.column(j).iter().enumerate() {
                if v != 0.0 {
                    rowval.push(offset + i);
                    nzval.push(-v);
                }
            }
            offset += c.cone.dim();
        }
        colptr.push(rowval.len());
    }
    (CscMatrix::new(rows, n, colptr, rowval, nzval), b)
}
