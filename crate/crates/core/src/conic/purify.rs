use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Feasibility tolerance for the purification input, relative to the data
/// scale.
const FEAS_TOL: f64 = 1e-8;
/// Entries at or below this are treated as exact zeros.
const ZERO: f64 = 1e-13;

/// Move a feasible point of `{w : A·w = b, w ≥ 0}` to a basic feasible
/// solution without decreasing `cᵀw`.
///
/// Mass is pivoted along null-space directions of the active columns until
/// those columns are linearly independent, so the result has at most
/// `rank(A) ≤ p` non-zero entries. When two entries block a step at the same
/// ratio the smaller index is dropped.
pub fn purify_to_bfs(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (p, q) = a.shape();
    if b.len() != p {
        return Err(Error::dim("purify rhs", p, b.len()));
    }
    if c.len() != q {
        return Err(Error::dim("purify objective", q, c.len()));
    }
    if w.len() != q {
        return Err(Error::dim("purify weights", q, w.len()));
    }
    if p > q {
        return Err(Error::InvalidInput(format!(
            "equality matrix must be fat, got {p}x{q}"
        )));
    }

    let scale = 1.0 + b.amax() + a.amax() * w.abs().sum();
    let tol = FEAS_TOL * scale;
    if w.min() < -tol {
        return Err(Error::InvalidInput(format!(
            "weights must be nonnegative, found {}",
            w.min()
        )));
    }
    let residual = (a * w - b).amax();
    if residual > tol {
        return Err(Error::InvalidInput(format!(
            "weights violate A·w = b by {residual:.3e}"
        )));
    }

    let mut w = w.map(|v| if v <= ZERO { 0.0 } else { v });
    let rank_tol = 1e-10 * a.amax().max(1.0) * q as f64;

    loop {
        let active: Vec<usize> = (0..q).filter(|&i| w[i] > 0.0).collect();
        let Some(local) = null_vector(a, &active, rank_tol) else {
            return Ok(w);
        };
        let mut dir = DVector::zeros(q);
        for (k, &i) in active.iter().enumerate() {
            dir[i] = local[k];
        }

        let slope = c.dot(&dir);
        let has_negative = dir.iter().any(|&v| v < 0.0);
        if slope < 0.0 || !has_negative {
            if slope > 1e-12 * c.amax().max(1.0) {
                return Err(Error::Unbounded(
                    "objective increases along a nonnegative null direction".into(),
                ));
            }
            dir.neg_mut();
        }

        // Ratio test; ties go to the smaller index.
        let mut step = f64::INFINITY;
        let mut blocking = usize::MAX;
        for &i in &active {
            if dir[i] < 0.0 {
                let ratio = w[i] / -dir[i];
                if ratio < step * (1.0 - 1e-12) {
                    step = ratio;
                    blocking = i;
                }
            }
        }
        debug_assert!(blocking != usize::MAX);

        w.axpy(step, &dir, 1.0);
        w[blocking] = 0.0;
        for v in w.iter_mut() {
            if *v <= ZERO {
                *v = 0.0;
            }
        }
    }
}

/// A unit null vector of the columns `cols` of `a`, or `None` when those
/// columns are linearly independent. Computed by Gaussian elimination with
/// partial pivoting; the first free column parameterizes the vector.
fn null_vector(a: &DMatrix<f64>, cols: &[usize], tol: f64) -> Option<Vec<f64>> {
    let p = a.nrows();
    let s = cols.len();
    if s == 0 {
        return None;
    }
    let mut m = DMatrix::from_fn(p, s, |r, k| a[(r, cols[k])]);
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut row = 0;
    let mut free = None;
    for col in 0..s {
        if row == p {
            free.get_or_insert(col);
            break;
        }
        let (best, mag) = (row..p)
            .map(|r| (r, m[(r, col)].abs()))
            .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= tol {
            free.get_or_insert(col);
            continue;
        }
        m.swap_rows(row, best);
        let pivot = m[(row, col)];
        for k in col..s {
            m[(row, k)] /= pivot;
        }
        for r in 0..p {
            if r != row {
                let factor = m[(r, col)];
                if factor != 0.0 {
                    for k in col..s {
                        m[(r, k)] -= factor * m[(row, k)];
                    }
                }
            }
        }
        pivots.push((row, col));
        row += 1;
    }

    let free = free?;
    let mut v = vec![0.0; s];
    v[free] = 1.0;
    for &(r, c) in &pivots {
        if c < free {
            v[c] = -m[(r, free)];
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Some(v.into_iter().map(|x| x / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn support(w: &DVector<f64>) -> usize {
        w.iter().filter(|&&v| v > 0.0).count()
    }

    #[test]
    fn equal_columns_collapse_to_one() {
        let w = purify_to_bfs(
            &dmatrix![1.0, 1.0],
            &dvector![1.0],
            &dvector![1.0, 1.0],
            &dvector![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(support(&w), 1);
        assert!((w.sum() - 1.0).abs() < 1e-14);
        // equal blocking ratios: index 0 is dropped
        assert_eq!(w, dvector![0.0, 1.0]);
    }

    #[test]
    fn vertex_is_a_fixed_point() {
        let a = dmatrix![1.0, 1.0, 1.0; 0.0, 1.0, 2.0];
        let w = dvector![0.5, 0.0, 0.5];
        let out = purify_to_bfs(&a, &dvector![1.0, 1.0], &dvector![1.0, 2.0, 2.5], &w).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn simplex_with_cost_row_reaches_enumerated_vertex() {
        // Vertices of {w ≥ 0, Σw = 1, w₂ + 2w₃ = 1}, enumerated by hand over
        // supports of size ≤ 2: (0.5, 0, 0.5) with cᵀw = 1.75 and (0, 1, 0)
        // with cᵀw = 2.
        let a = dmatrix![1.0, 1.0, 1.0; 0.0, 1.0, 2.0];
        let c = dvector![1.0, 2.0, 2.5];
        let w = DVector::from_element(3, 1.0 / 3.0);
        let out = purify_to_bfs(&a, &dvector![1.0, 1.0], &c, &w).unwrap();
        assert!(support(&out) <= 2);
        assert!(c.dot(&out) >= c.dot(&w) - 1e-12);
        let vertices = [dvector![0.5, 0.0, 0.5], dvector![0.0, 1.0, 0.0]];
        assert!(vertices.iter().any(|v| (v - &out).amax() < 1e-12), "{out}");
    }

    #[test]
    fn rejects_infeasible_input() {
        let err = purify_to_bfs(
            &dmatrix![1.0, 1.0],
            &dvector![1.0],
            &dvector![1.0, 1.0],
            &dvector![0.7, 0.7],
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        let err = purify_to_bfs(
            &dmatrix![1.0, 1.0],
            &dvector![1.0],
            &dvector![1.0, 1.0],
            &dvector![1.5, -0.5],
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn null_vector_of_independent_columns_is_none() {
        let a = dmatrix![1.0, 0.0; 0.0, 1.0];
        assert!(null_vector(&a, &[0, 1], 1e-12).is_none());
        let v = null_vector(&dmatrix![1.0, 2.0], &[0, 1], 1e-12).unwrap();
        assert!((v[0] + 2.0 * v[1]).abs() < 1e-14);
    }
}
