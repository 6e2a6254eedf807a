//! Independent oracles and random instance generators shared by the
//! property and acceptance tests. Nothing here calls the conic solver.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use safe_bandit::decision_set::PieceSpec;
use safe_bandit::estimation::{ConfidenceGeometry, GramNorm};

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `max θᵀZβ s.t. ΓZβ ≤ τ, 1ᵀβ = 1, β ≥ 0` by enumerating every basic
/// solution: a support of size `k ≤ m + 1` together with `k − 1` tight
/// constraint rows. `None` when no basic solution is feasible.
pub fn brute_force_distribution_lp(
    points: &[DVector<f64>],
    theta: &DVector<f64>,
    gamma: &DMatrix<f64>,
    tau: &DVector<f64>,
) -> Option<f64> {
    let n = points.len();
    let m = tau.len();
    let costs: Vec<DVector<f64>> = points.iter().map(|p| gamma * p).collect();
    let rewards: Vec<f64> = points.iter().map(|p| theta.dot(p)).collect();
    let mut best: Option<f64> = None;
    for k in 1..=(m + 1).min(n) {
        for support in combinations(n, k) {
            for rows in combinations(m, k - 1) {
                let mut a = DMatrix::zeros(k, k);
                let mut b = DVector::zeros(k);
                for (r, &row) in rows.iter().enumerate() {
                    for (c, &i) in support.iter().enumerate() {
                        a[(r, c)] = costs[i][row];
                    }
                    b[r] = tau[row];
                }
                for c in 0..k {
                    a[(k - 1, c)] = 1.0;
                }
                b[k - 1] = 1.0;
                let Some(w) = a.lu().solve(&b) else { continue };
                if w.iter().any(|v| !v.is_finite() || *v < -1e-10) {
                    continue;
                }
                let feasible = (0..m).all(|j| {
                    let c: f64 = support
                        .iter()
                        .zip(w.iter())
                        .map(|(&i, wi)| wi * costs[i][j])
                        .sum();
                    c <= tau[j] + 1e-9
                });
                if !feasible {
                    continue;
                }
                let v: f64 = support
                    .iter()
                    .zip(w.iter())
                    .map(|(&i, wi)| wi * rewards[i])
                    .sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    }
    best
}

/// Points on the boundary of a 2-D piece, spaced about `step` apart.
pub fn boundary_samples(spec: &PieceSpec, step: f64) -> Vec<(f64, f64)> {
    match spec {
        PieceSpec::Ball { center, radius } => {
            let n = ((2.0 * std::f64::consts::PI * radius / step).ceil() as usize).max(8);
            (0..n)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    (center[0] + radius * a.cos(), center[1] + radius * a.sin())
                })
                .collect()
        }
        PieceSpec::Box { lower, upper } => {
            let corners = [
                (lower[0], lower[1]),
                (upper[0], lower[1]),
                (upper[0], upper[1]),
                (lower[0], upper[1]),
            ];
            let mut out = Vec::new();
            for i in 0..4 {
                let (p, q) = (corners[i], corners[(i + 1) % 4]);
                let len = (q.0 - p.0).hypot(q.1 - p.1);
                let n = ((len / step).ceil() as usize).max(1);
                for s in 0..n {
                    let f = s as f64 / n as f64;
                    out.push((p.0 + f * (q.0 - p.0), p.1 + f * (q.1 - p.1)));
                }
            }
            out
        }
        PieceSpec::Polytope { .. } => panic!("boundary sampling covers balls and boxes"),
    }
}

/// `max v` over the convex hull of 2-D points `(u, v)` intersected with
/// `u ≤ t`, through the upper hull. `None` if every point has `u > t`.
pub fn max_over_hull_with_cut(points: &[(f64, f64)], t: f64) -> Option<f64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // upper hull by the monotone chain, right to left
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    upper.reverse();
    let mut best: Option<f64> = None;
    let mut consider = |v: f64| best = Some(best.map_or(v, |b: f64| b.max(v)));
    for w in upper.windows(2) {
        let (p, q) = (w[0], w[1]);
        if p.0 <= t {
            consider(p.1);
        }
        if p.0 <= t && q.0 > t {
            let f = (t - p.0) / (q.0 - p.0);
            consider(p.1 + f * (q.1 - p.1));
        }
    }
    if let Some(&last) = upper.last() {
        if last.0 <= t {
            consider(last.1);
        }
    }
    best
}

/// Largest `s ≥ 0` with `s·u` in a ball or box that contains the origin.
pub fn ray_extent(spec: &PieceSpec, u: &[f64]) -> f64 {
    match spec {
        PieceSpec::Ball { center, radius } => {
            let uc: f64 = u.iter().zip(center).map(|(a, b)| a * b).sum();
            let cc: f64 = center.iter().map(|c| c * c).sum();
            let uu: f64 = u.iter().map(|a| a * a).sum();
            (uc + (uc * uc - uu * (cc - radius * radius)).max(0.0).sqrt()) / uu
        }
        PieceSpec::Box { lower, upper } => u
            .iter()
            .enumerate()
            .map(|(i, &ui)| {
                if ui > 0.0 {
                    upper[i] / ui
                } else if ui < 0.0 {
                    lower[i] / ui
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min),
        PieceSpec::Polytope { .. } => panic!("ray extent covers balls and boxes"),
    }
}

/// `‖z‖` in the inverse-Gram norm, computed from `Σ` by a fresh solve.
pub fn inverse_gram_norm(gram: &DMatrix<f64>, z: &DVector<f64>) -> f64 {
    let y = gram.clone().lu().solve(z).expect("Gram is invertible");
    z.dot(&y).max(0.0).sqrt()
}

/// The ℓ2 optimistic program over a single piece containing the origin:
/// `max_z θ̂ᵀz + ρβ‖z‖_{Σ⁻¹}` subject to `z ∈ piece` and
/// `μ̂ᵀz + β‖z‖_{Σ⁻¹} ≤ τ`. The objective is convex and positively
/// homogeneous and the feasible set is star-shaped about the origin, so the
/// maximum lies at the end of some ray; `angles` rays are scanned.
pub fn l2_ray_oracle(
    geom: &ConfidenceGeometry,
    piece: &PieceSpec,
    tau: f64,
    angles: usize,
) -> (f64, DVector<f64>) {
    let mut best = (0.0, DVector::zeros(2));
    let mu: DVector<f64> = geom.mu_hat.row(0).transpose();
    for k in 0..angles {
        let a = 2.0 * std::f64::consts::PI * k as f64 / angles as f64;
        let u = DVector::from_vec(vec![a.cos(), a.sin()]);
        let norm = inverse_gram_norm(&geom.gram, &u);
        let mut s = ray_extent(piece, u.as_slice());
        let pess = mu.dot(&u) + geom.beta * norm;
        if pess > 0.0 {
            s = s.min(tau / pess);
        }
        let v = s * (geom.theta_hat.dot(&u) + geom.rho * geom.beta * norm);
        if v > best.0 {
            best = (v, u * s);
        }
    }
    best
}

/// A random confidence geometry in `d` dimensions with one cost row:
/// `Σ = λI + Σxxᵀ` over random actions in the unit ball.
pub fn random_geometry<R: Rng>(rng: &mut R, d: usize) -> (ConfidenceGeometry, f64) {
    let lambda = rng.random_range(0.5..4.0);
    let mut gram = DMatrix::identity(d, d) * lambda;
    for _ in 0..rng.random_range(0..40) {
        let x = random_in_ball(rng, d, 1.0);
        gram += &x * x.transpose();
    }
    let theta_hat = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
    let mu_hat = DMatrix::from_fn(1, d, |_, _| rng.random_range(-1.0..1.0));
    let tau = rng.random_range(0.3..2.0);
    let beta = rng.random_range(0.2..3.0);
    let rho = 1.0 + 2.0 / tau;
    let geom =
        ConfidenceGeometry::new(theta_hat, mu_hat, beta, rho, gram, GramNorm::Inverse).unwrap();
    (geom, tau)
}

/// Uniform point in the Euclidean ball of radius `r`.
pub fn random_in_ball<R: Rng>(rng: &mut R, d: usize, r: f64) -> DVector<f64> {
    loop {
        let x = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        if x.norm() <= 1.0 {
            return x * r;
        }
    }
}

/// Uniform point strictly inside the unit ℓ1 ball.
pub fn random_in_l1_ball<R: Rng>(rng: &mut R, d: usize) -> DVector<f64> {
    loop {
        let x = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        if x.lp_norm(1) < 1.0 {
            return x;
        }
    }
}

/// A ball or box in 2-D that contains the origin in its interior.
pub fn random_piece_around_origin<R: Rng>(rng: &mut R) -> PieceSpec {
    if rng.random_bool(0.5) {
        let radius = rng.random_range(0.5..1.5);
        let c = random_in_ball(rng, 2, 0.8 * radius);
        PieceSpec::Ball {
            center: c.as_slice().to_vec(),
            radius,
        }
    } else {
        PieceSpec::Box {
            lower: vec![rng.random_range(-1.5..-0.2), rng.random_range(-1.5..-0.2)],
            upper: vec![rng.random_range(0.2..1.5), rng.random_range(0.2..1.5)],
        }
    }
}

/// A ball or box anywhere in `[-3, 3]²`.
pub fn random_piece<R: Rng>(rng: &mut R) -> PieceSpec {
    if rng.random_bool(0.5) {
        PieceSpec::Ball {
            center: vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
            radius: rng.random_range(0.2..1.0),
        }
    } else {
        let lo = [rng.random_range(-2.5..1.5), rng.random_range(-2.5..1.5)];
        PieceSpec::Box {
            lower: lo.to_vec(),
            upper: vec![
                lo[0] + rng.random_range(0.1..1.5),
                lo[1] + rng.random_range(0.1..1.5),
            ],
        }
    }
}

/// Center of a ball or box.
pub fn piece_center(spec: &PieceSpec) -> Vec<f64> {
    match spec {
        PieceSpec::Ball { center, .. } => center.clone(),
        PieceSpec::Box { lower, upper } => lower
            .iter()
            .zip(upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect(),
        PieceSpec::Polytope { .. } => panic!("center covers balls and boxes"),
    }
}
