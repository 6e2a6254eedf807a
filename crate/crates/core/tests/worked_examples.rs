//! Small worked instances checked against grid and enumeration oracles.

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use safe_bandit::decision_set::{DecisionSet, PieceSpec};
use safe_bandit::environment::Environment;
use safe_bandit::estimation::{ConfidenceGeometry, GramNorm};
use safe_bandit::policy::{
    default_activity_tol, l1_oplb_step, oracle_policy, ubm_step, Branch, Policy,
};

fn unit_disk() -> DecisionSet {
    DecisionSet::from_specs(
        &[PieceSpec::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        }],
        &[0.0, 0.0],
    )
    .unwrap()
}

/// `max 3z₁ + 2.5z₂` over grid points of the unit disk with `z₁ + z₂ ≤ 1`.
fn unit_disk_grid_optimum() -> (f64, [f64; 2]) {
    let n = 2000;
    let step = 2.0 / (n - 1) as f64;
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    for i in 0..n {
        let x = -1.0 + i as f64 * step;
        for j in 0..n {
            let y = -1.0 + j as f64 * step;
            if x * x + y * y <= 1.0 && 0.5 * x + 0.5 * y <= 0.5 {
                let v = 3.0 * x + 2.5 * y;
                if v > best.0 {
                    best = (v, [x, y]);
                }
            }
        }
    }
    best
}

#[test]
fn unit_disk_optimum_matches_grid_search() {
    let set = unit_disk();
    let theta = dvector![3.0, 2.5];
    let gamma = dmatrix![0.5, 0.5];
    let tau = dvector![0.5];
    let policy = oracle_policy(&theta, &gamma, &tau, &set).unwrap();
    let (grid_value, grid_z) = unit_disk_grid_optimum();
    let value = theta.dot(policy.mean());
    let spacing = 2.0 / 1999.0;
    assert!(
        (value - grid_value).abs() < 3.0 * spacing,
        "{value} vs {grid_value}"
    );
    assert!(value >= grid_value - 1e-9);
    assert!((policy.mean()[0] - grid_z[0]).abs() < 0.05);
    assert!((policy.mean()[1] - grid_z[1]).abs() < 0.05);
    assert!(policy.len() <= 2);

    // playing the safe action forgoes the whole optimal value
    let env = Environment::new(theta.clone(), gamma, tau, 0.0, &DVector::zeros(2)).unwrap();
    let inc = env.regret_increment(policy.mean(), &Policy::deterministic(DVector::zeros(2)));
    assert!((inc - grid_value).abs() < 3.0 * spacing);
}

fn two_intervals() -> DecisionSet {
    DecisionSet::from_specs(
        &[
            PieceSpec::Box {
                lower: vec![-3.0],
                upper: vec![-1.0],
            },
            PieceSpec::Box {
                lower: vec![1.0],
                upper: vec![3.0],
            },
        ],
        &[-1.0],
    )
    .unwrap()
}

fn one_d_geometry(theta_hat: f64, mu_hat: f64, rho: f64) -> ConfidenceGeometry {
    ConfidenceGeometry::new(
        dvector![theta_hat],
        dmatrix![mu_hat],
        1.0,
        rho,
        DMatrix::identity(1, 1),
        GramNorm::Inverse,
    )
    .unwrap()
}

/// Grid over the hull `[−3, 3]`: the safe point maximizing the optimistic
/// reward, and the safe point maximizing the linear bound with its slack.
fn one_d_grid(geom: &ConfidenceGeometry, tau: f64) -> ((f64, f64), (f64, f64)) {
    let (th, mu, beta, rho) = (geom.theta_hat[0], geom.mu_hat[(0, 0)], geom.beta, geom.rho);
    let mut optimistic = (f64::NEG_INFINITY, 0.0);
    let mut linear = (f64::NEG_INFINITY, 0.0);
    for k in 0..=600_000 {
        let z = -3.0 + k as f64 * 1e-5;
        let cost = mu * z + beta * z.abs();
        if cost > tau {
            continue;
        }
        let g1 = th * z + rho * beta * z.abs();
        if g1 > optimistic.0 {
            optimistic = (g1, z);
        }
        let g2 = rho * tau + (th - rho * mu) * z;
        if g2 > linear.0 {
            linear = (g2, z);
        }
    }
    let slack = tau - (mu * linear.1 + beta * linear.1.abs());
    (optimistic, (linear.1, slack))
}

#[test]
fn rising_upper_bound_is_exact_on_two_intervals() {
    // safe hull is [−1.25, 5/6]; the bound's slope θ̂ − ρμ̂ = 0.4 is positive
    let tau = 1.0;
    let geom = one_d_geometry(1.0, 0.2, 3.0);
    let ((value, z), (_, slack)) = one_d_grid(&geom, tau);
    assert!(slack < 1e-4);
    let step = ubm_step(
        &geom,
        &two_intervals(),
        &dvector![tau],
        default_activity_tol(tau),
    )
    .unwrap();
    assert_eq!(step.branch, Branch::UbmExact);
    assert!(
        (step.z_star[0] - z).abs() < 1e-4,
        "{} vs {z}",
        step.z_star[0]
    );
    assert!((step.objective_value - value).abs() < 1e-4);
}

#[test]
fn falling_upper_bound_falls_back_to_l1() {
    // μ̂ ≥ β leaves the left side unconstrained, so the bound's maximizer
    // at z = −3 has slack
    let tau = 1.0;
    let geom = one_d_geometry(1.0, 1.2, 3.0);
    let (_, (z, slack)) = one_d_grid(&geom, tau);
    assert!((z + 3.0).abs() < 1e-9);
    assert!(slack > 1.0);
    let set = two_intervals();
    let step = ubm_step(&geom, &set, &dvector![tau], default_activity_tol(tau)).unwrap();
    assert_eq!(step.branch, Branch::L1);
    let l1 = l1_oplb_step(&geom, &set, &dvector![tau]).unwrap();
    assert_eq!(step.policy, l1.policy);
    assert_eq!(step.subproblem_solves, l1.subproblem_solves + 1);
}

#[test]
fn l1_step_on_three_points_matches_weight_grid() {
    let points = [dvector![0.0, 0.0], dvector![1.0, 0.0], dvector![0.0, 1.0]];
    let specs: Vec<PieceSpec> = points
        .iter()
        .map(|p| PieceSpec::point(p.as_slice()))
        .collect();
    let set = DecisionSet::from_specs(&specs, &[0.0, 0.0]).unwrap();
    let geom = ConfidenceGeometry::new(
        dvector![0.3, 0.2],
        dmatrix![0.4, 0.1],
        0.5,
        2.0,
        DMatrix::from_diagonal(&dvector![3.0, 2.0]),
        GramNorm::Inverse,
    )
    .unwrap();
    let tau = 0.6;
    let step = l1_oplb_step(&geom, &set, &dvector![tau]).unwrap();
    assert_eq!(step.subproblem_solves, 4);

    // every vertex θ against every weight vector on a 1e-3 simplex grid
    let n = 1000;
    let inv = [1.0 / 3.0, 1.0 / 2.0];
    let mut brute = f64::NEG_INFINITY;
    let vertices = geom.l1_vertices();
    for a in 0..=n {
        for b in 0..=(n - a) {
            let (w1, w2) = (a as f64 / n as f64, b as f64 / n as f64);
            let z = &points[1] * w1 + &points[2] * w2;
            let norm = (inv[0] * z[0] * z[0] + inv[1] * z[1] * z[1]).sqrt();
            if 0.4 * z[0] + 0.1 * z[1] + 0.5 * norm > tau {
                continue;
            }
            for v in &vertices {
                brute = brute.max(v.dot(&z));
            }
        }
    }
    assert!(step.objective_value >= brute - 1e-9);
    assert!(
        step.objective_value - brute < 5e-3,
        "{} vs {brute}",
        step.objective_value
    );
}
