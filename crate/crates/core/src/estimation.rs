//! Online regularized least squares for the reward and cost parameters, and
//! the confidence geometry derived from it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::decision_set::SocBound;
use crate::{Error, Result};

/// Which weighted norm bounds `‖z‖` in the pessimistic cost and the
/// optimistic bonus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramNorm {
    /// `√(zᵀΣ⁻¹z)`, the dual of the Gram-norm confidence ball.
    #[default]
    Inverse,
    /// `√(zᵀΣz)`, kept for comparison runs.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceParams {
    /// Regularization `λ > 0`.
    pub lambda: f64,
    /// Sub-Gaussian noise scale `R`.
    pub noise_scale: f64,
    /// Parameter norm bound `S`.
    pub param_bound: f64,
    /// Action norm bound `L`.
    pub action_bound: f64,
    /// Failure probability `δ ∈ (0, 1)`.
    pub delta: f64,
    /// Constraint thresholds `τ`, one per cost row.
    pub tau: DVector<f64>,
    /// Known cost of the safe action.
    pub safe_cost: DVector<f64>,
    pub gram_norm: GramNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceState {
    params: ConfidenceParams,
    dim: usize,
    /// `Σ = λI + Σ xᵢxᵢᵀ`.
    gram: DMatrix<f64>,
    /// `Σ rᵢ·xᵢ`.
    reward_moment: DVector<f64>,
    /// Row `j` holds `Σ cᵢⱼ·xᵢ`.
    cost_moment: DMatrix<f64>,
    /// Current round; `1` before any observation.
    round: usize,
}

impl ConfidenceState {
    pub fn new(dim: usize, params: ConfidenceParams) -> Result<Self> {
        let m = params.tau.len();
        if dim == 0 || m == 0 {
            return Err(Error::InvalidInput(
                "confidence state needs d >= 1 and m >= 1".into(),
            ));
        }
        if params.safe_cost.len() != m {
            return Err(Error::dim("safe-action cost", m, params.safe_cost.len()));
        }
        if !(params.lambda > 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda must be > 0, got {}",
                params.lambda
            )));
        }
        if !(params.delta > 0.0 && params.delta < 1.0) {
            return Err(Error::InvalidInput(format!(
                "delta must lie in (0, 1), got {}",
                params.delta
            )));
        }
        for j in 0..m {
            rho(params.tau[j], params.safe_cost[j])?;
        }
        Ok(ConfidenceState {
            gram: DMatrix::identity(dim, dim) * params.lambda,
            reward_moment: DVector::zeros(dim),
            cost_moment: DMatrix::zeros(m, dim),
            round: 1,
            dim,
            params,
        })
    }

    pub fn params(&self) -> &ConfidenceParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_constraints(&self) -> usize {
        self.cost_moment.nrows()
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Records the observation `(x, r, c)` and advances the round.
    pub fn update(&mut self, x: &DVector<f64>, reward: f64, cost: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::dim("action", self.dim, x.len()));
        }
        if cost.len() != self.num_constraints() {
            return Err(Error::dim(
                "cost signal",
                self.num_constraints(),
                cost.len(),
            ));
        }
        let limit = self.params.action_bound * (1.0 + 1e-6) + 1e-9;
        if x.norm() > limit {
            return Err(Error::InvalidInput(format!(
                "action norm {} exceeds bound {}",
                x.norm(),
                self.params.action_bound
            )));
        }
        self.gram.ger(1.0, x, x, 1.0);
        self.reward_moment.axpy(reward, x, 1.0);
        self.cost_moment.ger(1.0, cost, x, 1.0);
        self.round += 1;
        Ok(())
    }

    /// `β_t = R·√(d·ln((1 + (t−1)L²/λ)/δ)) + √λ·S`.
    pub fn beta(&self) -> f64 {
        let p = &self.params;
        let t = self.round as f64;
        let log_term = ((1.0 + (t - 1.0) * p.action_bound.powi(2) / p.lambda) / p.delta).ln();
        p.noise_scale * (self.dim as f64 * log_term).max(0.0).sqrt()
            + p.lambda.sqrt() * p.param_bound
    }

    /// `ρ` for the tightest constraint row.
    pub fn rho(&self) -> Result<f64> {
        let margin = self
            .params
            .tau
            .iter()
            .zip(self.params.safe_cost.iter())
            .map(|(t, c)| t - c)
            .fold(f64::INFINITY, f64::min);
        rho(margin, 0.0)
    }

    /// `(θ̂, μ̂)` with `θ̂ = Σ⁻¹·Σrᵢxᵢ` and row `j` of `μ̂` equal to `Σ⁻¹·Σcᵢⱼxᵢ`.
    pub fn estimates(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let chol = self
            .gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("Gram matrix lost definiteness".into()))?;
        let theta = chol.solve(&self.reward_moment);
        let mu = chol.solve(&self.cost_moment.transpose()).transpose();
        Ok((theta, mu))
    }

    pub fn geometry(&self) -> Result<ConfidenceGeometry> {
        let (theta_hat, mu_hat) = self.estimates()?;
        ConfidenceGeometry::new(
            theta_hat,
            mu_hat,
            self.beta(),
            self.rho()?,
            self.gram.clone(),
            self.params.gram_norm,
        )
    }
}

/// `ρ = 1 + 2/(τ − c₀)`; requires the safe action to be strictly feasible.
pub fn rho(tau: f64, safe_cost: f64) -> Result<f64> {
    let margin = tau - safe_cost;
    if !(margin > 0.0) {
        return Err(Error::InvalidInput(format!(
            "threshold {tau} must exceed the safe-action cost {safe_cost}"
        )));
    }
    Ok(1.0 + 2.0 / margin)
}

/// Read-only snapshot of the confidence sets at one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceGeometry {
    pub theta_hat: DVector<f64>,
    /// One row per cost constraint.
    pub mu_hat: DMatrix<f64>,
    pub beta: f64,
    pub rho: f64,
    pub gram: DMatrix<f64>,
    pub gram_inv: DMatrix<f64>,
    /// Principal square root `Σ^{1/2}`.
    pub gram_sqrt: DMatrix<f64>,
    /// `Σ^{-1/2}`.
    pub gram_sqrt_inv: DMatrix<f64>,
    pub gram_norm: GramNorm,
}

impl ConfidenceGeometry {
    pub fn new(
        theta_hat: DVector<f64>,
        mu_hat: DMatrix<f64>,
        beta: f64,
        rho: f64,
        gram: DMatrix<f64>,
        gram_norm: GramNorm,
    ) -> Result<Self> {
        let d = theta_hat.len();
        if gram.shape() != (d, d) {
            return Err(Error::dim("Gram matrix", d, gram.nrows()));
        }
        if mu_hat.ncols() != d {
            return Err(Error::dim("cost estimate", d, mu_hat.ncols()));
        }
        if !(beta > 0.0) || !(rho >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "need beta > 0 and rho >= 1, got beta = {beta}, rho = {rho}"
            )));
        }
        let sym = (&gram + gram.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        if eig.eigenvalues.min() <= 0.0 {
            return Err(Error::NumericalFailure(
                "Gram matrix is not positive definite".into(),
            ));
        }
        let root = eig.eigenvalues.map(f64::sqrt);
        let q = &eig.eigenvectors;
        let gram_sqrt = q * DMatrix::from_diagonal(&root) * q.transpose();
        let gram_sqrt_inv = q * DMatrix::from_diagonal(&root.map(|v| 1.0 / v)) * q.transpose();
        let gram_inv = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NumericalFailure("Gram matrix lost definiteness".into()))?
            .inverse();
        Ok(ConfidenceGeometry {
            theta_hat,
            mu_hat,
            beta,
            rho,
            gram,
            gram_inv,
            gram_sqrt,
            gram_sqrt_inv,
            gram_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.mu_hat.nrows()
    }

    /// Radius `ρ·√d·β` of the ℓ1 confidence polytope.
    pub fn l1_radius(&self) -> f64 {
        self.rho * (self.dim() as f64).sqrt() * self.beta
    }

    /// The `2d` vertices `θ̂ ± (ρ√dβ)·Σ^{-1/2}eⱼ`, ordered `+e₁, −e₁, +e₂, …`.
    pub fn l1_vertices(&self) -> Vec<DVector<f64>> {
        let r = self.l1_radius();
        let mut out = Vec::with_capacity(2 * self.dim());
        for j in 0..self.dim() {
            let col = self.gram_sqrt_inv.column(j) * r;
            out.push(&self.theta_hat + &col);
            out.push(&self.theta_hat - &col);
        }
        out
    }

    /// `‖θ − θ̂‖_{Σ,2}`.
    pub fn theta_l2_distance(&self, theta: &DVector<f64>) -> f64 {
        let u = theta - &self.theta_hat;
        u.dot(&(&self.gram * &u)).max(0.0).sqrt()
    }

    /// `‖θ − θ̂‖_{Σ,1} = ‖Σ^{1/2}(θ − θ̂)‖₁`.
    pub fn theta_l1_distance(&self, theta: &DVector<f64>) -> f64 {
        (&self.gram_sqrt * (theta - &self.theta_hat)).lp_norm(1)
    }

    /// The weighted norm of `z` paired with the Gram-norm confidence balls.
    pub fn action_norm(&self, z: &DVector<f64>) -> f64 {
        let weight = match self.gram_norm {
            GramNorm::Inverse => &self.gram_inv,
            GramNorm::Literal => &self.gram,
        };
        z.dot(&(weight * z)).max(0.0).sqrt()
    }

    /// `max μᵀz` over the cost confidence ball of `row`:
    /// `μ̂_rowᵀz + β·‖z‖`.
    pub fn pessimistic_cost_bound(&self, z: &DVector<f64>, row: usize) -> f64 {
        self.mu_hat.row(row).transpose().dot(z) + self.beta * self.action_norm(z)
    }

    /// `ρβ‖z‖ + θ̂ᵀz`, the optimistic reward over the ℓ2 reward ball.
    pub fn optimistic_reward(&self, z: &DVector<f64>) -> f64 {
        self.rho * self.beta * self.action_norm(z) + self.theta_hat.dot(z)
    }

    /// The pessimistic constraint of `row` as `‖M·z‖ + gᵀz ≤ τ`.
    pub fn pessimistic_soc(&self, row: usize, tau: f64) -> SocBound {
        let root = match self.gram_norm {
            GramNorm::Inverse => &self.gram_sqrt_inv,
            GramNorm::Literal => &self.gram_sqrt,
        };
        SocBound {
            m: root * self.beta,
            g: self.mu_hat.row(row).transpose(),
            t: tau,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn params(lambda: f64, r: f64, s: f64, delta: f64) -> ConfidenceParams {
        ConfidenceParams {
            lambda,
            noise_scale: r,
            param_bound: s,
            action_bound: 1.0,
            delta,
            tau: dvector![0.5],
            safe_cost: dvector![0.0],
            gram_norm: GramNorm::Inverse,
        }
    }

    fn geometry(
        gram: DMatrix<f64>,
        theta: DVector<f64>,
        mu: DMatrix<f64>,
        beta: f64,
    ) -> ConfidenceGeometry {
        ConfidenceGeometry::new(theta, mu, beta, 1.0, gram, GramNorm::Inverse).unwrap()
    }

    #[test]
    fn fresh_state_is_the_prior() {
        let s = ConfidenceState::new(2, params(1.0, 1.0, 1.0, 0.1)).unwrap();
        assert_eq!(s.round(), 1);
        assert_eq!(s.gram(), &DMatrix::identity(2, 2));
        let (theta, mu) = s.estimates().unwrap();
        assert_eq!(theta, dvector![0.0, 0.0]);
        assert_eq!(mu, DMatrix::zeros(1, 2));
    }

    #[test]
    fn updates_follow_closed_form() {
        let mut s = ConfidenceState::new(2, params(1.0, 1.0, 1.0, 0.1)).unwrap();
        let e1 = dvector![1.0, 0.0];
        s.update(&e1, 2.0, &dvector![0.0]).unwrap();
        assert_eq!(s.gram(), &dmatrix![2.0, 0.0; 0.0, 1.0]);
        assert!((s.estimates().unwrap().0 - dvector![1.0, 0.0]).amax() < 1e-15);
        s.update(&e1, 2.0, &dvector![0.0]).unwrap();
        assert_eq!(s.gram(), &dmatrix![3.0, 0.0; 0.0, 1.0]);
        assert!((s.estimates().unwrap().0 - dvector![4.0 / 3.0, 0.0]).amax() < 1e-15);
        assert_eq!(s.round(), 3);
    }

    #[test]
    fn update_rejects_bad_shapes() {
        let mut s = ConfidenceState::new(2, params(1.0, 1.0, 1.0, 0.1)).unwrap();
        assert!(s.update(&dvector![1.0], 0.0, &dvector![0.0]).is_err());
        assert!(s
            .update(&dvector![1.0, 0.0], 0.0, &dvector![0.0, 1.0])
            .is_err());
        assert!(s.update(&dvector![2.0, 0.0], 0.0, &dvector![0.0]).is_err());
    }

    #[test]
    fn beta_matches_formula() {
        let s = ConfidenceState::new(2, params(1.0, 1.0, 1.0, 0.1)).unwrap();
        // √(2·ln 10) + 1
        let expected = (2.0 * 10f64.ln()).sqrt() + 1.0;
        assert!((s.beta() - expected).abs() < 1e-12);
        assert!((s.beta() - 3.1460).abs() < 1e-4);

        let mut s = ConfidenceState::new(2, params(4.0, 0.0, 1.0, 0.1)).unwrap();
        for _ in 0..5 {
            assert!((s.beta() - 2.0).abs() < 1e-15);
            s.update(&dvector![1.0, 0.0], 0.0, &dvector![0.0]).unwrap();
        }

        let mut p = params(1.0, 1.0, 0.0, 0.1);
        p.delta = 1.0 - 1e-15;
        let mut s = ConfidenceState::new(2, p.clone()).unwrap();
        s.params.delta = 1.0;
        assert_eq!(s.beta(), 0.0);
    }

    #[test]
    fn beta_is_nondecreasing() {
        let mut s = ConfidenceState::new(3, params(0.5, 0.3, 2.0, 0.05)).unwrap();
        let mut last = s.beta();
        for _ in 0..50 {
            s.update(&dvector![0.0, 0.6, 0.8], 1.0, &dvector![0.1])
                .unwrap();
            assert!(s.beta() >= last);
            last = s.beta();
        }
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho(0.5, 0.0).unwrap(), 5.0);
        assert_eq!(rho(2.0, 0.0).unwrap(), 2.0);
        assert_eq!(rho(1.0, 0.5).unwrap(), 5.0);
        assert!(rho(0.5, 0.5).is_err());
        assert!(rho(0.2, 0.5).is_err());
    }

    #[test]
    fn l1_vertices_of_standard_ball() {
        let g = geometry(
            DMatrix::identity(2, 2),
            dvector![0.0, 0.0],
            DMatrix::zeros(1, 2),
            1.0 / 2f64.sqrt(),
        );
        let v = g.l1_vertices();
        let expected = [
            dvector![1.0, 0.0],
            dvector![-1.0, 0.0],
            dvector![0.0, 1.0],
            dvector![0.0, -1.0],
        ];
        for (a, b) in v.iter().zip(&expected) {
            assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn l1_vertices_use_inverse_root() {
        // radius 2 with Σ = diag(4, 1) → Σ^{-1/2} = diag(1/2, 1)
        let g = geometry(
            dmatrix![4.0, 0.0; 0.0, 1.0],
            dvector![0.0, 0.0],
            DMatrix::zeros(1, 2),
            2.0 / 2f64.sqrt(),
        );
        let v = g.l1_vertices();
        assert!((&v[0] - dvector![1.0, 0.0]).amax() < 1e-12);
        assert!((&v[1] - dvector![-1.0, 0.0]).amax() < 1e-12);
        assert!((&v[2] - dvector![0.0, 2.0]).amax() < 1e-12);
        assert!((&v[3] - dvector![0.0, -2.0]).amax() < 1e-12);

        let shifted = geometry(
            DMatrix::identity(2, 2),
            dvector![5.0, 5.0],
            DMatrix::zeros(1, 2),
            1.0 / 2f64.sqrt(),
        );
        for (a, b) in shifted.l1_vertices().iter().zip(
            geometry(
                DMatrix::identity(2, 2),
                dvector![0.0, 0.0],
                DMatrix::zeros(1, 2),
                1.0 / 2f64.sqrt(),
            )
            .l1_vertices(),
        ) {
            assert!((a - b - dvector![5.0, 5.0]).amax() < 1e-12);
        }
    }

    #[test]
    fn pessimistic_bound_examples() {
        let g = geometry(
            DMatrix::identity(2, 2),
            dvector![0.0, 0.0],
            DMatrix::zeros(1, 2),
            1.0,
        );
        assert_eq!(g.pessimistic_cost_bound(&dvector![0.0, 0.0], 0), 0.0);
        assert!((g.pessimistic_cost_bound(&dvector![3.0, 4.0], 0) - 5.0).abs() < 1e-12);

        let g = geometry(
            dmatrix![4.0, 0.0; 0.0, 1.0],
            dvector![0.0, 0.0],
            dmatrix![1.0, 0.0],
            2.0,
        );
        assert!((g.pessimistic_cost_bound(&dvector![2.0, 0.0], 0) - 4.0).abs() < 1e-12);

        let soc = g.pessimistic_soc(0, 1.0);
        let z = dvector![2.0, 0.0];
        assert!(((&soc.m * &z).norm() + soc.g.dot(&z) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn literal_norm_switch() {
        let g = ConfidenceGeometry::new(
            dvector![0.0, 0.0],
            dmatrix![0.0, 0.0],
            1.0,
            1.0,
            dmatrix![4.0, 0.0; 0.0, 1.0],
            GramNorm::Literal,
        )
        .unwrap();
        assert!((g.pessimistic_cost_bound(&dvector![1.0, 0.0], 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_is_consistent() {
        let g = geometry(
            dmatrix![3.0, 1.0; 1.0, 2.0],
            dvector![0.0, 0.0],
            DMatrix::zeros(1, 2),
            1.0,
        );
        assert!((&g.gram_inv * &g.gram - DMatrix::identity(2, 2)).amax() < 1e-8);
        assert!((&g.gram_sqrt * &g.gram_sqrt - &g.gram).amax() < 1e-12);
        assert!((&g.gram_sqrt_inv * &g.gram_sqrt - DMatrix::identity(2, 2)).amax() < 1e-12);
    }
}
