use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::decision_set::{DecisionSet, PieceSpec};
use crate::environment::Environment;
use crate::estimation::{ConfidenceParams, GramNorm};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    L1Oplb,
    UbmOplb,
    OracleOnly,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::L1Oplb => "l1_oplb",
            Algorithm::UbmOplb => "ubm_oplb",
            Algorithm::OracleOnly => "oracle_only",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1_oplb" => Ok(Algorithm::L1Oplb),
            "ubm_oplb" => Ok(Algorithm::UbmOplb),
            "oracle_only" => Ok(Algorithm::OracleOnly),
            other => Err(Error::Config(format!(
                "unknown algorithm `{other}` (expected l1_oplb, ubm_oplb or oracle_only)"
            ))),
        }
    }
}

/// One experiment, as read from a JSON file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub decision_set: Vec<PieceSpec>,
    /// Known safe action `x₀`.
    pub safe_action: Vec<f64>,
    pub theta_star: Vec<f64>,
    /// Rows of `Γ*`.
    pub cost_matrix: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    pub algorithm: Algorithm,
    pub horizon: usize,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub lambda: f64,
    pub delta: f64,
    /// Noise standard deviation `R`.
    pub noise_scale: f64,
    /// Norm bound `S` on the reward parameter.
    pub param_bound: f64,
    #[serde(default)]
    pub use_literal_gram_norm: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.tau.len()
    }

    /// Shape and range checks that need no solver.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let d = self.dim();
        if d == 0 {
            return bad("theta_star must be non-empty".into());
        }
        if self.decision_set.is_empty() {
            return bad("decision_set must list at least one piece".into());
        }
        if let Some(p) = self.decision_set.iter().position(|p| p.dim() != d) {
            return bad(format!(
                "decision_set piece {p} has dimension {}, expected {d}",
                self.decision_set[p].dim()
            ));
        }
        if self.safe_action.len() != d {
            return bad(format!(
                "safe_action has length {}, expected {d}",
                self.safe_action.len()
            ));
        }
        if self.tau.is_empty() {
            return bad("tau must list at least one threshold".into());
        }
        if self.cost_matrix.len() != self.tau.len() {
            return bad(format!(
                "cost_matrix has {} rows but tau has {} entries",
                self.cost_matrix.len(),
                self.tau.len()
            ));
        }
        if let Some(j) = self.cost_matrix.iter().position(|r| r.len() != d) {
            return bad(format!(
                "cost_matrix row {j} has length {}, expected {d}",
                self.cost_matrix[j].len()
            ));
        }
        if self.horizon < 1 {
            return bad("horizon must be >= 1".into());
        }
        if self.replicates < 1 {
            return bad("replicates must be >= 1".into());
        }
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be > 0, got {}", self.lambda));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.noise_scale >= 0.0) {
            return bad(format!(
                "noise_scale must be >= 0, got {}",
                self.noise_scale
            ));
        }
        if !(self.param_bound >= 0.0) {
            return bad(format!(
                "param_bound must be >= 0, got {}",
                self.param_bound
            ));
        }
        let all_finite = self
            .theta_star
            .iter()
            .chain(self.safe_action.iter())
            .chain(self.tau.iter())
            .chain(self.cost_matrix.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return bad("numeric fields must be finite".into());
        }
        let cost = self.cost_matrix_dense() * DVector::from_column_slice(&self.safe_action);
        for (j, (c, t)) in cost.iter().zip(&self.tau).enumerate() {
            if !(c < t) {
                return bad(format!(
                    "safe action cost {c} is not below tau {t} in row {j}"
                ));
            }
        }
        Ok(())
    }

    pub fn cost_matrix_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(self.cost_matrix.len(), d, |j, i| self.cost_matrix[j][i])
    }

    pub fn theta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta_star)
    }

    pub fn tau_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.tau)
    }

    pub fn decision_set_compiled(&self) -> Result<DecisionSet> {
        DecisionSet::from_specs(&self.decision_set, &self.safe_action)
            .map_err(|e| Error::Config(format!("decision_set: {e}")))
    }

    pub fn environment(&self) -> Result<Environment> {
        Environment::new(
            self.theta(),
            self.cost_matrix_dense(),
            self.tau_vector(),
            self.noise_scale,
            &DVector::from_column_slice(&self.safe_action),
        )
        .map_err(|e| Error::Config(e.to_string()))
    }

    /// Estimator parameters; the action bound `L` is taken from the compiled
    /// set and the safe-action cost is `Γ*x₀`.
    pub fn confidence_params(&self, set: &DecisionSet) -> ConfidenceParams {
        ConfidenceParams {
            lambda: self.lambda,
            noise_scale: self.noise_scale,
            param_bound: self.param_bound,
            action_bound: set.norm_bound(),
            delta: self.delta,
            tau: self.tau_vector(),
            safe_cost: self.cost_matrix_dense() * set.safe_action(),
            gram_norm: if self.use_literal_gram_norm {
                GramNorm::Literal
            } else {
                GramNorm::Inverse
            },
        }
    }
}

pub const PRESET_NAMES: [&str; 2] = ["unit_disk", "five_disks"];

/// Shipped experiment presets by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = match name {
        "unit_disk" => include_str!("../../presets/unit_disk.json"),
        "five_disks" => include_str!("../../presets/five_disks.json"),
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (available: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    ExperimentConfig::from_json(text)
}
