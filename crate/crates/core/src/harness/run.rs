use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig};
use crate::decision_set::DecisionSet;
use crate::environment::{sample_action, Environment, RegretLedger};
use crate::estimation::{ConfidenceParams, ConfidenceState};
use crate::policy::{
    default_activity_tol, l1_oplb_step, oracle_policy, ubm_step, Branch, Policy, StepOutcome,
};
use crate::{Error, Result};

pub const LEDGER_FILE: &str = "ledger.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";

/// Seed of replicate `index`: `master ⊕ index`.
pub fn replicate_seed(master: u64, index: usize) -> u64 {
    master ^ index as u64
}

/// Everything about a config that is fixed across rounds and replicates:
/// the compiled set, the environment and the cached optimal policy.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: ExperimentConfig,
    pub set: DecisionSet,
    pub env: Environment,
    pub params: ConfidenceParams,
    pub oracle: Policy,
    pub optimal_value: f64,
}

impl Problem {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let set = config.decision_set_compiled()?;
        let env = config.environment()?;
        let params = config.confidence_params(&set);
        let oracle = oracle_policy(&env.theta_star, &env.cost_matrix, &env.tau, &set)?;
        let optimal_value = env.expected_reward(oracle.mean());
        Ok(Problem {
            config,
            set,
            env,
            params,
            oracle,
            optimal_value,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryRole {
    /// The policy mean; `value` is its expected reward.
    Mean,
    /// One support point; `value` is its expected reward.
    Support,
    /// The sampled action; `value` is the sampled-action regret.
    Action,
}

impl TrajectoryRole {
    fn as_str(&self) -> &'static str {
        match self {
            TrajectoryRole::Mean => "mean",
            TrajectoryRole::Support => "support",
            TrajectoryRole::Action => "action",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(TrajectoryRole::Mean),
            "support" => Ok(TrajectoryRole::Support),
            "action" => Ok(TrajectoryRole::Action),
            other => Err(Error::InvalidInput(format!(
                "unknown trajectory role `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    pub role: TrajectoryRole,
    pub index: usize,
    pub weight: f64,
    pub x: Vec<f64>,
    pub value: f64,
}

/// Per-round policy support, mean and sampled action.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    pub fn new(dim: usize) -> Self {
        Trajectory {
            dim,
            rows: Vec::new(),
        }
    }

    /// Policy means in round order.
    pub fn means(&self) -> Vec<(usize, Vec<f64>)> {
        self.rows
            .iter()
            .filter(|r| r.role == TrajectoryRole::Mean)
            .map(|r| (r.t, r.x.clone()))
            .collect()
    }

    /// Support points and weights of round `t`.
    pub fn support_at(&self, t: usize) -> Vec<(Vec<f64>, f64)> {
        self.rows
            .iter()
            .filter(|r| r.t == t && r.role == TrajectoryRole::Support)
            .map(|r| (r.x.clone(), r.weight))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "t".to_string(),
            "role".into(),
            "index".into(),
            "weight".into(),
        ];
        header.extend((1..=self.dim).map(|i| format!("x_{i}")));
        header.push("value".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.t.to_string(),
                r.role.as_str().to_string(),
                r.index.to_string(),
                r.weight.to_string(),
            ];
            rec.extend(r.x.iter().map(f64::to_string));
            rec.push(r.value.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("trajectory", e))?;
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
                    path: TRAJECTORY_FILE.into(),
                })
        };
        let (t_c, role_c, idx_c, w_c, v_c) = (
            col("t")?,
            col("role")?,
            col("index")?,
            col("weight")?,
            col("value")?,
        );
        let x_cols: Vec<usize> = (1..)
            .map_while(|i| headers.iter().position(|h| h == format!("x_{i}")))
            .collect();
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("bad number `{s}` in trajectory")))
        };
        let int = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("bad integer `{s}` in trajectory")))
        };
        let mut traj = Trajectory::new(x_cols.len());
        for rec in rdr.records() {
            let rec = rec?;
            traj.rows.push(TrajectoryRow {
                t: int(&rec[t_c])?,
                role: TrajectoryRole::parse(&rec[role_c])?,
                index: int(&rec[idx_c])?,
                weight: num(&rec[w_c])?,
                x: x_cols
                    .iter()
                    .map(|&c| num(&rec[c]))
                    .collect::<Result<_>>()?,
                value: num(&rec[v_c])?,
            });
        }
        Ok(traj)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub horizon: usize,
    pub rounds_completed: usize,
    pub optimal_value: f64,
    pub optimal_mean: Vec<f64>,
    pub cumulative_regret: f64,
    /// Regret of the sampled actions rather than the policy means.
    pub sampled_cumulative_regret: f64,
    pub violation_count: usize,
    pub branch_counts: BTreeMap<Branch, usize>,
    pub subproblem_solves: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The in-memory record of one run; `error` is set when the run stopped
/// early, in which case the ledger holds the completed rounds.
#[derive(Debug)]
pub struct RunOutput {
    pub ledger: RegretLedger,
    pub trajectory: Trajectory,
    pub summary: RunSummary,
    pub error: Option<Error>,
}

impl RunOutput {
    pub fn into_result(self) -> Result<RunOutput> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// One learner interacting with the environment, advanced round by round.
pub struct BanditRun<'a> {
    problem: &'a Problem,
    state: ConfidenceState,
    rng: ChaCha8Rng,
    ledger: RegretLedger,
    trajectory: Trajectory,
    sampled_regret: f64,
    branch_counts: BTreeMap<Branch, usize>,
    solves: usize,
    seed: u64,
}

impl<'a> BanditRun<'a> {
    pub fn new(problem: &'a Problem, seed: u64) -> Result<Self> {
        Ok(BanditRun {
            problem,
            state: ConfidenceState::new(problem.set.dim(), problem.params.clone())?,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ledger: RegretLedger::new(),
            trajectory: Trajectory::new(problem.set.dim()),
            sampled_regret: 0.0,
            branch_counts: BTreeMap::new(),
            solves: 0,
            seed,
        })
    }

    /// The round about to be played.
    pub fn round(&self) -> usize {
        self.ledger.len() + 1
    }

    pub fn state(&self) -> &ConfidenceState {
        &self.state
    }

    pub fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    /// The policy the configured algorithm plays in the current round.
    pub fn decide(&self) -> Result<StepOutcome> {
        let p = self.problem;
        let tau = &p.env.tau;
        match p.algorithm() {
            Algorithm::OracleOnly => Ok(StepOutcome {
                policy: p.oracle.clone(),
                z_star: p.oracle.mean().clone(),
                branch: Branch::Oracle,
                objective_value: p.optimal_value,
                subproblem_solves: 0,
            }),
            Algorithm::L1Oplb => l1_oplb_step(&self.state.geometry()?, &p.set, tau),
            Algorithm::UbmOplb => ubm_step(
                &self.state.geometry()?,
                &p.set,
                tau,
                default_activity_tol(tau[0]),
            ),
        }
    }

    /// Plays one round: policy step, sample, observe, update, record.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let t = self.round();
        let outcome = self.decide().map_err(|e| e.at_round(t))?;
        let p = self.problem;
        let env = &p.env;
        let policy = &outcome.policy;

        let (index, x) = sample_action(policy, &mut self.rng);
        let (reward, cost) = env.observe(&x, &mut self.rng);
        self.state
            .update(&x, reward, &cost)
            .map_err(|e| e.at_round(t))?;

        let policy_value = env.expected_reward(policy.mean());
        let increment = env.regret_increment(p.oracle.mean(), policy);
        let costs = env.expected_cost(policy.mean());
        let violation = env.violation_check(policy);
        self.ledger.push(
            p.optimal_value,
            policy_value,
            increment,
            costs.iter().copied().collect(),
            violation,
            outcome.branch,
        );

        let sampled = p.optimal_value - env.expected_reward(&x);
        self.sampled_regret += sampled;
        self.trajectory.rows.push(TrajectoryRow {
            t,
            role: TrajectoryRole::Mean,
            index: 0,
            weight: 1.0,
            x: policy.mean().iter().copied().collect(),
            value: policy_value,
        });
        for (i, (point, w)) in policy.support().iter().enumerate() {
            self.trajectory.rows.push(TrajectoryRow {
                t,
                role: TrajectoryRole::Support,
                index: i,
                weight: *w,
                x: point.iter().copied().collect(),
                value: env.expected_reward(point),
            });
        }
        self.trajectory.rows.push(TrajectoryRow {
            t,
            role: TrajectoryRole::Action,
            index,
            weight: policy.support()[index].1,
            x: x.iter().copied().collect(),
            value: sampled,
        });

        *self.branch_counts.entry(outcome.branch).or_default() += 1;
        self.solves += outcome.subproblem_solves;
        Ok(outcome)
    }

    pub fn summary(&self, error: Option<&Error>) -> RunSummary {
        let p = self.problem;
        RunSummary {
            algorithm: p.algorithm(),
            seed: self.seed,
            horizon: p.config.horizon,
            rounds_completed: self.ledger.len(),
            optimal_value: p.optimal_value,
            optimal_mean: p.oracle.mean().iter().copied().collect(),
            cumulative_regret: self.ledger.cumulative_regret(),
            sampled_cumulative_regret: self.sampled_regret,
            violation_count: self.ledger.violation_count(),
            branch_counts: self.branch_counts.clone(),
            subproblem_solves: self.solves,
            error: error.map(|e| e.to_string()),
        }
    }

    /// Plays until the horizon or the first error.
    pub fn finish(mut self) -> RunOutput {
        let mut error = None;
        while self.ledger.len() < self.problem.config.horizon {
            if let Err(e) = self.step() {
                tracing::warn!(seed = self.seed, "run stopped: {e}");
                error = Some(e);
                break;
            }
        }
        RunOutput {
            summary: self.summary(error.as_ref()),
            ledger: self.ledger,
            trajectory: self.trajectory,
            error,
        }
    }
}

/// Runs `problem` to its horizon with the given seed, in memory.
pub fn simulate(problem: &Problem, seed: u64) -> Result<RunOutput> {
    Ok(BanditRun::new(problem, seed)?.finish())
}

/// Paths of the files written for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub ledger_path: PathBuf,
    pub trajectory_path: PathBuf,
    pub summary_path: PathBuf,
    pub config_path: PathBuf,
    pub summary: RunSummary,
}

impl RunArtifacts {
    pub fn in_dir(dir: &Path, summary: RunSummary) -> Self {
        RunArtifacts {
            dir: dir.to_path_buf(),
            ledger_path: dir.join(LEDGER_FILE),
            trajectory_path: dir.join(TRAJECTORY_FILE),
            summary_path: dir.join(SUMMARY_FILE),
            config_path: dir.join(CONFIG_FILE),
            summary,
        }
    }

    /// Reads back the ledger, trajectory and summary from `dir`.
    pub fn load(dir: &Path) -> Result<(RegretLedger, Trajectory, RunSummary)> {
        let ledger = RegretLedger::read_csv(open(&dir.join(LEDGER_FILE))?)
            .map_err(|e| with_path(e, &dir.join(LEDGER_FILE)))?;
        let traj = Trajectory::read_csv(open(&dir.join(TRAJECTORY_FILE))?)
            .map_err(|e| with_path(e, &dir.join(TRAJECTORY_FILE)))?;
        let summary = read_json(&dir.join(SUMMARY_FILE))?;
        Ok((ledger, traj, summary))
    }
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::MissingColumn { column, .. } => Error::MissingColumn {
            column,
            path: path.to_path_buf(),
        },
        other => other,
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<fs::File>> {
    Ok(BufReader::new(
        fs::File::open(path).map_err(|e| Error::io(path, e))?,
    ))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(
        fs::File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

/// Writes the ledger, trajectory, summary and config of a run into `dir`.
pub fn write_run(dir: &Path, config: &ExperimentConfig, out: &RunOutput) -> Result<RunArtifacts> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let art = RunArtifacts::in_dir(dir, out.summary.clone());
    out.ledger
        .write_csv(config.num_constraints(), create(&art.ledger_path)?)?;
    out.trajectory.write_csv(create(&art.trajectory_path)?)?;
    write_json(&art.summary_path, &out.summary)?;
    let mut w = create(&art.config_path)?;
    w.write_all(config.to_json().as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&art.config_path, e))?;
    Ok(art)
}

/// Runs `config` once with its master seed and writes the artifacts to
/// `out_dir`. On a mid-run failure the completed rounds are still written and
/// the error carries the round index.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let problem = Problem::new(config.clone())?;
    let out = simulate(&problem, replicate_seed(config.master_seed, 0))?;
    let art = write_run(out_dir, config, &out)?;
    match out.error {
        Some(e) => Err(e),
        None => Ok(art),
    }
}

/// Radius `τ√λ/β₁` of the pessimistic safe ball of a fresh state.
pub fn initial_safe_radius(problem: &Problem) -> Result<f64> {
    let state = ConfidenceState::new(problem.set.dim(), problem.params.clone())?;
    Ok(problem.env.tau.min() * problem.params.lambda.sqrt() / state.beta())
}
