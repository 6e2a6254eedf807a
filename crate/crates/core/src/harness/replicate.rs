use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig};
use super::run::{create, replicate_seed, simulate, write_json, write_run, Problem, CONFIG_FILE};
use crate::policy::Branch;
use crate::{Error, Result};

pub const BAND_FILE: &str = "regret_band.csv";
pub const TERMINAL_FILE: &str = "terminal_regret.csv";
pub const HISTOGRAM_FILE: &str = "terminal_histogram.csv";
pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Clone, Default)]
pub struct ReplicateOptions {
    /// Also write each run's ledger and trajectory under `runs/<index>/`.
    pub keep_runs: bool,
}

/// What is kept from one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRun {
    pub index: usize,
    pub seed: u64,
    pub cumulative: Vec<f64>,
    pub violation_rounds: usize,
    pub branch_counts: BTreeMap<Branch, usize>,
}

impl ReplicateRun {
    pub fn terminal_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Pointwise mean and 10/90 percentiles of cumulative regret.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretBand {
    pub mean: Vec<f64>,
    pub p10: Vec<f64>,
    pub p90: Vec<f64>,
}

impl RegretBand {
    /// Curves must share a length; the mean is the plain average in run order.
    pub fn from_curves(curves: &[&[f64]]) -> Self {
        let Some(len) = curves.first().map(|c| c.len()) else {
            return RegretBand::default();
        };
        debug_assert!(curves.iter().all(|c| c.len() == len));
        let n = curves.len() as f64;
        let mut band = RegretBand::default();
        let mut column = Vec::with_capacity(curves.len());
        for t in 0..len {
            column.clear();
            column.extend(curves.iter().map(|c| c[t]));
            band.mean.push(column.iter().sum::<f64>() / n);
            column.sort_by(f64::total_cmp);
            band.p10.push(percentile_sorted(&column, 0.10));
            band.p90.push(percentile_sorted(&column, 0.90));
        }
        band
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mean", "p10", "p90"])?;
        for t in 0..self.len() {
            w.write_record([
                (t + 1).to_string(),
                self.mean[t].to_string(),
                self.p10[t].to_string(),
                self.p90[t].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(BAND_FILE, e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn {
                    column: name.to_string(),
                    path: BAND_FILE.into(),
                })
        };
        let (m, lo, hi) = (col("mean")?, col("p10")?, col("p90")?);
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidInput(format!("bad number `{s}` in regret band")))
        };
        let mut band = RegretBand::default();
        for rec in rdr.records() {
            let rec = rec?;
            band.mean.push(num(&rec[m])?);
            band.p10.push(num(&rec[lo])?);
            band.p90.push(num(&rec[hi])?);
        }
        Ok(band)
    }
}

/// Linear-interpolation percentile of sorted data, `q ∈ [0, 1]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        }
    }
}

/// Equal-width bins over `[0, max]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Histogram {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Values below zero land in the first bin; when every value is at most
    /// zero the bins span `[0, 1]`.
    pub fn over_zero_to_max(values: &[f64], bins: usize) -> Self {
        let max = values.iter().copied().fold(0.0_f64, f64::max);
        let top = if max > 0.0 { max } else { 1.0 };
        let width = top / bins as f64;
        let mut h = Histogram {
            lower: (0..bins).map(|i| i as f64 * width).collect(),
            upper: (0..bins)
                .map(|i| {
                    if i + 1 == bins {
                        top
                    } else {
                        (i + 1) as f64 * width
                    }
                })
                .collect(),
            counts: vec![0; bins],
        };
        for &v in values {
            let i = ((v.max(0.0) / width) as usize).min(bins - 1);
            h.counts[i] += 1;
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin", "lower", "upper", "count"])?;
        for i in 0..self.counts.len() {
            w.write_record([
                i.to_string(),
                self.lower[i].to_string(),
                self.upper[i].to_string(),
                self.counts[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(HISTOGRAM_FILE, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub completed_runs: usize,
    pub optimal_value: f64,
    pub mean_terminal_regret: f64,
    pub p10_terminal_regret: f64,
    pub p90_terminal_regret: f64,
    /// Runs with at least one round whose true expected cost exceeded a
    /// threshold.
    pub runs_with_violations: usize,
    pub branch_counts: BTreeMap<Branch, usize>,
    pub failures: Vec<RunFailure>,
}

/// In-memory result of a replicated study.
#[derive(Debug, Clone)]
pub struct ReplicateReport {
    pub aggregate: Aggregate,
    pub runs: Vec<ReplicateRun>,
    pub band: RegretBand,
    pub histogram: Histogram,
}

impl ReplicateReport {
    pub fn terminal_regrets(&self) -> Vec<f64> {
        self.runs
            .iter()
            .map(ReplicateRun::terminal_regret)
            .collect()
    }
}

/// Runs `n` replicates of `problem` with seeds `master ⊕ i`. Runs execute on
/// the rayon pool; results come back in index order. A failed run carries
/// its index in the error and does not stop the others.
pub fn run_replicates(
    problem: &Problem,
    n: usize,
    master_seed: u64,
    keep_dir: Option<&Path>,
) -> Vec<Result<ReplicateRun>> {
    (0..n)
        .into_par_iter()
        .map(|index| {
            let seed = replicate_seed(master_seed, index);
            let fail = |e: Error| e.at_run(index);
            let out = simulate(problem, seed).map_err(fail)?;
            if let Some(dir) = keep_dir {
                let mut cfg = problem.config.clone();
                cfg.master_seed = seed;
                cfg.replicates = 1;
                write_run(&dir.join(format!("{index:04}")), &cfg, &out).map_err(fail)?;
            }
            let out = out.into_result().map_err(fail)?;
            Ok(ReplicateRun {
                index,
                seed,
                cumulative: out.ledger.cumulative_curve(),
                violation_rounds: out.ledger.violation_count(),
                branch_counts: out.summary.branch_counts,
            })
        })
        .collect()
}

/// Folds finished replicates, in index order, into the summary statistics.
/// Failed runs are listed in the aggregate and returned.
pub fn aggregate(
    problem: &Problem,
    results: Vec<Result<ReplicateRun>>,
) -> (ReplicateReport, Vec<Error>) {
    let cfg = &problem.config;
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut errors = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => {
                failures.push(RunFailure {
                    run: index,
                    seed: replicate_seed(cfg.master_seed, index),
                    error: e.to_string(),
                });
                errors.push(e);
            }
        }
    }
    let curves: Vec<&[f64]> = runs.iter().map(|r| r.cumulative.as_slice()).collect();
    let band = RegretBand::from_curves(&curves);
    let terminal: Vec<f64> = runs.iter().map(ReplicateRun::terminal_regret).collect();
    let mut sorted = terminal.clone();
    sorted.sort_by(f64::total_cmp);
    let mut branch_counts = BTreeMap::new();
    for run in &runs {
        for (b, c) in &run.branch_counts {
            *branch_counts.entry(*b).or_default() += c;
        }
    }
    let aggregate = Aggregate {
        algorithm: cfg.algorithm,
        horizon: cfg.horizon,
        replicates: cfg.replicates,
        master_seed: cfg.master_seed,
        completed_runs: runs.len(),
        optimal_value: problem.optimal_value,
        mean_terminal_regret: if terminal.is_empty() {
            f64::NAN
        } else {
            terminal.iter().sum::<f64>() / terminal.len() as f64
        },
        p10_terminal_regret: percentile_sorted(&sorted, 0.10),
        p90_terminal_regret: percentile_sorted(&sorted, 0.90),
        runs_with_violations: runs.iter().filter(|r| r.violation_rounds > 0).count(),
        branch_counts,
        failures,
    };
    let report = ReplicateReport {
        histogram: Histogram::over_zero_to_max(&terminal, HISTOGRAM_BINS),
        aggregate,
        runs,
        band,
    };
    (report, errors)
}

/// Writes the band, terminal regrets, histogram, aggregate and config of a
/// study into `dir`.
pub fn write_report(dir: &Path, config: &ExperimentConfig, report: &ReplicateReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    report.band.write_csv(create(&dir.join(BAND_FILE))?)?;
    report
        .histogram
        .write_csv(create(&dir.join(HISTOGRAM_FILE))?)?;
    let mut w = csv::Writer::from_writer(create(&dir.join(TERMINAL_FILE))?);
    w.write_record(["run", "seed", "terminal_regret", "violation_rounds"])?;
    for r in &report.runs {
        w.write_record([
            r.index.to_string(),
            r.seed.to_string(),
            r.terminal_regret().to_string(),
            r.violation_rounds.to_string(),
        ])?;
    }
    w.flush()
        .map_err(|e| Error::io(dir.join(TERMINAL_FILE), e))?;
    write_json(&dir.join(AGGREGATE_FILE), &report.aggregate)?;
    fs::write(dir.join(CONFIG_FILE), config.to_json() + "\n")
        .map_err(|e| Error::io(dir.join(CONFIG_FILE), e))?;
    Ok(())
}

/// Runs the configured number of replicates and writes the study artifacts
/// to `out_dir`. Every run is attempted; if any failed, the artifacts cover
/// the successful ones and the first failure is returned with its run index.
pub fn replicate(
    config: &ExperimentConfig,
    out_dir: &Path,
    opts: &ReplicateOptions,
) -> Result<ReplicateReport> {
    if config.replicates < 2 {
        return Err(Error::Config(format!(
            "replicate needs at least 2 replicates, got {}",
            config.replicates
        )));
    }
    let problem = Problem::new(config.clone())?;
    let keep = opts.keep_runs.then(|| out_dir.join("runs"));
    let results = run_replicates(
        &problem,
        config.replicates,
        config.master_seed,
        keep.as_deref(),
    );
    let (report, errors) = aggregate(&problem, results);
    write_report(out_dir, config, &report)?;
    match errors.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
