use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use safe_bandit::harness::plot::{emit_comparison, emit_plots};
use safe_bandit::harness::replicate::{replicate, ReplicateOptions};
use safe_bandit::harness::{
    preset, run_experiment, Algorithm, ExperimentConfig, Problem, PRESET_NAMES,
};
use safe_bandit::Error;
use tracing_subscriber::filter::LevelFilter;

/// Safe linear bandit simulator: optimal-policy oracle, ℓ1 OPLB and UBM OPLB.
#[derive(Parser)]
#[command(name = "safe-bandit", version)]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run; writes ledger.csv, trajectory.csv, summary.json, config.json.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Render SVG plots next to the CSV files.
        #[arg(long)]
        plot: bool,
    },
    /// Seeded replicates; writes the regret band, terminal regrets and histogram.
    Replicate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        replicates: Option<usize>,
        /// Keep every run's ledger and trajectory under <out>/runs/.
        #[arg(long)]
        keep_runs: bool,
        #[arg(long)]
        plot: bool,
    },
    /// Render SVG plots for a run or study directory, or overlay several studies.
    Plot {
        /// Run or study directory.
        dir: Option<PathBuf>,
        /// Study directories to overlay.
        #[arg(long, num_args = 1.., conflicts_with = "dir")]
        compare: Vec<PathBuf>,
        /// Output directory for --compare.
        #[arg(long, requires = "compare")]
        out: Option<PathBuf>,
    },
    /// Print the omniscient optimal policy of a config as JSON.
    Oracle {
        #[command(flatten)]
        source: Source,
    },
    /// List presets, or print one as JSON.
    Preset { name: Option<String> },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped preset name.
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, Some(name)) => preset(name),
            (None, None) => unreachable!("clap enforces one source"),
        }
    }
}

#[derive(Args)]
struct Overrides {
    /// Output directory (default: the config's output_dir, else ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// l1_oplb, ubm_oplb or oracle_only.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<PathBuf, Error> {
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(alg) = &self.algorithm {
            cfg.algorithm = alg.parse::<Algorithm>()?;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        cfg.validate()?;
        Ok(self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("results")))
    }
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            source,
            overrides,
            plot,
        } => {
            let mut cfg = source.load()?;
            let out = overrides.apply(&mut cfg)?;
            let result = run_experiment(&cfg, &out);
            let art = match result {
                Ok(art) => art,
                Err(e) => {
                    eprintln!("partial artifacts written to {}", out.display());
                    return Err(e);
                }
            };
            let s = &art.summary;
            println!(
                "{} T={} seed={}: cumulative regret {:.6}, violations {}, branches {:?}",
                s.algorithm,
                s.horizon,
                s.seed,
                s.cumulative_regret,
                s.violation_count,
                s.branch_counts
            );
            print_written(&[
                art.ledger_path,
                art.trajectory_path,
                art.summary_path,
                art.config_path,
            ]);
            if plot {
                print_written(&emit_plots(&out)?);
            }
        }
        Command::Replicate {
            source,
            overrides,
            replicates,
            keep_runs,
            plot,
        } => {
            let mut cfg = source.load()?;
            if let Some(n) = replicates {
                cfg.replicates = n;
            }
            let out = overrides.apply(&mut cfg)?;
            let report = replicate(&cfg, &out, &ReplicateOptions { keep_runs })?;
            let a = &report.aggregate;
            println!(
                "{} T={} N={}: mean terminal regret {:.6} (p10 {:.6}, p90 {:.6}), runs with violations {}",
                a.algorithm,
                a.horizon,
                a.completed_runs,
                a.mean_terminal_regret,
                a.p10_terminal_regret,
                a.p90_terminal_regret,
                a.runs_with_violations
            );
            println!("wrote study files to {}", out.display());
            if plot {
                print_written(&emit_plots(&out)?);
            }
        }
        Command::Plot { dir, compare, out } => {
            if !compare.is_empty() {
                let out = out.unwrap_or_else(|| PathBuf::from("."));
                print_written(&emit_comparison(&compare, &out)?);
            } else if let Some(dir) = dir {
                print_written(&emit_plots(&dir)?);
            } else {
                return Err(Error::Config("plot needs a directory or --compare".into()));
            }
        }
        Command::Oracle { source } => {
            let cfg = source.load()?;
            let problem = Problem::new(cfg)?;
            let support: Vec<_> = problem
                .oracle
                .support()
                .iter()
                .map(|(p, w)| serde_json::json!({ "point": p.as_slice(), "weight": w }))
                .collect();
            let doc = serde_json::json!({
                "optimal_value": problem.optimal_value,
                "mean": problem.oracle.mean().as_slice(),
                "support": support,
            });
            emit(&serde_json::to_string_pretty(&doc)?);
        }
        Command::Preset { name } => match name {
            None => emit(&PRESET_NAMES.join("\n")),
            Some(n) => emit(&preset(&n)?.to_json()),
        },
    }
    Ok(())
}

/// Writes a document to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{text}") {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: {e}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => LevelFilter::WARN,
        1 => LevelFilter::INFO,
        _ => LevelFilter::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else if e.is_solver() {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
