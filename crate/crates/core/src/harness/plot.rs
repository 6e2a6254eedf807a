use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::replicate::{RegretBand, BAND_FILE, HISTOGRAM_BINS, TERMINAL_FILE};
use super::run::{open, RunArtifacts, Trajectory, CONFIG_FILE, LEDGER_FILE};
use super::svg::{gradient, Figure, Range};
use crate::decision_set::PieceSpec;
use crate::environment::RegretLedger;
use crate::{Error, Result};

/// Rounds whose support is drawn on the trajectory plot, when reached.
pub const HIGHLIGHT_ROUNDS: [usize; 3] = [1, 40, 100];
const HIGHLIGHT_COLORS: [&str; 3] = ["#00c8d7", "#d400d4", "#6a1b9a"];
const SERIES_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];
const PATH_START: (u8, u8, u8) = (255, 215, 0);
const PATH_END: (u8, u8, u8) = (200, 0, 0);

/// Vertices of `{x ∈ R² : A·x ≤ b}` in counter-clockwise order.
fn polygon_vertices(a: &[Vec<f64>], b: &[f64]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let det = a[i][0] * a[j][1] - a[i][1] * a[j][0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (b[i] * a[j][1] - a[i][1] * b[j]) / det;
            let y = (a[i][0] * b[j] - b[i] * a[j][0]) / det;
            let inside = a
                .iter()
                .zip(b)
                .all(|(r, bk)| r[0] * x + r[1] * y <= bk + 1e-9 * (1.0 + bk.abs()));
            if inside && !pts.iter().any(|p| (p.0 - x).abs() + (p.1 - y).abs() < 1e-9) {
                pts.push((x, y));
            }
        }
    }
    let n = pts.len().max(1) as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    pts.sort_by(|p, q| {
        (p.1 - cy)
            .atan2(p.0 - cx)
            .total_cmp(&(q.1 - cy).atan2(q.0 - cx))
    });
    pts
}

/// Axis-aligned bounds of a 2-D piece.
fn piece_extent(spec: &PieceSpec) -> Vec<(f64, f64)> {
    match spec {
        PieceSpec::Ball { center, radius } => vec![
            (center[0] - radius, center[1] - radius),
            (center[0] + radius, center[1] + radius),
        ],
        PieceSpec::Box { lower, upper } => vec![(lower[0], lower[1]), (upper[0], upper[1])],
        PieceSpec::Polytope { a, b } => polygon_vertices(a, b),
    }
}

/// Endpoints of `{x : μᵀx = τ}` inside the view rectangle.
fn clip_line(mu: (f64, f64), tau: f64, xr: Range, yr: Range) -> Option<((f64, f64), (f64, f64))> {
    let mut hits = Vec::new();
    if mu.1.abs() > 1e-12 {
        for x in [xr.lo, xr.hi] {
            let y = (tau - mu.0 * x) / mu.1;
            if y >= yr.lo && y <= yr.hi {
                hits.push((x, y));
            }
        }
    }
    if mu.0.abs() > 1e-12 {
        for y in [yr.lo, yr.hi] {
            let x = (tau - mu.1 * y) / mu.0;
            if x >= xr.lo && x <= xr.hi {
                hits.push((x, y));
            }
        }
    }
    let first = *hits.first()?;
    let far = hits.iter().copied().max_by(|p, q| {
        let d = |r: &(f64, f64)| (r.0 - first.0).hypot(r.1 - first.1);
        d(p).total_cmp(&d(q))
    })?;
    Some((first, far))
}

/// Decision set outlines, constraint lines, the mean-policy path colored by
/// time, support points of highlighted rounds sized by weight, and the
/// optimal mean. Two-dimensional problems only.
pub fn trajectory_svg(
    config: &ExperimentConfig,
    traj: &Trajectory,
    optimal_mean: &[f64],
) -> Result<String> {
    if config.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "trajectory plot needs a 2-D decision set, got d = {}",
            config.dim()
        )));
    }
    let extent: Vec<(f64, f64)> = config.decision_set.iter().flat_map(piece_extent).collect();
    let means = traj.means();
    let xs = extent
        .iter()
        .map(|p| p.0)
        .chain(means.iter().map(|m| m.1[0]));
    let ys = extent
        .iter()
        .map(|p| p.1)
        .chain(means.iter().map(|m| m.1[1]));
    let mut fig = Figure::new(
        &format!("Mean policy trajectory ({})", config.algorithm),
        Range::covering(xs, false, 0.08),
        Range::covering(ys, false, 0.08),
    )
    .equal_aspect()
    .labels("x_1", "x_2");

    for spec in &config.decision_set {
        match spec {
            PieceSpec::Ball { center, radius } => fig.data_circle(
                (center[0], center[1]),
                *radius,
                "#444444",
                "#9ecae1",
                "piece",
            ),
            PieceSpec::Box { lower, upper } => {
                if lower == upper {
                    fig.dot((lower[0], lower[1]), 3.0, "#444444", "#9ecae1", "piece");
                } else {
                    fig.rect(
                        (lower[0], lower[1]),
                        (upper[0], upper[1]),
                        "#444444",
                        "#9ecae1",
                        "piece",
                    );
                }
            }
            PieceSpec::Polytope { a, b } => {
                fig.polygon(&polygon_vertices(a, b), "#444444", "#9ecae1", 0.15, "piece")
            }
        }
    }
    for (row, tau) in config.cost_matrix.iter().zip(&config.tau) {
        if let Some((p, q)) = clip_line((row[0], row[1]), *tau, fig.x_range(), fig.y_range()) {
            fig.segment(p, q, "black", 1.5, "constraint");
        }
    }

    let horizon = means.last().map(|m| m.0).unwrap_or(1).max(2);
    for w in means.windows(2) {
        let f = (w[1].0 - 1) as f64 / (horizon - 1) as f64;
        let color = gradient(PATH_START, PATH_END, f);
        fig.segment(
            (w[0].1[0], w[0].1[1]),
            (w[1].1[0], w[1].1[1]),
            &color,
            2.0,
            "path",
        );
    }
    for (k, &t) in HIGHLIGHT_ROUNDS.iter().enumerate() {
        let Some((_, m)) = means.iter().find(|m| m.0 == t) else {
            continue;
        };
        for (p, w) in traj.support_at(t) {
            fig.dot(
                (p[0], p[1]),
                2.0 + 10.0 * w,
                "black",
                HIGHLIGHT_COLORS[k],
                "support",
            );
        }
        fig.dot((m[0], m[1]), 6.0, "black", HIGHLIGHT_COLORS[k], "highlight");
        fig.text((m[0], m[1]), &format!("t={t}"), "highlight-label");
    }
    if optimal_mean.len() == 2 {
        fig.dot(
            (optimal_mean[0], optimal_mean[1]),
            5.0,
            "black",
            "black",
            "optimum",
        );
        fig.text((optimal_mean[0], optimal_mean[1]), "x*", "optimum-label");
    }
    Ok(fig.finish())
}

/// Cumulative pseudo-regret of one run; an empty ledger gives bare axes.
pub fn regret_svg(ledger: &RegretLedger, label: &str) -> String {
    let curve = ledger.cumulative_curve();
    let mut fig = Figure::new(
        &format!("Cumulative regret ({label})"),
        Range::new(0.0, curve.len().max(1) as f64),
        Range::covering(curve.iter().copied(), true, 0.05),
    )
    .labels("round t", "cumulative regret");
    if !curve.is_empty() {
        let pts: Vec<(f64, f64)> = curve
            .iter()
            .enumerate()
            .map(|(i, v)| ((i + 1) as f64, *v))
            .collect();
        fig.polyline(&pts, SERIES_COLORS[0], 1.8, "regret");
    }
    fig.finish()
}

/// Mean cumulative regret with a shaded 10–90 percentile band, one series
/// per labeled study.
pub fn band_svg(series: &[(String, RegretBand)]) -> String {
    let len = series.iter().map(|s| s.1.len()).max().unwrap_or(0);
    let values = series
        .iter()
        .flat_map(|s| s.1.p90.iter().chain(s.1.p10.iter()).copied());
    let mut fig = Figure::new(
        "Cumulative regret: mean and 10-90 percentile band",
        Range::new(0.0, len.max(1) as f64),
        Range::covering(values, true, 0.05),
    )
    .labels("round t", "cumulative regret");
    for (k, (label, band)) in series.iter().enumerate() {
        let color = SERIES_COLORS[k % SERIES_COLORS.len()];
        let mut outline: Vec<(f64, f64)> = band
            .p90
            .iter()
            .enumerate()
            .map(|(i, v)| ((i + 1) as f64, *v))
            .collect();
        outline.extend(
            band.p10
                .iter()
                .enumerate()
                .rev()
                .map(|(i, v)| ((i + 1) as f64, *v)),
        );
        if !outline.is_empty() {
            fig.polygon(&outline, "none", color, 0.2, "band");
        }
        let mean: Vec<(f64, f64)> = band
            .mean
            .iter()
            .enumerate()
            .map(|(i, v)| ((i + 1) as f64, *v))
            .collect();
        fig.polyline(&mean, color, 1.8, "mean");
        fig.add_legend(label, color);
    }
    fig.finish()
}

/// Terminal regret histograms over common equal-width bins spanning
/// `[0, max]`.
pub fn histogram_svg(series: &[(String, Vec<f64>)], bins: usize) -> String {
    let max = series
        .iter()
        .flat_map(|s| s.1.iter().copied())
        .fold(0.0_f64, f64::max);
    let top = if max > 0.0 { max } else { 1.0 };
    let width = top / bins as f64;
    let counts: Vec<Vec<usize>> = series
        .iter()
        .map(|(_, v)| {
            let mut c = vec![0; bins];
            for x in v {
                c[((x.max(0.0) / width) as usize).min(bins - 1)] += 1;
            }
            c
        })
        .collect();
    let peak = counts.iter().flatten().copied().max().unwrap_or(0).max(1);
    let mut fig = Figure::new(
        "Terminal cumulative regret",
        Range::new(0.0, top),
        Range::new(0.0, peak as f64 * 1.1),
    )
    .labels("terminal regret", "runs");
    let k = series.len().max(1) as f64;
    for (s, (label, _)) in series.iter().enumerate() {
        let color = SERIES_COLORS[s % SERIES_COLORS.len()];
        for (i, &c) in counts[s].iter().enumerate() {
            if c == 0 {
                continue;
            }
            let x0 = i as f64 * width + s as f64 * width / k;
            fig.rect((x0, 0.0), (x0 + width / k, c as f64), color, color, "bar");
        }
        fig.add_legend(label, color);
    }
    fig.finish()
}

fn read_terminal(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "terminal_regret")
        .ok_or_else(|| Error::MissingColumn {
            column: "terminal_regret".into(),
            path: path.to_path_buf(),
        })?;
    rdr.records()
        .map(|r| {
            let r = r?;
            r[col].parse().map_err(|_| {
                Error::InvalidInput(format!("bad number `{}` in {}", &r[col], path.display()))
            })
        })
        .collect()
}

fn write_svg(path: PathBuf, body: String) -> Result<PathBuf> {
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn study_label(dir: &Path) -> String {
    ExperimentConfig::load(&dir.join(CONFIG_FILE))
        .map(|c| c.algorithm.to_string())
        .unwrap_or_else(|_| dir.display().to_string())
}

/// Renders the plots for a run directory (ledger, trajectory) or a study
/// directory (regret band, histogram) into the same directory.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if dir.join(LEDGER_FILE).exists() {
        let (ledger, traj, summary) = RunArtifacts::load(dir)?;
        let label = summary.algorithm.to_string();
        written.push(write_svg(
            dir.join("regret.svg"),
            regret_svg(&ledger, &label),
        )?);
        let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
        if config.dim() == 2 {
            let svg = trajectory_svg(&config, &traj, &summary.optimal_mean)?;
            written.push(write_svg(dir.join("trajectory.svg"), svg)?);
        } else {
            tracing::info!("skipping trajectory plot for d = {}", config.dim());
        }
    } else if dir.join(BAND_FILE).exists() {
        let label = study_label(dir);
        let band = RegretBand::read_csv(open(&dir.join(BAND_FILE))?)?;
        written.push(write_svg(
            dir.join("regret_band.svg"),
            band_svg(&[(label.clone(), band)]),
        )?);
        let terminal = read_terminal(&dir.join(TERMINAL_FILE))?;
        written.push(write_svg(
            dir.join("terminal_histogram.svg"),
            histogram_svg(&[(label, terminal)], HISTOGRAM_BINS),
        )?);
    } else {
        return Err(Error::MissingColumn {
            column: format!("{LEDGER_FILE} or {BAND_FILE}"),
            path: dir.to_path_buf(),
        });
    }
    Ok(written)
}

/// Overlays the regret bands and terminal histograms of several study
/// directories, labeled by algorithm.
pub fn emit_comparison(dirs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut bands = Vec::new();
    let mut terminals = Vec::new();
    for dir in dirs {
        let label = study_label(dir);
        bands.push((
            label.clone(),
            RegretBand::read_csv(open(&dir.join(BAND_FILE))?)?,
        ));
        terminals.push((label, read_terminal(&dir.join(TERMINAL_FILE))?));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    Ok(vec![
        write_svg(out_dir.join("regret_comparison.svg"), band_svg(&bands))?,
        write_svg(
            out_dir.join("terminal_histogram_comparison.svg"),
            histogram_svg(&terminals, HISTOGRAM_BINS),
        )?,
    ])
}
