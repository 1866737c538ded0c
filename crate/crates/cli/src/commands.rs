use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use margin_maxer::analysis::{self, Bounds, Metric, RateFamily, RateFit};
use margin_maxer::dataset::{self, Family, LoadOptions};
use margin_maxer::optimizers::{
    self, fmt17, Progression, Reference, RunOptions, StepKind, TrajectoryRecord, TrajectoryRow,
};
use margin_maxer::reference::{self, DualOptions, MaxMarginSolution, SolveMethod};
use margin_maxer::{Dataset, SyntheticSpec};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{Algorithm, DatasetSource, ExperimentConfig};

pub const NGD_REFERENCE_STEPS: usize = 100_000;

/// Writes `value` to stdout; a reader that closed the pipe early is not an
/// error.
pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn solve_reference(
    ds: &Dataset,
    source: &DatasetSource,
    method: SolveMethod,
    ngd_steps: usize,
) -> Result<MaxMarginSolution> {
    Ok(match method {
        SolveMethod::Exact => match source.synthetic() {
            Some(spec) => reference::solve_exact_synthetic(ds, spec)?,
            None => bail!(
                "unsupported method: the exact solver needs a synthetic dataset spec, \
                 not a data file; use --method dual or ngd"
            ),
        },
        SolveMethod::Dual => reference::solve_dual(ds, DualOptions::default())?,
        SolveMethod::Ngd => reference::approx_by_ngd(ds, ngd_steps)?,
    })
}

// ---------------------------------------------------------------- gen

pub fn gen(spec: SyntheticSpec, out: &Path) -> Result<()> {
    spec.validate()?;
    let ds = spec.generate()?;
    dataset::save_csv(&ds, out)?;
    let back = dataset::load_csv(out, LoadOptions::default())?;
    ensure!(back == ds, "dataset written to {} does not read back identically", out.display());
    let sol = reference::solve_exact_synthetic(&ds, &spec)?;
    print_json(&json!({
        "config": { "dataset": spec, "out_path": out },
        "n": ds.n(),
        "dim": ds.dim(),
        "gamma_star": sol.gamma_star,
        "w_star": sol.w_star.to_vec(),
    }))
}

// ---------------------------------------------------------------- solve

pub fn solve(
    source: &DatasetSource,
    method: SolveMethod,
    ngd_steps: usize,
    out: Option<&Path>,
) -> Result<()> {
    let ds = source.load()?;
    let sol = solve_reference(&ds, source, method, ngd_steps)?;
    let doc = json!({
        "config": { "dataset": source, "method": method, "ngd_steps": ngd_steps, "out_path": out },
        "solution": sol,
        "support_rank": sol.support_rank(&ds),
        "data_rank": reference::data_rank(&ds),
    });
    if let Some(path) = out {
        write_json(&doc, path)?;
    }
    print_json(&doc)
}

// ---------------------------------------------------------------- run

/// Rate fit or the reason it could not be computed.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum FitEntry {
    Fit(RateFit),
    Failed { family: RateFamily, error: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    pub method: SolveMethod,
    pub gamma_star: f64,
    pub w_star: Vec<f64>,
    pub approximate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub reference: ReferenceInfo,
    pub final_time: usize,
    pub final_norm: f64,
    pub final_margin: f64,
    pub final_gap: f64,
    pub final_dir_err: f64,
    pub stop_gap: Option<f64>,
    pub reached: bool,
    /// Counted from t = 0, warm-up included.
    pub iterations_to_stop: Option<usize>,
    /// Counted from the start of the accelerated phase (equal to the total
    /// for single-phase runs).
    pub acceleration_iterations_to_stop: Option<usize>,
    pub acceleration_start: Option<usize>,
    pub fits: Vec<FitEntry>,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub record: TrajectoryRecord,
}

pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let ds = cfg.dataset.load()?;
    let method = cfg.reference.unwrap_or(SolveMethod::Dual);
    let sol = solve_reference(&ds, &cfg.dataset, method, NGD_REFERENCE_STEPS)
        .context("computing the reference max-margin solution")?;
    let opts = RunOptions {
        log_stride: cfg.log_stride,
        stop_gap: cfg.stop_gap,
        reference: Some(Reference {
            w_star: sol.w_star.clone(),
            gamma_star: sol.gamma_star,
        }),
        keep_weights: false,
        max_iterations: None,
    };
    log::info!("running {} for budget {}", cfg.algorithm.name(), cfg.budget);
    let record = match cfg.algorithm {
        Algorithm::Gd => optimizers::run_baseline(&ds, StepKind::Gd, cfg.eta, cfg.budget, &opts)?,
        Algorithm::Ngd => optimizers::run_baseline(&ds, StepKind::Ngd, cfg.eta, cfg.budget, &opts)?,
        Algorithm::Prgd => {
            let mut cycles = cfg.schedule.cycles_for_budget(cfg.budget);
            if let Some(max) = cfg.schedule.max_cycles() {
                cycles = cycles.min(max);
            }
            let opts = RunOptions {
                max_iterations: Some(cfg.budget),
                ..opts
            };
            optimizers::two_phase_run(&ds, cfg.eta, cfg.warmup, &cfg.schedule, cycles, &opts)?
        }
    };
    let last = *record.last().context("empty trajectory")?;
    let window = cfg.fit_window.unwrap_or_else(|| {
        let start = record.acceleration_start.unwrap_or(0).max(1);
        (start as f64, record.final_time as f64)
    });
    let fits = analysis::fit_all(&record.rows, Metric::MarginGap, window)
        .into_iter()
        .map(|(family, r)| match r {
            Ok(fit) => FitEntry::Fit(fit),
            Err(e) => FitEntry::Failed {
                family,
                error: e.to_string(),
            },
        })
        .collect();
    let summary = RunSummary {
        config: cfg.clone(),
        reference: ReferenceInfo {
            method: sol.method,
            gamma_star: sol.gamma_star,
            w_star: sol.w_star.to_vec(),
            approximate: sol.approximate,
        },
        final_time: record.final_time,
        final_norm: last.norm,
        final_margin: last.margin,
        final_gap: last.margin_gap,
        final_dir_err: last.dir_err,
        stop_gap: cfg.stop_gap,
        reached: record.stop_time.is_some(),
        iterations_to_stop: record.stop_time,
        acceleration_iterations_to_stop: record.accel_iterations_to_stop(),
        acceleration_start: record.acceleration_start,
        fits,
    };
    Ok(RunOutput { summary, record })
}

/// `trajectory.csv` -> `trajectory.summary.json`.
pub fn summary_path(trajectory: &Path) -> PathBuf {
    trajectory.with_extension("summary.json")
}

fn save_trajectory(record: &TrajectoryRecord, path: &Path) -> Result<()> {
    record.save_csv(path)?;
    let rows = optimizers::load_trajectory_csv(path)?;
    ensure!(
        rows.len() == record.rows.len(),
        "trajectory {} has {} rows, expected {}",
        path.display(),
        rows.len(),
        record.rows.len()
    );
    Ok(())
}

pub fn run(cfg: ExperimentConfig) -> Result<()> {
    let out = cfg
        .out_path
        .clone()
        .unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    let cfg = ExperimentConfig {
        out_path: Some(out.clone()),
        ..cfg
    };
    let output = execute(&cfg)?;
    save_trajectory(&output.record, &out)?;
    write_json(&output.summary, &summary_path(&out))?;
    print_json(&output.summary)
}

// ---------------------------------------------------------------- compare

fn unique_labels(configs: &[ExperimentConfig]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    configs
        .iter()
        .map(|c| {
            let base = c.label.clone().unwrap_or_else(|| c.algorithm.name().into());
            let count = seen.entry(base.clone()).or_insert(0);
            *count += 1;
            if *count == 1 {
                base
            } else {
                format!("{base}_{count}")
            }
        })
        .collect()
}

/// Gap columns on the union of logged iterations; empty cells where a run
/// did not log that iteration.
pub fn merge_gaps<W: Write>(labels: &[String], runs: &[&[TrajectoryRow]], out: &mut W) -> Result<()> {
    let mut table: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
    for (j, rows) in runs.iter().enumerate() {
        for r in rows.iter() {
            table.entry(r.t).or_insert_with(|| vec![None; runs.len()])[j] = Some(r.margin_gap);
        }
    }
    writeln!(out, "t,{}", labels.join(","))?;
    for (t, cells) in table {
        let cells: Vec<String> = cells
            .into_iter()
            .map(|c| c.map(fmt17).unwrap_or_default())
            .collect();
        writeln!(out, "{t},{}", cells.join(","))?;
    }
    Ok(())
}

pub fn compare(configs: Vec<ExperimentConfig>, out: &Path) -> Result<()> {
    ensure!(!configs.is_empty(), "compare needs at least one config");
    let first = &configs[0].dataset;
    for (i, c) in configs.iter().enumerate().skip(1) {
        if &c.dataset != first {
            bail!(
                "dataset mismatch: config {} uses {}, config 1 uses {}",
                i + 1,
                serde_json::to_string(&c.dataset)?,
                serde_json::to_string(first)?
            );
        }
    }
    let outputs: Vec<RunOutput> = configs.par_iter().map(execute).collect::<Result<_>>()?;
    for o in &outputs {
        if let Some(path) = &o.summary.config.out_path {
            save_trajectory(&o.record, path)?;
        }
    }
    let labels = unique_labels(&configs);
    let rows: Vec<&[TrajectoryRow]> = outputs.iter().map(|o| o.record.rows.as_slice()).collect();
    let mut w = create(out)?;
    merge_gaps(&labels, &rows, &mut w)?;
    w.flush()?;
    let summaries: Vec<&RunSummary> = outputs.iter().map(|o| &o.summary).collect();
    print_json(&json!({
        "config": { "configs": configs, "out_path": out },
        "columns": labels,
        "summaries": summaries,
    }))
}

// ---------------------------------------------------------------- field

pub fn field(
    source: &DatasetSource,
    bounds: Bounds,
    resolution: (usize, usize),
    out: &Path,
) -> Result<()> {
    let ds = source.load()?;
    if ds.dim() != 2 {
        bail!("dimension error: the field grid needs 2-D data, got d = {}", ds.dim());
    }
    let method = if source.synthetic().is_some() {
        SolveMethod::Exact
    } else {
        SolveMethod::Dual
    };
    let w_star = match solve_reference(&ds, source, method, NGD_REFERENCE_STEPS) {
        Ok(sol) => Some(sol.w_star),
        Err(e) => {
            log::warn!("no reference direction, phi will be NaN: {e:#}");
            None
        }
    };
    let grid = analysis::field_grid(&ds, w_star.as_ref(), bounds, resolution, None)?;
    let mut w = create(out)?;
    analysis::write_field_csv(&grid, &mut w)?;
    w.flush()?;
    let band = match source.synthetic() {
        Some(spec) if spec.family == Family::Toy => {
            let (lo, hi) = analysis::attractor_band(spec.gamma_star)?;
            Some([lo, hi])
        }
        _ => None,
    };
    print_json(&json!({
        "config": {
            "dataset": source,
            "bounds": bounds,
            "resolution": resolution,
            "out_path": out,
        },
        "points": grid.len(),
        "w_star": w_star.map(|w| w.to_vec()),
        "attractor_band": band,
    }))
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Clone, Serialize)]
struct FitReport {
    family: RateFamily,
    slope: f64,
    log_c: f64,
    r2: f64,
    window: (f64, f64),
}

pub fn fit(
    trajectory: &Path,
    metric: Metric,
    window: Option<(f64, f64)>,
    out: Option<&Path>,
) -> Result<()> {
    let rows = optimizers::load_trajectory_csv(trajectory)?;
    let window = match window {
        Some(w) => w,
        None => {
            let last = rows.last().context("trajectory has no rows")?.t;
            (1.0, last as f64)
        }
    };
    let fits: Vec<serde_json::Value> = analysis::fit_all(&rows, metric, window)
        .into_iter()
        .map(|(family, r)| match r {
            Ok(f) => serde_json::to_value(FitReport {
                family: f.family,
                slope: f.slope,
                log_c: f.log_c,
                r2: f.r2,
                window: f.window,
            })
            .expect("plain data serializes"),
            Err(e) => json!({ "family": family, "error": e.to_string() }),
        })
        .collect();
    let doc = json!({
        "config": { "trajectory": trajectory, "metric": metric, "window": window, "out_path": out },
        "fits": fits,
    });
    if let Some(path) = out {
        write_json(&doc, path)?;
    }
    print_json(&doc)
}
