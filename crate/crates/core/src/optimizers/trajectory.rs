//! Per-iteration records of a run and their CSV form
//! (`t,phase,norm,margin,margin_gap,dir_err,log_loss`).

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{MarginError, Result};
use crate::margin::{self, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Init,
    Warmup,
    GdStep,
    NgdStep,
    Rescale,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Warmup => "warmup",
            Phase::GdStep => "gd-step",
            Phase::NgdStep => "ngd-step",
            Phase::Rescale => "rescale",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = MarginError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "init" => Phase::Init,
            "warmup" => Phase::Warmup,
            "gd-step" => Phase::GdStep,
            "ngd-step" => Phase::NgdStep,
            "rescale" => Phase::Rescale,
            other => {
                return Err(MarginError::Domain(format!("unknown phase `{other}`")));
            }
        })
    }
}

/// Known max-margin direction and value, used for gaps and directional
/// errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub w_star: Weight,
    pub gamma_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    pub phase: Phase,
    pub norm: f64,
    /// NaN at the origin.
    pub margin: f64,
    /// `gamma* - margin`; NaN without a reference.
    pub margin_gap: f64,
    /// `|w/|w| - w*|`; NaN without a reference.
    pub dir_err: f64,
    pub log_loss: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Log every `log_stride`-th iteration (and always the last one).
    pub log_stride: usize,
    /// Stop at the first iteration whose margin gap falls below this.
    pub stop_gap: Option<f64>,
    pub reference: Option<Reference>,
    /// Keep the iterate for every logged row.
    pub keep_weights: bool,
    /// Cap on iterations within a phase, counted from the phase start.
    pub max_iterations: Option<usize>,
}

impl RunOptions {
    pub fn with_reference(reference: Reference) -> Self {
        Self {
            log_stride: 1,
            reference: Some(reference),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    /// Iterates aligned with `rows` when [`RunOptions::keep_weights`] is set.
    pub weights: Option<Vec<Weight>>,
    pub final_weight: Weight,
    pub final_time: usize,
    /// Time index at which the accelerated phase began, if any.
    pub acceleration_start: Option<usize>,
    /// First time index with margin gap below the stop threshold.
    pub stop_time: Option<usize>,
}

impl TrajectoryRecord {
    pub fn last(&self) -> Option<&TrajectoryRow> {
        self.rows.last()
    }

    /// Stop time counted from the start of the accelerated phase (or from 0
    /// for single-phase runs).
    pub fn accel_iterations_to_stop(&self) -> Option<usize> {
        let start = self.acceleration_start.unwrap_or(0);
        self.stop_time.map(|t| t.saturating_sub(start))
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,phase,norm,margin,margin_gap,dir_err,log_loss")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.t,
                r.phase,
                fmt17(r.norm),
                fmt17(r.margin),
                fmt17(r.margin_gap),
                fmt17(r.dir_err),
                fmt17(r.log_loss)
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| MarginError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
        self.write_csv(&mut out).map_err(io_err)?;
        out.flush().map_err(io_err)
    }
}

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Parses rows written by [`TrajectoryRecord::write_csv`].
pub fn read_trajectory_csv<R: std::io::Read>(reader: R) -> Result<Vec<TrajectoryRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected = ["t", "phase", "norm", "margin", "margin_gap", "dir_err", "log_loss"];
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(MarginError::Parse {
            row: 0,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| MarginError::Parse {
                row,
                message: format!("`{}` is not a number", &rec[j]),
            })
        };
        rows.push(TrajectoryRow {
            t: rec[0].parse().map_err(|_| MarginError::Parse {
                row,
                message: format!("`{}` is not an iteration count", &rec[0]),
            })?,
            phase: rec[1].parse().map_err(|_| MarginError::Parse {
                row,
                message: format!("unknown phase `{}`", &rec[1]),
            })?,
            norm: num(2)?,
            margin: num(3)?,
            margin_gap: num(4)?,
            dir_err: num(5)?,
            log_loss: num(6)?,
        });
    }
    Ok(rows)
}

pub fn load_trajectory_csv(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MarginError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_trajectory_csv(file)
}

/// Accumulates rows while a run progresses and decides when to stop.
pub(crate) struct Recorder<'a> {
    ds: &'a Dataset,
    opts: &'a RunOptions,
    rows: Vec<TrajectoryRow>,
    weights: Vec<Weight>,
    stop_time: Option<usize>,
    last_logged: Option<usize>,
    acceleration_start: Option<usize>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(ds: &'a Dataset, opts: &'a RunOptions) -> Self {
        Self {
            ds,
            opts,
            rows: Vec::new(),
            weights: Vec::new(),
            stop_time: None,
            last_logged: None,
            acceleration_start: None,
        }
    }

    pub(crate) fn mark_acceleration(&mut self, t: usize) {
        self.acceleration_start = Some(t);
    }

    pub(crate) fn stopped(&self) -> bool {
        self.stop_time.is_some()
    }

    fn row(&self, t: usize, phase: Phase, w: &Weight) -> Result<TrajectoryRow> {
        let norm = w.dot(w).sqrt();
        let log_loss = margin::log_loss(w, self.ds)?;
        let (m, gap, dir) = if norm == 0.0 {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let m = margin::margin(w, self.ds)?;
            match &self.opts.reference {
                Some(r) => (
                    m,
                    r.gamma_star - m,
                    margin::directional_error(w, &r.w_star)?,
                ),
                None => (m, f64::NAN, f64::NAN),
            }
        };
        Ok(TrajectoryRow {
            t,
            phase,
            norm,
            margin: m,
            margin_gap: gap,
            dir_err: dir,
            log_loss,
        })
    }

    /// Records iterate `w(t)`. Returns `true` when the run should stop.
    pub(crate) fn observe(&mut self, t: usize, phase: Phase, w: &Weight) -> Result<bool> {
        let stride = self.opts.log_stride.max(1);
        let mut stop_now = false;
        let needs_gap = self.opts.stop_gap.is_some() && self.opts.reference.is_some();
        let logged = t % stride == 0;
        let row = if logged || needs_gap {
            Some(self.row(t, phase, w)?)
        } else {
            None
        };
        if let (Some(threshold), Some(r)) = (self.opts.stop_gap, &row) {
            if self.stop_time.is_none() && r.margin_gap < threshold {
                self.stop_time = Some(t);
                stop_now = true;
            }
        }
        if logged || stop_now {
            self.push(row.expect("row computed when logged or stopping"), w);
        }
        Ok(stop_now)
    }

    fn push(&mut self, row: TrajectoryRow, w: &Weight) {
        self.last_logged = Some(row.t);
        self.rows.push(row);
        if self.opts.keep_weights {
            self.weights.push(w.clone());
        }
    }

    pub(crate) fn finish(mut self, t: usize, phase: Phase, w: Weight) -> Result<TrajectoryRecord> {
        if self.last_logged != Some(t) {
            let row = self.row(t, phase, &w)?;
            self.push(row, &w);
        }
        Ok(TrajectoryRecord {
            rows: self.rows,
            weights: self.opts.keep_weights.then_some(self.weights),
            final_weight: w,
            final_time: t,
            acceleration_start: self.acceleration_start,
            stop_time: self.stop_time,
        })
    }
}
