//! Least-squares rate fits in linearizing coordinates:
//!
//! | family      | model          | regression          |
//! |-------------|----------------|---------------------|
//! | PowerLaw    | `c * t^p`      | `ln g` on `ln t`    |
//! | Exponential | `c * e^{s t}`  | `ln g` on `t`       |
//! | InverseLog  | `c / ln t`     | `g` on `1 / ln t`   |

use serde::{Deserialize, Serialize};

use crate::error::{MarginError, Result};
use crate::optimizers::TrajectoryRow;

pub const MIN_FIT_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateFamily {
    PowerLaw,
    Exponential,
    InverseLog,
}

impl RateFamily {
    pub const ALL: [RateFamily; 3] = [Self::PowerLaw, Self::Exponential, Self::InverseLog];
}

/// Which trajectory column to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    MarginGap,
    DirErr,
}

impl Metric {
    fn value(self, row: &TrajectoryRow) -> f64 {
        match self {
            Metric::MarginGap => row.margin_gap,
            Metric::DirErr => row.dir_err,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub family: RateFamily,
    /// `p`, `s`, or `c` for PowerLaw, Exponential, InverseLog.
    pub slope: f64,
    /// `ln c`; for InverseLog, `ln` of the slope (NaN if non-positive).
    pub log_c: f64,
    /// Regression intercept in the linearized coordinates.
    pub intercept: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Fits the margin-gap column.
pub fn fit_rate(rows: &[TrajectoryRow], family: RateFamily, window: (f64, f64)) -> Result<RateFit> {
    fit_metric(rows, Metric::MarginGap, family, window)
}

pub fn fit_metric(
    rows: &[TrajectoryRow],
    metric: Metric,
    family: RateFamily,
    window: (f64, f64),
) -> Result<RateFit> {
    let (ts, gs): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .map(|r| (r.t as f64, metric.value(r)))
        .unzip();
    fit_series(&ts, &gs, family, window)
}

/// All three families on the same data; failures are kept per family.
pub fn fit_all(
    rows: &[TrajectoryRow],
    metric: Metric,
    window: (f64, f64),
) -> Vec<(RateFamily, Result<RateFit>)> {
    RateFamily::ALL
        .iter()
        .map(|&f| (f, fit_metric(rows, metric, f, window)))
        .collect()
}

pub fn fit_series(ts: &[f64], gs: &[f64], family: RateFamily, window: (f64, f64)) -> Result<RateFit> {
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(MarginError::Domain(format!("empty window [{lo}, {hi}]")));
    }
    let min_t = match family {
        RateFamily::PowerLaw => 0.0,
        RateFamily::Exponential => f64::NEG_INFINITY,
        RateFamily::InverseLog => 1.0,
    };
    let mut in_window = 0usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &g) in ts.iter().zip(gs) {
        if t < lo || t > hi || t <= min_t || g.is_nan() {
            continue;
        }
        in_window += 1;
        if !(g > 0.0) || !g.is_finite() {
            continue;
        }
        let (x, y) = match family {
            RateFamily::PowerLaw => (t.ln(), g.ln()),
            RateFamily::Exponential => (t, g.ln()),
            RateFamily::InverseLog => (1.0 / t.ln(), g),
        };
        xs.push(x);
        ys.push(y);
    }
    if xs.is_empty() && in_window > 0 {
        return Err(MarginError::AllZeroGap);
    }
    if xs.len() < MIN_FIT_ROWS {
        return Err(MarginError::InsufficientData {
            got: xs.len(),
            need: MIN_FIT_ROWS,
        });
    }
    let (slope, intercept, r2) = least_squares(&xs, &ys);
    let log_c = match family {
        RateFamily::InverseLog => {
            if slope > 0.0 {
                slope.ln()
            } else {
                f64::NAN
            }
        }
        _ => intercept,
    };
    Ok(RateFit {
        family,
        slope,
        log_c,
        intercept,
        r2,
        window,
        points: xs.len(),
    })
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, r^2)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, r2)
}
