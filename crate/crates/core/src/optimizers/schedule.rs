//! Progressive times and radii for the rescaling method.

use serde::{Deserialize, Serialize};

use crate::error::{MarginError, Result};
use crate::margin::Weight;

/// Supplies cycle lengths `T_{k+1} - T_k` and radii `R_k`.
///
/// A cycle of length `L` is one rescaling step followed by `L - 1`
/// projected normalized-gradient steps.
pub trait Progression {
    fn cycle_len(&self, k: usize) -> usize;

    /// `R_k`, given the iterate `w(T_k)` about to be rescaled and the norm of
    /// the iterate that started the accelerated phase.
    fn radius(&self, k: usize, w: &Weight, start_norm: f64) -> f64;

    /// Number of cycles whose lengths add up to at least `budget` steps.
    fn cycles_for_budget(&self, budget: usize) -> usize {
        let mut total = 0;
        let mut k = 0;
        while total < budget {
            total += self.cycle_len(k).max(1);
            k += 1;
        }
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `R_k = R0 * base^k`, fixed spacing.
    ExpRadius,
    /// `R_k = R0 * (k+1)^alpha`, fixed spacing.
    PolyRadius,
    /// `R_k = R0 * (k+1)^alpha`, `T_{k+1} - T_k = round(T0 * (k+1)^beta)`.
    PolyBoth,
    /// Caller-supplied progressive times (relative, starting at 0) and radii.
    Explicit,
}

/// Serializable schedule description.
///
/// Polynomial schedules are indexed from `k + 1` so that the first cycle
/// uses radius `R0` rather than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub kind: ScheduleKind,
    /// `None` uses the norm of the iterate at the phase switch.
    pub r0: Option<f64>,
    pub spacing: usize,
    pub t0: usize,
    pub alpha: f64,
    pub beta: f64,
    pub base: f64,
    pub explicit_ts: Option<Vec<usize>>,
    pub explicit_rs: Option<Vec<f64>>,
}

impl Default for Schedule {
    fn default() -> Self {
        Self::exp_radius(5, 1.2)
    }
}

impl Schedule {
    pub fn exp_radius(spacing: usize, base: f64) -> Self {
        Self {
            kind: ScheduleKind::ExpRadius,
            r0: None,
            spacing,
            t0: spacing,
            alpha: 1.2,
            beta: 0.0,
            base,
            explicit_ts: None,
            explicit_rs: None,
        }
    }

    pub fn poly_radius(spacing: usize, alpha: f64) -> Self {
        Self {
            kind: ScheduleKind::PolyRadius,
            alpha,
            ..Self::exp_radius(spacing, 1.2)
        }
    }

    pub fn poly_both(t0: usize, beta: f64, alpha: f64) -> Self {
        Self {
            kind: ScheduleKind::PolyBoth,
            t0,
            beta,
            alpha,
            ..Self::exp_radius(t0, 1.2)
        }
    }

    /// `ts` are progressive times relative to the start of the phase
    /// (`ts[0] = 0`); cycle `k` runs from `ts[k]` to `ts[k+1]` at radius `rs[k]`.
    pub fn explicit(ts: Vec<usize>, rs: Vec<f64>) -> Self {
        Self {
            kind: ScheduleKind::Explicit,
            explicit_ts: Some(ts),
            explicit_rs: Some(rs),
            ..Self::exp_radius(1, 1.2)
        }
    }

    pub fn with_r0(mut self, r0: f64) -> Self {
        self.r0 = Some(r0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MarginError::Schedule(m));
        if let Some(r0) = self.r0 {
            if !(r0 > 0.0 && r0.is_finite()) {
                return bad(format!("r0 must be positive, got {r0}"));
            }
        }
        match self.kind {
            ScheduleKind::ExpRadius => {
                if self.spacing == 0 {
                    return bad("spacing must be >= 1".into());
                }
                if !(self.base > 1.0 && self.base.is_finite()) {
                    return bad(format!("base must exceed 1, got {}", self.base));
                }
            }
            ScheduleKind::PolyRadius => {
                if self.spacing == 0 {
                    return bad("spacing must be >= 1".into());
                }
                if !self.alpha.is_finite() {
                    return bad("alpha must be finite".into());
                }
            }
            ScheduleKind::PolyBoth => {
                if self.t0 == 0 {
                    return bad("t0 must be >= 1".into());
                }
                if !self.alpha.is_finite() || !self.beta.is_finite() {
                    return bad("alpha and beta must be finite".into());
                }
            }
            ScheduleKind::Explicit => {
                let (Some(ts), Some(rs)) = (&self.explicit_ts, &self.explicit_rs) else {
                    return bad("explicit schedule needs explicit_ts and explicit_rs".into());
                };
                if ts.first() != Some(&0) {
                    return bad("explicit_ts must start at 0".into());
                }
                if ts.windows(2).any(|p| p[1] <= p[0]) {
                    return bad("explicit_ts must be strictly increasing".into());
                }
                if rs.len() + 1 != ts.len() {
                    return bad(format!(
                        "need one radius per cycle: {} times give {} cycles, got {} radii",
                        ts.len(),
                        ts.len().saturating_sub(1),
                        rs.len()
                    ));
                }
                if rs.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return bad("explicit radii must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Cycles available; unbounded except for explicit schedules.
    pub fn max_cycles(&self) -> Option<usize> {
        match self.kind {
            ScheduleKind::Explicit => self.explicit_rs.as_ref().map(Vec::len),
            _ => None,
        }
    }
}

impl Progression for Schedule {
    fn cycle_len(&self, k: usize) -> usize {
        match self.kind {
            ScheduleKind::ExpRadius | ScheduleKind::PolyRadius => self.spacing,
            ScheduleKind::PolyBoth => {
                let len = self.t0 as f64 * ((k + 1) as f64).powf(self.beta);
                (len.round() as usize).max(1)
            }
            ScheduleKind::Explicit => {
                let ts = self.explicit_ts.as_deref().unwrap_or(&[]);
                match (ts.get(k), ts.get(k + 1)) {
                    (Some(a), Some(b)) => b - a,
                    _ => 1,
                }
            }
        }
    }

    fn radius(&self, k: usize, _w: &Weight, start_norm: f64) -> f64 {
        let r0 = self.r0.unwrap_or(start_norm);
        match self.kind {
            ScheduleKind::ExpRadius => r0 * self.base.powi(k as i32),
            ScheduleKind::PolyRadius | ScheduleKind::PolyBoth => {
                r0 * ((k + 1) as f64).powf(self.alpha)
            }
            ScheduleKind::Explicit => self
                .explicit_rs
                .as_ref()
                .and_then(|rs| rs.get(k).copied())
                .unwrap_or(f64::NAN),
        }
    }
}

/// Rescales so that the component orthogonal to `w*` has length `distance`,
/// `R_k = distance * |w| / |P_perp(w)|`; this places each cycle on the
/// surface of a cylinder around the max-margin ray. With `spacing = 2` on the
/// toy set and `distance = 1` this is the schedule with `w_2 = 1` after every
/// rescale.
#[derive(Debug, Clone)]
pub struct PerpendicularTarget {
    pub w_star: Weight,
    pub distance: f64,
    pub spacing: usize,
}

impl Progression for PerpendicularTarget {
    fn cycle_len(&self, _k: usize) -> usize {
        self.spacing
    }

    fn radius(&self, _k: usize, w: &Weight, _start_norm: f64) -> f64 {
        let along = w.dot(&self.w_star);
        let norm = w.dot(w).sqrt();
        // subtract vectors rather than squared norms; the latter cancels
        // catastrophically once w is nearly parallel to w*
        let residual = w - &(&self.w_star * along);
        let perp = residual.dot(&residual).sqrt();
        if perp == 0.0 {
            norm
        } else {
            self.distance * norm / perp
        }
    }
}
