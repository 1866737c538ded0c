//! Ground-truth max-margin solutions and the closed-form toy dynamics.
//!
//! Three independent routes to `(w*, gamma*)`:
//! - [`solve_exact_synthetic`]: the generator's construction (`w* = e1`);
//! - [`solve_dual`]: hard-margin SVM through the origin by cyclic coordinate
//!   ascent on the dual;
//! - [`approx_by_ngd`]: a long normalized-gradient run.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{Dataset, Family, SyntheticSpec};
use crate::error::{MarginError, Result};
use crate::linalg;
use crate::margin::{self, Weight};
use crate::optimizers::{ngd_step, Reference, TrajectoryRecord, TrajectoryRow, Phase};

/// Margin-equality tolerance for the exact support scan.
pub const EXACT_SUPPORT_TOL: f64 = 1e-9;
/// Relative dual-coefficient cutoff for the dual support set.
pub const DUAL_SUPPORT_REL: f64 = 1e-6;
/// Margin slack defining the support set of an NGD estimate.
pub const NGD_SUPPORT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Exact,
    Dual,
    Ngd,
}

impl std::str::FromStr for SolveMethod {
    type Err = MarginError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "dual" => Ok(Self::Dual),
            "ngd" => Ok(Self::Ngd),
            other => Err(MarginError::Domain(format!("unknown solve method `{other}`"))),
        }
    }
}

/// KKT-style diagnostics of a solution, evaluated at `u = w*/gamma*`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// `max_i max(0, 1 - <u, z_i>)`.
    pub primal: f64,
    /// `max_i alpha_i |<u, z_i> - 1|`; zero when no dual coefficients exist.
    pub slackness: f64,
    /// `|gamma* sum_i alpha_i z_i - w*|`, when dual coefficients exist.
    pub representation: Option<f64>,
    /// Coordinate-ascent sweeps used by the dual solver.
    pub sweeps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMarginSolution {
    #[serde(serialize_with = "ser_weight", deserialize_with = "de_weight")]
    pub w_star: Weight,
    pub gamma_star: f64,
    pub support: Vec<usize>,
    /// Smallest margin outside the support; `None` (JSON `null`) stands for
    /// `+inf` when every point is a support vector.
    pub gamma_sub: Option<f64>,
    pub method: SolveMethod,
    pub approximate: bool,
    /// Dual coefficients over the support, in support order.
    pub dual_alpha: Option<Vec<f64>>,
    pub residuals: Residuals,
}

fn ser_weight<S: Serializer>(w: &Weight, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(w.iter())
}

fn de_weight<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Weight, D::Error> {
    Vec::<f64>::deserialize(d).map(Array1::from)
}

impl MaxMarginSolution {
    pub fn reference(&self) -> Reference {
        Reference {
            w_star: self.w_star.clone(),
            gamma_star: self.gamma_star,
        }
    }

    /// `gamma_sub` with `+inf` for an all-support dataset.
    pub fn gamma_sub_or_inf(&self) -> f64 {
        self.gamma_sub.unwrap_or(f64::INFINITY)
    }

    /// `|gamma* w* - mean_{i in I} z_i|`; nonzero means NGD keeps an `O(1)`
    /// orthogonal offset and converges only at a polynomial rate.
    pub fn attractor_offset(&self, ds: &Dataset) -> f64 {
        let mean = ds.signed_mean(&self.support);
        let diff = &self.w_star * self.gamma_star - mean;
        diff.dot(&diff).sqrt()
    }

    pub fn support_rank(&self, ds: &Dataset) -> usize {
        let rows = ds.points().select(ndarray::Axis(0), &self.support);
        linalg::rank(rows.view())
    }
}

pub fn data_rank(ds: &Dataset) -> usize {
    linalg::rank(ds.points())
}

fn margins_along(ds: &Dataset, w_star: &Weight) -> Array1<f64> {
    ds.signed_points().dot(w_star)
}

fn gamma_sub(scores: &Array1<f64>, support: &[usize]) -> Option<f64> {
    let sub = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| !support.contains(i))
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    sub.is_finite().then_some(sub)
}

fn residuals(
    ds: &Dataset,
    w_star: &Weight,
    gamma: f64,
    support: &[usize],
    alpha: Option<&[f64]>,
) -> Residuals {
    let u = w_star / gamma;
    let scores = ds.signed_points().dot(&u);
    let primal = scores.iter().map(|s| (1.0 - s).max(0.0)).fold(0.0, f64::max);
    let (slackness, representation) = match alpha {
        Some(a) => {
            let slack = support
                .iter()
                .zip(a)
                .map(|(&i, &ai)| ai * (scores[i] - 1.0).abs())
                .fold(0.0, f64::max);
            let mut combo = Array1::zeros(ds.dim());
            for (&i, &ai) in support.iter().zip(a) {
                combo.scaled_add(ai * gamma, &ds.signed_point(i));
            }
            let diff = combo - w_star;
            (slack, Some(diff.dot(&diff).sqrt()))
        }
        None => (0.0, None),
    };
    Residuals {
        primal,
        slackness,
        representation,
        sweeps: None,
    }
}

/// Solution of a generated dataset by construction: `w* = e1` and `gamma*`
/// from the spec, verified against the data.
pub fn solve_exact_synthetic(ds: &Dataset, spec: &SyntheticSpec) -> Result<MaxMarginSolution> {
    let mismatch = |reason: String| MarginError::FamilyMismatch {
        family: spec.family.name().into(),
        reason,
    };
    if ds.dim() != 2 {
        return Err(mismatch(format!("expected 2-D data, got d = {}", ds.dim())));
    }
    if spec.family == Family::Toy && ds.n() != 3 {
        return Err(mismatch(format!("expected 3 points, got {}", ds.n())));
    }
    let g = spec.gamma_star;
    let pinned = match spec.family {
        Family::Toy => crate::dataset::make_toy(g)?,
        Family::SphereCap | Family::BallCap => SyntheticSpec { n: 2, ..*spec }.generate()?,
    };
    for i in 0..pinned.n() {
        if pinned.point(i) != ds.point(i) || pinned.labels()[i] != ds.labels()[i] {
            return Err(mismatch(format!("point {i} differs from the pinned point")));
        }
    }
    let w_star = ndarray::array![1.0, 0.0];
    let scores = margins_along(ds, &w_star);
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    if (min - g).abs() > 1e-12 {
        return Err(mismatch(format!(
            "min_i y_i <e1, x_i> = {min} but gamma* = {g}"
        )));
    }
    // e1 is optimal only if no rotation improves the margin: the support
    // vectors must have signed second coordinates of both signs (or zero).
    let support: Vec<usize> = (0..ds.n())
        .filter(|&i| (scores[i] - g).abs() <= EXACT_SUPPORT_TOL)
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in &support {
        lo = lo.min(ds.signed_point(i)[1]);
        hi = hi.max(ds.signed_point(i)[1]);
    }
    if lo > 0.0 || hi < 0.0 {
        return Err(mismatch("support vectors do not pin e1 as optimal".into()));
    }
    let gamma_sub = gamma_sub(&scores, &support);
    let residuals = residuals(ds, &w_star, g, &support, None);
    Ok(MaxMarginSolution {
        w_star,
        gamma_star: g,
        support,
        gamma_sub,
        method: SolveMethod::Exact,
        approximate: false,
        dual_alpha: None,
        residuals,
    })
}

/// Options for [`solve_dual`].
#[derive(Debug, Clone, Copy)]
pub struct DualOptions {
    pub max_sweeps: usize,
    /// Target on the largest KKT violation.
    pub tol: f64,
    /// Sweeps between stall checks.
    pub stall_window: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 1_000_000,
            tol: 1e-12,
            stall_window: 5_000,
        }
    }
}

fn kkt_violation(alpha: &[f64], scores: &Array1<f64>) -> f64 {
    alpha
        .iter()
        .zip(scores)
        .map(|(&a, &s)| {
            if a > 0.0 {
                (1.0 - s).abs()
            } else {
                (1.0 - s).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Hard-margin SVM through the origin, `min |u|^2 s.t. <u, z_i> >= 1`, by
/// cyclic coordinate ascent on `max_a sum a_i - |sum a_i z_i|^2 / 2`,
/// `a >= 0`, with exact one-dimensional maximization.
pub fn solve_dual(ds: &Dataset, opts: DualOptions) -> Result<MaxMarginSolution> {
    let z: Array2<f64> = ds.signed_points().to_owned();
    let n = ds.n();
    let sq: Vec<f64> = z.rows().into_iter().map(|r| r.dot(&r)).collect();
    if let Some(i) = sq.iter().position(|&q| q == 0.0) {
        return Err(MarginError::NonSeparable(format!(
            "point {i} is the origin and can never have positive margin"
        )));
    }
    let mut alpha = vec![0.0; n];
    let mut u = Array1::<f64>::zeros(ds.dim());
    let mut checkpoint = f64::INFINITY;
    let mut sweeps = 0;
    let violation = loop {
        for i in 0..n {
            let zi = z.row(i);
            let grad = 1.0 - u.dot(&zi);
            let next = (alpha[i] + grad / sq[i]).max(0.0);
            let delta = next - alpha[i];
            if delta != 0.0 {
                u.scaled_add(delta, &zi);
                alpha[i] = next;
            }
        }
        sweeps += 1;
        let scores = z.dot(&u);
        let v = kkt_violation(&alpha, &scores);
        if !v.is_finite() || u.iter().any(|x| !x.is_finite()) {
            return Err(MarginError::NonSeparable("dual iterates diverged".into()));
        }
        if v < opts.tol {
            break v;
        }
        if sweeps >= opts.max_sweeps {
            return Err(MarginError::NonSeparable(format!(
                "KKT residual {v:.3e} above {:.1e} after {sweeps} sweeps",
                opts.tol
            )));
        }
        if sweeps % opts.stall_window == 0 {
            if v > 0.99 * checkpoint {
                return Err(MarginError::NonSeparable(format!(
                    "KKT residual stalled at {v:.3e} after {sweeps} sweeps"
                )));
            }
            checkpoint = v;
        }
    };
    let unorm = u.dot(&u).sqrt();
    let w_star = &u / unorm;
    let gamma = 1.0 / unorm;
    let amax = alpha.iter().copied().fold(0.0, f64::max);
    let support: Vec<usize> = (0..n)
        .filter(|&i| alpha[i] > DUAL_SUPPORT_REL * amax)
        .collect();
    let support_alpha: Vec<f64> = support.iter().map(|&i| alpha[i]).collect();
    let scores = margins_along(ds, &w_star);
    let mut res = residuals(ds, &w_star, gamma, &support, Some(&support_alpha));
    res.sweeps = Some(sweeps);
    log::debug!("dual solver: {sweeps} sweeps, KKT residual {violation:.3e}");
    Ok(MaxMarginSolution {
        gamma_sub: gamma_sub(&scores, &support),
        w_star,
        gamma_star: gamma,
        support,
        method: SolveMethod::Dual,
        approximate: false,
        dual_alpha: Some(support_alpha),
        residuals: res,
    })
}

/// Runs `steps` NGD iterations (`eta = 1`) from the origin and reports the
/// normalized iterate and its margin, a lower estimate of `gamma*`.
pub fn approx_by_ngd(ds: &Dataset, steps: usize) -> Result<MaxMarginSolution> {
    if steps < 1000 {
        return Err(MarginError::Domain(format!(
            "NGD approximation needs at least 1000 steps, got {steps}"
        )));
    }
    let mut w = Weight::zeros(ds.dim());
    for _ in 0..steps {
        w = ngd_step(&w, ds, 1.0)?;
    }
    let norm = w.dot(&w).sqrt();
    if norm == 0.0 {
        return Err(MarginError::NonSeparable("NGD iterate stayed at the origin".into()));
    }
    let gamma = margin::margin(&w, ds)?;
    if gamma <= 0.0 {
        return Err(MarginError::NonSeparable(format!(
            "margin after {steps} NGD steps is {gamma:.3e} <= 0"
        )));
    }
    let w_star = w / norm;
    let scores = margins_along(ds, &w_star);
    let support: Vec<usize> = (0..ds.n())
        .filter(|&i| scores[i] - gamma <= NGD_SUPPORT_TOL)
        .collect();
    Ok(MaxMarginSolution {
        gamma_sub: gamma_sub(&scores, &support),
        residuals: residuals(ds, &w_star, gamma, &support, None),
        w_star,
        gamma_star: gamma,
        support,
        method: SolveMethod::Ngd,
        approximate: true,
        dual_alpha: None,
    })
}

/// Closed-form NGD iterates (`eta = 1`, `w(0) = 0`) on the toy set.
///
/// `w1(t) = gamma t` and, with `x = 2 w2 sqrt(1 - gamma^2) - ln 2`,
/// `x(t+1) = x(t) + 2 (1 - gamma^2) (1 - e^x) / (1 + e^x)`, `x(0) = -ln 2`.
#[derive(Debug, Clone)]
pub struct ToyTrajectory {
    pub gamma_star: f64,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub x: Vec<f64>,
}

pub fn toy_oracle_ngd(gamma_star: f64, steps: usize) -> Result<ToyTrajectory> {
    if !(gamma_star > 0.0 && gamma_star < 1.0) {
        return Err(MarginError::Domain(format!(
            "gamma_star must lie in (0, 1), got {gamma_star}"
        )));
    }
    let g = gamma_star;
    let c = 1.0 - g * g;
    let s = c.sqrt();
    let ln2 = std::f64::consts::LN_2;
    let mut x = Vec::with_capacity(steps + 1);
    x.push(-ln2);
    for t in 0..steps {
        let e = x[t].exp();
        x.push(x[t] + 2.0 * c * (1.0 - e) / (1.0 + e));
    }
    let w1 = (0..=steps).map(|t| g * t as f64).collect();
    let w2 = x.iter().map(|&xt| (xt + ln2) / (2.0 * s)).collect();
    Ok(ToyTrajectory {
        gamma_star: g,
        w1,
        w2,
        x,
    })
}

impl ToyTrajectory {
    /// Trajectory rows computed from the closed-form iterates, with
    /// margin, loss and directional error written out for the toy geometry.
    pub fn record(&self) -> TrajectoryRecord {
        let g = self.gamma_star;
        let s = (1.0 - g * g).sqrt();
        let rows = self
            .w1
            .iter()
            .zip(&self.w2)
            .enumerate()
            .map(|(t, (&a, &b))| {
                let norm = a.hypot(b);
                let log_loss = -g * a + ((2.0 * (-s * b).exp() + (s * b).exp()) / 3.0).ln();
                let (m, dir) = if norm == 0.0 {
                    (f64::NAN, f64::NAN)
                } else {
                    let m = (g * a - s * b.abs()) / norm;
                    (m, (a / norm - 1.0).hypot(b / norm))
                };
                TrajectoryRow {
                    t,
                    phase: if t == 0 { Phase::Init } else { Phase::NgdStep },
                    norm,
                    margin: m,
                    margin_gap: g - m,
                    dir_err: dir,
                    log_loss,
                }
            })
            .collect();
        let last = self.w1.len() - 1;
        TrajectoryRecord {
            rows,
            weights: None,
            final_weight: ndarray::array![self.w1[last], self.w2[last]],
            final_time: last,
            acceleration_start: None,
            stop_time: None,
        }
    }
}

/// `q = 1 + s (2 - e^{2s}) / (2 + e^{2s})`, `s = sqrt(1 - gamma^2)`: the
/// value `w2` drops to after one normalized step from height 1 on the toy set.
pub fn toy_q(gamma_star: f64) -> f64 {
    let s = (1.0 - gamma_star * gamma_star).sqrt();
    let e = (2.0 * s).exp();
    1.0 + s * (2.0 - e) / (2.0 + e)
}

/// `w1` at the rescaled even steps `2k + 2`, `k = 0..=cycles`, for PRGD on the
/// toy set started from one NGD step and rescaled to `w2 = 1` every other
/// step: `w1(2k+2) = q^{-k} (w1(2) + g/(1-q)) - g/(1-q)`, `w1(2) = 3g/s`.
pub fn toy_oracle_prgd(gamma_star: f64, cycles: usize) -> Result<Vec<f64>> {
    if !(gamma_star > 0.0 && gamma_star < 1.0) {
        return Err(MarginError::Domain(format!(
            "gamma_star must lie in (0, 1), got {gamma_star}"
        )));
    }
    let g = gamma_star;
    let s = (1.0 - g * g).sqrt();
    let q = toy_q(g);
    debug_assert!(q > 0.0 && q < 1.0);
    let start = 3.0 * g / s;
    let shift = g / (1.0 - q);
    Ok((0..=cycles)
        .map(|k| q.powi(-(k as i32)) * (start + shift) - shift)
        .collect())
}
