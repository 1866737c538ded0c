//! Exponential loss in log space, its normalized gradient, margins and the
//! decomposition of a weight along / across a reference direction.
//!
//! The loss `L(w) = (1/n) sum_i exp(-<w, z_i>)` is never materialized: at the
//! norms reached by the accelerated methods it underflows. Everything is
//! expressed through the softmax weights `p_i ∝ exp(-<w, z_i>)`, for which
//! `grad L / L = -sum_i p_i z_i`.

use ndarray::Array1;

use crate::dataset::Dataset;
use crate::error::{check_dim, MarginError, Result};

pub type Weight = Array1<f64>;

/// Tolerance on `|w*| = 1` for reference directions.
pub const UNIT_TOL: f64 = 1e-10;
/// `|P_perp(w)|` below this means `w` sits on the reference ray.
pub const DEGENERATE_PERP: f64 = 1e-14;

/// Loss, softmax weights and normalized gradient at one point.
#[derive(Debug, Clone)]
pub struct LossEval {
    /// `log L(w)`.
    pub log_loss: f64,
    /// `p_i ∝ exp(-<w, z_i>)`, summing to one.
    pub soft_weights: Array1<f64>,
    /// `grad L(w) / L(w)`.
    pub normalized_gradient: Array1<f64>,
}

impl LossEval {
    pub fn evaluate(w: &Weight, ds: &Dataset) -> Result<Self> {
        check_dim(ds.dim(), w.len())?;
        let z = ds.signed_points();
        let scores = z.dot(w);
        let top = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let mut p = scores.mapv(|s| (top - s).exp());
        let total = p.sum();
        p /= total;
        let log_loss = -top + total.ln() - (ds.n() as f64).ln();
        let normalized_gradient = -z.t().dot(&p);
        Ok(Self {
            log_loss,
            soft_weights: p,
            normalized_gradient,
        })
    }
}

/// `log L(w)`, stable at any norm.
pub fn log_loss(w: &Weight, ds: &Dataset) -> Result<f64> {
    check_dim(ds.dim(), w.len())?;
    let scores = ds.signed_points().dot(w);
    let top = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let total: f64 = scores.iter().map(|&s| (top - s).exp()).sum();
    Ok(-top + total.ln() - (ds.n() as f64).ln())
}

/// `grad L(w) / L(w)`.
pub fn normalized_gradient(w: &Weight, ds: &Dataset) -> Result<Array1<f64>> {
    Ok(LossEval::evaluate(w, ds)?.normalized_gradient)
}

/// `min_i y_i <w, x_i> / |w|`.
pub fn margin(w: &Weight, ds: &Dataset) -> Result<f64> {
    margin_with_index(w, ds).map(|(m, _)| m)
}

/// Margin together with the smallest index attaining it.
pub fn margin_with_index(w: &Weight, ds: &Dataset) -> Result<(f64, usize)> {
    check_dim(ds.dim(), w.len())?;
    let norm = w.dot(w).sqrt();
    if norm == 0.0 {
        return Err(MarginError::ZeroVector("margin of the zero vector"));
    }
    let scores = ds.signed_points().dot(w);
    let (idx, min) = scores
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| {
            if v < bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    Ok((min / norm, idx))
}

fn check_unit(w_star: &Weight) -> Result<()> {
    let norm = w_star.dot(w_star).sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(MarginError::NonUnitReference { norm });
    }
    Ok(())
}

/// `P(w) = <w, w*> w*`.
pub fn project_para(w: &Weight, w_star: &Weight) -> Result<Array1<f64>> {
    check_dim(w_star.len(), w.len())?;
    check_unit(w_star)?;
    Ok(w_star * w.dot(w_star))
}

/// `P_perp(w) = w - <w, w*> w*`.
pub fn project_perp(w: &Weight, w_star: &Weight) -> Result<Array1<f64>> {
    Ok(w - &project_para(w, w_star)?)
}

/// `|w/|w| - w*|`.
pub fn directional_error(w: &Weight, w_star: &Weight) -> Result<f64> {
    check_dim(w_star.len(), w.len())?;
    check_unit(w_star)?;
    let norm = w.dot(w).sqrt();
    if norm == 0.0 {
        return Err(MarginError::ZeroVector("direction of the zero vector"));
    }
    let diff = w / norm - w_star;
    Ok(diff.dot(&diff).sqrt())
}

/// Component of `-grad L / L` along `-P_perp(w) / |P_perp(w)|`: how fast a
/// normalized step pulls `w` toward the ray spanned by `w*`.
pub fn centripetal_velocity(w: &Weight, w_star: &Weight, ds: &Dataset) -> Result<f64> {
    let perp = project_perp(w, w_star)?;
    let perp_norm = perp.dot(&perp).sqrt();
    if perp_norm < DEGENERATE_PERP {
        return Err(MarginError::Degenerate(
            "w lies on the max-margin ray; centripetal direction undefined".into(),
        ));
    }
    let g = normalized_gradient(w, ds)?;
    Ok(g.dot(&perp) / perp_norm)
}
