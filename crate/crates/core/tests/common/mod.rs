//! Separable datasets with a max-margin solution known by construction.
//!
//! Support vectors are `z_i = gamma w* + v_i` with `v_i` orthogonal to `w*`
//! and `sum_i lambda_i v_i = 0` for positive `lambda`, so
//! `w* = sum_i lambda_i z_i / (gamma sum_i lambda_i)` satisfies the KKT
//! conditions. Every other point has `<w*, z> >= gamma + gap`.

#![allow(dead_code)]

use margin_maxer::{Dataset, Weight};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct KnownCase {
    pub ds: Dataset,
    pub w_star: Weight,
    pub gamma_star: f64,
    /// `min <w*, z_i>` over non-support points; infinite when every point is
    /// a support vector.
    pub gamma_sub: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CaseParams {
    pub dim: usize,
    pub gamma: f64,
    pub gap: f64,
    pub extra: usize,
    pub seed: u64,
}

pub fn case_params() -> impl Strategy<Value = CaseParams> {
    (2usize..=4, 0.05f64..0.5, 0.05f64..0.3, 0usize..=6, any::<u64>()).prop_map(
        |(dim, gamma, gap, extra, seed)| CaseParams {
            dim,
            gamma,
            gap,
            extra,
            seed,
        },
    )
}

pub fn known_case() -> impl Strategy<Value = KnownCase> {
    case_params().prop_map(|p| build_case(p))
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Array1<f64> {
    Array1::from_shape_fn(d, |_| {
        // Box-Muller; 1 - u keeps the log argument positive
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    })
}

fn orthogonal_to(rng: &mut ChaCha8Rng, w: &Array1<f64>) -> Array1<f64> {
    loop {
        let mut v = gaussian(rng, w.len());
        let a = v.dot(w);
        v.scaled_add(-a, w);
        let n = v.dot(&v).sqrt();
        if n > 1e-6 {
            return v / n;
        }
    }
}

pub fn build_case(p: CaseParams) -> KnownCase {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let w_star = {
        let g = gaussian(&mut rng, p.dim);
        let n = g.dot(&g).sqrt();
        g / n
    };
    let s = (1.0 - p.gamma * p.gamma).sqrt();
    let k = rng.gen_range(1..=p.dim);
    let lambdas: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let mut vs: Vec<Array1<f64>> = (0..k.saturating_sub(1))
        .map(|_| orthogonal_to(&mut rng, &w_star) * rng.gen_range(0.1..1.0))
        .collect();
    if k > 1 {
        let mut last = Array1::zeros(p.dim);
        for (v, l) in vs.iter().zip(&lambdas) {
            last.scaled_add(-l / lambdas[k - 1], v);
        }
        vs.push(last);
    } else {
        vs.push(Array1::zeros(p.dim));
    }
    let longest = vs.iter().map(|v| v.dot(v).sqrt()).fold(0.0, f64::max);
    let shrink = if longest > 0.0 {
        rng.gen_range(0.1..=1.0) * s / longest
    } else {
        0.0
    };
    let mut zs: Vec<Array1<f64>> = vs.iter().map(|v| &w_star * p.gamma + v * shrink).collect();
    let mut gamma_sub = f64::INFINITY;
    for _ in 0..p.extra {
        let m = rng.gen_range(p.gamma + p.gap..0.95);
        gamma_sub = gamma_sub.min(m);
        let u = orthogonal_to(&mut rng, &w_star) * (rng.gen_range(0.0..1.0) * (1.0 - m * m).sqrt());
        zs.push(&w_star * m + u);
    }
    let n = zs.len();
    let mut points = Array2::zeros((n, p.dim));
    let mut labels = Vec::with_capacity(n);
    for (i, z) in zs.iter().enumerate() {
        let y: i8 = if rng.gen::<bool>() { 1 } else { -1 };
        // keep every norm at or below 1 despite rounding
        let norm = z.dot(z).sqrt();
        let z = if norm > 1.0 { z / norm } else { z.clone() };
        points.row_mut(i).assign(&(z * f64::from(y)));
        labels.push(y);
    }
    KnownCase {
        ds: Dataset::new(points, labels).expect("constructed points lie in the unit ball"),
        w_star,
        gamma_star: p.gamma,
        gamma_sub,
    }
}

/// Random weight with norm in `[0, max_norm]` (possibly zero-free).
pub fn random_weight(seed: u64, dim: usize, max_norm: f64) -> Weight {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian(&mut rng, dim);
    let n = g.dot(&g).sqrt();
    g * (rng.gen_range(1e-3..=1.0) * max_norm / n)
}

/// Weight whose direction lies within `radius` of `w_star`.
pub fn weight_near(seed: u64, w_star: &Weight, radius: f64) -> Weight {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian(&mut rng, w_star.len());
    let n = g.dot(&g).sqrt();
    // |delta| <= 0.9 radius keeps the normalized direction within radius
    let delta = g * (rng.gen_range(0.0..=0.9) * radius / n);
    (w_star + &delta) * rng.gen_range(0.5..50.0)
}

/// Naive `sum e^{-<w,z_i>} (-z_i) / sum e^{-<w,z_i>}` without any shift.
pub fn naive_normalized_gradient(w: &Weight, ds: &Dataset) -> Array1<f64> {
    let z = ds.signed_points();
    let mut num = Array1::zeros(ds.dim());
    let mut den = 0.0;
    for row in z.rows() {
        let e = (-row.dot(w)).exp();
        num.scaled_add(-e, &row);
        den += e;
    }
    num / den
}
