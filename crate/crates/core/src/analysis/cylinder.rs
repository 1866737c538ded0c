//! Monte-Carlo sampling of the centripetal velocity over a semi-infinite
//! hollow cylinder `{w in span(x_i) : D1 <= |P_perp(w)| <= D2, <w, w*> >= H}`.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{check_dim, MarginError, Result};
use crate::linalg;
use crate::margin::{self, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderSpec {
    pub d1: f64,
    pub d2: f64,
    pub h: f64,
    pub samples: usize,
    pub seed: u64,
}

impl CylinderSpec {
    pub fn validate(&self, h_max: f64) -> Result<()> {
        if !(self.d1 > 0.0 && self.d1 <= self.d2 && self.d2.is_finite()) {
            return Err(MarginError::Domain(format!(
                "need 0 < D1 <= D2, got D1 = {}, D2 = {}",
                self.d1, self.d2
            )));
        }
        if !(self.h > 0.0 && h_max > self.h && h_max.is_finite()) {
            return Err(MarginError::Domain(format!(
                "need 0 < H < h_max, got H = {}, h_max = {h_max}",
                self.h
            )));
        }
        if self.samples == 0 {
            return Err(MarginError::Domain("need at least one sample".into()));
        }
        Ok(())
    }
}

/// Draws points `h w* + D v` with `h ~ U[H, h_max]`, `D ~ U[D1, D2]` and `v`
/// uniform on the unit sphere of the orthogonal complement of `w*` inside the
/// data span. Sample `i` uses its own ChaCha8 stream, so the first `m`
/// samples of a larger draw equal an `m`-sample draw with the same seed.
#[derive(Debug, Clone)]
pub struct CylinderSampler {
    w_star: Weight,
    complement: Vec<Array1<f64>>,
    spec: CylinderSpec,
    h_max: f64,
}

impl CylinderSampler {
    pub fn new(ds: &Dataset, w_star: &Weight, spec: CylinderSpec, h_max: f64) -> Result<Self> {
        check_dim(ds.dim(), w_star.len())?;
        spec.validate(h_max)?;
        // unit-norm check shared with the projection helpers
        margin::project_para(w_star, w_star)?;
        let span = linalg::orthonormal_basis(ds.points(), linalg::RANK_TOL);
        let mut stacked = Array2::zeros((span.len() + 1, ds.dim()));
        stacked.row_mut(0).assign(w_star);
        for (i, b) in span.iter().enumerate() {
            stacked.row_mut(i + 1).assign(b);
        }
        let mut basis = linalg::orthonormal_basis(stacked.view(), linalg::RANK_TOL);
        if basis.is_empty() {
            return Err(MarginError::Degenerate("empty data span".into()));
        }
        let complement = basis.split_off(1);
        if complement.is_empty() {
            return Err(MarginError::Degenerate(
                "data span is one-dimensional; no direction orthogonal to w*".into(),
            ));
        }
        Ok(Self {
            w_star: w_star.clone(),
            complement,
            spec,
            h_max,
        })
    }

    pub fn sample(&self, index: usize) -> Weight {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(index as u64);
        let h = rng.gen_range(self.spec.h..=self.h_max);
        let d = if self.spec.d1 == self.spec.d2 {
            self.spec.d1
        } else {
            rng.gen_range(self.spec.d1..=self.spec.d2)
        };
        let v = loop {
            let mut v = Array1::zeros(self.w_star.len());
            for b in &self.complement {
                let c: f64 = rng.sample(StandardNormal);
                v.scaled_add(c, b);
            }
            // remove round-off leakage along w*
            let along = v.dot(&self.w_star);
            v.scaled_add(-along, &self.w_star);
            let n = v.dot(&v).sqrt();
            if n > 1e-12 {
                break v / n;
            }
        };
        &self.w_star * h + v * d
    }
}

#[derive(Debug, Clone)]
pub struct CylinderMin {
    pub min_phi: f64,
    pub argmin: Weight,
    pub index: usize,
}

/// Smallest sampled centripetal velocity on the cylinder. Ties go to the
/// lowest sample index, so the result does not depend on thread scheduling.
pub fn min_centripetal_on_cylinder(
    ds: &Dataset,
    w_star: &Weight,
    spec: CylinderSpec,
    h_max: f64,
) -> Result<CylinderMin> {
    let sampler = CylinderSampler::new(ds, w_star, spec, h_max)?;
    let (min_phi, index) = (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let w = sampler.sample(i);
            margin::centripetal_velocity(&w, w_star, ds).map(|phi| (phi, i))
        })
        .try_reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| Ok(if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }),
        )?;
    Ok(CylinderMin {
        min_phi,
        argmin: sampler.sample(index),
        index,
    })
}
