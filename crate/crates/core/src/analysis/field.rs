use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{MarginError, Result};
use crate::margin::{self, Weight};
use crate::optimizers::fmt17;

/// Rectangle in plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub w1: (f64, f64),
    pub w2: (f64, f64),
}

/// One grid point: plane coordinates, unit direction of `-grad L` within the
/// plane, and the centripetal velocity (NaN on the max-margin ray or when no
/// reference direction is known).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub w1: f64,
    pub w2: f64,
    pub dir1: f64,
    pub dir2: f64,
    pub phi: f64,
}

/// Orthonormal pair spanning the plane to sample in.
#[derive(Debug, Clone)]
pub struct Slice {
    pub u: Weight,
    pub v: Weight,
}

fn axis(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n <= 1 {
        lo
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

/// Samples `-grad L / |grad L|` on a `resolution.0 x resolution.1` grid,
/// row-major in `w2` then `w1`.
pub fn field_grid(
    ds: &Dataset,
    w_star: Option<&Weight>,
    bounds: Bounds,
    resolution: (usize, usize),
    slice: Option<&Slice>,
) -> Result<Vec<FieldPoint>> {
    let d = ds.dim();
    let (u, v) = match slice {
        Some(s) => {
            if s.u.len() != d || s.v.len() != d {
                return Err(MarginError::DimensionMismatch {
                    expected: d,
                    got: s.u.len(),
                });
            }
            (s.u.clone(), s.v.clone())
        }
        None if d == 2 => (ndarray::array![1.0, 0.0], ndarray::array![0.0, 1.0]),
        None => {
            return Err(MarginError::Domain(format!(
                "out-of-plane field: data has d = {d}; supply a 2-D slice basis"
            )))
        }
    };
    let (nx, ny) = resolution;
    if nx == 0 || ny == 0 {
        return Err(MarginError::Domain("grid resolution must be positive".into()));
    }
    (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let (j, i) = (idx / nx, idx % nx);
            let a = axis(bounds.w1.0, bounds.w1.1, nx, i);
            let b = axis(bounds.w2.0, bounds.w2.1, ny, j);
            let w = &u * a + &v * b;
            let g = margin::normalized_gradient(&w, ds)?;
            let (g1, g2) = (-g.dot(&u), -g.dot(&v));
            let len = g1.hypot(g2);
            let (dir1, dir2) = if len > 0.0 {
                (g1 / len, g2 / len)
            } else {
                (f64::NAN, f64::NAN)
            };
            let phi = match w_star {
                Some(ws) => match margin::centripetal_velocity(&w, ws, ds) {
                    Ok(p) => p,
                    Err(MarginError::Degenerate(_)) => f64::NAN,
                    Err(e) => return Err(e),
                },
                None => f64::NAN,
            };
            Ok(FieldPoint {
                w1: a,
                w2: b,
                dir1,
                dir2,
                phi,
            })
        })
        .collect()
}

/// CSV with header `w1,w2,dir1,dir2,phi`.
pub fn write_field_csv<W: Write>(points: &[FieldPoint], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "w1,w2,dir1,dir2,phi")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt17(p.w1),
            fmt17(p.w2),
            fmt17(p.dir1),
            fmt17(p.dir2),
            fmt17(p.phi)
        )?;
    }
    Ok(())
}

/// `(ln 2 / (4 s), 3 ln 2 / (4 s))`, `s = sqrt(1 - gamma^2)`: the band of
/// `w2` heights that traps NGD on the toy set.
pub fn attractor_band(gamma_star: f64) -> Result<(f64, f64)> {
    if !(gamma_star > 0.0 && gamma_star < 1.0) {
        return Err(MarginError::Domain(format!(
            "gamma_star must lie in (0, 1), got {gamma_star}"
        )));
    }
    let s = (1.0 - gamma_star * gamma_star).sqrt();
    let ln2 = std::f64::consts::LN_2;
    Ok((ln2 / (4.0 * s), 3.0 * ln2 / (4.0 * s)))
}
