//! Small dense helpers: orthonormal bases, numerical rank, span residuals.

use ndarray::{Array1, ArrayView1, ArrayView2};

/// Relative tolerance under which a Gram–Schmidt residual counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of the row span of `rows`, by modified Gram–Schmidt
/// with one reorthogonalization pass.
pub fn orthonormal_basis(rows: ArrayView2<'_, f64>, tol: f64) -> Vec<Array1<f64>> {
    let scale = rows
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0_f64, f64::max);
    let mut basis: Vec<Array1<f64>> = Vec::new();
    if scale == 0.0 {
        return basis;
    }
    for row in rows.rows() {
        let mut v = row.to_owned();
        for _ in 0..2 {
            for b in &basis {
                let c = v.dot(b);
                v.scaled_add(-c, b);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > tol * scale {
            basis.push(v / norm);
        }
    }
    basis
}

/// Numerical rank of the row set.
pub fn rank(rows: ArrayView2<'_, f64>) -> usize {
    orthonormal_basis(rows, RANK_TOL).len()
}

/// Norm of the component of `w` outside the span of an orthonormal basis.
pub fn span_residual(w: ArrayView1<'_, f64>, basis: &[Array1<f64>]) -> f64 {
    let mut r = w.to_owned();
    for b in basis {
        let c = r.dot(b);
        r.scaled_add(-c, b);
    }
    r.dot(&r).sqrt()
}

pub fn norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}
