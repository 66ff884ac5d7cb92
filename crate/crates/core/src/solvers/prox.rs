//! Proximal operators of the ℓ1 and nuclear norms.

use nalgebra::DMatrix;

use crate::linalg;

#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Entrywise `sign(z) · max(|z| − τ, 0)`.
pub fn soft_threshold(z: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    debug_assert!(tau >= 0.0);
    z.map(|x| shrink(x, tau))
}

/// Singular value thresholding `U · max(Σ − τ, 0) · Vᵀ`.
pub fn svt(z: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    debug_assert!(tau >= 0.0);
    if z.is_empty() {
        return z.clone();
    }
    let dec = linalg::svd(z);
    let keep = dec.singular_values.iter().take_while(|&&s| s > tau).count();
    if keep == 0 {
        return DMatrix::zeros(z.nrows(), z.ncols());
    }
    let mut u = dec.u.columns(0, keep).into_owned();
    for (j, mut col) in u.column_iter_mut().enumerate() {
        col *= dec.singular_values[j] - tau;
    }
    u * dec.v_t.rows(0, keep)
}

/// Nuclear norm.
pub fn nuclear_norm(z: &DMatrix<f64>) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    linalg::svd(z).singular_values.sum()
}
