//! Orthonormal fits `min ‖BY − E‖` over `BᵀB = I`.

use nalgebra::DMatrix;

use super::prox::soft_threshold;
use super::AdmmConfig;
use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{l1_norm, polar_factor};

fn check_shapes(y: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<()> {
    if y.ncols() == 0 {
        return Err(Error::EmptyProblem("training matrix has no columns".into()));
    }
    check_len(y.ncols(), e.ncols())?;
    if e.nrows() < y.nrows() {
        return Err(invalid(format!(
            "target has {} rows, fewer than the {} needed for an orthonormal fit",
            e.nrows(),
            y.nrows()
        )));
    }
    Ok(())
}

/// Closed-form Frobenius fit: the polar factor of `E Yᵀ`.
pub fn orthonormal_fit_l2(y: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_shapes(y, e)?;
    Ok(polar_factor(&(e * y.transpose())))
}

/// ADMM for `min ‖BY − E‖₁ s.t. BᵀB = I` with the splitting `Z = BY − E`.
///
/// Starting from `Z = W = 0`, the first `B` equals [`orthonormal_fit_l2`].
pub fn orthonormal_fit_l1(y: &DMatrix<f64>, e: &DMatrix<f64>, cfg: &AdmmConfig) -> Result<DMatrix<f64>> {
    check_shapes(y, e)?;
    cfg.validate()?;
    let yt = y.transpose();
    let e_scale = e.norm().max(f64::MIN_POSITIVE);
    let mut z = DMatrix::zeros(e.nrows(), e.ncols());
    let mut w = DMatrix::zeros(e.nrows(), e.ncols());
    let mut rho = cfg.rho_init;
    let mut b = DMatrix::zeros(e.nrows(), y.nrows());
    for iter in 1..=cfg.max_iters {
        let target = e + &z - &w / rho;
        b = polar_factor(&(target * &yt));
        let by_e = &b * y - e;
        z = soft_threshold(&(&by_e + &w / rho), 1.0 / rho);
        let gap = by_e - &z;
        w += &gap * rho;
        rho = cfg.next_rho(rho);
        if gap.norm() / e_scale <= cfg.tol {
            log::debug!("l1 orthonormal fit converged after {iter} iterations");
            return Ok(b);
        }
    }
    log::debug!("l1 orthonormal fit hit {} iterations, objective {:.4e}", cfg.max_iters, l1_norm(&(&b * y - e)));
    Ok(b)
}
