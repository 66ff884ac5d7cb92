//! Principal component pursuit by the inexact augmented Lagrange multiplier
//! method, and its partially observed variant.

use nalgebra::DMatrix;

use super::prox::{soft_threshold, svt};
use super::{AdmmConfig, PcpResult};
use crate::error::{check_len, Error, Result};

/// `1/√max(m, n)`.
pub fn default_pcp_lambda(rows: usize, cols: usize) -> f64 {
    1.0 / (rows.max(cols).max(1) as f64).sqrt()
}

/// Solves `min ‖L‖_* + λ‖S‖₁ s.t. Y = L + S` with the default schedule.
pub fn pcp(y: &DMatrix<f64>, lambda: f64) -> Result<PcpResult> {
    pcp_with(y, lambda, &AdmmConfig::scaled_to(y))
}

pub fn pcp_with(y: &DMatrix<f64>, lambda: f64, cfg: &AdmmConfig) -> Result<PcpResult> {
    let observed = DMatrix::from_element(y.nrows(), y.ncols(), true);
    solve(y, &observed, lambda, cfg)
}

/// Solves `min ‖L‖_* + λ‖S‖₁ s.t. P_Ω(Y − L − S) = 0`. Entries of `Y` outside
/// `observed` are ignored; `L + S` is the completed matrix.
pub fn cpcp(y: &DMatrix<f64>, observed: &DMatrix<bool>, lambda: f64) -> Result<PcpResult> {
    let masked = y.zip_map(observed, |v, o| if o { v } else { 0.0 });
    cpcp_with(y, observed, lambda, &AdmmConfig::scaled_to(&masked))
}

pub fn cpcp_with(y: &DMatrix<f64>, observed: &DMatrix<bool>, lambda: f64, cfg: &AdmmConfig) -> Result<PcpResult> {
    check_len(y.nrows(), observed.nrows())?;
    check_len(y.ncols(), observed.ncols())?;
    if !observed.iter().any(|&o| o) {
        return Err(Error::EmptyProblem("no observed entries".into()));
    }
    solve(y, observed, lambda, cfg)
}

fn solve(y: &DMatrix<f64>, observed: &DMatrix<bool>, lambda: f64, cfg: &AdmmConfig) -> Result<PcpResult> {
    cfg.validate()?;
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(crate::error::invalid("PCP weight must be positive"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(crate::error::invalid("PCP input must be finite"));
    }
    let (m, n) = y.shape();
    let full = observed.iter().all(|&o| o);
    let y = y.zip_map(observed, |v, o| if o { v } else { 0.0 });
    let y_norm = y.norm();
    if y_norm == 0.0 {
        return Ok(PcpResult {
            l: DMatrix::zeros(m, n),
            s: DMatrix::zeros(m, n),
            iterations: 0,
            converged: true,
            residual: 0.0,
        });
    }

    let mut s = DMatrix::zeros(m, n);
    // free fill-in on unobserved entries
    let mut e = DMatrix::zeros(m, n);
    let mut w = DMatrix::zeros(m, n);
    let mut mu = cfg.rho_init;
    let mut best: Option<(f64, DMatrix<f64>, DMatrix<f64>)> = None;

    for iter in 1..=cfg.max_iters {
        let l = svt(&(&y - &s - &e + &w / mu), 1.0 / mu);
        s = soft_threshold(&(&y - &l - &e + &w / mu), lambda / mu);
        if !full {
            s.zip_apply(observed, |v, o| {
                if !o {
                    *v = 0.0
                }
            });
            e = (&y - &l - &s + &w / mu).zip_map(observed, |v, o| if o { 0.0 } else { v });
        }
        let gap = &y - &l - &s - &e;
        let residual = gap.norm() / y_norm;
        w += &gap * mu;
        mu = cfg.next_rho(mu);
        if residual <= cfg.tol {
            log::debug!("pcp converged after {iter} iterations");
            return Ok(PcpResult { l, s, iterations: iter, converged: true, residual });
        }
        if best.as_ref().is_none_or(|b| residual < b.0) {
            best = Some((residual, l.clone(), s.clone()));
        }
    }
    let (residual, l, s) = best.expect("at least one iteration");
    log::warn!("pcp stopped at {} iterations with residual {residual:.3e}", cfg.max_iters);
    Ok(PcpResult { l, s, iterations: cfg.max_iters, converged: false, residual })
}
