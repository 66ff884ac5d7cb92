//! Convex and nonconvex optimization routines: PCP, CPCP, the orthonormal
//! ℓ1 fit and the LbCNNM completion program.

mod lbcnnm;
mod pcp;
mod procrustes;
pub mod prox;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use lbcnnm::{lbcnnm_solve, lbcnnm_solve_direct, lbcnnm_solve_fft, LbcnnmSolution, DEFAULT_LAMBDA};
pub use pcp::{cpcp, cpcp_with, default_pcp_lambda, pcp, pcp_with};
pub use procrustes::{orthonormal_fit_l1, orthonormal_fit_l2};
pub use prox::{nuclear_norm, soft_threshold, svt};

/// Penalty schedule and stopping rule shared by the ADMM solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Initial penalty. The LbCNNM solver reads it relative to the spectral
    /// scale of the observed data; the other solvers use it as is.
    pub rho_init: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    /// Relative primal residual at which iteration stops.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { rho_init: 1e-2, rho_growth: 1.1, rho_max: 1e10, tol: 1e-7, max_iters: 500 }
    }
}

impl AdmmConfig {
    /// Default schedule with `ρ₀ = 1/‖Y‖₂`, the usual choice for PCP.
    pub fn scaled_to(y: &DMatrix<f64>) -> Self {
        let norm = crate::linalg::spectral_norm(y);
        let base = Self::default();
        if norm > 0.0 {
            Self { rho_init: 1.0 / norm, ..base }
        } else {
            base
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_init > 0.0 && self.rho_init.is_finite()) {
            return Err(invalid("rho_init must be positive and finite"));
        }
        if self.rho_growth.is_nan() || self.rho_growth < 1.0 {
            return Err(invalid("rho_growth must be at least 1"));
        }
        if self.rho_max.is_nan() || self.rho_max <= 0.0 {
            return Err(invalid("rho_max must be positive"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(invalid("tol must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn next_rho(&self, rho: f64) -> f64 {
        (rho * self.rho_growth).min(self.rho_max)
    }
}

/// Low-rank plus sparse decomposition returned by [`pcp`] and [`cpcp`].
#[derive(Debug, Clone)]
pub struct PcpResult {
    pub l: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final relative constraint violation.
    pub residual: f64,
}
