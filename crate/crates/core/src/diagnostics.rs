//! Low-rankness summaries of singular-value spectra and the coherence
//! quantities that govern recovery guarantees.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::fft;
use crate::linalg::{self, numerical_rank};
use crate::signal::conv_matrix;

/// Number of histogram bins used by [`spectral_entropy`].
pub const ENTROPY_BINS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub singular_values: Vec<f64>,
    pub entropy: f64,
    pub gini: f64,
    pub numerical_rank: usize,
}

impl SpectrumSummary {
    /// Summarizes a nonzero matrix. An all-zero matrix is rejected because its
    /// Gini index is undefined.
    pub fn of(z: &DMatrix<f64>) -> Result<Self> {
        let s = singular_values(z)?;
        Ok(Self {
            entropy: entropy_of(&s),
            gini: gini_of(&s)?,
            numerical_rank: numerical_rank(&s, z.nrows(), z.ncols()),
            singular_values: s,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// `μ₁` of the transformed convolution matrix `A_k(Az)`.
    pub mu1: f64,
    /// `μ₂` of the transformed convolution matrix `A_k(Az)`.
    pub mu2: f64,
    /// `μ₁` of the untransformed convolution matrix of `z`.
    pub conv_mu1: f64,
    /// `μ₂` of the untransformed convolution matrix of `z`.
    pub conv_mu2: f64,
    pub mu_a: f64,
    pub mu_bar_a: f64,
    pub mu_tilde_a: f64,
    /// Numerical rank of `A_k(Az)`.
    pub conv_rank: usize,
}

impl CoherenceReport {
    /// Computes every coherence for signal `z` under transform `A` (`q × m`).
    /// The untransformed convolution matrix uses kernel size `min(k, m)`.
    pub fn compute(a: &DMatrix<f64>, z: &[f64], k: usize, h: usize) -> Result<Self> {
        let az = transform_signal(a, z)?;
        let conv = conv_matrix(&az, k)?;
        let (mu1, mu2) = coherence(&conv)?;
        let conv_rank = linalg::rank(&conv);
        let (conv_mu1, conv_mu2) = coherence(&conv_matrix(z, k.min(z.len()))?)?;
        let mu_a = generalized_conv_coherence(a, z, k)?;
        let (mu_bar_a, mu_tilde_a) = transform_coherences(a, h)?;
        Ok(Self { mu1, mu2, conv_mu1, conv_mu2, mu_a, mu_bar_a, mu_tilde_a, conv_rank })
    }
}

fn singular_values(z: &DMatrix<f64>) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::EmptyProblem("matrix has no entries".into()));
    }
    Ok(linalg::svd(z).singular_values.as_slice().to_vec())
}

/// Normalized entropy of the singular-value histogram (5 equal-width bins on
/// `[0, σ_max]`).
pub fn spectral_entropy(z: &DMatrix<f64>) -> Result<f64> {
    Ok(entropy_of(&singular_values(z)?))
}

/// Entropy of an arbitrary nonnegative spectrum.
pub fn entropy_of(s: &[f64]) -> f64 {
    let top = s.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 || s.is_empty() {
        return 0.0;
    }
    let mut counts = [0usize; ENTROPY_BINS];
    for &v in s {
        let b = ((ENTROPY_BINS as f64) * v / top).floor() as usize;
        counts[b.min(ENTROPY_BINS - 1)] += 1;
    }
    let n = s.len() as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h / (ENTROPY_BINS as f64).log2()
}

/// Gini index of the singular values; larger means closer to low-rank.
pub fn spectral_gini(z: &DMatrix<f64>) -> Result<f64> {
    gini_of(&singular_values(z)?)
}

/// Gini index `1 − 2 Σ_k (s_(k)/‖s‖₁)((N − k + ½)/N)` of a nonnegative vector.
pub fn gini_of(s: &[f64]) -> Result<f64> {
    let total: f64 = s.iter().map(|v| v.abs()).sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("Gini index of an all-zero spectrum".into()));
    }
    let mut sorted: Vec<f64> = s.iter().map(|v| v.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let acc: f64 = sorted.iter().enumerate().map(|(idx, v)| (v / total) * ((n - (idx + 1) as f64 + 0.5) / n)).sum();
    Ok(1.0 - 2.0 * acc)
}

/// Coherences `(μ₁, μ₂)` of a nonzero matrix at its numerical rank.
pub fn coherence(z: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (q, k) = z.shape();
    if z.is_empty() {
        return Err(Error::EmptyProblem("matrix has no entries".into()));
    }
    let dec = linalg::svd(z);
    let r = dec.rank();
    if r == 0 {
        return Err(Error::Degenerate("coherence of a zero matrix".into()));
    }
    let u = dec.u.columns(0, r);
    let vt = dec.v_t.rows(0, r);
    let mu1 = (0..q).map(|i| u.row(i).norm_squared()).fold(0.0, f64::max);
    let mu2 = (0..k).map(|j| vt.column(j).norm_squared()).fold(0.0, f64::max);
    Ok((q as f64 / r as f64 * mu1, k as f64 / r as f64 * mu2))
}

pub(crate) fn transform_signal(a: &DMatrix<f64>, z: &[f64]) -> Result<Vec<f64>> {
    check_len(a.ncols(), z.len())?;
    Ok((a * DVector::from_column_slice(z)).as_slice().to_vec())
}

/// First generalized convolution coherence
/// `μ_A(z) = (q/r) max_{i,j} ‖Uᵀ T^j A e_i‖²` with `U` the left singular
/// vectors of `A_k(Az)` and `j < k`.
///
/// The inner products over all shifts are cross-correlations, evaluated with
/// FFTs.
pub fn generalized_conv_coherence(a: &DMatrix<f64>, z: &[f64], k: usize) -> Result<f64> {
    let (q, m) = a.shape();
    let az = transform_signal(a, z)?;
    let conv = conv_matrix(&az, k)?;
    let dec = linalg::svd(&conv);
    let r = dec.rank();
    if r == 0 {
        return Err(Error::Degenerate("generalized coherence of a zero signal".into()));
    }
    let u_spec: Vec<Vec<Complex64>> = (0..r).map(|c| fft::forward(dec.u.column(c).as_slice())).collect();
    let mut best: f64 = 0.0;
    let mut buf = vec![Complex64::new(0.0, 0.0); q];
    let mut energy = vec![0.0; q];
    for i in 0..m {
        let a_spec = fft::forward(a.column(i).as_slice());
        energy.iter_mut().for_each(|e| *e = 0.0);
        for us in &u_spec {
            // (Σ_t u[t] a[t − j])_j = IDFT(DFT(u) · conj(DFT(a)))
            for ((b, &x), &y) in buf.iter_mut().zip(us).zip(&a_spec) {
                *b = x * y.conj();
            }
            fft::inverse_in_place(&mut buf);
            for (e, c) in energy.iter_mut().zip(&buf) {
                *e += c.re * c.re;
            }
        }
        best = energy[..k].iter().cloned().fold(best, f64::max);
    }
    Ok(q as f64 / r as f64 * best)
}

/// Transformation coherences `(μ̄(A), μ̃(A))`.
pub fn transform_coherences(a: &DMatrix<f64>, h: usize) -> Result<(f64, f64)> {
    let (q, m) = a.shape();
    if h == 0 || h > m {
        return Err(invalid(format!("horizon {h} outside [1, {m}]")));
    }
    let max_sq = a.iter().map(|v| v * v).fold(0.0, f64::max);
    let tail = a.columns(m - h, h);
    let row_max = (0..q).map(|i| tail.row(i).norm_squared()).fold(0.0, f64::max);
    Ok((q as f64 * max_sq, q as f64 / h as f64 * row_max))
}
