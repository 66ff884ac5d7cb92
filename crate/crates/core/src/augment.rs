//! Training matrices for the transform: the generation matrix `G0` plus
//! pseudo-samples from simple forecasters (`Gs` lines, `Gc` CNNM shifts,
//! `Ge` exponential smoothing) and the rule that combines them.
//!
//! Timeline positions are 1-based: the training sequence occupies `1..=l` and
//! every pseudo-sample covers the target window `l+h−m+1 ..= l+h`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::spectral_gini;
use crate::error::{invalid, Result};
use crate::signal::{circular_shift, TargetVector};
use crate::solvers::{lbcnnm_solve, AdmmConfig, DEFAULT_LAMBDA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceTag {
    G0,
    Gs,
    Gc,
    Ge,
}

/// Training matrix with the origin of every column.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataMatrix {
    pub columns: DMatrix<f64>,
    pub sources: Vec<SourceTag>,
}

/// Column counts per source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BlockCounts {
    pub n0: usize,
    pub ns: usize,
    pub nc: usize,
    pub ne: usize,
}

impl AugmentedDataMatrix {
    /// Concatenates blocks horizontally in the given order.
    pub fn concat(blocks: &[(SourceTag, &DMatrix<f64>)]) -> Result<Self> {
        let rows = blocks.iter().map(|(_, b)| b.nrows()).max().ok_or_else(|| invalid("no blocks to concatenate"))?;
        let total: usize = blocks.iter().map(|(_, b)| b.ncols()).sum();
        let mut columns = DMatrix::zeros(rows, total);
        let mut sources = Vec::with_capacity(total);
        let mut at = 0;
        for (tag, b) in blocks {
            if b.ncols() == 0 {
                continue;
            }
            if b.nrows() != rows {
                return Err(crate::Error::DimensionMismatch { expected: rows, actual: b.nrows() });
            }
            columns.columns_mut(at, b.ncols()).copy_from(*b);
            sources.extend(std::iter::repeat_n(*tag, b.ncols()));
            at += b.ncols();
        }
        Ok(Self { columns, sources })
    }

    pub fn counts(&self) -> BlockCounts {
        let mut c = BlockCounts::default();
        for s in &self.sources {
            match s {
                SourceTag::G0 => c.n0 += 1,
                SourceTag::Gs => c.ns += 1,
                SourceTag::Gc => c.nc += 1,
                SourceTag::Ge => c.ne += 1,
            }
        }
        c
    }
}

/// Sliding windows of length `m` with stride 1, one per column.
pub fn generation_matrix(y: &[f64], m: usize) -> Result<DMatrix<f64>> {
    let l = y.len();
    if m == 0 || m > l {
        return Err(invalid(format!("model size {m} outside [1, {l}]")));
    }
    Ok(DMatrix::from_fn(m, l - m + 1, |i, j| y[i + j]))
}

/// Stacks equal-length samples as columns of an `m × n` matrix.
pub fn samples_to_matrix(m: usize, samples: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(m, samples.len(), |i, j| samples[j][i])
}

fn ratio(l: usize, h: usize) -> f64 {
    l as f64 / h as f64
}

/// Window `w_s = round((2.75 + 0.25 tanh(10(l/h − 5.5))) h)`, at least 3 and
/// at most `l`.
pub fn window_size(l: usize, h: usize) -> usize {
    let r = ratio(l, h);
    let w = ((2.75 + 0.25 * (10.0 * (r - 5.5)).tanh()) * h as f64).round() as usize;
    w.max(3).min(l)
}

/// Horizontal line at the mean of the last `h` observations.
pub fn avg_sample(y: &[f64], h: usize, m: usize) -> Vec<f64> {
    let l = y.len();
    let h = h.min(l).max(1);
    let mean = y[l - h..].iter().sum::<f64>() / h as f64;
    vec![mean; m]
}

/// Line `ŷ_l + slope·(p − l)` sampled at the target window positions.
fn line_sample(y_l: f64, slope: f64, h: usize, m: usize) -> Vec<f64> {
    (1..=m).map(|i| y_l + slope * (h as f64 - m as f64 + i as f64)).collect()
}

/// Line through the `j`-th (1-based) and last observations.
pub fn drift_sample(y: &[f64], j: usize, h: usize, m: usize) -> Vec<f64> {
    let l = y.len();
    let slope = if j < l { (y[l - 1] - y[j - 1]) / (l - j) as f64 } else { 0.0 };
    line_sample(y[l - 1], slope, h, m)
}

/// Least-squares line over the last `j` observations.
pub fn lsr_sample(y: &[f64], j: usize, h: usize, m: usize) -> Vec<f64> {
    let l = y.len();
    let pts = &y[l - j..];
    // abscissa measured from the last observation
    let xs: Vec<f64> = (0..j).map(|t| t as f64 - (j - 1) as f64).collect();
    let xm = xs.iter().sum::<f64>() / j as f64;
    let ym = pts.iter().sum::<f64>() / j as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(pts).map(|(x, v)| (x - xm) * (v - ym)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let at_l = ym - slope * xm;
    line_sample(at_l, slope, h, m)
}

/// Drift lines for `j ∈ [l − w_s + 1, l − 1]` followed by LSR lines over the
/// last `j ∈ [3, w_s]` observations.
pub fn line_samples(y: &[f64], h: usize, m: usize) -> Vec<Vec<f64>> {
    let l = y.len();
    let ws = window_size(l, h);
    let mut out = Vec::with_capacity(2 * ws);
    for j in (l + 1 - ws)..l {
        out.push(drift_sample(y, j, h, m));
    }
    for j in 3..=ws {
        out.push(lsr_sample(y, j, h, m));
    }
    out
}

/// Normalized ℓ1 misfit of a pseudo-sample against the last `h`
/// observations, over the positions the window shares with them.
pub fn fit_error(sample: &[f64], y: &[f64], h: usize) -> f64 {
    let l = y.len();
    let m = sample.len();
    let start = l as i64 + h as i64 - m as i64 + 1;
    let mut num = 0.0;
    let mut den = 0.0;
    for p in (l + 1 - h.min(l))..=l {
        let idx = p as i64 - start;
        if idx < 0 || idx >= m as i64 {
            continue;
        }
        num += (sample[idx as usize] - y[p - 1]).abs();
        den += y[p - 1].abs();
    }
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Which threshold of [`PseudoSampleFilter`] to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdMode {
    ETh,
    E0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoSampleFilter {
    pub e_th: f64,
    pub e_0: f64,
    pub e_max: f64,
    pub f_th: f64,
}

impl PseudoSampleFilter {
    /// Thresholds for a training sequence `y`, horizon `h`, window size `m`
    /// and spectral frequency `f_hat`.
    pub fn new(y: &[f64], h: usize, m: usize, f_hat: f64) -> Self {
        let l = y.len();
        let e_avg = fit_error(&avg_sample(y, h, m), y, h);
        let first = l + 1 - h.min(l);
        let e_drift = fit_error(&drift_sample(y, first, h, m), y, h);
        let e_0 = e_avg.max(e_drift);
        Self::from_parts(ratio(l, h), f_hat, e_0)
    }

    /// Thresholds from `l/h`, `f̂` and a given `e_0`.
    pub fn from_parts(r: f64, f_hat: f64, e_0: f64) -> Self {
        let f_th = 3.75 + 1.25 * (r - 5.0).tanh() - 2.5 + 2.5 * (16.0 - r).tanh();
        let e_max = 0.325 + 0.025 * (10.0 * (3.0 - r)).tanh() + 0.05 * (f_th - f_hat).tanh();
        let e_th = (2.0 * e_max - e_0).min(e_0);
        Self { e_th, e_0, e_max, f_th }
    }

    pub fn threshold(&self, mode: ThresholdMode) -> f64 {
        match mode {
            ThresholdMode::ETh => self.e_th,
            ThresholdMode::E0 => self.e_0,
        }
    }
}

/// Drops samples whose [`fit_error`] exceeds `threshold`; if none survive,
/// keeps the single best one.
pub fn filter_by_fit(samples: Vec<Vec<f64>>, y: &[f64], h: usize, threshold: f64) -> Vec<Vec<f64>> {
    let errors: Vec<f64> = samples.iter().map(|s| fit_error(s, y, h)).collect();
    if errors.iter().any(|&e| e <= threshold) {
        return samples.into_iter().zip(&errors).filter(|(_, &e)| e <= threshold).map(|(s, _)| s).collect();
    }
    let best = errors.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i);
    match best {
        Some(i) => samples.into_iter().nth(i).into_iter().collect(),
        None => Vec::new(),
    }
}

/// Filtered `Gs` candidates: the average line, then Drift and LSR lines.
pub fn gs_samples(y: &[f64], h: usize, m: usize, filter: &PseudoSampleFilter) -> Vec<Vec<f64>> {
    let mut all = vec![avg_sample(y, h, m)];
    all.extend(line_samples(y, h, m));
    filter_by_fit(all, y, h, filter.e_th)
}

/// CNNM estimate of the target window: `A = I`, `k = round(m/2)`, `λ = 1000`.
pub fn cnnm_forecast(y: &[f64], h: usize, m: usize, cfg: &AdmmConfig) -> Result<Vec<f64>> {
    let target = TargetVector::forecast_window(y, m, h)?;
    let k = ((m as f64) * 0.5).round().max(1.0) as usize;
    let eye = DMatrix::identity(m, m);
    Ok(lbcnnm_solve(&target.values, &target.mask, &eye, k, DEFAULT_LAMBDA, cfg)?.x)
}

/// All `m` circular shifts of a CNNM estimate, in shift order.
pub fn shifted_samples(estimate: &[f64]) -> Vec<Vec<f64>> {
    (0..estimate.len()).map(|s| circular_shift(estimate, s as isize)).collect()
}

/// Filtered `Gc` candidates.
pub fn cnnm_samples(y: &[f64], h: usize, m: usize, filter: &PseudoSampleFilter) -> Result<Vec<Vec<f64>>> {
    let est = cnnm_forecast(y, h, m, &AdmmConfig::default())?;
    Ok(filter_by_fit(shifted_samples(&est), y, h, filter.e_0))
}

/// Smoothing constants for a spectral frequency.
pub fn exps_alphas(f_hat: f64) -> Vec<f64> {
    let grid = |from: u32| (from..=20).map(|i| i as f64 * 0.05).collect::<Vec<_>>();
    if f_hat > 10.0 {
        vec![0.05]
    } else if f_hat > 5.0 {
        vec![0.05, 0.1]
    } else if f_hat > 2.5 {
        grid(10)
    } else if f_hat > 1.25 {
        grid(14)
    } else {
        grid(18)
    }
}

/// Simple exponential smoothing `s_1 = y_1`, `s_t = α y_t + (1 − α) s_{t−1}`.
pub fn exp_smooth(y: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut s = match y.first() {
        Some(&v) => v,
        None => return out,
    };
    out.push(s);
    for &v in &y[1..] {
        s = alpha * v + (1.0 - alpha) * s;
        out.push(s);
    }
    out
}

/// Smoothed values at observed window positions, `s_l` at the future ones.
pub fn exps_sample(y: &[f64], h: usize, m: usize, alpha: f64) -> Vec<f64> {
    let l = y.len();
    let s = exp_smooth(y, alpha);
    let last = s[l - 1];
    let start = l as i64 + h as i64 - m as i64 + 1;
    (0..m as i64)
        .map(|i| {
            let p = start + i;
            if p >= 1 && p <= l as i64 {
                s[(p - 1) as usize]
            } else {
                last
            }
        })
        .collect()
}

/// One `Ge` sample per smoothing constant of [`exps_alphas`].
pub fn exps_samples(y: &[f64], h: usize, m: usize, f_hat: f64) -> Vec<Vec<f64>> {
    exps_alphas(f_hat).into_iter().map(|a| exps_sample(y, h, m, a)).collect()
}

/// Gini threshold above which `Gc` is left out of the combination.
pub fn gini_threshold(l: usize, h: usize, f_hat: f64) -> f64 {
    let r = ratio(l, h);
    let f_th = 6.25 + 1.25 * (r - 4.0).tanh() + 2.5 * (r - 12.0).tanh();
    0.8 + 0.05 * (12.0 - r).tanh()
        + 0.1 * (5.0 * (4.0 - r)).tanh()
        + (0.1 + 0.1 * (r - 12.0).tanh()) * (f_th - f_hat).tanh()
}

/// `[G0, Gs, Ge]` when `SpGini(G0)` exceeds the threshold, otherwise
/// `[G0, Gc, Gs, Ge]`.
pub fn combine(
    g0: &DMatrix<f64>,
    gc: &DMatrix<f64>,
    gs: &DMatrix<f64>,
    ge: &DMatrix<f64>,
    l: usize,
    h: usize,
    f_hat: f64,
) -> Result<AugmentedDataMatrix> {
    // a zero generation matrix has rank zero, the most low-rank case
    let gini = spectral_gini(g0).unwrap_or(1.0);
    if gini > gini_threshold(l, h, f_hat) {
        AugmentedDataMatrix::concat(&[(SourceTag::G0, g0), (SourceTag::Gs, gs), (SourceTag::Ge, ge)])
    } else {
        AugmentedDataMatrix::concat(&[
            (SourceTag::G0, g0),
            (SourceTag::Gc, gc),
            (SourceTag::Gs, gs),
            (SourceTag::Ge, ge),
        ])
    }
}

/// Every block for one series, before combination.
#[derive(Debug, Clone)]
pub struct Blocks {
    pub g0: DMatrix<f64>,
    pub gs: DMatrix<f64>,
    pub gc: DMatrix<f64>,
    pub ge: DMatrix<f64>,
}

impl Blocks {
    pub fn build(y: &[f64], h: usize, m: usize, f_hat: f64) -> Result<Self> {
        let filter = PseudoSampleFilter::new(y, h, m, f_hat);
        let g0 = generation_matrix(y, m)?;
        let gs = samples_to_matrix(m, &gs_samples(y, h, m, &filter));
        let gc = match cnnm_samples(y, h, m, &filter) {
            Ok(s) => samples_to_matrix(m, &s),
            Err(e) => {
                log::warn!("CNNM pseudo-samples unavailable: {e}");
                DMatrix::zeros(m, 0)
            }
        };
        let ge = samples_to_matrix(m, &exps_samples(y, h, m, f_hat));
        Ok(Self { g0, gs, gc, ge })
    }

    pub fn combine(&self, l: usize, h: usize, f_hat: f64) -> Result<AugmentedDataMatrix> {
        combine(&self.g0, &self.gc, &self.gs, &self.ge, l, h, f_hat)
    }
}
