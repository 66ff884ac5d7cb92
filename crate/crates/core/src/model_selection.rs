//! Spectral frequency and model-size estimation by regularized empirical
//! risk minimization with rolling-origin validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::generation_matrix;
use crate::diagnostics::spectral_entropy;
use crate::error::{invalid, Result};
use crate::fft;
use crate::metrics::smape;
use crate::signal::TargetVector;
use crate::solvers::{lbcnnm_solve, AdmmConfig, DEFAULT_LAMBDA};
use crate::transform::learn_pca;

/// Score of one candidate model size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub m: usize,
    /// Mean validation sMAPE; infinite when no fold could be evaluated.
    pub ege: f64,
    pub spent: f64,
    pub sdr: f64,
}

impl CandidateScore {
    pub fn objective(&self, gamma: f64) -> f64 {
        self.ege + gamma * self.spent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSizeSearch {
    pub candidates: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub b_folds: usize,
    pub f_hat: f64,
    pub chosen_m: usize,
    pub per_candidate_scores: Vec<CandidateScore>,
}

/// Frequency (cycles per sequence) of the largest non-DC periodogram bin of
/// the mean-removed series; `0` for a constant series.
pub fn spectral_frequency(y: &[f64]) -> f64 {
    let l = y.len();
    if l < 2 {
        return 0.0;
    }
    let mean = y.iter().sum::<f64>() / l as f64;
    let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if centered.iter().all(|v| v.abs() <= 1e-12 * scale) {
        return 0.0;
    }
    let spec = fft::forward(&centered);
    let mut best = (0usize, 0.0f64);
    for (f, c) in spec.iter().enumerate().take(l / 2 + 1).skip(1) {
        let p = c.norm_sqr();
        if p > best.1 {
            best = (f, p);
        }
    }
    best.0 as f64
}

/// Sample-to-dimension ratio `(l − m + 1)/m`.
pub fn sdr(m: usize, l: usize) -> f64 {
    (l as f64 - m as f64 + 1.0) / m as f64
}

/// Entropy regularization weight.
pub fn gamma(f_hat: f64) -> f64 {
    if f_hat > 5.0 {
        0.4
    } else {
        0.0
    }
}

/// Lower bound on the sample-to-dimension ratio.
pub fn tau(l: usize, h: usize, f_hat: f64) -> f64 {
    let r = l as f64 / h as f64;
    if l > 13 * h {
        4.0 + (r - 25.0).tanh() + (5.0 - f_hat).tanh()
    } else if l > 5 * h {
        let t = (r - 8.5).tanh();
        l as f64 / (h as f64 * (5.5 + t + 0.5 * (f_hat - 4.0 - t).tanh() + 0.3 * (4.0 + t - f_hat).tanh()))
    } else {
        0.7 + 0.05 * (r - 3.8).tanh() - 0.15 * (1.0 + (3.3 - r).tanh())
            + (0.2 + 0.05 * (r - 3.8).tanh()) * (2.5 - f_hat).tanh()
    }
}

/// Number of validation folds, `round(7.5 + 2.5 tanh(l/h − 10))`, at least 2.
pub fn b_folds(l: usize, h: usize) -> usize {
    let r = l as f64 / h as f64;
    ((7.5 + 2.5 * (r - 10.0).tanh()).round() as usize).max(2)
}

/// Candidate sizes in `[2h, 10h]` with step `⌈h/2⌉`, limited to sizes that
/// leave at least one validation fold (`m ≤ l − h`, and `m ≤ l − 1`).
pub fn candidate_grid(l: usize, h: usize) -> Vec<usize> {
    let step = h.div_ceil(2).max(1);
    let upper = (10 * h).min(l.saturating_sub(h)).min(l.saturating_sub(1));
    (2 * h..=upper).step_by(step).collect()
}

/// End positions (1-based, inclusive) of the held-out blocks for size `m`.
///
/// Fold `j` holds out the `h` values ending at `l − (b − j)h`. When the
/// earliest of those leaves a training prefix shorter than `m`, the origins
/// are spread evenly between the first feasible origin and `l` instead,
/// overlapping as needed.
pub fn fold_origins(l: usize, h: usize, m: usize, b: usize) -> Vec<usize> {
    let min_origin = m + h;
    if min_origin > l {
        return Vec::new();
    }
    let standard: Vec<usize> = (1..=b).map(|j| l.saturating_sub((b - j) * h)).collect();
    if standard[0] >= min_origin {
        return standard;
    }
    let span = (l - min_origin) as f64;
    let mut origins: Vec<usize> = (0..b)
        .map(|j| {
            let frac = if b > 1 { j as f64 / (b - 1) as f64 } else { 1.0 };
            min_origin + (span * frac).round() as usize
        })
        .collect();
    origins.dedup();
    origins
}

/// PCA-transform forecast with `k = q` used during model-size validation.
pub fn validation_forecast(history: &[f64], m: usize, h: usize) -> Result<Vec<f64>> {
    let g0 = generation_matrix(history, m)?;
    let model = learn_pca(&g0)?;
    let target = TargetVector::forecast_window(history, m, h)?;
    let sol =
        lbcnnm_solve(&target.values, &target.mask, model.matrix(), model.q(), DEFAULT_LAMBDA, &AdmmConfig::default())?;
    Ok(sol.x[m - h..].to_vec())
}

fn score_candidate(y: &[f64], h: usize, m: usize, b: usize) -> CandidateScore {
    let l = y.len();
    let origins = fold_origins(l, h, m, b);
    let errors: Vec<f64> = origins
        .iter()
        .filter_map(|&o| {
            let train = &y[..o - h];
            let truth = &y[o - h..o];
            match validation_forecast(train, m, h).and_then(|f| smape(truth, &f)) {
                Ok(e) if e.is_finite() => Some(e),
                Ok(_) => None,
                Err(err) => {
                    log::debug!("validation fold at origin {o} for m={m} failed: {err}");
                    None
                }
            }
        })
        .collect();
    let ege = if errors.is_empty() { f64::INFINITY } else { errors.iter().sum::<f64>() / errors.len() as f64 };
    let spent = generation_matrix(y, m).and_then(|g| spectral_entropy(&g)).unwrap_or(0.0);
    CandidateScore { m, ege, spent, sdr: sdr(m, l) }
}

/// Picks the model size `m` for series `y` and horizon `h`.
pub fn estimate_model_size(y: &[f64], h: usize) -> Result<ModelSizeSearch> {
    let l = y.len();
    if h == 0 {
        return Err(invalid("forecast horizon must be positive"));
    }
    if l < 2 {
        return Err(invalid("model-size search needs at least two observations"));
    }
    let f_hat = spectral_frequency(y);
    let g = gamma(f_hat);
    let t = tau(l, h, f_hat);
    let b = b_folds(l, h);
    let candidates = candidate_grid(l, h);
    let fallback = (2 * h).min(l - 1).max(1);

    if l <= 2 * h || candidates.is_empty() {
        return Ok(ModelSizeSearch {
            candidates: vec![fallback],
            gamma: g,
            tau: t,
            b_folds: b,
            f_hat,
            chosen_m: fallback,
            per_candidate_scores: Vec::new(),
        });
    }

    let scores: Vec<CandidateScore> = candidates.par_iter().map(|&m| score_candidate(y, h, m, b)).collect();
    let chosen_m = select(&scores, g, t).unwrap_or(fallback);
    Ok(ModelSizeSearch { candidates, gamma: g, tau: t, b_folds: b, f_hat, chosen_m, per_candidate_scores: scores })
}

/// Constrained argmin over scored candidates; ties resolve to the smaller
/// size. Without a feasible candidate, the one with the largest SDR wins.
pub fn select(scores: &[CandidateScore], gamma: f64, tau: f64) -> Option<usize> {
    let evaluated = scores.iter().filter(|s| s.ege.is_finite());
    let feasible: Vec<&CandidateScore> = evaluated.clone().filter(|s| s.sdr >= tau).collect();
    if feasible.is_empty() {
        return evaluated.max_by(|a, b| a.sdr.total_cmp(&b.sdr).then(b.m.cmp(&a.m))).map(|s| s.m);
    }
    feasible
        .into_iter()
        .min_by(|a, b| a.objective(gamma).total_cmp(&b.objective(gamma)).then(a.m.cmp(&b.m)))
        .map(|s| s.m)
}
