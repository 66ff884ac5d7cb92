//! End-to-end forecasters: LbCNNM, CNNM and the simple baselines.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::augment::{
    avg_sample, cnnm_forecast, drift_sample, exps_alphas, exps_sample, generation_matrix, lsr_sample,
    AugmentedDataMatrix, Blocks, SourceTag,
};
use crate::diagnostics::{CoherenceReport, SpectrumSummary};
use crate::error::{invalid, Error, Result};
use crate::metrics::{nrmse, smape};
use crate::model_selection::{estimate_model_size, spectral_frequency};
use crate::signal::{SamplingMask, TargetVector, TimeSeries};
use crate::solvers::{lbcnnm_solve, AdmmConfig, LbcnnmSolution, DEFAULT_LAMBDA};
use crate::transform::{learn_pca, learn_pcp_incomplete_with, learn_pcp_with, PcpOptions, TransformModel};

/// Training matrix used to learn the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataModel {
    /// `G0` with the PCA transform.
    G0Pca,
    G0,
    Gs,
    Gc,
    Ge,
    G0Gs,
    G0Gc,
    G0Ge,
    G0GcGs,
    G0GcGe,
    G0GsGe,
    G0GcGsGe,
    /// Rule-based combination that drops `Gc` for near-low-rank `G0`.
    Combined,
}

impl DataModel {
    pub const ALL: [DataModel; 13] = [
        DataModel::G0Pca,
        DataModel::G0,
        DataModel::Gs,
        DataModel::Gc,
        DataModel::Ge,
        DataModel::G0Gs,
        DataModel::G0Gc,
        DataModel::G0Ge,
        DataModel::G0GcGs,
        DataModel::G0GcGe,
        DataModel::G0GsGe,
        DataModel::G0GcGsGe,
        DataModel::Combined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DataModel::G0Pca => "g0-pca",
            DataModel::G0 => "g0",
            DataModel::Gs => "gs",
            DataModel::Gc => "gc",
            DataModel::Ge => "ge",
            DataModel::G0Gs => "g0+gs",
            DataModel::G0Gc => "g0+gc",
            DataModel::G0Ge => "g0+ge",
            DataModel::G0GcGs => "g0+gc+gs",
            DataModel::G0GcGe => "g0+gc+ge",
            DataModel::G0GsGe => "g0+gs+ge",
            DataModel::G0GcGsGe => "g0+gc+gs+ge",
            DataModel::Combined => "combined",
        }
    }

    fn blocks(self) -> &'static [SourceTag] {
        use SourceTag::*;
        match self {
            DataModel::G0Pca | DataModel::G0 => &[G0],
            DataModel::Gs => &[Gs],
            DataModel::Gc => &[Gc],
            DataModel::Ge => &[Ge],
            DataModel::G0Gs => &[G0, Gs],
            DataModel::G0Gc => &[G0, Gc],
            DataModel::G0Ge => &[G0, Ge],
            DataModel::G0GcGs => &[G0, Gc, Gs],
            DataModel::G0GcGe => &[G0, Gc, Ge],
            DataModel::G0GsGe => &[G0, Gs, Ge],
            DataModel::G0GcGsGe | DataModel::Combined => &[G0, Gc, Gs, Ge],
        }
    }
}

impl FromStr for DataModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        DataModel::ALL.into_iter().find(|d| d.name() == key).ok_or_else(|| invalid(format!("unknown data model `{s}`")))
    }
}

/// Simple baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Baseline {
    Naive,
    Average,
    Drift,
    Lsr,
    Exps,
}

/// Any forecasting method the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Lbcnnm(DataModel),
    Cnnm,
    Baseline(Baseline),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Lbcnnm(DataModel::Combined) => f.write_str("lbcnnm"),
            Method::Lbcnnm(d) => write!(f, "lbcnnm:{}", d.name()),
            Method::Cnnm => f.write_str("cnnm"),
            Method::Baseline(Baseline::Naive) => f.write_str("naive"),
            Method::Baseline(Baseline::Average) => f.write_str("average"),
            Method::Baseline(Baseline::Drift) => f.write_str("drift"),
            Method::Baseline(Baseline::Lsr) => f.write_str("lsr"),
            Method::Baseline(Baseline::Exps) => f.write_str("exps"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Ok(match key.as_str() {
            "lbcnnm" => Method::Lbcnnm(DataModel::Combined),
            "cnnm" => Method::Cnnm,
            "naive" => Method::Baseline(Baseline::Naive),
            "average" => Method::Baseline(Baseline::Average),
            "drift" => Method::Baseline(Baseline::Drift),
            "lsr" => Method::Baseline(Baseline::Lsr),
            "exps" => Method::Baseline(Baseline::Exps),
            other => match other.strip_prefix("lbcnnm:") {
                Some(d) => Method::Lbcnnm(d.parse()?),
                None => return Err(invalid(format!("unknown method `{s}`"))),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub lambda: f64,
    /// Kernel size as a fraction of `q`.
    pub kernel_fraction: f64,
    pub admm: AdmmConfig,
    pub pcp: PcpOptions,
    /// Fixed model size; `None` runs the model-size search.
    pub model_size: Option<usize>,
    /// Attach spectrum and coherence diagnostics to LbCNNM reports.
    pub diagnostics: bool,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            kernel_fraction: 0.5,
            admm: AdmmConfig::default(),
            pcp: PcpOptions::default(),
            model_size: None,
            diagnostics: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDiagnostics {
    pub training_spectrum: Option<SpectrumSummary>,
    pub coherence: Option<CoherenceReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub series_id: String,
    pub method: String,
    pub forecast: Vec<f64>,
    pub smape: Option<f64>,
    pub nrmse: Option<f64>,
    pub chosen_m: Option<usize>,
    pub solver_iters: usize,
    pub converged: bool,
    /// Set when the method failed and the naive forecast was substituted.
    pub degraded: Option<String>,
    pub diagnostics: Option<ReportDiagnostics>,
}

impl ForecastReport {
    fn new(series: &TimeSeries, method: impl ToString, forecast: Vec<f64>) -> Self {
        Self {
            series_id: series.id.clone(),
            method: method.to_string(),
            forecast,
            smape: None,
            nrmse: None,
            chosen_m: None,
            solver_iters: 0,
            converged: true,
            degraded: None,
            diagnostics: None,
        }
    }

    /// Fills in sMAPE and NRMSE against `truth`, skipping positions marked in
    /// `exclude`.
    pub fn score(&mut self, truth: &[f64], exclude: Option<&[bool]>) -> Result<()> {
        let keep = |i: usize| exclude.is_none_or(|e| !e.get(i).copied().unwrap_or(false));
        let (t, f): (Vec<f64>, Vec<f64>) =
            truth.iter().zip(&self.forecast).enumerate().filter(|(i, _)| keep(*i)).map(|(_, (a, b))| (*a, *b)).unzip();
        if truth.len() != self.forecast.len() {
            return Err(Error::DimensionMismatch { expected: self.forecast.len(), actual: truth.len() });
        }
        self.smape = Some(smape(&t, &f)?);
        self.nrmse = Some(nrmse(&t, &f)?);
        Ok(())
    }

    fn degrade(series: &TimeSeries, method: impl ToString, err: &Error) -> Self {
        log::warn!("{} on series {} failed ({err}); using the naive forecast", method.to_string(), series.id);
        let mut r = Self::new(series, method, naive(&series.values, series.horizon));
        r.degraded = Some(err.to_string());
        r.converged = false;
        r
    }
}

fn naive(y: &[f64], h: usize) -> Vec<f64> {
    vec![*y.last().expect("series is non-empty"); h]
}

/// Baseline forecast. Histories too short for the method fall back to naive.
pub fn forecast_baseline(series: &TimeSeries, method: Baseline) -> ForecastReport {
    let y = &series.values;
    let h = series.horizon;
    let l = y.len();
    let forecast = match method {
        Baseline::Naive => naive(y, h),
        Baseline::Average => avg_sample(y, h, h),
        Baseline::Drift if l > h => drift_sample(y, l - h + 1, h, h),
        Baseline::Lsr if l >= 3 => lsr_sample(y, h.max(3).min(l), h, h),
        Baseline::Exps => exps_sample(y, h, h, exps_alphas(spectral_frequency(y))[0]),
        _ => naive(y, h),
    };
    ForecastReport::new(series, Method::Baseline(method), forecast)
}

/// A learned transform and the completion problem for one series.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub m: usize,
    pub f_hat: f64,
    pub model: TransformModel,
    pub target: TargetVector,
    pub training: AugmentedDataMatrix,
}

impl Prepared {
    pub fn kernel(&self, fraction: f64) -> usize {
        let q = self.model.q();
        ((q as f64 * fraction).round() as usize).clamp(1, q)
    }

    pub fn solve(&self, k: usize, cfg: &ForecastConfig) -> Result<LbcnnmSolution> {
        lbcnnm_solve(&self.target.values, &self.target.mask, self.model.matrix(), k, cfg.lambda, &cfg.admm)
    }
}

fn check_history(series: &TimeSeries) -> Result<()> {
    if series.len() <= series.horizon {
        return Err(invalid(format!(
            "series {} has {} observations for horizon {}",
            series.id,
            series.len(),
            series.horizon
        )));
    }
    Ok(())
}

/// Model size from the config or the search, clipped so the target window
/// fits the history.
pub fn resolve_model_size(series: &TimeSeries, cfg: &ForecastConfig) -> Result<usize> {
    let (l, h) = (series.len(), series.horizon);
    let m = match cfg.model_size {
        Some(m) => m,
        None => estimate_model_size(&series.values, h)?.chosen_m,
    };
    let m = m.min(l - 1).max(h + 1);
    if m > l {
        return Err(invalid(format!("series {} is too short for model size {m}", series.id)));
    }
    Ok(m)
}

/// Builds the training matrix for `data_model` and learns the transform.
pub fn prepare(series: &TimeSeries, data_model: DataModel, cfg: &ForecastConfig) -> Result<Prepared> {
    check_history(series)?;
    let (y, h, l) = (&series.values, series.horizon, series.len());
    let m = resolve_model_size(series, cfg)?;
    let f_hat = spectral_frequency(y);
    let training = if data_model == DataModel::G0 || data_model == DataModel::G0Pca {
        let g0 = generation_matrix(y, m)?;
        AugmentedDataMatrix::concat(&[(SourceTag::G0, &g0)])?
    } else {
        let blocks = Blocks::build(y, h, m, f_hat)?;
        if data_model == DataModel::Combined {
            blocks.combine(l, h, f_hat)?
        } else {
            let parts: Vec<(SourceTag, &DMatrix<f64>)> = data_model
                .blocks()
                .iter()
                .map(|t| {
                    let b = match t {
                        SourceTag::G0 => &blocks.g0,
                        SourceTag::Gs => &blocks.gs,
                        SourceTag::Gc => &blocks.gc,
                        SourceTag::Ge => &blocks.ge,
                    };
                    (*t, b)
                })
                .collect();
            AugmentedDataMatrix::concat(&parts)?
        }
    };
    if training.columns.ncols() == 0 {
        return Err(Error::EmptyProblem(format!("data model {} produced no columns", data_model.name())));
    }
    let model = match data_model {
        DataModel::G0Pca => learn_pca(&training.columns)?,
        _ => learn_pcp_with(&training.columns, &cfg.pcp)?,
    };
    let target = TargetVector::forecast_window(y, m, h)?;
    Ok(Prepared { m, f_hat, model, target, training })
}

fn attach_diagnostics(prep: &Prepared, series: &TimeSeries, k: usize) -> ReportDiagnostics {
    let window = &series.values[series.len() - prep.m..];
    ReportDiagnostics {
        training_spectrum: SpectrumSummary::of(&prep.training.columns).ok(),
        coherence: CoherenceReport::compute(prep.model.matrix(), window, k, series.horizon).ok(),
    }
}

/// LbCNNM forecast with the given training data model.
pub fn forecast_lbcnnm_with(series: &TimeSeries, data_model: DataModel, cfg: &ForecastConfig) -> ForecastReport {
    let method = Method::Lbcnnm(data_model);
    let run = || -> Result<ForecastReport> {
        let prep = prepare(series, data_model, cfg)?;
        let k = prep.kernel(cfg.kernel_fraction);
        let sol = prep.solve(k, cfg)?;
        let mut r = ForecastReport::new(series, method, sol.x[prep.m - series.horizon..].to_vec());
        r.chosen_m = Some(prep.m);
        r.solver_iters = sol.iterations;
        r.converged = sol.converged && prep.model.pcp_converged;
        if cfg.diagnostics {
            r.diagnostics = Some(attach_diagnostics(&prep, series, k));
        }
        Ok(r)
    };
    run().unwrap_or_else(|e| ForecastReport::degrade(series, method, &e))
}

/// LbCNNM forecast with the combined training matrix.
pub fn forecast_lbcnnm(series: &TimeSeries, cfg: &ForecastConfig) -> ForecastReport {
    forecast_lbcnnm_with(series, DataModel::Combined, cfg)
}

/// CNNM forecast (identity transform, `k = m/2`) at the selected model size.
pub fn forecast_cnnm(series: &TimeSeries, cfg: &ForecastConfig) -> ForecastReport {
    let run = || -> Result<ForecastReport> {
        check_history(series)?;
        let m = resolve_model_size(series, cfg)?;
        let x = cnnm_forecast(&series.values, series.horizon, m, &cfg.admm)?;
        let mut r = ForecastReport::new(series, Method::Cnnm, x[m - series.horizon..].to_vec());
        r.chosen_m = Some(m);
        Ok(r)
    };
    run().unwrap_or_else(|e| ForecastReport::degrade(series, Method::Cnnm, &e))
}

pub fn forecast(series: &TimeSeries, method: Method, cfg: &ForecastConfig) -> ForecastReport {
    match method {
        Method::Lbcnnm(d) => forecast_lbcnnm_with(series, d, cfg),
        Method::Cnnm => forecast_cnnm(series, cfg),
        Method::Baseline(b) => forecast_baseline(series, b),
    }
}

/// Forecasts for `k ∈ {0.1q, …, q}` and their entrywise envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiKernelForecast {
    pub series_id: String,
    pub chosen_m: usize,
    pub kernels: Vec<usize>,
    pub forecasts: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Forecast at the configured kernel fraction.
    pub point: Vec<f64>,
}

pub fn forecast_multi_kernel(series: &TimeSeries, cfg: &ForecastConfig) -> Result<MultiKernelForecast> {
    let prep = prepare(series, DataModel::Combined, cfg)?;
    let h = series.horizon;
    let tail = |x: Vec<f64>| x[prep.m - h..].to_vec();
    let mut kernels: Vec<usize> = (1..=10).map(|i| prep.kernel(i as f64 / 10.0)).collect();
    kernels.dedup();
    let mut forecasts = Vec::with_capacity(kernels.len());
    for &k in &kernels {
        forecasts.push(tail(prep.solve(k, cfg)?.x));
    }
    let point_k = prep.kernel(cfg.kernel_fraction);
    let point = match kernels.iter().position(|&k| k == point_k) {
        Some(i) => forecasts[i].clone(),
        None => {
            let p = tail(prep.solve(point_k, cfg)?.x);
            kernels.push(point_k);
            forecasts.push(p.clone());
            p
        }
    };
    let lower = (0..h).map(|i| forecasts.iter().map(|f| f[i]).fold(f64::INFINITY, f64::min)).collect();
    let upper = (0..h).map(|i| forecasts.iter().map(|f| f[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    Ok(MultiKernelForecast { series_id: series.id.clone(), chosen_m: prep.m, kernels, forecasts, lower, upper, point })
}

/// Forecast from a history with missing entries (`missing[i]` marks
/// observation `i`). Uses `m = 5h`, `Y = G0` and the CPCP-completed transform.
pub fn forecast_missing(series: &TimeSeries, missing: &[bool], cfg: &ForecastConfig) -> ForecastReport {
    let method = "lbcnnm-missing";
    let run = || -> Result<ForecastReport> {
        check_history(series)?;
        let (y, h, l) = (&series.values, series.horizon, series.len());
        if missing.len() != l {
            return Err(Error::DimensionMismatch { expected: l, actual: missing.len() });
        }
        let m = cfg.model_size.unwrap_or(5 * h).min(l - 1).max(h + 1);
        let n = l - m + 1;
        let g0 = DMatrix::from_fn(m, n, |i, j| if missing[i + j] { 0.0 } else { y[i + j] });
        let observed = DMatrix::from_fn(m, n, |i, j| !missing[i + j]);
        let model = learn_pcp_incomplete_with(&g0, &observed, &cfg.pcp)?;
        let start = l + h - m;
        let kept: Vec<usize> = (0..m - h).filter(|&i| !missing[start + i]).collect();
        if kept.is_empty() {
            return Err(Error::EmptyProblem("every observation in the target window is missing".into()));
        }
        let mask = SamplingMask::new(kept, m)?;
        let mut values = vec![0.0; m];
        for &i in mask.indices() {
            values[i] = y[start + i];
        }
        let q = model.q();
        let k = ((q as f64 * cfg.kernel_fraction).round() as usize).clamp(1, q);
        let sol = lbcnnm_solve(&values, &mask, model.matrix(), k, cfg.lambda, &cfg.admm)?;
        let mut r = ForecastReport::new(series, method, sol.x[m - h..].to_vec());
        r.chosen_m = Some(m);
        r.solver_iters = sol.iterations;
        r.converged = sol.converged && model.pcp_converged;
        Ok(r)
    };
    run().unwrap_or_else(|e| {
        let mut r = ForecastReport::degrade(series, method, &e);
        if let Some(last) = series.values.iter().zip(missing).rev().find(|(_, &m)| !m).map(|(v, _)| *v) {
            r.forecast = vec![last; series.horizon];
        }
        r
    })
}
