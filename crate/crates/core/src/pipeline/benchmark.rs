//! Batch evaluation over a dataset with deterministic reports.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{LoadedDataset, LoadedSeries, RowError};
use super::forecast::{forecast, forecast_missing, DataModel, ForecastConfig, ForecastReport, Method};
use crate::error::{invalid, Result};
use crate::model_selection::estimate_model_size;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub forecast: ForecastConfig,
    /// When set, each series is also forecast from a history with this
    /// fraction of observations removed at random.
    pub missing_rate: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Lbcnnm(DataModel::Combined)],
            forecast: ForecastConfig::default(),
            missing_rate: None,
            trials: 10,
            seed: 0,
        }
    }
}

/// Every LbCNNM data model, for ablation runs.
pub fn ablation_methods() -> Vec<Method> {
    DataModel::ALL.into_iter().map(Method::Lbcnnm).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub category: Option<String>,
    pub trial: Option<usize>,
    pub missing_rate: Option<f64>,
    /// Shift removed from `report.forecast`; metrics are on the shifted scale.
    pub shift: f64,
    pub report: ForecastReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub category: String,
    pub series: usize,
    pub scored: usize,
    pub degraded: usize,
    pub mean_smape: Option<f64>,
    pub mean_nrmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub summary: Vec<MethodSummary>,
    pub errors: Vec<RowError>,
}

fn needs_model_size(m: &Method) -> bool {
    matches!(m, Method::Lbcnnm(_) | Method::Cnnm)
}

fn series_seed(seed: u64, id: &str, trial: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(id.as_bytes());
    hasher.update((trial as u64).to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Random missing-observation flags for `len` values.
pub fn missing_flags(len: usize, rate: f64, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random::<f64>() < rate).collect()
}

fn finish(item: &LoadedSeries, mut report: ForecastReport, missing: Option<&[bool]>) -> ForecastReport {
    if let Some(truth) = &item.truth {
        if let Err(e) = report.score(truth, None) {
            log::warn!("scoring {} failed: {e}", item.series.id);
        }
    }
    if missing.is_some_and(|m| m.iter().all(|&x| x)) {
        report.degraded.get_or_insert_with(|| "all observations missing".into());
    }
    report.forecast = item.unshift(&report.forecast);
    report
}

fn run_series(item: &LoadedSeries, cfg: &BenchmarkConfig) -> Vec<BenchmarkRow> {
    let s = &item.series;
    let mut fcfg = cfg.forecast.clone();
    if fcfg.model_size.is_none() && cfg.methods.iter().any(needs_model_size) {
        match estimate_model_size(&s.values, s.horizon) {
            Ok(search) => fcfg.model_size = Some(search.chosen_m),
            Err(e) => log::warn!("model-size search for {} failed: {e}", s.id),
        }
    }
    let row = |report, trial, missing_rate| BenchmarkRow {
        category: s.frequency_label.clone(),
        trial,
        missing_rate,
        shift: item.shift,
        report,
    };
    let mut rows: Vec<BenchmarkRow> =
        cfg.methods.iter().map(|&m| row(finish(item, forecast(s, m, &fcfg), None), None, None)).collect();
    if let Some(rate) = cfg.missing_rate {
        let mcfg = &cfg.forecast;
        for t in 0..cfg.trials.max(1) {
            let flags = missing_flags(s.len(), rate, series_seed(cfg.seed, &s.id, t));
            let r = forecast_missing(s, &flags, mcfg);
            rows.push(row(finish(item, r, Some(&flags)), Some(t), Some(rate)));
        }
    }
    rows
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(rows: &[BenchmarkRow]) -> Vec<MethodSummary> {
    let mut groups: BTreeMap<(String, String), Vec<&BenchmarkRow>> = BTreeMap::new();
    for r in rows {
        let cat = r.category.clone().unwrap_or_else(|| "-".into());
        groups.entry((r.report.method.clone(), cat)).or_default().push(r);
        groups.entry((r.report.method.clone(), "all".into())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, category), rs)| {
            let smapes: Vec<f64> = rs.iter().filter_map(|r| r.report.smape).collect();
            let nrmses: Vec<f64> = rs.iter().filter_map(|r| r.report.nrmse).collect();
            MethodSummary {
                method,
                category,
                series: rs.len(),
                scored: smapes.len(),
                degraded: rs.iter().filter(|r| r.report.degraded.is_some()).count(),
                mean_smape: mean(&smapes),
                mean_nrmse: mean(&nrmses),
            }
        })
        .collect()
}

/// Forecasts every series with every configured method.
///
/// Rows are ordered by series id, then method order, then trial, independent
/// of thread scheduling.
pub fn run_benchmark(data: &LoadedDataset, cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if cfg.methods.is_empty() && cfg.missing_rate.is_none() {
        return Err(invalid("no methods to benchmark"));
    }
    if let Some(r) = cfg.missing_rate {
        if !(0.0..1.0).contains(&r) {
            return Err(invalid(format!("missing rate {r} outside [0, 1)")));
        }
    }
    let mut items: Vec<&LoadedSeries> = data.series.iter().collect();
    items.sort_by(|a, b| a.series.id.cmp(&b.series.id));
    let rows: Vec<BenchmarkRow> = items.par_iter().flat_map_iter(|item| run_series(item, cfg)).collect();
    let summary = summarize(&rows);
    Ok(BenchmarkReport { rows, summary, errors: data.errors.clone() })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    series_id: &'a str,
    category: &'a str,
    method: &'a str,
    trial: Option<usize>,
    missing_rate: Option<f64>,
    chosen_m: Option<usize>,
    smape: Option<f64>,
    nrmse: Option<f64>,
    solver_iters: usize,
    converged: bool,
    degraded: &'a str,
    shift: f64,
    forecast: String,
}

impl BenchmarkReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }

    /// Per-series rows; forecasts are space-separated.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            let forecast: Vec<String> = r.report.forecast.iter().map(|v| format!("{v}")).collect();
            w.serialize(CsvRow {
                series_id: &r.report.series_id,
                category: r.category.as_deref().unwrap_or(""),
                method: &r.report.method,
                trial: r.trial,
                missing_rate: r.missing_rate,
                chosen_m: r.report.chosen_m,
                smape: r.report.smape,
                nrmse: r.report.nrmse,
                solver_iters: r.report.solver_iters,
                converged: r.report.converged,
                degraded: r.report.degraded.as_deref().unwrap_or(""),
                shift: r.shift,
                forecast: forecast.join(" "),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for s in &self.summary {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}
