use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lbcnnm::augment::generation_matrix;
use lbcnnm::diagnostics::{CoherenceReport, SpectrumSummary};
use lbcnnm::pipeline::benchmark::ablation_methods;
use lbcnnm::pipeline::dataset::{m4_horizon, LoadedSeries};
use lbcnnm::pipeline::{
    forecast, forecast_missing, forecast_multi_kernel, load_dataset, run_benchmark, BenchmarkConfig, DatasetFormat,
    ForecastConfig, ForecastReport, Method,
};
use lbcnnm::transform::{learn_pca, learn_pcp, TransformMethod};

#[derive(Parser)]
#[command(
    name = "lbcnnm",
    version,
    about = "Time series forecasting by learned convolutional nuclear norm minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forecast every series in a file.
    Forecast(ForecastArgs),
    /// Evaluate methods against held-out values and write reports.
    Benchmark(BenchmarkArgs),
    /// Learn a transform from one series and save it.
    LearnTransform(LearnArgs),
    /// Print spectrum and coherence diagnostics.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    M4,
    Simple,
}

impl From<Format> for DatasetFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::M4 => DatasetFormat::M4,
            Format::Simple => DatasetFormat::SimpleCsv,
        }
    }
}

#[derive(Args)]
struct ForecastArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "simple")]
    format: Format,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value = "lbcnnm")]
    method: String,
    /// Fixed model size instead of the search.
    #[arg(long)]
    model_size: Option<usize>,
    /// Also report forecasts for k = 0.1q, …, q and their envelope.
    #[arg(long)]
    multi_kernel: bool,
    /// Rows of `id,flag,…` with 1 marking a missing observation.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Held-out values to score against.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value = "m4")]
    format: Format,
    /// Category to keep (e.g. Hourly); its horizon is used unless --horizon is given.
    #[arg(long)]
    category: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',', default_value = "lbcnnm")]
    methods: Vec<String>,
    /// Run every LbCNNM training data model.
    #[arg(long)]
    ablation: bool,
    #[arg(long)]
    missing_rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long)]
    model_size: Option<usize>,
    /// Only the first N series after sorting by id.
    #[arg(long)]
    limit: Option<usize>,
    /// JSON report path; `.csv` and `.summary.csv` tables are written alongside.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    input: PathBuf,
    /// Series id to learn from; defaults to the first row.
    #[arg(long)]
    series: Option<String>,
    #[arg(long)]
    model_size: usize,
    #[arg(long, default_value = "pcp")]
    algo: String,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    series: Option<String>,
    #[arg(long)]
    model_size: usize,
    /// Kernel size; defaults to `m` (half of `q`).
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    #[arg(long, default_value = "pca")]
    algo: String,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("LBCNNM_THREADS") {
        let n: usize = v.parse().with_context(|| format!("LBCNNM_THREADS=`{v}` is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn read_masks(path: &Path) -> Result<Vec<(String, Vec<bool>)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut fields = line.split(',').map(str::trim);
        let Some(id) = fields.next().filter(|s| !s.is_empty()) else { continue };
        let flags = fields
            .filter(|f| !f.is_empty())
            .map(|f| match f {
                "0" => Ok(false),
                "1" => Ok(true),
                other => bail!("{}:{}: mask flag `{other}` is not 0 or 1", path.display(), n + 1),
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((id.to_string(), flags));
    }
    Ok(out)
}

fn pick<'a>(series: &'a [LoadedSeries], id: Option<&str>) -> Result<&'a LoadedSeries> {
    match id {
        Some(id) => series.iter().find(|s| s.series.id == id).with_context(|| format!("no series `{id}`")),
        None => series.first().context("input holds no usable series"),
    }
}

fn run_forecast(a: ForecastArgs) -> Result<bool> {
    let method: Method = a.method.parse()?;
    let data = load_dataset(&a.input, a.test.as_deref(), a.format.into(), a.horizon)?;
    for e in &data.errors {
        log::error!("{}: {}", e.location, e.message);
    }
    let cfg = ForecastConfig { model_size: a.model_size, ..Default::default() };
    let masks = a.mask.as_deref().map(read_masks).transpose()?;
    let mut partial = !data.errors.is_empty();
    let mut reports = Vec::with_capacity(data.series.len());
    for item in &data.series {
        let s = &item.series;
        let mask = masks.as_ref().and_then(|m| m.iter().find(|(id, _)| *id == s.id)).map(|(_, f)| f);
        let mut report: ForecastReport = match mask {
            Some(flags) => forecast_missing(s, flags, &cfg),
            None => forecast(s, method, &cfg),
        };
        if let Some(t) = &item.truth {
            report.score(t, None)?;
        }
        partial |= report.degraded.is_some();
        report.forecast = item.unshift(&report.forecast);
        let mut entry = serde_json::to_value(&report)?;
        entry["shift"] = json!(item.shift);
        if a.multi_kernel {
            match forecast_multi_kernel(s, &cfg) {
                Ok(mk) => {
                    entry["multi_kernel"] = json!({
                        "kernels": mk.kernels,
                        "forecasts": mk.forecasts.iter().map(|f| item.unshift(f)).collect::<Vec<_>>(),
                        "lower": item.unshift(&mk.lower),
                        "upper": item.unshift(&mk.upper),
                    });
                }
                Err(e) => {
                    log::error!("multi-kernel forecast for {} failed: {e}", s.id);
                    partial = true;
                }
            }
        }
        reports.push(entry);
    }
    write_json(&a.output, &serde_json::Value::Array(reports))?;
    Ok(partial)
}

fn run_bench(a: BenchmarkArgs) -> Result<bool> {
    let horizon = match (a.horizon, &a.category) {
        (Some(h), _) => Some(h),
        (None, Some(c)) => m4_horizon(c),
        (None, None) => None,
    };
    let mut data = load_dataset(&a.train, Some(&a.test), a.format.into(), horizon)?;
    if let Some(c) = &a.category {
        data.series.retain(|s| s.series.frequency_label.as_deref().is_none_or(|l| l.eq_ignore_ascii_case(c)));
    }
    if let Some(n) = a.limit {
        data.series.truncate(n);
    }
    let mut methods = a.methods.iter().map(|m| m.parse::<Method>()).collect::<lbcnnm::Result<Vec<_>>>()?;
    if a.ablation {
        for m in ablation_methods() {
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
    }
    let cfg = BenchmarkConfig {
        methods,
        forecast: ForecastConfig { model_size: a.model_size, ..Default::default() },
        missing_rate: a.missing_rate,
        trials: a.trials,
        seed: a.seed,
    };
    log::info!("benchmarking {} series", data.series.len());
    let report = run_benchmark(&data, &cfg)?;
    report.write_json(&a.report)?;
    report.write_csv(&sibling(&a.report, ".csv"))?;
    report.write_summary_csv(&sibling(&a.report, ".summary.csv"))?;
    for s in &report.summary {
        println!(
            "{:<24} {:<10} n={:<5} sMAPE={:>8} NRMSE={:>8} degraded={}",
            s.method,
            s.category,
            s.series,
            s.mean_smape.map_or("-".into(), |v| format!("{v:.2}")),
            s.mean_nrmse.map_or("-".into(), |v| format!("{v:.2}")),
            s.degraded
        );
    }
    Ok(!report.errors.is_empty() || report.rows.iter().any(|r| r.report.degraded.is_some()))
}

fn load_single(input: &Path, series: Option<&str>) -> Result<LoadedSeries> {
    let data = load_dataset(input, None, DatasetFormat::SimpleCsv, Some(1))?;
    for e in &data.errors {
        log::warn!("{}: {}", e.location, e.message);
    }
    Ok(pick(&data.series, series)?.clone())
}

fn run_learn(a: LearnArgs) -> Result<bool> {
    let item = load_single(&a.input, a.series.as_deref())?;
    let g0 = generation_matrix(&item.series.values, a.model_size)?;
    let model = match a.algo.parse::<TransformMethod>()? {
        TransformMethod::Pca => learn_pca(&g0)?,
        TransformMethod::Pcp => learn_pcp(&g0)?,
    };
    model.save(&a.output)?;
    Ok(!model.pcp_converged)
}

fn run_diagnose(a: DiagnoseArgs) -> Result<bool> {
    let item = load_single(&a.input, a.series.as_deref())?;
    let y = &item.series.values;
    let g0 = generation_matrix(y, a.model_size)?;
    let model = match a.algo.parse::<TransformMethod>()? {
        TransformMethod::Pca => learn_pca(&g0)?,
        TransformMethod::Pcp => learn_pcp(&g0)?,
    };
    let k = a.kernel.unwrap_or(a.model_size);
    let window = &y[y.len() - a.model_size..];
    let spectrum = SpectrumSummary::of(&g0)?;
    let coherence = CoherenceReport::compute(model.matrix(), window, k, a.horizon)?;
    let out = json!({
        "series_id": item.series.id,
        "model_size": a.model_size,
        "kernel": k,
        "spectrum": spectrum,
        "coherence": coherence,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(false)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Forecast(a) => run_forecast(a),
        Command::Benchmark(a) => run_bench(a),
        Command::LearnTransform(a) => run_learn(a),
        Command::Diagnose(a) => run_diagnose(a),
    });
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
