//! Dataset loading, per-series forecasting and benchmark reporting.

pub mod benchmark;
pub mod dataset;
pub mod forecast;

pub use benchmark::{run_benchmark, BenchmarkConfig, BenchmarkReport, MethodSummary};
pub use dataset::{load_dataset, DatasetFormat, LoadedDataset, LoadedSeries, RowError};
pub use forecast::{
    forecast, forecast_baseline, forecast_cnnm, forecast_lbcnnm, forecast_lbcnnm_with, forecast_missing,
    forecast_multi_kernel, Baseline, DataModel, ForecastConfig, ForecastReport, Method, MultiKernelForecast,
};
