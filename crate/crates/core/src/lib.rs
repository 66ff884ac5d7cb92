//! Time series forecasting as vector completion with learned convolutional
//! nuclear norm minimization (LbCNNM).

pub mod augment;
pub mod diagnostics;
mod error;
pub mod fft;
pub mod linalg;
pub mod metrics;
pub mod model_selection;
pub mod pipeline;
pub mod signal;
pub mod solvers;
pub mod transform;

pub use error::{Error, Result};
