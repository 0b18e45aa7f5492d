//! Residual-informed forecasting toolkit.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: Gaussian kernels, Gram matrices, double centering and the
//!   empirical Hoeffding split of a kernel U-statistic.
//! * [`hsic`]: plug-in and unbiased HSIC estimators, a literal enumeration
//!   oracle and the analytic gradient of the plug-in estimator.
//! * [`loss`]: MSE / MAE, the residual-informed loss, the Pearson ablation and
//!   two small numerical experiments (noise-ratio trade-off, cross-term check).
//! * [`forecaster`]: a decomposition-linear forecaster with hand-written
//!   backward pass, Adam, and the training loop.
//! * [`data`]: CSV ingestion, benchmark splits, scaling, windowing and
//!   SNR-controlled noise injection.
//! * [`bounds`]: Monte-Carlo Rademacher quantities and the generalization
//!   bound terms for HSIC.

pub mod bounds;
pub mod data;
pub mod error;
pub mod forecaster;
pub mod hsic;
pub mod kernels;
pub mod loss;
pub mod stats;

pub use error::{Error, Result};
