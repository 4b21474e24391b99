//! Synthetic telematics insurance portfolios.
//!
//! The pipeline has three generation stages and one validation stage:
//!
//! 1. [`claims`] trains a cascade of three binary feedforward classifiers on a
//!    source portfolio to simulate claim counts in `{0, 1, 2, 3}`.
//! 2. [`claims`] also trains a ReLU regressor for the aggregate claim amount,
//!    with the claim count appended to the features.
//! 3. [`synth`] generates a synthetic feature portfolio with an extended SMOTE
//!    that interpolates every source row toward its single nearest neighbour
//!    with a U-shaped (Beta) weight.
//! 4. [`validate`] fits Poisson and gamma GLMs to the source and synthetic
//!    portfolios and assembles a fidelity report.
//!
//! Network, optimizer, Gaussian-process and GLM numerics are generic over the
//! [`Scalar`] trait; the aliases at the crate root pin the common `f64` and
//! `f32` instantiations.

pub mod claims;
pub mod dataio;
pub mod error;
pub mod hyperopt;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod schema;
pub mod synth;
pub mod validate;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Version of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Double-precision feedforward network.
pub type Network = nn::Network<f64>;
/// Single-precision feedforward network.
pub type Network32 = nn::Network<f32>;
/// Double-precision Adam optimizer state.
pub type AdamState = nn::AdamState<f64>;
/// Single-precision Adam optimizer state.
pub type AdamState32 = nn::AdamState<f32>;
/// Double-precision Gaussian-process surrogate.
pub type GpSurrogate = hyperopt::GpSurrogate<f64>;
/// Double-precision GLM fit.
pub type GlmFit = validate::GlmFit<f64>;
/// Single-precision GLM fit.
pub type GlmFit32 = validate::GlmFit<f32>;
/// Double-precision seven-number summary.
pub type SummaryStats = validate::SummaryStats<f64>;
