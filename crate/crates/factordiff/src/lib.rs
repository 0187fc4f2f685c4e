//! Factor-conditioned diffusion for cross-sectional stock returns, plus the
//! downstream mean-variance portfolio pipeline.
//!
//! The crate has three layers:
//!
//! - a small numerical core: dense `f64` tensors with reverse-mode autodiff
//!   and Adam ([`numerics`]);
//! - the generative model: a token-per-asset diffusion transformer with
//!   token-wise factor conditioning ([`denoiser`]) and the DDPM schedule,
//!   training loop, and ancestral sampler around it ([`diffusion`]);
//! - the portfolio side: moment estimators ([`estimators`]), the two
//!   mean-variance programs with and without transaction fees
//!   ([`optimizer`]), a daily rebalancing backtester ([`backtest`]), and
//!   panel ingestion plus a synthetic market generator ([`data`]).
//!
//! See the crate examples for end-to-end walkthroughs; the `factordiff`
//! binary exposes the same pipeline as batch subcommands ([`cli`]).

pub mod backtest;
pub mod cli;
pub mod config;
pub mod data;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod estimators;
pub mod numerics;
pub mod optimizer;

pub use error::{Error, Result};
