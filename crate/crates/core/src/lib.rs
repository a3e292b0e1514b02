//! Single-message shuffle-model protocol for differentially private summation
//! of real vectors in `[0,1]^d`.
//!
//! Each user samples `t` coordinates of their vector, encodes them with
//! stochastic fixed-point rounding at precision `k`, and runs generalized
//! randomized response with blanket probability `gamma`. A trusted shuffler
//! permutes the messages and an untrusted analyzer sums and debiases them per
//! coordinate.
//!
//! Modules:
//! - [`params`]: privacy budgets, `gamma` calibration, choice of `k`.
//! - [`randomizer`]: the local randomizer.
//! - [`analyzer`]: the shuffler and the debiasing analyzer.
//! - [`accuracy`]: empirical error, closed-form error bounds, power-law fits.
//! - [`audit`]: exact tail probabilities behind the privacy argument and a
//!   Monte-Carlo indistinguishability audit for tiny instances.

pub mod accuracy;
pub mod analyzer;
pub mod audit;
mod error;
pub mod params;
pub mod randomizer;
pub mod rng;

pub use error::{Error, Result};
pub use params::{Calibration, ComposedBudget, PrivacyBudget, ProtocolParams, Regime};
pub use randomizer::{Entry, InputVector, Message};
