//! Covariate-balance diagnostics for inverse-probability-weighted marginal
//! structural models with time-varying treatment and censoring, plus a
//! simulation bench for judging how well each metric tracks bias.

pub mod error;
pub mod eval;
pub mod glm;
pub mod metrics;
pub mod panel;
pub mod sim;
pub mod weights;

pub use error::{Error, ErrorClass, Result};
