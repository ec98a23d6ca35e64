//! Robust mean-variance portfolio selection under Kullback-Leibler model risk.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod error;
pub mod fixed_mean;
pub mod market_model;
pub mod nominal;
pub mod oracle;
pub mod robust;
pub mod roots;
mod serde_linalg;

pub use error::{Error, Result};
pub use market_model::{MarketModel, MertonConstants, SymmetricModelSpec};
pub use nominal::Portfolio;
pub use robust::{AlternativeModel, Direction, Variant};
