//! Categorized ensemble anomaly detection for account transaction
//! streams: predictive, dimensionality-reduction and clustering detector
//! banks, combined by per-category majority vote in batch and streaming
//! modes.

pub mod app;
pub mod clustering;
pub mod ensemble;
pub mod error;
pub mod ingest;
pub mod kernels;
pub mod linalg;
pub mod par;
pub mod predictive;
pub mod reduction;
pub mod series;

pub use error::{Error, Result};
