//! One-class kernel machine as a detector.

use crate::error::Result;
use crate::kernels::{one_class_fit, KernelSpec};

/// Fits on `train` and flags query rows below the margin.
pub fn ocsvm_detect(train: &[Vec<f64>], query: &[Vec<f64>], spec: KernelSpec, nu: f64) -> Result<Vec<bool>> {
    let model = one_class_fit(train, spec, nu)?;
    Ok(query.iter().map(|x| model.is_outlier(x)).collect())
}
