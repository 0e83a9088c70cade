//! Dimensionality-reduction detector bank: PCA subspace distance,
//! isolation forest and the windowed autoencoder.

pub mod autoencoder;
pub mod iforest;
pub mod pca;

use std::fmt;
use std::str::FromStr;

pub use autoencoder::{ae_score, ae_train, ae_train_traced, AutoencoderModel, TrainedAutoencoder};
pub use iforest::{c_factor, iforest_fit, iforest_score, IsolationForest};
pub use pca::{pca_fit, pca_score, PcaModel};

use crate::error::Error;
use crate::linalg::{mean, quantile, std_dev};

/// `mean + multiplier·std` of the training scores (population std).
pub fn score_threshold(train_scores: &[f64], multiplier: f64) -> f64 {
    if train_scores.is_empty() {
        return f64::NAN;
    }
    mean(train_scores) + multiplier * std_dev(train_scores)
}

/// How a score-based detector turns training scores into a cutoff; a
/// score flags when it is strictly above the cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    MeanStd(f64),
    Quantile(f64),
    Fixed(f64),
}

impl ThresholdRule {
    pub fn cutoff(&self, train_scores: &[f64]) -> f64 {
        match *self {
            ThresholdRule::MeanStd(m) => score_threshold(train_scores, m),
            ThresholdRule::Quantile(q) => quantile(train_scores, q),
            ThresholdRule::Fixed(c) => c,
        }
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdRule::MeanStd(m) => write!(f, "meanstd:{m}"),
            ThresholdRule::Quantile(q) => write!(f, "quantile:{q}"),
            ThresholdRule::Fixed(c) => write!(f, "fixed:{c}"),
        }
    }
}

impl FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (kind, arg) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("threshold `{s}` must look like kind:value")))?;
        let v: f64 = arg
            .parse()
            .map_err(|_| Error::Config(format!("bad threshold value `{arg}`")))?;
        if !v.is_finite() {
            return Err(Error::Config(format!("bad threshold value `{arg}`")));
        }
        match kind {
            "meanstd" => Ok(ThresholdRule::MeanStd(v)),
            "quantile" if (0.0..=1.0).contains(&v) => Ok(ThresholdRule::Quantile(v)),
            "fixed" => Ok(ThresholdRule::Fixed(v)),
            _ => Err(Error::Config(format!("unknown threshold rule `{s}`"))),
        }
    }
}
