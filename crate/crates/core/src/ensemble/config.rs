//! Flat `key = value` configuration covering every detector, the grid,
//! the streaming schedule and the vote.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::detectors::DetectorKind;
use super::vote::AlarmRule;
use crate::error::{Error, Result};
use crate::ingest::{FeatureKind, ParseOptions};
use crate::kernels::KernelSpec;
use crate::reduction::ThresholdRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Univariate,
    Multivariate,
    Both,
}

impl Mode {
    pub fn univariate(self) -> bool {
        matches!(self, Mode::Univariate | Mode::Both)
    }

    pub fn multivariate(self) -> bool {
        matches!(self, Mode::Multivariate | Mode::Both)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Univariate => "univariate",
            Mode::Multivariate => "multivariate",
            Mode::Both => "both",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "univariate" => Ok(Mode::Univariate),
            "multivariate" => Ok(Mode::Multivariate),
            "both" => Ok(Mode::Both),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderSelection {
    /// Forward-chaining cross-validation over the order grid.
    Cv,
    /// ACF differencing rule, then AIC.
    Aic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    Cv,
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveConfig {
    pub multiplier: f64,
    /// Samples of history kept for one-step forecasts.
    pub context: usize,
    pub lags: usize,
    /// Fit share used to measure out-of-sample RMS.
    pub holdout: f64,
    pub arima_max_order: usize,
    pub arima_folds: usize,
    pub arima_selection: OrderSelection,
    pub sarima_seasonal_max_order: usize,
    /// 0 estimates the period from the training series.
    pub sarima_period: usize,
    pub sarima_fallback_period: usize,
    pub stl_period: usize,
    pub stl_fallback_period: usize,
    pub stl_clip: f64,
    pub knn_k: usize,
    pub cart_max_depth: usize,
    pub cart_min_leaf: usize,
    /// `None` is an RBF with the median-distance width.
    pub krr_kernel: Option<KernelSpec>,
    pub krr_lambda: f64,
    pub krr_max_train: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionConfig {
    pub pca_explained: f64,
    pub pca_threshold: ThresholdRule,
    pub iforest_trees: usize,
    pub iforest_subsample: usize,
    pub iforest_threshold: ThresholdRule,
    /// Window length in grid cells.
    pub ae_window: usize,
    pub ae_hidden: usize,
    pub ae_epochs: usize,
    pub ae_learning_rate: f64,
    pub ae_threshold: ThresholdRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringConfig {
    /// 0 picks k by silhouette.
    pub kmeans_k: usize,
    pub kmeans_k_max: usize,
    pub kmeans_restarts: usize,
    pub kmeans_threshold: ThresholdRule,
    pub kmeans_silhouette_sample: usize,
    pub dbscan_min_pts: usize,
    /// 0 estimates eps from k-th neighbour distances.
    pub dbscan_eps: f64,
    pub dbscan_eps_quantile: f64,
    pub ocsvm_nu: f64,
    pub ocsvm_gamma: GammaChoice,
    pub ocsvm_max_train: usize,
    /// Exponent range of the power-of-two gamma grid.
    pub ocsvm_gamma_grid: (i32, i32),
    pub ocsvm_folds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub account: String,
    pub features: Vec<FeatureKind>,
    pub mode: Mode,
    /// Seconds.
    pub grid: i64,
    pub window: i64,
    pub stride: i64,
    pub retrain: i64,
    pub database: i64,
    pub train_ratio: f64,
    pub alarm: AlarmRule,
    pub detectors: Vec<DetectorKind>,
    pub seed: u64,
    pub keep_failed: bool,
    pub predictive: PredictiveConfig,
    pub reduction: ReductionConfig,
    pub clustering: ClusteringConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            account: String::new(),
            features: FeatureKind::ALL.to_vec(),
            mode: Mode::Both,
            grid: 60,
            window: 300,
            stride: 60,
            retrain: 345_600,
            database: 345_600,
            train_ratio: 0.7,
            alarm: AlarmRule::Any,
            detectors: DetectorKind::ALL.to_vec(),
            seed: 0,
            keep_failed: true,
            predictive: PredictiveConfig {
                multiplier: 3.0,
                context: 256,
                lags: 8,
                holdout: 0.8,
                arima_max_order: 3,
                arima_folds: 3,
                arima_selection: OrderSelection::Cv,
                sarima_seasonal_max_order: 1,
                sarima_period: 0,
                sarima_fallback_period: 24,
                stl_period: 0,
                stl_fallback_period: 24,
                stl_clip: 3.0,
                knn_k: 5,
                cart_max_depth: 4,
                cart_min_leaf: 10,
                krr_kernel: None,
                krr_lambda: 1.0,
                krr_max_train: 1500,
            },
            reduction: ReductionConfig {
                pca_explained: 0.9,
                pca_threshold: ThresholdRule::MeanStd(3.0),
                iforest_trees: 100,
                iforest_subsample: 256,
                iforest_threshold: ThresholdRule::Fixed(0.6),
                ae_window: 32,
                ae_hidden: 8,
                ae_epochs: 200,
                ae_learning_rate: 0.01,
                ae_threshold: ThresholdRule::MeanStd(3.0),
            },
            clustering: ClusteringConfig {
                kmeans_k: 0,
                kmeans_k_max: 10,
                kmeans_restarts: 4,
                kmeans_threshold: ThresholdRule::Quantile(0.99),
                kmeans_silhouette_sample: 1000,
                dbscan_min_pts: 4,
                dbscan_eps: 0.0,
                dbscan_eps_quantile: 0.95,
                ocsvm_nu: 0.05,
                ocsvm_gamma: GammaChoice::Cv,
                ocsvm_max_train: 2000,
                ocsvm_gamma_grid: (-15, 3),
                ocsvm_folds: 3,
            },
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn list<T: FromStr<Err = Error>>(v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip(e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// Sets one key; unknown keys are errors.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.predictive;
        let r = &mut self.reduction;
        let c = &mut self.clustering;
        match key {
            "account" => self.account = v.to_string(),
            "features" => self.features = list(v)?,
            "mode" => self.mode = v.parse()?,
            "grid" => self.grid = num(key, v)?,
            "window" => self.window = num(key, v)?,
            "stride" => self.stride = num(key, v)?,
            "retrain" => self.retrain = num(key, v)?,
            "database" => self.database = num(key, v)?,
            "train_ratio" => self.train_ratio = num(key, v)?,
            "alarm" => self.alarm = v.parse()?,
            "detectors" => {
                self.detectors = if v == "all" {
                    DetectorKind::ALL.to_vec()
                } else {
                    list(v)?
                }
            }
            "seed" => self.seed = num(key, v)?,
            "keep_failed" => self.keep_failed = num(key, v)?,
            "predictive.multiplier" => p.multiplier = num(key, v)?,
            "predictive.context" => p.context = num(key, v)?,
            "predictive.lags" => p.lags = num(key, v)?,
            "predictive.holdout" => p.holdout = num(key, v)?,
            "arima.max_order" => p.arima_max_order = num(key, v)?,
            "arima.folds" => p.arima_folds = num(key, v)?,
            "arima.selection" => {
                p.arima_selection = match v {
                    "cv" => OrderSelection::Cv,
                    "aic" => OrderSelection::Aic,
                    _ => return Err(Error::Config(format!("`{key}` must be cv or aic"))),
                }
            }
            "sarima.seasonal_max_order" => p.sarima_seasonal_max_order = num(key, v)?,
            "sarima.period" => p.sarima_period = num(key, v)?,
            "sarima.fallback_period" => p.sarima_fallback_period = num(key, v)?,
            "stl.period" => p.stl_period = num(key, v)?,
            "stl.fallback_period" => p.stl_fallback_period = num(key, v)?,
            "stl.clip" => p.stl_clip = num(key, v)?,
            "knn.k" => p.knn_k = num(key, v)?,
            "cart.max_depth" => p.cart_max_depth = num(key, v)?,
            "cart.min_leaf" => p.cart_min_leaf = num(key, v)?,
            "krr.kernel" => {
                p.krr_kernel = if v == "auto" {
                    None
                } else {
                    Some(v.parse().map_err(|e| Error::Config(strip(e)))?)
                }
            }
            "krr.lambda" => p.krr_lambda = num(key, v)?,
            "krr.max_train" => p.krr_max_train = num(key, v)?,
            "pca.explained" => r.pca_explained = num(key, v)?,
            "pca.threshold" => r.pca_threshold = v.parse()?,
            "iforest.trees" => r.iforest_trees = num(key, v)?,
            "iforest.subsample" => r.iforest_subsample = num(key, v)?,
            "iforest.threshold" => r.iforest_threshold = v.parse()?,
            "autoencoder.window" => r.ae_window = num(key, v)?,
            "autoencoder.hidden" => r.ae_hidden = num(key, v)?,
            "autoencoder.epochs" => r.ae_epochs = num(key, v)?,
            "autoencoder.learning_rate" => r.ae_learning_rate = num(key, v)?,
            "autoencoder.threshold" => r.ae_threshold = v.parse()?,
            "kmeans.k" => c.kmeans_k = num(key, v)?,
            "kmeans.k_max" => c.kmeans_k_max = num(key, v)?,
            "kmeans.restarts" => c.kmeans_restarts = num(key, v)?,
            "kmeans.threshold" => c.kmeans_threshold = v.parse()?,
            "kmeans.silhouette_sample" => c.kmeans_silhouette_sample = num(key, v)?,
            "dbscan.min_pts" => c.dbscan_min_pts = num(key, v)?,
            "dbscan.eps" => c.dbscan_eps = num(key, v)?,
            "dbscan.eps_quantile" => c.dbscan_eps_quantile = num(key, v)?,
            "ocsvm.nu" => c.ocsvm_nu = num(key, v)?,
            "ocsvm.gamma" => {
                c.ocsvm_gamma = match v {
                    "cv" => GammaChoice::Cv,
                    "auto" => GammaChoice::Auto,
                    _ => GammaChoice::Value(num(key, v)?),
                }
            }
            "ocsvm.max_train" => c.ocsvm_max_train = num(key, v)?,
            "ocsvm.gamma_grid" => {
                let (lo, hi) = v
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("`{key}` must look like lo:hi")))?;
                c.ocsvm_gamma_grid = (num(key, lo)?, num(key, hi)?);
            }
            "ocsvm.folds" => c.ocsvm_folds = num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.features.is_empty() {
            return bad("no features enabled");
        }
        if self.detectors.is_empty() {
            return bad("no detectors enabled");
        }
        if self.grid <= 0 || self.window <= 0 || self.stride <= 0 {
            return bad("grid, window and stride must be positive");
        }
        if self.window % self.grid != 0 || self.stride % self.grid != 0 {
            return bad("window and stride must be multiples of the grid");
        }
        if self.retrain <= 0 || self.database < self.grid {
            return bad("retrain must be positive and the database at least one cell");
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return bad("train_ratio must lie in (0, 1)");
        }
        let p = &self.predictive;
        if !(p.multiplier >= 0.0) || p.lags == 0 || p.context == 0 || p.knn_k == 0 || p.cart_min_leaf == 0 {
            return bad("predictive multiplier, lags, context, knn.k and cart.min_leaf must be positive");
        }
        if !(p.holdout > 0.0 && p.holdout < 1.0) {
            return bad("predictive.holdout must lie in (0, 1)");
        }
        if p.arima_max_order == 0 || p.arima_folds == 0 {
            return bad("arima.max_order and arima.folds must be positive");
        }
        let r = &self.reduction;
        if !(r.pca_explained > 0.0 && r.pca_explained <= 1.0) {
            return bad("pca.explained must lie in (0, 1]");
        }
        if r.ae_window < 2 || r.ae_hidden == 0 || !(r.ae_learning_rate > 0.0) {
            return bad("autoencoder window >= 2, hidden >= 1 and a positive learning rate are required");
        }
        let c = &self.clustering;
        if !(c.ocsvm_nu > 0.0 && c.ocsvm_nu <= 1.0) {
            return bad("ocsvm.nu must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&c.dbscan_eps_quantile) || c.dbscan_min_pts == 0 {
            return bad("dbscan.eps_quantile must lie in [0, 1] and min_pts be positive");
        }
        if c.ocsvm_gamma_grid.0 > c.ocsvm_gamma_grid.1 {
            return bad("ocsvm.gamma_grid must be lo:hi with lo <= hi");
        }
        Ok(())
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            keep_failed: self.keep_failed,
        }
    }

    /// Cells per sliding window.
    pub fn window_cells(&self) -> usize {
        (self.window / self.grid) as usize
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
