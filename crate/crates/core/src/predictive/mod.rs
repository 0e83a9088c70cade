//! Predictive detector bank. Every member turns a one-step residual into
//! a flag with the `|residual| > m·RMS` rule, RMS taken from its fit.

pub mod arima;
pub mod cart;
pub mod knn;
pub mod order;
pub mod stl;

pub use arima::{ArimaModel, ArimaOrder, SeasonalOrder};
pub use cart::{cart_forecast, CartForecaster, RegressionTree};
pub use knn::{knn_forecast, lag_pairs, KnnForecaster};
pub use order::{grid_search, grid_search_order, select_order_aic, OrderSearch, SeasonalSearch};
pub use stl::{stl_decompose, stl_decompose_robust, Decomposition};

use crate::error::{Error, Result};
use crate::kernels::{default_gamma, KernelRidge, KernelSpec};
use crate::series::{rms, Standardizer};

/// `|actual − prediction| > multiplier·rms`. With `rms == 0` any nonzero
/// residual flags.
pub fn residual_threshold_detect(
    predictions: &[f64],
    actuals: &[f64],
    rms: f64,
    multiplier: f64,
) -> Result<Vec<bool>> {
    if predictions.len() != actuals.len() {
        return Err(Error::invalid("predictions and actuals differ in length"));
    }
    if !(rms >= 0.0) || !(multiplier >= 0.0) {
        return Err(Error::invalid("rms and multiplier must be non-negative"));
    }
    Ok(predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| exceeds((a - p).abs(), rms, multiplier))
        .collect())
}

#[inline]
pub fn exceeds(abs_residual: f64, rms: f64, multiplier: f64) -> bool {
    abs_residual > multiplier * rms
}

/// One-step residual of a new value given everything before it.
pub trait ResidualModel: Send + Sync {
    /// Trailing history the model looks at; longer histories are cut.
    fn context(&self) -> usize;
    fn residual(&self, history: &[f64], actual: f64) -> Result<f64>;
}

fn tail(history: &[f64], n: usize) -> &[f64] {
    &history[history.len().saturating_sub(n)..]
}

/// ARIMA/SARIMA one-step forecaster with a bounded context.
#[derive(Debug, Clone)]
pub struct ArimaScorer {
    pub model: ArimaModel,
    pub context: usize,
}

impl ResidualModel for ArimaScorer {
    fn context(&self) -> usize {
        self.context.max(self.model.min_history())
    }

    fn residual(&self, history: &[f64], actual: f64) -> Result<f64> {
        let h = tail(history, self.context());
        Ok(actual - self.model.forecast_one_step(h)?)
    }
}

/// Remainder of the robust decomposition of the trailing context with the
/// new value appended.
#[derive(Debug, Clone)]
pub struct StlScorer {
    pub period: usize,
    pub span: usize,
    pub clip: f64,
}

impl StlScorer {
    pub fn new(period: usize, clip: f64) -> Self {
        Self {
            period,
            span: (4 * period).max(2 * period + 1),
            clip,
        }
    }

    /// Edge residuals for every position past the first `span` values.
    pub fn training_residuals(&self, values: &[f64]) -> Result<Vec<f64>> {
        (self.span..values.len())
            .map(|t| self.residual(&values[..t], values[t]))
            .collect()
    }
}

impl ResidualModel for StlScorer {
    fn context(&self) -> usize {
        self.span
    }

    fn residual(&self, history: &[f64], actual: f64) -> Result<f64> {
        let mut v = tail(history, self.span).to_vec();
        v.push(actual);
        let d = stl_decompose_robust(&v, self.period, self.clip)?;
        Ok(*d.residual.last().unwrap())
    }
}

impl ResidualModel for KnnForecaster {
    fn context(&self) -> usize {
        self.lags
    }

    fn residual(&self, history: &[f64], actual: f64) -> Result<f64> {
        if history.len() < self.lags {
            return Err(Error::invalid("k-NN history shorter than lags"));
        }
        Ok(actual - self.predict(tail(history, self.lags))?)
    }
}

impl ResidualModel for CartForecaster {
    fn context(&self) -> usize {
        self.lags
    }

    fn residual(&self, history: &[f64], actual: f64) -> Result<f64> {
        if history.len() < self.lags {
            return Err(Error::invalid("tree history shorter than lags"));
        }
        Ok(actual - self.predict(tail(history, self.lags))?)
    }
}

/// Kernel ridge on standardized lag vectors with centered targets.
#[derive(Debug, Clone)]
pub struct KrrForecaster {
    pub lags: usize,
    pub scaler: Standardizer,
    pub offset: f64,
    pub ridge: KernelRidge,
}

impl KrrForecaster {
    /// `kernel = None` selects an RBF with the default width.
    pub fn fit(train: &[f64], lags: usize, kernel: Option<KernelSpec>, lambda: f64, max_pairs: usize) -> Result<Self> {
        if lags == 0 || train.len() <= lags {
            return Err(Error::invalid("kernel ridge training series must be longer than lags"));
        }
        let (mut inputs, mut targets) = lag_pairs(train, lags);
        if inputs.len() > max_pairs {
            let cut = inputs.len() - max_pairs;
            inputs.drain(..cut);
            targets.drain(..cut);
        }
        let scaler = Standardizer::fit(&inputs);
        let z = scaler.apply_all(&inputs);
        let offset = targets.iter().sum::<f64>() / targets.len() as f64;
        let centered: Vec<f64> = targets.iter().map(|t| t - offset).collect();
        let spec = kernel.unwrap_or_else(|| KernelSpec::Rbf {
            gamma: default_gamma(&z),
        });
        let ridge = KernelRidge::fit(&z, &centered, spec, lambda)?;
        Ok(Self {
            lags,
            scaler,
            offset,
            ridge,
        })
    }

    pub fn predict(&self, context: &[f64]) -> Result<f64> {
        if context.len() != self.lags {
            return Err(Error::invalid("kernel ridge context has the wrong length"));
        }
        Ok(self.offset + self.ridge.predict(&self.scaler.apply(context)))
    }
}

impl ResidualModel for KrrForecaster {
    fn context(&self) -> usize {
        self.lags
    }

    fn residual(&self, history: &[f64], actual: f64) -> Result<f64> {
        if history.len() < self.lags {
            return Err(Error::invalid("kernel ridge history shorter than lags"));
        }
        Ok(actual - self.predict(tail(history, self.lags))?)
    }
}

/// Residuals of `model` on `values[from..]`, each from its own history.
pub fn rolling_residuals(model: &dyn ResidualModel, values: &[f64], from: usize) -> Result<Vec<f64>> {
    (from.max(model.context())..values.len())
        .map(|t| model.residual(&values[..t], values[t]))
        .collect()
}

/// Out-of-sample RMS: fit on the first `ratio` share of `values`, score
/// the rest.
pub fn holdout_rms<M, F>(values: &[f64], ratio: f64, fit: F) -> Result<f64>
where
    M: ResidualModel,
    F: Fn(&[f64]) -> Result<M>,
{
    let cut = crate::series::train_len(values.len(), ratio)?;
    let model = fit(&values[..cut])?;
    let r = rolling_residuals(&model, values, cut)?;
    rms(&r)
}
