//! Nearest-neighbour regression on lag vectors.

use crate::error::{Error, Result};
use crate::linalg::sq_dist;

/// `(x_{t−lags..t}, x_t)` pairs for every `t >= lags`.
pub fn lag_pairs(values: &[f64], lags: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    if values.len() <= lags {
        return (Vec::new(), Vec::new());
    }
    let inputs = (lags..values.len()).map(|t| values[t - lags..t].to_vec()).collect();
    let targets = values[lags..].to_vec();
    (inputs, targets)
}

#[derive(Debug, Clone)]
pub struct KnnForecaster {
    pub lags: usize,
    pub k: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl KnnForecaster {
    pub fn fit(train: &[f64], lags: usize, k: usize) -> Result<Self> {
        if lags == 0 || k == 0 {
            return Err(Error::invalid("k-NN needs lags >= 1 and k >= 1"));
        }
        if train.len() <= lags {
            return Err(Error::invalid("k-NN training series must be longer than lags"));
        }
        let (inputs, targets) = lag_pairs(train, lags);
        if k > inputs.len() {
            return Err(Error::invalid(format!(
                "k = {k} exceeds the {} available lag pairs",
                inputs.len()
            )));
        }
        Ok(Self {
            lags,
            k,
            inputs,
            targets,
        })
    }

    pub fn pair_count(&self) -> usize {
        self.inputs.len()
    }

    fn predict_excluding(&self, context: &[f64], skip: Option<usize>) -> f64 {
        let mut d: Vec<(f64, usize)> = self
            .inputs
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(i, x)| (sq_dist(x, context), i))
            .collect();
        let k = self.k.min(d.len());
        // (distance, index) order breaks ties toward earlier pairs
        d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d[..k].iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / k as f64
    }

    /// Mean target of the `k` nearest lag vectors to `context`.
    pub fn predict(&self, context: &[f64]) -> Result<f64> {
        if context.len() != self.lags {
            return Err(Error::invalid(format!(
                "k-NN context must have {} values, got {}",
                self.lags,
                context.len()
            )));
        }
        Ok(self.predict_excluding(context, None))
    }

    /// Leave-one-out residuals over the training pairs.
    pub fn loo_residuals(&self) -> Vec<f64> {
        if self.inputs.len() < 2 {
            return vec![0.0; self.inputs.len()];
        }
        crate::par::map_range(self.inputs.len(), |i| {
            self.targets[i] - self.predict_excluding(&self.inputs[i], Some(i))
        })
    }
}

/// One-shot form: fit on `train` and predict from `context`.
pub fn knn_forecast(train: &[f64], lags: usize, k: usize, context: &[f64]) -> Result<f64> {
    KnnForecaster::fit(train, lags, k)?.predict(context)
}
