//! Order selection: forward-chaining cross-validation over the order grid,
//! and the unsupervised ACF/AIC path.

use super::arima::{ArimaModel, ArimaOrder};
use crate::error::{Error, Result};
use crate::par;
use crate::series::{acf, difference};

/// Seasonal part of the search grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonalSearch {
    pub period: usize,
    pub max_order: usize,
}

#[derive(Debug, Clone)]
pub struct OrderSearch {
    pub order: ArimaOrder,
    /// Mean one-step squared error of the winner.
    pub score: f64,
    pub evaluated: usize,
    pub failures: Vec<(ArimaOrder, String)>,
}

/// `p, q ∈ [1, max]`, `d ∈ [0, max − 1]`, and the same for `(P, D, Q)`
/// when a seasonal search is given.
pub fn candidate_orders(max_order: usize, seasonal: Option<SeasonalSearch>) -> Vec<ArimaOrder> {
    let mut out = Vec::new();
    for p in 1..=max_order {
        for d in 0..max_order {
            for q in 1..=max_order {
                let base = ArimaOrder::new(p, d, q);
                match seasonal {
                    None => out.push(base),
                    Some(s) => {
                        for sp in 1..=s.max_order {
                            for sd in 0..s.max_order {
                                for sq in 1..=s.max_order {
                                    out.push(base.with_seasonal(sp, sd, sq, s.period));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Mean one-step squared error over `folds` expanding-window splits.
pub fn cv_score(train: &[f64], order: ArimaOrder, folds: usize) -> Result<f64> {
    let n = train.len();
    let block = n / (folds + 1);
    if folds == 0 || block == 0 {
        return Err(Error::invalid("cross-validation needs folds >= 1 and enough data"));
    }
    let mut total = 0.0;
    for f in 1..=folds {
        let cut = f * block;
        let end = if f == folds { n } else { cut + block };
        let model = ArimaModel::fit(&train[..cut], order)?;
        let errs = model.one_step_errors(&train[..end], cut)?;
        if errs.is_empty() {
            return Err(Error::invalid("validation block shorter than model history"));
        }
        total += errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64;
    }
    let score = total / folds as f64;
    if !score.is_finite() {
        return Err(Error::numeric("cross-validation error is not finite"));
    }
    Ok(score)
}

/// CV errors within this relative distance of the best count as tied;
/// nested orders otherwise win on fold noise alone.
pub const TIE_TOLERANCE: f64 = 0.01;

fn tie_key(o: &ArimaOrder) -> (usize, usize) {
    (o.coefficient_count(), o.p)
}

/// Cross-validated grid search, seasonal when `seasonal` is given.
pub fn grid_search(
    train: &[f64],
    max_order: usize,
    folds: usize,
    seasonal: Option<SeasonalSearch>,
) -> Result<OrderSearch> {
    if max_order == 0 {
        return Err(Error::invalid("max_order must be at least 1"));
    }
    if seasonal.is_some_and(|s| s.max_order == 0) {
        return Err(Error::invalid("seasonal max_order must be at least 1"));
    }
    let candidates = candidate_orders(max_order, seasonal);
    let scores = par::map_slice(&candidates, |o| cv_score(train, *o, folds));
    let mut scored = Vec::new();
    let mut failures = Vec::new();
    for (o, s) in candidates.iter().zip(scores) {
        match s {
            Ok(s) => scored.push((*o, s)),
            Err(e) => failures.push((*o, e.to_string())),
        }
    }
    let floor = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let best = scored
        .into_iter()
        .filter(|s| s.1 <= floor * (1.0 + TIE_TOLERANCE))
        .min_by(|a, b| tie_key(&a.0).cmp(&tie_key(&b.0)).then(a.1.total_cmp(&b.1)));
    match best {
        Some((order, score)) => Ok(OrderSearch {
            order,
            score,
            evaluated: candidates.len(),
            failures,
        }),
        None => {
            let list: Vec<String> = failures.iter().map(|(o, e)| format!("{o}: {e}")).collect();
            Err(Error::fit(format!("every candidate order failed: {}", list.join("; "))))
        }
    }
}

pub fn grid_search_order(train: &[f64], max_order: usize, folds: usize) -> Result<ArimaOrder> {
    grid_search(train, max_order, folds, None).map(|s| s.order)
}

/// Differencing order from the ACF: difference while the lag-1
/// autocorrelation stays above 0.9, up to `max_d`.
pub fn select_d_acf(values: &[f64], max_d: usize) -> usize {
    let mut d = 0;
    while d < max_d {
        let Ok(w) = difference(values, d) else { break };
        match acf(&w, 1) {
            Ok(r) if r[1] > 0.9 => d += 1,
            _ => break,
        }
    }
    d
}

/// `n·ln(SSE/n) + 2·(k + 1)` over residuals from a common start index.
pub fn aic(residuals: &[f64], coefficients: usize) -> f64 {
    let n = residuals.len() as f64;
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    n * (sse / n).ln() + 2.0 * (coefficients + 1) as f64
}

/// Unsupervised path: `d` from the ACF, then `(p, q)` in `[1, max]²` by
/// minimum AIC.
pub fn select_order_aic(train: &[f64], max_order: usize) -> Result<ArimaOrder> {
    if max_order == 0 {
        return Err(Error::invalid("max_order must be at least 1"));
    }
    let d = select_d_acf(train, max_order - 1);
    let start = d + max_order;
    let candidates: Vec<ArimaOrder> = (1..=max_order)
        .flat_map(|p| (1..=max_order).map(move |q| ArimaOrder::new(p, d, q)))
        .collect();
    let scored = par::map_slice(&candidates, |o| -> Result<f64> {
        let m = ArimaModel::fit(train, *o)?;
        let e = m.one_step_errors(train, start)?;
        let v = aic(&e, o.coefficient_count());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::numeric("AIC not finite"))
        }
    });
    let mut best: Option<(ArimaOrder, f64)> = None;
    let mut failures = Vec::new();
    for (o, s) in candidates.iter().zip(scored) {
        match s {
            Ok(s) => {
                if best.is_none_or(|(bo, bs)| s < bs || (s == bs && tie_key(o) < tie_key(&bo))) {
                    best = Some((*o, s));
                }
            }
            Err(e) => failures.push(format!("{o}: {e}")),
        }
    }
    best.map(|b| b.0)
        .ok_or_else(|| Error::fit(format!("every candidate order failed: {}", failures.join("; "))))
}
