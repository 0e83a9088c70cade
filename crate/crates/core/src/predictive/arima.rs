//! Seasonal ARIMA with Box–Jenkins sign conventions:
//!
//! ```text
//! (1 − Σφᵢ Bⁱ)(1 − ΣΦⱼ B^{js}) ∇^d ∇ₛ^D x_t = c + (1 − Σθᵢ Bⁱ)(1 − ΣΘⱼ B^{js}) ε_t
//! ```
//!
//! Coefficients come from the Hannan–Rissanen two-stage regression,
//! followed by one Gauss–Newton pass on the conditional sum of squares.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::series::seasonal_difference;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeasonalOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub period: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub seasonal: Option<SeasonalOrder>,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            seasonal: None,
        }
    }

    pub fn with_seasonal(self, p: usize, d: usize, q: usize, period: usize) -> Self {
        Self {
            seasonal: Some(SeasonalOrder { p, d, q, period }),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p + self.q == 0 && self.d == 0 && self.seasonal.is_none() {
            return Err(Error::invalid("ARIMA order needs p + q >= 1 or d >= 1"));
        }
        if let Some(s) = self.seasonal {
            if s.period < 2 {
                return Err(Error::invalid("seasonal period must be at least 2"));
            }
            if s.p + s.q == 0 && s.d == 0 {
                return Err(Error::invalid("seasonal order needs P + Q >= 1 or D >= 1"));
            }
        }
        Ok(())
    }

    /// Seasonal (P, D, Q, s), zero when absent.
    fn seasonal_parts(&self) -> (usize, usize, usize, usize) {
        self.seasonal.map_or((0, 0, 0, 1), |s| (s.p, s.d, s.q, s.period))
    }

    /// Number of estimated coefficients, excluding the intercept.
    pub fn coefficient_count(&self) -> usize {
        let (sp, _, sq, _) = self.seasonal_parts();
        self.p + self.q + sp + sq
    }

    /// Values consumed by differencing.
    pub fn differencing_lag(&self) -> usize {
        let (_, sd, _, s) = self.seasonal_parts();
        self.d + sd * s
    }

    fn ar_span(&self) -> usize {
        let (sp, _, _, s) = self.seasonal_parts();
        self.p + sp * s
    }

    fn ma_span(&self) -> usize {
        let (_, _, sq, s) = self.seasonal_parts();
        self.q + sq * s
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)?;
        if let Some(s) = self.seasonal {
            write!(f, "({},{},{})[{}]", s.p, s.d, s.q, s.period)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub seasonal_phi: Vec<f64>,
    pub seasonal_theta: Vec<f64>,
    pub intercept: f64,
    pub residual_rms: f64,
}

/// `(1 − Σ aᵢ Bⁱ)(1 − Σ bⱼ B^{js})` as lag weights `l_k` in `1 − Σ l_k B^k`
/// (index 0 unused).
fn lag_weights(short: &[f64], seasonal: &[f64], period: usize) -> Vec<f64> {
    let len = short.len() + seasonal.len() * period + 1;
    let mut a = vec![0.0; short.len() + 1];
    a[0] = 1.0;
    for (i, c) in short.iter().enumerate() {
        a[i + 1] = -c;
    }
    let mut b = vec![0.0; seasonal.len() * period + 1];
    b[0] = 1.0;
    for (j, c) in seasonal.iter().enumerate() {
        b[(j + 1) * period] = -c;
    }
    let mut prod = vec![0.0; len];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            prod[i + j] += ai * bj;
        }
    }
    prod.iter_mut().skip(1).for_each(|v| *v = -*v);
    prod[0] = 0.0;
    prod
}

/// Weights `δ_k` with `x_t = w_t + Σ δ_k x_{t−k}` for the differencing
/// operator `(1 − B)^d (1 − B^s)^D`.
fn differencing_weights(d: usize, sd: usize, period: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut mul = |lag: usize| {
        let mut next = vec![0.0; poly.len() + lag];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + lag] -= c;
        }
        poly = next;
    };
    for _ in 0..d {
        mul(1);
    }
    for _ in 0..sd {
        mul(period);
    }
    poly.iter_mut().skip(1).for_each(|v| *v = -*v);
    poly[0] = 0.0;
    poly
}

pub(crate) fn apply_differencing(values: &[f64], order: &ArimaOrder) -> Result<Vec<f64>> {
    let (_, sd, _, s) = order.seasonal_parts();
    let w = if sd > 0 {
        seasonal_difference(values, s, sd)?
    } else {
        values.to_vec()
    };
    if order.d > 0 {
        seasonal_difference(&w, 1, order.d)
    } else {
        Ok(w)
    }
}

#[derive(Debug, Clone)]
struct Params {
    intercept: f64,
    phi: Vec<f64>,
    sphi: Vec<f64>,
    theta: Vec<f64>,
    stheta: Vec<f64>,
}

impl Params {
    fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.intercept];
        v.extend(&self.phi);
        v.extend(&self.sphi);
        v.extend(&self.theta);
        v.extend(&self.stheta);
        v
    }

    fn from_vec(v: &[f64], order: &ArimaOrder) -> Self {
        let (sp, _, sq, _) = order.seasonal_parts();
        let mut it = v.iter().copied();
        let intercept = it.next().unwrap_or(0.0);
        let mut take = |k: usize| -> Vec<f64> { (0..k).map(|_| it.next().unwrap_or(0.0)).collect() };
        let phi = take(order.p);
        let sphi = take(sp);
        let theta = take(order.q);
        let stheta = take(sq);
        Self {
            intercept,
            phi,
            sphi,
            theta,
            stheta,
        }
    }
}

/// Conditional residuals of the differenced series: ε_t = 0 until enough
/// AR history exists.
fn css_residuals(w: &[f64], intercept: f64, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let start = ar.len().saturating_sub(1);
    let mut eps = vec![0.0; w.len()];
    for t in start..w.len() {
        let mut pred = intercept;
        for (k, a) in ar.iter().enumerate().skip(1) {
            if *a != 0.0 {
                pred += a * w[t - k];
            }
        }
        for (k, m) in ma.iter().enumerate().skip(1) {
            if *m != 0.0 && t >= k {
                pred -= m * eps[t - k];
            }
        }
        eps[t] = w[t] - pred;
    }
    eps
}

fn css(w: &[f64], params: &Params, order: &ArimaOrder) -> (Vec<f64>, f64) {
    let (_, _, _, s) = order.seasonal_parts();
    let ar = lag_weights(&params.phi, &params.sphi, s);
    let ma = lag_weights(&params.theta, &params.stheta, s);
    let eps = css_residuals(w, params.intercept, &ar, &ma);
    let start = order.ar_span();
    let sse = eps[start..].iter().map(|e| e * e).sum();
    (eps, sse)
}

fn regress(rows: Vec<Vec<f64>>, target: Vec<f64>) -> Result<Vec<f64>> {
    lstsq(&rows, &target)
}

impl ArimaModel {
    /// Fits the model to `values` (original scale).
    pub fn fit(values: &[f64], order: ArimaOrder) -> Result<Self> {
        order.validate()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("ARIMA fit: non-finite input"));
        }
        let w = apply_differencing(values, &order)?;
        let n = w.len();
        let k = order.coefficient_count() + 1;
        if n < 10 * k || n <= 2 * (order.ar_span() + order.ma_span()) {
            return Err(Error::invalid(format!(
                "ARIMA{order}: {n} differenced points is too few (need >= {})",
                (10 * k).max(2 * (order.ar_span() + order.ma_span()) + 1)
            )));
        }
        let (sp, _, sq, s) = order.seasonal_parts();

        // stage 1: long autoregression for residual proxies
        let has_ma = order.q + sq > 0;
        let eps_hat = if has_ma {
            let long = ((10.0 * (n as f64).log10()).ceil() as usize)
                .max(order.ma_span() + 1)
                .min(n / 4)
                .max(1);
            let rows: Vec<Vec<f64>> = (long..n)
                .map(|t| {
                    let mut r = vec![1.0];
                    r.extend((1..=long).map(|j| w[t - j]));
                    r
                })
                .collect();
            let coef = regress(rows, w[long..].to_vec())?;
            let mut e = vec![0.0; n];
            for t in long..n {
                let pred = coef[0] + (1..=long).map(|j| coef[j] * w[t - j]).sum::<f64>();
                e[t] = w[t] - pred;
            }
            Some((long, e))
        } else {
            None
        };

        // stage 2: regression on lags and lagged residual proxies
        let offset = eps_hat.as_ref().map_or(0, |(l, _)| *l);
        let first = offset + order.ar_span().max(order.ma_span());
        let rows: Vec<Vec<f64>> = (first..n)
            .map(|t| {
                let mut r = vec![1.0];
                r.extend((1..=order.p).map(|i| w[t - i]));
                r.extend((1..=sp).map(|j| w[t - j * s]));
                if let Some((_, e)) = &eps_hat {
                    r.extend((1..=order.q).map(|i| -e[t - i]));
                    r.extend((1..=sq).map(|j| -e[t - j * s]));
                }
                r
            })
            .collect();
        let coef = regress(rows, w[first..].to_vec())?;
        let mut params = Params::from_vec(&coef, &order);

        // one Gauss–Newton pass on the conditional sum of squares
        let (eps0, sse0) = css(&w, &params, &order);
        if sse0 > 0.0 && sse0.is_finite() {
            if let Some(better) = gauss_newton_step(&w, &params, &order, &eps0, sse0) {
                params = better;
            }
        }
        let (eps, sse) = css(&w, &params, &order);
        if !sse.is_finite() {
            return Err(Error::numeric(format!("ARIMA{order}: residuals diverged")));
        }
        let start = order.ar_span();
        let residual_rms = (sse / (eps.len() - start) as f64).sqrt();
        let model = Self {
            order,
            phi: params.phi,
            theta: params.theta,
            seasonal_phi: params.sphi,
            seasonal_theta: params.stheta,
            intercept: params.intercept,
            residual_rms,
        };
        if model.coefficients().any(|c| !c.is_finite()) {
            return Err(Error::numeric(format!("ARIMA{order}: non-finite coefficients")));
        }
        Ok(model)
    }

    fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.intercept)
            .chain(self.phi.iter().copied())
            .chain(self.theta.iter().copied())
            .chain(self.seasonal_phi.iter().copied())
            .chain(self.seasonal_theta.iter().copied())
            .chain(std::iter::once(self.residual_rms))
    }

    fn period(&self) -> usize {
        self.order.seasonal_parts().3
    }

    /// Minimum history for a one-step forecast.
    pub fn min_history(&self) -> usize {
        self.order.differencing_lag() + self.order.ar_span()
    }

    /// Predicts the value following `history` on the original scale.
    pub fn forecast_one_step(&self, history: &[f64]) -> Result<f64> {
        if history.len() < self.min_history() {
            return Err(Error::invalid(format!(
                "ARIMA{} forecast needs {} values of history, got {}",
                self.order,
                self.min_history(),
                history.len()
            )));
        }
        let s = self.period();
        let w = apply_differencing_lenient(history, &self.order);
        let ar = lag_weights(&self.phi, &self.seasonal_phi, s);
        let ma = lag_weights(&self.theta, &self.seasonal_theta, s);
        let eps = css_residuals(&w, self.intercept, &ar, &ma);
        let t = w.len();
        let mut next_w = self.intercept;
        for (k, a) in ar.iter().enumerate().skip(1) {
            next_w += a * w[t - k];
        }
        for (k, m) in ma.iter().enumerate().skip(1) {
            if t >= k {
                next_w -= m * eps[t - k];
            }
        }
        let (_, sd, _, _) = self.order.seasonal_parts();
        let delta = differencing_weights(self.order.d, sd, s);
        let n = history.len();
        let mut x = next_w;
        for (k, dk) in delta.iter().enumerate().skip(1) {
            x += dk * history[n - k];
        }
        if !x.is_finite() {
            return Err(Error::numeric("ARIMA forecast is not finite"));
        }
        Ok(x)
    }

    /// One-step forecast errors `x_t − x̂_t` for every `t >= from` in
    /// `values`, each forecast using all earlier values.
    pub fn one_step_errors(&self, values: &[f64], from: usize) -> Result<Vec<f64>> {
        let lag = self.order.differencing_lag();
        let from = from.max(self.min_history());
        let w = apply_differencing(values, &self.order)?;
        let s = self.period();
        let ar = lag_weights(&self.phi, &self.seasonal_phi, s);
        let ma = lag_weights(&self.theta, &self.seasonal_theta, s);
        let eps = css_residuals(&w, self.intercept, &ar, &ma);
        Ok((from..values.len()).map(|t| eps[t - lag]).collect())
    }
}

fn apply_differencing_lenient(values: &[f64], order: &ArimaOrder) -> Vec<f64> {
    if values.len() <= order.differencing_lag() {
        return Vec::new();
    }
    apply_differencing(values, order).unwrap_or_default()
}

fn gauss_newton_step(w: &[f64], params: &Params, order: &ArimaOrder, eps: &[f64], sse: f64) -> Option<Params> {
    let base = params.to_vec();
    let start = order.ar_span();
    let m = eps.len() - start;
    let k = base.len();
    // jacobian of the residuals, central differences
    let mut jac = vec![vec![0.0; k]; m];
    for j in 0..k {
        let h = 1e-6 * base[j].abs().max(1.0);
        let mut hi = base.clone();
        hi[j] += h;
        let mut lo = base.clone();
        lo[j] -= h;
        let (e_hi, _) = css(w, &Params::from_vec(&hi, order), order);
        let (e_lo, _) = css(w, &Params::from_vec(&lo, order), order);
        for (row, (a, b)) in jac.iter_mut().zip(e_hi[start..].iter().zip(&e_lo[start..])) {
            row[j] = (a - b) / (2.0 * h);
        }
    }
    if jac.iter().flatten().any(|v| !v.is_finite()) {
        return None;
    }
    let rhs: Vec<f64> = eps[start..].iter().map(|e| -e).collect();
    let delta = lstsq(&jac, &rhs).ok()?;
    let mut scale = 1.0;
    for _ in 0..10 {
        let trial: Vec<f64> = base.iter().zip(&delta).map(|(b, d)| b + scale * d).collect();
        let p = Params::from_vec(&trial, order);
        let (_, trial_sse) = css(w, &p, order);
        if trial_sse.is_finite() && trial_sse < sse {
            return Some(p);
        }
        scale *= 0.5;
    }
    None
}
