//! STL-like classical additive decomposition: centered moving-average
//! trend, per-phase seasonal means, and the remainder.

use crate::error::{Error, Result};
use crate::linalg::quantile;

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
    pub period: usize,
}

/// Centered moving average; `None` where the window does not fit.
fn centered_average(values: &[f64], period: usize) -> Vec<Option<f64>> {
    let n = values.len();
    let half = period / 2;
    let mut out = vec![None; n];
    if n <= 2 * half {
        return out;
    }
    for (t, slot) in out.iter_mut().enumerate().take(n - half).skip(half) {
        let v = if period % 2 == 1 {
            values[t - half..=t + half].iter().sum::<f64>() / period as f64
        } else {
            // 2×period average: half weight on the two end points
            let inner: f64 = values[t - half + 1..t + half].iter().sum();
            (inner + 0.5 * (values[t - half] + values[t + half])) / period as f64
        };
        *slot = Some(v);
    }
    out
}

pub fn stl_decompose(values: &[f64], period: usize) -> Result<Decomposition> {
    if period < 2 {
        return Err(Error::invalid("decomposition period must be at least 2"));
    }
    if values.len() < 2 * period {
        return Err(Error::invalid(format!(
            "decomposition needs at least {} points, got {}",
            2 * period,
            values.len()
        )));
    }
    let n = values.len();
    let avg = centered_average(values, period);
    let first = avg.iter().position(Option::is_some).expect("interior exists");
    let last = avg.iter().rposition(Option::is_some).expect("interior exists");
    let trend: Vec<f64> = (0..n)
        .map(|t| avg[t].unwrap_or_else(|| avg[t.clamp(first, last)].unwrap()))
        .collect();

    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for t in first..=last {
        sums[t % period] += values[t] - trend[t];
        counts[t % period] += 1;
    }
    // phases never seen in the interior fall back to all positions
    for ph in 0..period {
        if counts[ph] == 0 {
            for t in (ph..n).step_by(period) {
                sums[ph] += values[t] - trend[t];
                counts[ph] += 1;
            }
        }
    }
    let mut phase: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let center = phase.iter().sum::<f64>() / period as f64;
    phase.iter_mut().for_each(|p| *p -= center);

    let seasonal: Vec<f64> = (0..n).map(|t| phase[t % period]).collect();
    let residual: Vec<f64> = (0..n).map(|t| values[t] - trend[t] - seasonal[t]).collect();
    Ok(Decomposition {
        trend,
        seasonal,
        residual,
        period,
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Running-median trend and per-phase median season: a rough fit that a
/// single spike cannot drag.
fn median_fit(values: &[f64], period: usize) -> Vec<f64> {
    let n = values.len();
    let half = period / 2;
    let trend: Vec<f64> = (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(n - 1);
            median(&mut values[lo..=hi].to_vec())
        })
        .collect();
    let mut phase: Vec<f64> = (0..period)
        .map(|ph| {
            let mut d: Vec<f64> = (ph..n).step_by(period).map(|t| values[t] - trend[t]).collect();
            median(&mut d)
        })
        .collect();
    let center = phase.iter().sum::<f64>() / period as f64;
    phase.iter_mut().for_each(|p| *p -= center);
    (0..n).map(|t| trend[t] + phase[t % period]).collect()
}

/// Decomposition with outlier rejection. Outliers are points whose
/// residual exceeds `clip`·(1.4826·MAD), judged first against a median
/// fit and then against the classical fit of the cleaned series; they are
/// replaced by their fitted value and the decomposition recomputed, so an
/// isolated spike does not leak into its neighbours. Residuals are
/// reported against the original values.
pub fn stl_decompose_robust(values: &[f64], period: usize, clip: f64) -> Result<Decomposition> {
    let mut d = stl_decompose(values, period)?;
    let mut fitted = median_fit(values, period);
    let magnitude = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(magnitude > 0.0) {
        return Ok(d);
    }
    for _ in 0..ROBUST_PASSES {
        let abs: Vec<f64> = values.iter().zip(&fitted).map(|(x, f)| (x - f).abs()).collect();
        // exact fits still need a floor to tell a spike from rounding
        let scale = (1.4826 * quantile(&abs, 0.5)).max(1e-9 * magnitude);
        let bound = clip * scale;
        let cleaned: Vec<f64> = (0..values.len())
            .map(|t| if abs[t] > bound { fitted[t] } else { values[t] })
            .collect();
        d = stl_decompose(&cleaned, period)?;
        for (t, r) in d.residual.iter_mut().enumerate() {
            *r = values[t] - d.trend[t] - d.seasonal[t];
        }
        fitted = (0..values.len()).map(|t| d.trend[t] + d.seasonal[t]).collect();
    }
    Ok(d)
}

const ROBUST_PASSES: usize = 6;
