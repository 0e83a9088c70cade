//! Series representations and the statistical primitives the detectors
//! share: merging, grid resampling, sliding windows, chronological
//! splits, differencing, autocorrelation, period estimation, RMS and
//! column standardization.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Indexed by transaction; timestamps non-decreasing.
    Sample,
    /// Uniform wall-clock grid, `t_i = t_0 + i·step`.
    Time { step: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub points: Vec<(i64, f64)>,
    pub domain: Domain,
}

impl TimeSeries {
    pub fn sample(points: Vec<(i64, f64)>) -> Self {
        Self {
            points,
            domain: Domain::Sample,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.points.iter().map(|p| p.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start: i64,
    /// Seconds.
    pub duration: i64,
    pub values: Vec<f64>,
}

/// Sums points that share a timestamp.
pub fn merge_cooccurring(series: &TimeSeries) -> TimeSeries {
    let mut points: Vec<(i64, f64)> = Vec::with_capacity(series.len());
    for &(t, v) in &series.points {
        match points.last_mut() {
            Some(last) if last.0 == t => last.1 += v,
            _ => points.push((t, v)),
        }
    }
    TimeSeries {
        points,
        domain: series.domain,
    }
}

/// Start of the grid cell containing `t`.
#[inline]
pub fn cell_start(t: i64, step: i64) -> i64 {
    t.div_euclid(step) * step
}

/// Bins a merged sample series onto a uniform grid of `step` seconds.
/// Each cell holds the sum of the samples in `[cell, cell + step)`;
/// empty cells are zero.
pub fn resample(series: &TimeSeries, step: i64) -> Result<TimeSeries> {
    if step <= 0 {
        return Err(Error::invalid("resample step must be positive"));
    }
    let (first, last) = match (series.points.first(), series.points.last()) {
        (Some(f), Some(l)) => (f.0, l.0),
        _ => return Err(Error::invalid("cannot resample an empty series")),
    };
    let t0 = cell_start(first, step);
    let n = ((cell_start(last, step) - t0) / step) as usize + 1;
    let mut values = vec![0.0; n];
    for &(t, v) in &series.points {
        values[((t - t0) / step) as usize] += v;
    }
    Ok(TimeSeries {
        points: values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (t0 + i as i64 * step, v))
            .collect(),
        domain: Domain::Time { step },
    })
}

/// Overlapping windows over a time-domain series. `duration` and `stride`
/// are seconds and must be positive multiples of the grid step.
pub fn sliding_windows(series: &TimeSeries, duration: i64, stride: i64) -> Result<Vec<Window>> {
    let step = match series.domain {
        Domain::Time { step } => step,
        Domain::Sample => {
            return Err(Error::invalid("sliding windows need a time-domain series"))
        }
    };
    if duration <= 0 || stride <= 0 || duration % step != 0 || stride % step != 0 {
        return Err(Error::invalid(
            "window duration and stride must be positive multiples of the grid step",
        ));
    }
    let width = (duration / step) as usize;
    let hop = (stride / step) as usize;
    let n = series.len();
    if width > n {
        return Ok(Vec::new());
    }
    Ok((0..=(n - width) / hop)
        .map(|k| {
            let lo = k * hop;
            Window {
                start: series.points[lo].0,
                duration,
                values: series.points[lo..lo + width].iter().map(|p| p.1).collect(),
            }
        })
        .collect())
}

/// Number of leading items that form the training prefix.
pub fn train_len(n: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid("split ratio must lie in (0, 1)"));
    }
    if n < 2 {
        return Err(Error::invalid("need at least two points to split"));
    }
    Ok(((ratio * n as f64).round() as usize).clamp(1, n - 1))
}

/// Chronological prefix/suffix split; no shuffling.
pub fn split_train_test<T: Clone>(items: &[T], ratio: f64) -> Result<(Vec<T>, Vec<T>)> {
    let k = train_len(items.len(), ratio)?;
    Ok((items[..k].to_vec(), items[k..].to_vec()))
}

/// Applies first differencing `d` times.
pub fn difference(values: &[f64], d: usize) -> Result<Vec<f64>> {
    seasonal_difference(values, 1, d)
}

/// Applies `x_t − x_{t−lag}` `times` times.
pub fn seasonal_difference(values: &[f64], lag: usize, times: usize) -> Result<Vec<f64>> {
    if lag == 0 {
        return Err(Error::invalid("difference lag must be positive"));
    }
    if values.len() <= lag * times {
        return Err(Error::invalid(format!(
            "series of length {} too short for {times} difference(s) at lag {lag}",
            values.len()
        )));
    }
    let mut out = values.to_vec();
    for _ in 0..times {
        out = out.windows(lag + 1).map(|w| w[lag] - w[0]).collect();
    }
    Ok(out)
}

/// Sample autocorrelation `r(0..=max_lag)`.
pub fn acf(values: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if n <= max_lag {
        return Err(Error::invalid("acf: series shorter than max lag"));
    }
    let m = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - m).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if !(denom > 1e-300) {
        return Err(Error::invalid("acf: constant series has zero variance"));
    }
    Ok((0..=max_lag)
        .map(|k| {
            centered[..n - k]
                .iter()
                .zip(&centered[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodMethod {
    Acf,
    Periodogram,
}

/// Dominant period in steps, or 0 when none is significant.
///
/// ACF: after the autocorrelation first falls inside the `2/√n` band,
/// the next local maximum is the candidate; it counts if it rises above
/// the band. Periodogram: the strongest non-zero Fourier bin, accepted by
/// Fisher's g-test at the 5% level.
pub fn estimate_period(values: &[f64], method: PeriodMethod) -> Result<usize> {
    let n = values.len();
    if n < 16 {
        return Err(Error::invalid("period estimation needs at least 16 points"));
    }
    match method {
        PeriodMethod::Acf => {
            let r = match acf(values, n / 2) {
                Ok(r) => r,
                Err(_) => return Ok(0),
            };
            let band = 2.0 / (n as f64).sqrt();
            let Some(dip) = (1..r.len()).find(|&k| r[k] < band) else {
                return Ok(0);
            };
            for k in dip.max(2)..r.len() - 1 {
                if r[k] >= r[k - 1] && r[k] > r[k + 1] {
                    return Ok(if r[k] > band { k } else { 0 });
                }
            }
            Ok(0)
        }
        PeriodMethod::Periodogram => {
            let power = periodogram(values);
            let m = power.len() - 1;
            if m < 2 {
                return Ok(0);
            }
            let (best, peak) = power
                .iter()
                .enumerate()
                .skip(1)
                .fold((0, f64::NEG_INFINITY), |acc, (j, &p)| {
                    if p > acc.1 {
                        (j, p)
                    } else {
                        acc
                    }
                });
            let total: f64 = power[1..].iter().sum();
            if !(total > 0.0) {
                return Ok(0);
            }
            let g = peak / total;
            let p_value = (m as f64) * (1.0 - g).powi(m as i32 - 1);
            if p_value >= 0.05 {
                return Ok(0);
            }
            Ok((n as f64 / best as f64).round() as usize)
        }
    }
}

/// Squared Fourier magnitudes of the mean-removed series for bins
/// `0..=n/2`.
pub fn periodogram(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let m = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = values.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm_sqr() / n as f64).collect()
}

/// Root mean square.
pub fn rms(residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::invalid("rms of an empty list"));
    }
    Ok((residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt())
}

/// Per-column centering and scaling (population deviation). Constant
/// columns are centered and keep a recorded deviation of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                // deviations at rounding level of the mean count as constant
                if sd > 1e-12 * m.abs().max(1e-300) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// Standardizes the columns of `rows`, returning the fitted parameters.
pub fn standardize(rows: &[Vec<f64>]) -> (Vec<Vec<f64>>, Standardizer) {
    let params = Standardizer::fit(rows);
    (params.apply_all(rows), params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(points: &[(i64, f64)]) -> TimeSeries {
        TimeSeries::sample(points.to_vec())
    }

    #[test]
    fn merge_examples() {
        assert_eq!(merge_cooccurring(&ts(&[(10, 5.0), (10, 3.0), (12, 1.0)])).points, vec![(10, 8.0), (12, 1.0)]);
        assert_eq!(merge_cooccurring(&ts(&[(7, 2.0), (7, 2.0), (7, 2.0)])).points, vec![(7, 6.0)]);
        let distinct = ts(&[(1, 1.0), (2, 2.0)]);
        assert_eq!(merge_cooccurring(&distinct), distinct);
    }

    #[test]
    fn resample_examples() {
        let s = ts(&[(10, 8.0), (12, 1.0)]);
        let r = resample(&s, 1).unwrap();
        assert_eq!(r.points, vec![(10, 8.0), (11, 0.0), (12, 1.0)]);
        assert_eq!(r.domain, Domain::Time { step: 1 });
        assert_eq!(resample(&s, 5).unwrap().points, vec![(10, 9.0)]);
        assert_eq!(resample(&ts(&[(61, 2.0)]), 60).unwrap().points, vec![(60, 2.0)]);
        assert!(resample(&ts(&[]), 60).is_err());
    }

    fn grid(n: usize) -> TimeSeries {
        TimeSeries {
            points: (0..n).map(|i| (i as i64 * 60, i as f64)).collect(),
            domain: Domain::Time { step: 60 },
        }
    }

    #[test]
    fn window_counts() {
        assert_eq!(sliding_windows(&grid(10), 300, 60).unwrap().len(), 6);
        assert_eq!(sliding_windows(&grid(10), 600, 60).unwrap().len(), 1);
        let tiles = sliding_windows(&grid(10), 300, 300).unwrap();
        assert_eq!(tiles.len(), 2);
        assert_eq!(tiles[1].values, vec![5.0, 6.0, 7.0, 8.0, 9.0]);
        assert!(sliding_windows(&grid(4), 300, 60).unwrap().is_empty());
        assert!(sliding_windows(&grid(10), 90, 60).is_err());
    }

    #[test]
    fn split_examples() {
        let ten: Vec<u8> = (0..10).collect();
        let (a, b) = split_train_test(&ten, 0.7).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        assert_eq!(split_train_test(&[1, 2, 3], 0.7).unwrap(), (vec![1, 2], vec![3]));
        assert_eq!(split_train_test(&[1, 2], 0.5).unwrap(), (vec![1], vec![2]));
        assert!(split_train_test(&[1], 0.5).is_err());
        assert!(split_train_test(&[1, 2], 1.0).is_err());
    }

    #[test]
    fn difference_examples() {
        assert_eq!(difference(&[1.0, 3.0, 6.0], 1).unwrap(), vec![2.0, 3.0]);
        assert_eq!(difference(&[1.0, 3.0, 6.0], 0).unwrap(), vec![1.0, 3.0, 6.0]);
        assert_eq!(difference(&[1.0, 3.0, 6.0, 10.0], 2).unwrap(), vec![1.0, 1.0]);
        assert!(difference(&[1.0, 2.0], 2).is_err());
        assert_eq!(seasonal_difference(&[1.0, 2.0, 4.0, 7.0], 2, 1).unwrap(), vec![3.0, 5.0]);
    }

    #[test]
    fn acf_lag_zero_and_constant() {
        let r = acf(&[1.0, 4.0, 2.0, 8.0, 5.0], 3).unwrap();
        assert_eq!(r[0], 1.0);
        assert!(acf(&[2.0; 10], 2).is_err());
    }

    #[test]
    fn rms_examples() {
        assert!((rms(&[3.0, 4.0]).unwrap() - 12.5_f64.sqrt()).abs() < 1e-15);
        assert_eq!(rms(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((rms(&[-2.5; 4]).unwrap() - 2.5).abs() < 1e-15);
        assert!(rms(&[]).is_err());
    }

    #[test]
    fn standardize_examples() {
        let (z, p) = standardize(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(z, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(p.std, vec![1.0, 1.0]);
        let (again, _) = standardize(&z);
        for (a, b) in again.iter().flatten().zip(z.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
