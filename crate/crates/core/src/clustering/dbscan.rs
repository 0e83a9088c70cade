//! DBSCAN density clustering; noise points are the anomalies.

use crate::error::{Error, Result};
use crate::linalg::{dist, quantile, sq_dist};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) || self.min_pts == 0 {
            return Err(Error::invalid("DBSCAN needs eps > 0 and min_pts >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DbscanLabel {
    Cluster(usize),
    Noise,
}

impl DbscanLabel {
    pub fn is_noise(&self) -> bool {
        matches!(self, DbscanLabel::Noise)
    }
}

/// Core flags: at least `min_pts` points (itself included) within `eps`.
pub fn core_points(rows: &[Vec<f64>], params: DbscanParams) -> Vec<bool> {
    let eps2 = params.eps * params.eps;
    par::map_range(rows.len(), |i| {
        let mut count = 0;
        for r in rows {
            if sq_dist(&rows[i], r) <= eps2 {
                count += 1;
                if count >= params.min_pts {
                    return true;
                }
            }
        }
        false
    })
}

/// Labels in index order; a border point reachable from several clusters
/// keeps the first that reaches it.
pub fn dbscan(rows: &[Vec<f64>], params: DbscanParams) -> Vec<DbscanLabel> {
    let n = rows.len();
    let core = core_points(rows, params);
    let eps2 = params.eps * params.eps;
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    let mut queue = Vec::new();
    for i in 0..n {
        if labels[i].is_some() || !core[i] {
            continue;
        }
        let id = next;
        next += 1;
        labels[i] = Some(id);
        queue.push(i);
        while let Some(p) = queue.pop() {
            for q in 0..n {
                if labels[q].is_none() && sq_dist(&rows[p], &rows[q]) <= eps2 {
                    labels[q] = Some(id);
                    if core[q] {
                        queue.push(q);
                    }
                }
            }
        }
    }
    labels
        .into_iter()
        .map(|l| l.map_or(DbscanLabel::Noise, DbscanLabel::Cluster))
        .collect()
}

/// 0.95 quantile of the distances to each point's `k`-th nearest other
/// point.
pub fn estimate_eps(rows: &[Vec<f64>], k: usize) -> Result<f64> {
    estimate_eps_quantile(rows, k, 0.95)
}

/// As [`estimate_eps`] at quantile `q`.
pub fn estimate_eps_quantile(rows: &[Vec<f64>], k: usize, q: f64) -> Result<f64> {
    if k == 0 || rows.len() <= k {
        return Err(Error::invalid(format!("estimate_eps needs more than k = {k} rows")));
    }
    let kd = par::map_range(rows.len(), |i| {
        let mut d: Vec<f64> = rows
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, r)| sq_dist(&rows[i], r))
            .collect();
        let (_, v, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
        v.sqrt()
    });
    Ok(quantile(&kd, q))
}

/// Fitted DBSCAN used as a detector: a query is noise when no training
/// core point lies within `eps`.
#[derive(Debug, Clone)]
pub struct DbscanModel {
    pub params: DbscanParams,
    pub core: Vec<Vec<f64>>,
}

impl DbscanModel {
    pub fn fit(rows: &[Vec<f64>], params: DbscanParams) -> Result<Self> {
        params.validate()?;
        if rows.is_empty() {
            return Err(Error::invalid("DBSCAN needs at least one row"));
        }
        let flags = core_points(rows, params);
        let mut core: Vec<Vec<f64>> = rows.iter().zip(&flags).filter(|(_, &c)| c).map(|(r, _)| r.clone()).collect();
        // duplicates add nothing to nearest-core queries
        core.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        core.dedup();
        Ok(Self { params, core })
    }

    /// Distance to the nearest core point in units of `eps`; above 1 is
    /// noise.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.core.iter().map(|c| dist(c, x)).fold(f64::INFINITY, f64::min) / self.params.eps
    }

    pub fn is_noise(&self, x: &[f64]) -> bool {
        self.score(x) > 1.0
    }
}
