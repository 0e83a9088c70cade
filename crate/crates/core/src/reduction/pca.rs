//! PCA subspace detector: distance from a point to the principal subspace
//! of the training data.

use crate::error::{Error, Result};
use crate::linalg::{dot, jacobi_eigen};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Top-m principal directions, unit rows.
    pub components: Vec<Vec<f64>>,
    /// Every covariance eigenvalue, descending.
    pub eigenvalues: Vec<f64>,
    pub explained_fraction: f64,
}

/// Covariance matrix (1/n), row-major.
pub fn covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            let ci = r[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += ci * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= n;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    (mean, cov)
}

pub fn pca_fit(rows: &[Vec<f64>], explained: f64) -> Result<PcaModel> {
    if rows.len() < 2 {
        return Err(Error::invalid("PCA needs at least 2 rows"));
    }
    if !(explained > 0.0 && explained <= 1.0) {
        return Err(Error::invalid("explained fraction must lie in (0, 1]"));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("PCA rows must share a positive dimension"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::numeric("PCA input contains non-finite values"));
    }
    let (mean, cov) = covariance(rows);
    let eig = jacobi_eigen(&cov, d, 1e-12)?;
    let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    let mut m = d;
    if total > 0.0 {
        let mut acc = 0.0;
        for (k, v) in eig.values.iter().enumerate() {
            acc += v.max(0.0);
            if acc >= explained * total * (1.0 - 1e-12) {
                m = k + 1;
                break;
            }
        }
    } else {
        m = 1;
    }
    let kept: f64 = eig.values[..m].iter().map(|v| v.max(0.0)).sum();
    Ok(PcaModel {
        mean,
        components: eig.vectors[..m].to_vec(),
        explained_fraction: if total > 0.0 { kept / total } else { 1.0 },
        eigenvalues: eig.values,
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Reconstruction error `‖c − PᵀP·c‖` of the centered point.
    pub fn score(&self, x: &[f64]) -> f64 {
        if self.components.len() == self.dim() {
            return 0.0;
        }
        let c: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        let mut r = c.clone();
        for comp in &self.components {
            let p = dot(comp, &c);
            for (ri, ci) in r.iter_mut().zip(comp) {
                *ri -= p * ci;
            }
        }
        r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn pca_score(model: &PcaModel, x: &[f64]) -> f64 {
    model.score(x)
}
