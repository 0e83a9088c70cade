//! Small dense linear algebra: Householder least squares, Cholesky solves
//! and the cyclic Jacobi symmetric eigensolver. Square matrices are stored
//! row-major in flat `Vec<f64>`s.

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Solves `min ‖A·x − b‖₂` by Householder QR. `a` holds the rows of `A`.
/// Fails when `A` is numerically rank deficient.
pub fn lstsq(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let m = a.len();
    if m == 0 || m != b.len() {
        return Err(Error::invalid("least squares: row count mismatch"));
    }
    let n = a[0].len();
    if n == 0 || m < n {
        return Err(Error::fit(format!(
            "least squares: {m} rows cannot determine {n} unknowns"
        )));
    }
    // column-major copy for the reflections
    let mut r: Vec<Vec<f64>> = (0..n).map(|j| a.iter().map(|row| row[j]).collect()).collect();
    let mut rhs = b.to_vec();
    let col_scale = r
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max);
    if !col_scale.is_finite() {
        return Err(Error::numeric("least squares: non-finite design matrix"));
    }
    let mut diag = vec![0.0; n];
    for k in 0..n {
        let norm = r[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * col_scale.max(f64::MIN_POSITIVE) {
            return Err(Error::fit("least squares: singular (collinear) design"));
        }
        let alpha = if r[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = r[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for col in r.iter_mut().skip(k) {
            let s = 2.0 * dot(&v, &col[k..]) / vnorm2;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c -= s * vi;
            }
        }
        let s = 2.0 * dot(&v, &rhs[k..]) / vnorm2;
        for (c, vi) in rhs[k..].iter_mut().zip(&v) {
            *c -= s * vi;
        }
    }
    let max_diag = diag.iter().map(|d| d.abs()).fold(0.0, f64::max);
    if diag.iter().any(|d| d.abs() <= 1e-10 * max_diag) {
        return Err(Error::fit("least squares: singular (collinear) design"));
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s -= r[j][i] * x[j];
        }
        x[i] = s / r[i][i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("least squares: non-finite solution"));
    }
    Ok(x)
}

/// Solves `M·x = b` for symmetric positive-definite `M` (n×n, row-major).
pub fn cholesky_solve(m: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    if m.len() != n * n || b.len() != n {
        return Err(Error::invalid("cholesky: dimension mismatch"));
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::numeric(format!(
                        "cholesky: matrix not positive definite at pivot {i}"
                    )));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("cholesky: non-finite solution"));
    }
    Ok(x)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector of `values[k]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops
/// below `tol` (relative to the matrix norm when that exceeds one).
pub fn jacobi_eigen(m: &[f64], n: usize, tol: f64) -> Result<SymEigen> {
    if m.len() != n * n {
        return Err(Error::invalid("jacobi: dimension mismatch"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("jacobi: non-finite matrix entry"));
    }
    let mut a = m.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) > tol * scale {
        if sweeps >= 100 {
            return Err(Error::numeric("jacobi: no convergence after 100 sweeps"));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
        .collect();
    Ok(SymEigen {
        values,
        vectors,
        sweeps,
    })
}

/// Linear-interpolation quantile of unsorted data, `q` in [0, 1].
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population (1/n) standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}
