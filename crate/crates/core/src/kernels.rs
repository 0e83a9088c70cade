//! Kernel functions, Gram matrices, kernel ridge regression and the
//! ν-one-class kernel machine.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, sq_dist};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32, coef0: f64 },
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Polynomial { degree, coef0 } if degree < 1 || !coef0.is_finite() => {
                Err(Error::invalid("polynomial kernel needs degree >= 1"))
            }
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::invalid("RBF gamma must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Evaluates without a dimension check.
    #[inline]
    pub fn apply(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Polynomial { degree, coef0 } => (dot(x, y) + coef0).powi(degree as i32),
            KernelSpec::Rbf { gamma } => (-gamma * sq_dist(x, y)).exp(),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Polynomial { degree, coef0 } => write!(f, "poly:{degree}:{coef0}"),
            KernelSpec::Rbf { gamma } => write!(f, "rbf:{gamma}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// `linear`, `poly:<degree>[:<coef0>]`, `rbf:<gamma>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize, default: f64| -> Result<f64> {
            parts.get(i).map_or(Ok(default), |p| {
                p.parse()
                    .map_err(|_| Error::Config(format!("bad kernel parameter `{p}`")))
            })
        };
        let spec = match parts[0] {
            "linear" => KernelSpec::Linear,
            "poly" | "polynomial" => KernelSpec::Polynomial {
                degree: num(1, 2.0)? as u32,
                coef0: num(2, 1.0)?,
            },
            "rbf" => KernelSpec::Rbf { gamma: num(1, 1.0)? },
            other => return Err(Error::Config(format!("unknown kernel `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "kernel arguments differ in dimension ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    Ok(spec.apply(x, y))
}

/// Square symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Gram {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

pub fn gram(spec: &KernelSpec, rows: &[Vec<f64>]) -> Gram {
    let n = rows.len();
    let mut data = vec![0.0; n * n];
    par::fill_rows(&mut data, n, |i, out| {
        for (j, o) in out.iter_mut().enumerate() {
            *o = spec.apply(&rows[i], &rows[j]);
        }
    });
    Gram { n, data }
}

/// RBF width heuristic `1 / (d · mean column variance)`.
pub fn default_gamma(rows: &[Vec<f64>]) -> f64 {
    let d = rows.first().map_or(1, Vec::len).max(1);
    let n = rows.len().max(1) as f64;
    let mut total = 0.0;
    for j in 0..d {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        total += rows.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / n;
    }
    let var = total / d as f64;
    if var > 1e-12 {
        1.0 / (d as f64 * var)
    } else {
        1.0 / d as f64
    }
}

#[derive(Debug, Clone)]
pub struct KernelRidge {
    pub spec: KernelSpec,
    pub inputs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl KernelRidge {
    /// Dual weights solving `(G + λI)·a = y`.
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], spec: KernelSpec, lambda: f64) -> Result<Self> {
        spec.validate()?;
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::invalid("kernel ridge: inputs and targets must be non-empty and equal length"));
        }
        if !(lambda > 0.0) {
            return Err(Error::invalid("kernel ridge: lambda must be positive"));
        }
        let mut g = gram(&spec, inputs);
        let n = g.n;
        for i in 0..n {
            g.data[i * n + i] += lambda;
        }
        let weights = cholesky_solve(&g.data, n, targets)?;
        Ok(Self {
            spec,
            inputs: inputs.to_vec(),
            weights,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.inputs
            .iter()
            .zip(&self.weights)
            .map(|(xi, a)| a * self.spec.apply(xi, x))
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct OneClassModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub kernel: KernelSpec,
    pub nu: f64,
    /// KKT tolerance the solver ran to; decisions within it of zero are
    /// treated as on the margin.
    pub tolerance: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl OneClassModel {
    /// `Σ αᵢ·k(svᵢ, x) − ρ`; negative means outside the learned support.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.alphas)
            .map(|(sv, a)| a * self.kernel.apply(sv, x))
            .sum::<f64>()
            - self.rho
    }

    /// Strictly below the margin, beyond the solver tolerance.
    pub fn is_outlier(&self, x: &[f64]) -> bool {
        self.decision(x) < -self.tolerance
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OneClassOptions {
    pub nu: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub record_objective: bool,
}

impl OneClassOptions {
    pub fn new(nu: f64) -> Self {
        Self {
            nu,
            tolerance: 1e-4,
            max_iterations: 100_000,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OneClassSolution {
    pub model: OneClassModel,
    /// Dual weights for every training row.
    pub alphas: Vec<f64>,
    pub upper_bound: f64,
    /// Dual objective after initialization and after each update, when
    /// requested.
    pub objective_trace: Vec<f64>,
}

pub fn one_class_fit(rows: &[Vec<f64>], spec: KernelSpec, nu: f64) -> Result<OneClassModel> {
    Ok(one_class_solve(rows, spec, OneClassOptions::new(nu))?.model)
}

/// Minimizes `½αᵀGα` subject to `0 ≤ αᵢ ≤ 1/(νn)`, `Σα = 1`, updating the
/// maximal violating pair analytically at each step.
pub fn one_class_solve(rows: &[Vec<f64>], spec: KernelSpec, opts: OneClassOptions) -> Result<OneClassSolution> {
    spec.validate()?;
    let n = rows.len();
    if n < 2 {
        return Err(Error::invalid("one-class fit needs at least two rows"));
    }
    let nu = opts.nu;
    if !(nu <= 1.0 && nu * n as f64 >= 1.0 - 1e-12) {
        return Err(Error::invalid(format!("nu must lie in [1/n, 1], got {nu} for n = {n}")));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::numeric("one-class fit: ragged or non-finite rows"));
    }
    let q = gram(&spec, rows);
    let bound = 1.0 / (nu * n as f64);

    // fill the first ⌊νn⌋ weights to the bound, remainder to the next
    let mut alpha = vec![0.0; n];
    let mut left = 1.0_f64;
    for a in alpha.iter_mut() {
        if left <= 0.0 {
            break;
        }
        let take = if left >= bound { bound } else { left };
        *a = take;
        left -= take;
        if left < 1e-15 {
            left = 0.0;
        }
    }
    let mut grad = vec![0.0; n];
    for (j, &aj) in alpha.iter().enumerate() {
        if aj != 0.0 {
            let col = q.row(j);
            for (g, k) in grad.iter_mut().zip(col) {
                *g += aj * k;
            }
        }
    }
    let mut objective = 0.5 * dot(&alpha, &grad);
    let mut trace = Vec::new();
    if opts.record_objective {
        trace.push(objective);
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let mut up = usize::MAX;
        let mut g_up = f64::INFINITY;
        let mut low = usize::MAX;
        let mut g_low = f64::NEG_INFINITY;
        for k in 0..n {
            if alpha[k] < bound && grad[k] < g_up {
                g_up = grad[k];
                up = k;
            }
            if alpha[k] > 0.0 && grad[k] > g_low {
                g_low = grad[k];
                low = k;
            }
        }
        if up == usize::MAX || low == usize::MAX || g_low - g_up < opts.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let (i, j) = (up, low);
        let eta = (q.get(i, i) + q.get(j, j) - 2.0 * q.get(i, j)).max(1e-12);
        let mut step = (g_low - g_up) / eta;
        let room_i = bound - alpha[i];
        let room_j = alpha[j];
        let mut hit_i = false;
        let mut hit_j = false;
        if step >= room_i {
            step = room_i;
            hit_i = true;
        }
        if step >= room_j {
            step = room_j;
            hit_j = true;
            hit_i = hit_i && step == room_i;
        }
        objective += step * (g_up - g_low) + 0.5 * step * step * eta;
        alpha[i] = if hit_i { bound } else { alpha[i] + step };
        alpha[j] = if hit_j { 0.0 } else { alpha[j] - step };
        let (ci, cj) = (q.row(i), q.row(j));
        for k in 0..n {
            grad[k] += step * (ci[k] - cj[k]);
        }
        if opts.record_objective {
            trace.push(objective);
        }
    }

    // ρ from free vectors, else the midpoint of the feasible interval
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for k in 0..n {
        if alpha[k] > 0.0 && alpha[k] < bound {
            free_sum += grad[k];
            free_count += 1;
        } else if alpha[k] == 0.0 {
            ub = ub.min(grad[k]);
        } else {
            lb = lb.max(grad[k]);
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };
    if !rho.is_finite() || alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::numeric("one-class solver produced non-finite values"));
    }

    let (support_vectors, alphas): (Vec<_>, Vec<_>) = rows
        .iter()
        .zip(&alpha)
        .filter(|(_, a)| **a > 0.0)
        .map(|(r, a)| (r.clone(), *a))
        .unzip();
    Ok(OneClassSolution {
        model: OneClassModel {
            support_vectors,
            alphas,
            rho,
            kernel: spec,
            nu,
            tolerance: opts.tolerance,
            converged,
            iterations,
        },
        alphas: alpha,
        upper_bound: bound,
        objective_trace: trace,
    })
}

/// Picks the RBF width from `grid` by k-fold cross-validation: the
/// candidate whose held-out rejection rate is closest to `nu` wins
/// (earliest on ties).
pub fn select_gamma_cv(rows: &[Vec<f64>], nu: f64, grid: &[f64], folds: usize) -> Result<f64> {
    let n = rows.len();
    if grid.is_empty() || folds < 2 || n < 2 * folds {
        return Err(Error::invalid("gamma cross-validation needs a grid, >= 2 folds and enough rows"));
    }
    let scores = par::map_slice(grid, |&gamma| -> f64 {
        let mut rejected = 0usize;
        let mut held = 0usize;
        for f in 0..folds {
            let (train, test): (Vec<_>, Vec<_>) =
                rows.iter().enumerate().partition(|(i, _)| i % folds != f);
            let train: Vec<Vec<f64>> = train.into_iter().map(|(_, r)| r.clone()).collect();
            let fold_nu = nu.max(1.0 / train.len() as f64);
            let Ok(model) = one_class_fit(&train, KernelSpec::Rbf { gamma }, fold_nu) else {
                return f64::INFINITY;
            };
            held += test.len();
            rejected += test.iter().filter(|(_, r)| model.is_outlier(r)).count();
        }
        (rejected as f64 / held as f64 - nu).abs()
    });
    let best = scores
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    if !best.1.is_finite() {
        return Err(Error::fit("gamma cross-validation: every candidate failed"));
    }
    Ok(grid[best.0])
}

/// `{2^lo, 2^(lo+2), …, 2^hi}`.
pub fn power_grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).step_by(2).map(|e| 2f64.powi(e)).collect()
}
