use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use txwatch::kernels::*;

fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| (0..d).map(|_| g.sample(&mut rng)).collect()).collect()
}

fn min_eigenvalue(g: &Gram) -> f64 {
    let m = DMatrix::from_row_slice(g.n, g.n, &g.data);
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn kernel_examples() {
    let rbf = KernelSpec::Rbf { gamma: 0.7 };
    assert_eq!(kernel_eval(&rbf, &[3.0, -1.0], &[3.0, -1.0]).unwrap(), 1.0);
    assert_eq!(kernel_eval(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
    let poly = KernelSpec::Polynomial { degree: 2, coef0: 1.0 };
    assert_eq!(kernel_eval(&poly, &[1.0], &[1.0]).unwrap(), 4.0);
    assert!(kernel_eval(&rbf, &[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn gram_examples() {
    let rbf = KernelSpec::Rbf { gamma: 0.5 };
    let g = gram(&KernelSpec::Linear, &[vec![2.0, 1.0]]);
    assert_eq!(g.data, vec![5.0]);
    let rows = gaussian_rows(5, 2, 4);
    let g = gram(&rbf, &rows);
    assert!((0..5).all(|i| g.get(i, i) == 1.0));
    assert!(min_eigenvalue(&g) >= -1e-10);
}

#[test]
fn ridge_linear_extrapolates() {
    let x = vec![vec![1.0], vec![2.0], vec![3.0]];
    let m = KernelRidge::fit(&x, &[2.0, 4.0, 6.0], KernelSpec::Linear, 1e-9).unwrap();
    assert!((m.predict(&[4.0]) - 8.0).abs() < 1e-3);
}

#[test]
fn ridge_interpolates_in_the_limit() {
    let x = gaussian_rows(8, 2, 1);
    let y: Vec<f64> = x.iter().map(|r| r[0].sin() + r[1]).collect();
    let m = KernelRidge::fit(&x, &y, KernelSpec::Rbf { gamma: 1.0 }, 1e-12).unwrap();
    for (r, t) in x.iter().zip(&y) {
        assert!((m.predict(r) - t).abs() < 1e-6);
    }
}

#[test]
fn ridge_zero_targets() {
    let x = gaussian_rows(6, 3, 2);
    let m = KernelRidge::fit(&x, &[0.0; 6], KernelSpec::Rbf { gamma: 0.3 }, 1.0).unwrap();
    assert!(x.iter().all(|r| m.predict(r) == 0.0));
}

/// Dense grid over the two free weights of a three-point dual.
fn dual_grid_min(rows: &[Vec<f64>], spec: KernelSpec, bound: f64) -> f64 {
    let g = gram(&spec, rows);
    let steps = 2000;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let a = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
            if a.iter().any(|&v| v > bound + 1e-12) {
                continue;
            }
            let mut obj = 0.0;
            for p in 0..3 {
                for q in 0..3 {
                    obj += 0.5 * a[p] * a[q] * g.get(p, q);
                }
            }
            best = best.min(obj);
        }
    }
    best
}

#[test]
fn one_class_dual_matches_grid_oracle() {
    let rows = vec![vec![0.0, 0.0], vec![0.1, -0.05], vec![3.0, 3.0]];
    let spec = KernelSpec::Rbf { gamma: 0.5 };
    for nu in [0.4, 0.6, 1.0] {
        let sol = one_class_solve(&rows, spec, OneClassOptions::new(nu)).unwrap();
        let g = gram(&spec, &rows);
        let mut obj = 0.0;
        for p in 0..3 {
            for q in 0..3 {
                obj += 0.5 * sol.alphas[p] * sol.alphas[q] * g.get(p, q);
            }
        }
        let oracle = dual_grid_min(&rows, spec, sol.upper_bound);
        assert!(obj <= oracle + 1e-6, "nu {nu}: {obj} vs {oracle}");
    }
}

fn cluster_plus_outlier(cluster: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = (0..cluster)
        .map(|i| {
            let a = i as f64 * 2.399;
            vec![0.1 * a.cos(), 0.1 * a.sin()]
        })
        .collect();
    rows.push(vec![4.0, 4.0]);
    rows
}

#[test]
fn one_class_far_outlier_scores_lowest() {
    // with nu·n < 2 the isolated point is a margin vector and ties the
    // cluster's margin vectors at zero
    let rows = cluster_plus_outlier(5);
    let m = one_class_fit(&rows, KernelSpec::Rbf { gamma: 0.5 }, 0.2).unwrap();
    let far = m.decision(&rows[5]);
    let cluster_min = rows[..5].iter().map(|r| m.decision(r)).fold(f64::INFINITY, f64::min);
    assert!(far <= cluster_min + m.tolerance, "{far} vs {cluster_min}");

    // once the box bound drops below one half it is strictly outside
    let rows = cluster_plus_outlier(10);
    let m = one_class_fit(&rows, KernelSpec::Rbf { gamma: 0.5 }, 0.2).unwrap();
    let far = m.decision(&rows[10]);
    let cluster_min = rows[..10].iter().map(|r| m.decision(r)).fold(f64::INFINITY, f64::min);
    assert!(far < cluster_min, "{far} vs {cluster_min}");
    assert!(m.is_outlier(&rows[10]));
}

#[test]
fn one_class_feasibility() {
    let rows = gaussian_rows(50, 2, 9);
    let sol = one_class_solve(&rows, KernelSpec::Rbf { gamma: 0.5 }, OneClassOptions::new(0.1)).unwrap();
    assert!((sol.alphas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(sol.alphas.iter().all(|&a| (0.0..=sol.upper_bound).contains(&a)));
    let two = one_class_solve(&[vec![1.0], vec![1.0]], KernelSpec::Linear, OneClassOptions::new(1.0)).unwrap();
    assert_eq!(two.alphas, vec![0.5, 0.5]);
}

#[test]
fn nu_property_over_seeds() {
    for seed in 0..5 {
        let n = 100 + 20 * seed as usize;
        let rows = gaussian_rows(n, 2, 100 + seed);
        let nu = [0.05, 0.1, 0.2, 0.3, 0.5][seed as usize];
        let sol = one_class_solve(&rows, KernelSpec::Rbf { gamma: 0.5 }, OneClassOptions::new(nu)).unwrap();
        let m = &sol.model;
        let negative = rows.iter().filter(|r| m.is_outlier(r)).count() as f64 / n as f64;
        let svs = sol.alphas.iter().filter(|&&a| a > 0.0).count() as f64 / n as f64;
        assert!(negative <= nu + 2.0 / n as f64, "seed {seed}: {negative}");
        assert!(svs >= nu - 2.0 / n as f64, "seed {seed}: {svs}");
    }
}

#[test]
fn dual_objective_never_increases() {
    let rows = gaussian_rows(60, 3, 5);
    let mut opts = OneClassOptions::new(0.1);
    opts.record_objective = true;
    let sol = one_class_solve(&rows, KernelSpec::Rbf { gamma: 0.3 }, opts).unwrap();
    assert!(sol.objective_trace.len() > 1);
    for w in sol.objective_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn gamma_grid_is_the_odd_power_set() {
    let g = power_grid(-15, 3);
    assert_eq!(g.len(), 10);
    assert_eq!(g[0], 2f64.powi(-15));
    assert_eq!(*g.last().unwrap(), 8.0);
}

#[test]
fn default_gamma_is_inverse_dim_times_variance() {
    let rows = vec![vec![1.0, 0.0], vec![3.0, 4.0]];
    // variances 1 and 4, mean 2.5
    assert!((default_gamma(&rows) - 1.0 / (2.0 * 2.5)).abs() < 1e-15);
}

proptest! {
    #[test]
    fn gram_is_symmetric(seed in any::<u64>(), n in 1usize..12, gamma in 0.01f64..5.0) {
        let rows = gaussian_rows(n, 3, seed);
        for spec in [KernelSpec::Linear, KernelSpec::Polynomial { degree: 3, coef0: 0.5 }, KernelSpec::Rbf { gamma }] {
            let g = gram(&spec, &rows);
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(g.get(i, j), g.get(j, i));
                }
            }
        }
    }

    #[test]
    fn rbf_ridge_is_translation_invariant(seed in any::<u64>(), shift in -20.0f64..20.0, lambda in 0.01f64..2.0) {
        let x = gaussian_rows(10, 2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let y: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xs: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        let spec = KernelSpec::Rbf { gamma: 0.5 };
        let a = KernelRidge::fit(&x, &y, spec, lambda).unwrap();
        let b = KernelRidge::fit(&xs, &y, spec, lambda).unwrap();
        let q = [0.3, -0.2];
        let qs = [0.3 + shift, -0.2 + shift];
        prop_assert!((a.predict(&q) - b.predict(&qs)).abs() < 1e-8);
    }
}
