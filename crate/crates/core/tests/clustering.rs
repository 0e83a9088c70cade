use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use txwatch::clustering::*;
use txwatch::clustering::{dbscan, kmeans};
use txwatch::kernels::KernelSpec;

fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| (0..d).map(|_| g.sample(&mut rng)).collect()).collect()
}

fn uniform_rows(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect()
}

fn d2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

/// Textbook DBSCAN: O(n²) neighbourhoods, clusters grown by a queue.
fn naive_dbscan(rows: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = rows.len();
    let nbrs: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| d2(&rows[i], &rows[j]).sqrt() <= eps).collect()).collect();
    let core: Vec<bool> = nbrs.iter().map(|v| v.len() >= min_pts).collect();
    let mut label = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if label[i].is_some() || !core[i] {
            continue;
        }
        label[i] = Some(next);
        let mut queue = vec![i];
        while let Some(p) = queue.pop() {
            for &q in &nbrs[p] {
                if label[q].is_none() {
                    label[q] = Some(next);
                    if core[q] {
                        queue.push(q);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

/// Partition of the non-noise points, independent of cluster ids.
fn partition(labels: &[Option<usize>]) -> HashSet<Vec<usize>> {
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            groups.entry(*c).or_default().push(i);
        }
    }
    groups.into_values().collect()
}

fn as_options(labels: &[DbscanLabel]) -> Vec<Option<usize>> {
    labels
        .iter()
        .map(|l| match l {
            DbscanLabel::Cluster(c) => Some(*c),
            DbscanLabel::Noise => None,
        })
        .collect()
}

#[test]
fn kmeans_single_cluster_is_mean() {
    let rows = gaussian_rows(30, 2, 3);
    let m = kmeans_fit(&rows, 1, 0, 2).unwrap();
    let mean: Vec<f64> = (0..2).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / 30.0).collect();
    for j in 0..2 {
        assert!((m.centroids[0][j] - mean[j]).abs() < 1e-12);
    }
    let q = [4.0, -1.0];
    assert!((kmeans_score(&m, &q) - d2(&q, &mean).sqrt()).abs() < 1e-12);
    assert_eq!(kmeans_score(&m, &m.centroids[0].clone()), 0.0);
}

#[test]
fn kmeans_two_blobs() {
    let xs = [-0.2, 0.1, 0.3, -0.1, 0.0, 0.2, 9.8, 10.1, 10.3, 9.9, 10.0, 10.2];
    let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
    let m = kmeans_fit(&rows, 2, 7, 3).unwrap();
    // exhaustive oracle over all 2^12 assignments
    let mut best = (f64::INFINITY, 0u32);
    for mask in 1u32..(1 << 12) - 1 {
        let (a, b): (Vec<f64>, Vec<f64>) = {
            let a = (0..12).filter(|i| mask >> i & 1 == 1).map(|i| xs[i]).collect();
            let b = (0..12).filter(|i| mask >> i & 1 == 0).map(|i| xs[i]).collect();
            (a, b)
        };
        let ss = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        };
        let w = ss(&a) + ss(&b);
        if w < best.0 {
            best = (w, mask);
        }
    }
    let mut c: Vec<f64> = m.centroids.iter().map(|r| r[0]).collect();
    c.sort_by(f64::total_cmp);
    assert!((c[0] - 0.05).abs() < 0.5 && (c[1] - 10.05).abs() < 0.5, "{c:?}");
    let run = kmeans::kmeans_best(&rows, 2, 7, 3).unwrap();
    assert!((run.wcss() - best.0).abs() < 1e-9);
    let s = kmeans_score(&m, &[100.0]);
    assert!((s - 90.0).abs() < 0.5);
    assert!(m.is_anomaly(&[100.0]));
    assert!(kmeans_fit(&rows[..1], 2, 0, 1).is_err());
}

#[test]
fn dbscan_examples() {
    let rows = vec![vec![0.0], vec![0.5], vec![10.0]];
    let l = dbscan(&rows, DbscanParams { eps: 1.0, min_pts: 2 });
    assert_eq!(l[0], l[1]);
    assert!(!l[0].is_noise());
    assert!(l[2].is_noise());
    let same = vec![vec![2.0, 2.0]; 5];
    let l = dbscan(&same, DbscanParams { eps: 0.1, min_pts: 5 });
    assert!(l.iter().all(|x| *x == l[0] && !x.is_noise()));
}

#[test]
fn dbscan_matches_naive_oracle() {
    let rows = uniform_rows(200, 42);
    for (eps, min_pts) in [(0.3, 2), (0.5, 4), (0.8, 6), (1.2, 10), (0.05, 1)] {
        let ours = as_options(&dbscan(&rows, DbscanParams { eps, min_pts }));
        let naive = naive_dbscan(&rows, eps, min_pts);
        let noise_a: Vec<bool> = ours.iter().map(Option::is_none).collect();
        let noise_b: Vec<bool> = naive.iter().map(Option::is_none).collect();
        assert_eq!(noise_a, noise_b, "eps {eps} min_pts {min_pts}");
        assert_eq!(partition(&ours), partition(&naive), "eps {eps} min_pts {min_pts}");
    }
}

#[test]
fn eps_examples() {
    let grid: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
    assert_eq!(estimate_eps(&grid, 1).unwrap(), 1.0);
    let two = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
    assert_eq!(estimate_eps(&two, 1).unwrap(), 5.0);
}

#[test]
fn estimated_eps_keeps_blob_together() {
    let rows = gaussian_rows(300, 2, 12);
    let eps = estimate_eps(&rows, 3).unwrap();
    let labels = naive_dbscan(&rows, eps, 4);
    let kept = labels.iter().filter(|l| l.is_some()).count();
    assert!(kept as f64 >= 0.9 * rows.len() as f64, "{kept}");
}

#[test]
fn ocsvm_examples() {
    let train = gaussian_rows(60, 2, 4);
    let spec = KernelSpec::Rbf { gamma: 0.5 };
    let model = txwatch::kernels::one_class_fit(&train, spec, 0.1).unwrap();
    let margin = model
        .support_vectors
        .iter()
        .zip(&model.alphas)
        .find(|(_, &a)| a > 1e-9 && a < 1.0 / (0.1 * 60.0) - 1e-9)
        .map(|(sv, _)| sv.clone())
        .expect("a free support vector");
    assert!(model.decision(&margin).abs() < 1e-3);
    let flags = ocsvm_detect(&train, &[margin, vec![8.0, 8.0]], spec, 0.1).unwrap();
    assert_eq!(flags, vec![false, true]);
}

#[test]
fn ocsvm_nu_one_over_n() {
    let train = gaussian_rows(100, 2, 9);
    let flags = ocsvm_detect(&train, &train, KernelSpec::Rbf { gamma: 0.5 }, 0.01).unwrap();
    assert!(flags.iter().filter(|&&f| f).count() <= 1);
}

fn orthogonal(a: f64) -> [[f64; 2]; 2] {
    [[a.cos(), -a.sin()], [a.sin(), a.cos()]]
}

fn apply(m: &[[f64; 2]; 2], x: &[f64]) -> Vec<f64> {
    vec![m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lloyd_wcss_never_increases(seed in any::<u64>(), k in 1usize..6) {
        let rows = gaussian_rows(80, 2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = kmeans::kmeans_plus_plus(&rows, k, &mut rng);
        let run = kmeans::lloyd(&rows, init, 300);
        for w in run.wcss_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn dbscan_noise_permutation_invariant(seed in any::<u64>(), eps in 0.2f64..1.5, min_pts in 1usize..8) {
        let rows = uniform_rows(60, seed);
        let mut perm: Vec<usize> = (0..rows.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 5));
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let p = DbscanParams { eps, min_pts };
        let a = dbscan(&rows, p);
        let b = dbscan(&shuffled, p);
        // core points' clusters are order-free; borders may switch cluster
        let core = dbscan::core_points(&rows, p);
        let mut ca: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut cb: HashMap<usize, Vec<usize>> = HashMap::new();
        for (pos, &i) in perm.iter().enumerate() {
            prop_assert_eq!(a[i].is_noise(), b[pos].is_noise());
            if core[i] {
                if let (DbscanLabel::Cluster(x), DbscanLabel::Cluster(y)) = (a[i], b[pos]) {
                    ca.entry(x).or_default().push(i);
                    cb.entry(y).or_default().push(i);
                }
            }
        }
        let norm = |m: HashMap<usize, Vec<usize>>| -> HashSet<Vec<usize>> {
            m.into_values().map(|mut v| { v.sort(); v }).collect()
        };
        prop_assert_eq!(norm(ca), norm(cb));
    }

    #[test]
    fn scores_invariant_under_rotation(seed in any::<u64>(), angle in 0.0f64..6.3) {
        let rows = gaussian_rows(50, 2, seed);
        let r = orthogonal(angle);
        let rot: Vec<Vec<f64>> = rows.iter().map(|x| apply(&r, x)).collect();
        let m = kmeans_fit(&rows, 1, 0, 1).unwrap();
        let mr = kmeans_fit(&rot, 1, 0, 1).unwrap();
        let q = [1.5, -0.5];
        prop_assert!((kmeans_score(&m, &q) - kmeans_score(&mr, &apply(&r, &q))).abs() < 1e-8);
        // keep eps away from any pairwise distance so rounding cannot move it
        let p = DbscanParams { eps: 0.45, min_pts: 3 };
        let close = rows.iter().any(|a| rows.iter().any(|b| (d2(a, b).sqrt() - p.eps).abs() < 1e-9));
        prop_assume!(!close);
        let na: Vec<bool> = dbscan(&rows, p).iter().map(DbscanLabel::is_noise).collect();
        let nb: Vec<bool> = dbscan(&rot, p).iter().map(DbscanLabel::is_noise).collect();
        prop_assert_eq!(na, nb);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ocsvm_training_flags_obey_nu(seed in any::<u64>(), nu in 0.02f64..0.5) {
        let rows = gaussian_rows(100, 2, seed);
        let flags = ocsvm_detect(&rows, &rows, KernelSpec::Rbf { gamma: 0.5 }, nu).unwrap();
        let frac = flags.iter().filter(|&&f| f).count() as f64 / rows.len() as f64;
        prop_assert!(frac <= nu + 2.0 / rows.len() as f64);
    }
}
