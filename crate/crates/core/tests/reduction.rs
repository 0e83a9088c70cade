use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use txwatch::reduction::*;
use txwatch::series::standardize;

fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| (0..d).map(|_| g.sample(&mut rng)).collect()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues of a symmetric 3×3 matrix as the roots of its
/// characteristic cubic, by scan and bisection. Descending.
fn cubic_eigenvalues(m: [[f64; 3]; 3]) -> Vec<f64> {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let p = |l: f64| -l * l * l + tr * l * l - minors * l + det;
    let bound = m.iter().flatten().map(|v| v.abs()).sum::<f64>() + 1.0;
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut prev = -bound;
    for i in 1..=steps {
        let x = -bound + 2.0 * bound * i as f64 / steps as f64;
        if p(prev) == 0.0 {
            roots.push(prev);
        } else if p(prev).signum() != p(x).signum() {
            let (mut lo, mut hi) = (prev, x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if p(lo).signum() == p(mid).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = x;
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

#[test]
fn pca_line_in_three_dimensions() {
    let dir = [1.0, 2.0, -2.0];
    let rows: Vec<Vec<f64>> = (0..30).map(|i| dir.iter().map(|d| d * (i as f64 - 15.0) / 3.0).collect()).collect();
    let m = pca_fit(&rows, 0.9).unwrap();
    assert_eq!(m.components.len(), 1);
    assert!(rows.iter().all(|r| pca_score(&m, r) < 1e-9));
    // [2, 1, 2]/3 is a unit vector orthogonal to the line
    let off: Vec<f64> = rows[7].iter().zip([2.0, 1.0, 2.0]).map(|(v, u)| v + 5.0 * u / 3.0).collect();
    assert!((pca_score(&m, &off) - 5.0).abs() < 1e-9);
}

#[test]
fn pca_eigenvalues_match_characteristic_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let m = pca_fit(&rows, 1.0).unwrap();
    let (_, cov) = pca::covariance(&rows);
    let c = [[cov[0], cov[1], cov[2]], [cov[3], cov[4], cov[5]], [cov[6], cov[7], cov[8]]];
    let oracle = cubic_eigenvalues(c);
    assert_eq!(oracle.len(), 3);
    for (a, b) in m.eigenvalues.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-6, "{:?} vs {oracle:?}", m.eigenvalues);
    }
}

#[test]
fn pca_rejects_non_finite() {
    assert!(pca_fit(&[vec![1.0, f64::NAN], vec![0.0, 1.0]], 0.9).is_err());
}

#[test]
fn iforest_examples() {
    assert_eq!(c_factor(2), 1.0);
    assert_eq!(iforest::score_from_path(c_factor(64), 64), 0.5);
}

fn cluster_with_outlier(seed: u64) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = gaussian_rows(100, 2, seed).into_iter().map(|r| r.iter().map(|v| 0.1 * v).collect()).collect();
    rows.push(vec![100.0, 0.0]);
    rows
}

#[test]
fn iforest_isolates_planted_outlier() {
    let mut max_hits = 0;
    let mut flag_hits = 0;
    for seed in 0..20 {
        let rows = cluster_with_outlier(seed);
        let f = iforest_fit(&rows, 100, 64, seed).unwrap();
        let scores: Vec<f64> = rows.iter().map(|r| iforest_score(&f, r)).collect();
        let best = (0..rows.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        max_hits += usize::from(best == 100);
        flag_hits += usize::from(ThresholdRule::Fixed(0.6).cutoff(&scores) < scores[100]);
    }
    assert!(max_hits >= 19, "{max_hits}");
    assert!(flag_hits >= 19, "{flag_hits}");
}

#[test]
fn iforest_identical_points_score_equally() {
    let rows = vec![vec![3.0, 3.0]; 40];
    let f = iforest_fit(&rows, 20, 16, 1).unwrap();
    let s = iforest_score(&f, &rows[0]);
    assert!((s - 0.5).abs() < 1e-12);
}

#[test]
fn iforest_tree_shape() {
    let rows = gaussian_rows(300, 3, 5);
    let f = iforest_fit(&rows, 30, 64, 2).unwrap();
    let (lo, hi): (Vec<f64>, Vec<f64>) = (0..3)
        .map(|j| rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r[j]), b.max(r[j]))))
        .unzip();
    for t in &f.trees {
        assert!(t.height() <= 6);
        for (feat, v) in t.splits() {
            assert!(v > lo[feat] && v < hi[feat]);
        }
    }
}

#[test]
fn autoencoder_learns_constant_windows() {
    let windows = vec![vec![0.0; 6]; 12];
    let t = ae_train_traced(&windows, 2, 300, 0.05, 3).unwrap();
    assert!(t.loss_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(*t.loss_history.last().unwrap() < 1e-3 * t.loss_history[0].max(1e-12));
}

#[test]
fn autoencoder_gradient_matches_finite_differences() {
    let windows = gaussian_rows(5, 4, 8);
    let mut m = AutoencoderModel::init(4, 2, 4);
    let (_, grad) = m.loss_and_gradient(&windows);
    let p = m.params();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let mut up = p.clone();
        up[i] += h;
        m.set_params(&up);
        let lu = m.loss(&windows);
        up[i] -= 2.0 * h;
        m.set_params(&up);
        let ld = m.loss(&windows);
        let fd = (lu - ld) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8));
    }
    m.set_params(&p);
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn autoencoder_loss_monotone_on_standardized_data() {
    let raw: Vec<Vec<f64>> = (0..60)
        .map(|i| (0..8).map(|j| ((i + j) as f64 * 0.5).sin() + 0.1 * ((i * j) % 5) as f64).collect())
        .collect();
    let (z, _) = standardize(&raw);
    let t = ae_train_traced(&z, 3, 100, 0.01, 11).unwrap();
    for w in t.loss_history[..101].windows(2) {
        assert!(w[1] <= w[0], "{w:?}");
    }
}

#[test]
fn autoencoder_rejects_wide_bottleneck() {
    let w = gaussian_rows(12, 4, 1);
    assert!(ae_train(&w, 4, 10, 0.01, 1).is_err());
    assert!(ae_train(&w[..5], 2, 10, 0.01, 1).is_err());
}

#[test]
fn threshold_examples() {
    assert_eq!(score_threshold(&[1.0, 1.0, 1.0], 3.0), 1.0);
    assert_eq!(score_threshold(&[1.5, 2.5], 3.0), 3.5);
}

fn rotation(a: f64, b: f64) -> [[f64; 3]; 3] {
    let (ca, sa, cb, sb) = (a.cos(), a.sin(), b.cos(), b.sin());
    // rotation about z by a, then about x by b
    [[ca, -sa, 0.0], [cb * sa, cb * ca, -sb], [sb * sa, sb * ca, cb]]
}

fn rotate(r: &[[f64; 3]; 3], x: &[f64]) -> Vec<f64> {
    r.iter().map(|row| dot(row, x)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pca_components_orthonormal(seed in any::<u64>(), n in 3usize..40, d in 1usize..6, explained in 0.05f64..1.0) {
        let rows = gaussian_rows(n, d, seed);
        let m = pca_fit(&rows, explained).unwrap();
        prop_assert!(!m.components.is_empty());
        for (i, a) in m.components.iter().enumerate() {
            for (j, b) in m.components.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot(a, b) - want).abs() < 1e-9);
            }
        }
        let full = pca_fit(&rows, 1.0).unwrap();
        if full.components.len() == d {
            for r in &rows {
                prop_assert!(pca_score(&full, r) < 1e-9);
            }
        }
    }

    #[test]
    fn pca_score_rotation_invariant(seed in any::<u64>(), a in 0.0f64..6.3, b in 0.0f64..6.3) {
        let rows = gaussian_rows(25, 3, seed);
        let r = rotation(a, b);
        let rot: Vec<Vec<f64>> = rows.iter().map(|x| rotate(&r, x)).collect();
        let m = pca_fit(&rows, 0.6).unwrap();
        let mr = pca_fit(&rot, 0.6).unwrap();
        prop_assume!(m.components.len() == mr.components.len());
        let q = [0.7, -1.3, 2.0];
        prop_assert!((pca_score(&m, &q) - pca_score(&mr, &rotate(&r, &q))).abs() < 1e-8);
    }

    #[test]
    fn iforest_scores_bounded_and_deterministic(seed in any::<u64>()) {
        let rows = gaussian_rows(80, 2, seed);
        let f = iforest_fit(&rows, 25, 32, seed).unwrap();
        let g = iforest_fit(&rows, 25, 32, seed).unwrap();
        for r in &rows {
            let s = iforest_score(&f, r);
            prop_assert!(s > 0.0 && s < 1.0);
            prop_assert_eq!(s, iforest_score(&g, r));
        }
    }

    #[test]
    fn shorter_path_scores_higher(a in 0.0f64..30.0, gap in 1e-6f64..10.0, psi in 2usize..1000) {
        prop_assert!(iforest::score_from_path(a, psi) > iforest::score_from_path(a + gap, psi));
    }

    #[test]
    fn autoencoder_gradient_any_seed(seed in any::<u64>(), w in 3usize..7) {
        let h = w - 1 - (seed as usize % (w - 1));
        let windows = gaussian_rows(6, w, seed ^ 1);
        let mut m = AutoencoderModel::init(w, h.max(1), seed);
        let (_, grad) = m.loss_and_gradient(&windows);
        let p = m.params();
        for i in (0..p.len()).step_by(3) {
            let mut up = p.clone();
            up[i] += 1e-5;
            m.set_params(&up);
            let lu = m.loss(&windows);
            up[i] -= 2e-5;
            m.set_params(&up);
            let ld = m.loss(&windows);
            let fd = (lu - ld) / 2e-5;
            prop_assert!((fd - grad[i]).abs() <= 1e-4 * fd.abs().max(grad[i].abs()).max(1e-6));
        }
    }
}
