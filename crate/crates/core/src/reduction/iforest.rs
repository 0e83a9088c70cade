//! Isolation forest. Each tree isolates points by random axis-aligned
//! cuts; anomalies need few cuts, so short average paths mean high scores.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;

/// Average unsuccessful-search path length of a binary search tree on
/// `n` points: `2·H(n−1) − 2(n−1)/n`, with `c(1) = c(0) = 0`.
pub fn c_factor(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let harmonic: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
    2.0 * harmonic - 2.0 * (n - 1) as f64 / n as f64
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    nodes: Vec<Node>,
}

impl IsolationTree {
    fn build(rows: &[Vec<f64>], idx: Vec<usize>, limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        tree.grow(rows, idx, 0, limit, rng);
        tree
    }

    fn grow(&mut self, rows: &[Vec<f64>], idx: Vec<usize>, depth: usize, limit: usize, rng: &mut ChaCha8Rng) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { size: idx.len() });
        if depth >= limit || idx.len() <= 1 {
            return at;
        }
        let dim = rows[idx[0]].len();
        let ranges: Vec<(usize, f64, f64)> = (0..dim)
            .filter_map(|f| {
                let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(rows[i][f]), hi.max(rows[i][f]))
                });
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return at;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let value = loop {
            let v = rng.random_range(lo..hi);
            if v > lo {
                break v;
            }
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows[i][feature] < value);
        let left = self.grow(rows, l, depth + 1, limit, rng);
        let right = self.grow(rows, r, depth + 1, limit, rng);
        self.nodes[at] = Node::Split {
            feature,
            value,
            left,
            right,
        };
        at
    }

    /// Edges to the leaf plus `c(leaf size)`.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        let mut depth = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { size } => return depth as f64 + c_factor(size),
                Node::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    at = if x[feature] < value { left } else { right };
                    depth += 1;
                }
            }
        }
    }

    pub fn height(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// `(feature, value)` of every internal node, in build order.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        self.nodes
            .iter()
            .filter_map(|n| match *n {
                Node::Split { feature, value, .. } => Some((feature, value)),
                Node::Leaf { .. } => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    pub subsample_size: usize,
    pub tree_count: usize,
    pub seed: u64,
}

/// Tree `i` draws from its own ChaCha stream `i` under the master seed,
/// so the forest is identical however the trees are scheduled.
pub fn iforest_fit(rows: &[Vec<f64>], tree_count: usize, subsample_size: usize, seed: u64) -> Result<IsolationForest> {
    if subsample_size < 2 || rows.len() < subsample_size {
        return Err(Error::invalid(format!(
            "isolation forest needs rows ({}) >= subsample ({subsample_size}) >= 2",
            rows.len()
        )));
    }
    if tree_count == 0 {
        return Err(Error::invalid("isolation forest needs at least one tree"));
    }
    let limit = (subsample_size as f64).log2().ceil() as usize;
    let trees = par::map_range(tree_count, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let idx = sample(&mut rng, rows.len(), subsample_size).into_vec();
        IsolationTree::build(rows, idx, limit, &mut rng)
    });
    Ok(IsolationForest {
        trees,
        subsample_size,
        tree_count,
        seed,
    })
}

impl IsolationForest {
    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// `2^(−E[h(x)] / c(ψ))`.
    pub fn score(&self, x: &[f64]) -> f64 {
        score_from_path(self.mean_path_length(x), self.subsample_size)
    }
}

pub fn score_from_path(mean_path: f64, subsample_size: usize) -> f64 {
    2f64.powf(-mean_path / c_factor(subsample_size))
}

pub fn iforest_score(forest: &IsolationForest, x: &[f64]) -> f64 {
    forest.score(x)
}
