//! Greedy CART regression trees on lag features.

use super::knn::lag_pairs;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    dim: usize,
}

/// Best split of a node as `(gain, feature, threshold)`.
pub(crate) fn best_split(
    inputs: &[Vec<f64>],
    targets: &[f64],
    idx: &[usize],
    min_leaf: usize,
) -> Option<(f64, usize, f64)> {
    let n = idx.len();
    let dim = inputs.first().map_or(0, Vec::len);
    let total: f64 = idx.iter().map(|&i| targets[i]).sum();
    let total_sq: f64 = idx.iter().map(|&i| targets[i] * targets[i]).sum();
    let parent_sse = total_sq - total * total / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..dim {
        let mut order = idx.to_vec();
        order.sort_by(|&a, &b| inputs[a][f].total_cmp(&inputs[b][f]).then(a.cmp(&b)));
        let mut ls = 0.0;
        let mut lsq = 0.0;
        for split in 1..n {
            let y = targets[order[split - 1]];
            ls += y;
            lsq += y * y;
            let lo = inputs[order[split - 1]][f];
            let hi = inputs[order[split]][f];
            if lo == hi || split < min_leaf || n - split < min_leaf {
                continue;
            }
            let rs = total - ls;
            let rsq = total_sq - lsq;
            let sse = (lsq - ls * ls / split as f64) + (rsq - rs * rs / (n - split) as f64);
            let gain = parent_sse - sse;
            let threshold = 0.5 * (lo + hi);
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, threshold));
            }
        }
    }
    best.filter(|(g, _, _)| *g > 1e-12 * parent_sse.abs().max(f64::MIN_POSITIVE))
}

impl RegressionTree {
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], max_depth: usize, min_leaf: usize) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::invalid("regression tree needs matching, non-empty inputs"));
        }
        if min_leaf == 0 {
            return Err(Error::invalid("min_leaf must be at least 1"));
        }
        let mut tree = Self {
            nodes: Vec::new(),
            dim: inputs[0].len(),
        };
        let idx: Vec<usize> = (0..inputs.len()).collect();
        tree.grow(inputs, targets, idx, 0, max_depth, min_leaf);
        Ok(tree)
    }

    fn grow(
        &mut self,
        inputs: &[Vec<f64>],
        targets: &[f64],
        idx: Vec<usize>,
        depth: usize,
        max_depth: usize,
        min_leaf: usize,
    ) -> usize {
        let mean = idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64;
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));
        if depth >= max_depth || idx.len() < 2 * min_leaf {
            return at;
        }
        let Some((_, feature, threshold)) = best_split(inputs, targets, &idx, min_leaf) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| inputs[i][feature] <= threshold);
        let left = self.grow(inputs, targets, l, depth + 1, max_depth, min_leaf);
        let right = self.grow(inputs, targets, r, depth + 1, max_depth, min_leaf);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// `(feature, threshold)` of the root split, if any.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf(_) => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Tree regressor over lag vectors of a single series.
#[derive(Debug, Clone)]
pub struct CartForecaster {
    pub lags: usize,
    pub tree: RegressionTree,
}

impl CartForecaster {
    pub fn predict(&self, context: &[f64]) -> Result<f64> {
        if context.len() != self.lags {
            return Err(Error::invalid(format!(
                "tree context must have {} values, got {}",
                self.lags,
                context.len()
            )));
        }
        Ok(self.tree.predict(context))
    }
}

pub fn cart_forecast(train: &[f64], lags: usize, max_depth: usize, min_leaf: usize) -> Result<CartForecaster> {
    if lags == 0 || train.len() <= lags {
        return Err(Error::invalid("tree training series must be longer than lags (lags >= 1)"));
    }
    let (inputs, targets) = lag_pairs(train, lags);
    Ok(CartForecaster {
        lags,
        tree: RegressionTree::fit(&inputs, &targets, max_depth, min_leaf)?,
    })
}
