use serde::{Deserialize, Serialize};

use super::check_training_set;
use crate::error::{FdiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Impurity {
    Gini,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        label: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Node array rooted at index 0. Samples with `x[feature] <= threshold` go
/// left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_class: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_class];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn best_split(&self, idx: &[usize], counts: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let d = self.x[0].len();
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for f in 0..d {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_class];
            let mut right = counts.to_vec();
            for pos in 0..n - 1 {
                let l = self.y[order[pos]];
                left[l] += 1;
                right[l] -= 1;
                let n_left = pos + 1;
                let (lo, hi) = (self.x[order[pos]][f], self.x[order[pos + 1]][f]);
                if lo == hi || n_left < self.min_leaf || n - n_left < self.min_leaf {
                    continue;
                }
                let score = (n_left as f64 * gini(&left) + (n - n_left) as f64 * gini(&right)) / n as f64;
                if best.as_ref().is_none_or(|b| score < b.score) {
                    let mid = 0.5 * (lo + hi);
                    // guard against the midpoint rounding onto the upper value
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit {
                        score,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            label: majority(&counts),
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_left = self.max_depth.is_none_or(|m| depth < m);
        if pure || !depth_left || idx.len() < 2 * self.min_leaf {
            return id;
        }
        let Some(split) = self.best_split(&idx, &counts) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x[i][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// CART with Gini impurity. Candidate thresholds are midpoints between
/// adjacent distinct sorted values; the split of lowest weighted impurity
/// wins, the first feature and threshold on ties. A node becomes a leaf when
/// pure, at `max_depth`, or when no split leaves `min_leaf` samples on both
/// sides.
pub fn fit(
    x: &[Vec<f64>],
    y: &[usize],
    n_class: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
) -> Result<TreeModel> {
    let d = check_training_set(x, y, n_class)?;
    if min_leaf == 0 {
        return Err(FdiError::Configuration("min_leaf must be >= 1".into()));
    }
    let mut b = Builder {
        x,
        y,
        n_class,
        max_depth,
        min_leaf,
        nodes: Vec::new(),
    };
    b.grow((0..x.len()).collect(), 0);
    Ok(TreeModel {
        n_features: d,
        nodes: b.nodes,
    })
}

impl TreeModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { label } => return label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Every split references two in-range children, each node is reached
    /// exactly once from the root.
    pub fn is_proper(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        while let Some(id) = stack.pop() {
            if id >= self.nodes.len() || seen[id] {
                return false;
            }
            seen[id] = true;
            if let Node::Split { left, right, .. } = self.nodes[id] {
                stack.push(left);
                stack.push(right);
            }
        }
        seen.iter().all(|&s| s)
    }
}
