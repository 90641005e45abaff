//! CART regression trees with a minimum-leaf-size knob.
//!
//! Greedy binary splitting by sum-of-squared-error reduction. Candidate
//! thresholds are midpoints between consecutive distinct sorted values;
//! ties are broken toward the lowest feature index, then the lowest
//! threshold, so the fit is deterministic. `min_leaf` values 4/12/36 give
//! the fine/medium/coarse granularities of the model comparison.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
        count: usize,
    },
    Split {
        feature: usize,
        /// Samples with `x[feature] < threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub min_leaf: usize,
    pub input_dim: usize,
    /// Node arena; index 0 is the root.
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return Ok(*value),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 1,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    min_leaf: usize,
    /// Pure-node floor relative to the total target energy.
    sse_floor: f64,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    split_pos: usize,
    sse: f64,
}

impl<'a> Builder<'a> {
    fn node_stats(&self, idx: &[usize]) -> (f64, f64) {
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n;
        let sse = idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum::<f64>();
        (mean, sse)
    }

    /// Best split of this node, or `None` when no legal split reduces the
    /// SSE strictly.
    fn best_split(&self, idx: &[usize], node_mean: f64, node_sse: f64) -> Option<(BestSplit, Vec<usize>)> {
        let n = idx.len();
        if n < 2 * self.min_leaf {
            return None;
        }
        let mut best: Option<BestSplit> = None;
        let mut best_order: Vec<usize> = Vec::new();
        for f in 0..self.x.ncols() {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| {
                self.x[(a, f)]
                    .partial_cmp(&self.x[(b, f)])
                    .expect("features are finite")
                    .then(a.cmp(&b))
            });
            // Prefix sums of centered targets keep the SSE arithmetic
            // well conditioned.
            let mut s1 = 0.0f64;
            let mut s2 = 0.0f64;
            let cum: Vec<(f64, f64)> = order
                .iter()
                .map(|&i| {
                    let d = self.y[i] - node_mean;
                    s1 += d;
                    s2 += d * d;
                    (s1, s2)
                })
                .collect();
            let (t1, t2) = (s1, s2);
            for k in self.min_leaf..=n - self.min_leaf {
                let v_lo = self.x[(order[k - 1], f)];
                let v_hi = self.x[(order[k], f)];
                if v_lo == v_hi {
                    continue;
                }
                let mid = 0.5 * (v_lo + v_hi);
                // Midpoint can round onto an endpoint for adjacent floats;
                // nudge so `x < threshold` splits the sorted order exactly.
                let threshold = if mid > v_lo { mid } else { v_hi };
                let (l1, l2) = cum[k - 1];
                let sse_l = l2 - l1 * l1 / k as f64;
                let (r1, r2) = (t1 - l1, t2 - l2);
                let sse_r = r2 - r1 * r1 / (n - k) as f64;
                let sse = sse_l + sse_r;
                if best.as_ref().is_none_or(|b| sse < b.sse) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        split_pos: k,
                        sse,
                    });
                    best_order = order.clone();
                }
            }
        }
        let b = best?;
        if b.sse < node_sse {
            Some((b, best_order))
        } else {
            None
        }
    }

    fn build(&mut self, idx: &[usize]) -> usize {
        let (mean, sse) = self.node_stats(idx);
        let make_leaf = |nodes: &mut Vec<Node>| {
            nodes.push(Node::Leaf {
                value: mean,
                count: idx.len(),
            });
            nodes.len() - 1
        };
        if sse <= self.sse_floor {
            return make_leaf(&mut self.nodes);
        }
        match self.best_split(idx, mean, sse) {
            Some((b, order)) => {
                let slot = self.nodes.len();
                self.nodes.push(Node::Leaf {
                    value: mean,
                    count: idx.len(),
                }); // placeholder until children exist
                let left = self.build(&order[..b.split_pos]);
                let right = self.build(&order[b.split_pos..]);
                self.nodes[slot] = Node::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left,
                    right,
                };
                slot
            }
            None => make_leaf(&mut self.nodes),
        }
    }
}

pub fn fit_tree(x: &DMatrix<f64>, y: &DVector<f64>, min_leaf: usize) -> Result<TreeModel> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::EmptyInput("tree training set".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    if min_leaf == 0 {
        return Err(Error::InvalidInput {
            what: "tree".into(),
            why: "min_leaf must be >= 1".into(),
        });
    }
    let total_energy: f64 = y.iter().map(|v| v * v).sum();
    let mut b = Builder {
        x,
        y,
        min_leaf,
        sse_floor: 1e-12 * total_energy,
        nodes: Vec::new(),
    };
    let idx: Vec<usize> = (0..x.nrows()).collect();
    let root = b.build(&idx);
    debug_assert_eq!(root, 0);
    Ok(TreeModel {
        min_leaf,
        input_dim: x.ncols(),
        nodes: b.nodes,
    })
}
