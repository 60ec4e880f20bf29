//! Single regression tree: exact greedy split search over presorted columns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GbtError, GrowthPolicy, HyperParams};

/// Optimal leaf weight `-G / (H + lambda)`.
pub fn leaf_weight(g_sum: f64, h_sum: f64, lambda: f64) -> Result<f64, GbtError> {
    if h_sum + lambda == 0.0 {
        return Err(GbtError::ZeroHessian);
    }
    Ok(weight(g_sum, h_sum, lambda))
}

fn weight(g_sum: f64, h_sum: f64, lambda: f64) -> f64 {
    -g_sum / (h_sum + lambda)
}

/// Regularised reduction in loss from splitting a node into the given
/// children, net of the per-leaf penalty `gamma`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        weight: f64,
    },
}

/// Nodes are stored flat with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    /// Raw leaf weight for the row whose feature `j` is `value(j)`.
    pub fn leaf_value(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { weight } => return weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if value(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn leaf_for_row(&self, columns: &[Vec<f64>], row: usize) -> f64 {
        self.leaf_value(|j| columns[j][row])
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            Node::Split { feature, gain, .. } => Some((feature, gain)),
            Node::Leaf { .. } => None,
        })
    }
}

/// Threshold strictly separating `lo < hi` under the `<=` routing rule.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) * 0.5;
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    slot: usize,
    threshold: f64,
}

struct Work {
    id: usize,
    depth: usize,
    /// Ascending row indices.
    rows: Vec<u32>,
    /// Per sampled feature, the node's rows ordered by (value, index).
    sorted: Vec<Vec<u32>>,
    g: f64,
    h: f64,
}

pub(crate) struct TreeBuilder<'a> {
    pub columns: &'a [Vec<f64>],
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    /// Sampled feature indices, ascending.
    pub features: &'a [usize],
    pub params: &'a HyperParams,
}

const PARALLEL_WORK: usize = 1 << 15;

impl TreeBuilder<'_> {
    /// `rows` ascending; `presorted[k]` lists every training row ordered by
    /// feature `features[k]`.
    pub fn build(&self, rows: Vec<u32>, presorted: Vec<Vec<u32>>) -> RegressionTree {
        let mut nodes = Vec::new();
        let root = self.open(&mut nodes, 0, rows, presorted);
        match self.params.growth {
            GrowthPolicy::DepthWise => self.grow_depth_wise(&mut nodes, root),
            GrowthPolicy::LeafWise { num_leaves } => self.grow_leaf_wise(&mut nodes, root, num_leaves),
        }
        RegressionTree { nodes }
    }

    fn open(&self, nodes: &mut Vec<Node>, depth: usize, rows: Vec<u32>, sorted: Vec<Vec<u32>>) -> Work {
        // direct sums in row order so leaf weights do not depend on how the
        // node was reached
        let (mut g, mut h) = (0.0, 0.0);
        for &r in &rows {
            g += self.grad[r as usize];
            h += self.hess[r as usize];
        }
        let id = nodes.len();
        nodes.push(Node::Leaf {
            weight: weight(g, h, self.params.lambda),
        });
        Work {
            id,
            depth,
            rows,
            sorted,
            g,
            h,
        }
    }

    fn grow_depth_wise(&self, nodes: &mut Vec<Node>, root: Work) {
        let mut level = vec![root];
        while !level.is_empty() {
            let mut next = Vec::new();
            for w in level {
                if let Some(c) = self.best_split(&w) {
                    let (l, r) = self.split(nodes, w, c);
                    next.push(l);
                    next.push(r);
                }
            }
            level = next;
        }
    }

    fn grow_leaf_wise(&self, nodes: &mut Vec<Node>, root: Work, num_leaves: usize) {
        let c = self.best_split(&root);
        let mut open = vec![(root, c)];
        let mut leaves = 1;
        while leaves < num_leaves {
            let mut pick: Option<usize> = None;
            for (k, (w, c)) in open.iter().enumerate() {
                let Some(c) = c else { continue };
                let better = match pick {
                    None => true,
                    Some(p) => {
                        let (pw, pc) = (&open[p].0, open[p].1.unwrap());
                        c.gain > pc.gain || (c.gain == pc.gain && w.id < pw.id)
                    }
                };
                if better {
                    pick = Some(k);
                }
            }
            let Some(k) = pick else { break };
            let (w, c) = open.swap_remove(k);
            let (l, r) = self.split(nodes, w, c.unwrap());
            let cl = self.best_split(&l);
            let cr = self.best_split(&r);
            open.push((l, cl));
            open.push((r, cr));
            leaves += 1;
        }
    }

    fn best_split(&self, w: &Work) -> Option<Candidate> {
        if w.depth >= self.params.max_depth || w.rows.len() < 2 {
            return None;
        }
        let scan = |slot: usize| self.best_for_feature(w, slot);
        let per_feature: Vec<Option<Candidate>> = if w.rows.len() * self.features.len() >= PARALLEL_WORK {
            (0..self.features.len()).into_par_iter().map(scan).collect()
        } else {
            (0..self.features.len()).map(scan).collect()
        };
        // lowest feature wins ties
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |best: Option<Candidate>, c| match best {
                Some(b) if b.gain >= c.gain => Some(b),
                _ => Some(c),
            })
    }

    fn best_for_feature(&self, w: &Work, slot: usize) -> Option<Candidate> {
        let col = &self.columns[self.features[slot]];
        let list = &w.sorted[slot];
        let p = self.params;
        let (mut gl, mut hl) = (0.0, 0.0);
        let mut best: Option<Candidate> = None;
        for pos in 0..list.len() - 1 {
            let r = list[pos] as usize;
            gl += self.grad[r];
            hl += self.hess[r];
            let (v, v_next) = (col[r], col[list[pos + 1] as usize]);
            if v == v_next || hl < p.min_child_weight {
                continue;
            }
            let hr = w.h - hl;
            if hr < p.min_child_weight {
                break;
            }
            let gain = split_gain(gl, hl, w.g - gl, hr, p.lambda, p.gamma);
            // lowest threshold wins ties
            if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    gain,
                    slot,
                    threshold: midpoint(v, v_next),
                });
            }
        }
        best
    }

    fn split(&self, nodes: &mut Vec<Node>, w: Work, c: Candidate) -> (Work, Work) {
        let feature = self.features[c.slot];
        let col = &self.columns[feature];
        let goes_left = |r: &u32| col[*r as usize] <= c.threshold;
        let (rows_l, rows_r): (Vec<u32>, Vec<u32>) = w.rows.into_iter().partition(goes_left);
        let mut sorted_l = Vec::with_capacity(w.sorted.len());
        let mut sorted_r = Vec::with_capacity(w.sorted.len());
        for list in w.sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(goes_left);
            sorted_l.push(l);
            sorted_r.push(r);
        }
        let left = self.open(nodes, w.depth + 1, rows_l, sorted_l);
        let right = self.open(nodes, w.depth + 1, rows_r, sorted_r);
        nodes[w.id] = Node::Split {
            feature,
            threshold: c.threshold,
            left: left.id,
            right: right.id,
            gain: c.gain,
        };
        (left, right)
    }
}
