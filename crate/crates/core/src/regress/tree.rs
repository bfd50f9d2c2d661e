use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numeric::shifted_mean;
use crate::signature::Signature;
use crate::WORK_TYPE_COUNT;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until another stopping rule applies.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
        }
    }
}

impl TreeParams {
    pub fn describe(&self) -> String {
        let depth = self
            .max_depth
            .map_or_else(|| "unlimited".to_string(), |d| d.to_string());
        format!(
            "max_depth={depth} min_samples_leaf={} min_samples_split={}",
            self.min_samples_leaf, self.min_samples_split
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

/// Binary regression tree stored as a node array rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub params: TreeParams,
}

impl TreeModel {
    pub fn predict_row(&self, x: &Signature) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// CART regression tree on every feature.
pub fn fit_tree(data: &Dataset, params: &TreeParams) -> Result<TreeModel> {
    let rows: Vec<usize> = (0..data.len()).collect();
    grow(data, rows, params, &mut |_| (0..WORK_TYPE_COUNT).collect())
}

/// Grows a tree on `rows` (which may repeat, for bootstrap samples).
/// `candidates(depth)` yields the features examined at a node, ascending.
pub(crate) fn grow(
    data: &Dataset,
    mut rows: Vec<usize>,
    params: &TreeParams,
    candidates: &mut dyn FnMut(usize) -> Vec<usize>,
) -> Result<TreeModel> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut builder = Builder {
        data,
        params,
        nodes: Vec::new(),
        candidates,
    };
    builder.build(&mut rows, 0);
    Ok(TreeModel {
        nodes: builder.nodes,
        params: params.clone(),
    })
}

struct Builder<'a> {
    data: &'a Dataset,
    params: &'a TreeParams,
    nodes: Vec<Node>,
    candidates: &'a mut dyn FnMut(usize) -> Vec<usize>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let targets = &self.data.targets;
        let value = shifted_mean(rows.iter().map(|&r| targets[r])).expect("non-empty node");
        self.nodes.push(Node::Leaf {
            value,
            n_samples: rows.len(),
        });

        let n = rows.len();
        let p = self.params;
        let constant = rows.iter().all(|&r| targets[r] == targets[rows[0]]);
        if constant
            || p.max_depth.is_some_and(|d| depth >= d)
            || n < p.min_samples_split.max(2)
            || n < 2 * p.min_samples_leaf.max(1)
        {
            return id;
        }

        let features = (self.candidates)(depth);
        let Some(choice) = self.best_split(rows, value, &features) else {
            return id;
        };

        let mut split_at = 0;
        for i in 0..n {
            if self.data.features[rows[i]][choice.feature] < choice.threshold {
                rows.swap(i, split_at);
                split_at += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(split_at);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left,
            right,
        };
        id
    }

    /// Minimizes the summed child squared error. Scans features in the given
    /// (ascending) order and thresholds ascending, keeping only strict
    /// improvements, so ties resolve to the lower feature and threshold.
    fn best_split(&self, rows: &[usize], mean: f64, features: &[usize]) -> Option<SplitChoice> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<(f64, SplitChoice)> = None;
        let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);

        for &f in features {
            order.clear();
            order.extend(
                rows.iter()
                    .map(|&r| (self.data.features[r][f], self.data.targets[r] - mean)),
            );
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let total: f64 = order.iter().map(|o| o.1).sum();
            let total_sq: f64 = order.iter().map(|o| o.1 * o.1).sum();

            let (mut left_sum, mut left_sq) = (0.0, 0.0);
            for i in 1..n {
                let (_, y) = order[i - 1];
                left_sum += y;
                left_sq += y * y;
                let (lo, hi) = (order[i - 1].0, order[i].0);
                if lo == hi || i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let nl = i as f64;
                let nr = (n - i) as f64;
                let right_sum = total - left_sum;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
                if best.as_ref().is_none_or(|(b, _)| sse < *b) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold <= lo {
                        threshold = hi;
                    }
                    best = Some((sse, SplitChoice { feature: f, threshold }));
                }
            }
        }
        best.map(|(_, c)| c)
    }
}
