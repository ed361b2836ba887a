use serde::{Deserialize, Serialize};

/// A tree node; inputs with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree stored as a node list rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Index of the leaf node reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Largest feature index used by a split.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Checks that children exist, every node is reached exactly once and
    /// features are in range.
    pub fn is_well_formed(&self, num_features: usize) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() || seen[i] {
                return false;
            }
            seen[i] = true;
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = self.nodes[i]
            {
                if feature >= num_features || !threshold.is_finite() {
                    return false;
                }
                stack.push(left);
                stack.push(right);
            }
        }
        !self.nodes.is_empty() && seen.iter().all(|&s| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub max_leaves: usize,
    pub min_instances_per_leaf: usize,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

/// Best variance-reducing split of `rows`; ties keep the lowest feature and
/// threshold.
fn best_split(x: &[Vec<f64>], y: &[f64], rows: &[usize], min_leaf: usize) -> Option<Candidate> {
    let n = rows.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| y[r]).sum();
    let base = total * total / n as f64;
    let num_features = x.first().map_or(0, Vec::len);
    let mut best: Option<(f64, usize, f64, usize)> = None;
    let mut sorted = rows.to_vec();
    for f in 0..num_features {
        sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += y[sorted[i]];
            let (lo, hi) = (x[sorted[i]][f], x[sorted[i + 1]][f]);
            let n_left = i + 1;
            if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64 - base;
            if gain > 1e-15 && best.is_none_or(|b| gain > b.0) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some((gain, f, threshold, n_left));
            }
        }
    }
    let (gain, feature, threshold, _) = best?;
    let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| x[r][feature] <= threshold);
    Some(Candidate {
        gain,
        feature,
        threshold,
        left,
        right,
    })
}

/// Grows a least-squares tree leaf by leaf, always splitting the leaf with the
/// largest squared-error reduction. Returns the tree (leaf values zero) and
/// the rows reaching each leaf node.
pub fn fit_tree(x: &[Vec<f64>], y: &[f64], rows: &[usize], config: TreeConfig) -> (RegressionTree, Vec<(usize, Vec<usize>)>) {
    let min_leaf = config.min_instances_per_leaf.max(1);
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut open: Vec<(usize, Vec<usize>, Option<Candidate>)> =
        vec![(0, rows.to_vec(), best_split(x, y, rows, min_leaf))];
    let mut leaves = 1;
    while leaves < config.max_leaves.max(1) {
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, (_, _, c))| c.as_ref().map(|c| (i, c.gain)))
            .fold(None, |acc: Option<(usize, f64)>, (i, g)| match acc {
                Some((_, bg)) if bg >= g => acc,
                _ => Some((i, g)),
            });
        let Some((i, _)) = pick else { break };
        let (node, _, cand) = open.swap_remove(i);
        let c = cand.unwrap();
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[node] = Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            left: l,
            right: r,
        };
        let ls = best_split(x, y, &c.left, min_leaf);
        let rs = best_split(x, y, &c.right, min_leaf);
        open.push((l, c.left, ls));
        open.push((r, c.right, rs));
        leaves += 1;
    }
    let mut members: Vec<(usize, Vec<usize>)> = open.into_iter().map(|(n, rows, _)| (n, rows)).collect();
    members.sort_by_key(|(n, _)| *n);
    (RegressionTree { nodes }, members)
}
