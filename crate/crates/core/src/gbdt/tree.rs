//! Regression trees over binned features, grown leaf-wise.

use super::bins::{BinMapper, BinnedMatrix};
use super::histogram::{BinStat, Histogram};
use super::split::{best_split, leaf_value, SplitCandidate, SplitConstraints};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Rows whose bin for `feature` is `<= bin` go left. `default_left` routes
    /// values that have no order (NaN).
    Split {
        feature: usize,
        bin: u16,
        default_left: bool,
        left: usize,
        right: usize,
    },
}

/// Nodes in pre-order; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    /// Validates child links: every child index must point past its parent.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Option<Self> {
        if nodes.is_empty() {
            return None;
        }
        for (i, n) in nodes.iter().enumerate() {
            match *n {
                TreeNode::Split { left, right, .. } => {
                    if left <= i || right <= i || left >= nodes.len() || right >= nodes.len() {
                        return None;
                    }
                }
                TreeNode::Leaf { value } => {
                    if !value.is_finite() {
                        return None;
                    }
                }
            }
        }
        Some(Self { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn scale(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let TreeNode::Leaf { value } = n {
                *value *= factor;
            }
        }
    }

    fn walk(&self, mut goes_left: impl FnMut(usize, u16, bool) -> bool) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    bin,
                    default_left,
                    left,
                    right,
                } => i = if goes_left(feature, bin, default_left) { left } else { right },
            }
        }
    }

    /// Leaf value reached by a row of the binned training matrix.
    pub fn predict_binned(&self, data: &BinnedMatrix, row: usize) -> f64 {
        self.walk(|f, b, _| data.get(row, f) <= b)
    }

    /// Leaf value reached by a raw feature vector, binned through `mapper`.
    pub fn predict_raw(&self, mapper: &BinMapper, x: &[f32]) -> f64 {
        self.walk(|f, b, default_left| {
            let v = x[f];
            if v.is_nan() {
                default_left
            } else {
                mapper.bin(f, v) <= b
            }
        })
    }

    /// The root split, if the tree has one.
    pub fn root_split(&self) -> Option<(usize, u16)> {
        match self.nodes[0] {
            TreeNode::Split { feature, bin, .. } => Some((feature, bin)),
            TreeNode::Leaf { .. } => None,
        }
    }

    /// Renumbers nodes into pre-order.
    fn canonical(nodes: &[TreeNode]) -> Self {
        fn visit(nodes: &[TreeNode], i: usize, out: &mut Vec<TreeNode>) -> usize {
            let at = out.len();
            match nodes[i] {
                leaf @ TreeNode::Leaf { .. } => out.push(leaf),
                TreeNode::Split {
                    feature,
                    bin,
                    default_left,
                    left,
                    right,
                } => {
                    out.push(TreeNode::Leaf { value: 0.0 });
                    let l = visit(nodes, left, out);
                    let r = visit(nodes, right, out);
                    out[at] = TreeNode::Split {
                        feature,
                        bin,
                        default_left,
                        left: l,
                        right: r,
                    };
                }
            }
            at
        }
        let mut out = Vec::with_capacity(nodes.len());
        visit(nodes, 0, &mut out);
        Self { nodes: out }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowConfig {
    pub num_leaves: usize,
    pub min_data_in_leaf: usize,
    pub lambda_l2: f64,
}

struct OpenLeaf {
    node: usize,
    rows: Vec<u32>,
    hist: Option<Histogram>,
    sums: BinStat,
    split: Option<SplitCandidate>,
}

#[cfg(debug_assertions)]
fn check_histogram(hist: &Histogram, sums: BinStat) {
    for (f, t) in hist.feature_totals() {
        debug_assert_eq!(t.count, sums.count, "histogram count mismatch on feature {f}");
        let tol = 1e-9 * (1.0 + sums.hess.abs() + sums.grad.abs());
        debug_assert!((t.grad - sums.grad).abs() <= tol, "histogram grad mismatch on feature {f}");
        debug_assert!((t.hess - sums.hess).abs() <= tol, "histogram hess mismatch on feature {f}");
    }
}

/// Leaf-wise (best-first) growth on the given `rows` and `features`.
///
/// The open leaf with the largest positive split gain is expanded until
/// `num_leaves` leaves exist or no leaf can be split; ties go to the leaf
/// created first. Leaf values are the unscaled `-G / (H + λ)`. The smaller
/// child's histogram is built from its rows and the sibling's is obtained by
/// subtraction from the parent.
pub fn grow_tree(
    data: &BinnedMatrix,
    rows: Vec<u32>,
    features: &[usize],
    grad: &[f64],
    hess: &[f64],
    config: &GrowConfig,
) -> Tree {
    debug_assert_eq!(grad.len(), hess.len());
    let constraints = SplitConstraints {
        lambda_l2: config.lambda_l2,
        min_data_in_leaf: config.min_data_in_leaf,
    };
    let can_split = |count: u32| count as usize >= 2 * config.min_data_in_leaf.max(1);

    let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
    let root_sums = BinStat::of_rows(&rows, grad, hess);
    let mut root = OpenLeaf {
        node: 0,
        rows,
        hist: None,
        sums: root_sums,
        split: None,
    };
    if can_split(root_sums.count) {
        let hist = Histogram::build(data, &root.rows, features, grad, hess);
        root.split = best_split(&hist, features, root_sums, &constraints);
        root.hist = Some(hist);
    }
    let mut open = vec![root];

    while open.len() < config.num_leaves {
        let mut pick: Option<(usize, f64)> = None;
        for (i, leaf) in open.iter().enumerate() {
            if let Some(s) = leaf.split {
                if pick.is_none_or(|(_, g)| s.gain > g) {
                    pick = Some((i, s.gain));
                }
            }
        }
        let Some((i, _)) = pick else { break };
        let leaf = open.remove(i);
        let split = leaf.split.expect("picked leaf has a split");
        let parent_hist = leaf.hist.expect("splittable leaf has a histogram");

        let column = data.column(split.feature);
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            leaf.rows.iter().partition(|&&r| column[r as usize] <= split.bin);
        let left_sums = BinStat::of_rows(&left_rows, grad, hess);
        let right_sums = BinStat::of_rows(&right_rows, grad, hess);

        let left_id = nodes.len();
        nodes.push(TreeNode::Leaf { value: 0.0 });
        nodes.push(TreeNode::Leaf { value: 0.0 });
        nodes[leaf.node] = TreeNode::Split {
            feature: split.feature,
            bin: split.bin,
            default_left: true,
            left: left_id,
            right: left_id + 1,
        };

        let need_left = can_split(left_sums.count);
        let need_right = can_split(right_sums.count);
        let (left_hist, right_hist) = if need_left || need_right {
            if left_rows.len() <= right_rows.len() {
                let small = Histogram::build(data, &left_rows, features, grad, hess);
                let large = parent_hist.subtract(&small);
                (small, large)
            } else {
                let small = Histogram::build(data, &right_rows, features, grad, hess);
                let large = parent_hist.subtract(&small);
                (large, small)
            }
        } else {
            (Histogram::default(), Histogram::default())
        };

        for (node, rows, sums, hist, splittable) in [
            (left_id, left_rows, left_sums, left_hist, need_left),
            (left_id + 1, right_rows, right_sums, right_hist, need_right),
        ] {
            let mut child = OpenLeaf {
                node,
                rows,
                hist: None,
                sums,
                split: None,
            };
            if splittable {
                #[cfg(debug_assertions)]
                check_histogram(&hist, sums);
                child.split = best_split(&hist, features, sums, &constraints);
                if child.split.is_some() {
                    child.hist = Some(hist);
                }
            }
            open.push(child);
        }
    }

    for leaf in &open {
        nodes[leaf.node] = TreeNode::Leaf {
            value: leaf_value(leaf.sums.grad, leaf.sums.hess, config.lambda_l2),
        };
    }
    Tree::canonical(&nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grow(columns: Vec<Vec<u16>>, n_bins: Vec<usize>, g: &[f64], h: &[f64], cfg: GrowConfig) -> (BinnedMatrix, Tree) {
        let data = BinnedMatrix::from_columns(columns, n_bins);
        let features: Vec<usize> = (0..data.n_features()).collect();
        let rows = (0..data.n_rows() as u32).collect();
        let tree = grow_tree(&data, rows, &features, g, h, &cfg);
        (data, tree)
    }

    const STUMP: GrowConfig = GrowConfig {
        num_leaves: 2,
        min_data_in_leaf: 1,
        lambda_l2: 0.0,
    };

    #[test]
    fn stump_matches_best_split() {
        let g = [0.5, 0.5, -0.5, -0.5];
        let h = [0.25; 4];
        let (_, tree) = grow(vec![vec![0, 1, 2, 3]], vec![4], &g, &h, STUMP);
        assert_eq!(tree.root_split(), Some((0, 1)));
        assert_eq!(tree.n_leaves(), 2);
        // left leaf: -1 / 0.5 = -2, right leaf: 2
        assert_eq!(tree.nodes()[1], TreeNode::Leaf { value: -2.0 });
        assert_eq!(tree.nodes()[2], TreeNode::Leaf { value: 2.0 });
    }

    #[test]
    fn pure_node_is_single_leaf() {
        let g = [-0.5; 6];
        let h = [0.25; 6];
        let cfg = GrowConfig {
            num_leaves: 8,
            min_data_in_leaf: 1,
            lambda_l2: 1.0,
        };
        let (_, tree) = grow(vec![vec![0, 1, 2, 0, 1, 2]], vec![3], &g, &h, cfg);
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.nodes()[0], TreeNode::Leaf { value: 3.0 / 2.5 });
    }

    #[test]
    fn xor_quadrants_with_four_leaves() {
        // two binary features, label = a xor b, 5 copies per quadrant
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut g = Vec::new();
        for (qa, qb) in [(0u16, 0u16), (0, 1), (1, 0), (1, 1)] {
            for _ in 0..5 {
                a.push(qa);
                b.push(qb);
                let y = (qa ^ qb) as f64;
                g.push(0.5 - y);
            }
        }
        // break the root-level symmetry so some first split has positive gain
        g[0] = 0.25;
        let h = vec![0.25; g.len()];
        let cfg = GrowConfig {
            num_leaves: 4,
            min_data_in_leaf: 1,
            lambda_l2: 0.0,
        };
        let (data, tree) = grow(vec![a, b], vec![2, 2], &g, &h, cfg);
        assert_eq!(tree.n_leaves(), 4);
        for r in 0..data.n_rows() {
            let y = (data.get(r, 0) ^ data.get(r, 1)) as f64;
            let v = tree.predict_binned(&data, r);
            assert_eq!(v > 0.0, y == 1.0, "row {r}");
        }
    }

    #[test]
    fn leaf_budget_is_respected() {
        let n = 200;
        let col: Vec<u16> = (0..n).map(|i| (i % 50) as u16).collect();
        let g: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 8.0).collect();
        let h = vec![0.25; n];
        for leaves in [2, 3, 7, 16] {
            let cfg = GrowConfig {
                num_leaves: leaves,
                min_data_in_leaf: 3,
                lambda_l2: 0.5,
            };
            let (_, tree) = grow(vec![col.clone()], vec![50], &g, &h, cfg);
            assert!(tree.n_leaves() <= leaves);
            assert!(Tree::from_nodes(tree.nodes().to_vec()).is_some());
        }
    }

    #[test]
    fn raw_and_binned_routing_agree() {
        let mapper = BinMapper::from_thresholds(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let raw = [0.5f32, 1.0, 1.5, 2.5, 3.0, 9.0];
        let col: Vec<u16> = raw.iter().map(|&v| mapper.bin(0, v)).collect();
        let g = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
        let h = [0.25; 6];
        let (data, tree) = grow(vec![col], vec![4], &g, &h, STUMP);
        for (r, &v) in raw.iter().enumerate() {
            assert_eq!(tree.predict_raw(&mapper, &[v]), tree.predict_binned(&data, r));
        }
        assert_eq!(tree.predict_raw(&mapper, &[f32::NAN]), tree.predict_raw(&mapper, &[-1e30]));
    }

    #[test]
    fn from_nodes_rejects_bad_links() {
        let bad = vec![TreeNode::Split {
            feature: 0,
            bin: 0,
            default_left: true,
            left: 0,
            right: 1,
        }];
        assert!(Tree::from_nodes(bad).is_none());
        assert!(Tree::from_nodes(vec![]).is_none());
        assert!(Tree::from_nodes(vec![TreeNode::Leaf { value: f64::NAN }]).is_none());
    }
}
