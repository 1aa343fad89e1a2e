//! Binary decision trees: covariate-space partition, prediction, the
//! tree-structure prior, and valid-split enumeration.
//!
//! Routing convention: an observation goes left iff `x[var] < cut` (strict).
//! The root has depth 0. Candidate cuts are observed values local to the
//! node, with cuts that would leave an empty child excluded, so every leaf
//! keeps at least one active observation by construction.

use crate::data::Matrix;
use crate::dist::RngStream;
use crate::error::{Error, Result};

/// A split rule `x[var] < cut`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRule {
    /// Covariate index, 0-based.
    pub var: usize,
    /// Threshold; equals one of the observed values of `var` in the node at
    /// proposal time.
    pub cut: f64,
}

/// Leaf-level parameters: the step height and its local horseshoe state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafParams {
    /// Step height in standardized log-time units.
    pub height: f64,
    /// Local shrinkage variance, strictly positive.
    pub lambda2: f64,
    /// Inverse-gamma auxiliary for the local scale, strictly positive.
    pub nu: f64,
}

impl LeafParams {
    /// Neutral starting values: `h = 0`, `lambda2 = 1`, `nu = 1`.
    pub fn neutral() -> Self {
        Self {
            height: 0.0,
            lambda2: 1.0,
            nu: 1.0,
        }
    }
}

/// One node of the arena-backed tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        params: LeafParams,
    },
    Internal {
        rule: SplitRule,
        left: usize,
        right: usize,
    },
}

/// A binary decision tree. Node 0 is the root; every internal node has
/// exactly two children.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// A single-leaf tree.
    pub fn root_only(params: LeafParams) -> Self {
        Self {
            nodes: vec![Node::Leaf { params }],
        }
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Leaf node ids in depth-first (left before right) order. This order
    /// defines the leaf ordinals used everywhere else.
    pub fn leaf_ids(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(0, &mut |id, node| {
            if matches!(node, Node::Leaf { .. }) {
                out.push(id);
            }
        });
        out
    }

    /// Ids of nog nodes: internal nodes whose two children are both leaves.
    pub fn nog_ids(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(0, &mut |id, node| {
            if let Node::Internal { left, right, .. } = node {
                let both_leaves = matches!(self.nodes[*left], Node::Leaf { .. })
                    && matches!(self.nodes[*right], Node::Leaf { .. });
                if both_leaves {
                    out.push(id);
                }
            }
        });
        out
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.len() - self.n_leaves()
    }

    /// Depth of every node (root = 0).
    pub fn depths(&self) -> Vec<usize> {
        let mut depths = vec![0usize; self.nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            depths[id] = d;
            if let Node::Internal { left, right, .. } = &self.nodes[id] {
                stack.push((*left, d + 1));
                stack.push((*right, d + 1));
            }
        }
        depths
    }

    /// Largest leaf depth.
    pub fn max_depth(&self) -> usize {
        *self.depths().iter().max().unwrap_or(&0)
    }

    fn walk(&self, id: usize, visit: &mut impl FnMut(usize, &Node)) {
        visit(id, &self.nodes[id]);
        if let Node::Internal { left, right, .. } = &self.nodes[id] {
            let (l, r) = (*left, *right);
            self.walk(l, visit);
            self.walk(r, visit);
        }
    }

    /// Leaf node id an observation is routed to; `fetch(var)` must return the
    /// observation's value for covariate `var`.
    pub fn route(&self, fetch: impl Fn(usize) -> f64) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Internal { rule, left, right } => {
                    id = if fetch(rule.var) < rule.cut {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Leaf params at a node id (panics if the id is internal).
    pub fn leaf_params(&self, id: usize) -> LeafParams {
        match &self.nodes[id] {
            Node::Leaf { params } => *params,
            Node::Internal { .. } => panic!("node {id} is internal"),
        }
    }

    pub fn set_leaf_params(&mut self, id: usize, params: LeafParams) {
        match &mut self.nodes[id] {
            Node::Leaf { params: p } => *p = params,
            Node::Internal { .. } => panic!("node {id} is internal"),
        }
    }

    /// Step height predicted for covariate vector `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let needed = self.max_var().map_or(0, |v| v + 1);
        if x.len() < needed {
            return Err(Error::InvalidInput(format!(
                "covariate vector has {} entries, tree uses index {}",
                x.len(),
                needed - 1
            )));
        }
        let id = self.route(|v| x[v]);
        Ok(self.leaf_params(id).height)
    }

    fn max_var(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { rule, .. } => Some(rule.var),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Replace leaf `leaf_id` by an internal node with two fresh leaves.
    pub fn grow(&mut self, leaf_id: usize, rule: SplitRule, left: LeafParams, right: LeafParams) {
        debug_assert!(matches!(self.nodes[leaf_id], Node::Leaf { .. }));
        let l = self.nodes.len();
        self.nodes.push(Node::Leaf { params: left });
        self.nodes.push(Node::Leaf { params: right });
        self.nodes[leaf_id] = Node::Internal {
            rule,
            left: l,
            right: l + 1,
        };
    }

    /// Collapse nog `nog_id` back to a leaf with the given params.
    pub fn prune(&mut self, nog_id: usize, params: LeafParams) {
        debug_assert!(self.nog_ids().contains(&nog_id));
        self.nodes[nog_id] = Node::Leaf { params };
        self.compact();
    }

    /// Replace the split rule at an internal node.
    pub fn set_rule(&mut self, id: usize, new_rule: SplitRule) {
        match &mut self.nodes[id] {
            Node::Internal { rule, .. } => *rule = new_rule,
            Node::Leaf { .. } => panic!("node {id} is a leaf"),
        }
    }

    /// Rebuild the arena in depth-first order, dropping orphaned slots.
    fn compact(&mut self) {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        fn copy(src: &[Node], id: usize, dst: &mut Vec<Node>) -> usize {
            let slot = dst.len();
            dst.push(src[id].clone());
            if let Node::Internal { left, right, .. } = src[id] {
                let l = copy(src, left, dst);
                let r = copy(src, right, dst);
                if let Node::Internal {
                    left: nl, right: nr, ..
                } = &mut dst[slot]
                {
                    *nl = l;
                    *nr = r;
                }
            }
            slot
        }
        copy(&self.nodes, 0, &mut nodes);
        self.nodes = nodes;
    }

    /// Log of the structural prior: product over internal nodes of
    /// `rho_d = a/(1+d)^b` and over leaves of `1 - rho_d`. Split-rule
    /// selection probabilities are excluded here; the move ratios account for
    /// them (they cancel against the proposal).
    pub fn log_structure_prior(&self, a: f64, b: f64) -> f64 {
        let depths = self.depths();
        let mut total = 0.0;
        for (id, node) in self.nodes.iter().enumerate() {
            let rho = split_probability(depths[id], a, b);
            total += match node {
                Node::Internal { .. } => rho.ln(),
                Node::Leaf { .. } => (1.0 - rho).ln(),
            };
        }
        total
    }

    /// Indented plain-text rendering for diagnostics: internal nodes as
    /// `x{var+1} < cut`, leaves as `h=height`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_node(0, 0, &mut out);
        out
    }

    fn render_node(&self, id: usize, indent: usize, out: &mut String) {
        for _ in 0..indent {
            out.push_str("  ");
        }
        match &self.nodes[id] {
            Node::Leaf { params } => {
                out.push_str(&format!("h={}\n", params.height));
            }
            Node::Internal { rule, left, right } => {
                out.push_str(&format!("x{} < {}\n", rule.var + 1, rule.cut));
                self.render_node(*left, indent + 1, out);
                self.render_node(*right, indent + 1, out);
            }
        }
    }
}

/// Probability that a node at the given depth splits, `rho_d = a/(1+d)^b`.
pub fn split_probability(depth: usize, a: f64, b: f64) -> f64 {
    a / ((1.0 + depth as f64).powf(b))
}

/// Spec-level wrapper around [`Tree::log_structure_prior`].
pub fn tree_log_prior(tree: &Tree, a: f64, b: f64) -> f64 {
    tree.log_structure_prior(a, b)
}

/// Route every row of `x` to a leaf ordinal (depth-first leaf order).
pub fn assign_leaves(tree: &Tree, x: &Matrix) -> Vec<u32> {
    let leaf_ids = tree.leaf_ids();
    let mut ordinal_of = vec![u32::MAX; tree.n_nodes()];
    for (ord, id) in leaf_ids.iter().enumerate() {
        ordinal_of[*id] = ord as u32;
    }
    (0..x.n_rows())
        .map(|i| ordinal_of[tree.route(|v| x.get(i, v))])
        .collect()
}

/// Per-leaf sufficient statistics of the residual regression.
///
/// For unit weights `n` is the observation count and `swr` the plain sum of
/// residuals; with general design weights `w` (treatment indicators or
/// treatment codes), `sw2 = sum w_i^2` takes the role of the count and
/// `swr = sum w_i r_i` that of the residual sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LeafStats {
    /// Active observations in the leaf (nonzero weight).
    pub n: usize,
    /// Sum of squared weights.
    pub sw2: f64,
    /// Weighted residual sum.
    pub swr: f64,
}

impl LeafStats {
    pub fn merge(self, other: LeafStats) -> LeafStats {
        LeafStats {
            n: self.n + other.n,
            sw2: self.sw2 + other.sw2,
            swr: self.swr + other.swr,
        }
    }
}

/// Sufficient statistics for every leaf of one tree.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionStats {
    pub leaves: Vec<LeafStats>,
}

impl PartitionStats {
    /// Accumulate stats from leaf assignments. `weights` of `None` means unit
    /// weights.
    pub fn from_assignments(
        n_leaves: usize,
        assignments: &[u32],
        residuals: &[f64],
        weights: Option<&[f64]>,
    ) -> Self {
        let mut leaves = vec![LeafStats::default(); n_leaves];
        for (i, &leaf) in assignments.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            if w == 0.0 {
                continue;
            }
            let stats = &mut leaves[leaf as usize];
            stats.n += 1;
            stats.sw2 += w * w;
            stats.swr += w * residuals[i];
        }
        Self { leaves }
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Total active observations across leaves.
    pub fn total_n(&self) -> usize {
        self.leaves.iter().map(|l| l.n).sum()
    }
}

/// All valid split rules for a node holding the given (active) rows: cuts are
/// observed values of each covariate within the node, excluding any cut that
/// would leave a child empty. May be empty.
pub fn valid_splits(rows: &[u32], x: &Matrix) -> Vec<SplitRule> {
    let mut out = Vec::new();
    let mut vals = Vec::with_capacity(rows.len());
    for var in 0..x.n_cols() {
        gather_sorted(x, var, rows, &mut vals);
        let mut prev = f64::NAN;
        for (idx, &v) in vals.iter().enumerate() {
            if idx > 0 && v != prev {
                out.push(SplitRule { var, cut: v });
            }
            prev = v;
        }
    }
    out
}

fn gather_sorted(x: &Matrix, var: usize, rows: &[u32], vals: &mut Vec<f64>) {
    vals.clear();
    vals.extend(rows.iter().map(|&r| x.get(r as usize, var)));
    vals.sort_unstable_by(|a, b| a.partial_cmp(b).expect("non-finite covariate"));
}

/// Number of valid cuts for one covariate: distinct observed values minus one.
fn cut_count_sorted(vals: &[f64]) -> usize {
    if vals.is_empty() {
        return 0;
    }
    let mut distinct = 1;
    for w in vals.windows(2) {
        if w[0] != w[1] {
            distinct += 1;
        }
    }
    distinct - 1
}

/// Cached split counts for the full active row set of a dataset. Proposals on
/// nodes that still hold every active row (root leaves, depth-0 nogs) are the
/// common case and skip the per-variable scan.
#[derive(Debug, Clone)]
pub struct SplitCache {
    n_active: usize,
    counts: Vec<usize>,
    total: usize,
    /// Sorted distinct values per variable, minimum excluded.
    cuts: Vec<Vec<f64>>,
}

impl SplitCache {
    pub fn build(x: &Matrix, active_rows: &[u32]) -> Self {
        let mut counts = Vec::with_capacity(x.n_cols());
        let mut cuts = Vec::with_capacity(x.n_cols());
        let mut vals = Vec::with_capacity(active_rows.len());
        for var in 0..x.n_cols() {
            gather_sorted(x, var, active_rows, &mut vals);
            let mut var_cuts = Vec::new();
            let mut prev = f64::NAN;
            for (idx, &v) in vals.iter().enumerate() {
                if idx > 0 && v != prev {
                    var_cuts.push(v);
                }
                prev = v;
            }
            counts.push(var_cuts.len());
            cuts.push(var_cuts);
        }
        let total = counts.iter().sum();
        Self {
            n_active: active_rows.len(),
            counts,
            total,
            cuts,
        }
    }

    pub fn n_active(&self) -> usize {
        self.n_active
    }
}

/// Draw a split rule uniformly from the valid-split set of a node, or `None`
/// when no valid split exists. Distributionally identical to sampling
/// uniformly from [`valid_splits`].
pub fn sample_valid_split(
    x: &Matrix,
    rows: &[u32],
    cache: Option<&SplitCache>,
    rng: &mut RngStream,
) -> Option<SplitRule> {
    if let Some(cache) = cache {
        if rows.len() == cache.n_active {
            if cache.total == 0 {
                return None;
            }
            let mut t = rng.index(cache.total);
            for (var, &c) in cache.counts.iter().enumerate() {
                if t < c {
                    return Some(SplitRule {
                        var,
                        cut: cache.cuts[var][t],
                    });
                }
                t -= c;
            }
            unreachable!("split cache prefix sums exhausted");
        }
    }

    let mut vals = Vec::with_capacity(rows.len());
    let mut counts = Vec::with_capacity(x.n_cols());
    let mut total = 0usize;
    for var in 0..x.n_cols() {
        gather_sorted(x, var, rows, &mut vals);
        let c = cut_count_sorted(&vals);
        counts.push(c);
        total += c;
    }
    if total == 0 {
        return None;
    }
    let mut t = rng.index(total);
    for (var, &c) in counts.iter().enumerate() {
        if t < c {
            gather_sorted(x, var, rows, &mut vals);
            vals.dedup();
            return Some(SplitRule {
                var,
                cut: vals[t + 1],
            });
        }
        t -= c;
    }
    unreachable!("split prefix sums exhausted");
}

/// Partition rows of a node by a rule: (left: `x < cut`, right: `x >= cut`).
pub fn partition_rows(x: &Matrix, rows: &[u32], rule: SplitRule) -> (Vec<u32>, Vec<u32>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &r in rows {
        if x.get(r as usize, rule.var) < rule.cut {
            left.push(r);
        } else {
            right.push(r);
        }
    }
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The two-split tree of the worked example: root `x1 < 0.7`, left child
    /// `x2 < 0.6`, leaves (yes/yes) h2, (yes/no) h3, (no) h1.
    fn example_tree() -> Tree {
        let mut t = Tree::root_only(LeafParams::neutral());
        t.grow(
            0,
            SplitRule { var: 0, cut: 0.7 },
            LeafParams::neutral(),
            LeafParams {
                height: 1.0,
                lambda2: 1.0,
                nu: 1.0,
            },
        );
        // left child of root is node 1
        t.grow(
            1,
            SplitRule { var: 1, cut: 0.6 },
            LeafParams {
                height: 2.0,
                lambda2: 1.0,
                nu: 1.0,
            },
            LeafParams {
                height: 3.0,
                lambda2: 1.0,
                nu: 1.0,
            },
        );
        t
    }

    #[test]
    fn predict_routes_like_the_figure() {
        let t = example_tree();
        assert_eq!(t.predict(&[0.8, 0.5]).unwrap(), 1.0); // no branch -> h1
        assert_eq!(t.predict(&[0.3, 0.3]).unwrap(), 2.0); // yes/yes -> h2
        assert_eq!(t.predict(&[0.3, 0.9]).unwrap(), 3.0); // yes/no -> h3
    }

    #[test]
    fn predict_checks_dimension() {
        let t = example_tree();
        assert!(t.predict(&[0.8]).is_err());
    }

    #[test]
    fn assign_single_leaf() {
        let t = Tree::root_only(LeafParams::neutral());
        let x = Matrix::from_rows(&[vec![0.1], vec![0.9], vec![0.4]]).unwrap();
        let a = assign_leaves(&t, &x);
        assert_eq!(a, vec![0, 0, 0]);
        let stats = PartitionStats::from_assignments(1, &a, &[1.0, 2.0, 3.0], None);
        assert_eq!(stats.leaves[0].n, 3);
        assert_eq!(stats.total_n(), 3);
    }

    #[test]
    fn assign_matches_example() {
        let t = example_tree();
        let x = Matrix::from_rows(&[vec![0.8, 0.5], vec![0.3, 0.3]]).unwrap();
        let a = assign_leaves(&t, &x);
        assert_ne!(a[0], a[1]);
        let stats = PartitionStats::from_assignments(3, &a, &[0.0, 0.0], None);
        let counts: Vec<usize> = stats.leaves.iter().map(|l| l.n).collect();
        assert_eq!(counts.iter().sum::<usize>(), 2);
        assert!(counts.iter().all(|&c| c <= 1));
    }

    #[test]
    fn design_matrix_reproduces_predict() {
        // D h must equal predict row-wise, with D built from assignments.
        let t = example_tree();
        let x = Matrix::from_rows(&[
            vec![0.8, 0.5],
            vec![0.3, 0.3],
            vec![0.3, 0.9],
            vec![0.65, 0.61],
        ])
        .unwrap();
        let a = assign_leaves(&t, &x);
        let heights: Vec<f64> = t
            .leaf_ids()
            .iter()
            .map(|&id| t.leaf_params(id).height)
            .collect();
        for i in 0..x.n_rows() {
            let via_design = heights[a[i] as usize];
            let direct = t.predict(&x.row(i)).unwrap();
            assert_eq!(via_design, direct);
        }
    }

    #[test]
    fn structure_prior_values() {
        let (a, b) = (0.95, 2.0);
        let root = Tree::root_only(LeafParams::neutral());
        assert!((root.log_structure_prior(a, b) - (0.05f64).ln()).abs() < 1e-15);

        let mut t = Tree::root_only(LeafParams::neutral());
        t.grow(
            0,
            SplitRule { var: 0, cut: 0.5 },
            LeafParams::neutral(),
            LeafParams::neutral(),
        );
        let rho1 = 0.95 / 4.0;
        let expect = (0.95f64 * (1.0 - rho1) * (1.0 - rho1)).ln();
        assert!((t.log_structure_prior(a, b) - expect).abs() < 1e-12);
        assert!((expect - (0.552_335_937_5f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn valid_splits_examples() {
        // ties only
        let x = Matrix::from_rows(&[vec![0.2], vec![0.2]]).unwrap();
        assert!(valid_splits(&[0, 1], &x).is_empty());

        // three distinct values: the minimum is excluded
        let x = Matrix::from_rows(&[vec![0.1], vec![0.5], vec![0.9]]).unwrap();
        let splits = valid_splits(&[0, 1, 2], &x);
        let cuts: Vec<f64> = splits.iter().map(|s| s.cut).collect();
        assert_eq!(cuts, vec![0.5, 0.9]);

        // singleton node
        assert!(valid_splits(&[1], &x).is_empty());
    }

    #[test]
    fn sampled_split_matches_enumeration() {
        let x = Matrix::from_rows(&[
            vec![0.1, 0.3],
            vec![0.5, 0.3],
            vec![0.9, 0.7],
            vec![0.5, 0.2],
        ])
        .unwrap();
        let rows = [0u32, 1, 2, 3];
        let set = valid_splits(&rows, &x);
        let mut rng = RngStream::new(5, 0);
        let mut seen = vec![0usize; set.len()];
        let trials = 20_000;
        for _ in 0..trials {
            let s = sample_valid_split(&x, &rows, None, &mut rng).unwrap();
            let idx = set
                .iter()
                .position(|t| t.var == s.var && t.cut == s.cut)
                .expect("sampled split not in enumerated set");
            seen[idx] += 1;
        }
        let expected = trials as f64 / set.len() as f64;
        for (i, &c) in seen.iter().enumerate() {
            assert!(
                (c as f64 - expected).abs() < 5.0 * expected.sqrt(),
                "split {i} seen {c}, expected ~{expected}"
            );
        }
        // cache path produces the same distribution support
        let cache = SplitCache::build(&x, &rows);
        for _ in 0..2000 {
            let s = sample_valid_split(&x, &rows, Some(&cache), &mut rng).unwrap();
            assert!(set.iter().any(|t| t.var == s.var && t.cut == s.cut));
        }
    }

    #[test]
    fn no_valid_split_returns_none() {
        let x = Matrix::from_rows(&[vec![0.2], vec![0.2]]).unwrap();
        let mut rng = RngStream::new(1, 0);
        assert!(sample_valid_split(&x, &[0, 1], None, &mut rng).is_none());
        assert!(sample_valid_split(&x, &[0], None, &mut rng).is_none());
    }

    #[test]
    fn render_is_indented() {
        let t = example_tree();
        let text = t.render();
        assert!(text.starts_with("x1 < 0.7\n"));
        assert!(text.contains("  x2 < 0.6\n"));
        assert!(text.contains("    h=2\n"));
        assert!(text.contains("  h=1\n"));
    }

    #[test]
    fn prune_restores_leaf_and_compacts() {
        let mut t = example_tree();
        let nogs = t.nog_ids();
        assert_eq!(nogs.len(), 1);
        t.prune(nogs[0], LeafParams::neutral());
        assert_eq!(t.n_leaves(), 2);
        assert_eq!(t.n_nodes(), 3);
        assert_eq!(t.predict(&[0.3, 0.9]).unwrap(), 0.0);
        assert_eq!(t.predict(&[0.8, 0.1]).unwrap(), 1.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn random_tree(seed: u64, max_depth: usize) -> Tree {
            let mut rng = RngStream::new(seed, 77);
            let mut t = Tree::root_only(LeafParams::neutral());
            for _ in 0..max_depth {
                let leaves = t.leaf_ids();
                let depths = t.depths();
                let pick = leaves[rng.index(leaves.len())];
                if depths[pick] >= max_depth || rng.uniform() < 0.35 {
                    continue;
                }
                let rule = SplitRule {
                    var: rng.index(3),
                    cut: rng.uniform(),
                };
                let mut lp = LeafParams::neutral();
                lp.height = rng.standard_normal();
                let mut rp = LeafParams::neutral();
                rp.height = rng.standard_normal();
                t.grow(pick, rule, lp, rp);
            }
            t
        }

        /// Conjunction of path conditions leading to a leaf.
        fn leaf_predicates(t: &Tree) -> Vec<Vec<(SplitRule, bool)>> {
            let mut out = Vec::new();
            fn descend(
                t: &Tree,
                id: usize,
                path: &mut Vec<(SplitRule, bool)>,
                out: &mut Vec<Vec<(SplitRule, bool)>>,
            ) {
                match t.node(id) {
                    Node::Leaf { .. } => out.push(path.clone()),
                    Node::Internal { rule, left, right } => {
                        path.push((*rule, true));
                        descend(t, *left, path, out);
                        path.pop();
                        path.push((*rule, false));
                        descend(t, *right, path, out);
                        path.pop();
                    }
                }
            }
            descend(t, 0, &mut Vec::new(), &mut out);
            out
        }

        proptest! {
            #[test]
            fn partition_is_exhaustive_and_disjoint(seed in 0u64..500, x0 in 0.0f64..1.0, x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
                let t = random_tree(seed, 4);
                let x = [x0, x1, x2];
                let satisfied = leaf_predicates(&t)
                    .iter()
                    .filter(|path| {
                        path.iter().all(|(rule, go_left)| {
                            let cond = x[rule.var] < rule.cut;
                            cond == *go_left
                        })
                    })
                    .count();
                prop_assert_eq!(satisfied, 1);
            }

            #[test]
            fn leaf_and_nog_counts(seed in 0u64..500) {
                let t = random_tree(seed, 5);
                prop_assert_eq!(t.n_leaves(), t.n_internal() + 1);
                prop_assert!(t.nog_ids().len() * 2 <= t.n_leaves());
                if t.n_internal() > 0 {
                    prop_assert!(!t.nog_ids().is_empty());
                }
            }

            #[test]
            fn deep_tree_prior_is_finite_negative(seed in 0u64..200, a in 0.05f64..0.95, b in 0.0f64..3.0) {
                let t = random_tree(seed, 4);
                let lp = t.log_structure_prior(a, b);
                prop_assert!(lp.is_finite());
                if t.n_internal() > 0 || a < 1.0 {
                    prop_assert!(lp < 0.0);
                }
            }
        }
    }
}
