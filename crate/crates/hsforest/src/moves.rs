//! Reversible-jump Metropolis-Hastings tree updates: GROW, PRUNE, and CHANGE
//! proposals with pseudo-Gibbs parameter draws and exact acceptance ratios.
//!
//! Parameter proposals mimic the full-conditional updates, seeded from the
//! node being replaced: for a new leaf, `nu' ~ IG(1, 1/alpha^2 + 1/lambda2_seed)`,
//! then `lambda2' ~ IG(1, 1/nu' + h_seed^2 / (2 tau2 omega))`, then `h'` from
//! the height conditional at the leaf's residual statistics. The acceptance
//! ratio multiplies the likelihood ratio over the affected region, the prior
//! ratio (tree structure plus leaf parameters), and the transition ratio;
//! the Jacobian is one. Split-rule selection probabilities cancel between
//! proposal and structure prior (both are uniform over the node's valid
//! splits) and never appear. PRUNE reverses GROW exactly, with its parameter
//! kernel seeded from the left child.

use crate::data::Matrix;
use crate::dist::{
    inv_gamma_logpdf, normal_logpdf, sample_inverse_gamma, RngStream,
};
use crate::error::{Error, Result};
use crate::horseshoe::{
    collapsed_scale_update, lambda2_conditional_scale, nu_conditional_scale, refresh_leaf_block,
    weighted_leaf_conditional, GlobalShrinkage, ShrinkageConfig,
};
use crate::tree::{
    assign_leaves, partition_rows, sample_valid_split, split_probability, LeafParams, LeafStats,
    PartitionStats, SplitCache, SplitRule, Tree,
};

/// Move-kind selection probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveConfig {
    pub p_grow: f64,
    pub p_prune: f64,
    pub p_change: f64,
}

impl Default for MoveConfig {
    fn default() -> Self {
        Self {
            p_grow: 0.4,
            p_prune: 0.4,
            p_change: 0.2,
        }
    }
}

impl MoveConfig {
    pub fn validate(&self) -> Result<()> {
        let s = self.p_grow + self.p_prune + self.p_change;
        if self.p_grow < 0.0 || self.p_prune < 0.0 || self.p_change < 0.0 {
            return Err(Error::InvalidParameter(
                "move probabilities must be non-negative".into(),
            ));
        }
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "move probabilities must sum to 1, got {s}"
            )));
        }
        if self.p_grow > 0.0 && self.p_prune == 0.0 {
            return Err(Error::InvalidParameter(
                "p_prune must be positive whenever p_grow is (reversibility)".into(),
            ));
        }
        Ok(())
    }
}

/// Tree-structure prior hyperparameters `rho_d = a / (1+d)^b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreePrior {
    pub a: f64,
    pub b: f64,
}

impl Default for TreePrior {
    fn default() -> Self {
        Self { a: 0.95, b: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
}

/// Shared inputs of one tree update.
pub struct TreeUpdateCtx<'a> {
    pub x: &'a Matrix,
    pub resid: &'a [f64],
    /// Per-row design weights; `None` means unit weights. Rows with zero
    /// weight carry no likelihood and do not count toward leaf occupancy.
    pub weights: Option<&'a [f64]>,
    pub sigma2: f64,
    pub cfg: &'a ShrinkageConfig,
    pub tree_prior: TreePrior,
    pub moves: &'a MoveConfig,
    /// Valid-split cache for the full active row set.
    pub split_cache: Option<&'a SplitCache>,
    /// How many collapsed scale-update rounds to run per tree update.
    pub collapsed_rounds: usize,
}

/// One affected leaf: its parameters and the residual statistics of its
/// region.
#[derive(Debug, Clone, Copy)]
pub struct LeafDescriptor {
    pub params: LeafParams,
    pub stats: LeafStats,
}

/// A fully specified jump proposal, carrying everything the acceptance ratio
/// needs.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub kind: MoveKind,
    pub new_tree: Tree,
    /// Leaf ordinal per row under the proposed tree.
    pub new_assignments: Vec<u32>,
    /// Depth of the structural node (grown leaf, pruned or changed nog).
    pub depth: usize,
    /// Affected leaves of the current tree (grow: the split leaf; prune and
    /// change: the two children, left first).
    pub old: Vec<LeafDescriptor>,
    /// Affected leaves of the proposed tree (grow and change: the two
    /// children, left first; prune: the merged leaf).
    pub new: Vec<LeafDescriptor>,
    pub n_leaves_current: usize,
    pub n_nogs_current: usize,
    pub n_leaves_new: usize,
    pub n_nogs_new: usize,
    /// Log density of the parameter draws made by this move.
    pub log_forward: f64,
    /// Log density of the reverse move's parameter kernel evaluated at the
    /// replaced parameters.
    pub log_reverse: f64,
}

/// Outcome flags of one reversible-jump update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    pub accepted: bool,
    /// The proposal could not be formed (no valid split, no nog).
    pub auto_rejected: bool,
}

/// Log structural-prior ratio of growing a leaf at `depth`:
/// `rho_d (1 - rho_{d+1})^2 / (1 - rho_d)`.
pub fn grow_log_structure_ratio(depth: usize, prior: TreePrior) -> f64 {
    let rho_d = split_probability(depth, prior.a, prior.b);
    let rho_c = split_probability(depth + 1, prior.a, prior.b);
    rho_d.ln() + 2.0 * (1.0 - rho_c).ln() - (1.0 - rho_d).ln()
}

/// Log prior density of one leaf's parameter triple `(h, lambda2, nu)`.
fn leaf_param_log_prior(p: &LeafParams, tau2: f64, cfg: &ShrinkageConfig) -> f64 {
    normal_logpdf(p.height, 0.0, cfg.omega * tau2 * p.lambda2)
        + inv_gamma_logpdf(p.lambda2, 0.5, 1.0 / p.nu)
        + inv_gamma_logpdf(p.nu, 0.5, 1.0 / (cfg.alpha * cfg.alpha))
}

/// Height-dependent part of the leaf log likelihood; the parts that do not
/// involve the height are identical on both sides of every move and cancel.
fn leaf_loglik_part(stats: &LeafStats, h: f64, sigma2: f64) -> f64 {
    (2.0 * h * stats.swr - h * h * stats.sw2) / (2.0 * sigma2)
}

/// Sequential pseudo-Gibbs kernel for one leaf, seeded by `(h, lambda2)` of
/// the node being replaced. Returns the drawn params and their log density.
fn draw_leaf_proposal(
    seed: LeafParams,
    stats: &LeafStats,
    tau2: f64,
    cfg: &ShrinkageConfig,
    sigma2: f64,
    rng: &mut RngStream,
) -> Result<(LeafParams, f64)> {
    let nu_scale = nu_conditional_scale(cfg.alpha, seed.lambda2);
    let nu = sample_inverse_gamma(1.0, nu_scale, rng)?;
    let l2_scale = lambda2_conditional_scale(seed.height, tau2, cfg.omega, nu);
    let lambda2 = sample_inverse_gamma(1.0, l2_scale, rng)?;
    let (mean, var) = weighted_leaf_conditional(stats, sigma2, tau2, lambda2, cfg.omega);
    let height = mean + var.sqrt() * rng.standard_normal();
    let params = LeafParams {
        height,
        lambda2,
        nu,
    };
    Ok((params, eval_leaf_proposal(seed, stats, &params, tau2, cfg, sigma2)))
}

/// Density of the same kernel evaluated at fixed params.
fn eval_leaf_proposal(
    seed: LeafParams,
    stats: &LeafStats,
    at: &LeafParams,
    tau2: f64,
    cfg: &ShrinkageConfig,
    sigma2: f64,
) -> f64 {
    let nu_scale = nu_conditional_scale(cfg.alpha, seed.lambda2);
    let l2_scale = lambda2_conditional_scale(seed.height, tau2, cfg.omega, at.nu);
    let (mean, var) = weighted_leaf_conditional(stats, sigma2, tau2, at.lambda2, cfg.omega);
    inv_gamma_logpdf(at.nu, 1.0, nu_scale)
        + inv_gamma_logpdf(at.lambda2, 1.0, l2_scale)
        + normal_logpdf(at.height, mean, var)
}

fn stats_for_rows(rows: &[u32], resid: &[f64], weights: Option<&[f64]>) -> LeafStats {
    let mut s = LeafStats::default();
    for &r in rows {
        let i = r as usize;
        let w = weights.map_or(1.0, |w| w[i]);
        s.n += 1;
        s.sw2 += w * w;
        s.swr += w * resid[i];
    }
    s
}

/// Rows with nonzero weight, grouped by leaf ordinal.
fn active_rows_by_leaf(
    n_leaves: usize,
    assignments: &[u32],
    weights: Option<&[f64]>,
) -> Vec<Vec<u32>> {
    let mut rows = vec![Vec::new(); n_leaves];
    for (i, &leaf) in assignments.iter().enumerate() {
        if weights.map_or(1.0, |w| w[i]) != 0.0 {
            rows[leaf as usize].push(i as u32);
        }
    }
    rows
}

fn ordinal_of_leaf(tree: &Tree, id: usize) -> usize {
    tree.leaf_ids()
        .iter()
        .position(|&l| l == id)
        .expect("leaf id not in tree")
}

/// Build the GROW proposal for a given leaf, rule, and already-drawn child
/// parameters. Sampling wrappers and the matched-pair tests share this path.
pub fn build_grow(
    tree: &Tree,
    ctx: &TreeUpdateCtx,
    shrink: &GlobalShrinkage,
    leaf_id: usize,
    rule: SplitRule,
    left_params: LeafParams,
    right_params: LeafParams,
) -> Proposal {
    let assignments = assign_leaves(tree, ctx.x);
    let rows = active_rows_by_leaf(tree.n_leaves(), &assignments, ctx.weights);
    let ord = ordinal_of_leaf(tree, leaf_id);
    let (left_rows, right_rows) = partition_rows(ctx.x, &rows[ord], rule);
    let stats_l = stats_for_rows(&left_rows, ctx.resid, ctx.weights);
    let stats_r = stats_for_rows(&right_rows, ctx.resid, ctx.weights);
    let parent = tree.leaf_params(leaf_id);
    let merged = stats_l.merge(stats_r);

    let log_forward = eval_leaf_proposal(parent, &stats_l, &left_params, shrink.tau2, ctx.cfg, ctx.sigma2)
        + eval_leaf_proposal(parent, &stats_r, &right_params, shrink.tau2, ctx.cfg, ctx.sigma2);
    // Reverse PRUNE kernel: seeded from the left child of the grown pair.
    let log_reverse =
        eval_leaf_proposal(left_params, &merged, &parent, shrink.tau2, ctx.cfg, ctx.sigma2);

    let mut new_tree = tree.clone();
    new_tree.grow(leaf_id, rule, left_params, right_params);
    let new_assignments = assign_leaves(&new_tree, ctx.x);
    let depth = tree.depths()[leaf_id];

    Proposal {
        kind: MoveKind::Grow,
        depth,
        old: vec![LeafDescriptor {
            params: parent,
            stats: merged,
        }],
        new: vec![
            LeafDescriptor {
                params: left_params,
                stats: stats_l,
            },
            LeafDescriptor {
                params: right_params,
                stats: stats_r,
            },
        ],
        n_leaves_current: tree.n_leaves(),
        n_nogs_current: tree.nog_ids().len(),
        n_leaves_new: new_tree.n_leaves(),
        n_nogs_new: new_tree.nog_ids().len(),
        log_forward,
        log_reverse,
        new_assignments,
        new_tree,
    }
}

/// Build the PRUNE proposal for a given nog and already-drawn merged-leaf
/// parameters.
pub fn build_prune(
    tree: &Tree,
    ctx: &TreeUpdateCtx,
    shrink: &GlobalShrinkage,
    nog_id: usize,
    parent_params: LeafParams,
) -> Proposal {
    let assignments = assign_leaves(tree, ctx.x);
    let rows = active_rows_by_leaf(tree.n_leaves(), &assignments, ctx.weights);
    let (left_id, right_id) = match tree.node(nog_id) {
        crate::tree::Node::Internal { left, right, .. } => (*left, *right),
        crate::tree::Node::Leaf { .. } => panic!("node {nog_id} is a leaf"),
    };
    let left_params = tree.leaf_params(left_id);
    let right_params = tree.leaf_params(right_id);
    let stats_l = stats_for_rows(&rows[ordinal_of_leaf(tree, left_id)], ctx.resid, ctx.weights);
    let stats_r = stats_for_rows(&rows[ordinal_of_leaf(tree, right_id)], ctx.resid, ctx.weights);
    let merged = stats_l.merge(stats_r);

    let log_forward =
        eval_leaf_proposal(left_params, &merged, &parent_params, shrink.tau2, ctx.cfg, ctx.sigma2);
    // Reverse GROW kernel: both children seeded from the merged leaf.
    let log_reverse = eval_leaf_proposal(
        parent_params,
        &stats_l,
        &left_params,
        shrink.tau2,
        ctx.cfg,
        ctx.sigma2,
    ) + eval_leaf_proposal(
        parent_params,
        &stats_r,
        &right_params,
        shrink.tau2,
        ctx.cfg,
        ctx.sigma2,
    );

    let mut new_tree = tree.clone();
    new_tree.prune(nog_id, parent_params);
    let new_assignments = assign_leaves(&new_tree, ctx.x);
    let depth = tree.depths()[nog_id];

    Proposal {
        kind: MoveKind::Prune,
        depth,
        old: vec![
            LeafDescriptor {
                params: left_params,
                stats: stats_l,
            },
            LeafDescriptor {
                params: right_params,
                stats: stats_r,
            },
        ],
        new: vec![LeafDescriptor {
            params: parent_params,
            stats: merged,
        }],
        n_leaves_current: tree.n_leaves(),
        n_nogs_current: tree.nog_ids().len(),
        n_leaves_new: new_tree.n_leaves(),
        n_nogs_new: new_tree.nog_ids().len(),
        log_forward,
        log_reverse,
        new_assignments,
        new_tree,
    }
}

/// Build the CHANGE proposal for a given nog, replacement rule, and
/// already-drawn child parameters.
pub fn build_change(
    tree: &Tree,
    ctx: &TreeUpdateCtx,
    shrink: &GlobalShrinkage,
    nog_id: usize,
    rule: SplitRule,
    left_params: LeafParams,
    right_params: LeafParams,
) -> Proposal {
    let assignments = assign_leaves(tree, ctx.x);
    let rows = active_rows_by_leaf(tree.n_leaves(), &assignments, ctx.weights);
    let (left_id, right_id) = match tree.node(nog_id) {
        crate::tree::Node::Internal { left, right, .. } => (*left, *right),
        crate::tree::Node::Leaf { .. } => panic!("node {nog_id} is a leaf"),
    };
    let old_left = tree.leaf_params(left_id);
    let old_right = tree.leaf_params(right_id);
    let old_stats_l = stats_for_rows(&rows[ordinal_of_leaf(tree, left_id)], ctx.resid, ctx.weights);
    let old_stats_r = stats_for_rows(&rows[ordinal_of_leaf(tree, right_id)], ctx.resid, ctx.weights);

    let mut node_rows = rows[ordinal_of_leaf(tree, left_id)].clone();
    node_rows.extend_from_slice(&rows[ordinal_of_leaf(tree, right_id)]);
    node_rows.sort_unstable();
    let (new_left_rows, new_right_rows) = partition_rows(ctx.x, &node_rows, rule);
    let new_stats_l = stats_for_rows(&new_left_rows, ctx.resid, ctx.weights);
    let new_stats_r = stats_for_rows(&new_right_rows, ctx.resid, ctx.weights);

    let log_forward = eval_leaf_proposal(old_left, &new_stats_l, &left_params, shrink.tau2, ctx.cfg, ctx.sigma2)
        + eval_leaf_proposal(old_right, &new_stats_r, &right_params, shrink.tau2, ctx.cfg, ctx.sigma2);
    let log_reverse = eval_leaf_proposal(left_params, &old_stats_l, &old_left, shrink.tau2, ctx.cfg, ctx.sigma2)
        + eval_leaf_proposal(right_params, &old_stats_r, &old_right, shrink.tau2, ctx.cfg, ctx.sigma2);

    let mut new_tree = tree.clone();
    new_tree.set_rule(nog_id, rule);
    new_tree.set_leaf_params(left_id, left_params);
    new_tree.set_leaf_params(right_id, right_params);
    let new_assignments = assign_leaves(&new_tree, ctx.x);
    let depth = tree.depths()[nog_id];

    Proposal {
        kind: MoveKind::Change,
        depth,
        old: vec![
            LeafDescriptor {
                params: old_left,
                stats: old_stats_l,
            },
            LeafDescriptor {
                params: old_right,
                stats: old_stats_r,
            },
        ],
        new: vec![
            LeafDescriptor {
                params: left_params,
                stats: new_stats_l,
            },
            LeafDescriptor {
                params: right_params,
                stats: new_stats_r,
            },
        ],
        n_leaves_current: tree.n_leaves(),
        n_nogs_current: tree.nog_ids().len(),
        n_leaves_new: new_tree.n_leaves(),
        n_nogs_new: new_tree.nog_ids().len(),
        log_forward,
        log_reverse,
        new_assignments,
        new_tree,
    }
}

/// Propose a GROW move, or `None` when the picked leaf admits no valid split.
pub fn propose_grow(
    tree: &Tree,
    ctx: &TreeUpdateCtx,
    shrink: &GlobalShrinkage,
    rng: &mut RngStream,
) -> Result<Option<Proposal>> {
    let leaves = tree.leaf_ids();
    let leaf_id = leaves[rng.index(leaves.len())];
    let assignments = assign_leaves(tree, ctx.x);
    let rows = active_rows_by_leaf(tree.n_leaves(), &assignments, ctx.weights);
    let node_rows = &rows[ordinal_of_leaf(tree, leaf_id)];
    let Some(rule) = sample_valid_split(ctx.x, node_rows, ctx.split_cache, rng) else {
        return Ok(None);
    };
    let (left_rows, right_rows) = partition_rows(ctx.x, node_rows, rule);
    let parent = tree.leaf_params(leaf_id);
    let stats_l = stats_for_rows(&left_rows, ctx.resid, ctx.weights);
    let stats_r = stats_for_rows(&right_rows, ctx.resid, ctx.weights);
    let (left_params, _) = draw_leaf_proposal(parent, &stats_l, shrink.tau2, ctx.cfg, ctx.sigma2, rng)?;
    let (right_params, _) =
        draw_leaf_proposal(parent, &stats_r, shrink.tau2, ctx.cfg, ctx.sigma2, rng)?;
    Ok(Some(build_grow(
        tree,
        ctx,
        shrink,
        leaf_id,
        rule,
        left_params,
        right_params,
    )))
}

/// Propose a PRUNE move, or `None` on a tree without nog nodes.
pub fn propose_prune(
    tree: &Tree,
    ctx: &TreeUpdateCtx,
    shrink: &GlobalShrinkage,
    rng: &mut RngStream,
) -> Result<Option<Proposal>> {
    let nogs = tree.nog_ids();
    if nogs.is_empty() {
        return Ok(None);
    }
    let nog_id = nogs[rng.index(nogs.len())];
    let assignments = assign_leaves(tree, ctx.x);
    let rows = active_rows_by_leaf(tree.n_leaves(), &assignments, ctx.weights);
    let (left_id, right_id) = match tree.node(nog_id) {
        crate::tree::Node::Internal { left, right, .. } => (*left, *right),
        crate::tree::Node::Leaf { .. } => unreachable!(),
    };
    let left_params = tree.leaf_params(left_id);
    let stats_l = stats_for_rows(&rows[ordinal_of_leaf(tree, left_id)], ctx.resid, ctx.weights);
    let stats_r = stats_for_rows(&rows[ordinal_of_leaf(tree, right_id)], ctx.resid, ctx.weights);
    let merged = stats_l.merge(stats_r);
    let (parent_params, _) =
        draw_leaf_proposal(left_params, &merged, shrink.tau2, ctx.cfg, ctx.sigma2, rng)?;
    Ok(Some(build_prune(tree, ctx, shrink, nog_id, parent_params)))
}

/// Propose a CHANGE move, or `None` when there is no nog or no alternative
/// split rule.
pub fn propose_change(
    tree: &Tree,
    ctx: &TreeUpdateCtx,
    shrink: &GlobalShrinkage,
    rng: &mut RngStream,
) -> Result<Option<Proposal>> {
    let nogs = tree.nog_ids();
    if nogs.is_empty() {
        return Ok(None);
    }
    let nog_id = nogs[rng.index(nogs.len())];
    let assignments = assign_leaves(tree, ctx.x);
    let rows = active_rows_by_leaf(tree.n_leaves(), &assignments, ctx.weights);
    let (left_id, right_id) = match tree.node(nog_id) {
        crate::tree::Node::Internal { left, right, .. } => (*left, *right),
        crate::tree::Node::Leaf { .. } => unreachable!(),
    };
    let mut node_rows = rows[ordinal_of_leaf(tree, left_id)].clone();
    node_rows.extend_from_slice(&rows[ordinal_of_leaf(tree, right_id)]);
    node_rows.sort_unstable();
    // A nog always admits its current rule, so fewer than two valid splits
    // means no alternative exists.
    if crate::tree::valid_splits(&node_rows, ctx.x).len() < 2 {
        return Ok(None);
    }
    let rule = sample_valid_split(ctx.x, &node_rows, ctx.split_cache, rng)
        .expect("non-empty valid-split set");
    let (new_left_rows, new_right_rows) = partition_rows(ctx.x, &node_rows, rule);
    let old_left = tree.leaf_params(left_id);
    let old_right = tree.leaf_params(right_id);
    let new_stats_l = stats_for_rows(&new_left_rows, ctx.resid, ctx.weights);
    let new_stats_r = stats_for_rows(&new_right_rows, ctx.resid, ctx.weights);
    let (left_params, _) =
        draw_leaf_proposal(old_left, &new_stats_l, shrink.tau2, ctx.cfg, ctx.sigma2, rng)?;
    let (right_params, _) =
        draw_leaf_proposal(old_right, &new_stats_r, shrink.tau2, ctx.cfg, ctx.sigma2, rng)?;
    Ok(Some(build_change(
        tree,
        ctx,
        shrink,
        nog_id,
        rule,
        left_params,
        right_params,
    )))
}

/// Log acceptance ratio `log r` of a proposal: likelihood ratio over the
/// affected region, prior ratio (structure and leaf parameters), and
/// transition ratio (selection terms and parameter-proposal densities).
/// `-inf` means certain rejection.
pub fn log_accept_ratio(
    p: &Proposal,
    moves: &MoveConfig,
    tree_prior: TreePrior,
    shrink: &GlobalShrinkage,
    cfg: &ShrinkageConfig,
    sigma2: f64,
) -> f64 {
    let lik: f64 = p
        .new
        .iter()
        .map(|d| leaf_loglik_part(&d.stats, d.params.height, sigma2))
        .sum::<f64>()
        - p.old
            .iter()
            .map(|d| leaf_loglik_part(&d.stats, d.params.height, sigma2))
            .sum::<f64>();

    let structure = match p.kind {
        MoveKind::Grow => grow_log_structure_ratio(p.depth, tree_prior),
        MoveKind::Prune => -grow_log_structure_ratio(p.depth, tree_prior),
        MoveKind::Change => 0.0,
    };
    let params_prior: f64 = p
        .new
        .iter()
        .map(|d| leaf_param_log_prior(&d.params, shrink.tau2, cfg))
        .sum::<f64>()
        - p.old
            .iter()
            .map(|d| leaf_param_log_prior(&d.params, shrink.tau2, cfg))
            .sum::<f64>();

    let selection = match p.kind {
        MoveKind::Grow => {
            moves.p_prune.ln() - moves.p_grow.ln() + (p.n_leaves_current as f64).ln()
                - (p.n_nogs_new as f64).ln()
        }
        MoveKind::Prune => {
            moves.p_grow.ln() - moves.p_prune.ln() + (p.n_nogs_current as f64).ln()
                - (p.n_leaves_new as f64).ln()
        }
        MoveKind::Change => 0.0,
    };

    lik + structure + params_prior + selection + p.log_reverse - p.log_forward
}

/// One reversible-jump update of a single tree: select a move, build the
/// proposal, accept with probability `min(1, r)`, then always run the full
/// conditional refresh of the (possibly new) tree's leaf block. Returns the
/// outcome and the final leaf assignment of every row.
pub fn rj_update_tree(
    tree: &mut Tree,
    shrink: &mut GlobalShrinkage,
    ctx: &TreeUpdateCtx,
    rng: &mut RngStream,
) -> Result<(MoveOutcome, Vec<u32>)> {
    let u = rng.uniform();
    let kind = if u < ctx.moves.p_grow {
        MoveKind::Grow
    } else if u < ctx.moves.p_grow + ctx.moves.p_prune {
        MoveKind::Prune
    } else {
        MoveKind::Change
    };
    let proposal = match kind {
        MoveKind::Grow => propose_grow(tree, ctx, shrink, rng)?,
        MoveKind::Prune => propose_prune(tree, ctx, shrink, rng)?,
        MoveKind::Change => propose_change(tree, ctx, shrink, rng)?,
    };

    let auto_rejected = proposal.is_none();
    let mut accepted = false;
    let mut assignments = None;
    if let Some(p) = proposal {
        let log_r = log_accept_ratio(&p, ctx.moves, ctx.tree_prior, shrink, ctx.cfg, ctx.sigma2);
        let u = rng.uniform().max(f64::MIN_POSITIVE);
        if u.ln() < log_r {
            *tree = p.new_tree;
            assignments = Some(p.new_assignments);
            accepted = true;
        }
    }
    let assignments = assignments.unwrap_or_else(|| assign_leaves(tree, ctx.x));

    let stats =
        PartitionStats::from_assignments(tree.n_leaves(), &assignments, ctx.resid, ctx.weights);
    // Collapsed scale jumps first (heights integrated out), then the plain
    // full-conditional refresh; both leave the posterior invariant.
    for _ in 0..ctx.collapsed_rounds {
        collapsed_scale_update(tree, &stats, shrink, ctx.cfg, ctx.sigma2, rng)?;
    }
    refresh_leaf_block(tree, &stats, shrink, ctx.cfg, ctx.sigma2, rng)?;

    Ok((
        MoveOutcome {
            kind,
            accepted,
            auto_rejected,
        },
        assignments,
    ))
}
