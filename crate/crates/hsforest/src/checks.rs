//! Sampler-validation utilities: prior simulation and the
//! marginal-vs-successive-conditional comparison ("getting it right").
//!
//! The marginal simulator draws `(theta, y)` from the joint model; the
//! successive simulator alternates one full Gibbs sweep of `theta | y` with a
//! regeneration of `y | theta`. If the transition kernel targets the right
//! posterior, both simulators share every marginal, so test statistics must
//! agree up to Monte Carlo error.

use crate::data::Matrix;
use crate::dist::{sample_inverse_gamma, RngStream};
use crate::error::Result;
use crate::horseshoe::{draw_global_from_prior, draw_leaf_params_from_prior, ShrinkageConfig};
use crate::moves::{MoveConfig, TreePrior};
use crate::sampler::{update_sigma2, ForestState};
use crate::tree::{partition_rows, sample_valid_split, split_probability, LeafParams, SplitCache, Tree};

/// Draw a tree structure from the generative prior: a node at depth `d`
/// splits with probability `rho_d`, with its rule uniform over the node's
/// valid splits. A split decision at a node with no valid split restarts the
/// whole draw, which realizes the prior conditioned on valid partitions.
pub fn draw_tree_structure_from_prior(
    x: &Matrix,
    rows: &[u32],
    prior: TreePrior,
    rng: &mut RngStream,
) -> Tree {
    'restart: loop {
        let mut tree = Tree::root_only(LeafParams::neutral());
        // frontier of (node id, rows, depth)
        let mut frontier = vec![(0usize, rows.to_vec(), 0usize)];
        while let Some((id, node_rows, depth)) = frontier.pop() {
            let rho = split_probability(depth, prior.a, prior.b);
            if rng.uniform() >= rho {
                continue;
            }
            let Some(rule) = sample_valid_split(x, &node_rows, None, rng) else {
                continue 'restart;
            };
            let (left_rows, right_rows) = partition_rows(x, &node_rows, rule);
            let next = tree.n_nodes();
            tree.grow(id, rule, LeafParams::neutral(), LeafParams::neutral());
            frontier.push((next, left_rows, depth + 1));
            frontier.push((next + 1, right_rows, depth + 1));
        }
        return tree;
    }
}

/// Configuration of the getting-it-right harness: a small single-forest
/// model with continuous outcomes.
#[derive(Debug, Clone)]
pub struct GewekeConfig {
    pub x: Matrix,
    pub m: usize,
    pub k: f64,
    pub omega: f64,
    pub tree_prior: TreePrior,
    pub moves: MoveConfig,
    /// Error-variance prior degrees of freedom; pick it large enough that
    /// the statistics compared have finite variance.
    pub nu_prior: f64,
    pub psi_prior: f64,
}

/// Test statistics tracked by the harness.
pub const GEWEKE_STAT_NAMES: [&str; 4] =
    ["sigma2", "tau2/(1+tau2)", "mean leaves", "mean depth"];

/// Comparison result: one z-score per statistic.
#[derive(Debug, Clone)]
pub struct GewekeReport {
    pub marginal_mean: Vec<f64>,
    pub successive_mean: Vec<f64>,
    pub z_scores: Vec<f64>,
}

pub struct GewekeHarness {
    cfg: GewekeConfig,
    shrink_cfg: ShrinkageConfig,
    split_cache: SplitCache,
}

impl GewekeHarness {
    pub fn new(cfg: GewekeConfig) -> Result<Self> {
        let shrink_cfg = ShrinkageConfig::new(cfg.omega, cfg.k, cfg.m)?;
        let rows: Vec<u32> = (0..cfg.x.n_rows() as u32).collect();
        let split_cache = SplitCache::build(&cfg.x, &rows);
        Ok(Self {
            cfg,
            shrink_cfg,
            split_cache,
        })
    }

    fn n(&self) -> usize {
        self.cfg.x.n_rows()
    }

    /// Draw the full parameter state from the prior.
    fn prior_state(&self, rng: &mut RngStream) -> Result<(ForestState, f64)> {
        let rows: Vec<u32> = (0..self.n() as u32).collect();
        let mut trees = Vec::with_capacity(self.cfg.m);
        let mut globals = Vec::with_capacity(self.cfg.m);
        for _ in 0..self.cfg.m {
            let shrink = draw_global_from_prior(&self.shrink_cfg, rng)?;
            let mut tree =
                draw_tree_structure_from_prior(&self.cfg.x, &rows, self.cfg.tree_prior, rng);
            for id in tree.leaf_ids() {
                let params = draw_leaf_params_from_prior(shrink.tau2, &self.shrink_cfg, rng)?;
                tree.set_leaf_params(id, params);
            }
            trees.push(tree);
            globals.push(shrink);
        }
        let forest = ForestState::from_parts(trees, globals, self.shrink_cfg, &self.cfg.x);
        let sigma2 = sample_inverse_gamma(
            self.cfg.nu_prior / 2.0,
            self.cfg.nu_prior * self.cfg.psi_prior / 2.0,
            rng,
        )?;
        Ok((forest, sigma2))
    }

    /// Draw outcomes from the likelihood at the current state.
    fn regenerate(&self, forest: &ForestState, sigma2: f64, rng: &mut RngStream) -> Vec<f64> {
        let sd = sigma2.sqrt();
        (0..self.n())
            .map(|i| forest.fit[i] + sd * rng.standard_normal())
            .collect()
    }

    /// One full Gibbs sweep of the transition kernel.
    fn sweep(
        &self,
        forest: &mut ForestState,
        sigma2: &mut f64,
        y: &[f64],
        rng: &mut RngStream,
    ) -> Result<()> {
        let n = self.n();
        let mut resid = vec![0.0; n];
        for j in 0..self.cfg.m {
            for i in 0..n {
                resid[i] = y[i] - (forest.fit[i] - forest.contribution(j, i));
            }
            forest.update_tree(
                j,
                &self.cfg.x,
                Some(&self.split_cache),
                &resid,
                None,
                *sigma2,
                self.cfg.tree_prior,
                &self.cfg.moves,
                rng,
            )?;
        }
        for i in 0..n {
            resid[i] = y[i] - forest.fit[i];
        }
        *sigma2 = update_sigma2(&resid, self.cfg.nu_prior, self.cfg.psi_prior, rng)?;
        Ok(())
    }

    fn statistics(&self, forest: &ForestState, sigma2: f64) -> [f64; 4] {
        let m = self.cfg.m as f64;
        let tau_bounded = forest
            .globals
            .iter()
            .map(|g| g.tau2 / (1.0 + g.tau2))
            .sum::<f64>()
            / m;
        let leaves = forest.mean_leaves();
        let depth = forest
            .trees
            .iter()
            .map(|t| t.max_depth() as f64)
            .sum::<f64>()
            / m;
        [sigma2, tau_bounded, leaves, depth]
    }

    /// Run both simulators for `iterations` steps each and compare the
    /// statistic means by z-score, using batch means for the autocorrelated
    /// successive chain.
    pub fn run(&self, iterations: usize, seed: u64) -> Result<GewekeReport> {
        let mut rng = RngStream::new(seed, 0);
        let n_stats = GEWEKE_STAT_NAMES.len();

        let mut marginal = vec![Vec::with_capacity(iterations); n_stats];
        for _ in 0..iterations {
            let (forest, sigma2) = self.prior_state(&mut rng)?;
            let stats = self.statistics(&forest, sigma2);
            for (acc, s) in marginal.iter_mut().zip(stats) {
                acc.push(s);
            }
        }

        let mut successive = vec![Vec::with_capacity(iterations); n_stats];
        let (mut forest, mut sigma2) = self.prior_state(&mut rng)?;
        let mut y = self.regenerate(&forest, sigma2, &mut rng);
        for _ in 0..iterations {
            self.sweep(&mut forest, &mut sigma2, &y, &mut rng)?;
            y = self.regenerate(&forest, sigma2, &mut rng);
            let stats = self.statistics(&forest, sigma2);
            for (acc, s) in successive.iter_mut().zip(stats) {
                acc.push(s);
            }
        }

        let mut marginal_mean = Vec::with_capacity(n_stats);
        let mut successive_mean = Vec::with_capacity(n_stats);
        let mut z_scores = Vec::with_capacity(n_stats);
        for s in 0..n_stats {
            let (m_mean, m_se2) = iid_mean_se2(&marginal[s]);
            let (s_mean, s_se2) = batch_mean_se2(&successive[s], 100);
            marginal_mean.push(m_mean);
            successive_mean.push(s_mean);
            z_scores.push((m_mean - s_mean) / (m_se2 + s_se2).sqrt());
        }
        Ok(GewekeReport {
            marginal_mean,
            successive_mean,
            z_scores,
        })
    }
}

fn iid_mean_se2(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var / n)
}

/// Mean and squared standard error via batch means, for autocorrelated
/// sequences.
fn batch_mean_se2(xs: &[f64], n_batches: usize) -> (f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let size = xs.len() / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let bm = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>() / (n_batches as f64 - 1.0);
    (mean, var / n_batches as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_trees_are_valid_partitions() {
        let mut rng = RngStream::new(3, 0);
        let x = Matrix::from_columns(
            8,
            vec![
                (0..8).map(|i| i as f64 / 8.0).collect(),
                (0..8).map(|i| ((i * 3) % 8) as f64 / 8.0).collect(),
            ],
        )
        .unwrap();
        let rows: Vec<u32> = (0..8).collect();
        let mut saw_split = false;
        for _ in 0..500 {
            let t = draw_tree_structure_from_prior(&x, &rows, TreePrior::default(), &mut rng);
            saw_split |= t.n_leaves() > 1;
            // every leaf keeps at least one observation
            let assignments = crate::tree::assign_leaves(&t, &x);
            let mut counts = vec![0usize; t.n_leaves()];
            for &a in &assignments {
                counts[a as usize] += 1;
            }
            assert!(counts.iter().all(|&c| c >= 1));
        }
        assert!(saw_split);
    }
}
