//! Full-conditional updates for step heights and the horseshoe shrinkage
//! hierarchy of one tree.
//!
//! The hierarchy, per tree with leaves `l = 1..L`:
//!
//! ```text
//! h_l | lambda_l^2, tau^2       ~ N(0, omega * lambda_l^2 * tau^2)
//! lambda_l^2 | nu_l             ~ IG(1/2, 1/nu_l)        nu_l ~ IG(1/2, 1/alpha^2)
//! tau^2 | xi                    ~ IG(1/2, 1/xi)          xi   ~ IG(1/2, 1/alpha^2)
//! ```
//!
//! which makes every conditional below inverse gamma, and the height
//! conditional Gaussian. Marginally `lambda_l` and `tau` are half-Cauchy with
//! scale `alpha`; they are never sampled directly, only through this
//! auxiliary chain.

use crate::dist::{sample_inverse_gamma, RngStream};
use crate::error::{Error, Result};
use crate::tree::{LeafParams, LeafStats, PartitionStats, Tree};

/// Per-tree global shrinkage state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalShrinkage {
    /// Global shrinkage variance, strictly positive.
    pub tau2: f64,
    /// Inverse-gamma auxiliary for the global scale, strictly positive.
    pub xi: f64,
}

impl GlobalShrinkage {
    /// Neutral start: `tau = alpha` (the half-Cauchy median), `xi = 1`.
    pub fn init(alpha: f64) -> Self {
        Self {
            tau2: alpha * alpha,
            xi: 1.0,
        }
    }
}

/// Fixed hyperparameters of the step-height prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageConfig {
    /// Variance scaling of the height prior (1 for a single forest, 1/2 per
    /// forest in the causal decomposition).
    pub omega: f64,
    /// Half-Cauchy scale, `alpha = k / sqrt(m)`.
    pub alpha: f64,
    /// Shrinkage level.
    pub k: f64,
    /// Tree count of the forest this config belongs to.
    pub m: usize,
}

impl ShrinkageConfig {
    pub fn new(omega: f64, k: f64, m: usize) -> Result<Self> {
        if !(omega > 0.0) || !(k > 0.0) || m == 0 {
            return Err(Error::InvalidParameter(format!(
                "shrinkage config needs omega > 0, k > 0, m >= 1; got omega={omega}, k={k}, m={m}"
            )));
        }
        Ok(Self {
            omega,
            alpha: k / (m as f64).sqrt(),
            k,
            m,
        })
    }
}

/// Gaussian conditional of one step height given weighted leaf statistics:
/// with `c = omega * tau2 * lambda2`,
///
/// ```text
/// mean = swr / (sw2 + sigma2/c),   var = sigma2 / (sw2 + sigma2/c)
/// ```
///
/// For unit weights `sw2` is the leaf count and `swr` the residual sum. The
/// `sigma2/c` term is the prior precision relative to the noise; on
/// standardized outcomes with `sigma2 = 1` it reduces to `1/c`.
pub fn weighted_leaf_conditional(
    stats: &LeafStats,
    sigma2: f64,
    tau2: f64,
    lambda2: f64,
    omega: f64,
) -> (f64, f64) {
    let c = omega * tau2 * lambda2;
    let denom = stats.sw2 + sigma2 / c;
    (stats.swr / denom, sigma2 / denom)
}

/// Conditional mean and variance of a leaf height from plain counts
/// (`n` observations, residual sum `rbar`).
pub fn leaf_height_conditional(
    n: usize,
    rbar: f64,
    sigma2: f64,
    tau2: f64,
    lambda2: f64,
    omega: f64,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "leaf conditional needs n >= 1; empty leaves are structurally excluded".into(),
        ));
    }
    if !(sigma2 > 0.0) || !(tau2 > 0.0) || !(lambda2 > 0.0) || !(omega > 0.0) {
        return Err(Error::InvalidParameter(
            "leaf conditional needs positive sigma2, tau2, lambda2, omega".into(),
        ));
    }
    let stats = LeafStats {
        n,
        sw2: n as f64,
        swr: rbar,
    };
    Ok(weighted_leaf_conditional(&stats, sigma2, tau2, lambda2, omega))
}

/// Scale of the `lambda2` conditional, `IG(1, 1/nu + h^2/(2 tau2 omega))`.
pub fn lambda2_conditional_scale(h: f64, tau2: f64, omega: f64, nu: f64) -> f64 {
    1.0 / nu + h * h / (2.0 * tau2 * omega)
}

/// Scale of the `nu` conditional, `IG(1, 1/alpha^2 + 1/lambda2)`.
pub fn nu_conditional_scale(alpha: f64, lambda2: f64) -> f64 {
    1.0 / (alpha * alpha) + 1.0 / lambda2
}

/// Shape and scale of the `tau2` conditional,
/// `IG((L+1)/2, 1/xi + (1/2 omega) * sum h_l^2/lambda_l^2)`.
pub fn tau2_conditional(
    heights: &[f64],
    lambdas: &[f64],
    xi: f64,
    omega: f64,
) -> Result<(f64, f64)> {
    if heights.len() != lambdas.len() || heights.is_empty() {
        return Err(Error::InvalidInput(format!(
            "tau2 conditional needs matching non-empty lists, got {} heights and {} lambdas",
            heights.len(),
            lambdas.len()
        )));
    }
    let l = heights.len() as f64;
    let quad: f64 = heights
        .iter()
        .zip(lambdas)
        .map(|(h, l2)| h * h / l2)
        .sum();
    Ok(((l + 1.0) / 2.0, 1.0 / xi + quad / (2.0 * omega)))
}

/// Scale of the `xi` conditional, `IG(1, 1/alpha^2 + 1/tau2)`.
pub fn xi_conditional_scale(alpha: f64, tau2: f64) -> f64 {
    1.0 / (alpha * alpha) + 1.0 / tau2
}

/// Draw `(lambda2, nu)` from their conditionals, in that order.
pub fn update_local_shrinkage(
    h: f64,
    tau2: f64,
    omega: f64,
    nu: f64,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let lambda2 = sample_inverse_gamma(1.0, lambda2_conditional_scale(h, tau2, omega, nu), rng)?;
    let nu = sample_inverse_gamma(1.0, nu_conditional_scale(alpha, lambda2), rng)?;
    Ok((lambda2, nu))
}

/// Draw `(tau2, xi)` from their conditionals, in that order.
pub fn update_global_shrinkage(
    heights: &[f64],
    lambdas: &[f64],
    xi: f64,
    omega: f64,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    let (shape, scale) = tau2_conditional(heights, lambdas, xi, omega)?;
    let tau2 = sample_inverse_gamma(shape, scale, rng)?;
    let xi = sample_inverse_gamma(1.0, xi_conditional_scale(alpha, tau2), rng)?;
    Ok((tau2, xi))
}

/// Full conditional sweep over one tree's leaf block: redraw every height
/// (their conditionals are independent given the scales), then every local
/// pair `(lambda2, nu)`, then the global pair `(tau2, xi)`.
pub fn refresh_leaf_block(
    tree: &mut Tree,
    stats: &PartitionStats,
    shrink: &mut GlobalShrinkage,
    cfg: &ShrinkageConfig,
    sigma2: f64,
    rng: &mut RngStream,
) -> Result<()> {
    let leaf_ids = tree.leaf_ids();
    if leaf_ids.len() != stats.n_leaves() {
        return Err(Error::InvalidInput(format!(
            "partition stats cover {} leaves, tree has {}",
            stats.n_leaves(),
            leaf_ids.len()
        )));
    }
    for (ord, &id) in leaf_ids.iter().enumerate() {
        let s = &stats.leaves[ord];
        if s.n == 0 {
            return Err(Error::InvalidInput(format!(
                "leaf {ord} has no active observations"
            )));
        }
        let mut params = tree.leaf_params(id);
        let (mean, var) =
            weighted_leaf_conditional(s, sigma2, shrink.tau2, params.lambda2, cfg.omega);
        params.height = mean + var.sqrt() * rng.standard_normal();
        tree.set_leaf_params(id, params);
    }
    let mut heights = Vec::with_capacity(leaf_ids.len());
    let mut lambdas = Vec::with_capacity(leaf_ids.len());
    for &id in &leaf_ids {
        let mut params = tree.leaf_params(id);
        let (lambda2, nu) = update_local_shrinkage(
            params.height,
            shrink.tau2,
            cfg.omega,
            params.nu,
            cfg.alpha,
            rng,
        )?;
        params.lambda2 = lambda2;
        params.nu = nu;
        tree.set_leaf_params(id, params);
        heights.push(params.height);
        lambdas.push(lambda2);
    }
    let (tau2, xi) =
        update_global_shrinkage(&heights, &lambdas, shrink.xi, cfg.omega, cfg.alpha, rng)?;
    shrink.tau2 = tau2;
    shrink.xi = xi;
    Ok(())
}

/// Log marginal likelihood of one leaf as a function of the height-prior
/// variance `c = omega * tau2 * lambda2`, with the height integrated out.
/// Terms not depending on `c` are dropped.
pub fn leaf_log_marginal(stats: &LeafStats, sigma2: f64, c: f64) -> f64 {
    // N(r; 0, sigma2 I + c w w^T): logdet picks up ln(sigma2 + c sw2) and the
    // quadratic form gains swr^2 / (sigma2 (sigma2/c + sw2)).
    -0.5 * (sigma2 + c * stats.sw2).ln()
        + 0.5 * stats.swr * stats.swr / (sigma2 * (sigma2 / c + stats.sw2))
}

/// Log density at `t = ln v` of the squared half-Cauchy scale: if
/// `lambda ~ C+(0, alpha)` then `v = lambda^2` has
/// `p(v) = alpha / (pi sqrt(v) (alpha^2 + v))`; including the Jacobian of
/// the log transform this is `0.5 t - ln(alpha^2 + e^t)` up to constants.
fn log_half_cauchy_sq_at_log(t: f64, alpha: f64) -> f64 {
    0.5 * t - (alpha * alpha + t.exp()).ln()
}

/// Univariate slice sampler (stepping out and shrinkage) for a log-scale
/// parameter.
fn slice_sample_log(t0: f64, width: f64, logf: impl Fn(f64) -> f64, rng: &mut RngStream) -> f64 {
    // log-scale values beyond +-600 have no posterior mass and would
    // overflow exp(); clamp the state and the bracket.
    let t0 = t0.clamp(-600.0, 600.0);
    let y = logf(t0) + rng.uniform().max(f64::MIN_POSITIVE).ln();
    let mut lo = (t0 - width * rng.uniform()).max(-600.0);
    let mut hi = (lo + width).min(600.0);
    for _ in 0..400 {
        if lo <= -600.0 || logf(lo) <= y {
            break;
        }
        lo = (lo - width).max(-600.0);
    }
    for _ in 0..400 {
        if hi >= 600.0 || logf(hi) <= y {
            break;
        }
        hi = (hi + width).min(600.0);
    }
    loop {
        let t = lo + rng.uniform() * (hi - lo);
        if logf(t) > y {
            return t;
        }
        if t < t0 {
            lo = t;
        } else {
            hi = t;
        }
    }
}

const SLICE_WIDTH: f64 = 2.0;

/// Collapsed update of the shrinkage scales: slice-sample each local
/// `lambda_l^2` and then the global `tau^2` from their conditionals with the
/// step heights integrated out (the auxiliaries `nu`, `xi` are marginalized
/// by their half-Cauchy closed form and redrawn afterwards), then redraw
/// every height from its conditional. The heavy half-Cauchy tails make these
/// jumps reach signal-supporting scales directly, which the one-step
/// inverse-gamma chain cannot; the stationary distribution is unchanged.
pub fn collapsed_scale_update(
    tree: &mut Tree,
    stats: &PartitionStats,
    shrink: &mut GlobalShrinkage,
    cfg: &ShrinkageConfig,
    sigma2: f64,
    rng: &mut RngStream,
) -> Result<()> {
    let leaf_ids = tree.leaf_ids();
    if leaf_ids.len() != stats.n_leaves() {
        return Err(Error::InvalidInput(format!(
            "partition stats cover {} leaves, tree has {}",
            stats.n_leaves(),
            leaf_ids.len()
        )));
    }
    let alpha = cfg.alpha;
    for (ord, &id) in leaf_ids.iter().enumerate() {
        let s = stats.leaves[ord];
        let mut params = tree.leaf_params(id);
        let tau2 = shrink.tau2;
        let omega = cfg.omega;
        let logf = |t: f64| {
            log_half_cauchy_sq_at_log(t, alpha)
                + leaf_log_marginal(&s, sigma2, omega * tau2 * t.exp())
        };
        let t = slice_sample_log(params.lambda2.ln(), SLICE_WIDTH, logf, rng);
        params.lambda2 = t.exp();
        params.nu = sample_inverse_gamma(1.0, nu_conditional_scale(alpha, params.lambda2), rng)?;
        tree.set_leaf_params(id, params);
    }

    let lambdas: Vec<f64> = leaf_ids
        .iter()
        .map(|&id| tree.leaf_params(id).lambda2)
        .collect();
    let omega = cfg.omega;
    let logf = |t: f64| {
        let tau2 = t.exp();
        log_half_cauchy_sq_at_log(t, alpha)
            + lambdas
                .iter()
                .zip(&stats.leaves)
                .map(|(l2, s)| leaf_log_marginal(s, sigma2, omega * tau2 * l2))
                .sum::<f64>()
    };
    let t = slice_sample_log(shrink.tau2.ln(), SLICE_WIDTH, logf, rng);
    shrink.tau2 = t.exp();
    shrink.xi = sample_inverse_gamma(1.0, xi_conditional_scale(alpha, shrink.tau2), rng)?;

    for (ord, &id) in leaf_ids.iter().enumerate() {
        let mut params = tree.leaf_params(id);
        let (mean, var) = weighted_leaf_conditional(
            &stats.leaves[ord],
            sigma2,
            shrink.tau2,
            params.lambda2,
            cfg.omega,
        );
        params.height = mean + var.sqrt() * rng.standard_normal();
        tree.set_leaf_params(id, params);
    }
    Ok(())
}

/// Draw fresh leaf params from the prior hierarchy given `tau2`; used for
/// prior simulation in model checks.
pub fn draw_leaf_params_from_prior(
    tau2: f64,
    cfg: &ShrinkageConfig,
    rng: &mut RngStream,
) -> Result<LeafParams> {
    let nu = sample_inverse_gamma(0.5, 1.0 / (cfg.alpha * cfg.alpha), rng)?;
    let lambda2 = sample_inverse_gamma(0.5, 1.0 / nu, rng)?;
    let height = (cfg.omega * tau2 * lambda2).sqrt() * rng.standard_normal();
    Ok(LeafParams {
        height,
        lambda2,
        nu,
    })
}

/// Draw `(tau2, xi)` from the prior hierarchy.
pub fn draw_global_from_prior(cfg: &ShrinkageConfig, rng: &mut RngStream) -> Result<GlobalShrinkage> {
    let xi = sample_inverse_gamma(0.5, 1.0 / (cfg.alpha * cfg.alpha), rng)?;
    let tau2 = sample_inverse_gamma(0.5, 1.0 / xi, rng)?;
    Ok(GlobalShrinkage { tau2, xi })
}
