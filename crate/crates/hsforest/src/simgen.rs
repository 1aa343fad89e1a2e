//! Deterministic, seedable generators for the built-in data-generating
//! processes, with ground-truth treatment effects attached.
//!
//! The common hierarchy:
//!
//! ```text
//! X ~ U[0,1]^p (or a block Gaussian copula)
//! A ~ Bernoulli(e(x))
//! log T = f(x) + a tau(x) + eps
//! C ~ Exp(eta),  Y = min(T, C),  delta = 1{T <= C}
//! ```
//!
//! with `eta` calibrated by bisection so the average censoring rate hits the
//! target. Covariate indices used by the fixed functional forms that exceed
//! `p` contribute zero, so the homogeneous and null families remain valid at
//! small `p`; the Friedman family requires `p >= 5` outright.

use std::str::FromStr;

use crate::data::Matrix;
use crate::dist::{normal_cdf, RngStream};
use crate::error::{Error, Result};
use crate::sampler::{Dataset, OutcomeKind};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Stream id reserved for censoring calibration.
const CALIBRATION_STREAM: u64 = 0xCA11B;
/// Within-block size of the copula covariance.
const COPULA_BLOCK: usize = 50;

/// Treatment-effect family of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Sparse linear effect with spike-and-slab confounding.
    Linear,
    /// The Friedman benchmark function.
    Friedman,
    /// Constant effect `tau = 5`.
    Homogeneous,
    /// No effect.
    Null,
    /// Dense decaying coefficients, constant effect `tau = 1`.
    DenseHomogeneous,
    /// Dense decaying coefficients, heterogeneous effect.
    DenseHeterogeneous,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "friedman" => Ok(Self::Friedman),
            "homogeneous" => Ok(Self::Homogeneous),
            "null" => Ok(Self::Null),
            "dense-homogeneous" => Ok(Self::DenseHomogeneous),
            "dense-heterogeneous" => Ok(Self::DenseHeterogeneous),
            other => Err(Error::Scenario(format!("unknown family '{other}'"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Linear => "linear",
            Self::Friedman => "friedman",
            Self::Homogeneous => "homogeneous",
            Self::Null => "null",
            Self::DenseHomogeneous => "dense-homogeneous",
            Self::DenseHeterogeneous => "dense-heterogeneous",
        };
        f.write_str(s)
    }
}

/// Distribution of the AFT error term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// `N(0, noise_var)`.
    Normal,
    /// `Gumbel(-beta*gamma, beta)` with `beta = 3 sqrt(2)/pi`: mean 0,
    /// variance 3 (Weibull survival model).
    Gumbel,
    /// `Logistic(0, 3/pi)`: mean 0, variance 3 (log-logistic model).
    Logistic,
}

impl FromStr for ErrorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Self::Normal),
            "gumbel" => Ok(Self::Gumbel),
            "logistic" => Ok(Self::Logistic),
            other => Err(Error::Scenario(format!("unknown error kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Normal => "normal",
            Self::Gumbel => "gumbel",
            Self::Logistic => "logistic",
        })
    }
}

/// Declarative description of one data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    /// Variance of the normal error; the Gumbel and logistic errors use the
    /// fixed parameterizations above (variance 3) regardless.
    pub noise_var: f64,
    /// Target average censoring rate in `[0, 0.95]`; 0 disables censoring.
    pub censor_target: f64,
    pub error: ErrorKind,
    /// Within-block copula correlation; `None` means independent uniforms.
    pub copula_rho: Option<f64>,
    /// Spike-and-slab sparsity of the prognostic coefficients.
    pub sparsity_f: f64,
    /// Spike-and-slab sparsity of the extra linear treatment coefficients.
    pub sparsity_tau: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(family: Family, n: usize, p: usize, seed: u64) -> Self {
        Self {
            family,
            n,
            p,
            noise_var: 3.0,
            censor_target: 0.35,
            error: ErrorKind::Normal,
            copula_rho: None,
            sparsity_f: 0.1,
            sparsity_tau: 0.05,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::Scenario("n and p must be positive".into()));
        }
        if self.family == Family::Friedman && self.p < 5 {
            return Err(Error::Scenario("friedman requires p >= 5".into()));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::Scenario("noise variance must be positive".into()));
        }
        if !(0.0..=0.95).contains(&self.censor_target) {
            return Err(Error::Scenario(
                "censoring target must lie in [0, 0.95]".into(),
            ));
        }
        if let Some(rho) = self.copula_rho {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::Scenario("copula rho must lie in (0,1)".into()));
            }
        }
        for s in [self.sparsity_f, self.sparsity_tau] {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Scenario("sparsity must lie in [0,1]".into()));
            }
        }
        Ok(())
    }
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub data: Dataset,
    pub truth_cate: Vec<f64>,
    pub truth_ate: f64,
    /// Fraction of censored rows actually realized.
    pub achieved_censoring: f64,
    /// Calibrated exponential censoring rate (0 when censoring is disabled).
    pub eta: f64,
}

fn x_or_zero(x: &Matrix, i: usize, j: usize) -> f64 {
    if j < x.n_cols() {
        x.get(i, j)
    } else {
        0.0
    }
}

/// Propensity of the standard families: `Phi(-0.5 + 0.4 x1 - 0.1 x3 + 0.3 x5)`.
fn standard_propensity(x: &Matrix, i: usize) -> f64 {
    normal_cdf(-0.5 + 0.4 * x_or_zero(x, i, 0) - 0.1 * x_or_zero(x, i, 2) + 0.3 * x_or_zero(x, i, 4))
}

fn dense_beta(p: usize) -> Vec<f64> {
    (1..=p).map(|j| 1.0 / (j * j) as f64).collect()
}

fn dot_row(x: &Matrix, i: usize, beta: &[f64]) -> f64 {
    beta.iter()
        .enumerate()
        .map(|(j, b)| b * x.get(i, j))
        .sum()
}

/// The Friedman benchmark `10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5`.
pub fn friedman_function(x1: f64, x2: f64, x3: f64, x4: f64, x5: f64) -> f64 {
    10.0 * (std::f64::consts::PI * x1 * x2).sin() + 20.0 * (x3 - 0.5) * (x3 - 0.5) + 10.0 * x4
        + 5.0 * x5
}

fn spike_slab(p: usize, sparsity: f64, rng: &mut RngStream) -> Vec<f64> {
    (0..p)
        .map(|_| {
            let slab = rng.uniform() < sparsity;
            let z = rng.standard_normal();
            if slab {
                z
            } else {
                0.0
            }
        })
        .collect()
}

struct ScenarioFunctions {
    propensity: Vec<f64>,
    prognostic: Vec<f64>,
    cate: Vec<f64>,
}

/// Draw covariates and evaluate `(e, f, tau)` rowwise. Coefficient vectors
/// are redrawn from their spike-and-slab priors on every call.
fn draw_functions(spec: &ScenarioSpec, n: usize, rng: &mut RngStream) -> (Matrix, ScenarioFunctions) {
    let x = match spec.copula_rho {
        Some(rho) => copula_covariates(n, spec.p, rho, rng),
        None => {
            let cols = (0..spec.p)
                .map(|_| (0..n).map(|_| rng.uniform()).collect())
                .collect();
            Matrix::from_columns(n, cols).expect("consistent dimensions")
        }
    };
    // Coefficient draws happen in a fixed order so datasets are reproducible.
    let beta_f = spike_slab(spec.p, spec.sparsity_f, rng);
    let beta_tau = if spec.family == Family::Linear {
        spike_slab(spec.p, spec.sparsity_tau, rng)
    } else {
        Vec::new()
    };
    let dense = match spec.family {
        Family::DenseHomogeneous | Family::DenseHeterogeneous => Some(dense_beta(spec.p)),
        _ => None,
    };

    let mut propensity = Vec::with_capacity(n);
    let mut prognostic = Vec::with_capacity(n);
    let mut cate = Vec::with_capacity(n);
    for i in 0..n {
        let (e, f) = match &dense {
            Some(beta) => {
                let lin = dot_row(&x, i, beta);
                (normal_cdf(lin), lin)
            }
            None => (standard_propensity(&x, i), dot_row(&x, i, &beta_f)),
        };
        let tau = match spec.family {
            Family::Linear => {
                1.0 + x_or_zero(&x, i, 0) - 2.0 * x_or_zero(&x, i, 1) + 3.0 * x_or_zero(&x, i, 2)
                    - 4.0 * x_or_zero(&x, i, 3)
                    + 5.0 * x_or_zero(&x, i, 4)
                    + dot_row(&x, i, &beta_tau)
            }
            Family::Friedman => friedman_function(
                x.get(i, 0),
                x.get(i, 1),
                x.get(i, 2),
                x.get(i, 3),
                x.get(i, 4),
            ),
            Family::Homogeneous => 5.0,
            Family::Null => 0.0,
            Family::DenseHomogeneous => 1.0,
            Family::DenseHeterogeneous => {
                1.0 + x_or_zero(&x, i, 0) - x_or_zero(&x, i, 1) / 2.0 + x_or_zero(&x, i, 2) / 3.0
                    - x_or_zero(&x, i, 3) / 4.0
                    + x_or_zero(&x, i, 4) / 5.0
            }
        };
        propensity.push(e);
        prognostic.push(f);
        cate.push(tau);
    }
    (
        x,
        ScenarioFunctions {
            propensity,
            prognostic,
            cate,
        },
    )
}

/// Draw one AFT error term. The Gumbel and logistic variants use the fixed
/// variance-3 parameterizations regardless of `noise_var`.
pub fn sample_error(kind: ErrorKind, noise_var: f64, rng: &mut RngStream) -> f64 {
    let spec = ScenarioSpec {
        error: kind,
        noise_var,
        ..ScenarioSpec::new(Family::Null, 1, 1, 0)
    };
    draw_error(&spec, rng)
}

fn draw_error(spec: &ScenarioSpec, rng: &mut RngStream) -> f64 {
    match spec.error {
        ErrorKind::Normal => spec.noise_var.sqrt() * rng.standard_normal(),
        ErrorKind::Gumbel => {
            let beta = 3.0 * std::f64::consts::SQRT_2 / std::f64::consts::PI;
            let mu = -beta * EULER_GAMMA;
            let u = rng.uniform().clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
            mu - beta * (-u.ln()).ln()
        }
        ErrorKind::Logistic => {
            let s = 3.0 / std::f64::consts::PI;
            let u = rng.uniform().clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
            s * (u / (1.0 - u)).ln()
        }
    }
}

/// Generate one dataset from the scenario, with censoring calibrated to the
/// target rate. Identical specs produce identical data.
pub fn generate(spec: &ScenarioSpec) -> Result<GeneratedData> {
    spec.validate()?;
    let eta = if spec.censor_target > 0.0 {
        calibrate_censoring(spec)?
    } else {
        0.0
    };

    let mut rng = RngStream::new(spec.seed, 0);
    let (x, funcs) = draw_functions(spec, spec.n, &mut rng);
    let mut treatment = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    let mut delta = Vec::with_capacity(spec.n);
    let mut censored = 0usize;
    for i in 0..spec.n {
        let a = u8::from(rng.uniform() < funcs.propensity[i]);
        let log_t = funcs.prognostic[i] + a as f64 * funcs.cate[i] + draw_error(spec, &mut rng);
        let t = log_t.exp();
        let (time, event) = if eta > 0.0 {
            let c = -rng.uniform().max(f64::MIN_POSITIVE).ln() / eta;
            if t <= c {
                (t, 1u8)
            } else {
                (c, 0u8)
            }
        } else {
            (t, 1u8)
        };
        censored += usize::from(event == 0);
        treatment.push(a);
        y.push(time);
        delta.push(event);
    }

    let truth_ate = funcs.cate.iter().sum::<f64>() / spec.n as f64;
    Ok(GeneratedData {
        data: Dataset {
            x,
            treatment,
            y,
            delta,
            outcome: OutcomeKind::Survival,
        },
        truth_cate: funcs.cate,
        truth_ate,
        achieved_censoring: censored as f64 / spec.n as f64,
        eta,
    })
}

const CALIBRATION_SAMPLES: usize = 100_000;

/// Expected censoring rate at rate parameter `eta`, given simulated event
/// times: `E[P(C < T | T)] = mean(1 - exp(-eta T))`.
fn censoring_rate(times: &[f64], eta: f64) -> f64 {
    times
        .iter()
        .map(|t| -(-eta * t).exp_m1())
        .sum::<f64>()
        / times.len() as f64
}

/// Realized censoring fraction of a fresh Monte Carlo sample drawn from the
/// scenario at rate `eta`, with coefficients redrawn per block exactly as in
/// calibration. Used to audit calibrated rates on independent draws.
pub fn fresh_censoring_rate(spec: &ScenarioSpec, eta: f64, samples: usize, stream: u64) -> f64 {
    let mut rng = RngStream::new(spec.seed, stream);
    let block = 1000;
    let mut censored = 0usize;
    let mut drawn = 0usize;
    while drawn < samples {
        let b = block.min(samples - drawn);
        let mut block_spec = spec.clone();
        block_spec.n = b;
        let (_, funcs) = draw_functions(&block_spec, b, &mut rng);
        for i in 0..b {
            let a = u8::from(rng.uniform() < funcs.propensity[i]);
            let log_t = funcs.prognostic[i] + a as f64 * funcs.cate[i] + draw_error(spec, &mut rng);
            let c = -rng.uniform().max(f64::MIN_POSITIVE).ln() / eta;
            censored += usize::from(log_t.exp() > c);
        }
        drawn += b;
    }
    censored as f64 / drawn as f64
}

/// Calibrate the exponential censoring rate by bisection over
/// `[1e-6, 1e6]`, using a Monte Carlo sample of event times from the
/// scenario, until the average censoring rate is within 0.01 of the target.
pub fn calibrate_censoring(spec: &ScenarioSpec) -> Result<f64> {
    spec.validate()?;
    if spec.censor_target <= 0.0 {
        return Err(Error::Calibration(
            "calibration needs a positive censoring target".into(),
        ));
    }
    let mut rng = RngStream::new(spec.seed, CALIBRATION_STREAM);
    // Fresh coefficient and covariate draws per Monte Carlo block, so the
    // rate targets the scenario averaged over its own randomness.
    let block = 1000;
    let mut times = Vec::with_capacity(CALIBRATION_SAMPLES);
    while times.len() < CALIBRATION_SAMPLES {
        let (_, funcs) = {
            let mut block_spec = spec.clone();
            block_spec.n = block;
            let (x, f) = draw_functions(&block_spec, block, &mut rng);
            (x, f)
        };
        for i in 0..block {
            let a = u8::from(rng.uniform() < funcs.propensity[i]);
            let log_t = funcs.prognostic[i] + a as f64 * funcs.cate[i] + draw_error(spec, &mut rng);
            times.push(log_t.exp());
        }
    }

    let (mut lo, mut hi) = (1e-6, 1e6);
    let rate_lo = censoring_rate(&times, lo);
    let rate_hi = censoring_rate(&times, hi);
    if rate_lo > spec.censor_target || rate_hi < spec.censor_target {
        return Err(Error::Calibration(format!(
            "target {} outside achievable range [{rate_lo:.4}, {rate_hi:.4}]",
            spec.censor_target
        )));
    }
    for _ in 0..200 {
        // geometric midpoint: eta spans ten orders of magnitude
        let mid = ((lo.ln() + hi.ln()) / 2.0).exp();
        let rate = censoring_rate(&times, mid);
        if (rate - spec.censor_target).abs() <= 0.01 {
            return Ok(mid);
        }
        if rate < spec.censor_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(
        "bisection failed to reach the target rate".into(),
    ))
}

/// Draw an `n x p` covariate matrix from a block Gaussian copula: blocks of
/// 50 with within-block covariance `rho^{|j-k|/2}`, independent across
/// blocks, mapped to uniforms by the standard-normal CDF.
pub fn copula_covariates(n: usize, p: usize, rho: f64, rng: &mut RngStream) -> Matrix {
    assert!(rho > 0.0 && rho < 1.0, "copula rho must lie in (0,1)");
    let mut x = Matrix::zeros(n, p);
    let mut start = 0;
    while start < p {
        let b = COPULA_BLOCK.min(p - start);
        let chol = block_cholesky(b, rho);
        let mut z = vec![0.0; b];
        for i in 0..n {
            for zj in z.iter_mut() {
                *zj = rng.standard_normal();
            }
            // lower-triangular multiply
            for j in (0..b).rev() {
                let mut acc = 0.0;
                for k in 0..=j {
                    acc += chol[j * b + k] * z[k];
                }
                x.set(i, start + j, normal_cdf(acc));
            }
        }
        start += b;
    }
    x
}

/// Cholesky factor of the `b x b` block `Sigma_jk = rho^{|j-k|/2}`.
fn block_cholesky(b: usize, rho: f64) -> Vec<f64> {
    let sigma = |j: usize, k: usize| rho.powf((j as f64 - k as f64).abs() / 2.0);
    let mut l = vec![0.0; b * b];
    for j in 0..b {
        for k in 0..=j {
            let mut acc = sigma(j, k);
            for m in 0..k {
                acc -= l[j * b + m] * l[k * b + m];
            }
            if j == k {
                assert!(acc > 0.0, "copula block must be positive definite");
                l[j * b + j] = acc.sqrt();
            } else {
                l[j * b + k] = acc / l[k * b + k];
            }
        }
    }
    l
}
