//! Horseshoe Forests: Bayesian tree ensembles with global-local horseshoe
//! shrinkage on the leaf step heights, fitted by reversible-jump Gibbs
//! sampling.
//!
//! The crate provides two estimators. A *Horseshoe Forest* is a single
//! sum-of-trees learner for a (possibly right-censored or binary) outcome. A
//! *Causal Horseshoe Forest* decomposes the log survival time as
//!
//! ```text
//! log T = f(x, e(x)) + a * tau(x) + eps,   eps ~ N(0, sigma2),
//! ```
//!
//! with separate forests for the prognostic function `f` and the treatment
//! effect `tau`, an estimated propensity score appended to the prognostic
//! design, and censored outcomes imputed by data augmentation. Posterior
//! summaries of the conditional and average treatment effects (CATE/ATE) come
//! from the retained draws.
//!
//! A simulation module generates the built-in benchmark scenarios with
//! ground truth attached, and [`checks`] hosts the sampler-validation
//! harnesses.

pub mod checks;
pub mod data;
pub mod dist;
pub mod error;
pub mod estimands;
pub mod horseshoe;
pub mod moves;
pub mod sampler;
pub mod simgen;
pub mod tree;

pub use data::Matrix;
pub use error::{Error, Result};
pub use estimands::{c_index, evaluate, summarize, Metrics, PosteriorDraws, Summary};
pub use sampler::{
    run_causal_chain, run_causal_chain_full, run_horseshoe_forest, run_horseshoe_forest_full,
    ChainConfig, Dataset, FitOutput, OutcomeKind, PropensityConfig, Standardizer, TestSet,
};
pub use simgen::{generate, ScenarioSpec};
