//! Command-line toolkit for Horseshoe Forests: simulate benchmark datasets,
//! fit the causal or single-forest model, run Monte Carlo replications, and
//! cross-validate the shrinkage level.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use hsforest::dist::RngStream;
use hsforest::error::Error as CoreError;
use hsforest::estimands::{c_index, evaluate, summarize, AcceptanceStats, Metrics};
use hsforest::sampler::{
    run_causal_chain_full, run_horseshoe_forest_full, ChainConfig, Dataset, FitOutput,
    PropensityConfig, TestSet,
};
use hsforest::simgen::{generate, ScenarioSpec};

use config::ConfigFile;

/// An error carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 2,
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 3,
        }
    }

    pub fn from_core(err: CoreError) -> Self {
        let code = match err {
            CoreError::TailOverflow { .. } | CoreError::NonFinite { .. } => 3,
            _ => 2,
        };
        Self {
            message: err.to_string(),
            code,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hsforest",
    version,
    about = "Horseshoe Forests for censored outcomes and heterogeneous treatment effects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset with ground truth
    Simulate(SimulateArgs),
    /// Fit the causal (or single-forest) model to a CSV dataset
    Fit(FitArgs),
    /// Generate-fit-evaluate over Monte Carlo replications
    Replicate(ReplicateArgs),
    /// Cross-validate the shrinkage level k by the concordance index
    Cv(CvArgs),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario family: linear | friedman | homogeneous | null |
    /// dense-homogeneous | dense-heterogeneous
    #[arg(long, default_value = "linear")]
    family: String,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    p: usize,
    /// Variance of the normal AFT error
    #[arg(long = "noise-var", default_value_t = 3.0)]
    noise_var: f64,
    /// Target average censoring rate (0 disables censoring)
    #[arg(long = "censor-target", default_value_t = 0.35)]
    censor_target: f64,
    /// Error distribution: normal | gumbel | logistic
    #[arg(long, default_value = "normal")]
    error: String,
    /// Within-block Gaussian-copula correlation (independent if omitted)
    #[arg(long = "copula-rho")]
    copula_rho: Option<f64>,
    #[arg(long = "sparsity-f", default_value_t = 0.1)]
    sparsity_f: f64,
    #[arg(long = "sparsity-tau", default_value_t = 0.05)]
    sparsity_tau: f64,
}

impl ScenarioArgs {
    fn to_spec(&self, seed: u64) -> Result<ScenarioSpec, CliError> {
        let mut spec = ScenarioSpec::new(
            self.family.parse().map_err(CliError::from_core)?,
            self.n,
            self.p,
            seed,
        );
        spec.noise_var = self.noise_var;
        spec.censor_target = self.censor_target;
        spec.error = self.error.parse().map_err(CliError::from_core)?;
        spec.copula_rho = self.copula_rho;
        spec.sparsity_f = self.sparsity_f;
        spec.sparsity_tau = self.sparsity_tau;
        spec.validate().map_err(CliError::from_core)?;
        Ok(spec)
    }
}

/// Chain options; unset values fall back to the config file, then defaults.
#[derive(Args, Clone, Default)]
struct ChainArgs {
    /// Flat key=value config file; keys match the long flag names
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Trees in the prognostic (or only) forest
    #[arg(long = "trees-f")]
    trees_f: Option<usize>,
    /// Trees in the treatment forest
    #[arg(long = "trees-tau")]
    trees_tau: Option<usize>,
    /// Shrinkage level; the half-Cauchy scale is k/sqrt(trees)
    #[arg(long)]
    k: Option<f64>,
    #[arg(long = "omega-f")]
    omega_f: Option<f64>,
    #[arg(long = "omega-tau")]
    omega_tau: Option<f64>,
    /// Tree-prior split probability numerator a in a/(1+depth)^b
    #[arg(long = "tree-a")]
    tree_a: Option<f64>,
    #[arg(long = "tree-b")]
    tree_b: Option<f64>,
    #[arg(long = "p-grow")]
    p_grow: Option<f64>,
    #[arg(long = "p-prune")]
    p_prune: Option<f64>,
    #[arg(long = "p-change")]
    p_change: Option<f64>,
    /// Error-variance prior degrees of freedom
    #[arg(long)]
    nu: Option<f64>,
    /// Error-variance prior scale (standardized units)
    #[arg(long)]
    psi: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Data-adaptive treatment coding b0/b1
    #[arg(long = "invariant-codes")]
    invariant_codes: bool,
    /// Disable propensity-score adjustment
    #[arg(long = "no-propensity")]
    no_propensity: bool,
    #[arg(long = "prop-trees")]
    prop_trees: Option<usize>,
    #[arg(long = "prop-iterations")]
    prop_iterations: Option<usize>,
    #[arg(long = "prop-burnin")]
    prop_burnin: Option<usize>,
    /// Print progress to stderr every this many iterations
    #[arg(long = "progress-every")]
    progress_every: Option<usize>,
    /// Credible-interval level
    #[arg(long)]
    level: Option<f64>,
}

impl ChainArgs {
    fn resolve(&self, single: bool) -> Result<(ChainConfig, f64), CliError> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let mut cfg = if single {
            ChainConfig::default_single()
        } else {
            ChainConfig::default()
        };
        macro_rules! pick {
            ($field:expr, $arg:expr, $key:literal) => {
                if let Some(v) = $arg.or(file.get($key)?) {
                    $field = v;
                }
            };
        }
        pick!(cfg.iterations, self.iterations, "iterations");
        pick!(cfg.burnin, self.burnin, "burnin");
        pick!(cfg.thin, self.thin, "thin");
        pick!(cfg.m_f, self.trees_f, "trees-f");
        pick!(cfg.m_tau, self.trees_tau, "trees-tau");
        pick!(cfg.k, self.k, "k");
        pick!(cfg.omega_f, self.omega_f, "omega-f");
        pick!(cfg.omega_tau, self.omega_tau, "omega-tau");
        pick!(cfg.tree_prior.a, self.tree_a, "tree-a");
        pick!(cfg.tree_prior.b, self.tree_b, "tree-b");
        pick!(cfg.moves.p_grow, self.p_grow, "p-grow");
        pick!(cfg.moves.p_prune, self.p_prune, "p-prune");
        pick!(cfg.moves.p_change, self.p_change, "p-change");
        pick!(cfg.nu_prior, self.nu, "nu");
        pick!(cfg.psi_prior, self.psi, "psi");
        pick!(cfg.seed, self.seed, "seed");
        pick!(cfg.progress_every, self.progress_every, "progress-every");

        cfg.invariant_codes = self.invariant_codes || file.get("invariant-codes")?.unwrap_or(false);
        let no_prop = self.no_propensity || file.get("no-propensity")?.unwrap_or(false);
        if single || no_prop {
            cfg.propensity = None;
        } else {
            let mut pcfg = PropensityConfig::default();
            pick!(pcfg.m, self.prop_trees, "prop-trees");
            pick!(pcfg.iterations, self.prop_iterations, "prop-iterations");
            pick!(pcfg.burnin, self.prop_burnin, "prop-burnin");
            cfg.propensity = Some(pcfg);
        }

        let mut level = 0.95;
        pick!(level, self.level, "level");
        if !(level > 0.0 && level < 1.0) {
            return Err(CliError::usage(format!(
                "level must lie in (0,1), got {level}"
            )));
        }
        cfg.validate().map_err(CliError::from_core)?;
        Ok((cfg, level))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for data.csv and truth.csv
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Input dataset (time,status,treatment,x1..xp)
    #[arg(long)]
    data: PathBuf,
    /// Output directory for summary.json and draws.csv
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Fit a single Horseshoe Forest instead of the causal decomposition
    #[arg(long)]
    single: bool,
    /// Worker threads (the single chain itself is strictly sequential)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args)]
struct ReplicateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output path of the metrics table
    #[arg(long, default_value = "metrics.csv")]
    out: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated shrinkage levels to evaluate
    #[arg(long = "k-grid", default_value = "0.05,0.1,1")]
    k_grid: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output path of the C-index table
    #[arg(long, default_value = "cv.csv")]
    out: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Replicate(args) => cmd_replicate(args),
        Command::Cv(args) => cmd_cv(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let spec = args.scenario.to_spec(args.seed)?;
    let g = generate(&spec).map_err(CliError::from_core)?;
    io::write_dataset(&args.out.join("data.csv"), &g.data)?;
    io::write_truth(&args.out.join("truth.csv"), &g.truth_cate, g.truth_ate)?;
    println!(
        "wrote {} rows to {} (censoring {:.1}%, eta {:.4e})",
        g.data.n(),
        args.out.join("data.csv").display(),
        100.0 * g.achieved_censoring,
        g.eta
    );
    Ok(())
}

#[derive(Serialize, Clone)]
struct IntervalJson {
    mean: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct MoveRatesJson {
    attempts: u64,
    accepts: u64,
    rate: f64,
}

#[derive(Serialize)]
struct AcceptanceJson {
    grow: MoveRatesJson,
    prune: MoveRatesJson,
    change: MoveRatesJson,
}

impl AcceptanceJson {
    fn from_stats(s: &AcceptanceStats) -> Self {
        let conv = |m: &hsforest::estimands::MoveRates| MoveRatesJson {
            attempts: m.attempts,
            accepts: m.accepts,
            rate: m.rate(),
        };
        Self {
            grow: conv(&s.grow),
            prune: conv(&s.prune),
            change: conv(&s.change),
        }
    }
}

/// The complete effective configuration, echoed into every summary so runs
/// can be reproduced exactly.
#[derive(Serialize, Clone)]
struct EffectiveConfig {
    single: bool,
    iterations: usize,
    burnin: usize,
    thin: usize,
    trees_f: usize,
    trees_tau: usize,
    k: f64,
    omega_f: f64,
    omega_tau: f64,
    tree_a: f64,
    tree_b: f64,
    p_grow: f64,
    p_prune: f64,
    p_change: f64,
    nu: f64,
    psi: f64,
    seed: u64,
    invariant_codes: bool,
    propensity: bool,
    prop_trees: Option<usize>,
    prop_iterations: Option<usize>,
    prop_burnin: Option<usize>,
    level: f64,
}

impl EffectiveConfig {
    fn new(cfg: &ChainConfig, single: bool, level: f64) -> Self {
        Self {
            single,
            iterations: cfg.iterations,
            burnin: cfg.burnin,
            thin: cfg.thin,
            trees_f: cfg.m_f,
            trees_tau: cfg.m_tau,
            k: cfg.k,
            omega_f: cfg.omega_f,
            omega_tau: cfg.omega_tau,
            tree_a: cfg.tree_prior.a,
            tree_b: cfg.tree_prior.b,
            p_grow: cfg.moves.p_grow,
            p_prune: cfg.moves.p_prune,
            p_change: cfg.moves.p_change,
            nu: cfg.nu_prior,
            psi: cfg.psi_prior,
            seed: cfg.seed,
            invariant_codes: cfg.invariant_codes,
            propensity: cfg.propensity.is_some(),
            prop_trees: cfg.propensity.map(|p| p.m),
            prop_iterations: cfg.propensity.map(|p| p.iterations),
            prop_burnin: cfg.propensity.map(|p| p.burnin),
            level,
        }
    }
}

#[derive(Serialize)]
struct SummaryJson {
    n: usize,
    p: usize,
    level: f64,
    ate: IntervalJson,
    cate: Vec<IntervalJson>,
    c_index: Option<f64>,
    sigma2_mean: f64,
    acceptance_prognostic: AcceptanceJson,
    acceptance_treatment: Option<AcceptanceJson>,
    wall_time_s: f64,
    config: EffectiveConfig,
}

fn run_fit(data: &Dataset, cfg: &ChainConfig, single: bool) -> Result<FitOutput, CliError> {
    let mut observer = |ev: &hsforest::sampler::ProgressEvent| {
        eprintln!(
            "iteration {}/{}: sigma2 {:.4}, accept grow {:.2} prune {:.2} change {:.2}",
            ev.iteration,
            ev.total,
            ev.sigma2,
            ev.acceptance.prognostic.grow.rate(),
            ev.acceptance.prognostic.prune.rate(),
            ev.acceptance.prognostic.change.rate()
        );
    };
    let out = if single {
        run_horseshoe_forest_full(data, cfg, None, &mut observer)
    } else {
        run_causal_chain_full(data, cfg, None, &mut observer)
    };
    out.map_err(CliError::from_core)
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let data = io::read_dataset(&args.data)?;
    let (cfg, level) = args.chain.resolve(args.single)?;
    let out = run_fit(&data, &cfg, args.single)?;
    let summary = summarize(&out.draws, level).map_err(CliError::from_core)?;
    let cindex = c_index(&out.train_pred_mean, &data.y, &data.delta).ok();
    let sigma2_mean = out.draws.sigma2.iter().sum::<f64>() / out.draws.sigma2.len() as f64;

    let json = SummaryJson {
        n: data.n(),
        p: data.x.n_cols(),
        level,
        ate: IntervalJson {
            mean: summary.ate.mean,
            lower: summary.ate.lower,
            upper: summary.ate.upper,
        },
        cate: summary
            .cate
            .iter()
            .map(|s| IntervalJson {
                mean: s.mean,
                lower: s.lower,
                upper: s.upper,
            })
            .collect(),
        c_index: cindex,
        sigma2_mean,
        acceptance_prognostic: AcceptanceJson::from_stats(&out.draws.acceptance.prognostic),
        acceptance_treatment: out
            .draws
            .acceptance
            .treatment
            .as_ref()
            .map(AcceptanceJson::from_stats),
        wall_time_s: started.elapsed().as_secs_f64(),
        config: EffectiveConfig::new(&cfg, args.single, level),
    };
    let text = serde_json::to_string_pretty(&json)
        .map_err(|e| CliError::numerical(format!("serializing summary: {e}")))?;
    io::write_file(&args.out.join("summary.json"), &text)?;
    io::write_draws(&args.out.join("draws.csv"), &out.draws)?;
    println!(
        "ATE {:.4} [{:.4}, {:.4}]  ({} draws, {:.1}s)",
        summary.ate.mean,
        summary.ate.lower,
        summary.ate.upper,
        out.draws.n_draws(),
        json.wall_time_s
    );
    Ok(())
}

const METRICS_HEADER: &str = "rep,rmse_cate,cover_cate,len_cate,rmse_ate,cover_ate,len_ate";

fn metrics_row(label: &str, m: &Metrics) -> String {
    format!(
        "{label},{},{},{},{},{},{}",
        m.rmse_cate, m.cover_cate, m.len_cate, m.rmse_ate, m.cover_ate, m.len_ate
    )
}

fn build_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if jobs > 0 {
        builder = builder.num_threads(jobs);
    }
    builder
        .build()
        .map_err(|e| CliError::usage(format!("cannot build thread pool: {e}")))
}

fn cmd_replicate(args: ReplicateArgs) -> Result<(), CliError> {
    let (cfg, level) = args.chain.resolve(false)?;
    if args.reps == 0 {
        return Err(CliError::usage("reps must be >= 1"));
    }
    let pool = build_pool(args.jobs)?;
    let results: Vec<(usize, Result<Metrics, String>)> = pool.install(|| {
        (1..=args.reps)
            .into_par_iter()
            .map(|r| {
                let run = || -> Result<Metrics, String> {
                    let spec = args
                        .scenario
                        .to_spec(cfg.seed.wrapping_add(r as u64))
                        .map_err(|e| e.message.clone())?;
                    let g = generate(&spec).map_err(|e| e.to_string())?;
                    let mut rep_cfg = cfg.clone();
                    rep_cfg.seed = cfg.seed.wrapping_add(r as u64);
                    let out = run_causal_chain_full(&g.data, &rep_cfg, None, &mut |_| {})
                        .map_err(|e| e.to_string())?;
                    let s = summarize(&out.draws, level).map_err(|e| e.to_string())?;
                    evaluate(&s, &g.truth_cate, g.truth_ate).map_err(|e| e.to_string())
                };
                (r, run())
            })
            .collect()
    });

    let mut rows = vec![METRICS_HEADER.to_string()];
    let mut ok: Vec<&Metrics> = Vec::new();
    let mut failures = 0usize;
    for (r, res) in &results {
        match res {
            Ok(m) => {
                rows.push(metrics_row(&r.to_string(), m));
                ok.push(m);
            }
            Err(msg) => {
                failures += 1;
                eprintln!("replication {r} failed: {msg}");
            }
        }
    }
    if !ok.is_empty() {
        let n = ok.len() as f64;
        let agg = Metrics {
            rmse_cate: ok.iter().map(|m| m.rmse_cate).sum::<f64>() / n,
            cover_cate: ok.iter().map(|m| m.cover_cate).sum::<f64>() / n,
            len_cate: ok.iter().map(|m| m.len_cate).sum::<f64>() / n,
            rmse_ate: ok.iter().map(|m| m.rmse_ate).sum::<f64>() / n,
            cover_ate: ok.iter().map(|m| m.cover_ate).sum::<f64>() / n,
            len_ate: ok.iter().map(|m| m.len_ate).sum::<f64>() / n,
        };
        rows.push(metrics_row("mean", &agg));
        println!("{}", rows.join("\n"));
    }
    io::write_file(&args.out, &(rows.join("\n") + "\n"))?;
    if failures * 10 > args.reps {
        return Err(CliError::numerical(format!(
            "{failures}/{} replications failed",
            args.reps
        )));
    }
    Ok(())
}

/// Stratified fold assignment: events and censored rows are shuffled and
/// dealt round-robin separately, so every fold keeps the event mix.
fn stratified_folds(delta: &[u8], folds: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut assignment = vec![0usize; delta.len()];
    for class in [1u8, 0] {
        let mut idx: Vec<usize> = (0..delta.len()).filter(|&i| delta[i] == class).collect();
        // Fisher-Yates
        for i in (1..idx.len()).rev() {
            let j = rng.index(i + 1);
            idx.swap(i, j);
        }
        for (pos, &i) in idx.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    assignment
}

fn subset_dataset(data: &Dataset, keep: &[usize]) -> Dataset {
    Dataset {
        x: data.x.select_rows(keep),
        treatment: keep.iter().map(|&i| data.treatment[i]).collect(),
        y: keep.iter().map(|&i| data.y[i]).collect(),
        delta: keep.iter().map(|&i| data.delta[i]).collect(),
        outcome: data.outcome,
    }
}

fn cmd_cv(args: CvArgs) -> Result<(), CliError> {
    if args.folds < 2 {
        return Err(CliError::usage("folds must be >= 2"));
    }
    let data = io::read_dataset(&args.data)?;
    let (base_cfg, _) = args.chain.resolve(false)?;
    let grid: Vec<f64> = args
        .k_grid
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("cannot parse k value '{s}'")))
        })
        .collect::<Result<_, _>>()?;
    if grid.is_empty() || grid.iter().any(|&k| !(k > 0.0)) {
        return Err(CliError::usage("k grid must contain positive values"));
    }

    // tasks: (k index, repeat, fold)
    let mut tasks = Vec::new();
    for ki in 0..grid.len() {
        for rep in 0..args.repeats {
            for fold in 0..args.folds {
                tasks.push((ki, rep, fold));
            }
        }
    }
    let pool = build_pool(args.jobs)?;
    let data_ref = &data;
    let grid_ref = &grid;
    let results: Vec<(usize, Option<f64>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ki, rep, fold)| {
                // fold assignment depends on (seed, repeat) only, so every k
                // sees identical splits
                let mut fold_rng = RngStream::new(base_cfg.seed, 1_000_000 + rep as u64);
                let assignment = stratified_folds(&data_ref.delta, args.folds, &mut fold_rng);
                let train: Vec<usize> = (0..data_ref.n())
                    .filter(|&i| assignment[i] != fold)
                    .collect();
                let test: Vec<usize> = (0..data_ref.n())
                    .filter(|&i| assignment[i] == fold)
                    .collect();
                let test_data = subset_dataset(data_ref, &test);
                if !test_data.delta.iter().any(|&d| d == 1) {
                    eprintln!("warning: fold {fold} (repeat {rep}) has no events; skipped");
                    return (ki, None);
                }
                let train_data = subset_dataset(data_ref, &train);
                let mut cfg = base_cfg.clone();
                cfg.k = grid_ref[ki];
                cfg.seed = base_cfg
                    .seed
                    .wrapping_add(((ki * args.repeats + rep) * args.folds + fold) as u64 + 1);
                let test_set = TestSet {
                    x: test_data.x.clone(),
                    treatment: test_data.treatment.clone(),
                };
                let fit =
                    match run_causal_chain_full(&train_data, &cfg, Some(&test_set), &mut |_| {}) {
                        Ok(f) => f,
                        Err(e) => {
                            eprintln!(
                                "warning: fold {fold} (repeat {rep}, k={}) failed: {e}",
                                grid_ref[ki]
                            );
                            return (ki, None);
                        }
                    };
                let scores = fit.test_pred_mean.expect("test predictions requested");
                match c_index(&scores, &test_data.y, &test_data.delta) {
                    Ok(c) => (ki, Some(c)),
                    Err(e) => {
                        eprintln!("warning: fold {fold} (repeat {rep}): {e}; skipped");
                        (ki, None)
                    }
                }
            })
            .collect()
    });

    let mut rows = vec!["k,c_index_mean,c_index_sd".to_string()];
    let mut best: Option<(f64, f64)> = None;
    for (ki, &k) in grid.iter().enumerate() {
        let cs: Vec<f64> = results
            .iter()
            .filter(|(i, c)| *i == ki && c.is_some())
            .map(|(_, c)| c.unwrap())
            .collect();
        if cs.is_empty() {
            rows.push(format!("{k},NA,NA"));
            continue;
        }
        let mean = cs.iter().sum::<f64>() / cs.len() as f64;
        let sd = (cs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>()
            / (cs.len().max(2) - 1) as f64)
            .sqrt();
        rows.push(format!("{k},{mean},{sd}"));
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((k, mean));
        }
    }
    let table = rows.join("\n") + "\n";
    print!("{table}");
    if let Some((k, c)) = best {
        println!("best k = {k} (mean C-index {c:.4})");
    }
    io::write_file(&args.out, &table)?;
    Ok(())
}
