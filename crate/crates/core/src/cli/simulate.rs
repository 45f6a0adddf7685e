use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::TuningArgs;
use crate::bootstrap::{run_vanilla_with_ci, run_with_ci, BootstrapConfig, Functional, WeightDistribution};
use crate::datagen::{ModelSpec, ModelStream};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, InitialValue};
use crate::models::LossModel;
use crate::rng::derive_seed;
use crate::schedules::BlockSchedule;

/// Seed tags for the independent random streams of one replication.
pub const TAG_DATA: u64 = 1;
pub const TAG_INIT: u64 = 2;
pub const TAG_BLOCK_WEIGHTS: u64 = 3;
pub const TAG_VANILLA_WEIGHTS: u64 = 4;

pub const COEFFICIENT_NAMES: [&str; 4] = ["beta1", "beta2", "beta3", "intercept"];

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Model id, 1 to 6.
    #[arg(long)]
    pub model: u8,
    /// Observations per replication.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    /// Block exponent a in B_t = ceil(b t^a).
    #[arg(long, default_value_t = 0.3)]
    pub a: f64,
    /// Block scale b (default 3 for linear and LAD models, 1 for logistic).
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 300)]
    pub reps: usize,
    /// Bootstrap replicates per interval.
    #[arg(long, default_value_t = 200)]
    pub k: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also run per-observation bootstrap SGD on the same data.
    #[arg(long)]
    pub baseline: bool,
    /// Output CSV path (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Block,
    Vanilla,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Block => "block",
            Method::Vanilla => "vanilla",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub spec: ModelSpec,
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub reps: usize,
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
    pub baseline: bool,
    pub tuning: TuningArgs,
}

impl SimulationConfig {
    pub fn from_args(args: &SimulateArgs) -> Result<Self> {
        let spec = ModelSpec::new(args.model)?;
        let cfg = Self {
            spec,
            n: args.n,
            a: args.a,
            b: args.b.unwrap_or_else(|| spec.default_block_scale()),
            reps: args.reps,
            k: args.k,
            alpha: args.alpha,
            seed: args.seed,
            baseline: args.baseline,
            tuning: args.tuning.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::usage("reps must be positive"));
        }
        if self.n == 0 {
            return Err(Error::usage("n must be positive"));
        }
        super::check_alpha(self.alpha)?;
        BlockSchedule::new(self.b, self.a)?;
        self.tuning.learning_rate()?;
        self.tuning.param_box(self.spec.dim())?;
        Ok(())
    }

    fn bootstrap_config(&self, rep_seed: u64, method: Method) -> Result<BootstrapConfig<f64>> {
        let dim = self.spec.dim();
        let estimator = EstimatorConfig {
            model: LossModel::new(self.spec.family(), dim),
            learning_rate: self.tuning.learning_rate()?,
            blocks: BlockSchedule::new(self.b, self.a)?,
            param_box: self.tuning.param_box(dim)?,
            init: InitialValue::default_gaussian(derive_seed(rep_seed, TAG_INIT)),
        };
        let tag = match method {
            Method::Block => TAG_BLOCK_WEIGHTS,
            Method::Vanilla => TAG_VANILLA_WEIGHTS,
        };
        Ok(BootstrapConfig {
            estimator,
            k: self.k,
            alpha: self.alpha,
            weights: WeightDistribution::ExponentialUnit,
            seed: derive_seed(rep_seed, tag),
        })
    }
}

/// Per-coefficient outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub covered: Vec<bool>,
    pub length: Vec<f64>,
    pub squared_error: Vec<f64>,
}

/// Seed of replication `r`.
pub fn replication_seed(base: u64, r: usize) -> u64 {
    base ^ r as u64
}

/// Generates the data of replication `r` and runs one method on it.
pub fn replicate(cfg: &SimulationConfig, r: usize, method: Method) -> Result<ReplicationSummary> {
    let rep_seed = replication_seed(cfg.seed, r);
    let data_rng = ChaCha8Rng::seed_from_u64(derive_seed(rep_seed, TAG_DATA));
    let source = ModelStream::<f64, _>::new(cfg.spec, data_rng)?.take(cfg.n);
    let bcfg = cfg.bootstrap_config(rep_seed, method)?;
    let functionals: Vec<_> = (0..cfg.spec.dim()).map(Functional::Coordinate).collect();
    let outcome = match method {
        Method::Block => run_with_ci(source, &bcfg, &functionals)?,
        Method::Vanilla => run_vanilla_with_ci(source, &bcfg, &functionals)?,
    };
    let truth = cfg.spec.theta_star::<f64>();
    let mut summary = ReplicationSummary { covered: vec![], length: vec![], squared_error: vec![] };
    for (report, star) in outcome.reports.iter().zip(&truth) {
        summary.covered.push(report.covers(*star));
        summary.length.push(report.length());
        summary.squared_error.push((report.point - star).powi(2));
    }
    Ok(summary)
}

/// One aggregated row of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: u8,
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub coef: String,
    pub coverage: f64,
    pub avg_length: f64,
    /// Pooled estimation error shared by every row of the same method.
    pub mse: f64,
    pub reps: usize,
    pub seed: u64,
    pub method: Method,
}

/// Mean over replications of the Euclidean error `‖β̄ - β*‖` of the slopes.
///
/// This is the scale of the MSE column in the published tables, which falls
/// like `n^{-1/2}`.
pub fn pooled_error(summaries: &[ReplicationSummary]) -> f64 {
    let slopes = COEFFICIENT_NAMES.len() - 1;
    let total: f64 = summaries.iter().map(|s| s.squared_error[..slopes].iter().sum::<f64>().sqrt()).sum();
    total / summaries.len() as f64
}

pub fn aggregate(cfg: &SimulationConfig, method: Method, summaries: &[ReplicationSummary]) -> Vec<ResultRow> {
    let reps = summaries.len() as f64;
    let mse = pooled_error(summaries);
    COEFFICIENT_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| ResultRow {
            model: cfg.spec.id(),
            a: cfg.a,
            b: cfg.b,
            n: cfg.n,
            coef: (*name).to_string(),
            coverage: summaries.iter().filter(|s| s.covered[i]).count() as f64 / reps,
            avg_length: summaries.iter().map(|s| s.length[i]).sum::<f64>() / reps,
            mse,
            reps: summaries.len(),
            seed: cfg.seed,
            method,
        })
        .collect()
}

/// Runs every replication (in parallel, results ordered by replication index).
pub fn run_method(cfg: &SimulationConfig, method: Method) -> Result<Vec<ReplicationSummary>> {
    (0..cfg.reps).into_par_iter().map(|r| replicate(cfg, r, method)).collect()
}

pub fn simulate(cfg: &SimulationConfig) -> Result<Vec<ResultRow>> {
    let mut rows = aggregate(cfg, Method::Block, &run_method(cfg, Method::Block)?);
    if cfg.baseline {
        rows.extend(aggregate(cfg, Method::Vanilla, &run_method(cfg, Method::Vanilla)?));
    }
    Ok(rows)
}

/// CSV `model,a,b,n,coef,coverage,avg_length,mse,reps,seed,method`.
pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "a", "b", "n", "coef", "coverage", "avg_length", "mse", "reps", "seed", "method"])?;
    for r in rows {
        w.write_record([
            r.model.to_string(),
            r.a.to_string(),
            r.b.to_string(),
            r.n.to_string(),
            r.coef.clone(),
            r.coverage.to_string(),
            r.avg_length.to_string(),
            r.mse.to_string(),
            r.reps.to_string(),
            r.seed.to_string(),
            r.method.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("simulation results", e))?;
    Ok(())
}

pub fn execute(args: &SimulateArgs) -> Result<()> {
    let cfg = SimulationConfig::from_args(args)?;
    let rows = simulate(&cfg)?;
    let out = super::open_output(args.out.as_deref())?;
    write_results(out, &rows).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(super::output_label(args.out.as_ref()), source),
        other => other,
    })
}
