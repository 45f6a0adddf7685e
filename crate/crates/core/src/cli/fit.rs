use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use super::TuningArgs;
use crate::block_stream::Fallible;
use crate::bootstrap::{run_with_ci, BootstrapConfig, BootstrapOutcome, Functional, WeightDistribution};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, InitialValue};
use crate::models::{LossFamily, LossModel, Observation};
use crate::rng::derive_seed;
use crate::schedules::BlockSchedule;

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Response column name.
    #[arg(long)]
    pub response: String,
    /// Comma-separated feature column names.
    #[arg(long, value_delimiter = ',', required = true)]
    pub features: Vec<String>,
    /// Append a constant-1 covariate.
    #[arg(long)]
    pub intercept: bool,
    /// linear, lad or logistic.
    #[arg(long, default_value_t = LossFamily::Linear)]
    pub loss: LossFamily,
    /// Block exponent a in B_t = ceil(b t^a).
    #[arg(long, default_value_t = 0.3)]
    pub a: f64,
    #[arg(long, default_value_t = 3.0)]
    pub b: f64,
    #[arg(long, default_value_t = 200)]
    pub k: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Report CSV path (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the bootstrap replicate averages.
    #[arg(long)]
    pub samples_out: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

/// Result of `fit`: coefficient names and the bootstrap outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub outcome: BootstrapOutcome<f64>,
}

fn csv_error(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::Data { line: p.line(), message: e.to_string() },
        None => Error::Csv(e),
    }
}

fn parse_cell(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("").trim();
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::Data { line, message: format!("column {name:?}: {raw:?} is not a number") })?;
    if !v.is_finite() {
        return Err(Error::Data { line, message: format!("column {name:?}: non-finite value {raw:?}") });
    }
    Ok(v)
}

pub fn fit(args: &FitArgs) -> Result<FitResult> {
    super::check_alpha(args.alpha)?;
    let file = File::open(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyReport);
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::usage(format!("column {name:?} not found in {}", args.input.display())))
    };
    let response_idx = column(&args.response)?;
    let feature_idx = args.features.iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;

    let mut names = args.features.clone();
    if args.intercept {
        names.push("intercept".into());
    }
    let dim = names.len();
    let family = args.loss;
    let response_name = args.response.clone();
    let features = args.features.clone();
    let intercept = args.intercept;
    let rows = reader.into_records().map(move |rec| -> Result<Observation<f64>> {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let y = parse_cell(&rec, response_idx, &response_name, line)?;
        if family == LossFamily::Logistic && y != 1.0 && y != -1.0 {
            return Err(Error::Data { line, message: format!("logistic response must be -1 or 1, got {y}") });
        }
        let mut x = Vec::with_capacity(dim);
        for (&i, name) in feature_idx.iter().zip(&features) {
            x.push(parse_cell(&rec, i, name, line)?);
        }
        if intercept {
            x.push(1.0);
        }
        Ok(Observation::new(y, x))
    });

    let config = BootstrapConfig {
        estimator: EstimatorConfig {
            model: LossModel::new(family, dim),
            learning_rate: args.tuning.learning_rate()?,
            blocks: BlockSchedule::new(args.b, args.a)?,
            param_box: args.tuning.param_box(dim)?,
            init: InitialValue::default_gaussian(derive_seed(args.seed, super::simulate::TAG_INIT)),
        },
        k: args.k,
        alpha: args.alpha,
        weights: WeightDistribution::ExponentialUnit,
        seed: derive_seed(args.seed, super::simulate::TAG_BLOCK_WEIGHTS),
    };
    let functionals: Vec<_> = (0..dim).map(Functional::Coordinate).collect();
    let outcome = run_with_ci(Fallible(rows), &config, &functionals)?;
    Ok(FitResult { names, outcome })
}

/// CSV `coef,estimate,lower,upper`.
pub fn write_fit<W: Write>(out: W, result: &FitResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["coef", "estimate", "lower", "upper"])?;
    for (name, r) in result.names.iter().zip(&result.outcome.reports) {
        w.write_record([name.clone(), r.point.to_string(), r.lower.to_string(), r.upper.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("fit report", e))?;
    Ok(())
}

pub fn execute(args: &FitArgs) -> Result<()> {
    let result = fit(args)?;
    write_fit(super::open_output(args.out.as_deref())?, &result)?;
    if let Some(path) = &args.samples_out {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        result.outcome.write_samples(std::io::BufWriter::new(f))?;
    }
    Ok(())
}
