//! Averaged scalar SGD on `Y_t = θ* + ẽ_t + ẽ_{t+1}`.
//!
//! The sampling variance of `√T(θ̄_T - θ*)` tends to the long-run variance
//! `r0 + 2 r1`, while the per-observation multiplier bootstrap only recovers
//! `r0`.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bootstrap::WeightDistribution;
use crate::datagen::{ma1_theory, Ma1Stream, Ma1Theory};
use crate::error::{Error, Result};
use crate::rng::{self, derive_seed};
use crate::schedules::LearningRateSchedule;

const TAG_DATA: u64 = 1;
const TAG_WEIGHTS: u64 = 3;

#[derive(Debug, Clone, Args)]
pub struct Prop1Args {
    /// Steps per replication.
    #[arg(long = "T", default_value_t = 20_000)]
    pub t: usize,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    /// Weighted trajectories per replication.
    #[arg(long, default_value_t = 200)]
    pub k: usize,
    /// Innovation standard deviation.
    #[arg(long, default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
    pub sigma: f64,
    /// Mean of the stream; also the starting value of every recursion.
    #[arg(long, default_value_t = 1.0)]
    pub theta_star: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV path (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    pub learning_gamma: f64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub learning_rho: f64,
}

impl Default for Prop1Args {
    fn default() -> Self {
        Self {
            t: 20_000,
            reps: 500,
            k: 200,
            sigma: std::f64::consts::FRAC_1_SQRT_2,
            theta_star: 1.0,
            seed: 1,
            out: None,
            learning_gamma: 10.0,
            learning_rho: 2.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Report {
    /// Variance across replications of `√T(θ̄_T - θ*)`.
    pub sampling_variance: f64,
    /// Mean across replications of `T` times the variance of the `k` weighted averages.
    pub bootstrap_variance: f64,
    pub theory: Ma1Theory,
    pub t: usize,
    pub reps: usize,
    pub k: usize,
    pub sigma: f64,
    pub seed: u64,
}

struct Replication {
    scaled_deviation: f64,
    bootstrap_variance: f64,
}

fn sample_variance(values: impl ExactSizeIterator<Item = f64> + Clone) -> f64 {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn replicate(args: &Prop1Args, lr: &LearningRateSchedule<f64>, r: usize) -> Result<Replication> {
    let rep_seed = args.seed ^ r as u64;
    let mut data = Ma1Stream::new(args.theta_star, args.sigma, ChaCha8Rng::seed_from_u64(derive_seed(rep_seed, TAG_DATA)))?;
    let weight_seed = derive_seed(rep_seed, TAG_WEIGHTS);
    let mut streams: Vec<_> = (0..args.k).map(|j| rng::stream(weight_seed, j as u64)).collect();
    let mut theta = args.theta_star;
    let mut sum = 0.0;
    let mut boot_theta = vec![args.theta_star; args.k];
    let mut boot_sum = vec![0.0; args.k];
    let weights = WeightDistribution::ExponentialUnit;
    for t in 1..=args.t {
        let y = data.next().expect("stream is unbounded");
        let g = lr.rate(t);
        theta += g * (y - theta);
        sum += theta;
        for ((th, s), rng) in boot_theta.iter_mut().zip(&mut boot_sum).zip(&mut streams) {
            let v: f64 = weights.draw(rng);
            *th += g * v * (y - *th);
            *s += *th;
        }
    }
    let tt = args.t as f64;
    let means = boot_sum.iter().map(|s| s / tt);
    Ok(Replication {
        scaled_deviation: tt.sqrt() * (sum / tt - args.theta_star),
        bootstrap_variance: tt * sample_variance(means),
    })
}

pub fn prop1(args: &Prop1Args) -> Result<Prop1Report> {
    if args.t < 1000 {
        return Err(Error::usage(format!("T must be at least 1000, got {}", args.t)));
    }
    if args.reps < 100 {
        return Err(Error::usage(format!("reps must be at least 100, got {}", args.reps)));
    }
    if args.k < 2 {
        return Err(Error::usage(format!("k must be at least 2, got {}", args.k)));
    }
    let lr = LearningRateSchedule::new(args.learning_gamma, args.learning_rho)?;
    let reps: Vec<Replication> =
        (0..args.reps).into_par_iter().map(|r| replicate(args, &lr, r)).collect::<Result<_>>()?;
    Ok(Prop1Report {
        sampling_variance: sample_variance(reps.iter().map(|r| r.scaled_deviation)),
        bootstrap_variance: reps.iter().map(|r| r.bootstrap_variance).sum::<f64>() / reps.len() as f64,
        theory: ma1_theory(args.sigma),
        t: args.t,
        reps: args.reps,
        k: args.k,
        sigma: args.sigma,
        seed: args.seed,
    })
}

/// CSV `statistic,estimate,target,T,reps,k,sigma,seed`.
pub fn write_report<W: Write>(out: W, report: &Prop1Report) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["statistic", "estimate", "target", "T", "reps", "k", "sigma", "seed"])?;
    let rows = [
        ("sampling_variance", report.sampling_variance, report.theory.longrun),
        ("bootstrap_variance", report.bootstrap_variance, report.theory.r0),
    ];
    for (name, est, target) in rows {
        w.write_record([
            name.to_string(),
            est.to_string(),
            target.to_string(),
            report.t.to_string(),
            report.reps.to_string(),
            report.k.to_string(),
            report.sigma.to_string(),
            report.seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("prop1 report", e))?;
    Ok(())
}

pub fn summary(report: &Prop1Report) -> String {
    format!(
        "sampling variance of sqrt(T)(mean - theta*): {:.4} (r0 + 2 r1 = {:.4})\n\
         mean bootstrap variance times T:             {:.4} (r0 = {:.4})\n",
        report.sampling_variance, report.theory.longrun, report.bootstrap_variance, report.theory.r0
    )
}

pub fn execute(args: &Prop1Args) -> Result<()> {
    let report = prop1(args)?;
    let mut out = super::open_output(args.out.as_deref())?;
    write_report(&mut out, &report)?;
    out.flush().map_err(|e| Error::io(super::output_label(args.out.as_ref()), e))?;
    drop(out);
    print!("{}", summary(&report));
    Ok(())
}
