//! Command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::schedules::{LearningRateSchedule, ParamBox};

pub mod fit;
pub mod generate;
pub mod kappa;
pub mod prop1;
pub mod simulate;

#[derive(Debug, Parser)]
#[command(name = "blocksgd", version, about = "Block-sampled SGD with bootstrap confidence intervals for dependent data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo coverage study on one of the six synthetic models.
    Simulate(simulate::SimulateArgs),
    /// Fit a regression to a CSV file and report bootstrap intervals.
    Fit(fit::FitArgs),
    /// Averaged scalar SGD on an MA(1) stream: sampling vs bootstrap variance.
    Prop1(prop1::Prop1Args),
    /// Block-size efficiency factor n*kappa_T^2 over a grid of exponents.
    Kappa(kappa::KappaArgs),
    /// Write synthetic observations from one of the six models as CSV.
    Generate(generate::GenerateArgs),
}

/// Step-size and parameter-set options shared by the estimating commands.
#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    /// Offset γ in the step size (t + γ)^(-ρ).
    #[arg(long, default_value_t = 10.0)]
    pub learning_gamma: f64,
    /// Exponent ρ in the step size, in (1/2, 1).
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub learning_rho: f64,
    /// Half-width of the parameter box [-h, h]^d.
    #[arg(long, default_value_t = 10.0)]
    pub box_halfwidth: f64,
}

impl Default for TuningArgs {
    fn default() -> Self {
        Self { learning_gamma: 10.0, learning_rho: 2.0 / 3.0, box_halfwidth: 10.0 }
    }
}

impl TuningArgs {
    pub fn learning_rate(&self) -> Result<LearningRateSchedule<f64>> {
        LearningRateSchedule::new(self.learning_gamma, self.learning_rho)
    }

    pub fn param_box(&self, dim: usize) -> Result<ParamBox<f64>> {
        ParamBox::cube(dim, self.box_halfwidth)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::usage(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Opens `path` for writing, or standard output when absent.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Error::io(p, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

pub(crate) fn output_label(path: Option<&PathBuf>) -> PathBuf {
    path.cloned().unwrap_or_else(|| PathBuf::from("<stdout>"))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate::execute(&args),
        Command::Fit(args) => fit::execute(&args),
        Command::Prop1(args) => prop1::execute(&args),
        Command::Kappa(args) => kappa::execute(&args),
        Command::Generate(args) => generate::execute(&args),
    }
}
