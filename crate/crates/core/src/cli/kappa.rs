use std::path::PathBuf;

use clap::Args;

use crate::error::Result;
use crate::kappa::{kappa_curve, parse_grid, write_curve};

#[derive(Debug, Clone, Args)]
pub struct KappaArgs {
    /// Exponent grid `start:stop:step` (inclusive) or a single value.
    #[arg(long, default_value = "0:0.9:0.1")]
    pub alphas: String,
    /// Number of iterations T.
    #[arg(long = "T", default_value_t = 30_000)]
    pub t: usize,
    /// Output CSV path (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(args: &KappaArgs) -> Result<()> {
    let points = kappa_curve(&parse_grid(&args.alphas)?, args.t)?;
    let out = super::open_output(args.out.as_deref())?;
    write_curve(out, &points)
}
