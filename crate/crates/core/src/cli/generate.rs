use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{write_observations, ModelSpec, ModelStream};
use crate::error::Result;

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Model id, 1 to 6.
    #[arg(long)]
    pub model: u8,
    /// Number of observations.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV path (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Columns `y,x1,x2,x3`; fit them with `--intercept`.
pub fn execute(args: &GenerateArgs) -> Result<()> {
    let spec = ModelSpec::new(args.model)?;
    let stream = ModelStream::<f64, _>::new(spec, ChaCha8Rng::seed_from_u64(args.seed))?;
    let out = super::open_output(args.out.as_deref())?;
    write_observations(out, stream.take(args.n))
}
