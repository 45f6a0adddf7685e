//! Block-sampled mini-batch SGD with Polyak-Ruppert averaging and a
//! multiplier-bootstrap ensemble for confidence intervals on dependent data.
//!
//! The stream is cut into consecutive block pairs `(W_t^a, W_t^b)` of growing
//! size `B_t = ceil(b t^a)`. Two projected SGD trajectories read alternate
//! blocks, and their running average is the point estimate. `k` copies of
//! the same recursion with `Exp(1)` step multipliers give bootstrap samples
//! whose percentiles form the interval. Everything runs in one pass over
//! the data.
//!
//! ```
//! use blocksgd::{
//!     run_with_ci, BlockSchedule, BootstrapConfig, EstimatorConfig, Functional, InitialValue,
//!     LossFamily, LossModel, ModelSpec, ModelStream, WeightDistribution,
//! };
//! use rand::SeedableRng;
//!
//! let spec = ModelSpec::new(4).unwrap();
//! let data = ModelStream::<f64, _>::new(spec, rand_chacha::ChaCha8Rng::seed_from_u64(7))
//!     .unwrap()
//!     .take(5_000);
//! let config = BootstrapConfig {
//!     estimator: EstimatorConfig::new(
//!         LossModel::new(LossFamily::Linear, 4),
//!         BlockSchedule::new(3.0, 0.3).unwrap(),
//!         InitialValue::default_gaussian(1),
//!     ),
//!     k: 50,
//!     alpha: 0.05,
//!     weights: WeightDistribution::ExponentialUnit,
//!     seed: 2,
//! };
//! let out = run_with_ci(data, &config, &[Functional::Coordinate(0)]).unwrap();
//! let ci = &out.reports[0];
//! assert!(ci.lower <= ci.upper);
//! ```

pub mod block_stream;
pub mod bootstrap;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod estimator;
pub mod kappa;
pub mod models;
pub mod rng;
pub mod scalar;
pub mod schedules;

pub use block_stream::{plan_horizon, BlockPair, BlockPartitioner, Fallible, HorizonPlan, ObservationSource};
pub use bootstrap::{
    confidence_interval, run_vanilla_with_ci, run_with_ci, write_bootstrap_samples, BootstrapConfig,
    BootstrapEnsemble, BootstrapOutcome, ConfidenceReport, Functional, VanillaEnsemble, WeightDistribution,
};
pub use datagen::{gen_ma1, gen_model, ma1_theory, Ma1Stream, Ma1Theory, ModelSpec, ModelStream, VarProcess};
pub use error::{Error, Result};
pub use estimator::{
    batch_gradient, run, run_vanilla, EstimatorConfig, EstimatorRun, EstimatorState, InitialValue, VanillaState,
};
pub use kappa::{kappa_curve, kappa_value, KappaCurvePoint};
pub use models::{LossFamily, LossModel, Observation};
pub use scalar::Scalar;
pub use schedules::{BlockSchedule, LearningRateSchedule, ParamBox};

pub type Observation64 = Observation<f64>;
pub type Observation32 = Observation<f32>;
pub type EstimatorState64 = EstimatorState<f64>;
pub type EstimatorState32 = EstimatorState<f32>;
pub type BootstrapEnsemble64 = BootstrapEnsemble<f64>;
pub type BootstrapEnsemble32 = BootstrapEnsemble<f32>;
pub type ConfidenceReport64 = ConfidenceReport<f64>;
pub type ConfidenceReport32 = ConfidenceReport<f32>;
pub type BootstrapConfig64 = BootstrapConfig<f64>;
pub type BootstrapConfig32 = BootstrapConfig<f32>;
