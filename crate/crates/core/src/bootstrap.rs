//! Multiplier-bootstrap ensembles and percentile confidence intervals.
//!
//! Each replicate `j` runs its own pair of trajectories on the *same* block
//! pairs as the point estimator, scaling every step by a fresh weight
//! `V_t^(j)` (mean 1, variance 1). Both trajectories of a replicate share the
//! weight drawn at iteration `t`. The spread of the replicate averages
//! approximates the sampling distribution of the point estimate.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::block_stream::{BlockPair, BlockPartitioner, HorizonPlan, ObservationSource};
use crate::error::{Error, Result};
use crate::estimator::{validate_batch, validate_pair, EstimatorConfig, EstimatorState, VanillaState};
use crate::models::{dot, LossModel, Observation};
use crate::rng;
use crate::scalar::Scalar;
use crate::schedules::ParamBox;

/// Work (replicates × observations × dimension) above which replicates are
/// updated on the rayon pool.
const PARALLEL_WORK: usize = 1 << 14;

/// Distribution of the multiplicative bootstrap weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightDistribution {
    /// `Exp(1)`.
    #[default]
    ExponentialUnit,
    /// Always 1; collapses every replicate onto the point estimator.
    ConstantOne,
}

impl WeightDistribution {
    pub fn draw<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self {
            WeightDistribution::ExponentialUnit => {
                // 1 - u lies in (0, 1], so the log is finite.
                let u: f64 = rng.random();
                T::lit(-(1.0 - u).ln())
            }
            WeightDistribution::ConstantOne => T::one(),
        }
    }
}

/// Scalar target `g(θ)` of a confidence interval.
#[derive(Debug, Clone, PartialEq)]
pub enum Functional<T> {
    Coordinate(usize),
    Linear(Vec<T>),
}

impl<T: Scalar> Functional<T> {
    pub fn apply(&self, theta: &[T]) -> Result<T> {
        match self {
            Functional::Coordinate(i) => theta
                .get(*i)
                .copied()
                .ok_or(Error::DimensionMismatch { expected: *i + 1, got: theta.len() }),
            Functional::Linear(w) => {
                if w.len() != theta.len() {
                    return Err(Error::DimensionMismatch { expected: theta.len(), got: w.len() });
                }
                Ok(dot(w, theta))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Functional::Coordinate(i) => format!("coef_{i}"),
            Functional::Linear(w) => {
                let terms: Vec<String> = w.iter().map(|v| v.to_string()).collect();
                format!("linear({})", terms.join(";"))
            }
        }
    }
}

/// Point estimate and percentile interval for one functional.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceReport<T> {
    pub functional: Functional<T>,
    pub point: T,
    pub lower: T,
    pub upper: T,
    pub alpha: T,
    /// `g` evaluated at every replicate average, in replicate order.
    pub samples: Vec<T>,
}

impl<T: Scalar> ConfidenceReport<T> {
    pub fn length(&self) -> T {
        self.upper - self.lower
    }

    pub fn covers(&self, value: T) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// 1-based order-statistic index `ceil(k q)`, clamped to `[1, k]`.
fn order_index(k: usize, q: f64) -> usize {
    // Tolerance absorbs products like 200 * 0.025 landing a hair above an integer.
    let raw = (k as f64 * q - 1e-9).ceil();
    (raw.max(1.0) as usize).min(k)
}

/// Percentile interval `(l_α, u_α)` from the `ceil(kα/2)`-th and
/// `ceil(k(1-α/2))`-th order statistics.
pub fn confidence_interval<T: Scalar>(samples: &[T], alpha: T) -> Result<(T, T)> {
    let k = samples.len();
    if k < 2 {
        return Err(Error::usage(format!("need at least 2 bootstrap samples, got {k}")));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::usage(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("bootstrap samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN filtered above"));
    let half = alpha.to_f64_lossy() / 2.0;
    let lo = order_index(k, half);
    let hi = order_index(k, 1.0 - half);
    Ok((sorted[lo - 1], sorted[hi - 1]))
}

struct Replicate<T, S> {
    state: S,
    rng: ChaCha8Rng,
    _scalar: std::marker::PhantomData<T>,
}

/// `k` weighted copies of the block estimator.
pub struct BootstrapEnsemble<T: Scalar> {
    replicates: Vec<Replicate<T, EstimatorState<T>>>,
    weights: WeightDistribution,
}

impl<T: Scalar> BootstrapEnsemble<T> {
    /// Replicate `j` draws its weights from stream `j` under `seed`.
    pub fn new(
        k: usize,
        theta0: &[T],
        bx: &ParamBox<T>,
        weights: WeightDistribution,
        seed: u64,
    ) -> Result<Self> {
        let proto = EstimatorState::new(theta0.to_vec(), bx)?;
        let replicates = (0..k)
            .map(|j| Replicate { state: proto.clone(), rng: rng::stream(seed, j as u64), _scalar: Default::default() })
            .collect();
        Ok(Self { replicates, weights })
    }

    pub fn k(&self) -> usize {
        self.replicates.len()
    }

    pub fn weights(&self) -> WeightDistribution {
        self.weights
    }

    /// Common iteration count of the replicates.
    pub fn t(&self) -> usize {
        self.replicates.first().map_or(0, |r| r.state.t())
    }

    pub fn replicate(&self, j: usize) -> Option<&EstimatorState<T>> {
        self.replicates.get(j).map(|r| &r.state)
    }

    pub fn states(&self) -> impl Iterator<Item = &EstimatorState<T>> {
        self.replicates.iter().map(|r| &r.state)
    }

    /// Replicate averages `θ̄^{*(j)}` in replicate order.
    pub fn averages(&self) -> Vec<Vec<T>> {
        self.states().map(|s| s.theta_bar().to_vec()).collect()
    }

    /// Advances every replicate by one weighted step on `pair`.
    pub fn ensemble_step(&mut self, pair: &BlockPair<T>, gamma_t: T, model: &LossModel, bx: &ParamBox<T>) -> Result<()> {
        for r in &self.replicates {
            r.state.check_sequence(pair.t)?;
            if r.state.dim() != model.dim() {
                return Err(Error::DimensionMismatch { expected: model.dim(), got: r.state.dim() });
            }
        }
        validate_pair(model, pair)?;
        self.advance(pair, gamma_t, model, bx);
        Ok(())
    }

    fn advance(&mut self, pair: &BlockPair<T>, gamma_t: T, model: &LossModel, bx: &ParamBox<T>) {
        let weights = self.weights;
        let d = model.dim();
        let update = |r: &mut Replicate<T, EstimatorState<T>>, scratch: &mut Vec<T>| {
            let v: T = weights.draw(&mut r.rng);
            r.state.advance(pair, gamma_t * v, model, bx, scratch);
        };
        let work = self.replicates.len() * 2 * pair.block_size() * d;
        if work >= PARALLEL_WORK {
            self.replicates
                .par_iter_mut()
                .for_each_init(|| vec![T::zero(); d], |scratch, r| update(r, scratch));
        } else {
            let mut scratch = vec![T::zero(); d];
            for r in &mut self.replicates {
                update(r, &mut scratch);
            }
        }
    }
}

/// `k` weighted copies of per-observation SGD (the baseline bootstrap).
pub struct VanillaEnsemble<T: Scalar> {
    replicates: Vec<Replicate<T, VanillaState<T>>>,
    weights: WeightDistribution,
}

impl<T: Scalar> VanillaEnsemble<T> {
    pub fn new(k: usize, theta0: &[T], bx: &ParamBox<T>, weights: WeightDistribution, seed: u64) -> Result<Self> {
        let proto = VanillaState::new(theta0.to_vec(), bx)?;
        let replicates = (0..k)
            .map(|j| Replicate { state: proto.clone(), rng: rng::stream(seed, j as u64), _scalar: Default::default() })
            .collect();
        Ok(Self { replicates, weights })
    }

    pub fn k(&self) -> usize {
        self.replicates.len()
    }

    pub fn averages(&self) -> Vec<Vec<T>> {
        self.replicates.iter().map(|r| r.state.theta_bar().to_vec()).collect()
    }

    /// One weighted step of every replicate on `z`.
    pub fn ensemble_step(&mut self, z: &Observation<T>, gamma_t: T, model: &LossModel, bx: &ParamBox<T>) -> Result<()> {
        validate_batch(model, std::slice::from_ref(z))?;
        let weights = self.weights;
        let mut scratch = vec![T::zero(); model.dim()];
        for r in &mut self.replicates {
            let v: T = weights.draw(&mut r.rng);
            r.state.advance(z, gamma_t * v, model, bx, &mut scratch);
        }
        Ok(())
    }
}

/// Estimator settings plus bootstrap size, level, weights and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig<T> {
    pub estimator: EstimatorConfig<T>,
    pub k: usize,
    pub alpha: T,
    pub weights: WeightDistribution,
    /// Parent seed of the replicate weight streams.
    pub seed: u64,
}

impl<T: Scalar> BootstrapConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::usage(format!("bootstrap size k must be at least 2, got {}", self.k)));
        }
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(Error::usage(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.estimator.validate()
    }
}

/// Result of a single-pass estimator-plus-bootstrap run.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOutcome<T> {
    /// Point-estimate average `θ̄_T`.
    pub estimate: Vec<T>,
    /// Iterations completed (`T`).
    pub iterations: usize,
    pub plan: HorizonPlan,
    /// One row per replicate: `θ̄_T^{*(j)}`.
    pub replicate_averages: Vec<Vec<T>>,
    pub reports: Vec<ConfidenceReport<T>>,
}

impl<T: Scalar> BootstrapOutcome<T> {
    pub fn write_samples<W: Write>(&self, out: W) -> Result<()> {
        write_bootstrap_samples(out, &self.replicate_averages)
    }
}

fn build_reports<T: Scalar>(
    estimate: &[T],
    averages: &[Vec<T>],
    functionals: &[Functional<T>],
    alpha: T,
) -> Result<Vec<ConfidenceReport<T>>> {
    functionals
        .iter()
        .map(|g| {
            let samples = averages.iter().map(|a| g.apply(a)).collect::<Result<Vec<T>>>()?;
            let (lower, upper) = confidence_interval(&samples, alpha)?;
            Ok(ConfidenceReport { functional: g.clone(), point: g.apply(estimate)?, lower, upper, alpha, samples })
        })
        .collect()
}

/// Runs the point estimator and the bootstrap ensemble in lockstep over one
/// pass of `source`, then builds a percentile interval for each functional.
pub fn run_with_ci<T: Scalar, S: ObservationSource<T>>(
    source: S,
    config: &BootstrapConfig<T>,
    functionals: &[Functional<T>],
) -> Result<BootstrapOutcome<T>> {
    config.validate()?;
    let est = &config.estimator;
    let theta0 = est.initial_point()?;
    let mut state = EstimatorState::new(theta0.clone(), &est.param_box)?;
    let mut ensemble = BootstrapEnsemble::new(config.k, &theta0, &est.param_box, config.weights, config.seed)?;
    let mut blocks = BlockPartitioner::new(source, est.blocks);
    let mut scratch = vec![T::zero(); est.model.dim()];
    while let Some(pair) = blocks.try_next()? {
        validate_pair(&est.model, &pair)?;
        let gamma = est.learning_rate.rate(pair.t);
        state.advance(&pair, gamma, &est.model, &est.param_box, &mut scratch);
        ensemble.advance(&pair, gamma, &est.model, &est.param_box);
    }
    if state.t() == 0 {
        return Err(Error::EmptyReport);
    }
    let replicate_averages = ensemble.averages();
    let estimate = state.theta_bar().to_vec();
    let reports = build_reports(&estimate, &replicate_averages, functionals, config.alpha)?;
    Ok(BootstrapOutcome { estimate, iterations: state.t(), plan: blocks.plan(), replicate_averages, reports })
}

/// Baseline: per-observation SGD and its multiplier bootstrap over one pass.
///
/// The block schedule in `config` is ignored; `γ_t` is indexed by observation.
pub fn run_vanilla_with_ci<T: Scalar, S: ObservationSource<T>>(
    mut source: S,
    config: &BootstrapConfig<T>,
    functionals: &[Functional<T>],
) -> Result<BootstrapOutcome<T>> {
    config.validate()?;
    let est = &config.estimator;
    let theta0 = est.initial_point()?;
    let mut state = VanillaState::new(theta0.clone(), &est.param_box)?;
    let mut ensemble = VanillaEnsemble::new(config.k, &theta0, &est.param_box, config.weights, config.seed)?;
    let mut scratch = vec![T::zero(); est.model.dim()];
    while let Some(z) = source.pull()? {
        validate_batch(&est.model, std::slice::from_ref(&z))?;
        let gamma = est.learning_rate.rate(state.t() + 1);
        state.advance(&z, gamma, &est.model, &est.param_box, &mut scratch);
        ensemble.ensemble_step(&z, gamma, &est.model, &est.param_box)?;
    }
    if state.t() == 0 {
        return Err(Error::EmptyReport);
    }
    let replicate_averages = ensemble.averages();
    let estimate = state.theta_bar().to_vec();
    let reports = build_reports(&estimate, &replicate_averages, functionals, config.alpha)?;
    let plan = HorizonPlan { iterations: state.t(), consumed: state.t(), leftover: 0 };
    Ok(BootstrapOutcome { estimate, iterations: state.t(), plan, replicate_averages, reports })
}

/// CSV with header `replicate,coef_0,...,coef_{d-1}`, one row per replicate.
pub fn write_bootstrap_samples<T: Scalar, W: Write>(out: W, averages: &[Vec<T>]) -> Result<()> {
    let d = averages.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["replicate".to_string()];
    header.extend((0..d).map(|i| format!("coef_{i}")));
    w.write_record(&header)?;
    for (j, row) in averages.iter().enumerate() {
        let mut rec = vec![j.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("bootstrap samples", e))?;
    Ok(())
}
