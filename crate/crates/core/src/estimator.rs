//! Dual-trajectory mini-batch SGD with online Polyak-Ruppert averaging,
//! and the single-trajectory per-observation baseline.
//!
//! At iteration `t` both trajectories take a projected step on their own
//! batch of the block pair,
//!
//! ```text
//! θ_t^k = Π[θ_{t-1}^k - γ_t U_t Ĥ_t(W_t^k, θ_{t-1}^k)],   k = a, b
//! ```
//!
//! where `Ĥ_t` is the batch-mean gradient and `U_t` a multiplicative weight
//! (1 for the point estimator), and the average is maintained as
//! `θ̄_t = θ̄_{t-1} (t-1)/t + (θ_t^a + θ_t^b) / (2t)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::block_stream::{BlockPair, BlockPartitioner, HorizonPlan, ObservationSource};
use crate::error::{Error, Result};
use crate::models::{LossModel, Observation};
use crate::scalar::Scalar;
use crate::schedules::{BlockSchedule, LearningRateSchedule, ParamBox};

/// Mean of per-observation gradients over a non-empty batch.
pub fn batch_gradient<T: Scalar>(
    model: &LossModel,
    batch: &[Observation<T>],
    theta: &[T],
) -> Result<Vec<T>> {
    if batch.is_empty() {
        return Err(Error::usage("batch gradient of an empty batch"));
    }
    let mut acc = vec![T::zero(); model.dim()];
    for z in batch {
        let g = model.gradient(z, theta)?;
        for (a, v) in acc.iter_mut().zip(g) {
            *a += v;
        }
    }
    let size = T::from_count(batch.len());
    for a in &mut acc {
        *a /= size;
    }
    Ok(acc)
}

/// Checks that every observation of `batch` is admissible for `model`.
pub(crate) fn validate_batch<T: Scalar>(model: &LossModel, batch: &[Observation<T>]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::usage("empty batch"));
    }
    for z in batch {
        if z.covariates.len() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), got: z.covariates.len() });
        }
        if !z.response.is_finite() {
            return Err(Error::NonFinite("response"));
        }
        if z.covariates.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("covariates"));
        }
    }
    Ok(())
}

pub(crate) fn validate_pair<T: Scalar>(model: &LossModel, pair: &BlockPair<T>) -> Result<()> {
    if pair.batch_a.len() != pair.batch_b.len() {
        return Err(Error::usage(format!(
            "block pair {} has unequal batches ({} vs {})",
            pair.t,
            pair.batch_a.len(),
            pair.batch_b.len()
        )));
    }
    validate_batch(model, &pair.batch_a)?;
    validate_batch(model, &pair.batch_b)
}

/// `θ ← Π[θ - step · mean_i ∇l(z_i, θ)]`, returning whether the projection was active.
///
/// `scratch` must have the model dimension. Inputs are assumed validated.
#[inline]
fn descend<T: Scalar>(
    theta: &mut [T],
    batch: &[Observation<T>],
    step: T,
    model: &LossModel,
    bx: &ParamBox<T>,
    scratch: &mut [T],
) -> bool {
    scratch.iter_mut().for_each(|s| *s = T::zero());
    for z in batch {
        model.accumulate_gradient(z, theta, T::one(), scratch);
    }
    let scaled = step / T::from_count(batch.len());
    for (x, g) in theta.iter_mut().zip(scratch.iter()) {
        *x -= scaled * *g;
    }
    bx.clamp(theta)
}

/// Iterates `θ_t^a`, `θ_t^b` and their running average after `t` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState<T> {
    t: usize,
    theta_a: Vec<T>,
    theta_b: Vec<T>,
    theta_bar: Vec<T>,
    projections: usize,
    last_projection: Option<usize>,
}

impl<T: Scalar> EstimatorState<T> {
    /// Both trajectories start from the same (projected) `theta0`.
    pub fn new(theta0: Vec<T>, bx: &ParamBox<T>) -> Result<Self> {
        let mut theta0 = theta0;
        bx.project_in_place(&mut theta0)?;
        let d = theta0.len();
        Ok(Self {
            t: 0,
            theta_a: theta0.clone(),
            theta_b: theta0,
            theta_bar: vec![T::zero(); d],
            projections: 0,
            last_projection: None,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.theta_a.len()
    }

    pub fn theta_a(&self) -> &[T] {
        &self.theta_a
    }

    pub fn theta_b(&self) -> &[T] {
        &self.theta_b
    }

    /// Running average; meaningful only once `t >= 1`.
    pub fn theta_bar(&self) -> &[T] {
        &self.theta_bar
    }

    /// The averaged estimate, or `None` before the first iteration.
    pub fn estimate(&self) -> Option<&[T]> {
        (self.t > 0).then_some(self.theta_bar.as_slice())
    }

    /// Number of trajectory updates in which the projection clamped a coordinate.
    pub fn projection_count(&self) -> usize {
        self.projections
    }

    /// Last iteration at which the projection was active.
    pub fn last_projection(&self) -> Option<usize> {
        self.last_projection
    }

    /// One weighted update of both trajectories on `pair`.
    pub fn weighted_step(
        &mut self,
        pair: &BlockPair<T>,
        gamma_t: T,
        weight: T,
        model: &LossModel,
        bx: &ParamBox<T>,
    ) -> Result<()> {
        self.check_sequence(pair.t)?;
        if self.dim() != model.dim() || bx.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), got: self.dim() });
        }
        if !(weight >= T::zero()) {
            return Err(Error::usage(format!("bootstrap weight must be nonnegative, got {weight}")));
        }
        validate_pair(model, pair)?;
        let mut scratch = vec![T::zero(); model.dim()];
        self.advance(pair, gamma_t * weight, model, bx, &mut scratch);
        Ok(())
    }

    /// Unweighted update (`U_t = 1`).
    pub fn step(&mut self, pair: &BlockPair<T>, gamma_t: T, model: &LossModel, bx: &ParamBox<T>) -> Result<()> {
        self.weighted_step(pair, gamma_t, T::one(), model, bx)
    }

    pub(crate) fn check_sequence(&self, t: usize) -> Result<()> {
        if t != self.t + 1 {
            return Err(Error::Sequencing { expected: self.t + 1, got: t });
        }
        Ok(())
    }

    /// Update without validation; `step = γ_t · U_t`.
    #[inline]
    pub(crate) fn advance(
        &mut self,
        pair: &BlockPair<T>,
        step: T,
        model: &LossModel,
        bx: &ParamBox<T>,
        scratch: &mut [T],
    ) {
        let t = pair.t;
        let clamped_a = descend(&mut self.theta_a, &pair.batch_a, step, model, bx, scratch);
        let clamped_b = descend(&mut self.theta_b, &pair.batch_b, step, model, bx, scratch);
        let n = clamped_a as usize + clamped_b as usize;
        if n > 0 {
            self.projections += n;
            self.last_projection = Some(t);
        }
        let tt = T::from_count(t);
        let keep = T::from_count(t - 1) / tt;
        let two_t = tt + tt;
        for ((bar, a), b) in self.theta_bar.iter_mut().zip(&self.theta_a).zip(&self.theta_b) {
            *bar = *bar * keep + (*a + *b) / two_t;
        }
        self.t = t;
    }
}

/// Per-observation SGD iterate and its running average.
#[derive(Debug, Clone, PartialEq)]
pub struct VanillaState<T> {
    t: usize,
    theta: Vec<T>,
    theta_bar: Vec<T>,
}

impl<T: Scalar> VanillaState<T> {
    pub fn new(theta0: Vec<T>, bx: &ParamBox<T>) -> Result<Self> {
        let mut theta0 = theta0;
        bx.project_in_place(&mut theta0)?;
        let d = theta0.len();
        Ok(Self { t: 0, theta: theta0, theta_bar: vec![T::zero(); d] })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn theta_bar(&self) -> &[T] {
        &self.theta_bar
    }

    pub fn estimate(&self) -> Option<&[T]> {
        (self.t > 0).then_some(self.theta_bar.as_slice())
    }

    /// `θ_t = Π[θ_{t-1} - γ_t w ∇l(z, θ_{t-1})]` followed by the average update.
    pub fn vanilla_step(
        &mut self,
        z: &Observation<T>,
        gamma_t: T,
        weight: T,
        model: &LossModel,
        bx: &ParamBox<T>,
    ) -> Result<()> {
        if self.theta.len() != model.dim() || bx.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), got: self.theta.len() });
        }
        if !(weight >= T::zero()) {
            return Err(Error::usage(format!("bootstrap weight must be nonnegative, got {weight}")));
        }
        validate_batch(model, std::slice::from_ref(z))?;
        let mut scratch = vec![T::zero(); model.dim()];
        self.advance(z, gamma_t * weight, model, bx, &mut scratch);
        Ok(())
    }

    #[inline]
    pub(crate) fn advance(
        &mut self,
        z: &Observation<T>,
        step: T,
        model: &LossModel,
        bx: &ParamBox<T>,
        scratch: &mut [T],
    ) {
        let t = self.t + 1;
        descend(&mut self.theta, std::slice::from_ref(z), step, model, bx, scratch);
        let tt = T::from_count(t);
        let keep = T::from_count(t - 1) / tt;
        for (bar, x) in self.theta_bar.iter_mut().zip(&self.theta) {
            *bar = *bar * keep + *x / tt;
        }
        self.t = t;
    }
}

/// Starting point shared by all trajectories.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialValue<T> {
    Fixed(Vec<T>),
    /// Independent `N(0, sd^2)` coordinates drawn from a seeded stream.
    Gaussian { sd: T, seed: u64 },
}

impl<T: Scalar> InitialValue<T> {
    /// `N(0, 0.1 I)` draws.
    pub fn default_gaussian(seed: u64) -> Self {
        InitialValue::Gaussian { sd: T::lit(0.1f64.sqrt()), seed }
    }

    pub fn resolve(&self, dim: usize) -> Result<Vec<T>> {
        match self {
            InitialValue::Fixed(v) => {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
                }
                Ok(v.clone())
            }
            InitialValue::Gaussian { sd, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..dim)
                    .map(|_| {
                        let u: f64 = StandardNormal.sample(&mut rng);
                        *sd * T::lit(u)
                    })
                    .collect())
            }
        }
    }
}

/// Everything needed to run the point estimator over a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig<T> {
    pub model: LossModel,
    pub learning_rate: LearningRateSchedule<T>,
    pub blocks: BlockSchedule<T>,
    pub param_box: ParamBox<T>,
    pub init: InitialValue<T>,
}

impl<T: Scalar> EstimatorConfig<T> {
    /// Default schedules, a `[-10, 10]^d` box and a fixed starting point.
    pub fn new(model: LossModel, blocks: BlockSchedule<T>, init: InitialValue<T>) -> Self {
        Self {
            model,
            learning_rate: LearningRateSchedule::default(),
            blocks,
            param_box: ParamBox::cube(model.dim(), T::lit(10.0)).expect("valid default box"),
            init,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.param_box.dim() != self.model.dim() {
            return Err(Error::DimensionMismatch { expected: self.model.dim(), got: self.param_box.dim() });
        }
        Ok(())
    }

    pub(crate) fn initial_point(&self) -> Result<Vec<T>> {
        self.init.resolve(self.model.dim())
    }
}

/// Final estimator state and how the stream was used.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorRun<T> {
    pub state: EstimatorState<T>,
    pub plan: HorizonPlan,
}

/// Runs the block estimator until the stream is exhausted.
///
/// A stream too short for the first pair yields a state with `t = 0`
/// (see [`EstimatorState::estimate`]).
pub fn run<T: Scalar, S: ObservationSource<T>>(source: S, config: &EstimatorConfig<T>) -> Result<EstimatorRun<T>> {
    config.validate()?;
    let mut state = EstimatorState::new(config.initial_point()?, &config.param_box)?;
    let mut blocks = BlockPartitioner::new(source, config.blocks);
    let mut scratch = vec![T::zero(); config.model.dim()];
    while let Some(pair) = blocks.try_next()? {
        validate_pair(&config.model, &pair)?;
        let gamma = config.learning_rate.rate(pair.t);
        state.advance(&pair, gamma, &config.model, &config.param_box, &mut scratch);
    }
    Ok(EstimatorRun { state, plan: blocks.plan() })
}

/// Runs per-observation SGD over the whole stream, `γ_t` indexed by observation.
pub fn run_vanilla<T: Scalar, S: ObservationSource<T>>(
    mut source: S,
    config: &EstimatorConfig<T>,
) -> Result<VanillaState<T>> {
    config.validate()?;
    let mut state = VanillaState::new(config.initial_point()?, &config.param_box)?;
    let mut scratch = vec![T::zero(); config.model.dim()];
    while let Some(z) = source.pull()? {
        validate_batch(&config.model, std::slice::from_ref(&z))?;
        let gamma = config.learning_rate.rate(state.t + 1);
        state.advance(&z, gamma, &config.model, &config.param_box, &mut scratch);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LossFamily;

    fn obs(y: f64, x: &[f64]) -> Observation<f64> {
        Observation::new(y, x.to_vec())
    }

    fn wide(d: usize) -> ParamBox<f64> {
        ParamBox::cube(d, 10.0).unwrap()
    }

    fn hand_pair() -> BlockPair<f64> {
        BlockPair { t: 1, batch_a: vec![obs(1.0, &[1.0, 0.0])], batch_b: vec![obs(-1.0, &[0.0, 1.0])] }
    }

    #[test]
    fn batch_gradient_examples() {
        let m = LossModel::new(LossFamily::Linear, 2);
        let theta = [0.0, 0.0];
        let z = obs(1.0, &[1.0, 0.0]);
        assert_eq!(batch_gradient(&m, &[z.clone()], &theta).unwrap(), m.gradient(&z, &theta).unwrap());
        assert_eq!(
            batch_gradient(&m, &[z.clone(), z.clone()], &theta).unwrap(),
            m.gradient(&z, &theta).unwrap()
        );
        let g = batch_gradient(&m, &[z, obs(-1.0, &[0.0, 1.0])], &theta).unwrap();
        assert_eq!(g, vec![-0.5, 0.5]);
        assert!(batch_gradient::<f64>(&m, &[], &theta).is_err());
    }

    #[test]
    fn hand_iterated_first_step() {
        let m = LossModel::new(LossFamily::Linear, 2);
        let mut s = EstimatorState::new(vec![0.0, 0.0], &wide(2)).unwrap();
        s.weighted_step(&hand_pair(), 0.5, 1.0, &m, &wide(2)).unwrap();
        assert_eq!(s.theta_a(), &[0.5, 0.0]);
        assert_eq!(s.theta_b(), &[0.0, -0.5]);
        assert_eq!(s.theta_bar(), &[0.25, -0.25]);
        assert_eq!(s.t(), 1);
    }

    #[test]
    fn unit_weight_matches_step_bit_exactly() {
        let m = LossModel::new(LossFamily::Logistic, 2);
        let bx = wide(2);
        let mut a = EstimatorState::new(vec![0.1, -0.2], &bx).unwrap();
        let mut b = a.clone();
        let pair = BlockPair {
            t: 1,
            batch_a: vec![obs(1.0, &[0.3, 1.0]), obs(-1.0, &[1.3, 1.0])],
            batch_b: vec![obs(-1.0, &[-0.7, 1.0]), obs(1.0, &[2.0, 1.0])],
        };
        a.weighted_step(&pair, 0.2, 1.0, &m, &bx).unwrap();
        b.step(&pair, 0.2, &m, &bx).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_step_keeps_iterates() {
        let m = LossModel::new(LossFamily::Linear, 2);
        let bx = wide(2);
        let mut s = EstimatorState::new(vec![0.3, 0.7], &bx).unwrap();
        s.step(&hand_pair(), 0.0, &m, &bx).unwrap();
        assert_eq!(s.theta_a(), &[0.3, 0.7]);
        assert_eq!(s.theta_b(), &[0.3, 0.7]);
        assert_eq!(s.theta_bar(), &[0.3, 0.7]);
    }

    #[test]
    fn out_of_order_pair_is_rejected() {
        let m = LossModel::new(LossFamily::Linear, 2);
        let bx = wide(2);
        let mut s = EstimatorState::new(vec![0.0, 0.0], &bx).unwrap();
        let mut pair = hand_pair();
        pair.t = 2;
        assert!(matches!(s.step(&pair, 0.1, &m, &bx), Err(Error::Sequencing { expected: 1, got: 2 })));
    }

    #[test]
    fn projection_is_applied_and_counted() {
        let m = LossModel::new(LossFamily::Linear, 2);
        let bx = ParamBox::cube(2, 0.1).unwrap();
        let mut s = EstimatorState::new(vec![0.0, 0.0], &bx).unwrap();
        s.step(&hand_pair(), 0.5, &m, &bx).unwrap();
        assert_eq!(s.theta_a(), &[0.1, 0.0]);
        assert_eq!(s.theta_b(), &[0.0, -0.1]);
        assert_eq!(s.projection_count(), 2);
        assert_eq!(s.last_projection(), Some(1));
    }

    #[test]
    fn fixed_point_when_residuals_vanish() {
        let m = LossModel::new(LossFamily::Linear, 2);
        let theta0 = vec![0.5, -1.0];
        let data: Vec<_> = (0..50)
            .map(|i| {
                let x = [1.0, i as f64 * 0.1];
                obs(x[0] * theta0[0] + x[1] * theta0[1], &x)
            })
            .collect();
        let cfg = EstimatorConfig::new(m, BlockSchedule::new(2.0, 0.3).unwrap(), InitialValue::Fixed(theta0.clone()));
        let out = run(data.into_iter(), &cfg).unwrap();
        assert!(out.state.t() > 0);
        assert_eq!(out.state.theta_bar(), theta0.as_slice());
    }

    #[test]
    fn empty_source_gives_unstarted_state() {
        let m = LossModel::new(LossFamily::Linear, 2);
        let cfg = EstimatorConfig::new(m, BlockSchedule::unit(), InitialValue::Fixed(vec![0.0, 0.0]));
        let out = run(std::iter::empty::<Observation<f64>>(), &cfg).unwrap();
        assert_eq!(out.state.t(), 0);
        assert!(out.state.estimate().is_none());
        assert_eq!(out.plan, HorizonPlan { iterations: 0, consumed: 0, leftover: 0 });
    }

    #[test]
    fn vanilla_unit_weight_and_zero_gradient() {
        let m = LossModel::new(LossFamily::Linear, 1);
        let bx = wide(1);
        let mut s = VanillaState::new(vec![2.0], &bx).unwrap();
        for _ in 0..10 {
            s.vanilla_step(&obs(2.0, &[1.0]), 0.3, 1.0, &m, &bx).unwrap();
        }
        assert_eq!(s.theta_bar(), &[2.0]);
        assert_eq!(s.t(), 10);
    }

    #[test]
    fn vanilla_matches_unit_block_trajectory_a() {
        let m = LossModel::new(LossFamily::Lad, 2);
        let bx = wide(2);
        let lr = LearningRateSchedule::<f64>::default();
        let data: Vec<_> = (0..200).map(|i| obs(((i * 7) % 11) as f64 - 5.0, &[1.0, (i % 5) as f64])).collect();

        let mut block = EstimatorState::new(vec![0.1, 0.2], &bx).unwrap();
        let mut parts = BlockPartitioner::new(data.clone().into_iter(), BlockSchedule::unit());
        let mut vanilla = VanillaState::new(vec![0.1, 0.2], &bx).unwrap();
        while let Some(pair) = parts.try_next().unwrap() {
            let gamma = lr.rate(pair.t);
            block.weighted_step(&pair, gamma, 1.7, &m, &bx).unwrap();
            vanilla.vanilla_step(&pair.batch_a[0], gamma, 1.7, &m, &bx).unwrap();
            assert_eq!(block.theta_a(), vanilla.theta());
        }
        assert_eq!(vanilla.t(), 100);
    }

    #[test]
    fn vanilla_run_counts_every_observation() {
        let m = LossModel::new(LossFamily::Linear, 1);
        let cfg = EstimatorConfig::new(m, BlockSchedule::unit(), InitialValue::Fixed(vec![0.0]));
        let data = (0..37).map(|_| obs(1.0, &[1.0]));
        let s = run_vanilla(data, &cfg).unwrap();
        assert_eq!(s.t(), 37);
        assert!((s.theta_bar()[0] - 1.0).abs() < 0.5);
    }

    #[test]
    fn gaussian_initial_value_is_seeded() {
        let init = InitialValue::<f64>::default_gaussian(5);
        assert_eq!(init.resolve(4).unwrap(), init.resolve(4).unwrap());
        assert_ne!(init.resolve(4).unwrap(), InitialValue::<f64>::default_gaussian(6).resolve(4).unwrap());
        assert!(InitialValue::Fixed(vec![1.0f64]).resolve(2).is_err());
    }
}
