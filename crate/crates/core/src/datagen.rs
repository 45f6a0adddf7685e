//! Seeded generators for the six simulation models and the MA(1)
//! process used in the averaging demonstration.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::{LossFamily, Observation};
use crate::scalar::Scalar;

/// True parameter `(β*, α*)` shared by all six models.
pub const THETA_STAR: [f64; 4] = [0.2, -0.3, 0.5, -0.25];

/// Mean of the i.i.d. covariates and intercept of the VAR.
pub const COVARIATE_CENTER: [f64; 3] = [-0.5, 0.3, -0.4];

pub const VAR_COEFFICIENTS: [[f64; 3]; 3] = [[0.4, -0.3, 0.5], [0.6, 0.3, -0.5], [0.1, -0.8, -0.4]];

pub const VAR_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    Iid,
    Mixing,
}

/// One of the simulation models 1 to 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    id: u8,
}

impl ModelSpec {
    pub fn new(id: u8) -> Result<Self> {
        if !(1..=6).contains(&id) {
            return Err(Error::usage(format!("model id must be 1..=6, got {id}")));
        }
        Ok(Self { id })
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn family(&self) -> LossFamily {
        match self.id {
            1 | 4 => LossFamily::Linear,
            2 | 5 => LossFamily::Lad,
            _ => LossFamily::Logistic,
        }
    }

    pub fn dependence(&self) -> Dependence {
        if self.id <= 3 {
            Dependence::Iid
        } else {
            Dependence::Mixing
        }
    }

    /// Parameter dimension: three slopes plus the intercept.
    pub fn dim(&self) -> usize {
        THETA_STAR.len()
    }

    pub fn theta_star<T: Scalar>(&self) -> Vec<T> {
        THETA_STAR.iter().map(|&v| T::lit(v)).collect()
    }

    /// Block scale `b`: 3 for the linear and LAD models, 1 for logistic.
    pub fn default_block_scale(&self) -> f64 {
        match self.family() {
            LossFamily::Logistic => 1.0,
            _ => 3.0,
        }
    }
}

/// Draw from the standard logistic distribution by inversion.
pub fn standard_logistic<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return (u / (1.0 - u)).ln();
        }
    }
}

/// `X_t = c + A X_{t-1} + δ_t` with standard normal `δ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarProcess {
    intercept: [f64; 3],
    coefficients: [[f64; 3]; 3],
    state: [f64; 3],
}

fn mat_vec(a: &[[f64; 3]; 3], x: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (o, row) in out.iter_mut().zip(a) {
        *o = row.iter().zip(x).map(|(r, v)| r * v).sum();
    }
    out
}

/// Spectral radius estimate from the growth rate of `A^k v` over 200
/// power iterations, averaged over the last 100 so complex pairs do not bias it.
pub fn spectral_radius_estimate(a: &[[f64; 3]; 3]) -> f64 {
    let mut v = [1.0, 0.7, -0.4];
    let mut log_growth = 0.0;
    for it in 0..200 {
        let w = mat_vec(a, &v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        if it >= 100 {
            log_growth += norm.ln();
        }
        v = w.map(|x| x / norm);
    }
    (log_growth / 100.0).exp()
}

/// Solves a 3x3 linear system by Gaussian elimination with partial pivoting.
pub fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for c in col..4 {
                m[row][c] -= f * m[col][c];
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][3] - s) / m[i][i];
    }
    Some(x)
}

impl VarProcess {
    /// The model-4 process, started at its intercept and burned in.
    pub fn standard<R: Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        Self::new(COVARIATE_CENTER, VAR_COEFFICIENTS, VAR_BURN_IN, rng)
    }

    pub fn new<R: Rng + ?Sized>(
        intercept: [f64; 3],
        coefficients: [[f64; 3]; 3],
        burn_in: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let radius = spectral_radius_estimate(&coefficients);
        if !(radius < 0.999) {
            return Err(Error::usage(format!("VAR is not stable: spectral radius estimate {radius}")));
        }
        let mut var = Self { intercept, coefficients, state: intercept };
        for _ in 0..burn_in {
            var.next_state(rng);
        }
        Ok(var)
    }

    /// `(I - A)^{-1} c`.
    pub fn stationary_mean(&self) -> [f64; 3] {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = f64::from(u8::from(i == j)) - self.coefficients[i][j];
            }
        }
        solve3(m, self.intercept).expect("stable VAR has invertible I - A")
    }

    pub fn state(&self) -> [f64; 3] {
        self.state
    }

    pub fn next_state<R: Rng + ?Sized>(&mut self, rng: &mut R) -> [f64; 3] {
        let ax = mat_vec(&self.coefficients, &self.state);
        for i in 0..3 {
            let delta: f64 = rng.sample(StandardNormal);
            self.state[i] = self.intercept[i] + ax[i] + delta;
        }
        self.state
    }
}

#[derive(Debug, Clone)]
enum Covariates {
    Iid,
    Var(VarProcess),
}

#[derive(Debug, Clone)]
enum Noise {
    /// `N(0, (‖X‖² + 1) / 4)`.
    Heteroskedastic,
    Logistic,
    /// `ẽ_t + ẽ_{t+1} + ẽ_{t+2}`; holds `ẽ_t, ẽ_{t+1}, ẽ_{t+2}`.
    Ma3([f64; 3]),
    /// `R_t ẽ_t + (1 - R_t) ẽ_{t+1}` with logistic `ẽ`; holds `ẽ_t, ẽ_{t+1}`.
    MixedLogistic([f64; 2]),
}

/// Unbounded single-pass stream of observations from one model.
///
/// Covariate vectors carry a trailing constant 1 for the intercept.
pub struct ModelStream<T, R> {
    spec: ModelSpec,
    rng: R,
    covariates: Covariates,
    noise: Noise,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Scalar, R: Rng> ModelStream<T, R> {
    pub fn new(spec: ModelSpec, mut rng: R) -> Result<Self> {
        let covariates = match spec.dependence() {
            Dependence::Iid => Covariates::Iid,
            Dependence::Mixing => Covariates::Var(VarProcess::standard(&mut rng)?),
        };
        let noise = match spec.id() {
            1 | 2 => Noise::Heteroskedastic,
            3 => Noise::Logistic,
            4 | 5 => {
                let mut buf = [0.0; 3];
                for v in &mut buf {
                    *v = rng.sample(StandardNormal);
                }
                Noise::Ma3(buf)
            }
            _ => Noise::MixedLogistic([standard_logistic(&mut rng), standard_logistic(&mut rng)]),
        };
        Ok(Self { spec, rng, covariates, noise, _scalar: Default::default() })
    }

    pub fn spec(&self) -> ModelSpec {
        self.spec
    }

    fn draw_covariates(&mut self) -> [f64; 3] {
        match &mut self.covariates {
            Covariates::Iid => {
                let mut x = COVARIATE_CENTER;
                for v in &mut x {
                    *v += self.rng.sample::<f64, _>(StandardNormal);
                }
                x
            }
            Covariates::Var(var) => var.next_state(&mut self.rng),
        }
    }

    fn draw_noise(&mut self, x: &[f64; 3]) -> f64 {
        match &mut self.noise {
            Noise::Heteroskedastic => {
                let sd = ((x.iter().map(|v| v * v).sum::<f64>() + 1.0) / 4.0).sqrt();
                sd * self.rng.sample::<f64, _>(StandardNormal)
            }
            Noise::Logistic => standard_logistic(&mut self.rng),
            Noise::Ma3(buf) => {
                let e = buf[0] + buf[1] + buf[2];
                *buf = [buf[1], buf[2], self.rng.sample(StandardNormal)];
                e
            }
            Noise::MixedLogistic(buf) => {
                let e = if self.rng.random_bool(0.5) { buf[0] } else { buf[1] };
                *buf = [buf[1], standard_logistic(&mut self.rng)];
                e
            }
        }
    }

    /// Next covariate vector (without intercept) and noise term.
    pub fn next_raw(&mut self) -> ([f64; 3], f64) {
        let x = self.draw_covariates();
        let e = self.draw_noise(&x);
        (x, e)
    }
}

impl<T: Scalar, R: Rng> Iterator for ModelStream<T, R> {
    type Item = Observation<T>;

    fn next(&mut self) -> Option<Observation<T>> {
        let (x, e) = self.next_raw();
        let index = x.iter().zip(&THETA_STAR).map(|(a, b)| a * b).sum::<f64>() + THETA_STAR[3];
        let y = match self.spec.family() {
            LossFamily::Logistic => {
                if index + e > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            _ => index + e,
        };
        let covariates = vec![T::lit(x[0]), T::lit(x[1]), T::lit(x[2]), T::one()];
        Some(Observation::new(T::lit(y), covariates))
    }
}

/// `n` observations from `spec`.
pub fn gen_model<T: Scalar, R: Rng>(spec: ModelSpec, n: usize, rng: R) -> Result<Vec<Observation<T>>> {
    Ok(ModelStream::new(spec, rng)?.take(n).collect())
}

/// Unbounded stream `Y_t = θ* + ẽ_t + ẽ_{t+1}` with `ẽ ~ N(0, σ²)`.
pub struct Ma1Stream<R> {
    theta_star: f64,
    sigma: f64,
    pending: f64,
    rng: R,
}

impl<R: Rng> Ma1Stream<R> {
    pub fn new(theta_star: f64, sigma: f64, mut rng: R) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::usage(format!("sigma must be nonnegative and finite, got {sigma}")));
        }
        let pending = sigma * rng.sample::<f64, _>(StandardNormal);
        Ok(Self { theta_star, sigma, pending, rng })
    }
}

impl<R: Rng> Iterator for Ma1Stream<R> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let fresh = self.sigma * self.rng.sample::<f64, _>(StandardNormal);
        let y = self.theta_star + self.pending + fresh;
        self.pending = fresh;
        Some(y)
    }
}

pub fn gen_ma1<R: Rng>(theta_star: f64, sigma: f64, n: usize, rng: R) -> Result<Vec<f64>> {
    Ok(Ma1Stream::new(theta_star, sigma, rng)?.take(n).collect())
}

/// Autocovariances of the MA(1) stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ma1Theory {
    pub r0: f64,
    pub r1: f64,
    /// `r0 + 2 r1`.
    pub longrun: f64,
}

pub fn ma1_theory(sigma: f64) -> Ma1Theory {
    let s2 = sigma * sigma;
    Ma1Theory { r0: 2.0 * s2, r1: s2, longrun: 4.0 * s2 }
}

/// Writes observations as CSV `y,x1,...,x{d-1}`, dropping the trailing intercept column.
pub fn write_observations<T: Scalar, W: Write, I>(out: W, data: I) -> Result<()>
where
    I: IntoIterator<Item = Observation<T>>,
{
    let mut w = csv::Writer::from_writer(out);
    let mut header_written = false;
    for z in data {
        let d = z.dim() - 1;
        if !header_written {
            let mut header = vec!["y".to_string()];
            header.extend((1..=d).map(|i| format!("x{i}")));
            w.write_record(&header)?;
            header_written = true;
        }
        let mut rec = vec![z.response.to_string()];
        rec.extend(z.covariates[..d].iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("generated data", e))?;
    Ok(())
}
