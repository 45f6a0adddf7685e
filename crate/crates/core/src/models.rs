//! Per-observation loss and gradient oracles.
//!
//! Three families are supported, all linear in the covariates:
//!
//! * `Linear`: squared loss `(y - x'θ)^2 / 2`, gradient `-(y - x'θ) x`
//! * `Lad`: absolute loss `|y - x'θ|`, subgradient `-sign(y - x'θ) x` with `sign(0) = 0`
//! * `Logistic`: `log(1 + exp(-y x'θ))` for `y ∈ {-1, +1}`, gradient `-y x / (1 + exp(y x'θ))`
//!
//! An intercept is represented as a trailing constant-1 covariate.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One observation `z = (y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    pub response: T,
    pub covariates: Vec<T>,
}

impl<T: Scalar> Observation<T> {
    pub fn new(response: T, covariates: Vec<T>) -> Self {
        Self { response, covariates }
    }

    pub fn dim(&self) -> usize {
        self.covariates.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossFamily {
    Linear,
    Lad,
    Logistic,
}

impl LossFamily {
    pub fn name(self) -> &'static str {
        match self {
            LossFamily::Linear => "linear",
            LossFamily::Lad => "lad",
            LossFamily::Logistic => "logistic",
        }
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, LossFamily::Lad)
    }
}

impl fmt::Display for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "ols" => Ok(LossFamily::Linear),
            "lad" => Ok(LossFamily::Lad),
            "logistic" | "logit" => Ok(LossFamily::Logistic),
            other => Err(Error::usage(format!("unknown loss family `{other}`"))),
        }
    }
}

/// A loss family bound to a parameter dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossModel {
    family: LossFamily,
    dim: usize,
}

impl LossModel {
    pub fn new(family: LossFamily, dim: usize) -> Self {
        Self { family, dim }
    }

    pub fn family(&self) -> LossFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check<T: Scalar>(&self, z: &Observation<T>, theta: &[T]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: theta.len() });
        }
        if z.covariates.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: z.covariates.len() });
        }
        if !z.response.is_finite() {
            return Err(Error::NonFinite("response"));
        }
        if z.covariates.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("covariates"));
        }
        Ok(())
    }

    /// Gradient (subgradient for LAD) of the loss at `theta`.
    pub fn gradient<T: Scalar>(&self, z: &Observation<T>, theta: &[T]) -> Result<Vec<T>> {
        self.check(z, theta)?;
        let mut out = vec![T::zero(); self.dim];
        self.accumulate_gradient(z, theta, T::one(), &mut out);
        Ok(out)
    }

    /// Adds `scale * ∇l(z, θ)` into `acc` without validation.
    ///
    /// Callers must have checked dimensions; this is the hot path of every update.
    #[inline]
    pub(crate) fn accumulate_gradient<T: Scalar>(
        &self,
        z: &Observation<T>,
        theta: &[T],
        scale: T,
        acc: &mut [T],
    ) {
        let margin = dot(&z.covariates, theta);
        let coef = match self.family {
            LossFamily::Linear => -(z.response - margin),
            LossFamily::Lad => -sign(z.response - margin),
            LossFamily::Logistic => -z.response * logistic_tail(z.response * margin),
        };
        if coef == T::zero() {
            return;
        }
        let c = coef * scale;
        for (a, x) in acc.iter_mut().zip(&z.covariates) {
            *a += c * *x;
        }
    }

    pub fn loss<T: Scalar>(&self, z: &Observation<T>, theta: &[T]) -> Result<T> {
        self.check(z, theta)?;
        let margin = dot(&z.covariates, theta);
        Ok(match self.family {
            LossFamily::Linear => {
                let r = z.response - margin;
                r * r / T::lit(2.0)
            }
            LossFamily::Lad => (z.response - margin).abs(),
            LossFamily::Logistic => softplus(-z.response * margin),
        })
    }

    /// Largest relative discrepancy between `gradient` and central differences of `loss`.
    ///
    /// The per-coordinate discrepancy is `|g_i - fd_i| / max(1, |g_i|, |fd_i|)`.
    pub fn finite_diff_check<T: Scalar>(&self, z: &Observation<T>, theta: &[T], h: T) -> Result<T> {
        if !self.family.is_smooth() {
            return Err(Error::UnsupportedFamily(self.family.name()));
        }
        if !(h >= T::lit(1e-7) && h <= T::lit(1e-4)) {
            return Err(Error::usage(format!("finite-difference step must lie in [1e-7, 1e-4], got {h}")));
        }
        let grad = self.gradient(z, theta)?;
        let mut probe = theta.to_vec();
        let mut worst = T::zero();
        for i in 0..self.dim {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = self.loss(z, &probe)?;
            probe[i] = orig - h;
            let down = self.loss(z, &probe)?;
            probe[i] = orig;
            let fd = (up - down) / (h + h);
            let denom = T::one().max(grad[i].abs()).max(fd.abs());
            worst = worst.max((grad[i] - fd).abs() / denom);
        }
        Ok(worst)
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

#[inline]
fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// `1 / (1 + exp(u))`, evaluated without overflow for large `|u|`.
#[inline]
fn logistic_tail<T: Scalar>(u: T) -> T {
    if u >= T::zero() {
        let e = (-u).exp();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + u.exp())
    }
}

/// `log(1 + exp(v))`.
#[inline]
fn softplus<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}
