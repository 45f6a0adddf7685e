//! Learning-rate and block-size schedules, and the box projection.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Power-law step size `(t + offset)^(-rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRateSchedule<T> {
    gamma_offset: T,
    rho: T,
}

impl<T: Scalar> LearningRateSchedule<T> {
    /// Requires `gamma_offset > 0` and `1/2 < rho < 1`.
    pub fn new(gamma_offset: T, rho: T) -> Result<Self> {
        if !(gamma_offset > T::zero()) || !gamma_offset.is_finite() {
            return Err(Error::usage(format!(
                "learning-rate offset must be positive and finite, got {gamma_offset}"
            )));
        }
        if !(rho > T::lit(0.5) && rho < T::one()) {
            return Err(Error::usage(format!(
                "learning-rate exponent must lie in (1/2, 1), got {rho}"
            )));
        }
        Ok(Self { gamma_offset, rho })
    }

    pub fn gamma_offset(&self) -> T {
        self.gamma_offset
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    /// Step size at iteration `t` (1-based).
    #[inline]
    pub fn rate(&self, t: usize) -> T {
        debug_assert!(t >= 1, "iterations are 1-based");
        (T::from_count(t) + self.gamma_offset).powf(-self.rho)
    }
}

impl<T: Scalar> Default for LearningRateSchedule<T> {
    /// `(t + 10)^(-2/3)`.
    fn default() -> Self {
        Self::new(T::lit(10.0), T::lit(2.0 / 3.0)).expect("default schedule is valid")
    }
}

/// Block sizes `max(1, ceil(scale * t^exponent))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSchedule<T> {
    scale: T,
    exponent: T,
}

impl<T: Scalar> BlockSchedule<T> {
    /// Requires `scale > 0` and `0 <= exponent < 1`.
    pub fn new(scale: T, exponent: T) -> Result<Self> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::usage(format!(
                "block scale must be positive and finite, got {scale}"
            )));
        }
        if !(exponent >= T::zero() && exponent < T::one()) {
            return Err(Error::usage(format!(
                "block exponent must lie in [0, 1), got {exponent}"
            )));
        }
        Ok(Self { scale, exponent })
    }

    /// Unit blocks: one observation per trajectory per iteration.
    pub fn unit() -> Self {
        Self { scale: T::one(), exponent: T::zero() }
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn exponent(&self) -> T {
        self.exponent
    }

    /// Block size `B_t` at iteration `t` (1-based).
    #[inline]
    pub fn size(&self, t: usize) -> usize {
        debug_assert!(t >= 1, "iterations are 1-based");
        let raw = snapped_ceil(self.scale * T::from_count(t).powf(self.exponent));
        raw.to_usize().unwrap_or(usize::MAX).max(1)
    }
}

/// Ceiling that treats values within a few ulps of an integer as that integer,
/// so exact powers such as `32^0.2` do not round up past 2.
#[inline]
pub(crate) fn snapped_ceil<T: Scalar>(x: T) -> T {
    let r = x.round();
    let tol = T::epsilon() * T::from_f64(64.0).unwrap() * r.abs().max(T::one());
    if (x - r).abs() <= tol {
        r
    } else {
        x.ceil()
    }
}

/// Axis-aligned box `[lower_i, upper_i]` used as the parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> ParamBox<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.is_empty() {
            return Err(Error::usage("parameter box must have dimension at least 1"));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::usage(format!("bounds of coordinate {i} must be finite")));
            }
            if lo > hi {
                return Err(Error::usage(format!(
                    "coordinate {i}: lower bound {lo} exceeds upper bound {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Hypercube `[-half_width, half_width]^dim`.
    pub fn cube(dim: usize, half_width: T) -> Result<Self> {
        if !(half_width >= T::zero()) {
            return Err(Error::usage(format!("box half-width must be nonnegative, got {half_width}")));
        }
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn contains(&self, theta: &[T]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| x >= lo && x <= hi)
    }

    /// True when every coordinate lies strictly inside its bounds.
    pub fn is_interior(&self, theta: &[T]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| x > lo && x < hi)
    }

    /// Euclidean projection onto the box (coordinate-wise clamp).
    pub fn project(&self, theta: &[T]) -> Result<Vec<T>> {
        let mut out = theta.to_vec();
        self.project_in_place(&mut out)?;
        Ok(out)
    }

    /// Projects in place; returns whether any coordinate was clamped.
    pub fn project_in_place(&self, theta: &mut [T]) -> Result<bool> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: theta.len() });
        }
        Ok(self.clamp(theta))
    }

    #[inline]
    pub(crate) fn clamp(&self, theta: &mut [T]) -> bool {
        let mut active = false;
        for (x, (lo, hi)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            // NaN stays NaN; max/min would silently map it to a bound.
            if *x < *lo {
                *x = *lo;
                active = true;
            } else if *x > *hi {
                *x = *hi;
                active = true;
            }
        }
        active
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn learning_rate_closed_form() {
        let s = LearningRateSchedule::<f64>::new(10.0, 2.0 / 3.0).unwrap();
        // 11^(-2/3) and 20^(-2/3) from a 30-digit evaluation.
        assert!((s.rate(1) - 0.202_180_008_233_574_1).abs() < 1e-14);
        assert!((s.rate(10) - 0.135_720_880_829_745_3).abs() < 1e-14);
        assert!((s.rate(1) - (-(2.0 / 3.0) * 11f64.ln()).exp()).abs() < 1e-15);
    }

    #[test]
    fn learning_rate_rejects_bad_parameters() {
        assert!(LearningRateSchedule::<f64>::new(0.0, 0.6).is_err());
        assert!(LearningRateSchedule::<f64>::new(1.0, 0.5).is_err());
        assert!(LearningRateSchedule::<f64>::new(1.0, 1.0).is_err());
        assert!(LearningRateSchedule::<f64>::new(f64::NAN, 0.6).is_err());
    }

    #[test]
    fn learning_rate_strictly_decreasing() {
        let s = LearningRateSchedule::<f64>::default();
        let mut prev = s.rate(1);
        for t in 2..=1_000_000 {
            let r = s.rate(t);
            assert!(r > 0.0 && r < prev, "t={t}");
            prev = r;
        }
    }

    #[test]
    fn block_size_examples() {
        let unit = BlockSchedule::<f64>::new(1.0, 0.0).unwrap();
        for t in [1, 2, 17, 100_000] {
            assert_eq!(unit.size(t), 1);
        }
        let s = BlockSchedule::<f64>::new(3.0, 0.3).unwrap();
        assert_eq!(s.size(1), 3);
        // 3 * 10^0.3 = 5.9858...
        assert_eq!(s.size(10), 6);
        let fifth = BlockSchedule::<f64>::new(1.0, 0.2).unwrap();
        assert_eq!(fifth.size(32), 2);
        assert_eq!(fifth.size(33), 3);
        assert_eq!(fifth.size(243), 3);
    }

    #[test]
    fn block_size_floors_at_one() {
        let s = BlockSchedule::<f64>::new(0.01, 0.1).unwrap();
        assert_eq!(s.size(1), 1);
        assert_eq!(s.size(5), 1);
    }

    #[test]
    fn block_size_monotone_on_long_range() {
        for &(b, a) in &[(3.0, 0.3), (1.0, 0.7), (0.5, 0.99), (2.5, 0.2)] {
            let s = BlockSchedule::<f64>::new(b, a).unwrap();
            let mut prev = s.size(1);
            assert!(prev >= 1);
            for t in 2..=1_000_000 {
                let cur = s.size(t);
                assert!(cur >= prev, "b={b} a={a} t={t}");
                prev = cur;
            }
        }
    }

    #[test]
    fn project_examples() {
        let bx = ParamBox::<f64>::cube(2, 10.0).unwrap();
        assert_eq!(bx.project(&[1.5, -2.0]).unwrap(), vec![1.5, -2.0]);
        assert_eq!(bx.project(&[15.0, -3.0]).unwrap(), vec![10.0, -3.0]);
        assert!(matches!(
            bx.project(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn box_validation() {
        assert!(ParamBox::<f64>::new(vec![1.0], vec![0.0]).is_err());
        assert!(ParamBox::<f64>::new(vec![0.0], vec![f64::INFINITY]).is_err());
        assert!(ParamBox::<f64>::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    fn norm(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    proptest! {
        #[test]
        fn projection_idempotent(v in prop::collection::vec(-50.0f64..50.0, 4), hw in 0.0f64..20.0) {
            let bx = ParamBox::cube(4, hw).unwrap();
            let once = bx.project(&v).unwrap();
            let twice = bx.project(&once).unwrap();
            prop_assert_eq!(once.clone(), twice);
            prop_assert!(bx.contains(&once));
        }

        #[test]
        fn projection_non_expansive(
            a in prop::collection::vec(-50.0f64..50.0, 3),
            b in prop::collection::vec(-50.0f64..50.0, 3),
        ) {
            let bx = ParamBox::new(vec![-10.0, -1.0, 0.0], vec![10.0, 1.0, 5.0]).unwrap();
            let pa = bx.project(&a).unwrap();
            let pb = bx.project(&b).unwrap();
            prop_assert!(norm(&pa, &pb) <= norm(&a, &b));
        }

        #[test]
        fn learning_rate_positive_and_decreasing(g in 0.01f64..100.0, rho in 0.501f64..0.999, t in 1usize..10_000_000) {
            let s = LearningRateSchedule::new(g, rho).unwrap();
            prop_assert!(s.rate(t) > 0.0);
            prop_assert!(s.rate(t) > s.rate(t + 1));
        }
    }
}
