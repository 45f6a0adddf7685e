//! Block-schedule efficiency factor `n κ_T² = 2 (Σ B_t)(Σ 1/B_t) / T²`
//! with `B_t = ceil(t^α)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::schedules::snapped_ceil;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaCurvePoint {
    pub alpha: f64,
    pub t: usize,
    pub value: f64,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let s = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - s) + x;
        } else {
            self.carry += (x - s) + self.sum;
        }
        self.sum = s;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

fn check(alpha: f64, t: usize) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::usage(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    if t == 0 {
        return Err(Error::usage("T must be at least 1"));
    }
    Ok(())
}

/// `n κ_T²` for `B_t = ceil(t^α)`, `t = 1..=T`.
pub fn kappa_value(alpha: f64, t: usize) -> Result<f64> {
    check(alpha, t)?;
    let mut sum_b = CompensatedSum::default();
    let mut sum_inv = CompensatedSum::default();
    for s in 1..=t {
        let b = snapped_ceil((s as f64).powf(alpha));
        sum_b.add(b);
        sum_inv.add(1.0 / b);
    }
    let tt = t as f64;
    Ok(2.0 * sum_b.value() * sum_inv.value() / (tt * tt))
}

/// One point per grid value, evaluated in parallel.
pub fn kappa_curve(alphas: &[f64], t: usize) -> Result<Vec<KappaCurvePoint>> {
    use rayon::prelude::*;
    if alphas.is_empty() {
        return Err(Error::usage("alpha grid is empty"));
    }
    alphas
        .par_iter()
        .map(|&alpha| Ok(KappaCurvePoint { alpha, t, value: kappa_value(alpha, t)? }))
        .collect()
}

/// Parses `start:stop:step` (stop inclusive) or a single value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::usage(format!("invalid number {s:?} in grid {spec:?}")))
    };
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                return Err(Error::usage(format!("grid {spec:?} needs start <= stop and step > 0")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            // Rounded to 12 decimals so 0.1 * 3 prints as 0.3.
            Ok((0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
        }
        _ => Err(Error::usage(format!("grid {spec:?} must be start:stop:step or a single value"))),
    }
}

/// CSV `alpha,T,n_kappa_sq`.
pub fn write_curve<W: Write>(out: W, points: &[KappaCurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "T", "n_kappa_sq"])?;
    for p in points {
        w.write_record([p.alpha.to_string(), p.t.to_string(), p.value.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("kappa curve", e))?;
    Ok(())
}
