//! Circular-statistics primitives.
//!
//! Angles are canonicalised to `(-π, π]`. Samples are summarised by their
//! resultant vector `(C, S)`, from which the mean orientation, the mean
//! resultant length and the dispersion estimators are derived.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resultant lengths at or below this (relative to the total weight) are
/// treated as zero: the sample has no orientation.
pub const ZERO_RESULTANT_EPS: f64 = 1e-12;

/// An angle in radians, always inside `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    /// Wraps `radians` into `(-π, π]`.
    pub fn new(radians: f64) -> Result<Self> {
        wrap_angle(radians)
    }

    pub fn from_degrees(degrees: f64) -> Result<Self> {
        wrap_angle(degrees.to_radians())
    }

    pub const fn zero() -> Self {
        Angle(0.0)
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// Rotates by `delta` radians and wraps the result.
    pub fn rotated(self, delta: f64) -> Result<Self> {
        wrap_angle(self.0 + delta)
    }

    pub fn unit_vector(self) -> (f64, f64) {
        (self.0.cos(), self.0.sin())
    }
}

impl Default for Angle {
    fn default() -> Self {
        Angle::zero()
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rad", self.0)
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        wrap_angle(value)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

/// Canonicalises an unconstrained angle into `(-π, π]`; `-π` maps to `π`.
pub fn wrap_angle(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    if x > -PI && x <= PI {
        return Ok(Angle(x));
    }
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    let wrapped = if r > PI { r - TAU } else { r };
    Ok(Angle(wrapped))
}

/// Signed minimum distance from `alpha` to `theta` on the circle.
///
/// Equivalent to `2·atan(tan((θ-α)/2))` but evaluated by wrapping the plain
/// difference, which keeps the `±π` boundary on the `(-π, π]` convention.
pub fn circ_distance(theta: Angle, alpha: Angle) -> f64 {
    let d = theta.0 - alpha.0;
    // both inputs are canonical, so d is in (-2π, 2π)
    if d > PI {
        d - TAU
    } else if d <= -PI {
        d + TAU
    } else {
        d
    }
}

/// Resultant-vector statistics of a (possibly weighted) sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularSampleSummary {
    /// Number of samples.
    pub n: usize,
    /// Sum of weights; equals `n` for unit weights.
    pub total_weight: f64,
    /// Weighted sum of cosines.
    pub c: f64,
    /// Weighted sum of sines.
    pub s: f64,
    /// Mean resultant length in `[0, 1]`.
    pub r_bar: f64,
    /// Squared mean resultant length.
    pub r_bar_sq: f64,
}

/// Computes `C`, `S` and the mean resultant length.
///
/// With weights, `C = Σ wᵢ cos θᵢ`, `S = Σ wᵢ sin θᵢ` and the resultant is
/// normalised by `Σ wᵢ` instead of `n`.
pub fn summarize(samples: &[Angle], weights: Option<&[f64]>) -> Result<CircularSampleSummary> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let (c, s, total_weight) = match weights {
        None => {
            let (c, s) = samples.iter().fold((0.0, 0.0), |(c, s), a| {
                let (sin, cos) = a.0.sin_cos();
                (c + cos, s + sin)
            });
            (c, s, samples.len() as f64)
        }
        Some(w) => {
            if w.len() != samples.len() {
                return Err(Error::domain(format!(
                    "{} weights for {} samples",
                    w.len(),
                    samples.len()
                )));
            }
            let mut acc = (0.0, 0.0, 0.0);
            for (a, &wi) in samples.iter().zip(w) {
                if !(wi > 0.0) || !wi.is_finite() {
                    return Err(Error::domain(format!("weight must be positive and finite, got {wi}")));
                }
                let (sin, cos) = a.0.sin_cos();
                acc = (acc.0 + wi * cos, acc.1 + wi * sin, acc.2 + wi);
            }
            acc
        }
    };
    let r_bar = ((c / total_weight).hypot(s / total_weight)).min(1.0);
    Ok(CircularSampleSummary {
        n: samples.len(),
        total_weight,
        c,
        s,
        r_bar,
        r_bar_sq: r_bar * r_bar,
    })
}

/// Orientation of the resultant vector, `atan2(S, C)`.
pub fn mean_orientation(summary: &CircularSampleSummary) -> Result<Angle> {
    if summary.r_bar <= ZERO_RESULTANT_EPS {
        return Err(Error::UndefinedMean);
    }
    wrap_angle(summary.s.atan2(summary.c))
}

/// `V = 1 - R̄`.
pub fn circular_variance(summary: &CircularSampleSummary) -> f64 {
    (1.0 - summary.r_bar).clamp(0.0, 1.0)
}

/// Sample variance of the circular residuals about the mean orientation,
/// with the unbiased `1/(n-1)` factor.
pub fn ss_variance(samples: &[Angle]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 samples, got {n}")));
    }
    let alpha = mean_orientation(&summarize(samples, None)?)?;
    let residuals: Vec<f64> = samples.iter().map(|&t| circ_distance(t, alpha)).collect();
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let ss = residuals.iter().map(|d| (d - mean).powi(2)).sum::<f64>();
    Ok(ss / (n - 1) as f64)
}

/// Wrapped-Normal variance from the bias-corrected squared resultant length:
/// `σ̂² = -ln(n/(n-1) · (R̄² - 1/n))`.
pub fn wn_variance(summary: &CircularSampleSummary) -> Result<f64> {
    let n = summary.n;
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 samples, got {n}")));
    }
    let nf = n as f64;
    let arg = nf / (nf - 1.0) * (summary.r_bar_sq - 1.0 / nf);
    if !(arg > 0.0) {
        return Err(Error::DispersionTooHigh { n, arg });
    }
    // arg can exceed 1 by rounding for identical samples
    Ok((-arg.ln()).max(0.0))
}

/// Banerjee's approximation of the von-Mises concentration for `p = 2`:
/// `κ̂ = R̄(2 - R̄²)/(1 - R̄²)`.
pub fn vm_concentration(summary: &CircularSampleSummary) -> Result<f64> {
    banerjee_kappa(summary.r_bar)
}

/// The same approximation evaluated on a bare mean resultant length.
pub fn banerjee_kappa(r_bar: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r_bar) {
        return Err(Error::domain(format!("mean resultant length {r_bar} outside [0, 1]")));
    }
    let r2 = r_bar * r_bar;
    let denom = 1.0 - r2;
    if denom <= 4.0 * f64::EPSILON {
        return Err(Error::InfiniteConcentration);
    }
    Ok(r_bar * (2.0 - r2) / denom)
}
