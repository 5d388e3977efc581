//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! Power series below [`SERIES_LIMIT`], Hankel asymptotic expansion above.
//! The scaled variants return `e^{-x} I_n(x)` so that densities with large
//! concentration stay finite.

use crate::error::{Error, Result};

pub const SERIES_LIMIT: f64 = 15.0;

const MAX_TERMS: usize = 500;

fn check(order: u32, x: f64) -> Result<()> {
    if order > 1 {
        return Err(Error::domain(format!("Bessel order {order} not supported (0 or 1)")));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("Bessel argument"));
    }
    if x < 0.0 {
        return Err(Error::domain(format!("Bessel argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// `Σ_k (x/2)^{2k+n} / (k! (k+n)!)`
fn series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = half * half;
    let mut term = if order == 0 { 1.0 } else { half };
    let mut sum = term;
    let n = order as f64;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * (kf + n));
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// `√(2πx) e^{-x} I_n(x) ≈ Σ_k (-1)^k a_k(n) / x^k`, summed until the terms
/// stop shrinking.
fn asymptotic_scaled(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        let next = -term * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// `I_n(x)` for `n ∈ {0, 1}`, `x ≥ 0`. Overflows to infinity past `x ≈ 713`.
pub fn bessel_i(order: u32, x: f64) -> Result<f64> {
    check(order, x)?;
    if x < SERIES_LIMIT {
        Ok(series(order, x))
    } else {
        Ok(asymptotic_scaled(order, x) * x.exp())
    }
}

/// `e^{-x} I_n(x)`.
pub fn bessel_i_scaled(order: u32, x: f64) -> Result<f64> {
    check(order, x)?;
    if x < SERIES_LIMIT {
        Ok(series(order, x) * (-x).exp())
    } else {
        Ok(asymptotic_scaled(order, x))
    }
}

/// `I₁(x)/I₀(x)`, the mean resultant length of a von-Mises with
/// concentration `x`.
pub fn bessel_ratio(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(bessel_i_scaled(1, x)? / bessel_i_scaled(0, x)?)
}
