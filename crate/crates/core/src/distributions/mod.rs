//! von-Mises and Wrapped-Normal densities, samplers and moments.

mod bessel;

pub use bessel::{bessel_i, bessel_i_scaled, bessel_ratio};

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circstats::{circ_distance, wrap_angle, Angle};
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Which circular distribution a dispersion value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Wrapped Normal, dispersion is the variance `σ²`.
    #[serde(rename = "wn")]
    WrappedNormal,
    /// von-Mises, dispersion is the concentration `κ`.
    #[serde(rename = "vm")]
    VonMises,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::WrappedNormal => "wn",
            Family::VonMises => "vm",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wn" | "wrapped-normal" => Ok(Family::WrappedNormal),
            "vm" | "von-mises" => Ok(Family::VonMises),
            other => Err(Error::domain(format!("unknown family '{other}' (expected wn or vm)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesParams {
    pub mu: Angle,
    kappa: f64,
}

impl VonMisesParams {
    pub fn new(mu: Angle, kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::NonFinite("kappa"));
        }
        if kappa < 0.0 {
            return Err(Error::domain(format!("kappa must be >= 0, got {kappa}")));
        }
        Ok(Self { mu, kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrappedNormalParams {
    pub mu: Angle,
    sigma_sq: f64,
}

impl WrappedNormalParams {
    pub fn new(mu: Angle, sigma_sq: f64) -> Result<Self> {
        if !sigma_sq.is_finite() {
            return Err(Error::NonFinite("sigma_sq"));
        }
        if sigma_sq <= 0.0 {
            return Err(Error::domain(format!("sigma_sq must be > 0, got {sigma_sq}")));
        }
        Ok(Self { mu, sigma_sq })
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }
}

/// von-Mises density `exp(κ cos(θ-μ)) / (2π I₀(κ))`.
pub fn vm_pdf(theta: Angle, params: &VonMisesParams) -> f64 {
    let k = params.kappa;
    let i0_scaled = bessel_i_scaled(0, k).expect("kappa validated on construction");
    let d = circ_distance(theta, params.mu);
    // e^{κ(cos d - 1)} / (2π e^{-κ} I₀(κ))
    (k * (d.cos() - 1.0)).exp() / (TAU * i0_scaled)
}

/// Number of wrap terms on each side of the Wrapped-Normal series.
pub fn wn_wrap_terms(sigma_sq: f64) -> i64 {
    let sigma = sigma_sq.sqrt();
    ((5.0 * sigma / PI).ceil() as i64 + 2).max(3)
}

/// Wrapped-Normal density, the normal density summed over `θ - μ + 2πk`.
pub fn wn_pdf(theta: Angle, params: &WrappedNormalParams) -> f64 {
    let s2 = params.sigma_sq;
    let d = circ_distance(theta, params.mu);
    let terms = wn_wrap_terms(s2);
    let sum: f64 = (-terms..=terms)
        .map(|k| {
            let x = d + TAU * k as f64;
            (-x * x / (2.0 * s2)).exp()
        })
        .sum();
    sum / (TAU * s2).sqrt()
}

/// `n` von-Mises draws by Best-Fisher rejection from a wrapped-Cauchy
/// envelope. Deterministic for a fixed `seed`.
pub fn sample_vm(params: &VonMisesParams, n: usize, seed: u64) -> Vec<Angle> {
    let mut rng = seeded_rng(seed);
    let sampler = VonMisesSampler::new(params);
    (0..n).map(|_| sampler.draw(&mut rng)).collect()
}

/// `n` Wrapped-Normal draws: normal on the line, then wrapped.
pub fn sample_wn(params: &WrappedNormalParams, n: usize, seed: u64) -> Vec<Angle> {
    let mut rng = seeded_rng(seed);
    let sampler = WrappedNormalSampler::new(params);
    (0..n).map(|_| sampler.draw(&mut rng)).collect()
}

/// Reusable Best-Fisher sampler; draws from a caller-supplied generator so
/// several streams can be interleaved.
#[derive(Debug, Clone, Copy)]
pub struct VonMisesSampler {
    mu: f64,
    kappa: f64,
    r: f64,
}

impl VonMisesSampler {
    pub fn new(params: &VonMisesParams) -> Self {
        let k = params.kappa;
        let r = if k > 0.0 {
            // ρ = (τ - √(2τ)) / (2κ), τ = 1 + √(1 + 4κ²), rearranged to avoid
            // cancellation at small κ
            let s = (1.0 + 4.0 * k * k).sqrt();
            let tau = 1.0 + s;
            let rho = 2.0 * k * tau / ((s + 1.0) * (tau + (2.0 * tau).sqrt()));
            (1.0 + rho * rho) / (2.0 * rho)
        } else {
            f64::INFINITY
        };
        Self {
            mu: params.mu.radians(),
            kappa: k,
            r,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Angle {
        if self.kappa == 0.0 {
            let u: f64 = rng.random();
            return wrap_angle(PI - TAU * u).expect("finite");
        }
        let (r, k) = (self.r, self.kappa);
        loop {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let u3: f64 = rng.random();
            let z = (PI * u1).cos();
            let f = (1.0 + r * z) / (r + z);
            let c = k * (r - f);
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let dev = f.clamp(-1.0, 1.0).acos();
                let theta = if u3 > 0.5 { self.mu + dev } else { self.mu - dev };
                return wrap_angle(theta).expect("finite");
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WrappedNormalSampler {
    mu: f64,
    sigma: f64,
}

impl WrappedNormalSampler {
    pub fn new(params: &WrappedNormalParams) -> Self {
        Self {
            mu: params.mu.radians(),
            sigma: params.sigma_sq.sqrt(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Angle {
        let z: f64 = rng.sample(StandardNormal);
        wrap_angle(self.mu + self.sigma * z).expect("finite")
    }
}

/// Population mean resultant length: `e^{-σ²/2}` (WN) or `I₁(κ)/I₀(κ)` (VM).
pub fn mean_resultant_length(family: Family, dispersion: f64) -> Result<f64> {
    match family {
        Family::WrappedNormal => {
            if !(dispersion >= 0.0) {
                return Err(Error::domain(format!("variance must be >= 0, got {dispersion}")));
            }
            Ok((-dispersion / 2.0).exp())
        }
        Family::VonMises => {
            if !(dispersion >= 0.0) {
                return Err(Error::domain(format!("kappa must be >= 0, got {dispersion}")));
            }
            bessel_ratio(dispersion)
        }
    }
}

/// Expected squared mean resultant length of `n` samples,
/// `1/n + (n-1)/n · ρ²` with `ρ` the population mean resultant length.
pub fn expected_r_bar_sq(family: Family, dispersion: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let rho = mean_resultant_length(family, dispersion)?;
    let nf = n as f64;
    Ok(1.0 / nf + (nf - 1.0) / nf * rho * rho)
}
