//! Fusion of independent angular estimates.
//!
//! Two families of operators are provided:
//!
//! * weighted average: the mean is the orientation of the resultant of unit
//!   vectors scaled by `κᵢ` (or `1/σᵢ²`); the fused dispersion follows
//!   `1/σ² = Σ 1/σᵢ²` and `κ = Σ κᵢ`.
//! * plain mean: equal weights, with `σ² = Σσᵢ²/n²` and `1/κ = Σ(1/κᵢ)/n²`.
//!
//! [`fuse_circvar_stienne`] fuses circular variances harmonically. It is kept
//! as a comparison baseline only; it keeps shrinking under repeated fusion.

use serde::{Deserialize, Serialize};

use crate::circstats::{mean_orientation, summarize, Angle};
use crate::error::{Error, Result};

/// Dispersion attached to an angular estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DispersionValue {
    /// Wrapped-Normal variance `σ²` in rad², `> 0`.
    WnVariance(f64),
    /// von-Mises concentration `κ`, `≥ 0`.
    VmKappa(f64),
    /// Circular variance `V = 1 - R̄` in `(0, 1]`.
    CircVariance(f64),
}

impl DispersionValue {
    pub fn wn_variance(sigma_sq: f64) -> Result<Self> {
        let v = DispersionValue::WnVariance(sigma_sq);
        v.validate()?;
        Ok(v)
    }

    pub fn vm_kappa(kappa: f64) -> Result<Self> {
        let v = DispersionValue::VmKappa(kappa);
        v.validate()?;
        Ok(v)
    }

    pub fn circ_variance(v: f64) -> Result<Self> {
        let d = DispersionValue::CircVariance(v);
        d.validate()?;
        Ok(d)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DispersionValue::WnVariance(_) => "wn_variance",
            DispersionValue::VmKappa(_) => "vm_kappa",
            DispersionValue::CircVariance(_) => "circ_variance",
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            DispersionValue::WnVariance(x) | DispersionValue::VmKappa(x) | DispersionValue::CircVariance(x) => x,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let x = self.value();
        if x.is_nan() {
            return Err(Error::NonFinite("dispersion"));
        }
        let ok = match *self {
            DispersionValue::WnVariance(s2) => s2 > 0.0 && s2.is_finite(),
            DispersionValue::VmKappa(k) => k >= 0.0 && k.is_finite(),
            DispersionValue::CircVariance(v) => v > 0.0 && v <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("{} out of range: {x}", self.kind())))
        }
    }

    /// Weight of the estimate in the weighted-average mean: `1/σ²` or `κ`.
    pub fn weight(&self) -> Result<f64> {
        self.validate()?;
        match *self {
            DispersionValue::WnVariance(s2) => Ok(1.0 / s2),
            DispersionValue::VmKappa(k) => Ok(k),
            DispersionValue::CircVariance(_) => Err(Error::domain(
                "circular variance does not define a weighted-average weight",
            )),
        }
    }

    /// Re-expresses a von-Mises concentration as a variance via `σ² = 1/κ`.
    ///
    /// This is an approximation; fusion never applies it implicitly.
    pub fn to_wn_variance(&self) -> Result<Self> {
        match *self {
            DispersionValue::WnVariance(_) => Ok(*self),
            DispersionValue::VmKappa(k) if k > 0.0 => DispersionValue::wn_variance(1.0 / k),
            DispersionValue::VmKappa(_) => Err(Error::domain("kappa = 0 has no finite variance")),
            DispersionValue::CircVariance(_) => Err(Error::domain("no conversion from circular variance")),
        }
    }

    /// Re-expresses a variance as a concentration via `κ = 1/σ²`.
    pub fn to_vm_kappa(&self) -> Result<Self> {
        match *self {
            DispersionValue::VmKappa(_) => Ok(*self),
            DispersionValue::WnVariance(s2) => DispersionValue::vm_kappa(1.0 / s2),
            DispersionValue::CircVariance(_) => Err(Error::domain("no conversion from circular variance")),
        }
    }

    /// Variance-like scalar: `σ²` or `1/κ`. Used where a dispersion has to
    /// enter a covariance matrix.
    pub fn as_variance(&self) -> Result<f64> {
        match *self {
            DispersionValue::WnVariance(s2) => Ok(s2),
            DispersionValue::VmKappa(k) if k > 0.0 => Ok(1.0 / k),
            DispersionValue::VmKappa(_) => Err(Error::DegenerateCovariance("kappa = 0 heading")),
            DispersionValue::CircVariance(_) => Err(Error::domain("circular variance is not a variance")),
        }
    }
}

/// One sensor's estimate of a circular quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularEstimate {
    pub angle: Angle,
    pub dispersion: DispersionValue,
}

impl AngularEstimate {
    pub fn new(angle: Angle, dispersion: DispersionValue) -> Result<Self> {
        dispersion.validate()?;
        Ok(Self { angle, dispersion })
    }
}

fn same_kind(estimates: &[AngularEstimate]) -> Result<()> {
    let first = estimates.first().ok_or(Error::EmptySample)?;
    for e in &estimates[1..] {
        if std::mem::discriminant(&e.dispersion) != std::mem::discriminant(&first.dispersion) {
            return Err(Error::MixedDispersion(first.dispersion.kind(), e.dispersion.kind()));
        }
    }
    Ok(())
}

/// Maximum-likelihood mean: `atan2(Σ wᵢ sin θᵢ, Σ wᵢ cos θᵢ)` with
/// `wᵢ = κᵢ` or `1/σᵢ²`.
///
/// Estimates with zero weight (`κ = 0`) carry no direction and are skipped.
pub fn fuse_mean_weighted(estimates: &[AngularEstimate]) -> Result<Angle> {
    same_kind(estimates)?;
    if estimates.len() == 1 {
        estimates[0].dispersion.validate()?;
        return Ok(estimates[0].angle);
    }
    let mut angles = Vec::with_capacity(estimates.len());
    let mut weights = Vec::with_capacity(estimates.len());
    for e in estimates {
        let w = e.dispersion.weight()?;
        if w > 0.0 {
            angles.push(e.angle);
            weights.push(w);
        }
    }
    if angles.is_empty() {
        return Err(Error::UndefinedMean);
    }
    mean_orientation(&summarize(&angles, Some(&weights))?)
}

fn check_all(values: &[f64], name: &str, ok: impl Fn(f64) -> bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    for &v in values {
        if v.is_nan() || !ok(v) {
            return Err(Error::domain(format!("invalid {name}: {v}")));
        }
    }
    Ok(())
}

/// `1/σ²_f = Σ 1/σᵢ²`.
pub fn fuse_variance_weighted(variances: &[f64]) -> Result<f64> {
    check_all(variances, "variance", |v| v > 0.0)?;
    if variances.len() == 1 {
        return Ok(variances[0]);
    }
    let info: f64 = variances.iter().map(|v| 1.0 / v).sum();
    Ok(1.0 / info)
}

/// `κ_f = Σ κᵢ`.
pub fn fuse_kappa_weighted(kappas: &[f64]) -> Result<f64> {
    check_all(kappas, "kappa", |k| (0.0..f64::INFINITY).contains(&k))?;
    Ok(kappas.iter().sum())
}

/// `σ²_f = Σσᵢ² / n²` for the equal-weight mean.
pub fn fuse_variance_mean(variances: &[f64]) -> Result<f64> {
    check_all(variances, "variance", |v| v > 0.0 && v.is_finite())?;
    let n = variances.len() as f64;
    Ok(variances.iter().sum::<f64>() / (n * n))
}

/// `1/κ_f = Σ(1/κᵢ) / n²` for the equal-weight mean.
pub fn fuse_kappa_mean(kappas: &[f64]) -> Result<f64> {
    check_all(kappas, "kappa", |k| k > 0.0 && k.is_finite())?;
    if kappas.len() == 1 {
        return Ok(kappas[0]);
    }
    let n = kappas.len() as f64;
    Ok(n * n / kappas.iter().map(|k| 1.0 / k).sum::<f64>())
}

/// Harmonic fusion of circular variances, `1/V_f = Σ 1/Vᵢ`.
pub fn fuse_circvar_stienne(circ_variances: &[f64]) -> Result<f64> {
    check_all(circ_variances, "circular variance", |v| v > 0.0 && v <= 1.0)?;
    if circ_variances.len() == 1 {
        return Ok(circ_variances[0]);
    }
    Ok(1.0 / circ_variances.iter().map(|v| 1.0 / v).sum::<f64>())
}

/// Weighted-average fusion of mean and dispersion together.
pub fn fuse_weighted(estimates: &[AngularEstimate]) -> Result<AngularEstimate> {
    let angle = fuse_mean_weighted(estimates)?;
    let values: Vec<f64> = estimates.iter().map(|e| e.dispersion.value()).collect();
    let dispersion = match estimates[0].dispersion {
        DispersionValue::WnVariance(_) => DispersionValue::WnVariance(fuse_variance_weighted(&values)?),
        DispersionValue::VmKappa(_) => DispersionValue::VmKappa(fuse_kappa_weighted(&values)?),
        DispersionValue::CircVariance(_) => unreachable!("rejected by fuse_mean_weighted"),
    };
    Ok(AngularEstimate { angle, dispersion })
}

/// Equal-weight fusion: plain circular mean with the mean-fusion dispersion.
pub fn fuse_mean(estimates: &[AngularEstimate]) -> Result<AngularEstimate> {
    same_kind(estimates)?;
    if estimates.len() == 1 {
        return Ok(estimates[0]);
    }
    let angles: Vec<Angle> = estimates.iter().map(|e| e.angle).collect();
    let angle = mean_orientation(&summarize(&angles, None)?)?;
    let values: Vec<f64> = estimates.iter().map(|e| e.dispersion.value()).collect();
    let dispersion = match estimates[0].dispersion {
        DispersionValue::WnVariance(_) => DispersionValue::WnVariance(fuse_variance_mean(&values)?),
        DispersionValue::VmKappa(_) => DispersionValue::VmKappa(fuse_kappa_mean(&values)?),
        DispersionValue::CircVariance(_) => {
            return Err(Error::domain("mean fusion of circular variances is not defined"))
        }
    };
    Ok(AngularEstimate { angle, dispersion })
}
