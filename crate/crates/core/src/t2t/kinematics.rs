use nalgebra::{Matrix2, Matrix4};

use super::{Cov4, SensorPose, SensorTrack, TrackState, Vec2};
use crate::circstats::{wrap_angle, Angle};
use crate::error::{Error, Result};
use crate::fusion::DispersionValue;

/// Constant-velocity motion model used for temporal alignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvModel {
    /// Velocity variance added per second of prediction, m²/s³.
    pub process_noise_q: f64,
    /// Heading variance added per second of prediction, rad²/s. The CV model
    /// has no yaw dynamics, so a stale heading only gets less certain.
    pub heading_inflation: f64,
}

impl Default for CvModel {
    fn default() -> Self {
        Self {
            process_noise_q: 0.5,
            heading_inflation: 0.1,
        }
    }
}

fn block_rotation(r: &Matrix2<f64>) -> Matrix4<f64> {
    let mut t = Matrix4::zeros();
    t.fixed_view_mut::<2, 2>(0, 0).copy_from(r);
    t.fixed_view_mut::<2, 2>(2, 2).copy_from(r);
    t
}

/// Moves a sensor-frame track into the common frame.
///
/// Position is rotated and translated, velocity and covariance rotated, the
/// heading turned by the mounting angle. Heading dispersion is unchanged.
pub fn spatial_align(track: &SensorTrack, pose: &SensorPose) -> Result<SensorTrack> {
    let r = pose.rotation();
    let t = block_rotation(&r);
    let s = &track.state;
    let cov = t * s.cov * t.transpose();
    let state = TrackState {
        pos: r * s.pos + pose.origin,
        vel: r * s.vel,
        heading: s.heading.rotated(pose.orientation.radians())?,
        cov: 0.5 * (cov + cov.transpose()),
        heading_dispersion: s.heading_dispersion,
    };
    Ok(SensorTrack { state, ..*track })
}

/// Predicts `dt` seconds ahead: `x ← F x`, `P ← F P Fᵀ + Q` with `Q` adding
/// `q·dt` to each velocity variance. Heading is held; its dispersion grows
/// by `heading_inflation·dt`.
pub fn cv_predict(state: &TrackState, dt: f64, model: &CvModel) -> Result<TrackState> {
    if !(dt >= 0.0) {
        return Err(Error::NegativeTimeStep(dt));
    }
    if dt == 0.0 {
        return Ok(*state);
    }
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    let mut cov = f * state.cov * f.transpose();
    cov[(2, 2)] += model.process_noise_q * dt;
    cov[(3, 3)] += model.process_noise_q * dt;
    let grow = model.heading_inflation * dt;
    let heading_dispersion = match state.heading_dispersion {
        DispersionValue::WnVariance(s2) => DispersionValue::WnVariance(s2 + grow),
        DispersionValue::VmKappa(k) if k > 0.0 => DispersionValue::VmKappa(1.0 / (1.0 / k + grow)),
        DispersionValue::VmKappa(k) => DispersionValue::VmKappa(k),
        DispersionValue::CircVariance(_) => {
            return Err(Error::domain("circular variance cannot be propagated by the CV model"))
        }
    };
    Ok(TrackState {
        pos: state.pos + state.vel * dt,
        vel: state.vel,
        heading: state.heading,
        cov: 0.5 * (cov + cov.transpose()),
        heading_dispersion,
    })
}

/// Heading of a velocity vector and its first-order variance
/// `(vy²σ²_vx + vx²σ²_vy - 2 vx vy σ_vxvy) / |v|⁴`.
pub fn heading_from_velocity(vel: &Vec2, vel_cov: &Matrix2<f64>) -> Result<(Angle, f64)> {
    let (vx, vy) = (vel.x, vel.y);
    let speed_sq = vx * vx + vy * vy;
    if !(speed_sq > 0.0) || !speed_sq.is_finite() {
        return Err(Error::UndefinedHeading);
    }
    let var = (vy * vy * vel_cov[(0, 0)] + vx * vx * vel_cov[(1, 1)] - 2.0 * vx * vy * vel_cov[(0, 1)])
        / (speed_sq * speed_sq);
    Ok((wrap_angle(vy.atan2(vx))?, var.max(0.0)))
}

/// Velocity block of a position/velocity covariance.
pub fn velocity_cov(cov: &Cov4) -> Matrix2<f64> {
    cov.fixed_view::<2, 2>(2, 2).into_owned()
}
