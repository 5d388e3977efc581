//! Track-to-track fusion of sensor tracks carrying a circular heading.
//!
//! Data flows through the stages in this order:
//!
//! 1. [`spatial_align`] moves each sensor track into the common frame.
//! 2. [`TrackBuffer`] holds tracks until the next fusion instant and absorbs
//!    out-of-sequence arrivals.
//! 3. At a fixed rate, buffered tracks are predicted to the fusion time with
//!    a constant-velocity model ([`cv_predict`]) and pushed to a short
//!    per-stream history.
//! 4. Tracks of different sensors are associated by global nearest neighbour
//!    ([`gnn_associate`]) on a log-likelihood distance averaged over the
//!    shared history.
//! 5. Associated tracks are merged ([`merge_states`]): information-weighted
//!    average for position/velocity, weighted circular mean for heading.
//! 6. Fused tracks are matched to the system tracks of the previous cycle so
//!    that identities persist ([`FusionEngine`]).

mod association;
mod buffer;
pub mod io;
mod kinematics;
mod merge;
mod pipeline;

pub use association::{association_distance, gnn_associate, Assignment, DEFAULT_GATE};
pub use buffer::{SharedTrackBuffer, TrackBuffer};
pub use kinematics::{cv_predict, heading_from_velocity, spatial_align, velocity_cov, CvModel};
pub use merge::{merge_states, merge_tracks};
pub use pipeline::{convert_dispersion, replay, CycleDiagnostics, CycleOutput, FusionConfig, FusionEngine, Ingestor};

use std::collections::VecDeque;

use nalgebra::{Matrix4, Vector2};
use serde::{Deserialize, Serialize};

use crate::circstats::Angle;
use crate::error::{Error, Result};
use crate::fusion::DispersionValue;

pub type Cov4 = Matrix4<f64>;
pub type Vec2 = Vector2<f64>;

/// Identity of one sensor-level track stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub sensor_id: u32,
    pub track_id: u32,
}

impl StreamKey {
    pub fn new(sensor_id: u32, track_id: u32) -> Self {
        Self { sensor_id, track_id }
    }
}

/// Kinematic state with a circular heading.
///
/// `cov` is the covariance of `(x, y, vx, vy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    pub pos: Vec2,
    pub vel: Vec2,
    pub heading: Angle,
    pub cov: Cov4,
    pub heading_dispersion: DispersionValue,
}

impl TrackState {
    pub fn new(pos: Vec2, vel: Vec2, heading: Angle, cov: Cov4, heading_dispersion: DispersionValue) -> Result<Self> {
        let s = Self {
            pos,
            vel,
            heading,
            cov,
            heading_dispersion,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pos.iter().chain(self.vel.iter()).all(|v| v.is_finite())) {
            return Err(Error::NonFinite("track kinematics"));
        }
        if !self.cov.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("track covariance"));
        }
        let scale = self.cov.amax().max(1e-300);
        if (self.cov - self.cov.transpose()).amax() > 1e-9 * scale {
            return Err(Error::DegenerateCovariance("covariance not symmetric"));
        }
        let min_eig = self.cov.symmetric_eigenvalues().min();
        if min_eig < -1e-9 * scale {
            return Err(Error::DegenerateCovariance("covariance not positive semi-definite"));
        }
        self.heading_dispersion.validate()
    }

    /// The 4-vector `(x, y, vx, vy)`.
    pub fn kinematic_vector(&self) -> nalgebra::Vector4<f64> {
        nalgebra::Vector4::new(self.pos.x, self.pos.y, self.vel.x, self.vel.y)
    }
}

/// A sensor's track at one timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorTrack {
    pub sensor_id: u32,
    pub track_id: u32,
    pub timestamp: f64,
    pub state: TrackState,
}

impl SensorTrack {
    pub fn key(&self) -> StreamKey {
        StreamKey::new(self.sensor_id, self.track_id)
    }
}

/// A fused state remembered for association.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub cycle: u64,
    pub time: f64,
    pub state: TrackState,
}

/// A fused object with an identity that persists across cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemTrack {
    pub system_id: u64,
    pub state: TrackState,
    pub last_update: f64,
    /// Most recent fused states, oldest first, bounded by the history depth.
    pub history: VecDeque<HistoryEntry>,
    /// Sensor streams that contributed at `last_update`.
    pub sources: Vec<StreamKey>,
}

/// Mounting of a sensor in the common frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorPose {
    /// Sensor origin in the common frame, metres.
    pub origin: Vec2,
    /// Rotation from sensor frame to common frame.
    pub orientation: Angle,
    /// Field of view as a simple polygon in the sensor frame.
    pub fov: Vec<Vec2>,
}

impl SensorPose {
    pub fn new(origin: Vec2, orientation: Angle, fov: Vec<Vec2>) -> Result<Self> {
        if fov.len() < 3 {
            return Err(Error::domain("field of view needs at least 3 vertices"));
        }
        Ok(Self {
            origin,
            orientation,
            fov,
        })
    }

    /// Pose that leaves tracks unchanged and sees everywhere.
    pub fn identity() -> Self {
        let big = 1e12;
        Self {
            origin: Vec2::zeros(),
            orientation: Angle::zero(),
            fov: vec![
                Vec2::new(-big, -big),
                Vec2::new(big, -big),
                Vec2::new(big, big),
                Vec2::new(-big, big),
            ],
        }
    }

    /// 90°-style sector approximated by a polygon: apex at the sensor, arc of
    /// `range` metres spanning `±half_angle` around the boresight.
    pub fn sector(origin: Vec2, orientation: Angle, half_angle: f64, range: f64, arc_points: usize) -> Result<Self> {
        let mut fov = vec![Vec2::zeros()];
        let steps = arc_points.max(2);
        for i in 0..steps {
            let a = -half_angle + 2.0 * half_angle * i as f64 / (steps - 1) as f64;
            fov.push(Vec2::new(range * a.cos(), range * a.sin()));
        }
        Self::new(origin, orientation, fov)
    }

    pub fn rotation(&self) -> nalgebra::Matrix2<f64> {
        let (s, c) = self.orientation.radians().sin_cos();
        nalgebra::Matrix2::new(c, -s, s, c)
    }

    /// Common-frame point expressed in the sensor frame.
    pub fn to_sensor_frame(&self, p: &Vec2) -> Vec2 {
        self.rotation().transpose() * (p - self.origin)
    }

    pub fn to_common_frame(&self, p: &Vec2) -> Vec2 {
        self.rotation() * p + self.origin
    }

    /// Whether a common-frame point lies inside the field of view.
    pub fn sees(&self, p: &Vec2) -> bool {
        point_in_polygon(&self.to_sensor_frame(p), &self.fov)
    }
}

/// Even-odd ray casting.
pub fn point_in_polygon(p: &Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_membership() {
        let square = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(point_in_polygon(&Vec2::new(0.5, 0.5), &square));
        assert!(!point_in_polygon(&Vec2::new(1.5, 0.5), &square));
        assert!(!point_in_polygon(&Vec2::new(0.5, -0.1), &square));
    }

    #[test]
    fn sector_fov() {
        let pose = SensorPose::sector(
            Vec2::new(10.0, 0.0),
            Angle::from_degrees(180.0).unwrap(),
            std::f64::consts::FRAC_PI_4,
            40.0,
            16,
        )
        .unwrap();
        assert!(pose.sees(&Vec2::new(0.0, 0.0)));
        assert!(pose.sees(&Vec2::new(0.0, 9.0)));
        assert!(!pose.sees(&Vec2::new(0.0, 11.0)));
        assert!(!pose.sees(&Vec2::new(20.0, 0.0)));
        assert!(!pose.sees(&Vec2::new(-35.0, 0.0)));
        let p = Vec2::new(3.0, -4.0);
        assert!((pose.to_common_frame(&pose.to_sensor_frame(&p)) - p).norm() < 1e-12);
    }

    #[test]
    fn state_validation() {
        let ok = TrackState::new(
            Vec2::zeros(),
            Vec2::zeros(),
            Angle::zero(),
            Cov4::identity(),
            DispersionValue::WnVariance(0.1),
        );
        assert!(ok.is_ok());
        let mut asym = Cov4::identity();
        asym[(0, 1)] = 0.5;
        assert!(TrackState::new(Vec2::zeros(), Vec2::zeros(), Angle::zero(), asym, DispersionValue::WnVariance(0.1)).is_err());
        let neg = Cov4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, 1.0, 1.0));
        assert!(TrackState::new(Vec2::zeros(), Vec2::zeros(), Angle::zero(), neg, DispersionValue::WnVariance(0.1)).is_err());
    }
}
