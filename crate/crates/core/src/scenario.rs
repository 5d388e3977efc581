//! Synthetic two-radar pedestrian scenario.
//!
//! A pedestrian stands, then walks through the overlapping fields of view of
//! two radars. Each radar runs its own constant-velocity Kalman filter on
//! noisy position and velocity measurements and reports tracks, in its own
//! frame, only while the pedestrian is inside its field of view. Headings are
//! linearised from the filtered velocity.

use std::collections::BTreeMap;

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::circstats::Angle;
use crate::error::{Error, Result};
use crate::fusion::DispersionValue;
use crate::rng::{derive_seed, seeded_rng};
use crate::t2t::{heading_from_velocity, spatial_align, velocity_cov, Cov4, SensorPose, SensorTrack, TrackState, Vec2};

/// Smallest measurement variance; keeps the filter well-posed with zero noise.
const MIN_MEASUREMENT_VAR: f64 = 1e-12;

/// One piece of the pedestrian's motion profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Stand { duration: f64 },
    /// Walk in the direction of `toward` (seen from the segment start),
    /// continuing past it if the duration is long enough.
    Walk { toward: Vec2, speed: f64, duration: f64 },
}

impl Segment {
    fn duration(&self) -> f64 {
        match *self {
            Segment::Stand { duration } | Segment::Walk { duration, .. } => duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorNoise {
    /// Position measurement standard deviation per axis, metres.
    pub pos_sigma: f64,
    /// Velocity measurement standard deviation per axis, m/s.
    pub vel_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub sensor_id: u32,
    pub pose: SensorPose,
    pub noise: SensorNoise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub sensors: Vec<SensorSpec>,
    pub start: Vec2,
    pub profile: Vec<Segment>,
    pub rate_hz: f64,
    pub duration: f64,
    pub seed: u64,
    /// White-noise acceleration spectral density of the sensor trackers, m²/s³.
    pub tracker_accel_psd: f64,
    /// Heading variance reported when the velocity gives (almost) no heading.
    pub heading_var_cap: f64,
}

/// Point where sensor 1 loses the pedestrian in the default scenario.
pub const DEFAULT_EXIT_POINT: (f64, f64) = (2.5, -2.0);

impl ScenarioSpec {
    /// Two 90° radars of 40 m range at (-8.2, 15.8) and (-18.2, -2.8). The
    /// pedestrian stands at (-1, 1) for 2 s, then walks south-east at
    /// 1.4 m/s through the edge of sensor 1's field of view at (2.5, -2).
    pub fn default_with_seed(seed: u64) -> Self {
        let half = std::f64::consts::FRAC_PI_4;
        let s1_origin = Vec2::new(-8.2, 15.8);
        let exit = Vec2::new(DEFAULT_EXIT_POINT.0, DEFAULT_EXIT_POINT.1);
        let to_exit = exit - s1_origin;
        // the +45° edge of sensor 1 passes through the exit point
        let s1_boresight = to_exit.y.atan2(to_exit.x) - half;
        let noise = SensorNoise {
            pos_sigma: 0.15,
            vel_sigma: 0.2,
        };
        let sector = |origin: Vec2, orientation: f64| {
            SensorPose::sector(origin, Angle::new(orientation).expect("finite"), half, 40.0, 32).expect("valid sector")
        };
        let start = Vec2::new(-1.0, 1.0);
        Self {
            sensors: vec![
                SensorSpec {
                    sensor_id: 1,
                    pose: sector(s1_origin, s1_boresight),
                    noise,
                },
                SensorSpec {
                    sensor_id: 2,
                    pose: sector(Vec2::new(-18.2, -2.8), 0.0),
                    noise,
                },
            ],
            start,
            profile: vec![
                Segment::Stand { duration: 2.0 },
                Segment::Walk {
                    toward: exit,
                    speed: 1.4,
                    duration: 6.0,
                },
            ],
            rate_hz: 18.0,
            duration: 8.0,
            seed,
            tracker_accel_psd: 0.003,
            heading_var_cap: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::domain(format!("rate must be positive, got {}", self.rate_hz)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::domain(format!("duration must be positive, got {}", self.duration)));
        }
        if self.profile.is_empty() {
            return Err(Error::domain("motion profile needs at least one segment"));
        }
        for seg in &self.profile {
            let ok = seg.duration() >= 0.0 && seg.duration().is_finite();
            let speed_ok = match seg {
                Segment::Walk { speed, .. } => *speed >= 0.0 && speed.is_finite(),
                Segment::Stand { .. } => true,
            };
            if !ok || !speed_ok {
                return Err(Error::domain(format!("invalid segment {seg:?}")));
            }
        }
        for s in &self.sensors {
            let n = s.noise;
            if !(n.pos_sigma >= 0.0 && n.vel_sigma >= 0.0 && n.pos_sigma.is_finite() && n.vel_sigma.is_finite()) {
                return Err(Error::domain(format!("invalid noise for sensor {}", s.sensor_id)));
            }
        }
        if !(self.tracker_accel_psd >= 0.0) || !(self.heading_var_cap > 0.0) {
            return Err(Error::domain("tracker tuning must be non-negative"));
        }
        Ok(())
    }

    pub fn sample_time(&self, k: u64) -> f64 {
        k as f64 / self.rate_hz
    }

    pub fn sample_count(&self) -> u64 {
        (self.duration * self.rate_hz).floor() as u64 + 1
    }

    pub fn poses(&self) -> BTreeMap<u32, SensorPose> {
        self.sensors.iter().map(|s| (s.sensor_id, s.pose.clone())).collect()
    }

    /// Ground truth at time `t`.
    pub fn truth_at(&self, t: f64) -> Truth {
        let mut pos = self.start;
        let mut elapsed = 0.0;
        let mut facing = None;
        for (i, seg) in self.profile.iter().enumerate() {
            let d = seg.duration();
            let local = (t - elapsed).clamp(0.0, d);
            let last = i + 1 == self.profile.len();
            let active = t < elapsed + d || last;
            match *seg {
                Segment::Stand { .. } => {
                    if active {
                        let heading = facing.or_else(|| self.next_walk_direction(i, pos)).unwrap_or(0.0);
                        return Truth::new(t, pos, Vec2::zeros(), heading);
                    }
                }
                Segment::Walk { toward, speed, .. } => {
                    let dir = (toward - pos).try_normalize(0.0).unwrap_or_else(|| Vec2::new(1.0, 0.0));
                    facing = Some(dir.y.atan2(dir.x));
                    if active {
                        let moving = t - elapsed < d || !last;
                        let v = if moving { dir * speed } else { Vec2::zeros() };
                        return Truth::new(t, pos + dir * speed * local, v, facing.unwrap_or(0.0));
                    }
                    pos += dir * speed * d;
                }
            }
            elapsed += d;
        }
        unreachable!("the last segment is always active")
    }

    fn next_walk_direction(&self, from: usize, pos: Vec2) -> Option<f64> {
        self.profile[from..].iter().find_map(|s| match *s {
            Segment::Walk { toward, .. } => (toward - pos).try_normalize(0.0).map(|d| d.y.atan2(d.x)),
            Segment::Stand { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    pub t: f64,
    pub pos: Vec2,
    pub vel: Vec2,
    pub heading: Angle,
}

impl Truth {
    fn new(t: f64, pos: Vec2, vel: Vec2, heading: f64) -> Self {
        Self {
            t,
            pos,
            vel,
            heading: Angle::new(heading).expect("finite heading"),
        }
    }
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub poses: BTreeMap<u32, SensorPose>,
    /// Sensor-frame tracks ordered by time, then sensor.
    pub tracks: Vec<SensorTrack>,
    pub truth: Vec<Truth>,
}

/// Position/velocity Kalman filter with a white-noise acceleration model.
#[derive(Debug, Clone)]
struct CvKalman {
    x: Vector4<f64>,
    p: Cov4,
    t: f64,
    heading: f64,
}

impl CvKalman {
    fn start(t: f64, z: Vector4<f64>, r: &Cov4) -> Self {
        Self {
            x: z,
            p: *r,
            t,
            heading: 0.0,
        }
    }

    fn step(&mut self, t: f64, z: Vector4<f64>, r: &Cov4, psd: f64) -> Result<()> {
        let dt = t - self.t;
        let mut f = Matrix4::identity();
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        let mut q = Cov4::zeros();
        for axis in 0..2 {
            let (p, v) = (axis, axis + 2);
            q[(p, p)] = psd * dt.powi(3) / 3.0;
            q[(p, v)] = psd * dt.powi(2) / 2.0;
            q[(v, p)] = q[(p, v)];
            q[(v, v)] = psd * dt;
        }
        let x = f * self.x;
        let p = f * self.p * f.transpose() + q;
        let s_inv = (p + r)
            .cholesky()
            .ok_or(Error::DegenerateCovariance("innovation covariance"))?
            .inverse();
        let k = p * s_inv;
        self.x = x + k * (z - x);
        // Joseph form keeps P symmetric and PSD with near-zero R
        let ikh = Cov4::identity() - k;
        let p = ikh * p * ikh.transpose() + k * r * k.transpose();
        self.p = 0.5 * (p + p.transpose());
        self.t = t;
        Ok(())
    }
}

/// Runs the scenario. Deterministic for a given spec.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let n = spec.sample_count();
    let truth: Vec<Truth> = (0..n).map(|k| spec.truth_at(spec.sample_time(k))).collect();
    let mut tracks = Vec::new();
    let mut per_sensor: Vec<Vec<SensorTrack>> = Vec::new();
    for sensor in &spec.sensors {
        per_sensor.push(sensor_tracks(spec, sensor, &truth)?);
    }
    // interleave by time, then sensor order
    let mut cursors = vec![0usize; per_sensor.len()];
    for k in 0..n {
        let t = spec.sample_time(k);
        for (s, stream) in per_sensor.iter().enumerate() {
            while cursors[s] < stream.len() && stream[cursors[s]].timestamp == t {
                tracks.push(stream[cursors[s]]);
                cursors[s] += 1;
            }
        }
    }
    Ok(Scenario {
        poses: spec.poses(),
        tracks,
        truth,
    })
}

/// Pose mapping common-frame tracks into the sensor's frame.
fn inverse_pose(pose: &SensorPose) -> SensorPose {
    let r_t = pose.rotation().transpose();
    SensorPose {
        origin: -(r_t * pose.origin),
        orientation: Angle::new(-pose.orientation.radians()).expect("finite"),
        fov: pose.fov.clone(),
    }
}

fn sensor_tracks(spec: &ScenarioSpec, sensor: &SensorSpec, truth: &[Truth]) -> Result<Vec<SensorTrack>> {
    let mut rng = seeded_rng(derive_seed(spec.seed, u64::from(sensor.sensor_id)));
    let pv = (sensor.noise.pos_sigma.powi(2)).max(MIN_MEASUREMENT_VAR);
    let vv = (sensor.noise.vel_sigma.powi(2)).max(MIN_MEASUREMENT_VAR);
    let r = Cov4::from_diagonal(&Vector4::new(pv, pv, vv, vv));
    let to_sensor = inverse_pose(&sensor.pose);
    let mut kf: Option<CvKalman> = None;
    let mut track_id = 0u32;
    let mut out = Vec::new();
    for tr in truth {
        // noise is drawn every sample so that visibility does not shift the stream
        let noise: [f64; 4] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal));
        if !sensor.pose.sees(&tr.pos) {
            kf = None;
            continue;
        }
        let z = Vector4::new(
            tr.pos.x + sensor.noise.pos_sigma * noise[0],
            tr.pos.y + sensor.noise.pos_sigma * noise[1],
            tr.vel.x + sensor.noise.vel_sigma * noise[2],
            tr.vel.y + sensor.noise.vel_sigma * noise[3],
        );
        let filter = match kf.as_mut() {
            Some(f) => {
                f.step(tr.t, z, &r, spec.tracker_accel_psd)?;
                f
            }
            None => {
                track_id += 1;
                kf.insert(CvKalman::start(tr.t, z, &r))
            }
        };
        let vel = Vec2::new(filter.x[2], filter.x[3]);
        let (heading, var) = match heading_from_velocity(&vel, &velocity_cov(&filter.p)) {
            Ok((h, v)) => (h.radians(), v.min(spec.heading_var_cap)),
            Err(_) => (filter.heading, spec.heading_var_cap),
        };
        filter.heading = heading;
        let state = TrackState::new(
            Vec2::new(filter.x[0], filter.x[1]),
            vel,
            Angle::new(heading)?,
            filter.p,
            DispersionValue::wn_variance(var.max(MIN_MEASUREMENT_VAR))?,
        )?;
        let common = SensorTrack {
            sensor_id: sensor.sensor_id,
            track_id,
            timestamp: tr.t,
            state,
        };
        out.push(spatial_align(&common, &to_sensor)?);
    }
    Ok(out)
}
