//! Line-delimited JSON records for sensor tracks in and system tracks out.
//!
//! Covariances are stored as the upper triangle of the symmetric 4×4
//! `(x, y, vx, vy)` matrix, row-major: `[xx, xy, xvx, xvy, yy, yvx, yvy,
//! vxvx, vxvy, vyvy]`. Angles are radians.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{CycleDiagnostics, CycleOutput, Cov4, SensorPose, SensorTrack, StreamKey, SystemTrack, TrackState, Vec2};
use crate::circstats::{wrap_angle, Angle};
use crate::error::{Error, Result};
use crate::fusion::DispersionValue;

pub fn cov_to_upper(cov: &Cov4) -> [f64; 10] {
    let mut out = [0.0; 10];
    let mut k = 0;
    for i in 0..4 {
        for j in i..4 {
            out[k] = cov[(i, j)];
            k += 1;
        }
    }
    out
}

pub fn cov_from_upper(upper: &[f64; 10]) -> Cov4 {
    let mut cov = Cov4::zeros();
    let mut k = 0;
    for i in 0..4 {
        for j in i..4 {
            cov[(i, j)] = upper[k];
            cov[(j, i)] = upper[k];
            k += 1;
        }
    }
    cov
}

/// One sensor track on the wire. `heading_var` is a wrapped-normal variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorTrackRecord {
    pub sensor_id: u32,
    pub track_id: u32,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub heading: f64,
    pub cov: [f64; 10],
    pub heading_var: f64,
}

impl SensorTrackRecord {
    pub fn from_track(t: &SensorTrack) -> Result<Self> {
        let s = &t.state;
        Ok(Self {
            sensor_id: t.sensor_id,
            track_id: t.track_id,
            t: t.timestamp,
            x: s.pos.x,
            y: s.pos.y,
            vx: s.vel.x,
            vy: s.vel.y,
            heading: s.heading.radians(),
            cov: cov_to_upper(&s.cov),
            heading_var: s.heading_dispersion.as_variance()?,
        })
    }

    pub fn to_track(&self) -> Result<SensorTrack> {
        if !self.t.is_finite() {
            return Err(Error::NonFinite("track timestamp"));
        }
        let heading: Angle = wrap_angle(self.heading)?;
        let state = TrackState::new(
            Vec2::new(self.x, self.y),
            Vec2::new(self.vx, self.vy),
            heading,
            cov_from_upper(&self.cov),
            DispersionValue::wn_variance(self.heading_var)?,
        )?;
        Ok(SensorTrack {
            sensor_id: self.sensor_id,
            track_id: self.track_id,
            timestamp: self.t,
            state,
        })
    }
}

/// Fused output record, one per system track and cycle, plus one
/// diagnostics record per cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum OutputRecord {
    SystemTrack {
        cycle: u64,
        t: f64,
        system_id: u64,
        x: f64,
        y: f64,
        vx: f64,
        vy: f64,
        heading: f64,
        cov: [f64; 10],
        heading_dispersion: DispersionValue,
        sources: Vec<StreamKey>,
    },
    Diagnostics {
        cycle: u64,
        t: f64,
        #[serde(flatten)]
        counts: CycleDiagnostics,
    },
}

impl OutputRecord {
    pub fn system_track(cycle: u64, t: f64, s: &SystemTrack) -> Self {
        OutputRecord::SystemTrack {
            cycle,
            t,
            system_id: s.system_id,
            x: s.state.pos.x,
            y: s.state.pos.y,
            vx: s.state.vel.x,
            vy: s.state.vel.y,
            heading: s.state.heading.radians(),
            cov: cov_to_upper(&s.state.cov),
            heading_dispersion: s.state.heading_dispersion,
            sources: s.sources.clone(),
        }
    }
}

fn json_err(e: impl std::fmt::Display) -> Error {
    Error::domain(format!("record serialisation: {e}"))
}

/// Sensor mounting on the wire; `fov` vertices are in the sensor frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub sensor_id: u32,
    pub x: f64,
    pub y: f64,
    pub orientation: f64,
    pub fov: Vec<[f64; 2]>,
}

/// Serialises poses as a JSON array.
pub fn poses_to_json(poses: &BTreeMap<u32, SensorPose>) -> Result<String> {
    let recs: Vec<PoseRecord> = poses
        .iter()
        .map(|(&id, p)| PoseRecord {
            sensor_id: id,
            x: p.origin.x,
            y: p.origin.y,
            orientation: p.orientation.radians(),
            fov: p.fov.iter().map(|v| [v.x, v.y]).collect(),
        })
        .collect();
    serde_json::to_string_pretty(&recs).map_err(json_err)
}

pub fn poses_from_json(text: &str) -> Result<BTreeMap<u32, SensorPose>> {
    let recs: Vec<PoseRecord> = serde_json::from_str(text).map_err(|e| Error::domain(format!("poses: {e}")))?;
    let mut out = BTreeMap::new();
    for r in recs {
        let pose = SensorPose::new(
            Vec2::new(r.x, r.y),
            wrap_angle(r.orientation)?,
            r.fov.iter().map(|v| Vec2::new(v[0], v[1])).collect(),
        )?;
        if out.insert(r.sensor_id, pose).is_some() {
            return Err(Error::domain(format!("duplicate pose for sensor {}", r.sensor_id)));
        }
    }
    Ok(out)
}

/// Parses sensor tracks, one JSON object per line; blank lines are skipped.
/// Errors name the offending line.
pub fn read_sensor_tracks(reader: impl BufRead) -> Result<Vec<SensorTrack>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::domain(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SensorTrackRecord =
            serde_json::from_str(&line).map_err(|e| Error::domain(format!("line {}: {e}", i + 1)))?;
        out.push(rec.to_track().map_err(|e| Error::domain(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn write_sensor_tracks(mut w: impl Write, tracks: &[SensorTrack]) -> Result<()> {
    for t in tracks {
        let line = serde_json::to_string(&SensorTrackRecord::from_track(t)?).map_err(json_err)?;
        writeln!(w, "{line}").map_err(json_err)?;
    }
    Ok(())
}

/// Writes each cycle's system tracks followed by its diagnostics record.
pub fn write_cycles(mut w: impl Write, cycles: &[CycleOutput]) -> Result<()> {
    for c in cycles {
        for s in &c.tracks {
            let line = serde_json::to_string(&OutputRecord::system_track(c.cycle, c.time, s)).map_err(json_err)?;
            writeln!(w, "{line}").map_err(json_err)?;
        }
        let diag = OutputRecord::Diagnostics {
            cycle: c.cycle,
            t: c.time,
            counts: c.diagnostics.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&diag).map_err(json_err)?).map_err(json_err)?;
    }
    Ok(())
}
