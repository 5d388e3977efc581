use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use super::association::{association_distance, gnn_associate};
use super::kinematics::{cv_predict, spatial_align, CvModel};
use super::merge::merge_states;
use super::{HistoryEntry, SensorPose, SensorTrack, SharedTrackBuffer, StreamKey, SystemTrack, TrackState};
use crate::distributions::Family;
use crate::error::{Error, Result};
use crate::fusion::DispersionValue;

/// Tunables of the fusion centre.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub rate_hz: f64,
    /// Time of fusion cycle 0.
    pub start_time: f64,
    pub cv: CvModel,
    pub gate: f64,
    pub history_depth: usize,
    /// System tracks without an association for longer than this are retired.
    pub drop_timeout: f64,
    /// A stream with nothing new in a cycle keeps taking part, CV predicted,
    /// while its last track is at most this old. 0 fuses only the tracks
    /// drained in the cycle itself.
    pub stream_timeout: f64,
    pub use_heading: bool,
    /// Dispersion family every heading is converted to on ingestion.
    pub family: Family,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            rate_hz: 18.0,
            start_time: 0.0,
            cv: CvModel::default(),
            gate: super::DEFAULT_GATE,
            history_depth: 6,
            drop_timeout: 0.5,
            stream_timeout: 0.0,
            use_heading: false,
            family: Family::WrappedNormal,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::domain(format!("fusion rate must be positive, got {}", self.rate_hz)));
        }
        if !self.start_time.is_finite() {
            return Err(Error::NonFinite("start time"));
        }
        if self.history_depth == 0 {
            return Err(Error::domain("history depth must be at least 1"));
        }
        for (name, v) in [
            ("drop timeout", self.drop_timeout),
            ("stream timeout", self.stream_timeout),
            ("process noise", self.cv.process_noise_q),
            ("heading inflation", self.cv.heading_inflation),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.gate.is_nan() {
            return Err(Error::NonFinite("gate"));
        }
        Ok(())
    }

    /// Time of fusion cycle `k`.
    pub fn cycle_time(&self, k: u64) -> f64 {
        self.start_time + k as f64 / self.rate_hz
    }
}

/// Per-stage counts of one fusion cycle.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CycleDiagnostics {
    pub drained: usize,
    pub predicted: usize,
    pub prediction_errors: usize,
    pub association_errors: usize,
    pub clusters: usize,
    pub merged: usize,
    pub passed_through: usize,
    pub merge_errors: usize,
    pub system_matched: usize,
    pub system_created: usize,
    pub system_retired: usize,
    pub system_active: usize,
    /// Late arrivals dropped by the buffer so far.
    pub dropped_late_total: u64,
}

/// Result of one fusion cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutput {
    pub cycle: u64,
    pub time: f64,
    /// System tracks updated in this cycle, by ascending id.
    pub tracks: Vec<SystemTrack>,
    pub diagnostics: CycleDiagnostics,
}

/// Aligns and converts incoming sensor tracks and hands them to the buffer.
/// Cheap to clone; clones feed the same buffer.
#[derive(Debug, Clone)]
pub struct Ingestor {
    buffer: SharedTrackBuffer,
    poses: BTreeMap<u32, SensorPose>,
    family: Family,
}

impl Ingestor {
    /// Returns whether the track was accepted by the buffer (`false` for a
    /// late arrival). Sensors without a registered pose are assumed to report
    /// in the common frame already.
    pub fn ingest(&self, track: &SensorTrack) -> Result<bool> {
        if !track.timestamp.is_finite() {
            return Err(Error::NonFinite("track timestamp"));
        }
        track.state.validate()?;
        let mut aligned = match self.poses.get(&track.sensor_id) {
            Some(pose) => spatial_align(track, pose)?,
            None => *track,
        };
        aligned.state.heading_dispersion = convert_dispersion(aligned.state.heading_dispersion, self.family)?;
        Ok(self.buffer.insert(aligned))
    }
}

#[derive(Debug, Clone)]
struct Stream {
    last: SensorTrack,
    /// Cycle in which `last` was drained.
    drained_in: u64,
    history: VecDeque<HistoryEntry>,
}

fn push_bounded(history: &mut VecDeque<HistoryEntry>, entry: HistoryEntry, depth: usize) {
    history.push_back(entry);
    while history.len() > depth {
        history.pop_front();
    }
}

fn entry_at(history: &VecDeque<HistoryEntry>, cycle: u64) -> Option<&TrackState> {
    history.iter().rev().find(|e| e.cycle == cycle).map(|e| &e.state)
}

/// The fusion centre: buffer, stream histories and system tracks.
#[derive(Debug)]
pub struct FusionEngine {
    config: FusionConfig,
    buffer: SharedTrackBuffer,
    streams: BTreeMap<StreamKey, Stream>,
    system: Vec<SystemTrack>,
    next_id: u64,
    cycle: u64,
}

struct Cluster {
    members: Vec<StreamKey>,
    states: Vec<TrackState>,
}

impl FusionEngine {
    pub fn new(config: FusionConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            buffer: SharedTrackBuffer::new(),
            streams: BTreeMap::new(),
            system: Vec::new(),
            next_id: 1,
            cycle: 0,
        })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    pub fn ingestor(&self, poses: BTreeMap<u32, SensorPose>) -> Ingestor {
        Ingestor {
            buffer: self.buffer.clone(),
            poses,
            family: self.config.family,
        }
    }

    /// Time of the next cycle [`step`](Self::step) will run.
    pub fn next_time(&self) -> f64 {
        self.config.cycle_time(self.cycle)
    }

    pub fn system_tracks(&self) -> &[SystemTrack] {
        &self.system
    }

    /// Mean per-cycle distance between two stream histories over the cycles
    /// both contain.
    fn history_distance(&self, a: &VecDeque<HistoryEntry>, b: &VecDeque<HistoryEntry>) -> Result<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for e in a {
            if let Some(s) = entry_at(b, e.cycle) {
                sum += association_distance(&e.state, s, self.config.use_heading)?;
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::domain("histories do not overlap"));
        }
        Ok(sum / n as f64)
    }

    /// Runs one fusion cycle at [`next_time`](Self::next_time).
    pub fn step(&mut self) -> CycleOutput {
        let time = self.next_time();
        let cycle = self.cycle;
        self.cycle += 1;
        let depth = self.config.history_depth;
        let mut diag = CycleDiagnostics::default();

        // drain → temporal alignment → history
        let drained = self.buffer.drain(time);
        diag.drained = drained.len();
        for track in drained {
            self.streams
                .entry(track.key())
                .and_modify(|s| {
                    s.last = track;
                    s.drained_in = cycle;
                })
                .or_insert_with(|| Stream {
                    last: track,
                    drained_in: cycle,
                    history: VecDeque::new(),
                });
        }
        let timeout = self.config.stream_timeout;
        self.streams
            .retain(|_, s| s.drained_in == cycle || time - s.last.timestamp <= timeout);
        let mut current: BTreeMap<StreamKey, TrackState> = BTreeMap::new();
        for (key, stream) in self.streams.iter_mut() {
            match cv_predict(&stream.last.state, time - stream.last.timestamp, &self.config.cv) {
                Ok(state) => {
                    push_bounded(&mut stream.history, HistoryEntry { cycle, time, state }, depth);
                    current.insert(*key, state);
                }
                Err(_) => diag.prediction_errors += 1,
            }
        }
        diag.predicted = current.len();

        // cross-sensor association, one sensor at a time
        let mut by_sensor: BTreeMap<u32, Vec<StreamKey>> = BTreeMap::new();
        for key in current.keys() {
            by_sensor.entry(key.sensor_id).or_default().push(*key);
        }
        let mut clusters: Vec<Cluster> = Vec::new();
        for keys in by_sensor.values() {
            let costs: Vec<Vec<f64>> = clusters
                .iter()
                .map(|c| {
                    keys.iter()
                        .map(|k| {
                            let mut sum = 0.0;
                            for m in &c.members {
                                match self.history_distance(&self.streams[m].history, &self.streams[k].history) {
                                    Ok(d) => sum += d,
                                    Err(_) => {
                                        diag.association_errors += 1;
                                        return f64::INFINITY;
                                    }
                                }
                            }
                            sum / c.members.len() as f64
                        })
                        .collect()
                })
                .collect();
            let assignment = gnn_associate(&costs, self.config.gate);
            for &(ci, ki) in &assignment.pairs {
                clusters[ci].members.push(keys[ki]);
                clusters[ci].states.push(current[&keys[ki]]);
            }
            // an empty cost matrix carries no column count
            let unmatched = if clusters.is_empty() {
                (0..keys.len()).collect()
            } else {
                assignment.unmatched_cols
            };
            for ki in unmatched {
                clusters.push(Cluster {
                    members: vec![keys[ki]],
                    states: vec![current[&keys[ki]]],
                });
            }
        }
        diag.clusters = clusters.len();

        // merge; a failed merge passes its members through unmerged
        let mut fused: Vec<(TrackState, Vec<StreamKey>)> = Vec::new();
        for c in clusters {
            if c.states.len() == 1 {
                diag.passed_through += 1;
                fused.push((c.states[0], c.members));
                continue;
            }
            match merge_states(&c.states) {
                Ok(s) => {
                    diag.merged += 1;
                    fused.push((s, c.members));
                }
                Err(_) => {
                    diag.merge_errors += 1;
                    for (s, m) in c.states.into_iter().zip(c.members) {
                        fused.push((s, vec![m]));
                    }
                }
            }
        }

        self.update_system_tracks(fused, cycle, time, &mut diag);
        diag.system_active = self.system.len();
        diag.dropped_late_total = self.buffer.dropped_late();
        let tracks = self.system.iter().filter(|s| s.last_update == time).cloned().collect();
        CycleOutput {
            cycle,
            time,
            tracks,
            diagnostics: diag,
        }
    }

    /// Cost of continuing system track `sys` with a fused track: mean of the
    /// distance to the predicted system state and the distances between the
    /// contributing streams' past states and the system track's history.
    fn system_cost(&self, fused: &TrackState, members: &[StreamKey], predicted: &TrackState, sys: &SystemTrack) -> Result<f64> {
        let mut sum = association_distance(fused, predicted, self.config.use_heading)?;
        let mut n = 1usize;
        for m in members {
            let Some(stream) = self.streams.get(m) else { continue };
            for h in &sys.history {
                if let Some(s) = entry_at(&stream.history, h.cycle) {
                    sum += association_distance(s, &h.state, self.config.use_heading)?;
                    n += 1;
                }
            }
        }
        Ok(sum / n as f64)
    }

    fn update_system_tracks(&mut self, fused: Vec<(TrackState, Vec<StreamKey>)>, cycle: u64, time: f64, diag: &mut CycleDiagnostics) {
        let predicted: Vec<Option<TrackState>> = self
            .system
            .iter()
            .map(|s| cv_predict(&s.state, time - s.last_update, &self.config.cv).ok())
            .collect();
        let costs: Vec<Vec<f64>> = fused
            .iter()
            .map(|(f, members)| {
                self.system
                    .iter()
                    .zip(&predicted)
                    .map(|(s, p)| match p {
                        Some(p) => self.system_cost(f, members, p, s).unwrap_or(f64::INFINITY),
                        None => f64::INFINITY,
                    })
                    .collect()
            })
            .collect();
        let assignment = gnn_associate(&costs, self.config.gate);
        let depth = self.config.history_depth;
        for &(fi, si) in &assignment.pairs {
            let (state, members) = &fused[fi];
            let sys = &mut self.system[si];
            sys.state = *state;
            sys.last_update = time;
            sys.sources = members.clone();
            push_bounded(&mut sys.history, HistoryEntry { cycle, time, state: *state }, depth);
        }
        diag.system_matched = assignment.pairs.len();
        for &fi in &assignment.unmatched_rows {
            let (state, members) = &fused[fi];
            let mut history = VecDeque::new();
            history.push_back(HistoryEntry { cycle, time, state: *state });
            self.system.push(SystemTrack {
                system_id: self.next_id,
                state: *state,
                last_update: time,
                history,
                sources: members.clone(),
            });
            self.next_id += 1;
            diag.system_created += 1;
        }
        let timeout = self.config.drop_timeout;
        let before = self.system.len();
        self.system.retain(|s| time - s.last_update <= timeout);
        diag.system_retired = before - self.system.len();
    }
}

/// Runs recorded sensor tracks, in arrival order, through a fresh engine.
///
/// A track is ingested before the first cycle whose time is not earlier than
/// its timestamp. Cycles run until every record has been consumed.
pub fn replay<'a>(
    records: impl IntoIterator<Item = &'a SensorTrack>,
    poses: BTreeMap<u32, SensorPose>,
    config: FusionConfig,
) -> Result<Vec<CycleOutput>> {
    let mut engine = FusionEngine::new(config)?;
    let ingestor = engine.ingestor(poses);
    let mut records = records.into_iter().peekable();
    let mut out = Vec::new();
    let Some(first) = records.peek() else {
        return Ok(out);
    };
    // cycles before the first record would be empty
    while engine.next_time() < first.timestamp {
        engine.cycle += 1;
    }
    let mut last_seen = f64::NEG_INFINITY;
    loop {
        let t = engine.next_time();
        while let Some(r) = records.next_if(|r| r.timestamp <= t) {
            last_seen = last_seen.max(r.timestamp);
            ingestor.ingest(r)?;
        }
        out.push(engine.step());
        if records.peek().is_none() && t >= last_seen {
            break;
        }
    }
    Ok(out)
}

/// Re-expresses a heading dispersion in `family`.
pub fn convert_dispersion(d: DispersionValue, family: Family) -> Result<DispersionValue> {
    match family {
        Family::WrappedNormal => d.to_wn_variance(),
        Family::VonMises => d.to_vm_kappa(),
    }
}
