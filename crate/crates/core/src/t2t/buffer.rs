use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, PoisonError};

use super::{SensorTrack, StreamKey};

/// Holds aligned sensor tracks until the fusion instant they belong to.
#[derive(Debug, Default, Clone)]
pub struct TrackBuffer {
    pending: BTreeMap<StreamKey, Vec<SensorTrack>>,
    last_drain: Option<f64>,
    dropped_late: u64,
}

impl TrackBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queues a track. Tracks older than the last drained fusion time are
    /// dropped and counted; returns whether the track was kept.
    pub fn insert(&mut self, track: SensorTrack) -> bool {
        if let Some(t) = self.last_drain {
            if track.timestamp < t {
                self.dropped_late += 1;
                return false;
            }
        }
        self.pending.entry(track.key()).or_default().push(track);
        true
    }

    /// Returns, per stream, the newest track with `timestamp <= fusion_time`
    /// and discards every older one. Later tracks stay queued.
    pub fn drain(&mut self, fusion_time: f64) -> Vec<SensorTrack> {
        let mut out = Vec::new();
        for queue in self.pending.values_mut() {
            let mut newest: Option<SensorTrack> = None;
            queue.retain(|t| {
                if t.timestamp <= fusion_time {
                    // ties keep the later insertion
                    if newest.is_none_or(|n| t.timestamp >= n.timestamp) {
                        newest = Some(*t);
                    }
                    false
                } else {
                    true
                }
            });
            out.extend(newest);
        }
        self.pending.retain(|_, q| !q.is_empty());
        self.last_drain = Some(self.last_drain.map_or(fusion_time, |t| t.max(fusion_time)));
        out
    }

    pub fn dropped_late(&self) -> u64 {
        self.dropped_late
    }

    pub fn len(&self) -> usize {
        self.pending.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }
}

/// Thread-safe handle to a [`TrackBuffer`]; every insert and drain is a
/// single critical section.
#[derive(Debug, Default, Clone)]
pub struct SharedTrackBuffer(Arc<Mutex<TrackBuffer>>);

impl SharedTrackBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    fn with<R>(&self, f: impl FnOnce(&mut TrackBuffer) -> R) -> R {
        let mut guard = self.0.lock().unwrap_or_else(PoisonError::into_inner);
        f(&mut guard)
    }

    pub fn insert(&self, track: SensorTrack) -> bool {
        self.with(|b| b.insert(track))
    }

    pub fn drain(&self, fusion_time: f64) -> Vec<SensorTrack> {
        self.with(|b| b.drain(fusion_time))
    }

    pub fn dropped_late(&self) -> u64 {
        self.with(|b| b.dropped_late())
    }

    pub fn len(&self) -> usize {
        self.with(|b| b.len())
    }

    pub fn is_empty(&self) -> bool {
        self.with(|b| b.is_empty())
    }
}
