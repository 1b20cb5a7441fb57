//! Trajectory representation and preprocessing: duplicate collapse,
//! time-parametrised resampling to a shared length, and segmentation into
//! per-interval segment sets.

use std::cmp::Ordering;
use std::fmt;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Segment};

/// Opaque trajectory identifier.
///
/// Ordering is numeric when both ids parse as integers, otherwise
/// lexicographic, with numeric ids sorting first. This keeps `"2" < "10"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrajId(pub String);

impl TrajId {
    pub fn new(id: impl Into<String>) -> Self {
        TrajId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Ord for TrajId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0.parse::<i64>(), other.0.parse::<i64>()) {
            (Ok(a), Ok(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Ok(_), Err(_)) => Ordering::Less,
            (Err(_), Ok(_)) => Ordering::Greater,
            (Err(_), Err(_)) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for TrajId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TrajId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TrajId {
    fn from(s: &str) -> Self {
        TrajId(s.to_owned())
    }
}

impl From<usize> for TrajId {
    fn from(n: usize) -> Self {
        TrajId(n.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub pos: Point2,
}

impl Sample {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Sample {
            t,
            pos: Point2::new(x, y),
        }
    }
}

/// A timestamped track as recorded, before resampling.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTrack {
    pub id: TrajId,
    samples: Vec<Sample>,
}

impl RawTrack {
    /// Validates: at least two samples, strictly increasing timestamps,
    /// finite values.
    pub fn new(id: TrajId, samples: Vec<Sample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Data(format!(
                "track {id} has {} sample(s), need at least 2",
                samples.len()
            )));
        }
        for s in &samples {
            if !s.t.is_finite() || !s.pos.is_finite() {
                return Err(Error::Data(format!("track {id} has a non-finite sample")));
            }
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::Data(format!(
                "track {id}: timestamps not strictly increasing at t={}",
                w[1].t
            )));
        }
        Ok(RawTrack { id, samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
}

/// A trajectory resampled to the dataset-wide length `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: TrajId,
    pub positions: Vec<Point2>,
}

impl Trajectory {
    pub fn new(id: impl Into<TrajId>, positions: Vec<Point2>) -> Self {
        Trajectory {
            id: id.into(),
            positions,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// All segments of one interval, indexed by trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSet {
    pub interval: usize,
    pub segments: Vec<Segment>,
}

impl SegmentSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Collapse runs of consecutive samples at identical coordinates to their
/// first occurrence.
pub fn deduplicate(track: &RawTrack) -> Result<RawTrack> {
    let mut kept: Vec<Sample> = Vec::with_capacity(track.samples.len());
    for s in &track.samples {
        if kept.last().is_some_and(|last| last.pos == s.pos) {
            continue;
        }
        kept.push(*s);
    }
    if kept.len() < 2 {
        return Err(Error::DegenerateTrack {
            traj_id: track.id.to_string(),
        });
    }
    Ok(RawTrack {
        id: track.id.clone(),
        samples: kept,
    })
}

/// Resample at `len` equally spaced timestamps spanning the track, by linear
/// interpolation in time. Endpoints are preserved exactly.
pub fn resample_uniform(track: &RawTrack, len: usize) -> Result<Trajectory> {
    if len < 2 {
        return Err(Error::contract(format!("resample length must be >= 2, got {len}")));
    }
    let samples = &track.samples;
    let t0 = samples[0].t;
    let t1 = samples[samples.len() - 1].t;
    let span = t1 - t0;
    let mut positions = Vec::with_capacity(len);
    let mut j = 0;
    for k in 0..len {
        if k == len - 1 {
            positions.push(samples[samples.len() - 1].pos);
            break;
        }
        let t = t0 + span * k as f64 / (len - 1) as f64;
        while j + 2 < samples.len() && samples[j + 1].t <= t {
            j += 1;
        }
        let (a, b) = (samples[j], samples[j + 1]);
        let frac = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        positions.push(a.pos.lerp(b.pos, frac));
    }
    Ok(Trajectory {
        id: track.id.clone(),
        positions,
    })
}

/// Split equal-length trajectories into `T − 1` interval segment sets.
/// Segment `traj` indices follow the slice order.
pub fn segmentize(trajectories: &[Trajectory]) -> Result<Vec<SegmentSet>> {
    let Some(first) = trajectories.first() else {
        return Ok(Vec::new());
    };
    let len = first.len();
    if len < 2 {
        return Err(Error::contract("trajectories need at least 2 positions"));
    }
    if let Some(bad) = trajectories.iter().find(|t| t.len() != len) {
        return Err(Error::contract(format!(
            "trajectory {} has length {}, expected {len}",
            bad.id,
            bad.len()
        )));
    }
    Ok((1..len)
        .map(|interval| SegmentSet {
            interval,
            segments: trajectories
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    Segment::new(k, interval, t.positions[interval - 1], t.positions[interval])
                })
                .collect(),
        })
        .collect())
}

/// Median raw sample count, clamped to `[2, 512]`.
pub fn default_length(tracks: &[RawTrack]) -> usize {
    if tracks.is_empty() {
        return 2;
    }
    let mut counts: Vec<usize> = tracks.iter().map(|t| t.samples.len()).collect();
    counts.sort_unstable();
    let n = counts.len();
    let median = if n % 2 == 1 {
        counts[n / 2]
    } else {
        (counts[n / 2 - 1] + counts[n / 2]) / 2
    };
    median.clamp(2, 512)
}

/// A track removed during preprocessing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DroppedTrack {
    pub traj_id: TrajId,
    pub reason: String,
}

/// Deduplicate and resample every track. Tracks that collapse below two
/// samples are dropped with a warning. Output is sorted by id.
pub fn preprocess(
    tracks: &[RawTrack],
    len: Option<usize>,
) -> Result<(Vec<Trajectory>, Vec<DroppedTrack>)> {
    let len = len.unwrap_or_else(|| default_length(tracks));
    if len < 2 {
        return Err(Error::Config(format!("resample length must be >= 2, got {len}")));
    }
    let results: Vec<Result<Trajectory>> = tracks
        .par_iter()
        .map(|t| deduplicate(t).and_then(|d| resample_uniform(&d, len)))
        .collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (track, res) in tracks.iter().zip(results) {
        match res {
            Ok(t) => kept.push(t),
            Err(e @ Error::DegenerateTrack { .. }) => {
                warn!("dropping track {}: {e}", track.id);
                dropped.push(DroppedTrack {
                    traj_id: track.id.clone(),
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }
    kept.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = kept.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Data(format!("duplicate trajectory id {}", w[0].id)));
    }
    Ok((kept, dropped))
}
