//! Per-interval memoised segment distances shared by split/merge, the
//! stability post-process, and evaluation.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use crate::geometry::{endpoints_within, motion_distance, FastPath, Segment};
use crate::trajectory::SegmentSet;

const UNSET: u64 = u64::MAX;

/// Owns the segment sets of a run and lazily fills a strict upper-triangular
/// distance table per interval. Safe to share across threads.
#[derive(Debug)]
pub struct DistanceCache {
    sets: Vec<SegmentSet>,
    tables: Vec<OnceLock<Box<[AtomicU64]>>>,
    n: usize,
    fast_path: bool,
    integrals: AtomicU64,
}

impl DistanceCache {
    /// `sets` must be ordered by interval (1..=m) with one segment per
    /// trajectory, as produced by `segmentize`.
    pub fn new(sets: Vec<SegmentSet>) -> Self {
        let n = sets.first().map_or(0, SegmentSet::len);
        debug_assert!(sets.iter().enumerate().all(|(k, s)| s.interval == k + 1 && s.len() == n));
        let tables = (0..sets.len()).map(|_| OnceLock::new()).collect();
        DistanceCache {
            sets,
            tables,
            n,
            fast_path: true,
            integrals: AtomicU64::new(0),
        }
    }

    /// Toggle the endpoint pre-check used by neighbour tests.
    pub fn with_fast_path(mut self, enabled: bool) -> Self {
        self.fast_path = enabled;
        self
    }

    pub fn n_trajectories(&self) -> usize {
        self.n
    }

    /// Number of intervals `m`.
    pub fn n_intervals(&self) -> usize {
        self.sets.len()
    }

    pub fn segment_sets(&self) -> &[SegmentSet] {
        &self.sets
    }

    /// Closed-form integrals evaluated so far.
    pub fn integrals_evaluated(&self) -> u64 {
        self.integrals.load(Ordering::Relaxed)
    }

    /// View of one interval (1-based).
    pub fn pool(&self, interval: usize) -> SegmentPool<'_> {
        let idx = interval - 1;
        let table = self.tables[idx].get_or_init(|| {
            let len = self.n * self.n.saturating_sub(1) / 2;
            (0..len).map(|_| AtomicU64::new(UNSET)).collect()
        });
        SegmentPool {
            set: &self.sets[idx],
            table,
            fast_path: self.fast_path,
            integrals: &self.integrals,
        }
    }

    pub fn distance(&self, interval: usize, i: usize, j: usize) -> f64 {
        self.pool(interval).distance(i, j)
    }
}

/// One interval's segments plus its memo table.
#[derive(Clone, Copy, Debug)]
pub struct SegmentPool<'a> {
    set: &'a SegmentSet,
    table: &'a [AtomicU64],
    fast_path: bool,
    integrals: &'a AtomicU64,
}

impl<'a> SegmentPool<'a> {
    pub fn interval(&self) -> usize {
        self.set.interval
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn segment(&self, traj: usize) -> &'a Segment {
        &self.set.segments[traj]
    }

    pub fn segments(&self) -> &'a [Segment] {
        &self.set.segments
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let slot = &self.table[hi * (hi - 1) / 2 + lo];
        let bits = slot.load(Ordering::Relaxed);
        if bits != UNSET {
            return f64::from_bits(bits);
        }
        let a = self.segment(lo);
        let b = self.segment(hi);
        let d = motion_distance(a.start, a.end, b.start, b.end);
        self.integrals.fetch_add(1, Ordering::Relaxed);
        slot.store(d.to_bits(), Ordering::Relaxed);
        d
    }

    /// `dist(i, j) <= eps`, consulting the endpoint pre-check first.
    pub fn within(&self, i: usize, j: usize, eps: f64) -> bool {
        if i == j {
            return true;
        }
        if self.fast_path {
            let (a, b) = (self.segment(i), self.segment(j));
            if endpoints_within(a.start, a.end, b.start, b.end, eps) == FastPath::Neighbor {
                return true;
            }
        }
        self.distance(i, j) <= eps
    }
}
