//! Deterministic fixtures: the crossed-corridor scenario and the four
//! stability case constructions.
//!
//! Optional jitter draws from SplitMix64 seeded with the fixture's seed. Each
//! draw `u = (next_u64 >> 11) * 2^-53` maps to `(2u - 1) * jitter`; draws are
//! taken per trajectory, per position, x before y (cases jitter x only).

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::trajectory::{TrajId, Trajectory};

struct Jitter {
    rng: SplitMix64,
    amplitude: f64,
}

impl Jitter {
    fn new(seed: u64, amplitude: f64) -> Self {
        Jitter {
            rng: SplitMix64::seed_from_u64(seed),
            amplitude,
        }
    }

    fn draw(&mut self) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (2.0 * u - 1.0) * self.amplitude
    }
}

/// Vertical lanes `lane_gap` apart, all moving toward -y at unit speed.
/// Deviator lanes sit between the top and bottom groups and lag behind
/// (are displaced toward +y) during the deviation window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorridorSpec {
    pub n_straight_top: usize,
    pub n_deviators: usize,
    pub n_straight_bottom: usize,
    /// Samples per trajectory.
    pub len: usize,
    /// First and last deviating interval (1-based, inclusive).
    pub deviation_start: usize,
    pub deviation_end: usize,
    /// Peak lag of the deviators.
    pub deviation_offset: f64,
    pub lane_gap: f64,
    pub seed: u64,
    pub jitter: f64,
}

impl Default for CorridorSpec {
    fn default() -> Self {
        CorridorSpec {
            n_straight_top: 2,
            n_deviators: 2,
            n_straight_bottom: 2,
            len: 50,
            deviation_start: 20,
            deviation_end: 30,
            deviation_offset: 4.0,
            lane_gap: 1.0,
            seed: 0,
            jitter: 0.0,
        }
    }
}

impl CorridorSpec {
    /// Trajectory indices of the deviators in the generated set.
    pub fn deviator_indices(&self) -> std::ops::Range<usize> {
        self.n_straight_top..self.n_straight_top + self.n_deviators
    }

    fn validate(&self) -> Result<()> {
        let m = self.len.saturating_sub(1);
        if self.len < 2 {
            return Err(Error::contract("corridor needs at least 2 samples per trajectory"));
        }
        if self.deviation_start < 1 || self.deviation_start >= self.deviation_end || self.deviation_end > m {
            return Err(Error::contract(format!(
                "deviation window [{}, {}] must satisfy 1 <= start < end <= {m}",
                self.deviation_start, self.deviation_end
            )));
        }
        if !(self.deviation_offset >= 0.0 && self.lane_gap > 0.0 && self.jitter >= 0.0) {
            return Err(Error::contract("corridor offsets must be non-negative and lane_gap positive"));
        }
        Ok(())
    }

    /// Lag at 0-based position `p`: a tent that is zero at positions
    /// `start - 1` and `end` and peaks midway, so only intervals inside the
    /// window move.
    pub fn lag_at(&self, p: usize) -> f64 {
        let (s, e) = (self.deviation_start as f64, self.deviation_end as f64);
        let centre = (s - 1.0 + e) / 2.0;
        let half = (e - s + 1.0) / 2.0;
        let tent = 1.0 - (p as f64 - centre).abs() / half;
        self.deviation_offset * tent.max(0.0)
    }
}

/// Generate the corridor; ids are `0..` in lane order.
pub fn generate_corridor(spec: &CorridorSpec) -> Result<Vec<Trajectory>> {
    spec.validate()?;
    let n = spec.n_straight_top + spec.n_deviators + spec.n_straight_bottom;
    let deviators = spec.deviator_indices();
    let mut jitter = Jitter::new(spec.seed, spec.jitter);
    let top = (spec.len - 1) as f64;
    Ok((0..n)
        .map(|k| {
            let x = k as f64 * spec.lane_gap;
            let positions = (0..spec.len)
                .map(|p| {
                    let lag = if deviators.contains(&k) { spec.lag_at(p) } else { 0.0 };
                    let jx = jitter.draw();
                    let jy = jitter.draw();
                    Point2::new(x + jx, top - p as f64 + lag + jy)
                })
                .collect();
            Trajectory::new(k, positions)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub case_id: u8,
    pub n_cluster_members: usize,
    /// Fraction of the `len - 1` intervals in which the probe is fully
    /// displaced.
    pub deviation_fraction: f64,
    /// Probe offset from the nearest member, in units of eps.
    pub deviation_magnitude: f64,
    pub len: usize,
    pub seed: u64,
    /// Member jitter, in units of eps.
    pub jitter: f64,
}

/// Fraction regarded as "a few" intervals.
pub const FEW: f64 = 0.1;
pub const MANY: f64 = 0.6;
/// Deviation regarded as small, in units of eps.
pub const SMALL: f64 = 1.2;
pub const LARGE: f64 = 5.0;

impl CaseSpec {
    /// Case 1: few/large; 2: many/large; 3: many/small; 4: few/small.
    pub fn canonical(case_id: u8, seed: u64) -> Result<Self> {
        let (deviation_fraction, deviation_magnitude) = match case_id {
            1 => (FEW, LARGE),
            2 => (MANY, LARGE),
            3 => (MANY, SMALL),
            4 => (FEW, SMALL),
            _ => return Err(Error::contract(format!("case id must be 1..=4, got {case_id}"))),
        };
        Ok(CaseSpec {
            case_id,
            n_cluster_members: 20,
            deviation_fraction,
            deviation_magnitude,
            len: 21,
            seed,
            jitter: 0.005,
        })
    }

    /// Fully displaced intervals, centred in `1..=len-1`.
    pub fn deviating_intervals(&self) -> std::ops::RangeInclusive<usize> {
        let m = self.len - 1;
        let k = (self.deviation_fraction * m as f64).round() as usize;
        let s = (m - k) / 2 + 1;
        s..=s + k - 1
    }
}

/// Probe x offset (in eps) when not deviating.
pub const PROBE_BASE: f64 = 0.75;
/// Spread of the member lanes (in eps).
pub const MEMBER_SPREAD: f64 = 0.5;

/// Members at x in `[0, 0.5 eps]` plus jitter, and a probe at `-0.75 eps`
/// that sits at `-magnitude * eps` during the deviating intervals. All
/// move toward -y at unit speed. Members are ids `0..n`, the probe is
/// `"probe"`.
pub fn generate_case(spec: &CaseSpec, eps: f64) -> Result<(Vec<Trajectory>, Trajectory)> {
    let n = spec.n_cluster_members;
    if n < 2 || spec.len < 3 || !(eps > 0.0) {
        return Err(Error::contract("case needs >= 2 members, >= 3 samples and eps > 0"));
    }
    if !(0.0..=1.0).contains(&spec.deviation_fraction) || spec.deviation_magnitude < 0.0 || spec.jitter < 0.0 {
        return Err(Error::contract("case fraction must lie in [0, 1] and magnitudes be non-negative"));
    }
    let top = (spec.len - 1) as f64;
    let mut jitter = Jitter::new(spec.seed, spec.jitter * eps);
    let members = (0..n)
        .map(|j| {
            let x = j as f64 * MEMBER_SPREAD * eps / (n - 1) as f64;
            let positions = (0..spec.len)
                .map(|p| Point2::new(x + jitter.draw(), top - p as f64))
                .collect();
            Trajectory::new(j, positions)
        })
        .collect();

    let dev = spec.deviating_intervals();
    // Interval i spans positions i - 1 and i.
    let displaced = |p: usize| !dev.is_empty() && p + 1 >= *dev.start() && p <= *dev.end();
    let positions = (0..spec.len)
        .map(|p| {
            let off = if displaced(p) { spec.deviation_magnitude } else { PROBE_BASE };
            Point2::new(-off * eps, top - p as f64)
        })
        .collect();
    Ok((members, Trajectory::new(TrajId::new("probe"), positions)))
}
