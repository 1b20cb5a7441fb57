//! Average Euclidean distance between two co-temporal moving line segments.
//!
//! Both objects move at constant velocity across one interval. With time
//! normalised to `τ ∈ [0, 1]`, their separation is `Δ(τ) = Δ0 + τ (Δ1 − Δ0)`
//! and the squared separation is the quadratic `a τ² + b τ + c`. The distance
//! is the mean of `|Δ(τ)|` over the interval, i.e. `∫₀¹ √(aτ² + bτ + c) dτ`.
//!
//! Coordinates are treated as planar. Project lon/lat data before use.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2-D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Linear interpolation, exact at `t = 0`.
    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// One trajectory's straight-line motion over one interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Dense index of the owning trajectory.
    pub traj: usize,
    /// 1-based interval index.
    pub interval: usize,
    pub start: Point2,
    pub end: Point2,
}

impl Segment {
    pub fn new(traj: usize, interval: usize, start: Point2, end: Point2) -> Self {
        Segment {
            traj,
            interval,
            start,
            end,
        }
    }
}

/// Coefficients of `|Δ(τ)|² = a τ² + b τ + c` for a segment pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// `b² − 4ac`, evaluated as `−4 (Δ0 × V)²` so it is never positive and
    /// does not suffer cancellation.
    pub disc: f64,
}

impl QuadraticCoeffs {
    pub fn from_motion(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> Self {
        let d0 = a0 - b0;
        let d1 = a1 - b1;
        let v = d1 - d0;
        let cross = d0.cross(v);
        QuadraticCoeffs {
            a: v.dot(v),
            b: 2.0 * d0.dot(v),
            c: d0.dot(d0),
            disc: -4.0 * cross * cross,
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        (self.a * tau + self.b) * tau + self.c
    }
}

/// Outcome of the endpoint pre-check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FastPath {
    /// Both endpoint separations are within eps, so the average is too.
    Neighbor,
    /// The full integral is needed.
    Unknown,
}

fn check_same_interval(s1: &Segment, s2: &Segment) -> Result<()> {
    if s1.interval != s2.interval {
        return Err(Error::contract(format!(
            "segments belong to different intervals ({} vs {})",
            s1.interval, s2.interval
        )));
    }
    Ok(())
}

pub fn relative_coeffs(s1: &Segment, s2: &Segment) -> Result<QuadraticCoeffs> {
    check_same_interval(s1, s2)?;
    Ok(QuadraticCoeffs::from_motion(s1.start, s1.end, s2.start, s2.end))
}

/// Average Euclidean distance between two segments of the same interval.
pub fn segment_distance(s1: &Segment, s2: &Segment) -> Result<f64> {
    check_same_interval(s1, s2)?;
    Ok(motion_distance(s1.start, s1.end, s2.start, s2.end))
}

/// Average distance between object A moving `a0 → a1` and object B moving
/// `b0 → b1` over the same normalised interval.
pub fn motion_distance(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> f64 {
    let q = QuadraticCoeffs::from_motion(a0, a1, b0, b1);
    match closed_form(&q) {
        Some(d) => d,
        None => simpson(a0 - b0, a1 - b1, 10_001),
    }
}

const A_TOL: f64 = 1e-12;
const DISC_TOL: f64 = 1e-12;

/// `∫₀¹ √(aτ² + bτ + c) dτ`, or `None` when the logarithm argument degrades
/// to a non-positive value and the caller should integrate numerically.
///
/// Coefficients are first scaled so that `max(a, |b|, c) = 1`; the integral
/// is homogeneous of degree one in `√scale`, so thresholds become relative.
pub fn closed_form(q: &QuadraticCoeffs) -> Option<f64> {
    let s2 = q.a.max(q.b.abs()).max(q.c);
    if s2 == 0.0 {
        return Some(0.0);
    }
    if !s2.is_finite() {
        return None;
    }
    let a = q.a / s2;
    let b = q.b / s2;
    let c = q.c / s2;
    let disc = q.disc / s2 / s2;
    let unit = if a <= A_TOL * c.max(1.0) {
        linear_radicand(b, c)
    } else if disc.abs() <= DISC_TOL * (a * c).max(1.0) {
        double_root(a, b)
    } else {
        general(a, b, c, disc)?
    };
    Some((unit * s2.sqrt()).max(0.0))
}

/// Negligible `a`: integrate `√(c + bτ)` exactly,
/// `(2/3)((c+b)^{3/2} − c^{3/2}) / b`, written without the division by `b`.
fn linear_radicand(b: f64, c: f64) -> f64 {
    let x = (c + b).max(0.0).sqrt();
    let y = c.max(0.0).sqrt();
    if x + y == 0.0 {
        return 0.0;
    }
    2.0 / 3.0 * (x * x + x * y + y * y) / (x + y)
}

/// Zero discriminant: the integrand is `√a |τ − τ0|`.
fn double_root(a: f64, b: f64) -> f64 {
    let t0 = -b / (2.0 * a);
    let area = if t0 <= 0.0 {
        0.5 - t0
    } else if t0 >= 1.0 {
        t0 - 0.5
    } else {
        0.5 * (t0 * t0 + (1.0 - t0) * (1.0 - t0))
    };
    a.sqrt() * area
}

/// Antiderivative
/// `(2aτ+b)√q/(4a) − (b²−4ac) ln(2√a√q + 2aτ + b)/(8a^{3/2})`
/// evaluated between 0 and 1.
fn general(a: f64, b: f64, c: f64, disc: f64) -> Option<f64> {
    let sa = a.sqrt();
    let root_q = |tau: f64| ((a * tau + b) * tau + c).max(0.0).sqrt();
    let log_arg = |tau: f64, rq: f64| {
        let lin = 2.0 * a * tau + b;
        if lin >= 0.0 {
            2.0 * sa * rq + lin
        } else {
            // (2√a√q)² − lin² = −disc; avoids cancelling two close terms.
            -disc / (2.0 * sa * rq - lin)
        }
    };
    let rq0 = root_q(0.0);
    let rq1 = root_q(1.0);
    let l0 = log_arg(0.0, rq0);
    let l1 = log_arg(1.0, rq1);
    if !(l0 > 0.0 && l1 > 0.0 && l0.is_finite() && l1.is_finite()) {
        return None;
    }
    let poly = ((2.0 * a + b) * rq1 - b * rq0) / (4.0 * a);
    let log_term = -disc / (8.0 * a * sa) * (l1 / l0).ln();
    let value = poly + log_term;
    value.is_finite().then_some(value)
}

/// Composite Simpson quadrature of `|Δ(τ)|` over `[0, 1]` with `n_points`
/// nodes (odd, at least 3).
pub fn segment_distance_oracle(s1: &Segment, s2: &Segment, n_points: usize) -> Result<f64> {
    check_same_interval(s1, s2)?;
    if n_points < 3 || n_points % 2 == 0 {
        return Err(Error::contract(format!(
            "Simpson rule needs an odd node count of at least 3, got {n_points}"
        )));
    }
    Ok(simpson(s1.start - s2.start, s1.end - s2.end, n_points))
}

fn simpson(d0: Point2, d1: Point2, n_points: usize) -> f64 {
    let panels = n_points - 1;
    let h = 1.0 / panels as f64;
    let f = |k: usize| {
        let t = k as f64 * h;
        (d0 * (1.0 - t) + d1 * t).norm()
    };
    let mut odd = 0.0;
    let mut even = 0.0;
    for k in 1..panels {
        if k % 2 == 1 {
            odd += f(k);
        } else {
            even += f(k);
        }
    }
    (f(0) + f(panels) + 4.0 * odd + 2.0 * even) * h / 3.0
}

/// Endpoint pre-check. The norm is convex, so if both endpoint separations
/// are within `eps` the average separation is as well.
pub fn endpoint_fast_path(s1: &Segment, s2: &Segment, eps: f64) -> Result<FastPath> {
    check_same_interval(s1, s2)?;
    Ok(endpoints_within(s1.start, s1.end, s2.start, s2.end, eps))
}

pub fn endpoints_within(a0: Point2, a1: Point2, b0: Point2, b1: Point2, eps: f64) -> FastPath {
    if a0.dist(b0) <= eps && a1.dist(b1) <= eps {
        FastPath::Neighbor
    } else {
        FastPath::Unknown
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(x0: f64, y0: f64, x1: f64, y1: f64) -> Segment {
        Segment::new(0, 1, Point2::new(x0, y0), Point2::new(x1, y1))
    }

    #[test]
    fn coefficients_match_hand_expansion() {
        let q = relative_coeffs(&seg(0., 0., 1., 0.), &seg(0., 0., 1., 0.)).unwrap();
        assert_eq!((q.a, q.b, q.c), (0.0, 0.0, 0.0));

        let q = relative_coeffs(&seg(0., 0., 1., 0.), &seg(0., 1., 1., 1.)).unwrap();
        assert_eq!((q.a, q.b, q.c), (0.0, 0.0, 1.0));

        let q = relative_coeffs(&seg(0., 0., 1., 0.), &seg(0., 0., 0., 1.)).unwrap();
        assert_eq!((q.a, q.b, q.c), (2.0, 0.0, 0.0));
        assert_eq!(q.disc, 0.0);
    }

    #[test]
    fn mismatched_intervals_are_rejected() {
        let s1 = seg(0., 0., 1., 0.);
        let mut s2 = s1;
        s2.interval = 2;
        assert!(matches!(relative_coeffs(&s1, &s2), Err(Error::Contract(_))));
        assert!(segment_distance(&s1, &s2).is_err());
        assert!(endpoint_fast_path(&s1, &s2, 1.0).is_err());
    }

    #[test]
    fn reference_distances() {
        let d = |a: Segment, b: Segment| segment_distance(&a, &b).unwrap();
        assert_eq!(d(seg(0., 0., 1., 0.), seg(0., 0., 1., 0.)), 0.0);
        assert_eq!(d(seg(0., 0., 1., 0.), seg(0., 1., 1., 1.)), 1.0);
        let diag = d(seg(0., 0., 1., 0.), seg(0., 0., 0., 1.));
        assert!((diag - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let oracle =
            segment_distance_oracle(&seg(0., 0., 1., 0.), &seg(0., 0., 0., 1.), 10_001).unwrap();
        assert!((diag - oracle).abs() < 1e-12);
    }

    #[test]
    fn oracle_reference_values() {
        let o = |a: Segment, b: Segment, n| segment_distance_oracle(&a, &b, n).unwrap();
        assert_eq!(o(seg(0., 0., 1., 0.), seg(0., 0., 1., 0.), 101), 0.0);
        assert!((o(seg(0., 0., 1., 0.), seg(0., 1., 1., 1.), 101) - 1.0).abs() <= 1e-12);
        // Δ(τ) = (1 − 2τ, 0): ∫|1 − 2τ| = 1/2, kink on a panel boundary.
        let crossing = o(seg(0., 0., 1., 0.), seg(1., 0., 0., 0.), 10_001);
        assert!((crossing - 0.5).abs() < 1e-12);
        let closed = segment_distance(&seg(0., 0., 1., 0.), &seg(1., 0., 0., 0.)).unwrap();
        assert!((closed - 0.5).abs() < 1e-15);
    }

    #[test]
    fn oracle_rejects_even_node_counts() {
        let s = seg(0., 0., 1., 0.);
        assert!(segment_distance_oracle(&s, &s, 100).is_err());
        assert!(segment_distance_oracle(&s, &s, 1).is_err());
    }

    #[test]
    fn fast_path_cases() {
        let base = seg(0., 0., 1., 0.);
        let near = seg(0., 0.5, 1., 0.5);
        let far = seg(0., 2., 1., 2.);
        assert_eq!(endpoint_fast_path(&base, &near, 1.0).unwrap(), FastPath::Neighbor);
        assert_eq!(endpoint_fast_path(&base, &far, 1.0).unwrap(), FastPath::Unknown);

        // Start 0.5 apart, end 1.5 apart: the average is exactly 1.0 but the
        // pre-check cannot tell, so the integral decides.
        let skew = seg(0., 0.5, 1., 1.5);
        assert_eq!(endpoint_fast_path(&base, &skew, 1.0).unwrap(), FastPath::Unknown);
        let full = segment_distance(&base, &skew).unwrap();
        assert!((full - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tiny_relative_velocity_stays_accurate() {
        // a = 1e-15, c = 0: the answer is √a / 2, not 0.
        let s1 = seg(0., 0., 0., 0.);
        let s2 = seg(0., 0., (1e-15f64).sqrt(), 0.);
        let d = segment_distance(&s1, &s2).unwrap();
        assert!((d - (1e-15f64).sqrt() / 2.0).abs() < 1e-22);

        // a = 1e-15 against a unit offset.
        let s3 = seg(0., 1., (1e-15f64).sqrt(), 1.);
        let d = segment_distance(&s1, &s3).unwrap();
        let o = segment_distance_oracle(&s1, &s3, 100_001).unwrap();
        assert!((d - o).abs() < 1e-12);
    }

    #[test]
    fn stationary_pair_is_constant_offset() {
        let s1 = seg(3., 4., 3., 4.);
        let s2 = seg(0., 0., 0., 0.);
        assert_eq!(segment_distance(&s1, &s2).unwrap(), 5.0);
    }
}
