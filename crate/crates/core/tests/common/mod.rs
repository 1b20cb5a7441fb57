//! Fixtures and brute-force oracles shared by the integration tests and
//! the acceptance runner. Nothing here calls the clustering code under
//! test.
#![allow(dead_code)]

use rand::{Rng, RngCore};
use trajstc::geometry::{segment_distance, Point2, Segment};
use trajstc::segment_clustering::{ClusterHistory, DensityClass};
use trajstc::trajectory::{SegmentSet, Trajectory};

pub fn random_point<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Point2 {
    Point2::new(rng.random_range(lo..hi), rng.random_range(lo..hi))
}

pub fn random_segment<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Segment {
    Segment::new(0, 1, random_point(rng, lo, hi), random_point(rng, lo, hi))
}

/// Random walks starting in a `spread`-sized box.
pub fn random_walks<R: Rng>(rng: &mut R, n: usize, len: usize, spread: f64, step: f64) -> Vec<Trajectory> {
    (0..n)
        .map(|k| {
            let mut p = random_point(rng, 0.0, spread);
            let positions = (0..len)
                .map(|_| {
                    let here = p;
                    p = p + Point2::new(rng.random_range(-step..step), rng.random_range(-step..step));
                    here
                })
                .collect();
            Trajectory::new(k, positions)
        })
        .collect()
}

/// Groups of ten walkers that share a drifting centre, each with a small
/// personal offset: realistic cluster structure at any `n`.
pub fn flocks<R: Rng>(rng: &mut R, n: usize, len: usize) -> Vec<Trajectory> {
    let groups = n.div_ceil(10);
    let centres: Vec<Vec<Point2>> = (0..groups)
        .map(|_| {
            let mut c = random_point(rng, 0.0, 20.0 * groups as f64);
            let v = random_point(rng, -1.0, 1.0);
            (0..len)
                .map(|_| {
                    let here = c;
                    c = c + v + random_point(rng, -0.2, 0.2);
                    here
                })
                .collect()
        })
        .collect();
    (0..n)
        .map(|k| {
            let offset = random_point(rng, -0.6, 0.6);
            let positions = centres[k % groups]
                .iter()
                .map(|&c| c + offset + random_point(rng, -0.05, 0.05))
                .collect();
            Trajectory::new(k, positions)
        })
        .collect()
}

/// Per-interval clustering from scratch: connected components of the
/// eps-graph built with the exact segment distance. Clusters (sorted, with
/// density) and outliers, ordered by smallest member.
pub fn fresh_partition(set: &SegmentSet, eps: f64, min_lns: usize) -> (Vec<(Vec<usize>, DensityClass)>, Vec<usize>) {
    let n = set.len();
    let near: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| i == j || segment_distance(&set.segments[i], &set.segments[j]).unwrap() <= eps)
                .collect()
        })
        .collect();
    let mut comp = vec![usize::MAX; n];
    let mut groups = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut stack = vec![s];
        let mut members = Vec::new();
        comp[s] = id;
        while let Some(u) = stack.pop() {
            members.push(u);
            for v in 0..n {
                if near[u][v] && comp[v] == usize::MAX {
                    comp[v] = id;
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    let mut clusters = Vec::new();
    let mut outliers = Vec::new();
    for g in groups {
        if g.len() == 1 {
            outliers.push(g[0]);
            continue;
        }
        let dense = g.iter().any(|&i| (0..n).filter(|&j| near[i][j]).count() >= min_lns);
        let density = if dense { DensityClass::Dense } else { DensityClass::LowDensity };
        clusters.push((g, density));
    }
    clusters.sort_by_key(|c| c.0[0]);
    (clusters, outliers)
}

/// Whole clustering by brute force: the transitive closure of "co-clustered
/// in every interval of the range".
pub fn closure_whole(history: &ClusterHistory, (s, e): (usize, usize)) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = history.n_trajectories();
    let mut linked: Vec<Vec<bool>> = (0..n)
        .map(|a| (0..n).map(|b| a != b && (s..=e).all(|i| history.same_cluster(i, a, b))).collect())
        .collect();
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                if linked[a][k] && linked[k][b] && a != b {
                    linked[a][b] = true;
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut clusters = Vec::new();
    let mut outliers = Vec::new();
    for a in 0..n {
        if seen[a] {
            continue;
        }
        let mut group: Vec<usize> = (0..n).filter(|&b| b == a || linked[a][b]).collect();
        group.sort_unstable();
        for &g in &group {
            seen[g] = true;
        }
        if group.len() == 1 {
            outliers.push(a);
        } else {
            clusters.push(group);
        }
    }
    (clusters, outliers)
}

/// Uniform random labels in `0..k`.
pub fn random_labels<R: RngCore>(rng: &mut R, n: usize, k: i64) -> Vec<i64> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}
