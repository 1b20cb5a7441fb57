//! Whole-trajectory and sliding-window sub-trajectory clustering on top of a
//! [`ClusterHistory`].

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::segment_clustering::ClusterHistory;

/// A partition of trajectories `0..n` into clusters (two or more members)
/// and outliers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WholeClustering {
    pub n: usize,
    /// Each sorted; ordered by smallest member.
    pub clusters: Vec<Vec<usize>>,
    pub outliers: Vec<usize>,
}

impl WholeClustering {
    /// Normalise arbitrary groups covering `0..n`: singletons become
    /// outliers, members and clusters are sorted.
    pub fn from_groups(n: usize, groups: impl IntoIterator<Item = Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut clusters = Vec::new();
        let mut outliers = Vec::new();
        for mut g in groups {
            g.sort_unstable();
            for &m in &g {
                if m >= n || std::mem::replace(&mut seen[m], true) {
                    return Err(Error::Invariant(format!(
                        "trajectory index {m} out of range or repeated"
                    )));
                }
            }
            match g.len() {
                0 => {}
                1 => outliers.push(g[0]),
                _ => clusters.push(g),
            }
        }
        for (i, s) in seen.iter().enumerate() {
            if !s {
                outliers.push(i);
            }
        }
        clusters.sort_by_key(|c| c[0]);
        outliers.sort_unstable();
        Ok(WholeClustering { n, clusters, outliers })
    }

    /// Cluster index per trajectory, `None` for outliers.
    pub fn labels(&self) -> Vec<Option<usize>> {
        let mut labels = vec![None; self.n];
        for (k, c) in self.clusters.iter().enumerate() {
            for &m in c {
                labels[m] = Some(k);
            }
        }
        labels
    }

    /// Labels with outliers as `-1`.
    pub fn label_vector(&self) -> Vec<i64> {
        self.labels()
            .into_iter()
            .map(|l| l.map_or(-1, |k| k as i64))
            .collect()
    }

    fn canonical(&self) -> (Vec<Vec<usize>>, Vec<usize>) {
        let mut clusters: Vec<Vec<usize>> = self
            .clusters
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort_unstable();
                c
            })
            .collect();
        clusters.sort();
        let mut outliers = self.outliers.clone();
        outliers.sort_unstable();
        (clusters, outliers)
    }
}

fn check_range(history: &ClusterHistory, (start, end): (usize, usize)) -> Result<()> {
    if start < 1 || start > end || end > history.n_intervals() {
        return Err(Error::contract(format!(
            "interval range [{start}, {end}] is empty or outside [1, {}]",
            history.n_intervals()
        )));
    }
    Ok(())
}

/// Trajectories linked iff their segments share a cluster in every interval
/// of `range` (inclusive, 1-based); clusters are the linked components.
///
/// Per-interval co-membership is an equivalence on non-outliers, so the
/// all-interval relation is one as well: a component is exactly the set of
/// trajectories with identical label sequences over the range.
pub fn whole_trajectory_clusters(
    history: &ClusterHistory,
    range: (usize, usize),
) -> Result<WholeClustering> {
    check_range(history, range)?;
    let n = history.n_trajectories();
    let intervals = &history.intervals()[range.0 - 1..range.1];
    let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    let mut singles = Vec::new();
    'traj: for traj in 0..n {
        let mut key = Vec::with_capacity(intervals.len());
        for ic in intervals {
            match ic.label(traj) {
                Some(l) => key.push(l),
                None => {
                    singles.push(vec![traj]);
                    continue 'traj;
                }
            }
        }
        groups.entry(key).or_default().push(traj);
    }
    WholeClustering::from_groups(n, groups.into_values().chain(singles))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowParams {
    pub window: usize,
    pub step: usize,
}

impl WindowParams {
    pub fn new(window: usize, step: usize) -> Result<Self> {
        if window == 0 || step == 0 {
            return Err(Error::Config(format!(
                "window and step must be positive (got W={window}, S={step})"
            )));
        }
        Ok(WindowParams { window, step })
    }
}

/// Window ranges for `m` intervals. Starts advance by `step` while a full
/// window fits; if the last full window stops short of `m`, one clamped
/// window `[next_start, m]` is appended.
pub fn window_schedule(m: usize, params: WindowParams) -> Result<Vec<(usize, usize)>> {
    let WindowParams { window, step } = params;
    if window == 0 || step == 0 || window > m {
        return Err(Error::contract(format!(
            "window schedule needs 1 <= W <= m and S >= 1 (W={window}, S={step}, m={m})"
        )));
    }
    let last_full = m - window + 1;
    let mut out = Vec::new();
    let mut start = 1;
    while start <= last_full {
        out.push((start, start + window - 1));
        start += step;
    }
    if out.last().is_some_and(|&(_, end)| end < m) && start <= m {
        out.push((start, m));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RangedClustering {
    /// Inclusive interval range.
    pub range: (usize, usize),
    pub clustering: WholeClustering,
}

/// Slide a window over the history, cluster each window, and fuse maximal
/// runs of consecutive windows with identical partitions into one range.
pub fn sub_trajectory_clusters(
    history: &ClusterHistory,
    params: WindowParams,
) -> Result<Vec<RangedClustering>> {
    let schedule = window_schedule(history.n_intervals(), params)?;
    let windows: Vec<WholeClustering> = schedule
        .par_iter()
        .map(|&r| whole_trajectory_clusters(history, r))
        .collect::<Result<_>>()?;

    let mut out: Vec<RangedClustering> = Vec::new();
    let mut run_start = 0;
    for k in 1..=windows.len() {
        if k < windows.len() && partitions_equal(&windows[k - 1], &windows[k])? {
            continue;
        }
        out.push(RangedClustering {
            range: (schedule[run_start].0, schedule[k - 1].1),
            clustering: windows[run_start].clone(),
        });
        run_start = k;
    }
    Ok(out)
}

/// Equality as unordered partitions over the same universe.
pub fn partitions_equal(a: &WholeClustering, b: &WholeClustering) -> Result<bool> {
    if a.n != b.n {
        return Err(Error::contract(format!(
            "partitions over different universes ({} vs {})",
            a.n, b.n
        )));
    }
    Ok(a.canonical() == b.canonical())
}
