//! Stable trajectory clustering: decide per outlier whether its deviation
//! from the nearest cluster is transient (absorb) or sustained (keep out).
//!
//! For a candidate `x` and cluster member `c`, the per-interval distance is
//! reduced by `delta`, the excess of `x`'s nearest cluster segment over eps.
//! `mu_min` is the smallest per-pair maximum of those reduced distances, and
//! `x` joins the cluster when its raw distances to some member fall below
//! `mu_min` by more in total (LMD) than they rise above it (RMD).

use std::cmp::Ordering;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance_cache::DistanceCache;
use crate::error::{Error, Result};
use crate::evaluation::{silhouette, TrajDistanceMatrix};
use crate::segment_clustering::{ClusterHistory, DbscanParams};
use crate::trajectory_clustering::WholeClustering;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeviationRecord {
    pub interval: usize,
    /// Candidate and member share a segment cluster in this interval.
    pub in_cluster: bool,
    /// Adjusted distance.
    pub distance: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationProfile {
    pub records: Vec<DeviationRecord>,
}

/// Per-interval adjusted distances from `candidate` to `member` of `cluster`.
pub fn adjusted_distance_series(
    candidate: usize,
    member: usize,
    cluster: &[usize],
    history: &ClusterHistory,
    cache: &DistanceCache,
    eps: f64,
) -> Result<DeviationProfile> {
    if !cluster.contains(&member) {
        return Err(Error::contract(format!(
            "trajectory {member} is not a member of the cluster under evaluation"
        )));
    }
    let records = (1..=cache.n_intervals())
        .map(|i| {
            let pool = cache.pool(i);
            let raw = pool.distance(candidate, member);
            if history.same_cluster(i, candidate, member) {
                return DeviationRecord {
                    interval: i,
                    in_cluster: true,
                    distance: raw,
                    delta: 0.0,
                };
            }
            let nearest = cluster
                .iter()
                .map(|&c| pool.distance(candidate, c))
                .fold(f64::INFINITY, f64::min);
            let delta = (nearest - eps).max(0.0);
            DeviationRecord {
                interval: i,
                in_cluster: false,
                distance: (raw - delta).max(0.0),
                delta,
            }
        })
        .collect();
    Ok(DeviationProfile { records })
}

/// Largest adjusted distance of a profile.
pub fn pair_max(profile: &DeviationProfile) -> Result<f64> {
    profile
        .records
        .iter()
        .map(|r| r.distance)
        .reduce(f64::max)
        .ok_or_else(|| Error::contract("pair_max of an empty profile"))
}

/// Smallest `pair_max` over all (candidate, member) pairs; `None` when the
/// cluster has no candidates.
pub fn mu_min(
    cluster: &[usize],
    candidates: &[usize],
    history: &ClusterHistory,
    cache: &DistanceCache,
    eps: f64,
) -> Result<Option<f64>> {
    let pairs: Vec<(usize, usize)> = candidates
        .iter()
        .flat_map(|&x| cluster.iter().map(move |&c| (x, c)))
        .collect();
    let maxima: Vec<f64> = pairs
        .par_iter()
        .map(|&(x, c)| pair_max(&adjusted_distance_series(x, c, cluster, history, cache, eps)?))
        .collect::<Result<_>>()?;
    Ok(maxima.into_iter().reduce(f64::min))
}

/// Sums of raw-distance shortfall below (LMD) and excess above (RMD) `mu`.
/// Distances equal to `mu` count toward neither.
pub fn lmd_rmd(candidate: usize, member: usize, mu: f64, cache: &DistanceCache) -> Result<(f64, f64)> {
    if !mu.is_finite() {
        return Err(Error::contract(format!("mu must be finite, got {mu}")));
    }
    let mut lmd = 0.0;
    let mut rmd = 0.0;
    for i in 1..=cache.n_intervals() {
        let d = cache.distance(i, candidate, member);
        match d.partial_cmp(&mu) {
            Some(Ordering::Less) => lmd += mu - d,
            Some(Ordering::Greater) => rmd += d - mu,
            _ => {}
        }
    }
    Ok((lmd, rmd))
}

/// `(1/n) Σ |center - x|`. Reported alongside decisions, never used by them.
pub fn mean_absolute_deviation(values: &[f64], center: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|v| (center - v).abs()).sum::<f64>() / values.len() as f64
}

/// Per interval, the distance from `traj` to its nearest segment in `cluster`.
pub fn nearest_member_distances(traj: usize, cluster: &[usize], cache: &DistanceCache) -> Vec<f64> {
    (1..=cache.n_intervals())
        .map(|i| {
            let pool = cache.pool(i);
            cluster
                .iter()
                .map(|&c| pool.distance(traj, c))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Indices of the clusters (other than `exclude`) that minimise the mean
/// nearest-member distance from `traj`. Usually one; several on exact ties.
fn nearest_clusters(
    traj: usize,
    clusters: &[Vec<usize>],
    exclude: Option<usize>,
    cache: &DistanceCache,
) -> Vec<usize> {
    let costs: Vec<(usize, f64)> = clusters
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != exclude)
        .map(|(k, c)| (k, mean(&nearest_member_distances(traj, c, cache))))
        .collect();
    let best = costs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    costs.into_iter().filter(|c| c.1 == best).map(|c| c.0).collect()
}

/// Candidate cluster indices for every outlier of `whole`, in outlier order.
pub fn assign_outliers(whole: &WholeClustering, cache: &DistanceCache) -> Vec<Vec<usize>> {
    whole
        .outliers
        .par_iter()
        .map(|&o| nearest_clusters(o, &whole.clusters, None, cache))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMinScope {
    #[default]
    PerCluster,
    /// One threshold shared by all clusters.
    Global,
}

/// Which trajectories a cluster may absorb.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    /// Outliers only. Cluster count never changes.
    #[default]
    Outliers,
    /// Outliers plus members of other clusters, so clusters that split off
    /// transiently can be re-joined. Absorbing a member merges its cluster
    /// into the host.
    OutliersAndSplitClusters,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StabilityConfig {
    pub mu_min_scope: MuMinScope,
    pub candidates: CandidateMode,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateDecision {
    pub traj: usize,
    /// Cluster the candidate belonged to before STC; `None` for outliers.
    pub source_cluster: Option<usize>,
    /// First member satisfying LMD > RMD, else the member with the largest
    /// LMD − RMD.
    pub best_member: usize,
    pub lmd: f64,
    pub rmd: f64,
    pub absorbed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Index into the pre-STC clusters.
    pub cluster_id: usize,
    /// `None` when the cluster had no candidates.
    pub mu_min: Option<f64>,
    pub candidates: Vec<CandidateDecision>,
}

struct Candidate {
    traj: usize,
    source: Option<usize>,
}

fn decide(
    cand: &Candidate,
    cluster: &[usize],
    mu: f64,
    cache: &DistanceCache,
) -> Result<CandidateDecision> {
    let mut best: Option<(usize, f64, f64)> = None;
    for &c in cluster {
        let (lmd, rmd) = lmd_rmd(cand.traj, c, mu, cache)?;
        if lmd > rmd {
            best = Some((c, lmd, rmd));
            return Ok(decision(cand, best, true));
        }
        if best.is_none_or(|(_, l, r)| lmd - rmd > l - r) {
            best = Some((c, lmd, rmd));
        }
    }
    Ok(decision(cand, best, false))
}

fn decision(cand: &Candidate, best: Option<(usize, f64, f64)>, absorbed: bool) -> CandidateDecision {
    let (best_member, lmd, rmd) = best.expect("clusters have at least two members");
    CandidateDecision {
        traj: cand.traj,
        source_cluster: cand.source,
        best_member,
        lmd,
        rmd,
        absorbed,
    }
}

/// Run STC over `whole`. Members are fixed at their pre-STC clusters while
/// decisions are made; absorptions are then committed in ascending
/// trajectory order. An outlier absorbable by several tied clusters goes
/// where the resulting silhouette is highest.
pub fn stabilize(
    whole: &WholeClustering,
    history: &ClusterHistory,
    cache: &DistanceCache,
    params: &DbscanParams,
    config: &StabilityConfig,
) -> Result<(WholeClustering, Vec<StabilityReport>)> {
    let n = whole.n;
    if n != history.n_trajectories() || n != cache.n_trajectories() {
        return Err(Error::contract("clustering, history and cache disagree on trajectory count"));
    }
    let k = whole.clusters.len();
    let empty_reports = || {
        (0..k)
            .map(|c| StabilityReport {
                cluster_id: c,
                mu_min: None,
                candidates: Vec::new(),
            })
            .collect::<Vec<_>>()
    };
    let split_mode = config.candidates == CandidateMode::OutliersAndSplitClusters;
    if k == 0 || (whole.outliers.is_empty() && !(split_mode && k > 1)) {
        return Ok((whole.clone(), empty_reports()));
    }

    let mut per_cluster: Vec<Vec<Candidate>> = (0..k).map(|_| Vec::new()).collect();
    for (&o, hosts) in whole.outliers.iter().zip(assign_outliers(whole, cache)) {
        for h in hosts {
            per_cluster[h].push(Candidate { traj: o, source: None });
        }
    }
    if split_mode && k > 1 {
        let moves: Vec<(usize, usize, Vec<usize>)> = whole
            .clusters
            .par_iter()
            .enumerate()
            .flat_map_iter(|(src, c)| {
                c.iter()
                    .map(move |&x| (x, src, nearest_clusters(x, &whole.clusters, Some(src), cache)))
            })
            .collect();
        for (x, src, hosts) in moves {
            for h in hosts {
                per_cluster[h].push(Candidate { traj: x, source: Some(src) });
            }
        }
    }
    for cands in &mut per_cluster {
        cands.sort_by_key(|c| c.traj);
    }

    let mut mus: Vec<Option<f64>> = Vec::with_capacity(k);
    for (c, cands) in whole.clusters.iter().zip(&per_cluster) {
        let trajs: Vec<usize> = cands.iter().map(|c| c.traj).collect();
        mus.push(mu_min(c, &trajs, history, cache, params.eps)?);
    }
    if config.mu_min_scope == MuMinScope::Global {
        let global = mus.iter().flatten().copied().reduce(f64::min);
        for mu in mus.iter_mut().filter(|m| m.is_some()) {
            *mu = global;
        }
    }

    let mut reports = Vec::with_capacity(k);
    for (cid, (cluster, cands)) in whole.clusters.iter().zip(&per_cluster).enumerate() {
        let candidates = match mus[cid] {
            Some(mu) => cands
                .par_iter()
                .map(|cand| decide(cand, cluster, mu, cache))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        reports.push(StabilityReport {
            cluster_id: cid,
            mu_min: mus[cid],
            candidates,
        });
    }

    // Commit.
    let mut uf = UnionFind::<usize>::new(n);
    for c in &whole.clusters {
        for &m in &c[1..] {
            uf.union(c[0], m);
        }
    }
    let mut outlier_hosts: Vec<(usize, Vec<usize>)> = Vec::new();
    for r in &reports {
        for d in r.candidates.iter().filter(|d| d.absorbed) {
            match d.source_cluster {
                Some(_) => {
                    uf.union(d.traj, whole.clusters[r.cluster_id][0]);
                }
                None => match outlier_hosts.iter_mut().find(|(t, _)| *t == d.traj) {
                    Some((_, hosts)) => hosts.push(r.cluster_id),
                    None => outlier_hosts.push((d.traj, vec![r.cluster_id])),
                },
            }
        }
    }
    outlier_hosts.sort_by_key(|(t, _)| *t);

    let mut dmat: Option<TrajDistanceMatrix> = None;
    for (traj, hosts) in outlier_hosts {
        let host = if hosts.len() == 1 {
            hosts[0]
        } else {
            let dmat = dmat.get_or_insert_with(|| TrajDistanceMatrix::from_cache(cache));
            arbitrate(traj, &hosts, &mut uf, whole, dmat)?
        };
        uf.union(traj, whole.clusters[host][0]);
    }

    let labels = uf.into_labeling();
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (t, root) in labels.into_iter().enumerate() {
        groups.entry(root).or_default().push(t);
    }
    let result = WholeClustering::from_groups(n, groups.into_values())?;
    if !split_mode && result.clusters.len() != k {
        return Err(Error::Invariant(format!(
            "STC changed the cluster count from {k} to {}",
            result.clusters.len()
        )));
    }
    Ok((result, reports))
}

/// Host with the highest silhouette after placing `traj` there; ties and
/// undefined scores fall back to the lowest cluster id.
fn arbitrate(
    traj: usize,
    hosts: &[usize],
    uf: &mut UnionFind<usize>,
    whole: &WholeClustering,
    dmat: &TrajDistanceMatrix,
) -> Result<usize> {
    let mut best = (hosts[0], f64::NEG_INFINITY);
    for &h in hosts {
        let anchor = uf.find_mut(whole.clusters[h][0]);
        let roots: Vec<usize> = (0..whole.n)
            .map(|t| if t == traj { anchor } else { uf.find_mut(t) })
            .collect();
        let mut sizes = std::collections::HashMap::new();
        for &r in &roots {
            *sizes.entry(r).or_insert(0usize) += 1;
        }
        let labels: Vec<Option<usize>> = roots
            .iter()
            .map(|r| (sizes[r] > 1).then_some(*r))
            .collect();
        let score = silhouette(&labels, dmat)?.map_or(f64::NEG_INFINITY, |s| s.mean);
        if score > best.1 {
            best = (h, score);
        }
    }
    Ok(best.0)
}
