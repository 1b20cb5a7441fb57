//! Per-interval clustering of segments.
//!
//! Interval 1 is clustered from scratch. Every later interval starts from the
//! previous interval's clusters: each multi-member cluster is split into the
//! connected components of its members' ε-graph, previous outliers enter as
//! singletons, and candidates are merged pairwise until no pair has a cross
//! distance within ε. Membership is therefore the ε-graph component; the
//! dense/low-density class is a label derived from core-segment presence.

use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::distance_cache::{DistanceCache, SegmentPool};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityClass {
    Dense,
    LowDensity,
}

/// Per-segment role within one interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentRole {
    Core,
    Border,
    Outlier,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_lns: usize,
}

impl DbscanParams {
    pub fn new(eps: f64, min_lns: usize) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::Config(format!("eps must be finite and > 0, got {eps}")));
        }
        if min_lns == 0 {
            return Err(Error::Config("min_lns must be >= 1".into()));
        }
        Ok(DbscanParams { eps, min_lns })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentCluster {
    /// Sorted trajectory indices.
    pub members: Vec<usize>,
    pub density: DensityClass,
}

impl SegmentCluster {
    pub fn new(mut members: Vec<usize>, density: DensityClass) -> Self {
        members.sort_unstable();
        members.dedup();
        SegmentCluster { members, density }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn first(&self) -> usize {
        self.members[0]
    }
}

/// The clustering of one interval. Clusters have at least two members and
/// are ordered by their smallest member; everything else is an outlier.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalClustering {
    pub interval: usize,
    pub clusters: Vec<SegmentCluster>,
    pub outliers: Vec<usize>,
    labels: Vec<Option<usize>>,
}

impl IntervalClustering {
    /// Build from groups that partition `0..n`. Singleton groups become
    /// outliers.
    pub fn from_groups(interval: usize, n: usize, groups: Vec<SegmentCluster>) -> Result<Self> {
        let mut clusters = Vec::new();
        let mut outliers = Vec::new();
        let mut labels = vec![None; n];
        let mut seen = vec![false; n];
        for g in groups {
            for &m in &g.members {
                if m >= n || std::mem::replace(&mut seen[m], true) {
                    return Err(Error::Invariant(format!(
                        "interval {interval}: trajectory index {m} out of range or repeated"
                    )));
                }
            }
            match g.len() {
                0 => {}
                1 => outliers.push(g.members[0]),
                _ => clusters.push(g),
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Invariant(format!(
                "interval {interval}: trajectory index {missing} unassigned"
            )));
        }
        clusters.sort_by_key(SegmentCluster::first);
        outliers.sort_unstable();
        for (k, c) in clusters.iter().enumerate() {
            for &m in &c.members {
                labels[m] = Some(k);
            }
        }
        Ok(IntervalClustering {
            interval,
            clusters,
            outliers,
            labels,
        })
    }

    /// Index of the cluster holding `traj`, or `None` for an outlier.
    pub fn label(&self, traj: usize) -> Option<usize> {
        self.labels[traj]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn same_cluster(&self, a: usize, b: usize) -> bool {
        matches!((self.labels[a], self.labels[b]), (Some(x), Some(y)) if x == y)
    }
}

/// Interval clusterings `1..=m`, in order.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterHistory {
    n: usize,
    intervals: Vec<IntervalClustering>,
}

impl ClusterHistory {
    pub fn new(n: usize, intervals: Vec<IntervalClustering>) -> Result<Self> {
        for (k, ic) in intervals.iter().enumerate() {
            if ic.interval != k + 1 || ic.labels.len() != n {
                return Err(Error::Invariant(format!(
                    "history entry {k} has interval {} over {} trajectories",
                    ic.interval,
                    ic.labels.len()
                )));
            }
        }
        Ok(ClusterHistory { n, intervals })
    }

    pub fn n_trajectories(&self) -> usize {
        self.n
    }

    /// `m`.
    pub fn n_intervals(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[IntervalClustering] {
        &self.intervals
    }

    /// 1-based.
    pub fn interval(&self, interval: usize) -> &IntervalClustering {
        &self.intervals[interval - 1]
    }

    pub fn same_cluster(&self, interval: usize, a: usize, b: usize) -> bool {
        self.interval(interval).same_cluster(a, b)
    }
}

/// Trajectories whose segment lies within eps of `traj`'s, itself included.
pub fn neighborhood(traj: usize, pool: &SegmentPool<'_>, params: &DbscanParams) -> Vec<usize> {
    (0..pool.len())
        .filter(|&j| pool.within(traj, j, params.eps))
        .collect()
}

pub fn is_core(traj: usize, pool: &SegmentPool<'_>, params: &DbscanParams) -> bool {
    neighbor_count_within(traj, 0..pool.len(), pool, params) >= params.min_lns
}

fn neighbor_count_within(
    traj: usize,
    members: impl IntoIterator<Item = usize>,
    pool: &SegmentPool<'_>,
    params: &DbscanParams,
) -> usize {
    members
        .into_iter()
        .filter(|&j| pool.within(traj, j, params.eps))
        .count()
}

/// Dense iff some member is core when neighbourhoods are restricted to
/// `members`.
pub fn density_within(members: &[usize], pool: &SegmentPool<'_>, params: &DbscanParams) -> DensityClass {
    if members.len() >= params.min_lns
        && members.iter().any(|&i| {
            neighbor_count_within(i, members.iter().copied(), pool, params) >= params.min_lns
        })
    {
        DensityClass::Dense
    } else {
        DensityClass::LowDensity
    }
}

/// Core / border / outlier role of every segment in the interval.
pub fn segment_roles(pool: &SegmentPool<'_>, params: &DbscanParams) -> Vec<SegmentRole> {
    let neighbors: Vec<Vec<usize>> = (0..pool.len()).map(|i| neighborhood(i, pool, params)).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_lns).collect();
    (0..pool.len())
        .map(|i| {
            if core[i] {
                SegmentRole::Core
            } else if neighbors[i].iter().any(|&j| core[j]) {
                SegmentRole::Border
            } else {
                SegmentRole::Outlier
            }
        })
        .collect()
}

/// Connected components of the ε-graph over `members`, ordered by smallest
/// member, each sorted.
fn components(members: &[usize], pool: &SegmentPool<'_>, params: &DbscanParams) -> Vec<Vec<usize>> {
    let k = members.len();
    let mut uf = UnionFind::<usize>::new(k);
    for a in 0..k {
        for b in (a + 1)..k {
            if uf.find(a) != uf.find(b) && pool.within(members[a], members[b], params.eps) {
                uf.union(a, b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: Vec<Option<usize>> = vec![None; k];
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&a| members[a]);
    for a in order {
        let root = uf.find(a);
        let g = *slot[root].get_or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(members[a]);
    }
    groups
}

/// Fresh clustering of one interval: ε-graph components, singletons as
/// outliers.
pub fn dbscan_initial(pool: &SegmentPool<'_>, params: &DbscanParams) -> Result<IntervalClustering> {
    if pool.is_empty() {
        return Err(Error::contract("cannot cluster an empty segment pool"));
    }
    let all: Vec<usize> = (0..pool.len()).collect();
    let groups = components(&all, pool, params)
        .into_iter()
        .map(|g| {
            let d = density_within(&g, pool, params);
            SegmentCluster::new(g, d)
        })
        .collect();
    IntervalClustering::from_groups(pool.interval(), pool.len(), groups)
}

/// Split a previous cluster's members by current-interval connectivity.
/// Singletons come back as low-density single-member clusters.
pub fn split(
    prev_members: &[usize],
    pool: &SegmentPool<'_>,
    params: &DbscanParams,
) -> Result<Vec<SegmentCluster>> {
    if prev_members.is_empty() {
        return Err(Error::contract("split needs a non-empty member set"));
    }
    let mut members = prev_members.to_vec();
    members.sort_unstable();
    members.dedup();
    Ok(components(&members, pool, params)
        .into_iter()
        .map(|g| {
            let d = if g.len() == 1 {
                DensityClass::LowDensity
            } else {
                density_within(&g, pool, params)
            };
            SegmentCluster::new(g, d)
        })
        .collect())
}

#[derive(Clone, Copy, Debug)]
struct BBox {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
}

impl BBox {
    fn of(members: &[usize], pool: &SegmentPool<'_>) -> Self {
        let mut b = BBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for &m in members {
            let s = pool.segment(m);
            for p in [s.start, s.end] {
                b.min_x = b.min_x.min(p.x);
                b.min_y = b.min_y.min(p.y);
                b.max_x = b.max_x.max(p.x);
                b.max_y = b.max_y.max(p.y);
            }
        }
        b
    }

    fn inflated_overlap(&self, other: &BBox, eps: f64) -> bool {
        self.min_x - eps <= other.max_x + eps
            && other.min_x - eps <= self.max_x + eps
            && self.min_y - eps <= other.max_y + eps
            && other.min_y - eps <= self.max_y + eps
    }
}

/// Bounding-box prefilter: false only when no cross pair can be within eps.
pub fn is_mergeable(
    c1: &SegmentCluster,
    c2: &SegmentCluster,
    pool: &SegmentPool<'_>,
    params: &DbscanParams,
) -> bool {
    BBox::of(&c1.members, pool).inflated_overlap(&BBox::of(&c2.members, pool), params.eps)
}

fn linked(a: &[usize], b: &[usize], pool: &SegmentPool<'_>, params: &DbscanParams) -> bool {
    a.iter()
        .any(|&i| b.iter().any(|&j| pool.within(i, j, params.eps)))
}

fn union_members(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u = Vec::with_capacity(a.len() + b.len());
    u.extend_from_slice(a);
    u.extend_from_slice(b);
    u.sort_unstable();
    u
}

/// Union of two clusters if some cross pair is within eps, with density
/// recomputed over the union.
pub fn merge(
    c1: &SegmentCluster,
    c2: &SegmentCluster,
    pool: &SegmentPool<'_>,
    params: &DbscanParams,
) -> Option<SegmentCluster> {
    if !linked(&c1.members, &c2.members, pool, params) {
        return None;
    }
    let members = union_members(&c1.members, &c2.members);
    let density = density_within(&members, pool, params);
    Some(SegmentCluster { members, density })
}

fn advance(
    prev: &IntervalClustering,
    pool: &SegmentPool<'_>,
    params: &DbscanParams,
) -> Result<IntervalClustering> {
    let mut candidates: Vec<Vec<usize>> = Vec::with_capacity(prev.clusters.len() + prev.outliers.len());
    for c in &prev.clusters {
        candidates.extend(components(&c.members, pool, params));
    }
    candidates.extend(prev.outliers.iter().map(|&o| vec![o]));

    // Merge to a fixed point. Density labels are only needed for the final
    // groups, so they are computed once at the end.
    let mut boxes: Vec<BBox>;
    loop {
        candidates.sort_by_key(|g| g[0]);
        boxes = candidates.iter().map(|g| BBox::of(g, pool)).collect();
        let mut changed = false;
        let mut i = 0;
        while i < candidates.len() {
            let mut j = i + 1;
            while j < candidates.len() {
                if boxes[i].inflated_overlap(&boxes[j], params.eps)
                    && linked(&candidates[i], &candidates[j], pool, params)
                {
                    let other = candidates.remove(j);
                    boxes.remove(j);
                    candidates[i] = union_members(&candidates[i], &other);
                    boxes[i] = BBox::of(&candidates[i], pool);
                    changed = true;
                    j = i + 1;
                    continue;
                }
                j += 1;
            }
            i += 1;
        }
        if !changed {
            break;
        }
    }

    let groups = candidates
        .into_iter()
        .map(|g| {
            let d = density_within(&g, pool, params);
            SegmentCluster { members: g, density: d }
        })
        .collect();
    IntervalClustering::from_groups(pool.interval(), pool.len(), groups)
}

/// Cluster every interval, carrying clusters forward through split and
/// merge events.
pub fn evolve(cache: &DistanceCache, params: &DbscanParams) -> Result<ClusterHistory> {
    let m = cache.n_intervals();
    if m == 0 {
        return Err(Error::contract("evolve needs at least one interval"));
    }
    let mut intervals = Vec::with_capacity(m);
    let mut current = dbscan_initial(&cache.pool(1), params)?;
    for t in 2..=m {
        let next = advance(&current, &cache.pool(t), params)?;
        intervals.push(std::mem::replace(&mut current, next));
    }
    intervals.push(current);
    ClusterHistory::new(cache.n_trajectories(), intervals)
}
