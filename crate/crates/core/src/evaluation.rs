//! Silhouette, NMI and ARI over trajectory-level labels and distances.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance_cache::DistanceCache;
use crate::error::{Error, Result};
use crate::trajectory::TrajId;

/// Trajectory id to integer label; `-1` marks outliers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelVector {
    labels: BTreeMap<TrajId, i64>,
}

impl LabelVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails on a repeated id.
    pub fn insert(&mut self, id: TrajId, label: i64) -> Result<()> {
        if self.labels.contains_key(&id) {
            return Err(Error::Data(format!("label for {id} given twice")));
        }
        self.labels.insert(id, label);
        Ok(())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (TrajId, i64)>) -> Result<Self> {
        let mut out = Self::new();
        for (id, l) in pairs {
            out.insert(id, l)?;
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, id: &TrajId) -> Option<i64> {
        self.labels.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TrajId, i64)> {
        self.labels.iter().map(|(k, &v)| (k, v))
    }

    /// Label sequences of `self` and `other` in common id order. Both must
    /// cover the same ids.
    pub fn align(&self, other: &LabelVector) -> Result<(Vec<i64>, Vec<i64>)> {
        if self.len() != other.len() || self.labels.keys().ne(other.labels.keys()) {
            return Err(Error::Data(
                "predicted and reference labels cover different trajectories".into(),
            ));
        }
        Ok((
            self.labels.values().copied().collect(),
            other.labels.values().copied().collect(),
        ))
    }
}

/// Symmetric trajectory distance matrix, stored as the strict upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajDistanceMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl TrajDistanceMatrix {
    /// Mean per-interval segment distance for every pair, rows in parallel.
    pub fn from_cache(cache: &DistanceCache) -> Self {
        let n = cache.n_trajectories();
        let m = cache.n_intervals();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i + 1..n)
                    .map(|j| (1..=m).map(|k| cache.distance(k, i, j)).sum::<f64>() / m as f64)
                    .collect()
            })
            .collect();
        TrajDistanceMatrix {
            n,
            upper: rows.concat(),
        }
    }

    /// From a full square matrix; the upper triangle is kept.
    pub fn from_square(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::contract("distance matrix is not square"));
            }
            upper.extend_from_slice(&row[i + 1..]);
        }
        Ok(TrajDistanceMatrix { n, upper })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        // Row `lo` starts after the rows above it.
        let row_start = lo * self.n - lo * (lo + 1) / 2;
        self.upper[row_start + (hi - lo - 1)]
    }
}

/// Mean over intervals of the segment distance between two trajectories.
pub fn trajectory_distance(a: usize, b: usize, cache: &DistanceCache) -> f64 {
    let m = cache.n_intervals();
    (1..=m).map(|k| cache.distance(k, a, b)).sum::<f64>() / m as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SilhouetteScore {
    pub mean: f64,
    /// Population standard deviation of the scored trajectories.
    pub stdev: f64,
    /// `None` for outliers.
    pub scores: Vec<Option<f64>>,
}

impl fmt::Display for SilhouetteScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.stdev)
    }
}

/// Silhouette over non-outlier trajectories (`labels[i] = None` for
/// outliers). `None` when fewer than two clusters are present.
pub fn silhouette(labels: &[Option<usize>], dmat: &TrajDistanceMatrix) -> Result<Option<SilhouetteScore>> {
    if labels.len() != dmat.len() {
        return Err(Error::contract(format!(
            "{} labels for a {}-trajectory distance matrix",
            labels.len(),
            dmat.len()
        )));
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = l {
            clusters.entry(*l).or_default().push(i);
        }
    }
    if clusters.len() < 2 {
        return Ok(None);
    }

    let mean_to = |i: usize, members: &[usize]| -> f64 {
        let (sum, cnt) = members
            .iter()
            .filter(|&&j| j != i)
            .fold((0.0, 0usize), |(s, c), &j| (s + dmat.get(i, j), c + 1));
        sum / cnt as f64
    };

    let scores: Vec<Option<f64>> = labels
        .par_iter()
        .enumerate()
        .map(|(i, l)| {
            let own = &clusters[l.as_ref()?];
            if own.len() == 1 {
                return Some(0.0);
            }
            let a = mean_to(i, own);
            let b = clusters
                .iter()
                .filter(|(k, _)| Some(**k) != *l)
                .map(|(_, c)| mean_to(i, c))
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            Some(if denom > 0.0 { (b - a) / denom } else { 0.0 })
        })
        .collect();

    let scored: Vec<f64> = scores.iter().flatten().copied().collect();
    let k = scored.len() as f64;
    let mean = scored.iter().sum::<f64>() / k;
    let var = scored.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / k;
    Ok(Some(SilhouetteScore {
        mean,
        stdev: var.sqrt(),
        scores,
    }))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNormalization {
    /// Mutual information over the arithmetic mean of the two entropies.
    #[default]
    Arithmetic,
    Max,
}

struct Contingency {
    n: f64,
    cells: Vec<f64>,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

fn contingency(a: &[i64], b: &[i64]) -> Contingency {
    fn index(labels: &[i64]) -> (Vec<usize>, usize) {
        let mut ids = HashMap::new();
        let idx = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(*l).or_insert(next)
            })
            .collect();
        (idx, ids.len())
    }
    let (ia, ka) = index(a);
    let (ib, kb) = index(b);
    let mut cells = vec![0.0; ka * kb];
    let mut rows = vec![0.0; ka];
    let mut cols = vec![0.0; kb];
    for (&r, &c) in ia.iter().zip(&ib) {
        cells[r * kb + c] += 1.0;
        rows[r] += 1.0;
        cols[c] += 1.0;
    }
    Contingency {
        n: a.len() as f64,
        cells,
        rows,
        cols,
    }
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

fn check_pair(pred: &[i64], truth: &[i64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::contract(format!(
            "label sequences of different lengths ({} vs {})",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Normalised mutual information of two aligned label sequences. `-1` is an
/// ordinary class here. Two single-class sequences score 1.
pub fn nmi_labels(pred: &[i64], truth: &[i64], norm: NmiNormalization) -> Result<f64> {
    check_pair(pred, truth)?;
    let t = contingency(pred, truth);
    if t.rows.len() <= 1 && t.cols.len() <= 1 {
        return Ok(1.0);
    }
    let hu = entropy(&t.rows, t.n);
    let hv = entropy(&t.cols, t.n);
    let kb = t.cols.len();
    let mut mi = 0.0;
    for (r, &row) in t.rows.iter().enumerate() {
        for (c, &col) in t.cols.iter().enumerate() {
            let nij = t.cells[r * kb + c];
            if nij > 0.0 {
                mi += nij / t.n * (t.n * nij / (row * col)).ln();
            }
        }
    }
    let denom = match norm {
        NmiNormalization::Arithmetic => (hu + hv) / 2.0,
        NmiNormalization::Max => hu.max(hv),
    };
    if denom <= 0.0 {
        return Ok(1.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

pub fn nmi(pred: &LabelVector, truth: &LabelVector, norm: NmiNormalization) -> Result<f64> {
    let (p, t) = pred.align(truth)?;
    nmi_labels(&p, &t, norm)
}

fn comb2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index of two aligned label sequences. When the chance
/// correction is degenerate (both partitions trivial) the result is 1.
pub fn ari_labels(pred: &[i64], truth: &[i64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let t = contingency(pred, truth);
    let index: f64 = t.cells.iter().map(|&c| comb2(c)).sum();
    let a: f64 = t.rows.iter().map(|&c| comb2(c)).sum();
    let b: f64 = t.cols.iter().map(|&c| comb2(c)).sum();
    let total = comb2(t.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = a * b / total;
    let max = (a + b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

pub fn ari(pred: &LabelVector, truth: &LabelVector) -> Result<f64> {
    let (p, t) = pred.align(truth)?;
    ari_labels(&p, &t)
}
