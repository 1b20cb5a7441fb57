//! The full run: preprocess, segmentize, evolve, whole and/or sub-trajectory
//! clustering, STC, metrics, and output files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::distance_cache::DistanceCache;
use crate::error::{Error, Result};
use crate::evaluation::{self, silhouette, NmiNormalization, SilhouetteScore, TrajDistanceMatrix};
use crate::io;
use crate::segment_clustering::{evolve, ClusterHistory, DbscanParams};
use crate::stability::{self, stabilize, StabilityConfig, StabilityReport};
use crate::trajectory::{preprocess, segmentize, DroppedTrack, RawTrack, TrajId, Trajectory};
use crate::trajectory_clustering::{
    sub_trajectory_clusters, whole_trajectory_clusters, RangedClustering, WholeClustering, WindowParams,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Whole,
    Sub,
    #[default]
    Both,
}

impl Mode {
    fn whole(self) -> bool {
        matches!(self, Mode::Whole | Mode::Both)
    }

    fn sub(self) -> bool {
        matches!(self, Mode::Sub | Mode::Both)
    }
}

/// Window length used when none is given, capped at the interval count.
pub const DEFAULT_WINDOW: usize = 15;
pub const DEFAULT_STEP: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub eps: f64,
    pub min_lns: usize,
    /// Samples per resampled trajectory; median raw length when `None`.
    pub resample_len: Option<usize>,
    /// `None` means `min(DEFAULT_WINDOW, m)`.
    pub window: Option<usize>,
    pub step: usize,
    pub mode: Mode,
    pub stc_enabled: bool,
    pub stability: StabilityConfig,
    pub nmi_normalization: NmiNormalization,
    pub input: PathBuf,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub fast_path: bool,
    /// Add wall-clock timings to the report (which then differs run to run).
    pub record_timings: bool,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, out: impl Into<PathBuf>, eps: f64, min_lns: usize) -> Self {
        PipelineConfig {
            eps,
            min_lns,
            resample_len: None,
            window: None,
            step: DEFAULT_STEP,
            mode: Mode::Both,
            stc_enabled: true,
            stability: StabilityConfig::default(),
            nmi_normalization: NmiNormalization::Arithmetic,
            input: input.into(),
            truth: None,
            out: out.into(),
            seed: 0,
            threads: None,
            fast_path: true,
            record_timings: false,
        }
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<DbscanParams> {
        if self.resample_len.is_some_and(|t| t < 2) {
            return Err(Error::Config("resample length must be at least 2".into()));
        }
        if self.window == Some(0) || self.step == 0 {
            return Err(Error::Config("window and step must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        DbscanParams::new(self.eps, self.min_lns)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SilhouetteSummary {
    pub mean: f64,
    pub stdev: f64,
    /// `mean ± stdev` to three decimals.
    pub display: String,
}

impl From<&SilhouetteScore> for SilhouetteSummary {
    fn from(s: &SilhouetteScore) -> Self {
        SilhouetteSummary {
            mean: s.mean,
            stdev: s.stdev,
            display: s.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WholeSummary {
    pub clusters_before_stc: usize,
    pub outliers_before_stc: usize,
    pub clusters_after_stc: usize,
    pub outliers_after_stc: usize,
    /// `None` when fewer than two clusters.
    pub silhouette_before_stc: Option<SilhouetteSummary>,
    pub silhouette_after_stc: Option<SilhouetteSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubSummary {
    pub window: usize,
    pub step: usize,
    pub windows: usize,
    pub ranges: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub nmi: f64,
    pub nmi_normalization: NmiNormalization,
    pub ari: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
    pub integrals_evaluated: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub n_trajectories: usize,
    pub n_intervals: usize,
    pub resample_len: usize,
    pub eps: f64,
    pub min_lns: usize,
    pub seed: u64,
    pub stc_enabled: bool,
    pub dropped: Vec<DroppedTrack>,
    pub whole: Option<WholeSummary>,
    pub sub: Option<SubSummary>,
    pub metrics: Option<Metrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// Everything a run produces, before it is written out.
#[derive(Debug)]
pub struct PipelineOutput {
    pub ids: Vec<TrajId>,
    pub trajectories: Vec<Trajectory>,
    pub history: ClusterHistory,
    pub whole_before: Option<WholeClustering>,
    pub whole_after: Option<WholeClustering>,
    pub stability: Option<Vec<StabilityReport>>,
    /// Per pre-STC outlier: (trajectory, assigned cluster, nearest-member
    /// distance per interval).
    pub outlier_distances: Vec<(usize, usize, Vec<f64>)>,
    pub sub: Option<Vec<RangedClustering>>,
    pub report: RunReport,
}

struct Clock {
    enabled: bool,
    stages: Vec<(String, f64)>,
    last: Instant,
}

impl Clock {
    fn new(enabled: bool) -> Self {
        Clock {
            enabled,
            stages: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        let secs = (now - self.last).as_secs_f64();
        info!("{stage}: {secs:.3}s");
        if self.enabled {
            self.stages.push((stage.to_string(), secs));
        }
        self.last = now;
    }
}

fn stage_err(stage: &'static str, e: Error) -> Error {
    match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage {
            stage,
            source: Box::new(e),
        },
    }
}

fn staged<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| stage_err(stage, e))
}

/// Run every stage on already-ingested tracks. Does no I/O apart from
/// reading the truth file.
pub fn run_on_tracks(tracks: &[RawTrack], mut dropped: Vec<DroppedTrack>, config: &PipelineConfig) -> Result<PipelineOutput> {
    let params = staged("config", config.validate())?;
    let mut clock = Clock::new(config.record_timings);

    let (trajectories, more) = staged("preprocess", preprocess(tracks, config.resample_len))?;
    dropped.extend(more);
    dropped.sort_by(|a, b| a.traj_id.cmp(&b.traj_id));
    if trajectories.is_empty() {
        return Err(stage_err("preprocess", Error::Data("no usable trajectories".into())));
    }
    let len = trajectories[0].len();
    let ids: Vec<TrajId> = trajectories.iter().map(|t| t.id.clone()).collect();
    clock.lap("preprocess");

    let sets = staged("segmentize", segmentize(&trajectories))?;
    let cache = DistanceCache::new(sets).with_fast_path(config.fast_path);
    let m = cache.n_intervals();
    let history = staged("evolve", evolve(&cache, &params))?;
    clock.lap("split_merge");

    let mut whole_before = None;
    let mut whole_after = None;
    let mut stability_reports = None;
    let mut outlier_distances = Vec::new();
    let mut whole_summary = None;
    if config.mode.whole() {
        let before = staged("whole", whole_trajectory_clusters(&history, (1, m)))?;
        clock.lap("whole");
        let after = if config.stc_enabled {
            let (after, reports) = staged("stc", stabilize(&before, &history, &cache, &params, &config.stability))?;
            for (&o, hosts) in before.outliers.iter().zip(stability::assign_outliers(&before, &cache)) {
                if let Some(&h) = hosts.first() {
                    outlier_distances.push((o, h, stability::nearest_member_distances(o, &before.clusters[h], &cache)));
                }
            }
            stability_reports = Some(reports);
            clock.lap("stc");
            after
        } else {
            before.clone()
        };
        let dmat = TrajDistanceMatrix::from_cache(&cache);
        let sil_before = staged("metrics", silhouette(&before.labels(), &dmat))?;
        let sil_after = staged("metrics", silhouette(&after.labels(), &dmat))?;
        whole_summary = Some(WholeSummary {
            clusters_before_stc: before.clusters.len(),
            outliers_before_stc: before.outliers.len(),
            clusters_after_stc: after.clusters.len(),
            outliers_after_stc: after.outliers.len(),
            silhouette_before_stc: sil_before.as_ref().map(Into::into),
            silhouette_after_stc: sil_after.as_ref().map(Into::into),
        });
        clock.lap("silhouette");
        whole_before = Some(before);
        whole_after = Some(after);
    }

    let mut sub = None;
    let mut sub_summary = None;
    if config.mode.sub() {
        let window = config.window.unwrap_or(DEFAULT_WINDOW.min(m));
        if window > m {
            return Err(stage_err(
                "config",
                Error::Config(format!("window {window} exceeds the {m} available intervals")),
            ));
        }
        let wp = staged("config", WindowParams::new(window, config.step))?;
        let schedule = staged("sub", crate::trajectory_clustering::window_schedule(m, wp))?;
        let ranged = staged("sub", sub_trajectory_clusters(&history, wp))?;
        sub_summary = Some(SubSummary {
            window,
            step: config.step,
            windows: schedule.len(),
            ranges: ranged.len(),
        });
        sub = Some(ranged);
        clock.lap("sub");
    }

    let mut metrics = None;
    if let (Some(truth), Some(after)) = (&config.truth, &whole_after) {
        let truth = staged("metrics", io::read_labels(truth))?;
        let pred = staged("metrics", io::labels_of(&ids, after))?;
        metrics = Some(Metrics {
            nmi: staged("metrics", evaluation::nmi(&pred, &truth, config.nmi_normalization))?,
            nmi_normalization: config.nmi_normalization,
            ari: staged("metrics", evaluation::ari(&pred, &truth))?,
        });
        clock.lap("metrics");
    }

    let timings = config.record_timings.then(|| Timings {
        stages: std::mem::take(&mut clock.stages),
        integrals_evaluated: cache.integrals_evaluated(),
    });
    let report = RunReport {
        n_trajectories: ids.len(),
        n_intervals: m,
        resample_len: len,
        eps: config.eps,
        min_lns: config.min_lns,
        seed: config.seed,
        stc_enabled: config.stc_enabled && config.mode.whole(),
        dropped,
        whole: whole_summary,
        sub: sub_summary,
        metrics,
        timings,
    };
    Ok(PipelineOutput {
        ids,
        trajectories,
        history,
        whole_before,
        whole_after,
        stability: stability_reports,
        outlier_distances,
        sub,
        report,
    })
}

/// Write the output files of a run into `dir`.
pub fn write_outputs(out: &PipelineOutput, dir: &Path) -> Result<()> {
    let w = |r| staged("write", r);
    if let Some(after) = &out.whole_after {
        w(io::write_assignments(&dir.join("assignments.csv"), &out.ids, after))?;
    }
    w(io::write_history(&dir.join("history.jsonl"), &out.ids, &out.history))?;
    if let Some(sub) = &out.sub {
        w(io::write_subclusters(&dir.join("subclusters.json"), &out.ids, sub))?;
    }
    if let Some(reports) = &out.stability {
        w(io::write_stability(&dir.join("stability.json"), &out.ids, reports))?;
        w(io::write_outlier_distances(
            &dir.join("plotdata/outlier_distances.csv"),
            &out.ids,
            &out.outlier_distances,
        ))?;
    }
    w(io::write_membership_grid(&dir.join("plotdata/membership_grid.csv"), &out.ids, &out.history))?;
    w(io::write_json_pretty(&dir.join("report.json"), &out.report))
}

/// Ingest, run and write, using at most `config.threads` worker threads.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport> {
    staged("config", config.validate())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    pool.install(|| {
        let ingested = staged("ingest", io::ingest_csv(&config.input))?;
        let out = run_on_tracks(&ingested.tracks, ingested.dropped, config)?;
        write_outputs(&out, &config.out)?;
        Ok(out.report)
    })
}
