//! CSV ingestion and the run's output files.
//!
//! Every float written by this module uses 17 significant digits
//! (`{:.16e}`), so results compare exactly across implementations.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::evaluation::LabelVector;
use crate::segment_clustering::{ClusterHistory, DensityClass};
use crate::trajectory::{DroppedTrack, RawTrack, Sample, TrajId, Trajectory};
use crate::trajectory_clustering::{RangedClustering, WholeClustering};

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// JSON formatter writing floats via [`fmt_f64`]; non-finite values become
/// `null`.
pub struct Sig17<F = serde_json::ser::CompactFormatter>(F);

macro_rules! delegate {
    ($($name:ident),*) => {$(
        fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.0.$name(w)
        }
    )*};
}

macro_rules! delegate_first {
    ($($name:ident),*) => {$(
        fn $name<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
            self.0.$name(w, first)
        }
    )*};
}

impl<F: Formatter> Formatter for Sig17<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            w.write_all(fmt_f64(v).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    delegate!(begin_array, end_array, end_array_value, begin_object, end_object, begin_object_value, end_object_value);
    delegate_first!(begin_array_value, begin_object_key);
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(serde_json::ser::CompactFormatter));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Invariant(format!("serialisation failed: {e}")))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Invariant(format!("serialisation failed: {e}")))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(format!("writing {}", path.display()), e),
        other => Error::Invariant(format!("csv output to {}: {other:?}", path.display())),
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn open_csv(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(rdr)
}

fn records<'a>(
    path: &'a Path,
    rdr: &'a mut csv::Reader<File>,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + 'a {
    rdr.records().map(move |r| {
        let rec = r.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        Ok((line, rec))
    })
}

fn number(path: &Path, line: u64, field: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(path, line, format!("{field} is not a finite number: `{raw}`")))
}

/// Parsed input: valid tracks plus tracks too short to use.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ingested {
    pub tracks: Vec<RawTrack>,
    pub dropped: Vec<DroppedTrack>,
}

/// Read `traj_id,t,x,y` rows, group them by id and sort each track by t.
pub fn ingest_csv(path: &Path) -> Result<Ingested> {
    let mut rdr = open_csv(path, &["traj_id", "t", "x", "y"])?;
    let mut grouped: BTreeMap<TrajId, Vec<Sample>> = BTreeMap::new();
    for item in records(path, &mut rdr) {
        let (line, rec) = item?;
        if rec.len() != 4 {
            return Err(parse_err(path, line, format!("expected 4 fields, found {}", rec.len())));
        }
        if rec[0].is_empty() {
            return Err(parse_err(path, line, "empty traj_id"));
        }
        let t = number(path, line, "t", &rec[1])?;
        let x = number(path, line, "x", &rec[2])?;
        let y = number(path, line, "y", &rec[3])?;
        grouped.entry(TrajId::new(&rec[0])).or_default().push(Sample::new(t, x, y));
    }
    if grouped.is_empty() {
        return Err(Error::Data(format!("{} contains no samples", path.display())));
    }
    let mut out = Ingested::default();
    for (id, mut samples) in grouped {
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        if let Some(w) = samples.windows(2).find(|w| w[0].t == w[1].t) {
            return Err(Error::Data(format!("track {id} has duplicate timestamp t={}", w[0].t)));
        }
        if samples.len() < 2 {
            warn!("dropping track {id}: a single sample");
            out.dropped.push(DroppedTrack {
                traj_id: id,
                reason: "a single sample".into(),
            });
            continue;
        }
        out.tracks.push(RawTrack::new(id, samples)?);
    }
    Ok(out)
}

/// Write trajectories as `traj_id,t,x,y` with `t` the sample index.
pub fn write_trajectories_csv(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["traj_id", "t", "x", "y"]).map_err(|e| csv_err(path, e))?;
    for t in trajectories {
        for (k, p) in t.positions.iter().enumerate() {
            w.write_record([t.id.as_str(), &k.to_string(), &fmt_f64(p.x), &fmt_f64(p.y)])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Read a `traj_id,cluster_id` file (ground truth or assignments).
pub fn read_labels(path: &Path) -> Result<LabelVector> {
    let mut rdr = open_csv(path, &["traj_id", "cluster_id"])?;
    let mut out = LabelVector::new();
    for item in records(path, &mut rdr) {
        let (line, rec) = item?;
        if rec.len() != 2 {
            return Err(parse_err(path, line, format!("expected 2 fields, found {}", rec.len())));
        }
        let label: i64 = rec[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("cluster_id is not an integer: `{}`", &rec[1])))?;
        out.insert(TrajId::new(&rec[0]), label)?;
    }
    Ok(out)
}

/// Label vector of a whole clustering over `ids` (index order).
pub fn labels_of(ids: &[TrajId], whole: &WholeClustering) -> Result<LabelVector> {
    LabelVector::from_pairs(ids.iter().cloned().zip(whole.label_vector()))
}

pub fn write_assignments(path: &Path, ids: &[TrajId], whole: &WholeClustering) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["traj_id", "cluster_id"]).map_err(|e| csv_err(path, e))?;
    for (id, l) in ids.iter().zip(whole.label_vector()) {
        w.write_record([id.as_str(), &l.to_string()]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn names(ids: &[TrajId], idx: &[usize]) -> Vec<TrajId> {
    idx.iter().map(|&i| ids[i].clone()).collect()
}

#[derive(Serialize)]
struct HistoryCluster {
    id: usize,
    density: DensityClass,
    members: Vec<TrajId>,
}

#[derive(Serialize)]
struct HistoryLine {
    interval: usize,
    clusters: Vec<HistoryCluster>,
    outliers: Vec<TrajId>,
}

/// One JSON object per interval.
pub fn write_history(path: &Path, ids: &[TrajId], history: &ClusterHistory) -> Result<()> {
    let mut text = String::new();
    for ic in history.intervals() {
        let line = HistoryLine {
            interval: ic.interval,
            clusters: ic
                .clusters
                .iter()
                .enumerate()
                .map(|(k, c)| HistoryCluster {
                    id: k,
                    density: c.density,
                    members: names(ids, &c.members),
                })
                .collect(),
            outliers: names(ids, &ic.outliers),
        };
        text.push_str(&to_json(&line)?);
        text.push('\n');
    }
    write_text(path, &text)
}

#[derive(Serialize)]
struct RangedOut {
    range: [usize; 2],
    clusters: Vec<Vec<TrajId>>,
    outliers: Vec<TrajId>,
}

pub fn write_subclusters(path: &Path, ids: &[TrajId], ranged: &[RangedClustering]) -> Result<()> {
    let out: Vec<RangedOut> = ranged
        .iter()
        .map(|r| RangedOut {
            range: [r.range.0, r.range.1],
            clusters: r.clustering.clusters.iter().map(|c| names(ids, c)).collect(),
            outliers: names(ids, &r.clustering.outliers),
        })
        .collect();
    write_text(path, &(to_json_pretty(&out)? + "\n"))
}

#[derive(Serialize)]
struct DecisionOut {
    traj_id: TrajId,
    source_cluster: Option<usize>,
    best_member_id: TrajId,
    lmd: f64,
    rmd: f64,
    absorbed: bool,
}

#[derive(Serialize)]
struct ReportOut {
    cluster_id: usize,
    mu_min: Option<f64>,
    candidates: Vec<DecisionOut>,
}

pub fn write_stability(path: &Path, ids: &[TrajId], reports: &[crate::stability::StabilityReport]) -> Result<()> {
    let out: Vec<ReportOut> = reports
        .iter()
        .map(|r| ReportOut {
            cluster_id: r.cluster_id,
            mu_min: r.mu_min,
            candidates: r
                .candidates
                .iter()
                .map(|d| DecisionOut {
                    traj_id: ids[d.traj].clone(),
                    source_cluster: d.source_cluster,
                    best_member_id: ids[d.best_member].clone(),
                    lmd: d.lmd,
                    rmd: d.rmd,
                    absorbed: d.absorbed,
                })
                .collect(),
        })
        .collect();
    write_text(path, &(to_json_pretty(&out)? + "\n"))
}

pub fn write_json_pretty<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(to_json_pretty(value)? + "\n"))
}

/// Long-format rows `traj_id,cluster_id,interval,distance`: per outlier, the
/// distance to its nearest segment in the cluster it was assigned to.
pub fn write_outlier_distances(path: &Path, ids: &[TrajId], rows: &[(usize, usize, Vec<f64>)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["traj_id", "cluster_id", "interval", "distance"])
        .map_err(|e| csv_err(path, e))?;
    for (traj, cluster, dists) in rows {
        for (i, d) in dists.iter().enumerate() {
            w.write_record([ids[*traj].as_str(), &cluster.to_string(), &(i + 1).to_string(), &fmt_f64(*d)])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// One row per trajectory, one 0/1 column per interval: 1 where the
/// trajectory's segment belongs to some cluster.
pub fn write_membership_grid(path: &Path, ids: &[TrajId], history: &ClusterHistory) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["traj_id".to_string()];
    header.extend((1..=history.n_intervals()).map(|i| i.to_string()));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (t, id) in ids.iter().enumerate() {
        let mut row = vec![id.to_string()];
        row.extend(
            history
                .intervals()
                .iter()
                .map(|ic| if ic.label(t).is_some() { "1" } else { "0" }.to_string()),
        );
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
