//! End-to-end runs through files.

use std::fs;
use std::path::Path;

use trajstc::io::{ingest_csv, read_labels, write_trajectories_csv};
use trajstc::pipeline::{run_pipeline, Mode, PipelineConfig};
use trajstc::stability::CandidateMode;
use trajstc::synthetic::{generate_corridor, CorridorSpec};
use trajstc::trajectory::preprocess;
use trajstc::Error;

fn corridor_csv(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("corridor.csv");
    write_trajectories_csv(&path, &generate_corridor(&CorridorSpec::default()).unwrap()).unwrap();
    path
}

fn config(input: &Path, out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::new(input, out, 1.5, 2);
    c.window = Some(5);
    c.step = 5;
    c
}

#[test]
fn corridor_survives_a_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let generated = generate_corridor(&CorridorSpec::default()).unwrap();
    let ingested = ingest_csv(&corridor_csv(dir.path())).unwrap();
    let (back, dropped) = preprocess(&ingested.tracks, Some(50)).unwrap();
    assert!(dropped.is_empty());
    assert_eq!(back, generated);
}

#[test]
fn stc_off_reports_three_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let input = corridor_csv(dir.path());
    let mut c = config(&input, &dir.path().join("out"));
    c.stc_enabled = false;
    let report = run_pipeline(&c).unwrap();
    let whole = report.whole.unwrap();
    assert_eq!(whole.clusters_after_stc, 3);
    let labels = read_labels(&dir.path().join("out/assignments.csv")).unwrap();
    let mut distinct: Vec<i64> = labels.iter().map(|(_, l)| l).collect();
    distinct.sort_unstable();
    distinct.dedup();
    assert_eq!(distinct, vec![0, 1, 2]);
    assert!(!dir.path().join("out/stability.json").exists());
}

#[test]
fn stc_with_split_candidates_reports_one_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let input = corridor_csv(dir.path());
    let out = dir.path().join("out");
    let mut c = config(&input, &out);
    c.stability.candidates = CandidateMode::OutliersAndSplitClusters;
    let report = run_pipeline(&c).unwrap();
    let whole = report.whole.as_ref().unwrap();
    assert_eq!((whole.clusters_before_stc, whole.clusters_after_stc), (3, 1));

    let stability: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("stability.json")).unwrap()).unwrap();
    let reports = stability.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    assert!(reports.iter().all(|r| r.get("mu_min").is_some_and(|m| m.is_number())));

    // Counts in the report match the assignments file.
    let labels = read_labels(&out.join("assignments.csv")).unwrap();
    assert_eq!(labels.len(), report.n_trajectories);
    assert_eq!(labels.iter().filter(|(_, l)| *l == -1).count(), whole.outliers_after_stc);
    let mut distinct: Vec<i64> = labels.iter().map(|(_, l)| l).filter(|l| *l >= 0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    assert_eq!(distinct.len(), whole.clusters_after_stc);

    let sub = report.sub.as_ref().unwrap();
    assert!(sub.ranges >= 3);
}

#[test]
fn whole_only_run_writes_the_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = corridor_csv(dir.path());
    let out = dir.path().join("out");
    let mut c = config(&input, &out);
    c.mode = Mode::Whole;
    c.stc_enabled = false;
    run_pipeline(&c).unwrap();
    assert!(out.join("assignments.csv").exists());
    assert!(out.join("history.jsonl").exists());
    assert!(out.join("report.json").exists());
    assert!(!out.join("subclusters.json").exists());

    let history = fs::read_to_string(out.join("history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 49);
    let first: serde_json::Value = serde_json::from_str(history.lines().next().unwrap()).unwrap();
    assert_eq!(first["interval"], 1);
    assert_eq!(first["clusters"][0]["density"], "dense");

    let grid = fs::read_to_string(out.join("plotdata/membership_grid.csv")).unwrap();
    let rows: Vec<&str> = grid.lines().collect();
    assert_eq!(rows.len(), 1 + 6);
    assert!(rows.iter().all(|r| r.split(',').count() == 1 + 49));
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let input = corridor_csv(dir.path());
    let run = |threads, name: &str| {
        let out = dir.path().join(name);
        let mut c = config(&input, &out);
        c.threads = Some(threads);
        c.stability.candidates = CandidateMode::OutliersAndSplitClusters;
        run_pipeline(&c).unwrap();
        out
    };
    let a = run(1, "a");
    let b = run(4, "b");
    for f in [
        "assignments.csv",
        "history.jsonl",
        "subclusters.json",
        "stability.json",
        "report.json",
        "plotdata/membership_grid.csv",
        "plotdata/outlier_distances.csv",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn truth_labels_produce_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let input = corridor_csv(dir.path());
    let truth = dir.path().join("truth.csv");
    fs::write(&truth, "traj_id,cluster_id\n0,0\n1,0\n2,1\n3,1\n4,2\n5,2\n").unwrap();
    let mut c = config(&input, &dir.path().join("out"));
    c.truth = Some(truth);
    c.stc_enabled = false;
    let m = run_pipeline(&c).unwrap().metrics.unwrap();
    assert!((m.nmi - 1.0).abs() < 1e-12);
    assert!((m.ari - 1.0).abs() < 1e-12);
}

#[test]
fn failures_carry_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "traj_id,t,x,y\n").unwrap();
    let e = run_pipeline(&config(&empty, &dir.path().join("out"))).unwrap_err();
    assert_eq!(e.exit_code(), 3);
    assert!(e.to_string().starts_with("[ingest]"), "{e}");

    let input = corridor_csv(dir.path());
    let mut c = config(&input, &dir.path().join("out"));
    c.eps = -1.0;
    assert!(matches!(run_pipeline(&c).unwrap_err().exit_code(), 2));
    c.eps = 1.5;
    c.window = Some(100);
    let e = run_pipeline(&c).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(matches!(e, Error::Stage { stage: "config", .. }));
}
