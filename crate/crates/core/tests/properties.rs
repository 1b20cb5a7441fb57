//! Property checks against independent oracles.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use trajstc::distance_cache::DistanceCache;
use trajstc::evaluation::{ari_labels, nmi_labels, trajectory_distance, NmiNormalization};
use trajstc::geometry::{
    endpoint_fast_path, segment_distance, segment_distance_oracle, FastPath, Point2, Segment,
};
use trajstc::segment_clustering::{evolve, DbscanParams};
use trajstc::stability::{stabilize, StabilityConfig};
use trajstc::trajectory::{resample_uniform, segmentize, RawTrack, Sample, Trajectory};
use trajstc::trajectory_clustering::{whole_trajectory_clusters, WholeClustering};

fn point() -> impl Strategy<Value = Point2> {
    (-100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

fn segment() -> impl Strategy<Value = Segment> {
    (point(), point()).prop_map(|(a, b)| Segment::new(0, 1, a, b))
}

/// Pairs biased toward the degenerate branches: parallel motion, shared
/// relative direction, and crossings.
fn special_pair() -> impl Strategy<Value = (Segment, Segment)> {
    (point(), point(), point(), -3.0..3.0f64, 0usize..3).prop_map(|(a0, a1, off, k, kind)| {
        let s1 = Segment::new(0, 1, a0, a1);
        let s2 = match kind {
            // Same velocity: a = 0.
            0 => Segment::new(1, 1, a0 + off, a1 + off),
            // Relative motion along the initial offset: zero discriminant.
            1 => Segment::new(1, 1, a0 + off, a1 + off * k),
            // Reversed path: the two cross at the midpoint.
            _ => Segment::new(1, 1, a1, a0),
        };
        (s1, s2)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closed_form_matches_quadrature(s1 in segment(), s2 in segment()) {
        let d = segment_distance(&s1, &s2).unwrap();
        let o = segment_distance_oracle(&s1, &s2, 20001).unwrap();
        prop_assert!((d - o).abs() <= 1e-8 * o.max(1e-300) + 1e-12, "{d} vs {o}");
    }

    #[test]
    fn degenerate_branches_match_quadrature((s1, s2) in special_pair()) {
        let d = segment_distance(&s1, &s2).unwrap();
        let o = segment_distance_oracle(&s1, &s2, 20001).unwrap();
        prop_assert!((d - o).abs() <= 1e-8 * o.max(1.0), "{d} vs {o}");
    }

    #[test]
    fn metric_axioms(a in segment(), b in segment(), c in segment()) {
        let d = |x: &Segment, y: &Segment| segment_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-12 * d(&a, &b).max(1.0));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        prop_assert!(d(&a, &b) >= 0.0);
    }

    #[test]
    fn fast_path_is_sound(a in segment(), b in segment(), eps in 0.1..300.0f64) {
        if endpoint_fast_path(&a, &b, eps).unwrap() == FastPath::Neighbor {
            prop_assert!(segment_distance(&a, &b).unwrap() <= eps * (1.0 + 1e-12));
        }
    }

    #[test]
    fn resampling_at_the_target_length_is_identity(
        pts in prop::collection::vec(point(), 2..20),
    ) {
        let len = pts.len();
        let raw = RawTrack::new(
            "a".into(),
            pts.iter().enumerate().map(|(k, p)| Sample::new(k as f64, p.x, p.y)).collect(),
        ).unwrap();
        let once = resample_uniform(&raw, len).unwrap();
        for (got, want) in once.positions.iter().zip(&pts) {
            prop_assert!(got.dist(*want) <= 1e-9);
        }
        let raw2 = RawTrack::new(
            "a".into(),
            once.positions.iter().enumerate().map(|(k, p)| Sample::new(k as f64, p.x, p.y)).collect(),
        ).unwrap();
        prop_assert_eq!(resample_uniform(&raw2, len).unwrap(), once);
    }

    #[test]
    fn segments_reassemble_their_trajectories(seed in any::<u64>(), n in 1usize..6, len in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trajs = common::random_walks(&mut rng, n, len, 10.0, 1.0);
        let sets = segmentize(&trajs).unwrap();
        prop_assert_eq!(sets.len(), len - 1);
        for (t, traj) in trajs.iter().enumerate() {
            for (i, set) in sets.iter().enumerate() {
                prop_assert_eq!(set.segments[t].start, traj.positions[i]);
                prop_assert_eq!(set.segments[t].end, traj.positions[i + 1]);
            }
        }
    }

    #[test]
    fn evolve_equals_fresh_clustering(
        seed in any::<u64>(),
        n in 1usize..20,
        len in 2usize..12,
        eps in 0.3..3.0f64,
        min_lns in 1usize..5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trajs = common::random_walks(&mut rng, n, len, 8.0, 1.0);
        let cache = DistanceCache::new(segmentize(&trajs).unwrap());
        let history = evolve(&cache, &DbscanParams::new(eps, min_lns).unwrap()).unwrap();
        for (set, ic) in cache.segment_sets().iter().zip(history.intervals()) {
            let (clusters, outliers) = common::fresh_partition(set, eps, min_lns);
            let got: Vec<_> = ic.clusters.iter().map(|c| (c.members.clone(), c.density)).collect();
            prop_assert_eq!(got, clusters);
            prop_assert_eq!(&ic.outliers, &outliers);
        }
    }

    #[test]
    fn whole_clustering_equals_closure(
        seed in any::<u64>(),
        n in 1usize..12,
        len in 2usize..8,
        eps in 0.5..3.0f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trajs = common::random_walks(&mut rng, n, len, 6.0, 0.8);
        let cache = DistanceCache::new(segmentize(&trajs).unwrap());
        let history = evolve(&cache, &DbscanParams::new(eps, 2).unwrap()).unwrap();
        let m = history.n_intervals();
        let s = 1 + (seed as usize % m);
        let whole = whole_trajectory_clusters(&history, (s, m)).unwrap();
        let (clusters, outliers) = common::closure_whole(&history, (s, m));
        prop_assert_eq!(whole.clusters, clusters);
        prop_assert_eq!(whole.outliers, outliers);
    }

    #[test]
    fn stc_keeps_cluster_count_and_only_shrinks_outliers(
        seed in any::<u64>(),
        n in 3usize..20,
        len in 3usize..10,
        eps in 0.5..2.5f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trajs = common::flocks(&mut rng, n, len);
        let cache = DistanceCache::new(segmentize(&trajs).unwrap());
        let params = DbscanParams::new(eps, 2).unwrap();
        let history = evolve(&cache, &params).unwrap();
        let whole = whole_trajectory_clusters(&history, (1, history.n_intervals())).unwrap();
        let (after, reports) =
            stabilize(&whole, &history, &cache, &params, &StabilityConfig::default()).unwrap();
        prop_assert_eq!(after.clusters.len(), whole.clusters.len());
        prop_assert!(after.outliers.iter().all(|o| whole.outliers.contains(o)));
        prop_assert_eq!(reports.len(), whole.clusters.len());
        for c in &whole.clusters {
            let grown = after.clusters.iter().find(|a| a.contains(&c[0])).unwrap();
            prop_assert!(c.iter().all(|m| grown.contains(m)));
        }
    }

    #[test]
    fn trajectory_distance_is_a_metric(seed in any::<u64>(), len in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trajs: Vec<Trajectory> = common::random_walks(&mut rng, 3, len, 10.0, 2.0);
        let cache = DistanceCache::new(segmentize(&trajs).unwrap());
        let d = |a, b| trajectory_distance(a, b, &cache);
        prop_assert_eq!(d(0, 0), 0.0);
        prop_assert!((d(0, 1) - d(1, 0)).abs() <= 1e-12);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
    }

    #[test]
    fn metrics_ignore_label_names(
        truth in prop::collection::vec(0i64..4, 2..40),
        pred_seed in any::<u64>(),
        shift in 1i64..50,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(pred_seed);
        let pred = common::random_labels(&mut rng, truth.len(), 3);
        let renamed: Vec<i64> = pred.iter().map(|l| (l + shift) * 7 - 1).collect();
        let norm = NmiNormalization::Arithmetic;
        prop_assert!((nmi_labels(&pred, &truth, norm).unwrap() - nmi_labels(&renamed, &truth, norm).unwrap()).abs() <= 1e-12);
        prop_assert!((ari_labels(&pred, &truth).unwrap() - ari_labels(&renamed, &truth).unwrap()).abs() <= 1e-12);
        let nmi = nmi_labels(&pred, &truth, norm).unwrap();
        prop_assert!((0.0..=1.0).contains(&nmi));
        let ari = ari_labels(&pred, &truth).unwrap();
        prop_assert!((-1.0..=1.0).contains(&ari));
    }
}

#[test]
fn ari_of_independent_partitions_averages_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 1000;
    let total: f64 = (0..trials)
        .map(|_| {
            let a = common::random_labels(&mut rng, 200, 4);
            let b = common::random_labels(&mut rng, 200, 4);
            ari_labels(&a, &b).unwrap()
        })
        .sum();
    let mean = total / trials as f64;
    assert!(mean.abs() <= 0.02, "{mean}");
}

#[test]
fn whole_clustering_from_groups_normalises() {
    let w = WholeClustering::from_groups(5, vec![vec![4, 2], vec![1]]).unwrap();
    assert_eq!(w.clusters, vec![vec![2, 4]]);
    assert_eq!(w.outliers, vec![0, 1, 3]);
    assert_eq!(w.label_vector(), vec![-1, -1, 0, -1, 0]);
    assert!(WholeClustering::from_groups(2, vec![vec![0, 0]]).is_err());
}
