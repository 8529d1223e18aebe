mod common;

use common::reference::{partition, reference_dbscan};
use forge_core::dedup::{auto_epsilon, dbscan, dedup, extract_features, MIN_PTS};
use forge_core::geometry::MapPoint;
use forge_core::oracles::{CollisionInfo, CollisionSide, EgoSnapshot, Violation, ViolationKind};
use forge_core::validity::ObstacleKind;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

#[test]
fn dbscan_matches_reference_on_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..30 {
        let pts: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)]).collect();
        let eps = rng.gen_range(0.2..1.2);
        let min_pts = [MIN_PTS, 3, 4, 6][trial % 4];
        let got = dbscan(&pts, eps, min_pts);
        let want = reference_dbscan(&pts, eps, min_pts);
        assert_eq!(
            got.iter().map(Option::is_none).collect::<Vec<_>>(),
            want.iter().map(Option::is_none).collect::<Vec<_>>()
        );
        assert_eq!(partition(&got), partition(&want), "eps {eps}, min_pts {min_pts}");
    }
}

fn two_blobs(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    for center in [0.0, 100.0] {
        for _ in 0..30 {
            pts.push(vec![center + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        }
    }
    pts
}

#[test]
fn knee_never_bridges_two_blobs() {
    // every k-distance is intra-blob here, so the knee stays below the
    // spread and a single DBSCAN pass may split a blob, but never joins two
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let pts = two_blobs(&mut rng);
    let eps = auto_epsilon(&pts, MIN_PTS);
    assert!(eps > 0.0 && eps < 100.0, "eps {eps}");
    let labels = dbscan(&pts, eps, MIN_PTS);
    let left: BTreeSet<usize> = labels[..30].iter().flatten().copied().collect();
    let right: BTreeSet<usize> = labels[30..].iter().flatten().copied().collect();
    assert!(left.is_disjoint(&right));
}

#[test]
fn dedup_collapses_two_blobs_to_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let vs: Vec<Violation> = two_blobs(&mut rng)
        .into_iter()
        .enumerate()
        .map(|(i, p)| Violation {
            kind: ViolationKind::Speed,
            scenario_id: format!("s{i:03}"),
            t_first: 2.0,
            duration: 1.0,
            value: 2.5,
            ego: EgoSnapshot { position: MapPoint::new(p[0], p[1]), speed: 16.0, heading: 0.0 },
            collision: None,
        })
        .collect();
    let r = dedup(&vs);
    assert_eq!(r.unique_count(), 2);
    assert!(r.assignments[..30].iter().all(|&c| c == r.assignments[0]));
    assert!(r.assignments[30..].iter().all(|&c| c == r.assignments[30]));
}

fn collision(x: f64, y: f64, t: f64, id: &str) -> Violation {
    Violation {
        kind: ViolationKind::Collision,
        scenario_id: id.to_string(),
        t_first: t,
        duration: 0.3,
        value: 0.0,
        ego: EgoSnapshot { position: MapPoint::new(x, y), speed: 8.0, heading: 0.0 },
        collision: Some(CollisionInfo {
            side: CollisionSide::Front,
            obstacle_id: 3,
            obstacle_kind: ObstacleKind::Vehicle,
            obstacle_size: [4.5, 1.9, 1.6],
            obstacle_speed: 5.0,
            obstacle_heading: 0.0,
        }),
    }
}

#[test]
fn ten_copies_and_one_outlier_leave_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut vs: Vec<Violation> = (0..10)
        .map(|i| collision(50.0 + rng.gen_range(-0.1..0.1), -1.75 + rng.gen_range(-0.1..0.1), 3.0, &format!("a{i}")))
        .collect();
    vs.push(collision(350.0, 120.0, 3.0, "b"));
    let r = dedup(&vs);
    assert_eq!(r.unique_count(), 2);
    let k = &r.kinds[&ViolationKind::Collision];
    assert_eq!((k.all_count, k.unique_count), (11, 2));
    assert_eq!(format!("{:.1}", k.eliminated_percent), "81.8");
    assert!((k.eliminated_percent - 900.0 / 11.0).abs() < 1e-9);
}

/// Violations scattered around a handful of hot spots, mimicking a run.
fn corpus(rng: &mut ChaCha8Rng, n: usize) -> Vec<Violation> {
    let spots: Vec<(f64, f64)> = (0..25).map(|_| (rng.gen_range(0.0..400.0), rng.gen_range(0.0..400.0))).collect();
    (0..n)
        .map(|i| {
            let (x, y) = spots[rng.gen_range(0..spots.len())];
            let kind = ViolationKind::ALL[rng.gen_range(0..5)];
            let collision = (kind == ViolationKind::Collision).then(|| CollisionInfo {
                side: [CollisionSide::Front, CollisionSide::Rear, CollisionSide::Left, CollisionSide::Right]
                    [rng.gen_range(0..4)],
                obstacle_id: rng.gen_range(1..70),
                obstacle_kind: ObstacleKind::ALL[rng.gen_range(0..3)],
                obstacle_size: [rng.gen_range(3.5..5.0), rng.gen_range(1.5..2.0), 1.5],
                obstacle_speed: rng.gen_range(0.0..15.0),
                obstacle_heading: rng.gen_range(-3.0..3.0),
            });
            Violation {
                kind,
                scenario_id: format!("g{:04}_s{:04}", i / 50, i % 50),
                t_first: (rng.gen_range(0..300) as f64) / 10.0,
                duration: rng.gen_range(0.1..6.0),
                value: rng.gen_range(-6.0..6.0),
                ego: EgoSnapshot {
                    position: MapPoint::new(x + rng.gen_range(-2.0..2.0), y + rng.gen_range(-2.0..2.0)),
                    speed: rng.gen_range(0.0..16.0),
                    heading: rng.gen_range(-3.0..3.0),
                },
                collision,
            }
        })
        .collect()
}

fn violation_partition(vs: &[Violation], assignments: &[usize]) -> BTreeSet<BTreeSet<String>> {
    let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for (v, &c) in vs.iter().zip(assignments) {
        groups.entry(c).or_default().insert(format!("{}/{:?}", v.scenario_id, v.kind));
    }
    groups.into_values().collect()
}

#[test]
fn clusters_never_mix_partition_keys() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let vs = corpus(&mut rng, 600);
    let r = dedup(&vs);
    let mut keys: BTreeMap<usize, BTreeSet<_>> = BTreeMap::new();
    for (v, &c) in vs.iter().zip(&r.assignments) {
        keys.entry(c).or_default().insert(extract_features(v).key);
    }
    assert!(keys.values().all(|k| k.len() == 1));
    assert_eq!(keys.len(), r.unique_count());
    for (c, &rep) in r.representatives.iter().enumerate() {
        assert_eq!(r.assignments[rep], c);
        // the representative is the earliest member
        let t = vs[rep].t_first;
        assert!(vs.iter().zip(&r.assignments).all(|(v, &a)| a != c || v.t_first >= t));
    }
    let total: usize = r.kinds.values().map(|k| k.unique_count).sum();
    assert_eq!(total, r.unique_count());
}

#[test]
fn dedup_of_unique_set_eliminates_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let vs = corpus(&mut rng, 800);
    let r = dedup(&vs);
    assert!(r.unique_count() < vs.len());
    let reps: Vec<Violation> = r.representatives.iter().map(|&i| vs[i].clone()).collect();
    let again = dedup(&reps);
    assert_eq!(again.unique_count(), reps.len());
    assert!(again.kinds.values().all(|k| k.eliminated_percent == 0.0));
}

#[test]
fn input_order_does_not_change_the_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let vs = corpus(&mut rng, 500);
    let base = violation_partition(&vs, &dedup(&vs).assignments);
    for _ in 0..5 {
        let mut shuffled = vs.clone();
        shuffled.shuffle(&mut rng);
        assert_eq!(violation_partition(&shuffled, &dedup(&shuffled).assignments), base);
    }
}

#[test]
fn two_thousand_violations_in_under_a_second() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let vs = corpus(&mut rng, 2_000);
    let t = Instant::now();
    let r = dedup(&vs);
    let elapsed = t.elapsed().as_secs_f64();
    assert_eq!(r.assignments.len(), 2_000);
    assert!(elapsed < 1.0, "dedup took {elapsed:.3} s");
}
