//! Duplicate-violation elimination: per-kind feature vectors clustered with
//! DBSCAN, with the neighborhood radius picked from the k-distance knee.

use crate::oracles::{CollisionSide, Violation, ViolationKind};
use crate::validity::ObstacleKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Density threshold: a violation and one near-duplicate form a cluster.
pub const MIN_PTS: usize = 2;
/// Radius used when the k-distance knee is undefined.
pub const FALLBACK_EPS: f64 = 1e-6;

/// Violations only ever cluster with others sharing this key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartitionKey {
    pub kind: ViolationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<CollisionSide>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle_kind: Option<ObstacleKind>,
}

/// Numeric description of one violation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub key: PartitionKey,
    /// Features as named by the oracle: position x and y, ego speed, ego
    /// heading, then duration and value (generic) or obstacle length,
    /// width, height, speed and heading (collision).
    pub raw: Vec<f64>,
    /// `raw` with every heading replaced by its cosine and sine.
    pub embedding: Vec<f64>,
}

pub fn extract_features(v: &Violation) -> FeatureRecord {
    let e = &v.ego;
    let mut raw = vec![e.position.x, e.position.y, e.speed, e.heading];
    let mut embedding = vec![e.position.x, e.position.y, e.speed, e.heading.cos(), e.heading.sin()];
    let key = match (&v.collision, v.kind) {
        (Some(c), ViolationKind::Collision) => {
            let [l, w, h] = c.obstacle_size;
            raw.extend([l, w, h, c.obstacle_speed, c.obstacle_heading]);
            embedding.extend([l, w, h, c.obstacle_speed, c.obstacle_heading.cos(), c.obstacle_heading.sin()]);
            PartitionKey { kind: v.kind, side: Some(c.side), obstacle_kind: Some(c.obstacle_kind) }
        }
        _ => {
            raw.extend([v.duration, v.value]);
            embedding.extend([v.duration, v.value]);
            PartitionKey { kind: v.kind, side: None, obstacle_kind: None }
        }
    };
    FeatureRecord { key, raw, embedding }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// z-scores each dimension; dimensions without spread are dropped.
pub fn standardize(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let d = points[0].len();
    let mut cols = Vec::new();
    for k in 0..d {
        let mean = points.iter().map(|p| p[k]).sum::<f64>() / n as f64;
        let var = points.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd > 1e-12 {
            cols.push((k, mean, sd));
        }
    }
    points.iter().map(|p| cols.iter().map(|&(k, m, s)| (p[k] - m) / s).collect()).collect()
}

/// Distance from each point to its `k`-th nearest point, the point itself
/// counting as the first, in line with how DBSCAN counts core neighbors.
pub fn k_distances(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| dist(p, q)).collect();
            d.sort_by(f64::total_cmp);
            d.get(k.max(1) - 1).copied().unwrap_or(f64::INFINITY)
        })
        .collect()
}

/// Radius at the knee of the sorted k-distance curve: the point farthest
/// from the chord joining its ends, with both axes scaled to [0, 1].
pub fn auto_epsilon(points: &[Vec<f64>], k: usize) -> f64 {
    if points.len() < 3 || points.len() < k + 1 {
        return FALLBACK_EPS;
    }
    let mut kd = k_distances(points, k);
    kd.sort_by(f64::total_cmp);
    let n = kd.len();
    let (lo, hi) = (kd[0], kd[n - 1]);
    if hi <= 0.0 {
        return FALLBACK_EPS;
    }
    if hi - lo <= 1e-12 * hi {
        return hi.max(FALLBACK_EPS);
    }
    let x = |i: usize| i as f64 / (n - 1) as f64;
    let y = |v: f64| (v - lo) / (hi - lo);
    // chord runs from (0, 0) to (1, 1); distance is |x - y| / sqrt(2)
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &v) in kd.iter().enumerate() {
        let off = (x(i) - y(v)).abs();
        if off > best.1 {
            best = (i, off);
        }
    }
    kd[best.0].max(FALLBACK_EPS)
}

/// Cluster labels: `Some(cluster)` or `None` for noise.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unseen,
        Noise,
        Member(usize),
    }
    let n = points.len();
    let region = |i: usize| -> Vec<usize> { (0..n).filter(|&j| dist(&points[i], &points[j]) <= eps).collect() };
    let mut mark = vec![Mark::Unseen; n];
    let mut next = 0;
    for i in 0..n {
        if mark[i] != Mark::Unseen {
            continue;
        }
        let seeds = region(i);
        if seeds.len() < min_pts {
            mark[i] = Mark::Noise;
            continue;
        }
        let c = next;
        next += 1;
        mark[i] = Mark::Member(c);
        let mut queue = seeds;
        let mut head = 0;
        while head < queue.len() {
            let q = queue[head];
            head += 1;
            match mark[q] {
                Mark::Noise => mark[q] = Mark::Member(c),
                Mark::Unseen => {
                    mark[q] = Mark::Member(c);
                    let nq = region(q);
                    if nq.len() >= min_pts {
                        queue.extend(nq);
                    }
                }
                Mark::Member(_) => {}
            }
        }
    }
    mark.into_iter()
        .map(|m| match m {
            Mark::Member(c) => Some(c),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub all_count: usize,
    pub unique_count: usize,
    /// Share of violations removed as duplicates, in percent.
    pub eliminated_percent: f64,
}

impl KindSummary {
    pub fn new(all_count: usize, unique_count: usize) -> Self {
        let eliminated_percent =
            if all_count == 0 { 0.0 } else { 100.0 * (1.0 - unique_count as f64 / all_count as f64) };
        Self { all_count, unique_count, eliminated_percent }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub key: PartitionKey,
    pub count: usize,
    pub eps: f64,
    pub clusters: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub kinds: BTreeMap<ViolationKind, KindSummary>,
    /// Cluster id of each input violation; noise points get their own id.
    pub assignments: Vec<usize>,
    /// Input index of each cluster's representative, by cluster id.
    pub representatives: Vec<usize>,
    pub partitions: Vec<PartitionSummary>,
}

impl DedupReport {
    pub fn unique_count(&self) -> usize {
        self.representatives.len()
    }
}

fn by_time(vs: &[Violation], a: usize, b: usize) -> std::cmp::Ordering {
    vs[a].t_first.total_cmp(&vs[b].t_first).then_with(|| vs[a].scenario_id.cmp(&vs[b].scenario_id)).then(a.cmp(&b))
}

/// Groups `members` (indices into `vs`) into clusters of near-duplicates.
fn cluster_once(vs: &[Violation], feats: &[FeatureRecord], members: &[usize]) -> (Vec<Vec<usize>>, f64) {
    let pts: Vec<Vec<f64>> = standardize(&members.iter().map(|&i| feats[i].embedding.clone()).collect::<Vec<_>>());
    let eps = auto_epsilon(&pts, MIN_PTS);
    let labels = dbscan(&pts, eps, MIN_PTS);
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut singles = Vec::new();
    for (pos, l) in labels.into_iter().enumerate() {
        match l {
            Some(c) => groups.entry(c).or_default().push(members[pos]),
            None => singles.push(vec![members[pos]]),
        }
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.extend(singles);
    for g in &mut out {
        g.sort_by(|&a, &b| by_time(vs, a, b));
    }
    (out, eps)
}

/// Clusters the violations and picks one representative per cluster (the
/// earliest). Representatives are re-clustered until stable, so running
/// dedup on its own output eliminates nothing.
pub fn dedup(vs: &[Violation]) -> DedupReport {
    if vs.is_empty() {
        return DedupReport::default();
    }
    let feats: Vec<FeatureRecord> = vs.iter().map(extract_features).collect();
    let mut by_key: BTreeMap<PartitionKey, Vec<usize>> = BTreeMap::new();
    for (i, f) in feats.iter().enumerate() {
        by_key.entry(f.key).or_default().push(i);
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut partitions = Vec::new();
    for (key, members) in by_key {
        let (mut groups, eps) = cluster_once(vs, &feats, &members);
        loop {
            let reps: Vec<usize> = groups.iter().map(|g| g[0]).collect();
            let (regroup, _) = cluster_once(vs, &feats, &reps);
            if regroup.len() == groups.len() {
                break;
            }
            let owner: BTreeMap<usize, usize> = groups.iter().enumerate().map(|(gi, g)| (g[0], gi)).collect();
            groups = regroup
                .into_iter()
                .map(|rg| {
                    let mut merged: Vec<usize> = rg.iter().flat_map(|r| groups[owner[r]].clone()).collect();
                    merged.sort_by(|&a, &b| by_time(vs, a, b));
                    merged
                })
                .collect();
        }
        partitions.push(PartitionSummary { key, count: members.len(), eps, clusters: groups.len() });
        clusters.extend(groups);
    }
    // stable cluster numbering: by representative input index
    clusters.sort_by_key(|g| g.iter().copied().min().unwrap_or(usize::MAX));
    let mut assignments = vec![0; vs.len()];
    let mut representatives = Vec::with_capacity(clusters.len());
    for (c, g) in clusters.iter().enumerate() {
        for &i in g {
            assignments[i] = c;
        }
        representatives.push(g[0]);
    }
    let mut kinds: BTreeMap<ViolationKind, (usize, usize)> = BTreeMap::new();
    for v in vs {
        kinds.entry(v.kind).or_default().0 += 1;
    }
    for &r in &representatives {
        kinds.entry(vs[r].kind).or_default().1 += 1;
    }
    DedupReport {
        kinds: kinds.into_iter().map(|(k, (a, u))| (k, KindSummary::new(a, u))).collect(),
        assignments,
        representatives,
        partitions,
    }
}
