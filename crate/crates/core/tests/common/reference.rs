//! Independent reference implementations the library is checked against.
//! Each favors the most literal formulation over speed.

use forge_core::genome::ObjectiveVector;
use forge_core::geometry::MapPoint;
use forge_core::oracles::polygon::PolygonPose;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

/// +1 for minimized objectives, -1 for maximized ones.
const SENSE: [f64; 5] = [1.0, 1.0, -1.0, -1.0, 1.0];

fn better_or_equal_everywhere(a: &ObjectiveVector, b: &ObjectiveVector) -> (bool, bool) {
    let (x, y) = (a.as_array(), b.as_array());
    let mut no_worse = true;
    let mut strictly = false;
    for k in 0..5 {
        let (p, q) = (SENSE[k] * x[k], SENSE[k] * y[k]);
        no_worse &= p <= q;
        strictly |= p < q;
    }
    (no_worse, strictly)
}

pub fn oracle_dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    let (no_worse, strictly) = better_or_equal_everywhere(a, b);
    no_worse && strictly
}

/// Peels fronts off by pairwise checks over whatever is left.
pub fn oracle_fronts(objs: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..objs.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> =
            left.iter().copied().filter(|&i| !left.iter().any(|&j| oracle_dominates(&objs[j], &objs[i]))).collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// Textbook crowding: per objective, order by value (earlier index first on
/// ties), boundaries infinite, interior gets the normalized neighbor gap.
pub fn oracle_crowding(front: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut d = vec![0.0; n];
    for k in 0..5 {
        let v: Vec<f64> = front.iter().map(|o| o.as_array()[k]).collect();
        let mut order: Vec<usize> = Vec::new();
        let mut rest: Vec<usize> = (0..n).collect();
        while !rest.is_empty() {
            let mut best = 0;
            for r in 1..rest.len() {
                if v[rest[r]] < v[rest[best]] {
                    best = r;
                }
            }
            order.push(rest.remove(best));
        }
        d[order[0]] = f64::INFINITY;
        d[order[n - 1]] = f64::INFINITY;
        let span = v[order[n - 1]] - v[order[0]];
        if span == 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            d[order[w]] += (v[order[w + 1]] - v[order[w - 1]]) / span;
        }
    }
    d
}

pub fn oracle_select(objs: &[ObjectiveVector], k: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for front in oracle_fronts(objs) {
        if out.len() + front.len() <= k {
            out.extend(front);
            continue;
        }
        let members: Vec<ObjectiveVector> = front.iter().map(|&i| objs[i]).collect();
        let cd = oracle_crowding(&members);
        let mut idx: Vec<usize> = (0..front.len()).collect();
        idx.sort_by(|&a, &b| cd[b].partial_cmp(&cd[a]).unwrap().then(front[a].cmp(&front[b])));
        let room = k - out.len();
        out.extend(idx.into_iter().take(room).map(|i| front[i]));
        break;
    }
    out
}

/// Mixes continuous vectors with coarse integer ones so ties occur.
pub fn population(rng: &mut ChaCha8Rng, n: usize) -> Vec<ObjectiveVector> {
    let coarse = rng.gen_bool(0.5);
    (0..n)
        .map(|_| {
            let mut v = [0.0; 5];
            for x in &mut v {
                *x = if coarse { rng.gen_range(0..4) as f64 } else { rng.gen_range(-10.0..10.0) };
            }
            ObjectiveVector::from_array(v)
        })
        .collect()
}

const STEP: f64 = 1e-3;

type P = (f64, f64);

fn corners(r: &PolygonPose) -> [P; 4] {
    let (s, c) = r.heading.sin_cos();
    let (hl, hw) = (r.length / 2.0, r.width / 2.0);
    let at = |a: f64, b: f64| (r.center.x + a * c - b * s, r.center.y + a * s + b * c);
    [at(hl, hw), at(-hl, hw), at(-hl, -hw), at(hl, -hw)]
}

fn point_segment(p: P, a: P, b: P) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    let (x, y) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - x).powi(2) + (p.1 - y).powi(2)).sqrt()
}

/// Inside test by the sign of the cross product against each edge of a
/// counter-clockwise polygon.
fn inside(p: P, poly: &[P; 4]) -> bool {
    (0..4).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % 4]);
        (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= 0.0
    })
}

fn boundary_samples(poly: &[P; 4]) -> Vec<P> {
    let mut out = Vec::new();
    for i in 0..4 {
        let (a, b) = (poly[i], poly[(i + 1) % 4]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let n = (len / STEP).ceil() as usize;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    out
}

/// Walks both boundaries at 1 mm spacing; any sample inside the other
/// rectangle means overlap, otherwise the nearest sample-to-edge gap.
pub fn sampled_distance(a: &PolygonPose, b: &PolygonPose) -> f64 {
    let (ca, cb) = (corners(a), corners(b));
    let mut best = f64::INFINITY;
    for (from, to) in [(&ca, &cb), (&cb, &ca)] {
        for p in boundary_samples(from) {
            if inside(p, to) {
                return 0.0;
            }
            for i in 0..4 {
                best = best.min(point_segment(p, to[i], to[(i + 1) % 4]));
            }
        }
    }
    best
}

pub fn random_pose(rng: &mut ChaCha8Rng, spread: f64) -> PolygonPose {
    PolygonPose::new(
        MapPoint::new(rng.gen_range(-spread..spread), rng.gen_range(-spread..spread)),
        rng.gen_range(-PI..PI),
        rng.gen_range(0.2..12.0),
        rng.gen_range(0.2..3.0),
    )
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Reference DBSCAN by connected components: core points within eps of
/// each other share a cluster; clusters are numbered by their lowest core
/// index; a border point joins the lowest-numbered cluster among its core
/// neighbors.
pub fn reference_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |i: usize, j: usize| euclid(&points[i], &points[j]) <= eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    // union-find over core points
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in 0..i {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut number: BTreeMap<usize, usize> = BTreeMap::new();
    let mut labels = vec![None; n];
    for i in 0..n {
        if core[i] {
            let r = root(&mut parent, i);
            let next = number.len();
            labels[i] = Some(*number.entry(r).or_insert(next));
        }
    }
    for i in 0..n {
        if !core[i] {
            labels[i] = (0..n).filter(|&j| core[j] && near(i, j)).filter_map(|j| labels[j]).min();
        }
    }
    labels
}

/// The partition induced by labels, with noise points as singletons.
pub fn partition(labels: &[Option<usize>]) -> BTreeSet<BTreeSet<usize>> {
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut out = BTreeSet::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(c) => {
                groups.entry(*c).or_default().insert(i);
            }
            None => {
                out.insert(BTreeSet::from([i]));
            }
        }
    }
    out.extend(groups.into_values());
    out
}

/// Midrank of each value in the pooled sample: values below, plus the
/// average position inside its tie group.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    pooled
        .iter()
        .map(|&v| {
            let below = pooled.iter().filter(|&&w| w < v).count() as f64;
            let equal = pooled.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided p by visiting every way to pick which pooled values form the
/// first sample.
pub fn brute_force_p(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let ranks = midranks(&pooled);
    let (n, total) = (xs.len(), pooled.len());
    let offset = (n * (n + 1)) as f64 / 2.0;
    let centre = (n * ys.len()) as f64 / 2.0;
    let u_obs = ranks[..n].iter().sum::<f64>() - offset;
    let dev = (u_obs - centre).abs();
    let (mut extreme, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let w: f64 = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        all += 1;
        if (w - offset - centre).abs() >= dev - 1e-9 {
            extreme += 1;
        }
    }
    (u_obs, extreme as f64 / all as f64)
}
