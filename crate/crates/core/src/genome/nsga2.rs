use super::ObjectiveVector;
use crate::validity::Bounds;
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NsgaError {
    #[error("objective vector {0} is not finite")]
    NonFinite(usize),
    #[error("cannot select {k} from a population of {n}")]
    TooMany { k: usize, n: usize },
}

/// `a` dominates `b` when no worse in every objective and strictly better
/// in at least one (after orienting everything for minimization).
fn dominates(a: &[f64; 5], b: &[f64; 5]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Partitions indices into non-dominated fronts, best first. Indices within
/// a front are ascending.
pub fn non_dominated_sort(objs: &[ObjectiveVector]) -> Result<Vec<Vec<usize>>, NsgaError> {
    if let Some(i) = objs.iter().position(|o| !o.is_finite()) {
        return Err(NsgaError::NonFinite(i));
    }
    let m: Vec<[f64; 5]> = objs.iter().map(|o| o.minimization()).collect();
    let n = m.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&m[i], &m[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(&m[j], &m[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    Ok(fronts)
}

/// Crowding distance of each member of `front`, in input order.
pub fn crowding_distance(front: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let values: Vec<[f64; 5]> = front.iter().map(|o| o.as_array()).collect();
    #[allow(clippy::needless_range_loop)]
    for k in 0..ObjectiveVector::LEN {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a][k].total_cmp(&values[b][k]));
        let lo = values[order[0]][k];
        let hi = values[order[n - 1]][k];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = values[order[w + 1]][k] - values[order[w - 1]][k];
            dist[order[w]] += gap / span;
        }
    }
    dist
}

/// Picks `k` survivors: whole fronts in order, then the most crowded-apart
/// members of the first front that does not fit. Ties fall back to the
/// lower original index.
pub fn nsga2_select(objs: &[ObjectiveVector], k: usize) -> Result<Vec<usize>, NsgaError> {
    if k > objs.len() {
        return Err(NsgaError::TooMany { k, n: objs.len() });
    }
    let mut out = Vec::with_capacity(k);
    for front in non_dominated_sort(objs)? {
        if out.len() + front.len() <= k {
            out.extend_from_slice(&front);
            if out.len() == k {
                break;
            }
            continue;
        }
        let members: Vec<ObjectiveVector> = front.iter().map(|&i| objs[i]).collect();
        let cd = crowding_distance(&members);
        let mut ranked: Vec<usize> = (0..front.len()).collect();
        ranked.sort_by(|&a, &b| match cd[b].partial_cmp(&cd[a]) {
            Some(Ordering::Equal) | None => front[a].cmp(&front[b]),
            Some(o) => o,
        });
        let room = k - out.len();
        out.extend(ranked.into_iter().take(room).map(|r| front[r]));
        break;
    }
    Ok(out)
}

/// Sums the min-max normalized objectives oriented so that 1 marks the
/// violation-prone end of each range. For reporting only.
pub fn scalar_fitness(obj: &ObjectiveVector, norm: &[Bounds; 5]) -> f64 {
    let raw = obj.as_array();
    let maximized = [false, false, true, true, false];
    raw.iter()
        .zip(norm)
        .zip(maximized)
        .map(|((&v, b), up)| {
            let span = b.max - b.min;
            if span <= 0.0 {
                return 0.0;
            }
            let t = if up { (v - b.min) / span } else { (b.max - v) / span };
            t.clamp(0.0, 1.0)
        })
        .sum()
}
