//! Grading of a trace: the five violation checks and the objective values
//! derived from the same signals.

pub mod polygon;

use crate::genome::ObjectiveVector;
use crate::geometry::{round9, MapPoint};
use crate::lane_map::{LaneMap, MapError};
use crate::simulator::Trace;
use crate::validity::ObstacleKind;
use polygon::{contact_point, distance_lower_bound, polygon_distance};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Comparisons against thresholds tolerate this much rounding noise in
/// the passing direction.
pub const COMPARE_SLACK: f64 = 1e-9;
/// Threshold crossings closer together than this are one event.
pub const MERGE_GAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Allowed speed above the lane limit, m/s.
    pub beta_safe: f64,
    /// Allowed time straddling a lane boundary, s.
    pub delta_safe: f64,
    /// Comfortable acceleration ceiling, m/s².
    pub gamma_comfort: f64,
    /// Comfortable deceleration floor, m/s² (negative).
    pub epsilon_comfort: f64,
    /// Footprint distance at or below which actors have collided, m.
    pub collision_distance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            beta_safe: 8.0 / 3.6,
            delta_safe: 5.0,
            gamma_comfort: 4.0,
            epsilon_comfort: -4.0,
            collision_distance: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ViolationKind {
    Collision,
    Speed,
    UnsafeChange,
    FastAccl,
    HardBrake,
}

impl ViolationKind {
    pub const ALL: [ViolationKind; 5] = [
        ViolationKind::Collision,
        ViolationKind::Speed,
        ViolationKind::UnsafeChange,
        ViolationKind::FastAccl,
        ViolationKind::HardBrake,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Collision => "collision",
            ViolationKind::Speed => "speed",
            ViolationKind::UnsafeChange => "unsafeChange",
            ViolationKind::FastAccl => "fastAccl",
            ViolationKind::HardBrake => "hardBrake",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollisionSide {
    Front,
    Rear,
    Left,
    Right,
}

impl CollisionSide {
    /// Classifies a contact bearing in the ego body frame (radians,
    /// counter-clockwise from straight ahead).
    pub fn from_bearing(bearing: f64) -> Self {
        let deg = bearing.to_degrees().abs();
        if deg <= 45.0 {
            CollisionSide::Front
        } else if deg >= 135.0 {
            CollisionSide::Rear
        } else if bearing > 0.0 {
            CollisionSide::Left
        } else {
            CollisionSide::Right
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CollisionSide::Front => "front",
            CollisionSide::Rear => "rear",
            CollisionSide::Left => "left",
            CollisionSide::Right => "right",
        }
    }
}

/// Ego position, speed and heading when a violation first occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoSnapshot {
    pub position: MapPoint,
    pub speed: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionInfo {
    pub side: CollisionSide,
    pub obstacle_id: u32,
    pub obstacle_kind: ObstacleKind,
    /// Length, width, height in meters.
    pub obstacle_size: [f64; 3],
    pub obstacle_speed: f64,
    pub obstacle_heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    #[serde(default)]
    pub scenario_id: String,
    pub t_first: f64,
    pub duration: f64,
    pub value: f64,
    pub ego: EgoSnapshot,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision: Option<CollisionInfo>,
}

/// Oracle output for one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub violations: Vec<Violation>,
    pub objectives: ObjectiveVector,
    pub per_obstacle_min_distance: BTreeMap<u32, f64>,
}

/// Groups flagged tick indices into events, merging runs separated by a
/// gap shorter than [`MERGE_GAP`]. Returns inclusive `(first, last)` ticks.
fn events(flags: &[bool], dt: f64, merge: bool) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (j, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                runs.push((s, j - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, flags.len() - 1));
    }
    if !merge {
        return runs;
    }
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for r in runs {
        match merged.last_mut() {
            Some(last) if ((r.0 - last.1 - 1) as f64) * dt < MERGE_GAP - COMPARE_SLACK => last.1 = r.1,
            _ => merged.push(r),
        }
    }
    merged
}

fn span(trace: &Trace, first: usize, last: usize) -> f64 {
    round9((last - first + 1) as f64 * trace.dt)
}

fn snapshot(trace: &Trace, j: usize) -> EgoSnapshot {
    let e = &trace.ego[j];
    EgoSnapshot { position: e.position, speed: e.speed, heading: e.heading }
}

fn violation(trace: &Trace, kind: ViolationKind, first: usize, last: usize, value: f64) -> Violation {
    Violation {
        kind,
        scenario_id: trace.scenario_id.clone(),
        t_first: trace.ego[first].t,
        duration: span(trace, first, last),
        value,
        ego: snapshot(trace, first),
        collision: None,
    }
}

/// Per-obstacle minimum footprint distance and collision events.
pub fn check_collision(trace: &Trace, th: &Thresholds) -> (Vec<Violation>, BTreeMap<u32, f64>) {
    let mut out = Vec::new();
    let mut mins = BTreeMap::new();
    let n = trace.len();
    for (k, info) in trace.obstacle_info.iter().enumerate() {
        let mut best = f64::INFINITY;
        let mut contact = vec![false; n];
        for (j, flag) in contact.iter_mut().enumerate() {
            let ego = trace.ego_footprint(j);
            let obs = trace.obstacle_footprint(k, j);
            let bound = distance_lower_bound(&ego, &obs);
            if bound > best && bound > th.collision_distance + COMPARE_SLACK {
                continue;
            }
            let d = polygon_distance(&ego, &obs);
            best = best.min(d);
            *flag = d <= th.collision_distance + COMPARE_SLACK;
        }
        mins.insert(info.id, round9(best));
        for (first, last) in events(&contact, trace.dt, true) {
            let ego = trace.ego_footprint(first);
            let obs = trace.obstacle_footprint(k, first);
            let local = ego.to_local(contact_point(&ego, &obs));
            let state = trace.obstacles[k][first];
            let mut v = violation(trace, ViolationKind::Collision, first, last, round9(best));
            v.collision = Some(CollisionInfo {
                side: CollisionSide::from_bearing(local.y.atan2(local.x)),
                obstacle_id: info.id,
                obstacle_kind: info.kind,
                obstacle_size: [info.length, info.width, info.height],
                obstacle_speed: state.speed,
                obstacle_heading: state.heading,
            });
            out.push(v);
        }
    }
    (out, mins)
}

fn lane_limit(map: &LaneMap, trace: &Trace, j: usize) -> Result<f64, MapError> {
    let e = &trace.ego[j];
    match map.lane_by_id(&e.current_lane) {
        Some(l) => Ok(l.speed_limit),
        None => map.project(e.position).map(|p| map.lane(p.lane).speed_limit),
    }
}

/// Speed above the current lane limit. Returns violations and the smallest
/// limit-minus-speed margin.
pub fn check_speeding(trace: &Trace, map: &LaneMap, th: &Thresholds) -> Result<(Vec<Violation>, f64), MapError> {
    let mut over = Vec::with_capacity(trace.len());
    for j in 0..trace.len() {
        over.push(trace.ego[j].speed - lane_limit(map, trace, j)?);
    }
    let flags: Vec<bool> = over.iter().map(|&d| d > th.beta_safe + COMPARE_SLACK).collect();
    let vs = events(&flags, trace.dt, true)
        .into_iter()
        .map(|(a, b)| {
            let peak = over[a..=b].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            violation(trace, ViolationKind::Speed, a, b, round9(peak))
        })
        .collect();
    let f = over.iter().map(|d| -d).fold(f64::INFINITY, f64::min);
    Ok((vs, round9(f)))
}

/// Straddle episodes longer than the allowed time. Returns violations and
/// the longest episode.
pub fn check_unsafe_lane_change(trace: &Trace, th: &Thresholds) -> (Vec<Violation>, f64) {
    let flags: Vec<bool> = trace.ego.iter().map(|e| e.straddling).collect();
    let mut out = Vec::new();
    let mut longest: f64 = 0.0;
    for (a, b) in events(&flags, trace.dt, false) {
        let c = span(trace, a, b);
        longest = longest.max(c);
        if c > th.delta_safe + COMPARE_SLACK {
            out.push(violation(trace, ViolationKind::UnsafeChange, a, b, c));
        }
    }
    (out, longest)
}

/// Acceleration above the comfort ceiling. Returns violations and the peak.
pub fn check_fast_accel(trace: &Trace, th: &Thresholds) -> (Vec<Violation>, f64) {
    let acc: Vec<f64> = trace.ego.iter().map(|e| e.acceleration).collect();
    let flags: Vec<bool> = acc.iter().map(|&a| a > th.gamma_comfort + COMPARE_SLACK).collect();
    let vs = events(&flags, trace.dt, true)
        .into_iter()
        .map(|(a, b)| {
            let peak = acc[a..=b].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            violation(trace, ViolationKind::FastAccl, a, b, peak)
        })
        .collect();
    (vs, acc.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Deceleration below the comfort floor. Returns violations and the minimum.
pub fn check_hard_brake(trace: &Trace, th: &Thresholds) -> (Vec<Violation>, f64) {
    let acc: Vec<f64> = trace.ego.iter().map(|e| e.acceleration).collect();
    let flags: Vec<bool> = acc.iter().map(|&a| a < th.epsilon_comfort - COMPARE_SLACK).collect();
    let vs = events(&flags, trace.dt, true)
        .into_iter()
        .map(|(a, b)| {
            let low = acc[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
            violation(trace, ViolationKind::HardBrake, a, b, low)
        })
        .collect();
    (vs, acc.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Runs every check. Objectives for an obstacle-free trace use
/// `f64::MAX` for the collision distance so they stay finite.
pub fn evaluate(trace: &Trace, map: &LaneMap, th: &Thresholds) -> Result<Evaluation, MapError> {
    let (mut violations, per_obstacle_min_distance) = check_collision(trace, th);
    let (speed, f_speed) = check_speeding(trace, map, th)?;
    let (unsafe_change, f_unsafe) = check_unsafe_lane_change(trace, th);
    let (fast, f_fast) = check_fast_accel(trace, th);
    let (hard, f_hard) = check_hard_brake(trace, th);
    violations.extend(speed);
    violations.extend(unsafe_change);
    violations.extend(fast);
    violations.extend(hard);
    violations.sort_by(|a, b| a.t_first.total_cmp(&b.t_first).then(a.kind.cmp(&b.kind)));
    let f_collision = per_obstacle_min_distance.values().copied().fold(f64::MAX, f64::min);
    let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
    Ok(Evaluation {
        violations,
        objectives: ObjectiveVector::new(f_collision, finite(f_speed), f_unsafe, finite(f_fast), finite(f_hard)),
        per_obstacle_min_distance,
    })
}
