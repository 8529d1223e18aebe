//! The built-in ego planner: speed tracking with a cruise bias, delayed
//! constant-velocity yielding, lateral lane-change blending and arrival
//! braking.

use super::trajectory::{build_trajectory, tick_count};
use super::{ActorState, EgoState, ObstacleInfo, PlannerConfig, SimError, Trace};
use crate::genome::ScenarioGenome;
use crate::geometry::{round9, wrap_angle, MapPoint};
use crate::lane_map::{LaneMap, RouteSegment, SegmentEntry};
use crate::oracles::polygon::{distance_lower_bound, polygon_distance, PolygonPose};

#[derive(Debug, Clone, Copy)]
struct Cursor {
    seg: usize,
    s: f64,
}

/// The ego route as a chain of lane segments.
struct EgoPath<'a> {
    map: &'a LaneMap,
    segments: &'a [RouteSegment],
}

impl EgoPath<'_> {
    /// Moves `dist` meters forward. Returns the new cursor and the lateral
    /// offset picked up by crossing lane-change boundaries.
    fn advance(&self, mut cur: Cursor, dist: f64) -> (Cursor, f64) {
        let mut shift = 0.0;
        cur.s += dist;
        while cur.seg + 1 < self.segments.len() && cur.s > self.segments[cur.seg].s_end {
            let here = &self.segments[cur.seg];
            let next = &self.segments[cur.seg + 1];
            let overflow = cur.s - here.s_end;
            if next.entry == SegmentEntry::LaneChange {
                let p = self.map.lane(here.lane).point_at(here.s_end, 0.0);
                shift += self.map.lane(next.lane).project(p).1;
            }
            cur = Cursor { seg: cur.seg + 1, s: next.s_start + overflow };
        }
        let last = &self.segments[cur.seg];
        if cur.s > last.s_end {
            cur.s = last.s_end;
        }
        (cur, shift)
    }

    fn remaining(&self, cur: Cursor) -> f64 {
        let here = (self.segments[cur.seg].s_end - cur.s).max(0.0);
        here + self.segments[cur.seg + 1..].iter().map(RouteSegment::length).sum::<f64>()
    }

    fn lane(&self, cur: Cursor) -> usize {
        self.segments[cur.seg].lane
    }

    fn pose(&self, cur: Cursor, lateral: f64) -> (MapPoint, f64) {
        let lane = self.map.lane(self.lane(cur));
        (lane.point_at(cur.s, lateral), lane.heading_at_clamped(cur.s))
    }
}

/// Lane holding the ego center among the reference lane and its neighbors,
/// and whether the ego body crosses into a neighbor.
fn lane_occupancy(map: &LaneMap, reference: usize, p: MapPoint, half_width: f64) -> (usize, bool) {
    let r = map.lane(reference);
    let mut best = (reference, r.project(p).1);
    for n in [&r.left_neighbor, &r.right_neighbor].into_iter().flatten() {
        if let Some(idx) = map.lane_index(n) {
            let lat = map.lane(idx).project(p).1;
            if lat.abs() < best.1.abs() {
                best = (idx, lat);
            }
        }
    }
    let (idx, lat) = best;
    let lane = map.lane(idx);
    let side = if lat > 0.0 { &lane.left_neighbor } else { &lane.right_neighbor };
    let straddling = side.is_some() && lat.abs() + half_width > lane.width / 2.0;
    (idx, straddling)
}

fn quantized_speed(v: f64, a: f64, cfg: &PlannerConfig) -> f64 {
    let dt = cfg.dt;
    let mut next = round9((v + a * dt).max(0.0));
    // keep the realised acceleration inside the actuation limits after rounding
    while (next - v) / dt > cfg.max_accel {
        next = round9(next - 1e-9);
    }
    while (next - v) / dt < cfg.max_brake {
        next = round9(next + 1e-9);
    }
    next
}

/// Earliest predicted time at which an in-path obstacle ahead comes closer
/// than the standoff distance.
fn first_conflict(
    path: &EgoPath,
    cur: Cursor,
    lateral: f64,
    v_pred: f64,
    perceived: &[(ActorState, f64, f64)],
    ego_now: &PolygonPose,
    cfg: &PlannerConfig,
) -> Option<f64> {
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let reach = v_pred * cfg.horizon + cfg.standoff;
    let candidates: Vec<&(ActorState, f64, f64)> = perceived
        .iter()
        .filter(|(st, l, w)| {
            let fp = PolygonPose::new(st.position, st.heading, *l, *w);
            distance_lower_bound(ego_now, &fp) <= reach + st.speed * cfg.horizon
        })
        .collect();
    if candidates.is_empty() {
        return None;
    }
    for k in 0..=steps {
        let tau = k as f64 * cfg.dt;
        let (c, shift) = path.advance(cur, v_pred * tau);
        let (p, h) = path.pose(c, lateral + shift);
        let ego = PolygonPose::new(p, h, cfg.ego_length, cfg.ego_width);
        for (st, l, w) in &candidates {
            let dir = MapPoint::from_polar(1.0, st.heading);
            let q = st.position + dir * (st.speed * tau);
            let local = ego.to_local(q);
            if local.x <= 0.0 {
                continue;
            }
            let dh = st.heading - h;
            let half_lat = (dh.sin() * l / 2.0).abs() + (dh.cos() * w / 2.0).abs();
            if local.y.abs() - half_lat - cfg.ego_width / 2.0 >= cfg.lateral_margin {
                continue;
            }
            let fp = PolygonPose::new(q, st.heading, *l, *w);
            if polygon_distance(&ego, &fp) < cfg.standoff {
                return Some(tau);
            }
        }
    }
    None
}

/// Runs the scenario to its full duration and returns the rounded trace.
pub fn simulate(s: &ScenarioGenome, map: &LaneMap, cfg: &PlannerConfig) -> Result<Trace, SimError> {
    cfg.check().map_err(SimError::Config)?;
    let route = s.ego_route(map).ok_or(SimError::NoEgoRoute)?;
    let path = EgoPath { map, segments: &route.segments };
    let dt = cfg.dt;
    let n = tick_count(s.duration, dt);
    let delay = (cfg.reaction_delay / dt).round() as usize;

    let trajectories =
        s.obstacles.iter().map(|o| build_trajectory(o, map, s.duration, dt)).collect::<Result<Vec<_>, _>>()?;

    let mut cur = Cursor { seg: 0, s: route.segments[0].s_start };
    let mut lateral: f64 = 0.0;
    let mut lateral_rate: f64 = 0.0;
    let mut v: f64 = 0.0;
    let mut ego = Vec::with_capacity(n);
    let half_width = cfg.ego_width / 2.0;

    for j in 0..n {
        let (pos, lane_heading) = path.pose(cur, lateral);
        let heading = wrap_angle(lane_heading + lateral_rate.atan2(v.max(0.1)));
        let (occupied, straddling) = lane_occupancy(map, path.lane(cur), pos, half_width);
        ego.push(EgoState {
            t: round9(j as f64 * dt),
            position: MapPoint::new(round9(pos.x), round9(pos.y)),
            heading: round9(heading),
            speed: v,
            acceleration: 0.0,
            current_lane: map.lane(occupied).id.clone(),
            straddling,
        });
        if j + 1 == n {
            break;
        }

        let seen = j.saturating_sub(delay);
        let perceived: Vec<(ActorState, f64, f64)> =
            trajectories.iter().map(|t| (t.states[seen], t.length, t.width)).collect();
        let ego_now = PolygonPose::new(pos, heading, cfg.ego_length, cfg.ego_width);

        let limit = map.lane(path.lane(cur)).speed_limit;
        let mut a = cfg.tracking_gain * (limit + cfg.speed_bias - v);

        let v_pred = v.max(cfg.creep_speed);
        if let Some(tau) = first_conflict(&path, cur, lateral, v_pred, &perceived, &ego_now, cfg) {
            if v <= 0.0 {
                a = 0.0;
            } else {
                let room = v_pred * tau - cfg.stop_buffer;
                let brake = if room > 0.05 { -v * v / (2.0 * room) } else { cfg.max_brake };
                a = a.min(brake);
            }
        }

        let left = path.remaining(cur);
        if left <= 0.01 {
            a = if v > 0.0 { -v / dt } else { 0.0 };
        } else {
            let need = -v * v / (2.0 * left);
            if need < -cfg.arrival_decel {
                a = a.min(need);
            }
        }

        let a = a.clamp(cfg.max_brake, cfg.max_accel);
        let v_next = quantized_speed(v, a, cfg);
        let dist = 0.5 * (v + v_next) * dt;

        let mut next_lateral = lateral;
        if lateral != 0.0 && v > cfg.lane_change_min_speed {
            let reference = map.lane(path.lane(cur));
            let blocked = perceived.iter().any(|(st, _, _)| {
                st.position.dist(pos) < cfg.lane_change_block
                    && reference.project(st.position).1.abs() < reference.width / 2.0
            });
            if !blocked {
                let step = reference.width / cfg.lane_change_duration * dt;
                next_lateral = if lateral.abs() <= step { 0.0 } else { lateral - step * lateral.signum() };
            }
        }
        lateral_rate = (next_lateral - lateral) / dt;
        let (next_cur, shift) = path.advance(cur, dist);
        cur = next_cur;
        lateral = next_lateral + shift;
        v = v_next;
    }

    for j in 1..ego.len() {
        ego[j].acceleration = round9((ego[j].speed - ego[j - 1].speed) / dt);
    }

    Ok(Trace {
        map_id: map.name().to_string(),
        scenario_id: String::new(),
        dt,
        duration: s.duration,
        ego_dimensions: cfg.ego_dimensions(),
        obstacle_info: s
            .obstacles
            .iter()
            .map(|o| ObstacleInfo {
                id: o.id,
                kind: o.kind,
                length: o.length,
                width: o.width,
                height: o.height,
                mobility: o.mobility,
            })
            .collect(),
        ego,
        obstacles: trajectories.into_iter().map(|t| t.states).collect(),
    })
}
