//! Obstacle motion: constant speed along the routed path, then parked.

use super::ActorState;
use crate::genome::{Mobility, ObstacleGenome};
use crate::geometry::MapPoint;
use crate::lane_map::{LaneMap, RoutePath, SegmentEntry};
use thiserror::Error;

/// Longitudinal distance over which an obstacle drifts into a neighbor lane.
pub const LANE_CHANGE_RUN: f64 = 10.0;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("obstacle {0} has no route from start to end")]
    NoRoute(u32),
}

/// Piecewise-linear path with cumulative arc length.
#[derive(Debug, Clone)]
pub struct PathLine {
    points: Vec<MapPoint>,
    cumulative: Vec<f64>,
}

impl PathLine {
    pub fn new(raw: Vec<MapPoint>) -> Self {
        let mut points: Vec<MapPoint> = Vec::with_capacity(raw.len());
        for p in raw {
            if points.last().is_none_or(|q| q.dist(p) > 1e-9) {
                points.push(p);
            }
        }
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                acc += p.dist(points[i - 1]);
            }
            cumulative.push(acc);
        }
        Self { points, cumulative }
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Position and tangent heading at arc length `d` (clamped).
    pub fn pose_at(&self, d: f64) -> (MapPoint, f64) {
        let n = self.points.len();
        if n == 1 {
            return (self.points[0], 0.0);
        }
        let d = d.clamp(0.0, self.length());
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&d)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let a = self.points[i];
        let b = self.points[i + 1];
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let t = (d - self.cumulative[i]) / seg;
        let dir = b - a;
        (a + dir * t, dir.y.atan2(dir.x))
    }
}

/// Geometric polyline of a route, drifting diagonally across lane changes.
pub fn route_polyline(map: &LaneMap, route: &RoutePath) -> PathLine {
    let mut pts: Vec<MapPoint> = Vec::new();
    for seg in &route.segments {
        let lane = map.lane(seg.lane);
        let from = match seg.entry {
            SegmentEntry::LaneChange => seg.s_start + LANE_CHANGE_RUN,
            _ => seg.s_start,
        };
        let from = from.min(seg.s_end);
        pts.push(lane.point_at(from, 0.0));
        for (k, &c) in lane.cumulative().iter().enumerate() {
            if c > from && c < seg.s_end {
                pts.push(lane.centerline[k]);
            }
        }
        pts.push(lane.point_at(seg.s_end, 0.0));
    }
    PathLine::new(pts)
}

#[derive(Debug, Clone)]
pub struct ObstacleTrajectory {
    pub id: u32,
    pub length: f64,
    pub width: f64,
    pub states: Vec<ActorState>,
}

/// Ticks in a series covering `duration` at step `dt`, both endpoints included.
pub fn tick_count(duration: f64, dt: f64) -> usize {
    ((duration / dt) - 1e-9).ceil().max(0.0) as usize + 1
}

/// Per-tick obstacle states. Values are rounded to the record grid.
pub fn build_trajectory(
    g: &ObstacleGenome,
    map: &LaneMap,
    duration: f64,
    dt: f64,
) -> Result<ObstacleTrajectory, TrajectoryError> {
    let n = tick_count(duration, dt);
    let states = match g.mobility {
        Mobility::Static => vec![ActorState::new(g.start, g.heading, 0.0); n],
        Mobility::Dynamic => {
            let route = map.shortest_route(g.start, g.end).ok().flatten().ok_or(TrajectoryError::NoRoute(g.id))?;
            let path = route_polyline(map, &route);
            let total = path.length();
            (0..n)
                .map(|j| {
                    let d = g.speed * j as f64 * dt;
                    let (p, h) = path.pose_at(d);
                    let speed = if d < total { g.speed } else { 0.0 };
                    ActorState::new(p, h, speed)
                })
                .collect()
        }
    };
    Ok(ObstacleTrajectory {
        id: g.id,
        length: g.length,
        width: g.width,
        states: states.into_iter().map(|s| s.rounded()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validity::ObstacleKind;

    fn corridor() -> LaneMap {
        LaneMap::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../maps/straight_corridor.json")).unwrap()
    }

    fn vehicle(mobility: Mobility, end_x: f64) -> ObstacleGenome {
        ObstacleGenome {
            id: 1,
            start: MapPoint::new(0.0, -1.75),
            end: MapPoint::new(end_x, -1.75),
            heading: 0.0,
            length: 4.5,
            width: 1.8,
            height: 1.5,
            speed: 10.0,
            kind: ObstacleKind::Vehicle,
            mobility,
        }
    }

    #[test]
    fn series_length_includes_both_ends() {
        assert_eq!(tick_count(30.0, 0.1), 301);
        assert_eq!(tick_count(0.25, 0.1), 4);
    }

    #[test]
    fn static_obstacle_holds_pose() {
        let t = build_trajectory(&vehicle(Mobility::Static, 0.0), &corridor(), 30.0, 0.1).unwrap();
        assert!(t.states.iter().all(|s| *s == t.states[0]));
    }

    #[test]
    fn constant_speed_on_straight_lane() {
        let t = build_trajectory(&vehicle(Mobility::Dynamic, 400.0), &corridor(), 30.0, 0.1).unwrap();
        for (j, s) in t.states.iter().enumerate() {
            assert!((s.position.x - 10.0 * j as f64 * 0.1).abs() < 1e-6);
            assert_eq!(s.heading, 0.0);
        }
    }

    #[test]
    fn parks_at_route_end() {
        let t = build_trajectory(&vehicle(Mobility::Dynamic, 50.0), &corridor(), 30.0, 0.1).unwrap();
        let last = t.states.last().unwrap();
        assert!((last.position.x - 50.0).abs() < 1e-9);
        assert_eq!(last.speed, 0.0);
        assert_eq!(t.states[100].position, last.position);
    }

    #[test]
    fn lane_change_drifts_diagonally() {
        let mut g = vehicle(Mobility::Dynamic, 200.0);
        g.start = MapPoint::new(0.0, 1.75);
        let t = build_trajectory(&g, &corridor(), 30.0, 0.1).unwrap();
        // halfway through the drift the obstacle is between the two lanes
        let mid = t.states[5];
        assert!(mid.position.y < 1.0 && mid.position.y > -1.0, "{mid:?}");
        assert!((t.states[20].position.y + 1.75).abs() < 1e-9);
    }
}
