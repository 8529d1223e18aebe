//! Oriented-rectangle footprints and their exact planar distance.

use crate::geometry::{closest_on_segment, MapPoint};
use serde::{Deserialize, Serialize};

/// An actor footprint: rectangle of `length` along `heading` and `width`
/// across it, centered at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolygonPose {
    pub center: MapPoint,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl PolygonPose {
    pub fn new(center: MapPoint, heading: f64, length: f64, width: f64) -> Self {
        Self { center, heading, length, width }
    }

    /// Unit vectors along and across the heading.
    pub fn axes(&self) -> (MapPoint, MapPoint) {
        let (s, c) = self.heading.sin_cos();
        (MapPoint::new(c, s), MapPoint::new(-s, c))
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [MapPoint; 4] {
        let (u, v) = self.axes();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        let c = self.center;
        [c + u * hl + v * hw, c - u * hl + v * hw, c - u * hl - v * hw, c + u * hl - v * hw]
    }

    pub fn edges(&self) -> [(MapPoint, MapPoint); 4] {
        let k = self.corners();
        [(k[0], k[1]), (k[1], k[2]), (k[2], k[3]), (k[3], k[0])]
    }

    /// Radius of the circumscribed circle.
    pub fn radius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }

    /// Point expressed in this footprint's body frame (x forward, y left).
    pub fn to_local(&self, p: MapPoint) -> MapPoint {
        let (u, v) = self.axes();
        let d = p - self.center;
        MapPoint::new(d.dot(u), d.dot(v))
    }

    pub fn contains(&self, p: MapPoint) -> bool {
        let q = self.to_local(p);
        q.x.abs() <= self.length / 2.0 && q.y.abs() <= self.width / 2.0
    }

    /// Distance from `p` to the rectangle (0 inside).
    pub fn point_distance(&self, p: MapPoint) -> f64 {
        let q = self.to_local(p);
        let dx = (q.x.abs() - self.length / 2.0).max(0.0);
        let dy = (q.y.abs() - self.width / 2.0).max(0.0);
        dx.hypot(dy)
    }
}

fn separated_on_axes(a: &PolygonPose, ca: &[MapPoint; 4], cb: &[MapPoint; 4]) -> bool {
    let (u, v) = a.axes();
    for axis in [u, v] {
        let (amin, amax) = extent(ca, axis);
        let (bmin, bmax) = extent(cb, axis);
        if amax < bmin || bmax < amin {
            return true;
        }
    }
    false
}

fn extent(pts: &[MapPoint; 4], axis: MapPoint) -> (f64, f64) {
    pts.iter().map(|p| p.dot(axis)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)))
}

/// True when the two rectangles share at least one point.
pub fn overlaps(a: &PolygonPose, b: &PolygonPose) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    !(separated_on_axes(a, &ca, &cb) || separated_on_axes(b, &cb, &ca))
}

fn segment_distance(p1: MapPoint, p2: MapPoint, q1: MapPoint, q2: MapPoint) -> f64 {
    [
        p1.dist(closest_on_segment(p1, q1, q2).0),
        p2.dist(closest_on_segment(p2, q1, q2).0),
        q1.dist(closest_on_segment(q1, p1, p2).0),
        q2.dist(closest_on_segment(q2, p1, p2).0),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

/// Minimum Euclidean distance between two oriented rectangles; 0 when they
/// overlap or touch.
pub fn polygon_distance(a: &PolygonPose, b: &PolygonPose) -> f64 {
    if overlaps(a, b) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (p1, p2) in a.edges() {
        for (q1, q2) in b.edges() {
            best = best.min(segment_distance(p1, p2, q1, q2));
        }
    }
    best
}

/// Cheap lower bound used to skip exact checks for far-apart actors.
pub fn distance_lower_bound(a: &PolygonPose, b: &PolygonPose) -> f64 {
    (a.center.dist(b.center) - a.radius() - b.radius()).max(0.0)
}

fn segment_intersection(p1: MapPoint, p2: MapPoint, q1: MapPoint, q2: MapPoint) -> Option<MapPoint> {
    let r = p2 - p1;
    let s = q2 - q1;
    let denom = r.cross(s);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (q1 - p1).cross(s) / denom;
    let u = (q1 - p1).cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(p1 + r * t)
    } else {
        None
    }
}

/// Representative contact point of two touching rectangles: the centroid of
/// contained corners and edge crossings, or the point of `b` nearest to
/// `a`'s center when the contact is degenerate.
pub fn contact_point(a: &PolygonPose, b: &PolygonPose) -> MapPoint {
    let mut pts: Vec<MapPoint> = Vec::new();
    pts.extend(a.corners().into_iter().filter(|p| b.contains(*p)));
    pts.extend(b.corners().into_iter().filter(|p| a.contains(*p)));
    for (p1, p2) in a.edges() {
        for (q1, q2) in b.edges() {
            if let Some(x) = segment_intersection(p1, p2, q1, q2) {
                pts.push(x);
            }
        }
    }
    if pts.is_empty() {
        return b
            .edges()
            .into_iter()
            .map(|(q1, q2)| closest_on_segment(a.center, q1, q2).0)
            .min_by(|x, y| x.dist(a.center).total_cmp(&y.dist(a.center)))
            .unwrap_or(b.center);
    }
    let n = pts.len() as f64;
    let sum = pts.into_iter().fold(MapPoint::default(), |acc, p| acc + p);
    sum * (1.0 / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn square(x: f64, y: f64) -> PolygonPose {
        PolygonPose::new(MapPoint::new(x, y), 0.0, 1.0, 1.0)
    }

    #[test]
    fn identical_poses_touch() {
        let a = PolygonPose::new(MapPoint::new(2.0, -1.0), 0.7, 4.0, 2.0);
        assert_eq!(polygon_distance(&a, &a), 0.0);
    }

    #[test]
    fn face_to_face_gap() {
        assert!((polygon_distance(&square(0.0, 0.0), &square(3.0, 0.0)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn corner_to_face_gap() {
        let diamond = PolygonPose::new(MapPoint::new(3.0, 0.0), FRAC_PI_4, 1.0, 1.0);
        let expected = 3.0 - 0.5 - 0.5 * 2f64.sqrt();
        assert!((polygon_distance(&square(0.0, 0.0), &diamond) - expected).abs() < 1e-12);
    }

    #[test]
    fn touching_edges_are_zero() {
        assert_eq!(polygon_distance(&square(0.0, 0.0), &square(1.0, 0.0)), 0.0);
    }

    #[test]
    fn contact_in_front_is_ahead_of_center() {
        let ego = PolygonPose::new(MapPoint::new(0.0, 0.0), 0.0, 4.0, 2.0);
        let obs = square(2.3, 0.0);
        let c = contact_point(&ego, &obs);
        assert!((c.x - 1.9).abs() < 1e-9 && c.y.abs() < 1e-9, "{c:?}");
    }
}
