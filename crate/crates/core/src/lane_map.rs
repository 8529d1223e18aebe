//! Directed lane graph: loading, validation, point projection, routing and
//! centerline geometry queries.
//!
//! Lanes are polylines with a width and speed limit. Successor links join
//! consecutive lanes end-to-start; left/right neighbor links join parallel
//! lanes with the same travel direction and are the only place a lane change
//! can happen. The map is immutable once loaded.

use crate::geometry::{closest_on_segment, wrap_angle, MapPoint};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;
use thiserror::Error;

/// Successor lanes must start within this distance of their predecessor's end.
pub const JOIN_TOLERANCE: f64 = 0.5;
/// Extra slack beyond half the lane width before a point counts as off-map.
pub const OFF_MAP_SLACK: f64 = 2.0;
/// Default routing cost of one lane change, in meters.
pub const DEFAULT_LANE_CHANGE_PENALTY: f64 = 5.0;
/// Allowed excess over the half-width sum when switching to a neighbor lane.
pub const NEIGHBOR_SLACK: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("cannot read map: {0}")]
    Io(#[from] std::io::Error),
    #[error("map parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("map must contain ≥1 lane")]
    Empty,
    #[error("invalid bounding box: {0}")]
    BoundingBox(String),
    #[error("lane `{lane}`: {reason}")]
    InvalidLane { lane: String, reason: String },
    #[error("point ({x:.3}, {y:.3}) is off the map")]
    OffMap { x: f64, y: f64 },
    #[error("unknown lane `{0}`")]
    UnknownLane(String),
    #[error("arc length {s} outside lane `{lane}` (length {length})")]
    OutOfRange { lane: String, s: f64, length: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: MapPoint) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

/// On-disk lane record.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LaneRecord {
    id: String,
    width_m: f64,
    speed_limit_mps: f64,
    centerline: Vec<MapPoint>,
    #[serde(default)]
    successors: Vec<String>,
    #[serde(default)]
    predecessors: Vec<String>,
    #[serde(default)]
    left_neighbor: Option<String>,
    #[serde(default)]
    right_neighbor: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MapRecord {
    #[serde(default)]
    name: Option<String>,
    bounding_box: BoundingBox,
    lanes: Vec<LaneRecord>,
}

#[derive(Debug, Clone)]
pub struct Lane {
    pub id: String,
    pub width: f64,
    pub speed_limit: f64,
    pub centerline: Vec<MapPoint>,
    pub successors: Vec<String>,
    pub predecessors: Vec<String>,
    pub left_neighbor: Option<String>,
    pub right_neighbor: Option<String>,
    /// Arc length at each centerline vertex.
    cumulative: Vec<f64>,
}

impl Lane {
    fn from_record(r: LaneRecord) -> Self {
        let mut cumulative = Vec::with_capacity(r.centerline.len());
        let mut acc = 0.0;
        for (i, p) in r.centerline.iter().enumerate() {
            if i > 0 {
                acc += p.dist(r.centerline[i - 1]);
            }
            cumulative.push(acc);
        }
        Lane {
            id: r.id,
            width: r.width_m,
            speed_limit: r.speed_limit_mps,
            centerline: r.centerline,
            successors: r.successors,
            predecessors: r.predecessors,
            left_neighbor: r.left_neighbor,
            right_neighbor: r.right_neighbor,
            cumulative,
        }
    }

    fn to_record(&self) -> LaneRecord {
        LaneRecord {
            id: self.id.clone(),
            width_m: self.width,
            speed_limit_mps: self.speed_limit,
            centerline: self.centerline.clone(),
            successors: self.successors.clone(),
            predecessors: self.predecessors.clone(),
            left_neighbor: self.left_neighbor.clone(),
            right_neighbor: self.right_neighbor.clone(),
        }
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Arc length at each centerline vertex.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn start(&self) -> MapPoint {
        self.centerline[0]
    }

    pub fn end(&self) -> MapPoint {
        *self.centerline.last().expect("validated lane has points")
    }

    fn segment_count(&self) -> usize {
        self.centerline.len() - 1
    }

    /// Index of the segment containing arc length `s` (clamped).
    fn segment_at(&self, s: f64) -> usize {
        let n = self.segment_count();
        // first segment whose end reaches s
        let idx = self.cumulative[1..].partition_point(|&c| c < s);
        idx.min(n - 1)
    }

    fn segment_heading(&self, i: usize) -> f64 {
        let d = self.centerline[i + 1] - self.centerline[i];
        wrap_angle(d.y.atan2(d.x))
    }

    /// Centerline point at arc length `s`, shifted `lateral` meters to the
    /// left of the travel direction. `s` is clamped to the lane.
    pub fn point_at(&self, s: f64, lateral: f64) -> MapPoint {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let a = self.centerline[i];
        let b = self.centerline[i + 1];
        let seg_len = self.cumulative[i + 1] - self.cumulative[i];
        let t = ((s - self.cumulative[i]) / seg_len).clamp(0.0, 1.0);
        let dir = b - a;
        a + dir * t + dir.left_normal() * lateral
    }

    /// Smoothed centerline tangent at `s`: segment headings are anchored at
    /// segment midpoints and interpolated between them.
    pub fn heading_at_clamped(&self, s: f64) -> f64 {
        let n = self.segment_count();
        let mid = |i: usize| 0.5 * (self.cumulative[i] + self.cumulative[i + 1]);
        if n == 1 || s <= mid(0) {
            return self.segment_heading(0);
        }
        if s >= mid(n - 1) {
            return self.segment_heading(n - 1);
        }
        let i = self.segment_at(s);
        let (lo, hi) = if s < mid(i) { (i - 1, i) } else { (i, i + 1) };
        let (m0, m1) = (mid(lo), mid(hi));
        let (h0, h1) = (self.segment_heading(lo), self.segment_heading(hi));
        let t = (s - m0) / (m1 - m0);
        wrap_angle(h0 + wrap_angle(h1 - h0) * t)
    }

    /// Projects `p` onto this lane: (arc length, signed lateral offset,
    /// Euclidean distance to the centerline).
    pub fn project(&self, p: MapPoint) -> (f64, f64, f64) {
        let mut best = (0.0, 0.0, f64::INFINITY);
        for i in 0..self.segment_count() {
            let a = self.centerline[i];
            let b = self.centerline[i + 1];
            let (foot, t) = closest_on_segment(p, a, b);
            let d = p.dist(foot);
            if d < best.2 {
                let side = (b - a).cross(p - a);
                let lateral = if side < 0.0 { -d } else { d };
                let s = self.cumulative[i] + t * (self.cumulative[i + 1] - self.cumulative[i]);
                best = (s, lateral, d);
            }
        }
        best
    }
}

/// Result of projecting a point onto the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub lane: usize,
    pub s: f64,
    /// Positive to the left of the lane's travel direction.
    pub lateral: f64,
    pub distance: f64,
}

/// How a route segment was entered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentEntry {
    Start,
    Successor,
    LaneChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSegment {
    pub lane: usize,
    pub s_start: f64,
    pub s_end: f64,
    pub entry: SegmentEntry,
}

impl RouteSegment {
    pub fn length(&self) -> f64 {
        self.s_end - self.s_start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutePath {
    pub lane_sequence: Vec<String>,
    pub start_offset: f64,
    pub end_offset: f64,
    /// Sum of traversed arc lengths; lane-change penalties excluded.
    pub total_length: f64,
    /// Routing cost: `total_length` plus one penalty per lane change.
    pub cost: f64,
    pub segments: Vec<RouteSegment>,
}

impl RoutePath {
    pub fn lane_changes(&self) -> usize {
        self.segments.iter().filter(|s| s.entry == SegmentEntry::LaneChange).count()
    }
}

#[derive(Debug, Clone)]
pub struct LaneMap {
    name: String,
    bounding_box: BoundingBox,
    lanes: Vec<Lane>,
    index: HashMap<String, usize>,
    lane_change_penalty: f64,
}

impl LaneMap {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MapError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "map".to_owned());
        Self::from_json(&text, &stem)
    }

    /// Parses and validates a map document. `default_name` is used when the
    /// document carries no `name`.
    pub fn from_json(text: &str, default_name: &str) -> Result<Self, MapError> {
        let record: MapRecord = serde_json::from_str(text)?;
        let name = record.name.clone().unwrap_or_else(|| default_name.to_owned());
        Self::from_parts(name, record.bounding_box, record.lanes.into_iter().map(Lane::from_record).collect())
    }

    fn from_parts(name: String, bounding_box: BoundingBox, lanes: Vec<Lane>) -> Result<Self, MapError> {
        let mut index = HashMap::with_capacity(lanes.len());
        for (i, l) in lanes.iter().enumerate() {
            if index.insert(l.id.clone(), i).is_some() {
                return Err(invalid(&l.id, "duplicate lane id"));
            }
        }
        let map = LaneMap { name, bounding_box, lanes, index, lane_change_penalty: DEFAULT_LANE_CHANGE_PENALTY };
        map.validate()?;
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        let record = MapRecord {
            name: Some(self.name.clone()),
            bounding_box: self.bounding_box,
            lanes: self.lanes.iter().map(Lane::to_record).collect(),
        };
        serde_json::to_string_pretty(&record).expect("map serializes")
    }

    pub fn with_lane_change_penalty(mut self, penalty: f64) -> Self {
        self.lane_change_penalty = penalty;
        self
    }

    fn validate(&self) -> Result<(), MapError> {
        if self.lanes.is_empty() {
            return Err(MapError::Empty);
        }
        let bb = &self.bounding_box;
        if !(bb.min_x.is_finite() && bb.max_x.is_finite() && bb.min_y.is_finite() && bb.max_y.is_finite())
            || bb.min_x >= bb.max_x
            || bb.min_y >= bb.max_y
        {
            return Err(MapError::BoundingBox(format!("{bb:?}")));
        }
        for lane in &self.lanes {
            let id = &lane.id;
            if lane.centerline.len() < 2 {
                return Err(invalid(id, "centerline needs at least 2 points"));
            }
            if lane.centerline.iter().any(|p| !p.is_finite()) {
                return Err(invalid(id, "non-finite centerline point"));
            }
            if lane.centerline.windows(2).any(|w| w[0].dist(w[1]) < 1e-9) {
                return Err(invalid(id, "zero-length centerline segment"));
            }
            if let Some(p) = lane.centerline.iter().find(|p| !bb.contains(**p)) {
                return Err(invalid(id, &format!("centerline point ({}, {}) outside bounding box", p.x, p.y)));
            }
            if !(lane.width.is_finite() && lane.width > 0.0) {
                return Err(invalid(id, "width must be > 0"));
            }
            if !(lane.speed_limit.is_finite() && lane.speed_limit > 0.0) {
                return Err(invalid(id, "speed limit must be > 0"));
            }
            for succ in &lane.successors {
                let other = self.lane_checked(id, succ, "successor")?;
                if !other.predecessors.contains(id) {
                    return Err(invalid(id, &format!("successor `{succ}` does not list it as predecessor")));
                }
                let gap = lane.end().dist(other.start());
                if gap > JOIN_TOLERANCE {
                    return Err(invalid(id, &format!("successor `{succ}` starts {gap:.3} m from lane end")));
                }
            }
            for pred in &lane.predecessors {
                let other = self.lane_checked(id, pred, "predecessor")?;
                if !other.successors.contains(id) {
                    return Err(invalid(id, &format!("predecessor `{pred}` does not list it as successor")));
                }
            }
            if let Some(left) = &lane.left_neighbor {
                let other = self.lane_checked(id, left, "left neighbor")?;
                if other.right_neighbor.as_deref() != Some(id.as_str()) {
                    return Err(invalid(id, &format!("left neighbor `{left}` is not symmetric")));
                }
            }
            if let Some(right) = &lane.right_neighbor {
                let other = self.lane_checked(id, right, "right neighbor")?;
                if other.left_neighbor.as_deref() != Some(id.as_str()) {
                    return Err(invalid(id, &format!("right neighbor `{right}` is not symmetric")));
                }
            }
        }
        Ok(())
    }

    fn lane_checked(&self, from: &str, id: &str, what: &str) -> Result<&Lane, MapError> {
        self.lane_by_id(id).ok_or_else(|| invalid(from, &format!("{what} `{id}` does not exist")))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bounding_box(&self) -> BoundingBox {
        self.bounding_box
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn lane(&self, idx: usize) -> &Lane {
        &self.lanes[idx]
    }

    pub fn lane_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn lane_by_id(&self, id: &str) -> Option<&Lane> {
        self.lane_index(id).map(|i| &self.lanes[i])
    }

    pub fn lane_change_penalty(&self) -> f64 {
        self.lane_change_penalty
    }

    pub fn total_length(&self) -> f64 {
        self.lanes.iter().map(Lane::length).sum()
    }

    /// Nearest lane to `p`; ties go to the lane listed first.
    pub fn project(&self, p: MapPoint) -> Result<Projection, MapError> {
        if !p.is_finite() {
            return Err(MapError::OffMap { x: p.x, y: p.y });
        }
        let mut best: Option<Projection> = None;
        for (i, lane) in self.lanes.iter().enumerate() {
            let (s, lateral, distance) = lane.project(p);
            if distance > lane.width / 2.0 + OFF_MAP_SLACK {
                continue;
            }
            if best.is_none_or(|b| distance < b.distance) {
                best = Some(Projection { lane: i, s, lateral, distance });
            }
        }
        best.ok_or(MapError::OffMap { x: p.x, y: p.y })
    }

    /// Tangent of lane `lane_id` at arc length `s`, counter-clockwise from +x.
    pub fn heading_at(&self, lane_id: &str, s: f64) -> Result<f64, MapError> {
        let lane = self.lane_by_id(lane_id).ok_or_else(|| MapError::UnknownLane(lane_id.to_owned()))?;
        let len = lane.length();
        if !(s >= -1e-9 && s <= len + 1e-9) {
            return Err(MapError::OutOfRange { lane: lane_id.to_owned(), s, length: len });
        }
        Ok(lane.heading_at_clamped(s))
    }

    /// Minimum-cost route from `src` to `dst` over successor links and
    /// lane-change links (each lane change costs the map's penalty).
    /// `Ok(None)` when `dst` cannot be reached.
    pub fn shortest_route(&self, src: MapPoint, dst: MapPoint) -> Result<Option<RoutePath>, MapError> {
        let a = self.project(src)?;
        let b = self.project(dst)?;
        Ok(self.route_between(a.lane, a.s, b.lane, b.s))
    }

    /// Routing between two lane positions.
    pub fn route_between(&self, src_lane: usize, src_s: f64, dst_lane: usize, dst_s: f64) -> Option<RoutePath> {
        // Search states are (lane, entry arc length). A lane is entered at 0
        // through a successor link or at the current arc length through a
        // lane change, which keeps the set of states finite.
        let mut states: Vec<(usize, f64)> = Vec::new();
        let mut state_ids: HashMap<(usize, u64), usize> = HashMap::new();
        let mut dist: Vec<f64> = Vec::new();
        let mut parent: Vec<Option<(usize, SegmentEntry)>> = Vec::new();
        let mut heap = BinaryHeap::new();

        let mut intern = |lane: usize,
                          s: f64,
                          states: &mut Vec<(usize, f64)>,
                          dist: &mut Vec<f64>,
                          parent: &mut Vec<Option<(usize, SegmentEntry)>>| {
            *state_ids.entry((lane, s.to_bits())).or_insert_with(|| {
                states.push((lane, s));
                dist.push(f64::INFINITY);
                parent.push(None);
                states.len() - 1
            })
        };

        let start = intern(src_lane, src_s, &mut states, &mut dist, &mut parent);
        dist[start] = 0.0;
        heap.push(HeapItem { cost: 0.0, node: Node::State(start) });
        let mut goal: Option<(usize, f64)> = None;

        while let Some(HeapItem { cost, node }) = heap.pop() {
            let sid = match node {
                Node::Goal(sid) => {
                    goal = Some((sid, cost));
                    break;
                }
                Node::State(sid) => sid,
            };
            if cost > dist[sid] {
                continue;
            }
            let (lane_idx, s_in) = states[sid];
            let lane = &self.lanes[lane_idx];
            if lane_idx == dst_lane && s_in <= dst_s + 1e-9 {
                heap.push(HeapItem { cost: cost + (dst_s - s_in).max(0.0), node: Node::Goal(sid) });
            }
            let remaining = (lane.length() - s_in).max(0.0);
            for succ in &lane.successors {
                let Some(si) = self.lane_index(succ) else {
                    continue;
                };
                let nid = intern(si, 0.0, &mut states, &mut dist, &mut parent);
                let c = cost + remaining;
                if c < dist[nid] {
                    dist[nid] = c;
                    parent[nid] = Some((sid, SegmentEntry::Successor));
                    heap.push(HeapItem { cost: c, node: Node::State(nid) });
                }
            }
            for nb in [&lane.left_neighbor, &lane.right_neighbor].into_iter().flatten() {
                let Some(ni) = self.lane_index(nb) else {
                    continue;
                };
                // only where the neighbor runs alongside this position
                let other = &self.lanes[ni];
                let (s, _, d) = other.project(lane.point_at(s_in, 0.0));
                if d > 0.5 * (lane.width + other.width) + NEIGHBOR_SLACK {
                    continue;
                }
                let nid = intern(ni, s, &mut states, &mut dist, &mut parent);
                let c = cost + self.lane_change_penalty;
                if c < dist[nid] {
                    dist[nid] = c;
                    parent[nid] = Some((sid, SegmentEntry::LaneChange));
                    heap.push(HeapItem { cost: c, node: Node::State(nid) });
                }
            }
        }

        let (goal_sid, cost) = goal?;
        // walk back to the start
        let mut chain = vec![goal_sid];
        let mut entries = Vec::new();
        let mut cur = goal_sid;
        while let Some((prev, entry)) = parent[cur] {
            entries.push(entry);
            chain.push(prev);
            cur = prev;
        }
        chain.reverse();
        entries.reverse();

        let mut segments = Vec::with_capacity(chain.len());
        for (k, &sid) in chain.iter().enumerate() {
            let (lane_idx, s_in) = states[sid];
            let entry = if k == 0 { SegmentEntry::Start } else { entries[k - 1] };
            let s_end = if k + 1 == chain.len() {
                dst_s
            } else {
                match entries[k] {
                    SegmentEntry::Successor => self.lanes[lane_idx].length(),
                    _ => s_in,
                }
            };
            segments.push(RouteSegment { lane: lane_idx, s_start: s_in, s_end, entry });
        }
        let total_length = segments.iter().map(RouteSegment::length).sum();
        Some(RoutePath {
            lane_sequence: segments.iter().map(|s| self.lanes[s.lane].id.clone()).collect(),
            start_offset: segments[0].s_start,
            end_offset: segments.last().map(|s| s.s_end).unwrap_or(dst_s),
            total_length,
            cost,
            segments,
        })
    }

    /// Uniform random point on the lane network (lanes weighted by length).
    pub fn sample_lane_position<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let total = self.total_length();
        let mut target = rng.gen_range(0.0..total);
        for (i, lane) in self.lanes.iter().enumerate() {
            let len = lane.length();
            if target < len {
                return (i, target);
            }
            target -= len;
        }
        let last = self.lanes.len() - 1;
        (last, self.lanes[last].length())
    }
}

fn invalid(lane: &str, reason: &str) -> MapError {
    MapError::InvalidLane { lane: lane.to_owned(), reason: reason.to_owned() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    State(usize),
    Goal(usize),
}

#[derive(Debug)]
struct HeapItem {
    cost: f64,
    node: Node,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // min-heap on cost; goals before states on ties, then lower ids
    fn cmp(&self, other: &Self) -> Ordering {
        let key = |n: &Node| match *n {
            Node::Goal(i) => (0, i),
            Node::State(i) => (1, i),
        };
        other.cost.total_cmp(&self.cost).then_with(|| key(&other.node).cmp(&key(&self.node)))
    }
}
