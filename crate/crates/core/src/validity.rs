//! Domain constraints on obstacles: per-kind size and speed bounds, heading
//! range, map containment and route existence. Also repair of invalid
//! genomes and sampling of fresh valid ones.

use crate::genome::{Gene, Mobility, ObstacleGenome};
use crate::geometry::{is_valid_heading, MapPoint};
use crate::lane_map::LaneMap;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Route repair resamples only the end point this many times before
/// resampling both endpoints.
pub const END_ONLY_ATTEMPTS: usize = 100;
/// Total resampling budget before a map is considered degenerate.
pub const MAX_ATTEMPTS: usize = 1000;

pub fn kmh(v: f64) -> f64 {
    v / 3.6
}

pub fn to_kmh(v: f64) -> f64 {
    v * 3.6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ObstacleKind {
    Vehicle,
    Pedestrian,
    Bicycle,
}

impl ObstacleKind {
    pub const ALL: [ObstacleKind; 3] = [ObstacleKind::Vehicle, ObstacleKind::Pedestrian, ObstacleKind::Bicycle];

    pub fn as_str(self) -> &'static str {
        match self {
            ObstacleKind::Vehicle => "VEHICLE",
            ObstacleKind::Pedestrian => "PEDESTRIAN",
            ObstacleKind::Bicycle => "BICYCLE",
        }
    }
}

impl fmt::Display for ObstacleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Closed interval `[min, max]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }
}

impl From<[f64; 2]> for Bounds {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Bounds> for [f64; 2] {
    fn from(b: Bounds) -> Self {
        [b.min, b.max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeBounds {
    pub width: Bounds,
    pub length: Bounds,
    pub height: Bounds,
    pub speed: Bounds,
}

impl TypeBounds {
    fn check(&self) -> Result<(), String> {
        for (name, b) in
            [("width", self.width), ("length", self.length), ("height", self.height), ("speed", self.speed)]
        {
            if !(b.min.is_finite() && b.max.is_finite() && b.min > 0.0 && b.min <= b.max) {
                return Err(format!("{name} bounds must satisfy 0 < min <= max, got [{}, {}]", b.min, b.max));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("cannot read constraint table: {0}")]
    Io(#[from] std::io::Error),
    #[error("constraint table parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid constraint table: {0}")]
    Invalid(String),
}

/// Per-kind size/speed bounds plus the static share used when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintTable {
    pub vehicle: TypeBounds,
    pub pedestrian: TypeBounds,
    pub bicycle: TypeBounds,
    /// Probability that a sampled obstacle is static.
    pub static_probability: f64,
}

impl Default for ConstraintTable {
    fn default() -> Self {
        ConstraintTable {
            vehicle: TypeBounds {
                width: Bounds::new(1.5, 2.6),
                length: Bounds::new(3.5, 12.0),
                height: Bounds::new(1.3, 4.1),
                speed: Bounds::new(kmh(8.0), kmh(110.0)),
            },
            pedestrian: TypeBounds {
                width: Bounds::new(0.24, 0.67),
                length: Bounds::new(0.2, 0.45),
                height: Bounds::new(0.97, 1.87),
                speed: Bounds::new(kmh(4.5), kmh(10.5)),
            },
            bicycle: TypeBounds {
                width: Bounds::new(0.4, 0.8),
                length: Bounds::new(1.5, 2.0),
                height: Bounds::new(1.0, 1.8),
                speed: Bounds::new(kmh(6.0), kmh(30.0)),
            },
            static_probability: 0.1,
        }
    }
}

impl ConstraintTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConstraintError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Parses a TOML table; omitted sections keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self, ConstraintError> {
        let table: ConstraintTable = toml::from_str(text)?;
        table.check()?;
        Ok(table)
    }

    pub fn check(&self) -> Result<(), ConstraintError> {
        for kind in ObstacleKind::ALL {
            self.bounds(kind).check().map_err(|e| ConstraintError::Invalid(format!("{kind}: {e}")))?;
        }
        if !(0.0..=1.0).contains(&self.static_probability) {
            return Err(ConstraintError::Invalid("static_probability must be in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn bounds(&self, kind: ObstacleKind) -> &TypeBounds {
        match kind {
            ObstacleKind::Vehicle => &self.vehicle,
            ObstacleKind::Pedestrian => &self.pedestrian,
            ObstacleKind::Bicycle => &self.bicycle,
        }
    }
}

/// One failed constraint. Breaches are data, not errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Breach {
    AboveMax(Gene),
    BelowMin(Gene),
    NotFinite(Gene),
    InvalidHeading,
    OffMap(Gene),
    NoValidPath,
}

impl fmt::Display for Breach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Breach::AboveMax(g) => write!(f, "{g} exceeds kind max"),
            Breach::BelowMin(g) => write!(f, "{g} below kind min"),
            Breach::NotFinite(g) => write!(f, "{g} is not finite"),
            Breach::InvalidHeading => f.write_str("heading outside (-pi, pi]"),
            Breach::OffMap(g) => write!(f, "{g} point is off the map"),
            Breach::NoValidPath => f.write_str("no valid path"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ValidityError {
    #[error("gave up after {attempts} resampling attempts; the map may be degenerate")]
    Exhausted { attempts: usize },
}

fn range_breach(gene: Gene, v: f64, b: &Bounds) -> Option<Breach> {
    if !v.is_finite() {
        Some(Breach::NotFinite(gene))
    } else if v > b.max {
        Some(Breach::AboveMax(gene))
    } else if v < b.min {
        Some(Breach::BelowMin(gene))
    } else {
        None
    }
}

/// Lists every constraint `genome` breaks; empty means valid.
pub fn validate(genome: &ObstacleGenome, table: &ConstraintTable, map: &LaneMap) -> Vec<Breach> {
    let b = table.bounds(genome.kind);
    let mut out: Vec<Breach> = [
        range_breach(Gene::Length, genome.length, &b.length),
        range_breach(Gene::Width, genome.width, &b.width),
        range_breach(Gene::Height, genome.height, &b.height),
        range_breach(Gene::Speed, genome.speed, &b.speed),
    ]
    .into_iter()
    .flatten()
    .collect();
    if !is_valid_heading(genome.heading) {
        out.push(Breach::InvalidHeading);
    }
    let start_ok = map.project(genome.start).is_ok();
    let end_ok = map.project(genome.end).is_ok();
    if !start_ok {
        out.push(Breach::OffMap(Gene::Start));
    }
    if !end_ok {
        out.push(Breach::OffMap(Gene::End));
    }
    if genome.mobility == Mobility::Dynamic && start_ok && end_ok && !route_exists(map, genome.start, genome.end) {
        out.push(Breach::NoValidPath);
    }
    out
}

fn route_exists(map: &LaneMap, a: MapPoint, b: MapPoint) -> bool {
    matches!(map.shortest_route(a, b), Ok(Some(_)))
}

/// Random point on a lane centerline plus the lane tangent there.
pub fn sample_lane_point<R: Rng + ?Sized>(map: &LaneMap, rng: &mut R) -> (MapPoint, f64) {
    let (lane, s) = map.sample_lane_position(rng);
    let l = map.lane(lane);
    (l.point_at(s, 0.0), l.heading_at_clamped(s))
}

/// Lane tangent at the projection of `p`, if it projects.
pub fn tangent_at(map: &LaneMap, p: MapPoint) -> Option<f64> {
    map.project(p).ok().map(|pr| map.lane(pr.lane).heading_at_clamped(pr.s))
}

/// Returns a genome that passes [`validate`], resampling only breached genes.
pub fn repair<R: Rng + ?Sized>(
    genome: &ObstacleGenome,
    table: &ConstraintTable,
    map: &LaneMap,
    rng: &mut R,
) -> Result<ObstacleGenome, ValidityError> {
    let breaches = validate(genome, table, map);
    if breaches.is_empty() {
        return Ok(genome.clone());
    }
    let mut g = genome.clone();
    let bounds = *table.bounds(g.kind);
    let mut reheading = false;
    let mut fix_route = false;
    for breach in &breaches {
        match *breach {
            Breach::AboveMax(gene) | Breach::BelowMin(gene) | Breach::NotFinite(gene) => match gene {
                Gene::Length => g.length = bounds.length.sample(rng),
                Gene::Width => g.width = bounds.width.sample(rng),
                Gene::Height => g.height = bounds.height.sample(rng),
                Gene::Speed => g.speed = bounds.speed.sample(rng),
                _ => {}
            },
            Breach::InvalidHeading => reheading = true,
            Breach::OffMap(Gene::Start) => {
                g.start = sample_lane_point(map, rng).0;
                reheading = true;
            }
            Breach::OffMap(_) => {
                g.end = if g.mobility == Mobility::Static { g.start } else { sample_lane_point(map, rng).0 };
                fix_route = true;
            }
            Breach::NoValidPath => fix_route = true,
        }
    }
    if g.mobility == Mobility::Dynamic && (fix_route || reheading) {
        let mut attempts = 0;
        while !route_exists(map, g.start, g.end) {
            attempts += 1;
            if attempts > MAX_ATTEMPTS {
                return Err(ValidityError::Exhausted { attempts: MAX_ATTEMPTS });
            }
            if attempts > END_ONLY_ATTEMPTS {
                g.start = sample_lane_point(map, rng).0;
                reheading = true;
            }
            g.end = sample_lane_point(map, rng).0;
        }
    }
    if reheading {
        g.heading = tangent_at(map, g.start).unwrap_or(0.0);
    }
    if g.mobility == Mobility::Static {
        g.end = g.start;
    }
    debug_assert!(validate(&g, table, map).is_empty());
    Ok(g)
}

/// Draws a fresh valid obstacle with the given id.
pub fn sample_obstacle<R: Rng + ?Sized>(
    table: &ConstraintTable,
    map: &LaneMap,
    rng: &mut R,
    id: u32,
) -> Result<ObstacleGenome, ValidityError> {
    let kind = ObstacleKind::ALL[rng.gen_range(0..ObstacleKind::ALL.len())];
    let b = *table.bounds(kind);
    let length = b.length.sample(rng);
    let width = b.width.sample(rng);
    let height = b.height.sample(rng);
    let speed = b.speed.sample(rng);
    let mobility = if rng.gen_bool(table.static_probability) { Mobility::Static } else { Mobility::Dynamic };
    let (start, heading, end) = match mobility {
        Mobility::Static => {
            let (p, h) = sample_lane_point(map, rng);
            (p, h, p)
        }
        Mobility::Dynamic => sample_route(map, rng)?,
    };
    Ok(ObstacleGenome { id, start, end, heading, length, width, height, speed, kind, mobility })
}

/// Start, its heading and a reachable end. The start is redrawn whenever
/// end draws keep failing, as in [`repair`].
fn sample_route<R: Rng + ?Sized>(map: &LaneMap, rng: &mut R) -> Result<(MapPoint, f64, MapPoint), ValidityError> {
    let (mut start, mut heading) = sample_lane_point(map, rng);
    for attempt in 1..=MAX_ATTEMPTS {
        if attempt % END_ONLY_ATTEMPTS == 0 {
            (start, heading) = sample_lane_point(map, rng);
        }
        let (p, _) = sample_lane_point(map, rng);
        if route_exists(map, start, p) {
            return Ok((start, heading, p));
        }
    }
    Err(ValidityError::Exhausted { attempts: MAX_ATTEMPTS })
}
