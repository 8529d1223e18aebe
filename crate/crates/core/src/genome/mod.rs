//! Obstacle and scenario individuals, objective vectors, and the
//! evolutionary operators acting on them.

mod nsga2;
mod operators;

pub use nsga2::{crowding_distance, non_dominated_sort, nsga2_select, scalar_fitness, NsgaError};
pub use operators::{
    crossover_at, mating_pairs, mutate_genes, mutate_one_gene, mutate_scenario, swap_whole_obstacles,
    two_point_crossover,
};

use crate::geometry::MapPoint;
use crate::lane_map::{LaneMap, RoutePath};
use crate::oracles::polygon::{polygon_distance, PolygonPose};
use crate::oracles::Violation;
use crate::validity::{
    repair, sample_lane_point, sample_obstacle, tangent_at, ConstraintTable, ObstacleKind, ValidityError, MAX_ATTEMPTS,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Number of genes describing one obstacle.
pub const GENE_COUNT: usize = 10;

/// Gene positions in declared order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gene {
    Id,
    Start,
    End,
    Heading,
    Length,
    Width,
    Height,
    Speed,
    Kind,
    Mobility,
}

impl Gene {
    pub const ALL: [Gene; GENE_COUNT] = [
        Gene::Id,
        Gene::Start,
        Gene::End,
        Gene::Heading,
        Gene::Length,
        Gene::Width,
        Gene::Height,
        Gene::Speed,
        Gene::Kind,
        Gene::Mobility,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Gene::Id => "id",
            Gene::Start => "start",
            Gene::End => "end",
            Gene::Heading => "heading",
            Gene::Length => "length",
            Gene::Width => "width",
            Gene::Height => "height",
            Gene::Speed => "speed",
            Gene::Kind => "kind",
            Gene::Mobility => "mobility",
        }
    }
}

impl fmt::Display for Gene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mobility {
    Static,
    Dynamic,
}

/// One obstacle individual. Field order is the gene order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleGenome {
    pub id: u32,
    pub start: MapPoint,
    pub end: MapPoint,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub speed: f64,
    pub kind: ObstacleKind,
    pub mobility: Mobility,
}

impl ObstacleGenome {
    /// Copies gene `g` from `other` into `self`.
    pub fn take_gene(&mut self, other: &ObstacleGenome, g: Gene) {
        match g {
            Gene::Id => self.id = other.id,
            Gene::Start => self.start = other.start,
            Gene::End => self.end = other.end,
            Gene::Heading => self.heading = other.heading,
            Gene::Length => self.length = other.length,
            Gene::Width => self.width = other.width,
            Gene::Height => self.height = other.height,
            Gene::Speed => self.speed = other.speed,
            Gene::Kind => self.kind = other.kind,
            Gene::Mobility => self.mobility = other.mobility,
        }
    }

    /// True when gene `g` holds the same value in both genomes.
    pub fn gene_eq(&self, other: &ObstacleGenome, g: Gene) -> bool {
        let mut probe = self.clone();
        probe.take_gene(other, g);
        probe == *self
    }

    pub fn footprint(&self) -> PolygonPose {
        PolygonPose::new(self.start, self.heading, self.length, self.width)
    }
}

/// Obstacle-count limits and scenario duration used when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioLimits {
    pub min_obstacles: usize,
    pub max_obstacles: usize,
    pub duration: f64,
    /// Shortest acceptable ego route, meters.
    pub min_ego_route: f64,
    /// Required gap between an obstacle's start footprint and the ego's.
    pub ego_clearance: f64,
    pub ego_length: f64,
    pub ego_width: f64,
}

impl Default for ScenarioLimits {
    fn default() -> Self {
        ScenarioLimits {
            min_obstacles: 1,
            max_obstacles: 70,
            duration: 30.0,
            min_ego_route: 50.0,
            ego_clearance: 1.0,
            ego_length: 4.93,
            ego_width: 2.11,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Validity(#[from] ValidityError),
    #[error("no ego route of at least {0} m found")]
    NoEgoRoute(f64),
    #[error("obstacle count {count} outside [{min}, {max}]")]
    ObstacleCount { count: usize, min: usize, max: usize },
    #[error("duplicate obstacle id {0}")]
    DuplicateId(u32),
    #[error("ego start or end is off the map")]
    EgoOffMap,
    #[error("duration must be positive and finite")]
    Duration,
}

/// A full test scenario: ego route endpoints, duration and obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGenome {
    pub ego_start: MapPoint,
    pub ego_end: MapPoint,
    pub duration: f64,
    pub obstacles: Vec<ObstacleGenome>,
}

impl ScenarioGenome {
    pub fn ego_route(&self, map: &LaneMap) -> Option<RoutePath> {
        map.shortest_route(self.ego_start, self.ego_end).ok().flatten()
    }

    pub fn ego_start_footprint(&self, map: &LaneMap, limits: &ScenarioLimits) -> PolygonPose {
        let heading = tangent_at(map, self.ego_start).unwrap_or(0.0);
        PolygonPose::new(self.ego_start, heading, limits.ego_length, limits.ego_width)
    }

    pub fn next_free_id(&self) -> u32 {
        self.obstacles.iter().map(|o| o.id).max().map_or(1, |m| m + 1)
    }

    /// Renumbers repeated ids (keeping the first occurrence) from a counter
    /// above every id in use.
    pub fn dedupe_ids(&mut self) {
        let mut next = self.next_free_id();
        let mut seen = BTreeSet::new();
        for o in &mut self.obstacles {
            if o.id == 0 || !seen.insert(o.id) {
                o.id = next;
                seen.insert(next);
                next += 1;
            }
        }
    }

    /// Structural checks: duration, ego route, obstacle count and id
    /// uniqueness. Per-obstacle constraints are checked by
    /// [`crate::validity::validate`].
    pub fn check(&self, map: &LaneMap, limits: &ScenarioLimits) -> Result<(), ScenarioError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(ScenarioError::Duration);
        }
        if map.project(self.ego_start).is_err() || map.project(self.ego_end).is_err() {
            return Err(ScenarioError::EgoOffMap);
        }
        if self.ego_route(map).is_none() {
            return Err(ScenarioError::NoEgoRoute(0.0));
        }
        let n = self.obstacles.len();
        if n < limits.min_obstacles || n > limits.max_obstacles {
            return Err(ScenarioError::ObstacleCount {
                count: n,
                min: limits.min_obstacles,
                max: limits.max_obstacles,
            });
        }
        let mut seen = BTreeSet::new();
        for o in &self.obstacles {
            if !seen.insert(o.id) {
                return Err(ScenarioError::DuplicateId(o.id));
            }
        }
        Ok(())
    }

    fn clears_ego(&self, o: &ObstacleGenome, ego: &PolygonPose, limits: &ScenarioLimits) -> bool {
        polygon_distance(ego, &o.footprint()) >= limits.ego_clearance
    }

    /// Moves any obstacle whose start footprint crowds the ego's start
    /// footprint to a fresh start point, then repairs it.
    pub fn enforce_ego_clearance<R: Rng + ?Sized>(
        &mut self,
        table: &ConstraintTable,
        map: &LaneMap,
        limits: &ScenarioLimits,
        rng: &mut R,
    ) -> Result<(), ValidityError> {
        let ego = self.ego_start_footprint(map, limits);
        for i in 0..self.obstacles.len() {
            let mut attempts = 0;
            while !self.clears_ego(&self.obstacles[i], &ego, limits) {
                attempts += 1;
                if attempts > MAX_ATTEMPTS {
                    return Err(ValidityError::Exhausted { attempts: MAX_ATTEMPTS });
                }
                let o = &mut self.obstacles[i];
                let (p, h) = sample_lane_point(map, rng);
                o.start = p;
                o.heading = h;
                if o.mobility == Mobility::Static {
                    o.end = p;
                }
                *o = repair(o, table, map, rng)?;
            }
        }
        Ok(())
    }
}

/// Samples a random valid scenario.
pub fn sample_scenario<R: Rng + ?Sized>(
    table: &ConstraintTable,
    map: &LaneMap,
    limits: &ScenarioLimits,
    rng: &mut R,
) -> Result<ScenarioGenome, ScenarioError> {
    let (ego_start, ego_end) = sample_ego_route(map, limits.min_ego_route, rng)?;
    let count = rng.gen_range(limits.min_obstacles..=limits.max_obstacles);
    let mut obstacles = Vec::with_capacity(count);
    for i in 0..count {
        obstacles.push(sample_obstacle(table, map, rng, i as u32 + 1)?);
    }
    let mut s = ScenarioGenome { ego_start, ego_end, duration: limits.duration, obstacles };
    s.enforce_ego_clearance(table, map, limits, rng)?;
    Ok(s)
}

fn sample_ego_route<R: Rng + ?Sized>(
    map: &LaneMap,
    min_len: f64,
    rng: &mut R,
) -> Result<(MapPoint, MapPoint), ScenarioError> {
    for _ in 0..MAX_ATTEMPTS {
        let (a, _) = sample_lane_point(map, rng);
        let (b, _) = sample_lane_point(map, rng);
        if let Ok(Some(route)) = map.shortest_route(a, b) {
            if route.total_length >= min_len {
                return Ok((a, b));
            }
        }
    }
    Err(ScenarioError::NoEgoRoute(min_len))
}

/// The five objectives. Directions: collision, speed and hard-brake are
/// minimized; unsafe lane change and fast acceleration are maximized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub f_collision: f64,
    pub f_speed: f64,
    pub f_unsafe_change: f64,
    pub f_fast_accl: f64,
    pub f_hard_brake: f64,
}

impl ObjectiveVector {
    pub const LEN: usize = 5;

    pub fn new(f_collision: f64, f_speed: f64, f_unsafe_change: f64, f_fast_accl: f64, f_hard_brake: f64) -> Self {
        Self { f_collision, f_speed, f_unsafe_change, f_fast_accl, f_hard_brake }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.f_collision, self.f_speed, self.f_unsafe_change, self.f_fast_accl, self.f_hard_brake]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }

    /// Every objective flipped so that smaller is better.
    pub fn minimization(&self) -> [f64; 5] {
        [self.f_collision, self.f_speed, -self.f_unsafe_change, -self.f_fast_accl, self.f_hard_brake]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// A scenario together with everything its evaluation produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluatedScenario {
    pub genome: ScenarioGenome,
    pub objectives: ObjectiveVector,
    pub per_obstacle_min_distance: BTreeMap<u32, f64>,
    pub violations: Vec<Violation>,
}
