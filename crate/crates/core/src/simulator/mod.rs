//! Deterministic kinematic simulation of a scenario: obstacle trajectories,
//! the built-in ego planner, and the record files they produce.

mod planner;
pub mod record;
pub mod trajectory;

pub use planner::simulate;
pub use record::{read_record, write_record, RecordError};
pub use trajectory::{build_trajectory, tick_count, ObstacleTrajectory, TrajectoryError};

use crate::genome::Mobility;
use crate::geometry::{round9, MapPoint};
use crate::oracles::polygon::PolygonPose;
use crate::validity::ObstacleKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tunables of the built-in ego planner. Defaults are documented in
/// `docs/planner-contract.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub dt: f64,
    pub ego_length: f64,
    pub ego_width: f64,
    pub ego_height: f64,
    /// Cruise target above the lane limit, m/s.
    pub speed_bias: f64,
    /// Proportional gain of speed tracking, 1/s.
    pub tracking_gain: f64,
    pub max_accel: f64,
    pub max_brake: f64,
    /// Age of the obstacle snapshot the planner reacts to, s.
    pub reaction_delay: f64,
    /// Constant-velocity prediction horizon, s.
    pub horizon: f64,
    /// Predicted gap below which the planner yields, m.
    pub standoff: f64,
    /// Distance kept in reserve when planning a stop, m.
    pub stop_buffer: f64,
    /// Lateral clearance beyond which an obstacle is not in the ego's path, m.
    pub lateral_margin: f64,
    /// Speed assumed for the ego when predicting from standstill, m/s.
    pub creep_speed: f64,
    /// Nominal time to shift one lane width sideways, s.
    pub lane_change_duration: f64,
    /// A target-lane obstacle closer than this pauses the lane change, m.
    pub lane_change_block: f64,
    /// Below this speed the lateral blend does not progress, m/s.
    pub lane_change_min_speed: f64,
    /// Deceleration at which the planner starts braking for the route end.
    pub arrival_decel: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            dt: 0.1,
            ego_length: 4.93,
            ego_width: 2.11,
            ego_height: 1.48,
            speed_bias: 1.67,
            tracking_gain: 0.25,
            max_accel: 4.5,
            max_brake: -6.0,
            reaction_delay: 0.5,
            horizon: 3.0,
            standoff: 4.0,
            stop_buffer: 0.5,
            lateral_margin: 0.5,
            creep_speed: 1.0,
            lane_change_duration: 3.0,
            lane_change_block: 10.0,
            lane_change_min_speed: 0.5,
            arrival_decel: 1.5,
        }
    }
}

impl PlannerConfig {
    pub fn ego_dimensions(&self) -> EgoDimensions {
        EgoDimensions { length: self.ego_length, width: self.ego_width, height: self.ego_height }
    }

    pub fn check(&self) -> Result<(), String> {
        let positive = [
            ("dt", self.dt),
            ("ego_length", self.ego_length),
            ("ego_width", self.ego_width),
            ("ego_height", self.ego_height),
            ("tracking_gain", self.tracking_gain),
            ("max_accel", self.max_accel),
            ("horizon", self.horizon),
            ("lane_change_duration", self.lane_change_duration),
            ("arrival_decel", self.arrival_decel),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("planner.{name} must be positive"));
            }
        }
        if !(self.max_brake.is_finite() && self.max_brake < 0.0) {
            return Err("planner.max_brake must be negative".into());
        }
        for (name, v) in [
            ("reaction_delay", self.reaction_delay),
            ("standoff", self.standoff),
            ("stop_buffer", self.stop_buffer),
            ("lateral_margin", self.lateral_margin),
            ("creep_speed", self.creep_speed),
            ("lane_change_block", self.lane_change_block),
            ("lane_change_min_speed", self.lane_change_min_speed),
            ("speed_bias", self.speed_bias),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("planner.{name} must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoDimensions {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

/// Pose and speed of a non-ego actor at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub position: MapPoint,
    pub heading: f64,
    pub speed: f64,
}

impl ActorState {
    pub fn new(position: MapPoint, heading: f64, speed: f64) -> Self {
        Self { position, heading, speed }
    }

    pub fn rounded(self) -> Self {
        Self {
            position: MapPoint::new(round9(self.position.x), round9(self.position.y)),
            heading: round9(self.heading),
            speed: round9(self.speed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub t: f64,
    pub position: MapPoint,
    pub heading: f64,
    pub speed: f64,
    pub acceleration: f64,
    pub current_lane: String,
    pub straddling: bool,
}

/// Static description of an obstacle carried in the trace header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleInfo {
    pub id: u32,
    pub kind: ObstacleKind,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub mobility: Mobility,
}

/// Everything observable about one simulated scenario, tick by tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub map_id: String,
    pub scenario_id: String,
    pub dt: f64,
    pub duration: f64,
    pub ego_dimensions: EgoDimensions,
    pub obstacle_info: Vec<ObstacleInfo>,
    pub ego: Vec<EgoState>,
    /// One series per entry of `obstacle_info`, aligned with `ego`.
    pub obstacles: Vec<Vec<ActorState>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.ego.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ego.is_empty()
    }

    pub fn ego_footprint(&self, j: usize) -> PolygonPose {
        let e = &self.ego[j];
        PolygonPose::new(e.position, e.heading, self.ego_dimensions.length, self.ego_dimensions.width)
    }

    pub fn obstacle_footprint(&self, k: usize, j: usize) -> PolygonPose {
        let s = &self.obstacles[k][j];
        let info = &self.obstacle_info[k];
        PolygonPose::new(s.position, s.heading, info.length, info.width)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("ego has no route from start to end")]
    NoEgoRoute,
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("invalid planner config: {0}")]
    Config(String),
}
