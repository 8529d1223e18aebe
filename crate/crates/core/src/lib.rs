//! Search-based generation of driving scenarios against a built-in ego
//! planner: lane maps, evolutionary operators, kinematic simulation,
//! violation oracles and duplicate elimination.

pub mod dedup;
pub mod genome;
pub mod geometry;
pub mod harness;
pub mod lane_map;
pub mod oracles;
pub mod simulator;
pub mod validity;
