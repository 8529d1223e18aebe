#![allow(dead_code)]

pub mod reference;

use forge_core::genome::Mobility;
use forge_core::geometry::MapPoint;
use forge_core::lane_map::LaneMap;
use forge_core::simulator::{ActorState, EgoDimensions, EgoState, ObstacleInfo, Trace};
use forge_core::validity::ObstacleKind;
use std::path::PathBuf;

pub const DT: f64 = 0.1;

pub fn map_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../maps").join(format!("{name}.json"))
}

pub fn map(name: &str) -> LaneMap {
    LaneMap::load(map_path(name)).expect("bundled map loads")
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares `actual` with a golden file; `FORGE_BLESS=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("FORGE_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{} differs from the freshly computed output", path.display());
}

pub fn dims() -> EgoDimensions {
    EgoDimensions { length: 4.93, width: 2.11, height: 1.48 }
}

/// An ego driving east along `east_right` of the straight corridor with the
/// given per-tick speeds, starting at x = 10. Accelerations are the speed
/// differences; nothing else is on the road.
pub fn corridor_trace(speeds: &[f64]) -> Trace {
    let mut ego = Vec::with_capacity(speeds.len());
    let mut x = 10.0;
    for (j, &v) in speeds.iter().enumerate() {
        if j > 0 {
            x += 0.5 * (speeds[j - 1] + v) * DT;
        }
        let acceleration = if j == 0 { 0.0 } else { (v - speeds[j - 1]) / DT };
        ego.push(EgoState {
            t: j as f64 * DT,
            position: MapPoint::new(x, -1.75),
            heading: 0.0,
            speed: v,
            acceleration,
            current_lane: "east_right".into(),
            straddling: false,
        });
    }
    Trace {
        map_id: "straight_corridor".into(),
        scenario_id: "crafted".into(),
        dt: DT,
        duration: (speeds.len() - 1) as f64 * DT,
        ego_dimensions: dims(),
        obstacle_info: Vec::new(),
        ego,
        obstacles: Vec::new(),
    }
}

/// Same ego, with straddling set on ticks `[from, to)`.
pub fn straddle_trace(ticks: usize, episodes: &[(usize, usize)]) -> Trace {
    let mut t = corridor_trace(&vec![5.0; ticks]);
    for &(a, b) in episodes {
        for e in &mut t.ego[a..b] {
            e.straddling = true;
        }
    }
    t
}

pub fn add_obstacle(trace: &mut Trace, id: u32, kind: ObstacleKind, size: (f64, f64), states: Vec<ActorState>) {
    assert_eq!(states.len(), trace.len());
    trace.obstacle_info.push(ObstacleInfo {
        id,
        kind,
        length: size.0,
        width: size.1,
        height: 1.5,
        mobility: Mobility::Dynamic,
    });
    trace.obstacles.push(states);
}

/// Parked ego with a parked vehicle whose rear sits `gap` meters ahead of
/// the ego's front bumper.
pub fn gap_trace(gap: f64) -> Trace {
    let mut t = corridor_trace(&[0.0; 11]);
    let front = 10.0 + t.ego_dimensions.length / 2.0;
    let state = ActorState::new(MapPoint::new(front + gap + 2.0, -1.75), 0.0, 0.0);
    add_obstacle(&mut t, 1, ObstacleKind::Vehicle, (4.0, 1.8), vec![state; 11]);
    t
}

/// Cruise at 5 m/s with one tick of the given acceleration.
pub fn accel_spike(a: f64) -> Trace {
    let mut speeds = vec![5.0; 30];
    for v in &mut speeds[15..] {
        *v = 5.0 + a * DT;
    }
    corridor_trace(&speeds)
}
