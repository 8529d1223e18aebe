//! Line-delimited JSON record files: one header line, then one line per tick.

use super::{ActorState, EgoDimensions, EgoState, ObstacleInfo, Trace};
use crate::geometry::MapPoint;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

pub const RECORD_FORMAT: &str = "forge-record";
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("record I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("record parse error on line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("not a record file (format {0:?})")]
    Format(String),
    #[error("record schema version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("record is truncated: header announces {expected} ticks, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("tick {tick} lists {found} obstacles, header lists {expected}")]
    ObstacleCount { tick: usize, expected: usize, found: usize },
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    map_id: String,
    scenario_id: String,
    dt: f64,
    duration: f64,
    ego_dimensions: EgoDimensions,
    obstacles: Vec<ObstacleInfo>,
    ticks: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct EgoLine {
    x: f64,
    y: f64,
    heading: f64,
    speed: f64,
    acceleration: f64,
    lane: String,
    straddling: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ActorLine {
    x: f64,
    y: f64,
    heading: f64,
    speed: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TickLine {
    t: f64,
    ego: EgoLine,
    obstacles: Vec<ActorLine>,
}

/// Serializes a trace to the record text format.
pub fn record_to_string(trace: &Trace) -> String {
    let header = Header {
        format: RECORD_FORMAT.to_string(),
        version: RECORD_VERSION,
        map_id: trace.map_id.clone(),
        scenario_id: trace.scenario_id.clone(),
        dt: trace.dt,
        duration: trace.duration,
        ego_dimensions: trace.ego_dimensions,
        obstacles: trace.obstacle_info.clone(),
        ticks: trace.ego.len(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (j, e) in trace.ego.iter().enumerate() {
        let line = TickLine {
            t: e.t,
            ego: EgoLine {
                x: e.position.x,
                y: e.position.y,
                heading: e.heading,
                speed: e.speed,
                acceleration: e.acceleration,
                lane: e.current_lane.clone(),
                straddling: e.straddling,
            },
            obstacles: trace
                .obstacles
                .iter()
                .map(|series| {
                    let s = series[j];
                    ActorLine { x: s.position.x, y: s.position.y, heading: s.heading, speed: s.speed }
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("tick serializes"));
        out.push('\n');
    }
    out
}

pub fn write_record(trace: &Trace, path: impl AsRef<Path>) -> Result<(), RecordError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(record_to_string(trace).as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_record(path: impl AsRef<Path>) -> Result<Trace, RecordError> {
    parse_record(BufReader::new(File::open(path)?))
}

pub fn parse_record(reader: impl BufRead) -> Result<Trace, RecordError> {
    let mut lines = reader.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
    let (_, first) = lines.next().ok_or(RecordError::Truncated { expected: 1, found: 0 })?;
    let header: Header = serde_json::from_str(&first?).map_err(|source| RecordError::Parse { line: 1, source })?;
    if header.format != RECORD_FORMAT {
        return Err(RecordError::Format(header.format));
    }
    if header.version != RECORD_VERSION {
        return Err(RecordError::Version { found: header.version, expected: RECORD_VERSION });
    }
    let k = header.obstacles.len();
    let mut ego = Vec::with_capacity(header.ticks);
    let mut obstacles: Vec<Vec<ActorState>> = vec![Vec::with_capacity(header.ticks); k];
    for (i, line) in lines {
        let tick: TickLine =
            serde_json::from_str(&line?).map_err(|source| RecordError::Parse { line: i + 1, source })?;
        if tick.obstacles.len() != k {
            return Err(RecordError::ObstacleCount { tick: ego.len(), expected: k, found: tick.obstacles.len() });
        }
        ego.push(EgoState {
            t: tick.t,
            position: MapPoint::new(tick.ego.x, tick.ego.y),
            heading: tick.ego.heading,
            speed: tick.ego.speed,
            acceleration: tick.ego.acceleration,
            current_lane: tick.ego.lane,
            straddling: tick.ego.straddling,
        });
        for (series, o) in obstacles.iter_mut().zip(tick.obstacles) {
            series.push(ActorState::new(MapPoint::new(o.x, o.y), o.heading, o.speed));
        }
    }
    if ego.len() != header.ticks {
        return Err(RecordError::Truncated { expected: header.ticks, found: ego.len() });
    }
    Ok(Trace {
        map_id: header.map_id,
        scenario_id: header.scenario_id,
        dt: header.dt,
        duration: header.duration,
        ego_dimensions: header.ego_dimensions,
        obstacle_info: header.obstacles,
        ego,
        obstacles,
    })
}
