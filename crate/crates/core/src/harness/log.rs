//! Line-delimited trajectory logs.
//!
//! The first line is a header object carrying the schema name, version and
//! episode metadata; every following line is one JSON step record.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::randomize::RandomizedParams;
use crate::control::CommandSample;
use crate::error::{Error, Result};
use crate::reward::{MotionSample, RewardBreakdown};
use crate::terrain::TerrainSpec;
use crate::{NUM_JOINTS, NUM_LEGS};

pub const LOG_SCHEMA: &str = "locokernel.trajectory";
pub const LOG_VERSION: u32 = 1;
const TIME_TOLERANCE: f64 = 1e-9;

/// How an episode ended.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "message")]
pub enum EpisodeStatus {
    Completed,
    BaseContact,
    Fell,
    OutOfBounds,
    PolicyError(String),
}

impl EpisodeStatus {
    pub fn is_failure(&self) -> bool {
        !matches!(self, EpisodeStatus::Completed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogMeta {
    pub terrain: TerrainSpec,
    pub command: CommandSample,
    pub dt: f64,
    pub seed: u64,
    /// Requested episode length, s.
    pub duration: f64,
    pub spawn: [f64; 3],
    pub policy: String,
    pub params: RandomizedParams,
    pub status: EpisodeStatus,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub base_position: [f64; 3],
    pub base_yaw: f64,
    pub v_local: [f64; 3],
    pub ang_vel: [f64; 3],
    /// Base-frame command `[v_x, v_y, omega_z]` in effect this step.
    pub command: [f64; 3],
    pub joint_pos: [f64; NUM_JOINTS],
    pub joint_vel: [f64; NUM_JOINTS],
    pub action: [f64; NUM_JOINTS],
    pub torques: [f64; NUM_JOINTS],
    pub foot_positions: [[f64; 3]; NUM_LEGS],
    pub foot_forces: [[f64; 3]; NUM_LEGS],
    pub foot_contact: [bool; NUM_LEGS],
    /// Feet standing over a void cell.
    #[serde(default)]
    pub foot_over_void: [bool; NUM_LEGS],
    pub base_contact: bool,
    pub reward: RewardBreakdown,
}

impl MotionSample for StepRecord {
    fn commanded_xy(&self) -> [f64; 2] {
        [self.command[0], self.command[1]]
    }

    fn actual_xy(&self) -> [f64; 2] {
        [self.v_local[0], self.v_local[1]]
    }

    fn torques(&self) -> &[f64; NUM_JOINTS] {
        &self.torques
    }

    fn joint_velocities(&self) -> &[f64; NUM_JOINTS] {
        &self.joint_vel
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub meta: LogMeta,
    pub steps: Vec<StepRecord>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    meta: LogMeta,
}

impl TrajectoryLog {
    /// Planar distance from the spawn point to the last recorded base
    /// position; 0 for an empty log.
    pub fn displacement(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| {
            (s.base_position[0] - self.meta.spawn[0]).hypot(s.base_position[1] - self.meta.spawn[1])
        })
    }

    pub fn any_base_contact(&self) -> bool {
        self.steps.iter().any(|s| s.base_contact)
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let header = Header {
            schema: LOG_SCHEMA.to_owned(),
            version: LOG_VERSION,
            meta: self.meta.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for step in &self.steps {
            serde_json::to_writer(&mut w, step)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    /// Parses and validates a log.
    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let first = match lines.next() {
            Some(line) => line.map_err(|e| Error::Parse { line: 1, message: e.to_string() })?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty log".into(),
                })
            }
        };
        let header: Header = serde_json::from_str(&first).map_err(|e| Error::Parse {
            line: 1,
            message: format!("header: {e}"),
        })?;
        if header.schema != LOG_SCHEMA || header.version != LOG_VERSION {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "unsupported schema `{}` v{} (expected `{LOG_SCHEMA}` v{LOG_VERSION})",
                    header.schema, header.version
                ),
            });
        }
        let mut steps = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StepRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            steps.push(rec);
        }
        let log = TrajectoryLog {
            meta: header.meta,
            steps,
        };
        log.validate()?;
        Ok(log)
    }

    pub fn ingest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |field: &str, message: String| Error::Validation {
            field: field.to_owned(),
            message,
        };
        let dt = self.meta.dt;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("meta.dt", format!("must be positive, got {dt}")));
        }
        if !(self.meta.duration > 0.0) {
            return Err(invalid("meta.duration", format!("must be positive, got {}", self.meta.duration)));
        }
        self.meta.terrain.validate().map_err(|e| invalid("meta.terrain", e.to_string()))?;
        for (i, pair) in self.steps.windows(2).enumerate() {
            let gap = pair[1].t - pair[0].t;
            if (gap - dt).abs() > TIME_TOLERANCE {
                return Err(invalid(
                    &format!("steps[{}].t", i + 1),
                    format!("advances by {gap}, expected dt = {dt}"),
                ));
            }
        }
        for (i, s) in self.steps.iter().enumerate() {
            let finite = std::iter::once(&s.t)
                .chain(&s.base_position)
                .chain(std::iter::once(&s.base_yaw))
                .chain(&s.v_local)
                .chain(&s.ang_vel)
                .chain(&s.command)
                .chain(&s.joint_pos)
                .chain(&s.joint_vel)
                .chain(&s.action)
                .chain(&s.torques)
                .chain(s.foot_positions.iter().flatten())
                .chain(s.foot_forces.iter().flatten())
                .all(|v| v.is_finite());
            if !finite {
                return Err(invalid(&format!("steps[{i}]"), "non-finite value".into()));
            }
        }
        Ok(())
    }
}
