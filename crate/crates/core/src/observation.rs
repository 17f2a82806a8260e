//! Per-step observation: robot-centric heightmap, foot position map and
//! proprioception.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::terrain::{Height, Heightfield};
use crate::{rotate2, NUM_JOINTS, NUM_LEGS};

/// Heightmap rows, along the base x (forward) axis.
pub const GRID_H: usize = 17;
/// Heightmap columns, along the base y (left) axis.
pub const GRID_W: usize = 11;
pub const GRID_CELLS: usize = GRID_H * GRID_W;
/// Spacing between heightmap samples, m.
pub const GRID_PITCH: f64 = 0.1;
pub const FOOTMAP_WEIGHT: f64 = 10.0;
pub const FOOTMAP_SIGMA: f64 = 0.1;
pub const PROPRIO_DIM: usize = 48;
/// Length of the exteroception code appended to the proprioception.
pub const LATENT_DIM: usize = 64;
pub const OBSERVATION_DIM: usize = PROPRIO_DIM + LATENT_DIM;

/// Full robot state as seen by the observation, reward and stability code.
///
/// Feet are ordered FR, FL, RR, RL. Velocities and gravity are expressed in
/// the base frame; positions and forces in the world frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub base_position: [f64; 3],
    pub base_yaw: f64,
    pub base_lin_vel: [f64; 3],
    pub base_ang_vel: [f64; 3],
    pub gravity_vec: [f64; 3],
    pub joint_pos: [f64; NUM_JOINTS],
    pub joint_vel: [f64; NUM_JOINTS],
    pub foot_positions: [[f64; 3]; NUM_LEGS],
    pub foot_forces: [[f64; 3]; NUM_LEGS],
    pub foot_contact: [bool; NUM_LEGS],
}

impl Default for RobotState {
    fn default() -> Self {
        RobotState {
            base_position: [0.0; 3],
            base_yaw: 0.0,
            base_lin_vel: [0.0; 3],
            base_ang_vel: [0.0; 3],
            gravity_vec: [0.0, 0.0, -1.0],
            joint_pos: [0.0; NUM_JOINTS],
            joint_vel: [0.0; NUM_JOINTS],
            foot_positions: [[0.0; 3]; NUM_LEGS],
            foot_forces: [[0.0; 3]; NUM_LEGS],
            foot_contact: [false; NUM_LEGS],
        }
    }
}

impl RobotState {
    pub fn validate(&self) -> Result<()> {
        let n = self.gravity_vec.iter().map(|g| g * g).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::Validation {
                field: "gravity_vec".into(),
                message: format!("norm {n} is not 1"),
            });
        }
        let finite = self.base_position.iter()
            .chain(std::iter::once(&self.base_yaw))
            .chain(&self.base_lin_vel)
            .chain(&self.base_ang_vel)
            .chain(&self.joint_pos)
            .chain(&self.joint_vel)
            .chain(self.foot_positions.iter().flatten())
            .chain(self.foot_forces.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numeric("robot state"));
        }
        Ok(())
    }

    /// Expresses a world point in the yaw-only base frame (planar part).
    pub fn world_to_base_xy(&self, p: [f64; 2]) -> [f64; 2] {
        let d = [p[0] - self.base_position[0], p[1] - self.base_position[1]];
        rotate2(d, -self.base_yaw)
    }

    pub fn base_to_world_xy(&self, p: [f64; 2]) -> [f64; 2] {
        let r = rotate2(p, self.base_yaw);
        [self.base_position[0] + r[0], self.base_position[1] + r[1]]
    }

    /// Foot positions in the base frame, planar part.
    pub fn feet_base_xy(&self) -> [[f64; 2]; NUM_LEGS] {
        self.foot_positions
            .map(|p| self.world_to_base_xy([p[0], p[1]]))
    }
}

/// Heights around the base, relative to the base height.
///
/// Row `i` samples base-frame x = (i - 8) * 0.1, column `j` samples
/// y = (j - 5) * 0.1; storage is row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightmapGrid {
    pub values: Vec<f64>,
    pub cell_xy: Vec<[f64; 2]>,
}

impl HeightmapGrid {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * GRID_W + col]
    }

    fn check(&self) -> Result<()> {
        if self.values.len() != GRID_CELLS || self.cell_xy.len() != GRID_CELLS {
            return Err(Error::shape(
                "heightmap grid",
                GRID_CELLS,
                format!("{} values / {} coordinates", self.values.len(), self.cell_xy.len()),
            ));
        }
        Ok(())
    }
}

/// Nominal base-frame coordinates of the 17x11 sample points.
pub fn grid_cell_xy() -> Vec<[f64; 2]> {
    let (ch, cw) = ((GRID_H / 2) as f64, (GRID_W / 2) as f64);
    (0..GRID_H)
        .flat_map(|i| {
            (0..GRID_W).map(move |j| [(i as f64 - ch) * GRID_PITCH, (j as f64 - cw) * GRID_PITCH])
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationConfig {
    /// Relative height reported for samples over void cells, m.
    pub deep_void: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig { deep_void: -1.0 }
    }
}

/// Per-episode misregistration of the heightmap.
///
/// The xy part shifts where the terrain is actually sampled while the
/// reported cell coordinates stay nominal; the z part is added to every
/// solid sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeightmapDrift {
    pub offset: [f64; 3],
}

impl HeightmapDrift {
    pub fn sample(rng: &mut impl Rng, magnitude: f64) -> Result<Self> {
        if !(magnitude >= 0.0) || !magnitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "drift magnitude must be non-negative, got {magnitude}"
            )));
        }
        let mut offset = [0.0; 3];
        if magnitude > 0.0 {
            for o in &mut offset {
                *o = rng.random_range(-magnitude..=magnitude);
            }
        }
        Ok(HeightmapDrift { offset })
    }

    /// Applies the vertical part to an already sampled grid. Deep-void
    /// samples keep their sentinel value.
    pub fn apply_z(&self, grid: &HeightmapGrid, deep_void: f64) -> HeightmapGrid {
        let values = grid
            .values
            .iter()
            .map(|&v| if v == deep_void { v } else { v + self.offset[2] })
            .collect();
        HeightmapGrid {
            values,
            cell_xy: grid.cell_xy.clone(),
        }
    }
}

/// Draws one drift offset and applies its vertical part to `grid`.
///
/// Only the z component can act on an already sampled grid; pass the
/// [`HeightmapDrift`] to [`sample_heightmap_drifted`] to re-sample with the
/// xy shift as well.
pub fn heightmap_drift(
    grid: &HeightmapGrid,
    rng: &mut impl Rng,
    magnitude: f64,
    config: &ObservationConfig,
) -> Result<(HeightmapGrid, HeightmapDrift)> {
    let drift = HeightmapDrift::sample(rng, magnitude)?;
    Ok((drift.apply_z(grid, config.deep_void), drift))
}

pub fn sample_heightmap(
    hf: &Heightfield,
    state: &RobotState,
    config: &ObservationConfig,
) -> Result<HeightmapGrid> {
    sample_heightmap_drifted(hf, state, &HeightmapDrift::default(), config)
}

/// Samples the terrain on the yaw-aligned grid around the base.
pub fn sample_heightmap_drifted(
    hf: &Heightfield,
    state: &RobotState,
    drift: &HeightmapDrift,
    config: &ObservationConfig,
) -> Result<HeightmapGrid> {
    let cell_xy = grid_cell_xy();
    let base_z = state.base_position[2];
    let mut values = Vec::with_capacity(GRID_CELLS);
    for p in &cell_xy {
        let shifted = [p[0] + drift.offset[0], p[1] + drift.offset[1]];
        let [x, y] = state.base_to_world_xy(shifted);
        let v = match hf.height_at(x, y)? {
            Height::Solid(h) => h - base_z + drift.offset[2],
            Height::Void => config.deep_void,
        };
        values.push(v);
    }
    Ok(HeightmapGrid { values, cell_xy })
}

/// Four Gaussian foot channels on the heightmap grid.
///
/// `values` is row-major over cells with the four channels innermost:
/// index `(row * 11 + col) * 4 + k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Footmap {
    pub values: Vec<f64>,
}

impl Footmap {
    pub fn channel(&self, cell: usize, foot: usize) -> f64 {
        self.values[cell * NUM_LEGS + foot]
    }

    /// Flat cell index holding the largest value of channel `foot`.
    pub fn argmax(&self, foot: usize) -> usize {
        (0..self.values.len() / NUM_LEGS)
            .max_by(|&a, &b| self.channel(a, foot).total_cmp(&self.channel(b, foot)))
            .unwrap_or(0)
    }
}

/// One Gaussian bump value at planar distance `d` from a foot.
#[inline]
pub fn footmap_value(d: f64) -> f64 {
    FOOTMAP_WEIGHT * (-(d * d) / (2.0 * FOOTMAP_SIGMA * FOOTMAP_SIGMA)).exp()
}

/// Rasterizes the feet (base-frame xy) onto the sample points.
pub fn build_footmap(feet: &[[f64; 2]; NUM_LEGS], cell_xy: &[[f64; 2]]) -> Footmap {
    let mut values = Vec::with_capacity(cell_xy.len() * NUM_LEGS);
    for p in cell_xy {
        for foot in feet {
            let d = (p[0] - foot[0]).hypot(p[1] - foot[1]);
            values.push(footmap_value(d));
        }
    }
    Footmap { values }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProprioVector(pub Vec<f64>);

impl ProprioVector {
    pub const LIN_VEL: std::ops::Range<usize> = 0..3;
    pub const ANG_VEL: std::ops::Range<usize> = 3..6;
    pub const GRAVITY: std::ops::Range<usize> = 6..9;
    pub const COMMAND: std::ops::Range<usize> = 9..12;
    pub const JOINT_POS: std::ops::Range<usize> = 12..24;
    pub const JOINT_VEL: std::ops::Range<usize> = 24..36;
    pub const PREV_ACTION: std::ops::Range<usize> = 36..48;

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `[v, omega, g, command, q, qdot, previous action]`.
pub fn assemble_proprio(
    state: &RobotState,
    command: &[f64; 3],
    prev_action: &[f64; NUM_JOINTS],
) -> ProprioVector {
    let mut v = Vec::with_capacity(PROPRIO_DIM);
    v.extend_from_slice(&state.base_lin_vel);
    v.extend_from_slice(&state.base_ang_vel);
    v.extend_from_slice(&state.gravity_vec);
    v.extend_from_slice(command);
    v.extend_from_slice(&state.joint_pos);
    v.extend_from_slice(&state.joint_vel);
    v.extend_from_slice(prev_action);
    debug_assert_eq!(v.len(), PROPRIO_DIM);
    ProprioVector(v)
}

/// Per-cell `(x, y, relative height)` in the base frame, row-major.
pub fn cell_coords_3d(grid: &HeightmapGrid) -> Vec<[f64; 3]> {
    grid.cell_xy
        .iter()
        .zip(&grid.values)
        .map(|(xy, &z)| [xy[0], xy[1], z])
        .collect()
}

/// Everything the policy sees at one timestep, before encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationFrame {
    pub heightmap: HeightmapGrid,
    pub coords_3d: Vec<[f64; 3]>,
    pub footmap: Footmap,
    pub proprio: ProprioVector,
}

impl ObservationFrame {
    /// Builds a frame from terrain, state, command and previous action, with
    /// feet taken from `state.foot_positions`.
    pub fn build(
        hf: &Heightfield,
        state: &RobotState,
        command: &[f64; 3],
        prev_action: &[f64; NUM_JOINTS],
        drift: &HeightmapDrift,
        config: &ObservationConfig,
    ) -> Result<Self> {
        let heightmap = sample_heightmap_drifted(hf, state, drift, config)?;
        let footmap = build_footmap(&state.feet_base_xy(), &heightmap.cell_xy);
        Ok(Self::from_parts(heightmap, footmap, assemble_proprio(state, command, prev_action)))
    }

    pub fn from_parts(heightmap: HeightmapGrid, footmap: Footmap, proprio: ProprioVector) -> Self {
        let coords_3d = cell_coords_3d(&heightmap);
        ObservationFrame {
            heightmap,
            coords_3d,
            footmap,
            proprio,
        }
    }

    /// Checks every array against its fixed size.
    pub fn validate(&self) -> Result<()> {
        self.heightmap.check()?;
        if self.coords_3d.len() != GRID_CELLS {
            return Err(Error::shape("coords_3d", GRID_CELLS, self.coords_3d.len()));
        }
        if self.footmap.values.len() != GRID_CELLS * NUM_LEGS {
            return Err(Error::shape("footmap", GRID_CELLS * NUM_LEGS, self.footmap.values.len()));
        }
        if self.proprio.0.len() != PROPRIO_DIM {
            return Err(Error::shape("proprio", PROPRIO_DIM, self.proprio.0.len()));
        }
        Ok(())
    }
}
