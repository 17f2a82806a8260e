//! Kinematic stand-in for a physics simulator.
//!
//! Joints track their PD targets through a first-order lag after a fixed
//! action delay. The base follows the world-frame command while at least two
//! feet stand on solid ground and falls ballistically otherwise. Feet are
//! placed by forward kinematics and touch the terrain only over solid cells.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::log::EpisodeStatus;
use super::randomize::RandomizedParams;
use crate::control::{CommandSample, ControlConfig};
use crate::error::{Error, Result};
use crate::observation::RobotState;
use crate::rotate2;
use crate::terrain::{Height, Heightfield};
use crate::{NUM_JOINTS, NUM_LEGS};

/// Tunables of the kinematic stepper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    /// Control period, s.
    pub dt: f64,
    /// Base height above local terrain below which the base touches it, m.
    pub base_clearance: f64,
    /// A foot touches the ground when within this height of it, m.
    pub contact_tolerance: f64,
    /// Joint tracking time constant, s.
    pub joint_time_constant: f64,
    /// Unsupported drop after which the episode counts as a fall, m.
    pub fall_height: f64,
    /// Foot penetration that produces a stumble force, m.
    pub stumble_depth: f64,
    /// Horizontal-to-vertical force ratio of a stumbling foot.
    pub stumble_force_ratio: f64,
    /// Nominal robot mass before randomization, kg.
    pub nominal_mass: f64,
    pub gravity: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            dt: 0.02,
            base_clearance: 0.10,
            contact_tolerance: 0.02,
            joint_time_constant: 0.02,
            fall_height: 0.30,
            stumble_depth: 0.05,
            stumble_force_ratio: 6.0,
            nominal_mass: 12.0,
            gravity: 9.81,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("joint_time_constant", self.joint_time_constant),
            ("fall_height", self.fall_height),
            ("nominal_mass", self.nominal_mass),
            ("gravity", self.gravity),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation {
                    field: field.into(),
                    message: format!("must be positive, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// What one step produced besides the new state.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// PD torques the applied action commanded.
    pub torques: [f64; NUM_JOINTS],
    /// Feet whose planar position lies over a void cell.
    pub foot_over_void: [bool; NUM_LEGS],
    pub base_contact: bool,
    /// Terrain height under the base, or the last known one over a void.
    pub ground_height: f64,
    pub terminal: Option<EpisodeStatus>,
}

pub struct KinematicEnv<'a> {
    terrain: &'a Heightfield,
    control: ControlConfig,
    config: StepperConfig,
    params: RandomizedParams,
    command: CommandSample,
    state: RobotState,
    pending: VecDeque<[f64; NUM_JOINTS]>,
    planar_vel: [f64; 2],
    vertical_vel: f64,
    /// Height the base last rested at.
    support_z: f64,
    ground_z: f64,
}

#[derive(Clone, Copy)]
struct FootGround {
    height: Option<f64>,
}

impl<'a> KinematicEnv<'a> {
    /// Places the robot standing at `spawn_xy`, facing `yaw`.
    pub fn new(
        terrain: &'a Heightfield,
        control: ControlConfig,
        config: StepperConfig,
        params: RandomizedParams,
        command: CommandSample,
        spawn_xy: [f64; 2],
        yaw: f64,
    ) -> Result<Self> {
        config.validate()?;
        control.geometry.validate()?;
        let q0 = control.q_default();
        let joint_pos = q0.map(|q| q * params.initial_joint_scale);
        let delay_steps = (params.system_delay_ms / (config.dt * 1000.0)).round().max(0.0) as usize;
        let mut env = KinematicEnv {
            terrain,
            control,
            config,
            params,
            command,
            state: RobotState {
                base_position: [spawn_xy[0], spawn_xy[1], 0.0],
                base_yaw: yaw,
                joint_pos,
                ..RobotState::default()
            },
            pending: std::iter::repeat_n([0.0; NUM_JOINTS], delay_steps).collect(),
            planar_vel: [0.0; 2],
            vertical_vel: 0.0,
            support_z: 0.0,
            ground_z: 0.0,
        };
        let ground = env.ground_under(spawn_xy)?.ok_or_else(|| {
            Error::Domain(format!("spawn point ({}, {}) is over a void", spawn_xy[0], spawn_xy[1]))
        })?;
        env.ground_z = ground;
        let rel = env.relative_feet();
        let grounds = env.foot_grounds(&rel)?;
        let z = support_height(&rel, &grounds).ok_or_else(|| Error::Domain("spawn has no foot support".into()))?;
        env.state.base_position[2] = z;
        env.support_z = z;
        env.refresh_feet(&rel, &grounds, false);
        Ok(env)
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn command(&self) -> &CommandSample {
        &self.command
    }

    pub fn params(&self) -> &RandomizedParams {
        &self.params
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    /// Total mass carried by the legs.
    pub fn mass(&self) -> f64 {
        self.config.nominal_mass * self.params.link_mass_scale + self.params.payload_mass
    }

    fn ground_under(&self, xy: [f64; 2]) -> Result<Option<f64>> {
        Ok(self.terrain.height_at(xy[0], xy[1])?.solid())
    }

    /// Feet relative to the base, rotated into the world frame.
    fn relative_feet(&self) -> [[f64; 3]; NUM_LEGS] {
        self.control.geometry.feet(&self.state.joint_pos).map(|p| {
            let [x, y] = rotate2([p[0], p[1]], self.state.base_yaw);
            [x, y, p[2]]
        })
    }

    fn foot_grounds(&self, rel: &[[f64; 3]; NUM_LEGS]) -> Result<[FootGround; NUM_LEGS]> {
        let [bx, by, _] = self.state.base_position;
        let mut out = [FootGround { height: None }; NUM_LEGS];
        for (g, r) in out.iter_mut().zip(rel) {
            g.height = self.ground_under([bx + r[0], by + r[1]])?;
        }
        Ok(out)
    }

    fn refresh_feet(&mut self, rel: &[[f64; 3]; NUM_LEGS], grounds: &[FootGround; NUM_LEGS], moving: bool) {
        let base = self.state.base_position;
        let mut contact = [false; NUM_LEGS];
        let mut depth = [0.0; NUM_LEGS];
        for k in 0..NUM_LEGS {
            let p = [base[0] + rel[k][0], base[1] + rel[k][1], base[2] + rel[k][2]];
            self.state.foot_positions[k] = p;
            if let Some(h) = grounds[k].height {
                depth[k] = h - p[2];
                contact[k] = p[2] <= h + self.config.contact_tolerance;
            }
        }
        let n = contact.iter().filter(|&&c| c).count();
        let fz = if n > 0 { self.mass().max(0.0) * self.config.gravity / n as f64 } else { 0.0 };
        let speed = self.planar_vel[0].hypot(self.planar_vel[1]);
        for k in 0..NUM_LEGS {
            let mut f = [0.0; 3];
            if contact[k] {
                f[2] = fz;
                if moving && depth[k] > self.config.stumble_depth && speed > 0.0 {
                    let push = self.config.stumble_force_ratio * fz / speed;
                    f[0] = -self.planar_vel[0] * push;
                    f[1] = -self.planar_vel[1] * push;
                }
            }
            self.state.foot_forces[k] = f;
        }
        self.state.foot_contact = contact;
    }

    /// Advances one control period with policy output `action`.
    pub fn step(&mut self, action: &[f64; NUM_JOINTS]) -> Result<StepOutcome> {
        let dt = self.config.dt;
        self.pending.push_back(*action);
        let applied = self.pending.pop_front().unwrap_or(*action);

        // Joints.
        let target = self.control.joint_targets(&applied);
        let limit = self.control.torque_limit * self.params.motor_strength_scale;
        let torques = crate::control::pd_torque(
            &target,
            &self.state.joint_pos,
            &self.state.joint_vel,
            self.control.kp * self.params.kp_scale,
            self.control.kd * self.params.kd_scale,
            limit,
        );
        let blend = 1.0 - (-dt / self.config.joint_time_constant).exp();
        for j in 0..NUM_JOINTS {
            let dq = blend * (target[j] - self.state.joint_pos[j]);
            self.state.joint_pos[j] += dq;
            self.state.joint_vel[j] = dq / dt;
        }

        // Base, planar then vertical.
        let supported_before = self.state.foot_contact.iter().filter(|&&c| c).count() >= 2;
        if supported_before {
            self.planar_vel = self.command.v_global;
        } else {
            let m = self.mass().max(1e-6);
            self.planar_vel[0] += self.params.external_force[0] / m * dt;
            self.planar_vel[1] += self.params.external_force[1] / m * dt;
        }
        self.state.base_yaw += self.command.yaw_rate * dt;
        let prev_z = self.state.base_position[2];
        self.state.base_position[0] += self.planar_vel[0] * dt;
        self.state.base_position[1] += self.planar_vel[1] * dt;

        let [bx, by, _] = self.state.base_position;
        let mut terminal = None;
        if !self.terrain.contains(bx, by) {
            terminal = Some(EpisodeStatus::OutOfBounds);
        }
        let rel = self.relative_feet();
        let grounds = if terminal.is_none() {
            match self.foot_grounds(&rel) {
                Ok(g) => g,
                Err(Error::OutOfBounds { .. }) => {
                    terminal = Some(EpisodeStatus::OutOfBounds);
                    [FootGround { height: None }; NUM_LEGS]
                }
                Err(e) => return Err(e),
            }
        } else {
            [FootGround { height: None }; NUM_LEGS]
        };

        let falling_z = prev_z + (self.vertical_vel - self.config.gravity * dt) * dt;
        let mut vz = self.vertical_vel - self.config.gravity * dt;
        let z = match support_height(&rel, &grounds) {
            Some(s) if falling_z <= s => {
                vz = 0.0;
                self.support_z = s;
                s
            }
            _ => falling_z,
        };
        self.vertical_vel = vz;
        self.state.base_position[2] = z;

        if terminal.is_none() {
            if let Some(h) = self.ground_under([bx, by]).unwrap_or(None) {
                self.ground_z = h;
            }
        }
        self.refresh_feet(&rel, &grounds, true);

        let local = crate::control::to_local(self.planar_vel, self.state.base_yaw, self.command.yaw_rate);
        self.state.base_lin_vel = [local[0], local[1], (z - prev_z) / dt];
        self.state.base_ang_vel = [0.0, 0.0, self.command.yaw_rate];

        let over_solid = matches!(self.terrain.height_at(bx, by), Ok(Height::Solid(_)));
        let base_contact = over_solid && z - self.ground_z < self.config.base_clearance;
        if terminal.is_none() {
            if base_contact {
                terminal = Some(EpisodeStatus::BaseContact);
            } else if self.support_z - z > self.config.fall_height {
                terminal = Some(EpisodeStatus::Fell);
            }
        }

        Ok(StepOutcome {
            torques,
            foot_over_void: std::array::from_fn(|k| grounds[k].height.is_none() && terminal != Some(EpisodeStatus::OutOfBounds)),
            base_contact,
            ground_height: self.ground_z,
            terminal,
        })
    }
}

/// Base height at which the second-highest solid foot touches the ground,
/// so the base rests on at least two feet.
fn support_height(rel: &[[f64; 3]; NUM_LEGS], grounds: &[FootGround; NUM_LEGS]) -> Option<f64> {
    let mut needed: Vec<f64> = rel
        .iter()
        .zip(grounds)
        .filter_map(|(r, g)| g.height.map(|h| h - r[2]))
        .collect();
    if needed.len() < 2 {
        return None;
    }
    needed.sort_by(|a, b| b.total_cmp(a));
    Some(needed[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::Heightfield;

    fn flat() -> Heightfield {
        Heightfield::flat([-5.0, -5.0], 0.05, 201, 201).unwrap()
    }

    fn env(hf: &Heightfield, speed: f64) -> KinematicEnv<'_> {
        KinematicEnv::new(
            hf,
            ControlConfig::default(),
            StepperConfig::default(),
            RandomizedParams::nominal(),
            CommandSample::forward(speed),
            [0.0, 0.0],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn spawn_stands_on_all_feet() {
        let hf = flat();
        let e = env(&hf, 0.0);
        assert!(e.state().foot_contact.iter().all(|&c| c));
        assert!((e.state().base_position[2] - 0.4 * 0.8f64.cos()).abs() < 1e-12);
        let fz: f64 = e.state().foot_forces.iter().map(|f| f[2]).sum();
        assert!((fz - 12.0 * 9.81).abs() < 1e-9);
    }

    #[test]
    fn zero_action_zero_command_stays_put() {
        let hf = flat();
        let mut e = env(&hf, 0.0);
        let feet = e.state().foot_positions;
        for _ in 0..50 {
            let out = e.step(&[0.0; NUM_JOINTS]).unwrap();
            assert!(out.terminal.is_none());
            assert_eq!(out.torques, [0.0; NUM_JOINTS]);
        }
        assert_eq!(e.state().foot_positions, feet);
    }

    #[test]
    fn supported_base_follows_command() {
        let hf = flat();
        let mut e = env(&hf, 1.0);
        for _ in 0..100 {
            e.step(&[0.0; NUM_JOINTS]).unwrap();
        }
        assert!((e.state().base_position[0] - 2.0).abs() < 1e-9);
        assert!((e.state().base_lin_vel[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delay_holds_back_actions() {
        let hf = flat();
        let mut params = RandomizedParams::nominal();
        params.system_delay_ms = 40.0;
        let mut e = KinematicEnv::new(
            &hf,
            ControlConfig::default(),
            StepperConfig::default(),
            params,
            CommandSample::forward(0.0),
            [0.0, 0.0],
            0.0,
        )
        .unwrap();
        let a = [0.4; NUM_JOINTS];
        assert_eq!(e.step(&a).unwrap().torques, [0.0; NUM_JOINTS]);
        assert_eq!(e.step(&a).unwrap().torques, [0.0; NUM_JOINTS]);
        assert!(e.step(&a).unwrap().torques[0] > 0.0);
    }

    #[test]
    fn walking_off_the_map_is_out_of_bounds() {
        let hf = flat();
        let mut e = env(&hf, 1.0);
        let mut status = None;
        for _ in 0..400 {
            if let Some(t) = e.step(&[0.0; NUM_JOINTS]).unwrap().terminal {
                status = Some(t);
                break;
            }
        }
        assert_eq!(status, Some(EpisodeStatus::OutOfBounds));
    }

    #[test]
    fn void_under_all_feet_falls() {
        let mut kinds = vec![crate::terrain::CellKind::Solid; 201 * 201];
        for r in 0..201 {
            for c in 120..201 {
                kinds[r * 201 + c] = crate::terrain::CellKind::Void;
            }
        }
        let hf = Heightfield::new([-5.0, -5.0], 0.05, 201, 201, vec![0.0; 201 * 201], kinds).unwrap();
        let mut e = env(&hf, 1.0);
        let mut status = None;
        for _ in 0..200 {
            let out = e.step(&[0.0; NUM_JOINTS]).unwrap();
            if let Some(t) = out.terminal {
                status = Some(t);
                break;
            }
        }
        assert_eq!(status, Some(EpisodeStatus::Fell));
    }
}
