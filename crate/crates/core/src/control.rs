//! Velocity commands, action-to-torque mapping and leg kinematics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{rotate2, NUM_JOINTS, NUM_LEGS};

/// Leg order used by every per-foot array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Leg {
    FrontRight = 0,
    FrontLeft = 1,
    RearRight = 2,
    RearLeft = 3,
}

impl Leg {
    pub const ALL: [Leg; NUM_LEGS] = [Leg::FrontRight, Leg::FrontLeft, Leg::RearRight, Leg::RearLeft];

    pub fn from_index(i: usize) -> Option<Leg> {
        Leg::ALL.get(i).copied()
    }

    pub fn is_left(self) -> bool {
        matches!(self, Leg::FrontLeft | Leg::RearLeft)
    }

    pub fn is_front(self) -> bool {
        matches!(self, Leg::FrontRight | Leg::FrontLeft)
    }

    pub fn label(self) -> &'static str {
        match self {
            Leg::FrontRight => "FR",
            Leg::FrontLeft => "FL",
            Leg::RearRight => "RR",
            Leg::RearLeft => "RL",
        }
    }
}

/// Sampling ranges for the per-episode global command.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandRanges {
    /// Planar speed, m/s.
    pub speed: [f64; 2],
    /// World-frame direction of travel, rad.
    pub heading: [f64; 2],
    pub yaw_rate: [f64; 2],
}

impl Default for CommandRanges {
    fn default() -> Self {
        CommandRanges {
            speed: [0.1, 1.0],
            heading: [-std::f64::consts::PI, std::f64::consts::PI],
            yaw_rate: [0.0, 0.0],
        }
    }
}

/// A world-frame velocity command held for a whole episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandSample {
    pub v_global: [f64; 2],
    pub yaw_rate: f64,
}

impl CommandSample {
    /// Straight-line command along world x.
    pub fn forward(speed: f64) -> Self {
        CommandSample {
            v_global: [speed, 0.0],
            yaw_rate: 0.0,
        }
    }

    pub fn speed(&self) -> f64 {
        self.v_global[0].hypot(self.v_global[1])
    }

    /// The base-frame command `c_t` for the current yaw.
    pub fn local(&self, base_yaw: f64) -> [f64; 3] {
        to_local(self.v_global, base_yaw, self.yaw_rate)
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2], what: &str) -> Result<f64> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("{what} range [{lo}, {hi}] is empty")));
    }
    Ok(if lo == hi { lo } else { rng.random_range(lo..=hi) })
}

pub fn sample_global_command(rng: &mut impl Rng, ranges: &CommandRanges) -> Result<CommandSample> {
    if ranges.speed[0] < 0.0 {
        return Err(Error::InvalidArgument("speed range must be non-negative".into()));
    }
    let speed = uniform(rng, ranges.speed, "speed")?;
    let heading = uniform(rng, ranges.heading, "heading")?;
    let yaw_rate = uniform(rng, ranges.yaw_rate, "yaw rate")?;
    let v_global = if heading == 0.0 {
        [speed, 0.0]
    } else {
        rotate2([speed, 0.0], heading)
    };
    Ok(CommandSample { v_global, yaw_rate })
}

/// Rotates a world-frame planar velocity into the base frame:
/// `c = [R(yaw)^T v, omega]`.
pub fn to_local(v_global: [f64; 2], base_yaw: f64, yaw_rate: f64) -> [f64; 3] {
    let [x, y] = rotate2(v_global, -base_yaw);
    [x, y, yaw_rate]
}

/// Inverse of [`to_local`] for the planar part.
pub fn to_global(v_local: [f64; 2], base_yaw: f64) -> [f64; 2] {
    rotate2(v_local, base_yaw)
}

/// Kinematic layout of one leg family.
///
/// Each leg is an abduction joint about base x at `hip_offset`, then a
/// lateral offset `abduction_offset` (outward), then a hip pitch joint about
/// y with a thigh of length `thigh` pointing down at zero angle, then a knee
/// pitch joint with a calf of length `calf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LegGeometry {
    /// Front-right hip position in the base frame; the other legs mirror it.
    pub hip_offset: [f64; 3],
    pub abduction_offset: f64,
    pub thigh: f64,
    pub calf: f64,
}

impl Default for LegGeometry {
    fn default() -> Self {
        LegGeometry {
            hip_offset: [0.183, -0.047, 0.0],
            abduction_offset: 0.08505,
            thigh: 0.2,
            calf: 0.2,
        }
    }
}

impl LegGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.thigh > 0.0 && self.calf > 0.0 && self.abduction_offset >= 0.0) {
            return Err(Error::InvalidArgument("link lengths must be positive".into()));
        }
        Ok(())
    }

    pub fn hip(&self, leg: Leg) -> [f64; 3] {
        let [x, y, z] = self.hip_offset;
        let sx = if leg.is_front() { 1.0 } else { -1.0 };
        let sy = if leg.is_left() { 1.0 } else { -1.0 };
        [sx * x.abs(), sy * y.abs(), z]
    }

    pub fn reach(&self) -> f64 {
        self.abduction_offset + self.thigh + self.calf
    }

    /// Foot position in the base frame for one leg's `[abduction, hip, knee]`.
    pub fn forward_kinematics(&self, leg: Leg, q: [f64; 3]) -> [f64; 3] {
        let side = if leg.is_left() { 1.0 } else { -1.0 };
        let [abd, hip, knee] = q;
        // Sagittal chain in the hip-pitch frame.
        let x = -self.thigh * hip.sin() - self.calf * (hip + knee).sin();
        let z = -self.thigh * hip.cos() - self.calf * (hip + knee).cos();
        let y = side * self.abduction_offset;
        // Abduction about x.
        let (s, c) = abd.sin_cos();
        let h = self.hip(leg);
        [h[0] + x, h[1] + c * y - s * z, h[2] + s * y + c * z]
    }

    /// All four feet from the 12 joint angles.
    pub fn feet(&self, q: &[f64; NUM_JOINTS]) -> [[f64; 3]; NUM_LEGS] {
        Leg::ALL.map(|leg| {
            let i = 3 * leg as usize;
            self.forward_kinematics(leg, [q[i], q[i + 1], q[i + 2]])
        })
    }
}

pub fn forward_kinematics(geometry: &LegGeometry, q_leg: [f64; 3], leg: Leg) -> [f64; 3] {
    geometry.forward_kinematics(leg, q_leg)
}

/// Gains and limits of the joint-level controller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    /// Action scale between policy output and joint offset.
    pub action_scale: f64,
    pub kp: f64,
    pub kd: f64,
    /// Symmetric torque clamp, Nm.
    pub torque_limit: f64,
    /// Default `[abduction, hip, knee]` for every leg.
    pub default_leg_pose: [f64; 3],
    pub geometry: LegGeometry,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            action_scale: 0.25,
            kp: 40.0,
            kd: 1.0,
            torque_limit: 33.5,
            default_leg_pose: [0.0, 0.8, -1.6],
            geometry: LegGeometry::default(),
        }
    }
}

impl ControlConfig {
    pub fn q_default(&self) -> [f64; NUM_JOINTS] {
        std::array::from_fn(|j| self.default_leg_pose[j % 3])
    }

    /// `q_default + alpha * a`.
    pub fn joint_targets(&self, action: &[f64; NUM_JOINTS]) -> [f64; NUM_JOINTS] {
        let q0 = self.q_default();
        std::array::from_fn(|j| q0[j] + self.action_scale * action[j])
    }

    pub fn pd_torque(
        &self,
        q_target: &[f64; NUM_JOINTS],
        q: &[f64; NUM_JOINTS],
        qd: &[f64; NUM_JOINTS],
    ) -> [f64; NUM_JOINTS] {
        pd_torque(q_target, q, qd, self.kp, self.kd, self.torque_limit)
    }
}

/// `Kp (q_target - q) - Kd qdot`, clamped to `±limit`.
pub fn pd_torque(
    q_target: &[f64; NUM_JOINTS],
    q: &[f64; NUM_JOINTS],
    qd: &[f64; NUM_JOINTS],
    kp: f64,
    kd: f64,
    limit: f64,
) -> [f64; NUM_JOINTS] {
    std::array::from_fn(|j| (kp * (q_target[j] - q[j]) - kd * qd[j]).clamp(-limit, limit))
}

pub fn joint_targets(action: &[f64; NUM_JOINTS], config: &ControlConfig) -> [f64; NUM_JOINTS] {
    config.joint_targets(action)
}
