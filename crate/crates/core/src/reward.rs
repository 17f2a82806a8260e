//! Per-step reward terms and trajectory-level metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::RobotState;
use crate::stability::{stability_reward_cop, StabilityConfig};
use crate::{NUM_JOINTS, NUM_LEGS};

/// Tracking kernel `exp(-|x|^2 / 0.5)`.
pub fn phi(x: &[f64]) -> f64 {
    let n2: f64 = x.iter().map(|v| v * v).sum();
    (-n2 / 0.5).exp()
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// One value per reward term, in table order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub lin_vel_track: f64,
    pub ang_vel_track: f64,
    pub z_vel_penalty: f64,
    pub ang_vel_penalty: f64,
    pub torque: f64,
    pub joint_accel: f64,
    pub base_height: f64,
    pub action_rate: f64,
    pub collisions: f64,
    pub stumble: f64,
    pub joint_error: f64,
    pub stability: f64,
}

impl RewardTerms {
    pub const NAMES: [&'static str; 12] = [
        "lin_vel_track",
        "ang_vel_track",
        "z_vel_penalty",
        "ang_vel_penalty",
        "torque",
        "joint_accel",
        "base_height",
        "action_rate",
        "collisions",
        "stumble",
        "joint_error",
        "stability",
    ];

    pub fn to_array(&self) -> [f64; 12] {
        [
            self.lin_vel_track,
            self.ang_vel_track,
            self.z_vel_penalty,
            self.ang_vel_penalty,
            self.torque,
            self.joint_accel,
            self.base_height,
            self.action_rate,
            self.collisions,
            self.stumble,
            self.joint_error,
            self.stability,
        ]
    }

    pub fn from_array(a: [f64; 12]) -> Self {
        RewardTerms {
            lin_vel_track: a[0],
            ang_vel_track: a[1],
            z_vel_penalty: a[2],
            ang_vel_penalty: a[3],
            torque: a[4],
            joint_accel: a[5],
            base_height: a[6],
            action_rate: a[7],
            collisions: a[8],
            stumble: a[9],
            joint_error: a[10],
            stability: a[11],
        }
    }

    pub fn dot(&self, weights: &RewardTerms) -> f64 {
        self.to_array()
            .iter()
            .zip(weights.to_array())
            .map(|(t, w)| t * w)
            .sum()
    }
}

/// Default term weights.
pub const DEFAULT_WEIGHTS: RewardTerms = RewardTerms {
    lin_vel_track: 1.5,
    ang_vel_track: 0.5,
    z_vel_penalty: 1.0,
    ang_vel_penalty: 0.05,
    torque: 1e-4,
    joint_accel: 2.5e-7,
    base_height: 1.0,
    action_rate: 0.03,
    collisions: 1.0,
    stumble: 0.1,
    joint_error: 0.04,
    stability: 1.0,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// Pre-weight term values.
    pub terms: RewardTerms,
    pub weights: RewardTerms,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub weights: RewardTerms,
    /// Target base height above the terrain, m.
    pub z_target: f64,
    /// A foot stumbles when its horizontal force exceeds this multiple of
    /// its vertical force.
    pub stumble_ratio: f64,
    pub stability: StabilityConfig,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            weights: DEFAULT_WEIGHTS,
            z_target: 0.35,
            stumble_ratio: 5.0,
            stability: StabilityConfig::default(),
        }
    }
}

/// Inputs for one reward evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepContext {
    pub state: RobotState,
    pub prev_state: RobotState,
    pub action: [f64; NUM_JOINTS],
    pub prev_action: [f64; NUM_JOINTS],
    /// Base-frame command `[v_x, v_y, omega_z]`.
    pub command: [f64; 3],
    pub torques: [f64; NUM_JOINTS],
    pub dt: f64,
    pub collision_count: u32,
    /// Terrain height under the base; base height is measured from here.
    pub ground_height: f64,
    pub q_default: [f64; NUM_JOINTS],
}

impl StepContext {
    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Validation {
                field: "dt".into(),
                message: format!("must be positive, got {}", self.dt),
            });
        }
        self.state.validate()?;
        self.prev_state.validate()?;
        let finite = self.action.iter()
            .chain(&self.prev_action)
            .chain(&self.command)
            .chain(&self.torques)
            .chain(&self.q_default)
            .chain(std::iter::once(&self.ground_height))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numeric("step context"));
        }
        Ok(())
    }
}

/// Number of feet whose horizontal force exceeds `ratio` times the vertical.
pub fn stumble_count(forces: &[[f64; 3]; NUM_LEGS], ratio: f64) -> u32 {
    forces
        .iter()
        .filter(|f| f[0].hypot(f[1]) > ratio * f[2].abs())
        .count() as u32
}

pub fn compute_rewards(ctx: &StepContext, config: &RewardConfig) -> Result<RewardBreakdown> {
    ctx.check()?;
    let s = &ctx.state;
    let lin_err = [ctx.command[0] - s.base_lin_vel[0], ctx.command[1] - s.base_lin_vel[1]];
    let joint_acc: Vec<f64> = s
        .joint_vel
        .iter()
        .zip(&ctx.prev_state.joint_vel)
        .map(|(v, pv)| (v - pv) / ctx.dt)
        .collect();
    let action_rate: Vec<f64> = ctx
        .action
        .iter()
        .zip(&ctx.prev_action)
        .map(|(a, pa)| (a - pa) / ctx.dt)
        .collect();
    let joint_err: Vec<f64> = ctx.q_default.iter().zip(&s.joint_pos).map(|(d, q)| d - q).collect();
    let height = s.base_position[2] - ctx.ground_height;

    let terms = RewardTerms {
        lin_vel_track: phi(&lin_err),
        ang_vel_track: phi(&[ctx.command[2] - s.base_ang_vel[2]]),
        z_vel_penalty: -s.base_lin_vel[2] * s.base_lin_vel[2],
        ang_vel_penalty: -sq_norm(&s.base_ang_vel),
        torque: -sq_norm(&ctx.torques),
        joint_accel: -sq_norm(&joint_acc),
        base_height: -(config.z_target - height).powi(2),
        action_rate: -sq_norm(&action_rate),
        collisions: -f64::from(ctx.collision_count),
        stumble: -f64::from(stumble_count(&s.foot_forces, config.stumble_ratio)),
        joint_error: -sq_norm(&joint_err),
        stability: stability_reward_cop(s, &config.stability),
    };
    let total = terms.dot(&config.weights);
    if !total.is_finite() {
        return Err(Error::Numeric("reward total"));
    }
    Ok(RewardBreakdown {
        terms,
        weights: config.weights,
        total,
    })
}

/// Anything that carries the quantities the trajectory metrics need.
pub trait MotionSample {
    /// Commanded planar velocity, base frame.
    fn commanded_xy(&self) -> [f64; 2];
    /// Actual planar velocity, base frame.
    fn actual_xy(&self) -> [f64; 2];
    fn torques(&self) -> &[f64; NUM_JOINTS];
    fn joint_velocities(&self) -> &[f64; NUM_JOINTS];
}

impl MotionSample for StepContext {
    fn commanded_xy(&self) -> [f64; 2] {
        [self.command[0], self.command[1]]
    }

    fn actual_xy(&self) -> [f64; 2] {
        [self.state.base_lin_vel[0], self.state.base_lin_vel[1]]
    }

    fn torques(&self) -> &[f64; NUM_JOINTS] {
        &self.torques
    }

    fn joint_velocities(&self) -> &[f64; NUM_JOINTS] {
        &self.state.joint_vel
    }
}

fn mean_over<T>(steps: &[T], f: impl Fn(&T) -> f64) -> Result<f64> {
    if steps.is_empty() {
        return Err(Error::InvalidArgument("trajectory has no steps".into()));
    }
    Ok(steps.iter().map(f).sum::<f64>() / steps.len() as f64)
}

/// Mean planar velocity tracking error, m/s.
pub fn tracking_error<T: MotionSample>(steps: &[T]) -> Result<f64> {
    mean_over(steps, |s| {
        let (c, a) = (s.commanded_xy(), s.actual_xy());
        (c[0] - a[0]).hypot(c[1] - a[1])
    })
}

/// Mean mechanical power `sum_j |tau_j * qdot_j|`, W.
pub fn power<T: MotionSample>(steps: &[T]) -> Result<f64> {
    mean_over(steps, |s| {
        s.torques()
            .iter()
            .zip(s.joint_velocities())
            .map(|(t, v)| (t * v).abs())
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standing_ctx(config: &RewardConfig) -> StepContext {
        let q_default = [0.0, 0.8, -1.6, 0.0, 0.8, -1.6, 0.0, 0.8, -1.6, 0.0, 0.8, -1.6];
        let state = RobotState {
            base_position: [3.0, -2.0, config.z_target],
            joint_pos: q_default,
            ..Default::default()
        };
        StepContext {
            prev_state: state.clone(),
            state,
            action: [0.0; 12],
            prev_action: [0.0; 12],
            command: [0.0; 3],
            torques: [0.0; 12],
            dt: 0.02,
            collision_count: 0,
            ground_height: 0.0,
            q_default,
        }
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi(&[0.0, 0.0]), 1.0);
        assert!((phi(&[0.5, 0.5]) - (-1f64).exp()).abs() < 1e-15);
        assert!((phi(&[0.5f64.sqrt()]) - 0.367_879_441_171_442_3).abs() < 1e-15);
        let far = phi(&[10.0]);
        assert!(far > 0.0 && far < 1e-80);
    }

    #[test]
    fn perfect_tracking_totals_two() {
        let cfg = RewardConfig::default();
        let ctx = standing_ctx(&cfg);
        let r = compute_rewards(&ctx, &cfg).unwrap();
        assert_eq!(r.total, 2.0);
        for (name, v) in RewardTerms::NAMES.iter().zip(r.terms.to_array()) {
            let expected = if name.ends_with("_track") { 1.0 } else { 0.0 };
            assert_eq!(v, expected, "{name}");
        }
    }

    #[test]
    fn each_collision_costs_one() {
        let cfg = RewardConfig::default();
        let mut ctx = standing_ctx(&cfg);
        ctx.collision_count = 1;
        assert_eq!(compute_rewards(&ctx, &cfg).unwrap().total, 1.0);
        ctx.collision_count = 2;
        assert_eq!(compute_rewards(&ctx, &cfg).unwrap().total, 0.0);
    }

    #[test]
    fn stumbling_foot() {
        let cfg = RewardConfig::default();
        let mut ctx = standing_ctx(&cfg);
        ctx.state.foot_forces[0] = [6.0, 0.0, 1.0];
        let r = compute_rewards(&ctx, &cfg).unwrap();
        assert_eq!(r.terms.stumble, -1.0);
        assert!((r.terms.stumble * r.weights.stumble + 0.1).abs() < 1e-15);
        ctx.state.foot_forces[0] = [5.0, 0.0, 1.0];
        assert_eq!(compute_rewards(&ctx, &cfg).unwrap().terms.stumble, 0.0);
    }

    #[test]
    fn finite_differences() {
        let cfg = RewardConfig::default();
        let mut ctx = standing_ctx(&cfg);
        ctx.state.joint_vel[3] = 0.02;
        ctx.action[0] = 0.1;
        let r = compute_rewards(&ctx, &cfg).unwrap();
        assert!((r.terms.joint_accel + 1.0).abs() < 1e-12);
        assert!((r.terms.action_rate + 25.0).abs() < 1e-9);
    }

    #[test]
    fn height_is_relative_to_ground() {
        let cfg = RewardConfig::default();
        let mut ctx = standing_ctx(&cfg);
        ctx.state.base_position[2] += 0.5;
        ctx.ground_height = 0.5;
        assert_eq!(compute_rewards(&ctx, &cfg).unwrap().terms.base_height, 0.0);
        ctx.ground_height = 0.4;
        assert!((compute_rewards(&ctx, &cfg).unwrap().terms.base_height + 0.01).abs() < 1e-12);
    }

    #[test]
    fn invalid_contexts() {
        let cfg = RewardConfig::default();
        let mut ctx = standing_ctx(&cfg);
        ctx.dt = 0.0;
        assert!(matches!(compute_rewards(&ctx, &cfg), Err(Error::Validation { .. })));
        let mut ctx = standing_ctx(&cfg);
        ctx.torques[0] = f64::NAN;
        assert!(matches!(compute_rewards(&ctx, &cfg), Err(Error::Numeric(_))));
    }

    #[test]
    fn trajectory_metrics() {
        let cfg = RewardConfig::default();
        let mut a = standing_ctx(&cfg);
        let mut b = standing_ctx(&cfg);
        assert_eq!(tracking_error(&[a.clone()]).unwrap(), 0.0);
        a.command[0] = 1.0;
        a.state.base_lin_vel[0] = 0.9;
        b.command[1] = 0.3;
        assert!((tracking_error(&[a.clone(), b.clone()]).unwrap() - 0.2).abs() < 1e-12);
        assert!(tracking_error::<StepContext>(&[]).is_err());

        assert_eq!(power(&[a.clone()]).unwrap(), 0.0);
        a.torques[0] = 2.0;
        a.state.joint_vel[0] = 3.0;
        assert_eq!(power(&[a.clone()]).unwrap(), 6.0);
        b.torques[0] = -2.0;
        b.state.joint_vel[0] = 3.0;
        assert_eq!(power(&[a, b]).unwrap(), 6.0);
        assert!(power::<StepContext>(&[]).is_err());
    }
}
