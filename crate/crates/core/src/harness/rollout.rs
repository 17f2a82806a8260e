use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::env::{KinematicEnv, StepperConfig};
use super::log::{EpisodeStatus, LogMeta, StepRecord, TrajectoryLog};
use super::policy::Policy;
use super::randomize::{domain_randomize, RandomizationRanges, RandomizedParams};
use crate::control::{CommandSample, ControlConfig};
use crate::error::{Error, Result};
use crate::observation::{HeightmapDrift, ObservationConfig, ObservationFrame};
use crate::reward::{compute_rewards, RewardConfig, StepContext};
use crate::terrain::{generate_terrain_with, Heightfield, TerrainConfig, TerrainSpec};
use crate::NUM_JOINTS;

/// Every configuration block a rollout touches.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    pub control: ControlConfig,
    pub stepper: StepperConfig,
    pub observation: ObservationConfig,
    pub reward: RewardConfig,
}

/// One episode's fixed inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub terrain: TerrainSpec,
    pub command: CommandSample,
    /// s
    pub duration: f64,
    pub seed: u64,
    pub params: RandomizedParams,
    pub spawn_xy: [f64; 2],
    pub spawn_yaw: f64,
}

impl Episode {
    /// Nominal episode from the origin facing +x.
    pub fn new(terrain: TerrainSpec, command: CommandSample, duration: f64, seed: u64) -> Self {
        Episode {
            terrain,
            command,
            duration,
            seed,
            params: RandomizedParams::nominal(),
            spawn_xy: [0.0, 0.0],
            spawn_yaw: 0.0,
        }
    }

    /// Draws the per-episode randomization from the episode seed.
    pub fn randomized(mut self, ranges: &RandomizationRanges) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.params = domain_randomize(&mut rng, ranges);
        self
    }
}

/// Runs `policy` on an already generated `terrain` for one episode.
///
/// Builds the full observation frame every control step and records one
/// [`StepRecord`] per step. Terminal events end the episode early; the
/// reason lands in `meta.status`.
pub fn run_rollout(
    terrain: &Heightfield,
    episode: &Episode,
    policy: &mut dyn Policy,
    config: &RolloutConfig,
) -> Result<TrajectoryLog> {
    if !(episode.duration > 0.0) || !episode.duration.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "duration must be positive, got {}",
            episode.duration
        )));
    }
    let dt = config.stepper.dt;
    let mut env = KinematicEnv::new(
        terrain,
        config.control,
        config.stepper.clone(),
        episode.params.clone(),
        episode.command,
        episode.spawn_xy,
        episode.spawn_yaw,
    )?;
    let drift = HeightmapDrift {
        offset: episode.params.heightmap_drift,
    };
    let q_default = config.control.q_default();
    let spawn = env.state().base_position;
    let n_steps = (episode.duration / dt).round() as usize;

    let mut steps = Vec::with_capacity(n_steps);
    let mut prev_action = [0.0; NUM_JOINTS];
    let mut status = EpisodeStatus::Completed;
    for k in 0..n_steps {
        let command = episode.command.local(env.state().base_yaw);
        let frame = match ObservationFrame::build(
            terrain,
            env.state(),
            &command,
            &prev_action,
            &drift,
            &config.observation,
        ) {
            Ok(f) => f,
            Err(Error::OutOfBounds { .. }) => {
                status = EpisodeStatus::OutOfBounds;
                break;
            }
            Err(e) => return Err(e),
        };
        let action = match policy.act(&frame) {
            Ok(a) if a.iter().all(|v| v.is_finite()) => a,
            Ok(_) => {
                status = EpisodeStatus::PolicyError("non-finite action".into());
                break;
            }
            Err(message) => {
                status = EpisodeStatus::PolicyError(message);
                break;
            }
        };

        let prev_state = env.state().clone();
        let out = env.step(&action)?;
        let state = env.state().clone();
        let ctx = StepContext {
            state,
            prev_state,
            action,
            prev_action,
            command,
            torques: out.torques,
            dt,
            collision_count: u32::from(out.base_contact),
            ground_height: out.ground_height,
            q_default,
        };
        let reward = compute_rewards(&ctx, &config.reward)?;
        let s = ctx.state;
        steps.push(StepRecord {
            t: (k + 1) as f64 * dt,
            base_position: s.base_position,
            base_yaw: s.base_yaw,
            v_local: s.base_lin_vel,
            ang_vel: s.base_ang_vel,
            command,
            joint_pos: s.joint_pos,
            joint_vel: s.joint_vel,
            action,
            torques: out.torques,
            foot_positions: s.foot_positions,
            foot_forces: s.foot_forces,
            foot_contact: s.foot_contact,
            foot_over_void: out.foot_over_void,
            base_contact: out.base_contact,
            reward,
        });
        prev_action = action;
        if let Some(t) = out.terminal {
            status = t;
            break;
        }
    }
    if status != EpisodeStatus::Completed {
        log::debug!("episode seed {} ended early: {status:?}", episode.seed);
    }

    Ok(TrajectoryLog {
        meta: LogMeta {
            terrain: episode.terrain,
            command: episode.command,
            dt,
            seed: episode.seed,
            duration: episode.duration,
            spawn,
            policy: policy.name(),
            params: episode.params.clone(),
            status,
        },
        steps,
    })
}

/// Generates the episode's terrain, then runs it.
pub fn run_episode(
    episode: &Episode,
    policy: &mut dyn Policy,
    terrain_config: &TerrainConfig,
    config: &RolloutConfig,
) -> Result<TrajectoryLog> {
    let terrain = generate_terrain_with(&episode.terrain, terrain_config)?;
    run_rollout(&terrain, episode, policy, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::policy::{ScriptedTrot, Stand};
    use crate::terrain::AtomicKind;

    fn flat_episode(speed: f64, duration: f64) -> Episode {
        let spec = TerrainSpec::new(AtomicKind::Smooth, 0, 1).with_extent([50.0, 8.0]);
        Episode::new(spec, CommandSample::forward(speed), duration, 5)
    }

    #[test]
    fn twenty_seconds_is_a_thousand_records() {
        let ep = flat_episode(1.0, 20.0);
        let mut trot = ScriptedTrot::new(0.02);
        let log = run_episode(&ep, &mut trot, &TerrainConfig::default(), &RolloutConfig::default()).unwrap();
        assert_eq!(log.steps.len(), 1000);
        assert_eq!(log.meta.status, EpisodeStatus::Completed);
        assert_eq!(log.meta.terrain, ep.terrain);
        assert_eq!(log.meta.seed, 5);
        assert!((log.displacement() - 20.0).abs() < 1e-6);
    }

    #[test]
    fn policy_error_aborts() {
        let ep = flat_episode(0.5, 1.0);
        let mut calls = 0;
        let mut failing = |_: &ObservationFrame| {
            calls += 1;
            if calls > 3 {
                Err("boom".to_string())
            } else {
                Ok([0.0; NUM_JOINTS])
            }
        };
        let log = run_episode(&ep, &mut failing, &TerrainConfig::default(), &RolloutConfig::default()).unwrap();
        assert_eq!(log.steps.len(), 3);
        assert_eq!(log.meta.status, EpisodeStatus::PolicyError("boom".into()));
    }

    #[test]
    fn standing_still_never_touches_base() {
        let ep = flat_episode(0.0, 2.0);
        let log = run_episode(&ep, &mut Stand, &TerrainConfig::default(), &RolloutConfig::default()).unwrap();
        assert!(!log.any_base_contact());
        assert_eq!(log.displacement(), 0.0);
    }

    #[test]
    fn zero_duration_rejected() {
        let ep = flat_episode(1.0, 0.0);
        assert!(run_episode(&ep, &mut Stand, &TerrainConfig::default(), &RolloutConfig::default()).is_err());
    }
}
