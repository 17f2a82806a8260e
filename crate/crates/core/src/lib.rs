//! Deterministic quadruped locomotion kernel.
//!
//! Everything a terrain-aware locomotion trainer consumes and measures, minus
//! the learned policy itself:
//!
//! - [`terrain`]: procedural heightfields for the training curriculum and the
//!   out-of-domain evaluation set.
//! - [`observation`]: robot-centric heightmap sampling, the Gaussian foot
//!   position map and the 48-dim proprioception vector.
//! - [`encoder`]: forward pass of the CNN + multi-head attention heightmap
//!   encoder producing the 64-dim exteroception code.
//! - [`stability`]: support polygons, center of pressure and signed
//!   stability margins.
//! - [`reward`]: per-step reward terms, their weighted sum and trajectory
//!   metrics.
//! - [`control`]: global velocity commands, PD joint control and leg forward
//!   kinematics.
//! - [`harness`]: kinematic rollouts, trajectory logs, success criteria,
//!   domain randomization and metric aggregation.

pub mod config;
pub mod control;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod observation;
pub mod reward;
pub mod stability;
pub mod terrain;

pub use error::{Error, Result};

/// Number of legs; feet are always ordered FR, FL, RR, RL.
pub const NUM_LEGS: usize = 4;
/// Actuated joints, three per leg.
pub const NUM_JOINTS: usize = 12;

/// Planar rotation of `v` by `angle` radians.
#[inline]
pub fn rotate2(v: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}
