use rand::Rng;
use serde::{Deserialize, Serialize};

/// Closed sampling interval.
pub type Range = [f64; 2];

/// Per-episode randomization ranges. Scales are multiplicative on nominal
/// values; everything else is absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomizationRanges {
    pub friction: Range,
    pub restitution: Range,
    pub link_mass_scale: Range,
    /// kg
    pub payload_mass: Range,
    /// m, per axis
    pub com_offset: Range,
    pub motor_strength_scale: Range,
    pub kp_scale: Range,
    pub kd_scale: Range,
    pub initial_joint_scale: Range,
    pub system_delay_ms: Range,
    /// N, per axis
    pub external_force: Range,
    /// m, per axis
    pub heightmap_drift: Range,
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        RandomizationRanges {
            friction: [0.5, 1.25],
            restitution: [0.0, 0.8],
            link_mass_scale: [0.9, 1.1],
            payload_mass: [-1.0, 2.0],
            com_offset: [-0.05, 0.05],
            motor_strength_scale: [0.9, 1.1],
            kp_scale: [0.9, 1.1],
            kd_scale: [0.9, 1.1],
            initial_joint_scale: [0.5, 1.5],
            system_delay_ms: [0.0, 40.0],
            external_force: [-30.0, 30.0],
            heightmap_drift: [-0.05, 0.05],
        }
    }
}

/// One episode's physical and sensing perturbations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedParams {
    pub friction: f64,
    pub restitution: f64,
    pub link_mass_scale: f64,
    pub payload_mass: f64,
    pub com_offset: [f64; 3],
    pub motor_strength_scale: f64,
    pub kp_scale: f64,
    pub kd_scale: f64,
    pub initial_joint_scale: f64,
    pub system_delay_ms: f64,
    pub external_force: [f64; 3],
    pub heightmap_drift: [f64; 3],
}

impl RandomizedParams {
    /// No perturbation at all.
    pub fn nominal() -> Self {
        RandomizedParams {
            friction: 1.0,
            restitution: 0.0,
            link_mass_scale: 1.0,
            payload_mass: 0.0,
            com_offset: [0.0; 3],
            motor_strength_scale: 1.0,
            kp_scale: 1.0,
            kd_scale: 1.0,
            initial_joint_scale: 1.0,
            system_delay_ms: 0.0,
            external_force: [0.0; 3],
            heightmap_drift: [0.0; 3],
        }
    }

    /// `(name, values, range)` for every field, for range checks.
    pub fn fields<'a>(&'a self, ranges: &'a RandomizationRanges) -> Vec<(&'static str, Vec<f64>, Range)> {
        vec![
            ("friction", vec![self.friction], ranges.friction),
            ("restitution", vec![self.restitution], ranges.restitution),
            ("link_mass_scale", vec![self.link_mass_scale], ranges.link_mass_scale),
            ("payload_mass", vec![self.payload_mass], ranges.payload_mass),
            ("com_offset", self.com_offset.to_vec(), ranges.com_offset),
            ("motor_strength_scale", vec![self.motor_strength_scale], ranges.motor_strength_scale),
            ("kp_scale", vec![self.kp_scale], ranges.kp_scale),
            ("kd_scale", vec![self.kd_scale], ranges.kd_scale),
            ("initial_joint_scale", vec![self.initial_joint_scale], ranges.initial_joint_scale),
            ("system_delay_ms", vec![self.system_delay_ms], ranges.system_delay_ms),
            ("external_force", self.external_force.to_vec(), ranges.external_force),
            ("heightmap_drift", self.heightmap_drift.to_vec(), ranges.heightmap_drift),
        ]
    }

    pub fn within(&self, ranges: &RandomizationRanges) -> bool {
        self.fields(ranges)
            .iter()
            .all(|(_, vals, [lo, hi])| vals.iter().all(|v| v >= lo && v <= hi))
    }
}

fn draw(rng: &mut impl Rng, [lo, hi]: Range) -> f64 {
    if lo < hi {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn draw3(rng: &mut impl Rng, r: Range) -> [f64; 3] {
    [draw(rng, r), draw(rng, r), draw(rng, r)]
}

/// Draws every field uniformly from its range, in declaration order.
pub fn domain_randomize(rng: &mut impl Rng, ranges: &RandomizationRanges) -> RandomizedParams {
    RandomizedParams {
        friction: draw(rng, ranges.friction),
        restitution: draw(rng, ranges.restitution),
        link_mass_scale: draw(rng, ranges.link_mass_scale),
        payload_mass: draw(rng, ranges.payload_mass),
        com_offset: draw3(rng, ranges.com_offset),
        motor_strength_scale: draw(rng, ranges.motor_strength_scale),
        kp_scale: draw(rng, ranges.kp_scale),
        kd_scale: draw(rng, ranges.kd_scale),
        initial_joint_scale: draw(rng, ranges.initial_joint_scale),
        system_delay_ms: draw(rng, ranges.system_delay_ms),
        external_force: draw3(rng, ranges.external_force),
        heightmap_drift: draw3(rng, ranges.heightmap_drift),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn draws_respect_ranges() {
        let ranges = RandomizationRanges::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let p = domain_randomize(&mut rng, &ranges);
            assert!(p.within(&ranges), "{p:?}");
            assert!((0.5..=1.25).contains(&p.friction));
            assert!((-1.0..=2.0).contains(&p.payload_mass));
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let ranges = RandomizationRanges::default();
        let a = domain_randomize(&mut ChaCha8Rng::seed_from_u64(4), &ranges);
        let b = domain_randomize(&mut ChaCha8Rng::seed_from_u64(4), &ranges);
        assert_eq!(a, b);
        assert!(RandomizedParams::nominal().within(&ranges));
    }

    #[test]
    fn degenerate_range_is_constant() {
        let ranges = RandomizationRanges {
            friction: [0.8, 0.8],
            ..Default::default()
        };
        let p = domain_randomize(&mut ChaCha8Rng::seed_from_u64(0), &ranges);
        assert_eq!(p.friction, 0.8);
    }
}
