use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::observation::ObservationFrame;
use crate::NUM_JOINTS;

pub type Action = [f64; NUM_JOINTS];

/// Maps one observation frame to a joint action.
///
/// An `Err` aborts the rollout with a policy-error status.
pub trait Policy {
    fn act(&mut self, frame: &ObservationFrame) -> Result<Action, String>;

    fn name(&self) -> String {
        "callback".to_owned()
    }
}

impl<F> Policy for F
where
    F: FnMut(&ObservationFrame) -> Result<Action, String>,
{
    fn act(&mut self, frame: &ObservationFrame) -> Result<Action, String> {
        self(frame)
    }
}

/// Holds the default pose.
#[derive(Clone, Copy, Debug, Default)]
pub struct Stand;

impl Policy for Stand {
    fn act(&mut self, _: &ObservationFrame) -> Result<Action, String> {
        Ok([0.0; NUM_JOINTS])
    }

    fn name(&self) -> String {
        "scripted:stand".to_owned()
    }
}

/// Open-loop trot: diagonal pairs FR+RL and FL+RR alternate half-sine swings.
/// Ignores the terrain entirely.
#[derive(Clone, Debug)]
pub struct ScriptedTrot {
    pub period: f64,
    pub dt: f64,
    /// Swing amplitude of the hip pitch action; the knee gets twice it,
    /// negated, which keeps the foot under the hip while lifting it.
    pub hip_amplitude: f64,
    step: u64,
}

impl ScriptedTrot {
    pub fn new(dt: f64) -> Self {
        ScriptedTrot {
            period: 0.5,
            dt,
            hip_amplitude: 0.8,
            step: 0,
        }
    }

    /// Action at gait phase `phase` in `[0, 1)`.
    pub fn action_at(&self, phase: f64) -> Action {
        let mut a = [0.0; NUM_JOINTS];
        // Legs 0 (FR) and 3 (RL) swing in the first half, 1 and 2 in the second.
        let (swinging, local) = if phase < 0.5 { ([0, 3], phase) } else { ([1, 2], phase - 0.5) };
        let lift = (2.0 * std::f64::consts::PI * local).sin();
        for leg in swinging {
            a[3 * leg + 1] = self.hip_amplitude * lift;
            a[3 * leg + 2] = -2.0 * self.hip_amplitude * lift;
        }
        a
    }
}

impl Policy for ScriptedTrot {
    fn act(&mut self, _: &ObservationFrame) -> Result<Action, String> {
        let t = self.step as f64 * self.dt;
        self.step += 1;
        Ok(self.action_at((t / self.period).fract()))
    }

    fn name(&self) -> String {
        "scripted:trot".to_owned()
    }
}

/// Built-in policies selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicySpec {
    Trot,
    Stand,
}

impl PolicySpec {
    pub fn build(self, dt: f64) -> Box<dyn Policy + Send> {
        match self {
            PolicySpec::Trot => Box::new(ScriptedTrot::new(dt)),
            PolicySpec::Stand => Box::new(Stand),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicySpec::Trot => "scripted:trot",
            PolicySpec::Stand => "scripted:stand",
        })
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "scripted:trot" | "trot" => Ok(PolicySpec::Trot),
            "scripted:stand" | "stand" => Ok(PolicySpec::Stand),
            _ => Err(Error::InvalidArgument(format!(
                "unknown policy `{s}` (expected scripted:trot or scripted:stand)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trot_alternates_diagonals() {
        let trot = ScriptedTrot::new(0.02);
        let a = trot.action_at(0.25);
        assert_eq!(a[1], 0.8);
        assert_eq!(a[2], -1.6);
        assert_eq!(a[10], 0.8);
        assert_eq!(a[4], 0.0);
        let b = trot.action_at(0.75);
        assert_eq!(b[4], 0.8);
        assert_eq!(b[7], 0.8);
        assert_eq!(b[1], 0.0);
        assert!(trot.action_at(0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn policy_names_parse() {
        for p in [PolicySpec::Trot, PolicySpec::Stand] {
            assert_eq!(p.to_string().parse::<PolicySpec>().unwrap(), p);
        }
        assert!("learned".parse::<PolicySpec>().is_err());
    }
}
