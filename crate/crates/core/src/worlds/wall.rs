//! A single rotating distance sensor facing a wall that jumps between
//! discrete distances.
//!
//! The agent sits at the origin; the wall is the vertical line `x = d`. A
//! sensor pointing at angle `θ` reads `min(d / cos θ, s_max)`. Every wall
//! distance therefore traces its own curve through the (reading, motor)
//! plane.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MotorCommand, MotorOutcome, MotorSpace, World, WorldError};
use crate::rng::StreamRng;
use crate::sample::{HiddenLabel, MotorState, SensoryInput};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WallWorldConfig {
    pub n_env_states: usize,
    pub distance_min: f64,
    pub distance_max: f64,
    /// Explicit wall distances; overrides the uniform spacing when set.
    pub distances: Option<Vec<f64>>,
    pub n_angles: usize,
    /// Half-width of the sweep in degrees; angles span `[-max, +max]`.
    pub max_angle_deg: f64,
    pub s_max: f64,
    pub p_env: f64,
}

impl Default for WallWorldConfig {
    fn default() -> Self {
        Self {
            n_env_states: 15,
            distance_min: 1.0,
            distance_max: 4.0,
            distances: None,
            n_angles: 40,
            max_angle_deg: 60.0,
            s_max: 10.0,
            p_env: 0.01,
        }
    }
}

impl WallWorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.n_env_states < 2 {
            return Err(WorldError::Config("n_env_states must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.p_env) {
            return Err(WorldError::Config(format!(
                "p_env {} outside [0, 1)",
                self.p_env
            )));
        }
        if self.n_angles == 0 {
            return Err(WorldError::Config("n_angles must be positive".into()));
        }
        if !(self.max_angle_deg >= 0.0 && self.max_angle_deg < 90.0) {
            return Err(WorldError::Config(
                "max_angle_deg must lie in [0, 90)".into(),
            ));
        }
        if !(self.s_max > 0.0) {
            return Err(WorldError::Config("s_max must be positive".into()));
        }
        if let Some(d) = &self.distances {
            if d.len() != self.n_env_states {
                return Err(WorldError::Config(format!(
                    "{} distances for {} environment states",
                    d.len(),
                    self.n_env_states
                )));
            }
        }
        if self
            .distances()
            .iter()
            .any(|d| !(d.is_finite() && *d > 0.0))
        {
            return Err(WorldError::Config("wall distances must be positive".into()));
        }
        Ok(())
    }

    pub fn distances(&self) -> Vec<f64> {
        if let Some(d) = &self.distances {
            return d.clone();
        }
        let n = self.n_env_states;
        let span = self.distance_max - self.distance_min;
        (0..n)
            .map(|i| {
                if n == 1 {
                    self.distance_min
                } else {
                    self.distance_min + span * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    /// Sensor angle of motor configuration `m`, in degrees.
    pub fn angle_deg(&self, m: usize) -> f64 {
        if self.n_angles == 1 {
            return 0.0;
        }
        -self.max_angle_deg + 2.0 * self.max_angle_deg * m as f64 / (self.n_angles - 1) as f64
    }
}

pub fn wall_sense(
    cfg: &WallWorldConfig,
    env: usize,
    motor: MotorState,
) -> Result<SensoryInput, WorldError> {
    if env >= cfg.n_env_states {
        return Err(WorldError::Config(format!(
            "environment state {env} out of range"
        )));
    }
    if motor.0 >= cfg.n_angles {
        return Err(WorldError::Command(format!(
            "motor state {} out of range",
            motor.0
        )));
    }
    let d = cfg.distances()[env];
    let theta = cfg.angle_deg(motor.0).to_radians();
    let reading = (d / theta.cos()).min(cfg.s_max);
    Ok(SensoryInput::new(vec![reading]).expect("finite reading"))
}

/// With probability `p_env`, jumps to a uniformly chosen different state.
pub fn wall_env_step(cfg: &WallWorldConfig, env: usize, rng: &mut StreamRng) -> usize {
    let roll: f64 = rng.gen();
    if roll >= cfg.p_env {
        return env;
    }
    let other = rng.gen_range(0..cfg.n_env_states - 1);
    if other >= env {
        other + 1
    } else {
        other
    }
}

#[derive(Clone, Debug)]
pub struct WallWorld {
    cfg: WallWorldConfig,
    distances: Vec<f64>,
    env: usize,
    motor: usize,
}

impl WallWorld {
    /// Starts in a uniformly drawn environment state with the sensor at motor
    /// configuration 0.
    pub fn new(cfg: WallWorldConfig, rng: &mut StreamRng) -> Result<Self, WorldError> {
        cfg.validate()?;
        let env = rng.gen_range(0..cfg.n_env_states);
        Ok(Self::with_state(cfg, env))
    }

    pub fn with_state(cfg: WallWorldConfig, env: usize) -> Self {
        let distances = cfg.distances();
        Self {
            cfg,
            distances,
            env,
            motor: 0,
        }
    }

    pub fn config(&self) -> &WallWorldConfig {
        &self.cfg
    }

    pub fn env(&self) -> usize {
        self.env
    }
}

impl World for WallWorld {
    fn sensory_dim(&self) -> usize {
        1
    }

    fn motor_space(&self) -> MotorSpace {
        MotorSpace::States(self.cfg.n_angles)
    }

    fn motor_state(&self) -> MotorState {
        MotorState(self.motor)
    }

    fn sense(&self) -> SensoryInput {
        let theta = self.cfg.angle_deg(self.motor).to_radians();
        let reading = (self.distances[self.env] / theta.cos()).min(self.cfg.s_max);
        SensoryInput::new(vec![reading]).expect("finite reading")
    }

    fn apply(&mut self, command: MotorCommand) -> Result<MotorOutcome, WorldError> {
        match command {
            MotorCommand::State(m) if m.0 < self.cfg.n_angles => {
                self.motor = m.0;
                Ok(MotorOutcome::default())
            }
            MotorCommand::State(m) => Err(WorldError::Command(format!(
                "motor state {} out of range",
                m.0
            ))),
            MotorCommand::Delta(_) => Err(WorldError::Command(
                "the wall world takes absolute motor states".into(),
            )),
        }
    }

    fn exogenous_step(&mut self, rng: &mut StreamRng) -> bool {
        let next = wall_env_step(&self.cfg, self.env, rng);
        let changed = next != self.env;
        self.env = next;
        changed
    }

    fn truth(&self) -> HiddenLabel {
        HiddenLabel::environment(self.env)
    }
}
