//! Agent-environment simulators.
//!
//! Each world maps a hidden environment state and the agent's motor
//! configuration to a sensory reading. The learner drives the world only
//! through motor commands and sees only [`World::sense`]; [`World::truth`]
//! exists for evaluation.

pub mod grid;
pub mod retina;
pub mod wall;

pub use grid::{GridScene, GridWorld, GridWorldConfig, ObjectPatch};
pub use retina::{Field, RetinaScene, RetinaWorld, RetinaWorldConfig};
pub use wall::{WallWorld, WallWorldConfig};

use thiserror::Error;

use crate::rng::StreamRng;
use crate::sample::{HiddenLabel, MotorDelta, MotorState, SensoryInput};

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("invalid world configuration: {0}")]
    Config(String),
    #[error("position out of bounds: {0}")]
    Position(String),
    #[error("invalid motor command: {0}")]
    Command(String),
}

/// How a world is driven.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotorSpace {
    /// Absolute motor configurations `0..M`.
    States(usize),
    /// Relative motor commands `0..Q`.
    Deltas(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotorCommand {
    State(MotorState),
    Delta(MotorDelta),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MotorOutcome {
    /// The command would have left the allowed range and was not executed.
    pub clamped: bool,
}

pub trait World {
    fn sensory_dim(&self) -> usize;

    fn motor_space(&self) -> MotorSpace;

    /// Current motor configuration as a flat index.
    fn motor_state(&self) -> MotorState;

    /// Pure function of the hidden state and the motor configuration.
    fn sense(&self) -> SensoryInput;

    fn apply(&mut self, command: MotorCommand) -> Result<MotorOutcome, WorldError>;

    /// The only mutator of the hidden environment state. Returns whether it
    /// changed.
    fn exogenous_step(&mut self, rng: &mut StreamRng) -> bool;

    fn truth(&self) -> HiddenLabel;
}

fn quantize(value: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (value * scale).round() / scale
}
