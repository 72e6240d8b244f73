//! Motor babbling and the exploration logs it produces.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Streams;
use crate::sample::{
    HiddenLabel, LabelKind, MotorDelta, MotorState, Observation, SensorimotorSample,
};
use crate::worlds::{MotorCommand, MotorSpace, World, WorldError};

#[derive(Debug, Error, PartialEq)]
pub enum ExploreError {
    #[error("exploration config: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Draw an absolute motor configuration uniformly at every step.
    UniformMotorState,
    /// Draw a motor command uniformly at every step.
    UniformMotorDelta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BabbleConfig {
    pub steps: usize,
    pub policy: Policy,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedTransition {
    pub from: usize,
    pub to: usize,
    pub delta: Option<MotorDelta>,
}

/// Everything recorded during one walk. Hidden labels and environment change
/// times are kept apart from the observations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExplorationLog {
    pub observations: Vec<Observation>,
    pub transitions: Vec<LoggedTransition>,
    /// Steps whose motor command was refused by the world.
    pub clamped_steps: Vec<usize>,
    truths: Vec<HiddenLabel>,
    env_change_steps: Vec<usize>,
}

impl ExplorationLog {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Evaluation-only view of the hidden labels, aligned with observations.
    pub fn truths(&self) -> &[HiddenLabel] {
        &self.truths
    }

    /// Evaluation-only: indices of the first sample after each environment
    /// change.
    pub fn env_change_steps(&self) -> &[usize] {
        &self.env_change_steps
    }

    pub fn samples(&self) -> impl Iterator<Item = SensorimotorSample> + '_ {
        self.observations
            .iter()
            .zip(&self.truths)
            .map(|(o, &t)| SensorimotorSample::new(o.clone(), t))
    }

    /// One line per sample: `episode,step,motor,delta,s0..sD[,truth_kind,truth_id]`.
    /// `delta` is the command that led into the sample, empty when there is
    /// none. Hidden labels are written only when `emit_truth` is set.
    pub fn to_csv(&self, emit_truth: bool) -> String {
        let dim = self.observations.first().map_or(0, |o| o.sensory.dim());
        let mut out = String::from("episode,step,motor,delta");
        for d in 0..dim {
            write!(out, ",s{d}").unwrap();
        }
        if emit_truth {
            out.push_str(",truth_kind,truth_id");
        }
        out.push('\n');
        let mut delta_into = vec![None; self.len()];
        for t in &self.transitions {
            delta_into[t.to] = t.delta;
        }
        for (i, obs) in self.observations.iter().enumerate() {
            write!(out, "{},{},{},", obs.episode, obs.step, obs.motor.0).unwrap();
            if let Some(d) = delta_into[i] {
                write!(out, "{}", d.0).unwrap();
            }
            for v in obs.sensory.values() {
                write!(out, ",{v}").unwrap();
            }
            if emit_truth {
                let t = self.truths[i];
                let kind = match t.kind {
                    LabelKind::EnvironmentState => "environment_state",
                    LabelKind::ObjectId => "object_id",
                    LabelKind::Background => "background",
                    LabelKind::None => "none",
                };
                write!(out, ",{kind},{}", t.id).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Walks `world` for `cfg.steps` steps. Each step draws a motor command from
/// the policy stream, senses, records the sample with its hidden label and
/// the transition from the previous step, then lets the environment evolve.
/// Absolute policies also draw the first configuration; relative policies
/// start sensing where the world put the agent.
pub fn run_babble(
    world: &mut dyn World,
    cfg: &BabbleConfig,
    episode: usize,
) -> Result<ExplorationLog, ExploreError> {
    if cfg.steps < 2 {
        return Err(ExploreError::Config(format!(
            "need at least 2 steps, got {}",
            cfg.steps
        )));
    }
    let space = world.motor_space();
    match (cfg.policy, space) {
        (Policy::UniformMotorState, MotorSpace::States(_))
        | (Policy::UniformMotorDelta, MotorSpace::Deltas(_)) => {}
        (policy, space) => {
            return Err(ExploreError::Config(format!(
                "policy {policy:?} cannot drive motor space {space:?}"
            )));
        }
    }
    let streams = Streams::new(cfg.seed);
    let mut policy_rng = streams.stream("policy");
    let mut dynamics_rng = streams.stream("dynamics");

    let mut log = ExplorationLog {
        observations: Vec::with_capacity(cfg.steps),
        truths: Vec::with_capacity(cfg.steps),
        transitions: Vec::with_capacity(cfg.steps - 1),
        ..ExplorationLog::default()
    };
    for step in 0..cfg.steps {
        let mut delta = None;
        let mut clamped = false;
        match space {
            MotorSpace::States(m) => {
                world.apply(MotorCommand::State(MotorState(policy_rng.gen_range(0..m))))?;
            }
            MotorSpace::Deltas(q) if step > 0 => {
                let d = MotorDelta(policy_rng.gen_range(0..q));
                clamped = world.apply(MotorCommand::Delta(d))?.clamped;
                delta = Some(d);
            }
            MotorSpace::Deltas(_) => {}
        }
        log.observations.push(Observation {
            sensory: world.sense(),
            motor: world.motor_state(),
            episode,
            step,
        });
        log.truths.push(world.truth());
        if step > 0 {
            if clamped {
                log.clamped_steps.push(step);
            } else {
                log.transitions.push(LoggedTransition {
                    from: step - 1,
                    to: step,
                    delta,
                });
            }
        }
        if world.exogenous_step(&mut dynamics_rng) {
            log.env_change_steps.push(step + 1);
        }
    }
    Ok(log)
}

/// Cuts a log before each boundary sample index. Transitions that would
/// cross a boundary are dropped; sample indices are rebased per segment.
pub fn split_episodes(
    log: &ExplorationLog,
    boundaries: &[usize],
) -> Result<Vec<ExplorationLog>, ExploreError> {
    let n = log.len();
    if boundaries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExploreError::Config(
            "boundaries must be strictly increasing".into(),
        ));
    }
    if boundaries.iter().any(|&b| b == 0 || b >= n) {
        return Err(ExploreError::Config(format!(
            "boundaries must lie strictly inside 0..{n}"
        )));
    }
    let mut edges = Vec::with_capacity(boundaries.len() + 2);
    edges.push(0);
    edges.extend_from_slice(boundaries);
    edges.push(n);
    Ok(edges
        .windows(2)
        .map(|w| {
            let (start, end) = (w[0], w[1]);
            let inside = |i: usize| (start..end).contains(&i);
            ExplorationLog {
                observations: log.observations[start..end].to_vec(),
                truths: log.truths[start..end].to_vec(),
                transitions: log
                    .transitions
                    .iter()
                    .filter(|t| inside(t.from) && inside(t.to))
                    .map(|t| LoggedTransition {
                        from: t.from - start,
                        to: t.to - start,
                        delta: t.delta,
                    })
                    .collect(),
                clamped_steps: log
                    .clamped_steps
                    .iter()
                    .filter(|&&s| inside(s))
                    .map(|s| s - start)
                    .collect(),
                env_change_steps: log
                    .env_change_steps
                    .iter()
                    .filter(|&&s| inside(s))
                    .map(|s| s - start)
                    .collect(),
            }
        })
        .collect())
}
