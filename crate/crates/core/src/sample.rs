//! Observations and the hidden ground truth that travels beside them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("sensory value {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("sensory input has dimension {actual}, expected {expected}")]
    Dimension { expected: usize, actual: usize },
}

/// One sensory reading: a fixed-length vector of finite reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensoryInput(Vec<f64>);

impl SensoryInput {
    pub fn new(values: Vec<f64>) -> Result<Self, SampleError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SampleError::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    pub fn with_dim(values: Vec<f64>, expected: usize) -> Result<Self, SampleError> {
        if values.len() != expected {
            return Err(SampleError::Dimension {
                expected,
                actual: values.len(),
            });
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Index of one discrete motor configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MotorState(pub usize);

/// Index of one discrete motor command (a variation of the motor state).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MotorDelta(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    EnvironmentState,
    ObjectId,
    Background,
    None,
}

/// Ground truth known to the simulator but never to the learner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HiddenLabel {
    pub kind: LabelKind,
    pub id: usize,
}

impl HiddenLabel {
    pub const NONE: HiddenLabel = HiddenLabel {
        kind: LabelKind::None,
        id: 0,
    };

    pub fn environment(id: usize) -> Self {
        Self {
            kind: LabelKind::EnvironmentState,
            id,
        }
    }

    pub fn object(id: usize) -> Self {
        Self {
            kind: LabelKind::ObjectId,
            id,
        }
    }

    pub fn background() -> Self {
        Self {
            kind: LabelKind::Background,
            id: 0,
        }
    }
}

/// What the learner is allowed to see about one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub sensory: SensoryInput,
    pub motor: MotorState,
    pub episode: usize,
    pub step: usize,
}

/// An observation paired with its hidden label. Learning code receives
/// [`Observation`]s only; the label is reachable through [`Self::truth`],
/// which evaluation code calls.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorimotorSample {
    observation: Observation,
    truth: HiddenLabel,
}

impl SensorimotorSample {
    pub fn new(observation: Observation, truth: HiddenLabel) -> Self {
        Self { observation, truth }
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn truth(&self) -> HiddenLabel {
        self.truth
    }

    pub fn into_parts(self) -> (Observation, HiddenLabel) {
        (self.observation, self.truth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_values() {
        assert!(matches!(
            SensoryInput::new(vec![0.0, f64::NAN]),
            Err(SampleError::NonFinite { index: 1, .. })
        ));
        assert!(SensoryInput::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(SensoryInput::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn checks_dimension() {
        assert_eq!(
            SensoryInput::with_dim(vec![1.0; 3], 9),
            Err(SampleError::Dimension {
                expected: 9,
                actual: 3
            })
        );
    }
}
