//! Sensorimotor contingency discovery.
//!
//! A naive agent babbles motor commands inside a simulated world, records the
//! sensory consequences, estimates transition probabilities between
//! discretized sensorimotor states and partitions the resulting graph into
//! densely connected subgraphs. Each subgraph is a candidate contingency: an
//! environment state, an object, or the geometry of the agent's own visual
//! field.
//!
//! Module map:
//!
//! - [`sample`] and [`transitions`]: shared domain types, transition counting
//!   and maximum-likelihood normalization.
//! - [`clustering`]: k-means, a Jacobi eigensolver and normalized spectral
//!   clustering.
//! - [`worlds`]: the wall, grid and retina simulators.
//! - [`explore`]: motor babbling and exploration logs.
//! - [`experiments`]: the three discovery pipelines and their evaluation.

pub mod clustering;
pub mod experiments;
pub mod explore;
pub mod rng;
pub mod sample;
pub mod transitions;
pub mod worlds;

pub use sample::{
    HiddenLabel, LabelKind, MotorDelta, MotorState, Observation, SensorimotorSample, SensoryInput,
};
pub use transitions::{ProbabilityMatrix, TransitionCounts};
