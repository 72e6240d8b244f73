//! The three discovery pipelines and their evaluation against hidden labels.
//!
//! Every pipeline is a pure function of its config: it draws all randomness
//! from named streams of the config seed and returns an [`ExperimentReport`]
//! together with the count tensors needed to recompute its metrics.

pub mod env_discovery;
pub mod metrics;
pub mod object_discovery;
pub mod visual_field;

pub use env_discovery::{
    recompute_env_discovery, run_env_discovery, EnvDiscoveryConfig, EnvDiscoveryMetrics,
    EnvDiscoveryRun,
};
pub use metrics::{
    adjusted_rand_index, ari_from_contingency, contingency, diagonal_dominance, purity,
    purity_from_contingency, Contingency, DominanceStats,
};
pub use object_discovery::{
    recompute_object_discovery, run_object_discovery, ObjectDiscoveryConfig,
    ObjectDiscoveryMetrics, ObjectDiscoveryRun,
};
pub use visual_field::{
    recompute_visual_field, run_visual_field, VisualFieldConfig, VisualFieldMetrics, VisualFieldRun,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusteringError;
use crate::explore::ExploreError;
use crate::transitions::TransitionError;
use crate::worlds::WorldError;

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("insufficient exploration: {0}")]
    Insufficient(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

impl ExperimentError {
    /// Whether the error comes from the user's configuration rather than
    /// from the data or the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_)
                | ExperimentError::World(WorldError::Config(_))
                | ExperimentError::Explore(ExploreError::Config(_))
                | ExperimentError::Explore(ExploreError::World(WorldError::Config(_)))
                | ExperimentError::Clustering(ClusteringError::Validation(_))
        )
    }
}

/// Serialized summary of one run. Contains no per-sample hidden labels and
/// no timing, so identical configs give identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Seeds handed to each randomized stage.
    pub seeds: BTreeMap<String, u64>,
    pub metrics: serde_json::Value,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(format!("report.json: {e}")))
    }
}

fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("plain data serializes")
}

fn from_value<T: serde::de::DeserializeOwned>(
    value: &serde_json::Value,
    what: &str,
) -> Result<T, ExperimentError> {
    serde_json::from_value(value.clone())
        .map_err(|e| ExperimentError::Config(format!("{what}: {e}")))
}

fn check_experiment(report: &ExperimentReport, expected: &str) -> Result<(), ExperimentError> {
    if report.experiment != expected {
        return Err(ExperimentError::Config(format!(
            "report is for {}, not {expected}",
            report.experiment
        )));
    }
    Ok(())
}

/// Maps `f` over `items`, on a dedicated pool of `jobs` threads when
/// `jobs > 1`. Results keep the order of `items`.
fn par_map<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Result<Vec<R>, ExperimentError>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R, ExperimentError> + Sync + Send,
{
    use rayon::prelude::*;
    if jobs <= 1 {
        return items.into_iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
    pool.install(|| items.into_par_iter().map(f).collect())
}
