//! Discovering the hidden states of the wall world from sensorimotor
//! transitions alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{ari_from_contingency, purity_from_contingency, Contingency};
use super::{check_experiment, from_value, to_value, ExperimentError, ExperimentReport};
use crate::clustering::{
    kmeans_fit, spectral_decompose, symmetrize, ClusterModel, EigengapAnalysis, Matrix,
    SubgraphPartition,
};
use crate::explore::{run_babble, BabbleConfig, ExplorationLog, Policy};
use crate::rng::Streams;
use crate::transitions::{normalize, ProbabilityMatrix, TransitionCounts};
use crate::worlds::{WallWorld, WallWorldConfig};

pub const EXPERIMENT: &str = "envdisc";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvDiscoveryConfig {
    pub wall: WallWorldConfig,
    /// k-means clusters over the (reading, motor) plane.
    pub k_clusters: usize,
    /// Subgraphs to extract; defaults to the number of wall states.
    pub k_subgraphs: Option<usize>,
    /// Use the eigengap suggestion instead of `k_subgraphs`.
    pub auto_k: bool,
    /// Largest k considered by the eigengap heuristic.
    pub eigengap_k_max: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for EnvDiscoveryConfig {
    fn default() -> Self {
        Self {
            wall: WallWorldConfig::default(),
            k_clusters: 430,
            k_subgraphs: None,
            auto_k: false,
            eigengap_k_max: 30,
            steps: 200_000,
            seed: 0,
        }
    }
}

impl EnvDiscoveryConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.wall.validate()?;
        if self.k_clusters < 2 {
            return Err(ExperimentError::Config(
                "k_clusters must be at least 2".into(),
            ));
        }
        if self.k_subgraphs.is_some_and(|k| k < 2) {
            return Err(ExperimentError::Config(
                "k_subgraphs must be at least 2".into(),
            ));
        }
        if self.eigengap_k_max < 1 {
            return Err(ExperimentError::Config(
                "eigengap_k_max must be positive".into(),
            ));
        }
        if self.steps < 2 {
            return Err(ExperimentError::Config("steps must be at least 2".into()));
        }
        Ok(())
    }

    pub fn resolved_k_subgraphs(&self) -> usize {
        self.k_subgraphs.unwrap_or(self.wall.n_env_states)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvDiscoveryMetrics {
    pub ari: f64,
    pub purity: f64,
    pub k_used: usize,
    pub eigengap: EigengapAnalysis,
    pub n_samples: usize,
    pub n_transitions: usize,
    pub distinct_points: usize,
    pub kmeans_inertia: f64,
    pub kmeans_iterations: usize,
    pub observed_clusters: usize,
    /// Samples per (k-means cluster, wall state).
    pub cluster_truth: Contingency,
    /// Samples per (subgraph, wall state); the residual label is the last row.
    pub composition: Contingency,
    pub subgraph_sizes: Vec<usize>,
}

pub struct EnvDiscoveryRun {
    pub report: ExperimentReport,
    pub metrics: EnvDiscoveryMetrics,
    pub log: ExplorationLog,
    pub model: ClusterModel,
    /// k-means cluster of every sample.
    pub sample_clusters: Vec<usize>,
    pub counts: TransitionCounts,
    pub matrix: ProbabilityMatrix,
    pub partition: SubgraphPartition,
}

fn stage_seeds(seed: u64) -> BTreeMap<String, u64> {
    let streams = Streams::new(seed);
    ["babble", "kmeans", "spectral"]
        .iter()
        .map(|&s| (s.to_string(), streams.derive_seed(s)))
        .collect()
}

fn point(cfg: &WallWorldConfig, reading: f64, motor: usize) -> [f64; 2] {
    [reading / cfg.s_max, motor as f64 / cfg.n_angles as f64]
}

struct Graph {
    partition: SubgraphPartition,
    eigengap: EigengapAnalysis,
    k_used: usize,
}

fn partition_graph(
    cfg: &EnvDiscoveryConfig,
    matrix: &ProbabilityMatrix,
    seed: u64,
) -> Result<Graph, ExperimentError> {
    let w = symmetrize(matrix)?;
    let active = w.degrees().iter().filter(|&&d| d > 0.0).count();
    let spectrum = spectral_decompose(&w)?;
    let eigengap = spectrum.eigengap(cfg.eigengap_k_max.min(active))?;
    let k_used = if cfg.auto_k {
        eigengap.suggested_k
    } else {
        cfg.resolved_k_subgraphs()
    };
    let partition = spectrum.cluster(k_used, seed)?;
    Ok(Graph {
        partition,
        eigengap,
        k_used,
    })
}

fn compose(cluster_truth: &Contingency, partition: &SubgraphPartition) -> Contingency {
    let cols = cluster_truth.first().map_or(0, Vec::len);
    let mut table = vec![vec![0u64; cols]; partition.n_labels()];
    for (c, row) in cluster_truth.iter().enumerate() {
        for (t, &n) in row.iter().enumerate() {
            table[partition.labels[c]][t] += n;
        }
    }
    table
}

/// ARI and purity over samples. Empty rows do not change either score.
fn scores(composition: &Contingency) -> (f64, f64) {
    (
        ari_from_contingency(composition),
        purity_from_contingency(composition),
    )
}

pub fn run_env_discovery(cfg: &EnvDiscoveryConfig) -> Result<EnvDiscoveryRun, ExperimentError> {
    cfg.validate()?;
    let seeds = stage_seeds(cfg.seed);
    let streams = Streams::new(cfg.seed);

    let mut world = WallWorld::new(cfg.wall.clone(), &mut streams.stream("world"))?;
    let babble = BabbleConfig {
        steps: cfg.steps,
        policy: Policy::UniformMotorState,
        seed: seeds["babble"],
    };
    let log = run_babble(&mut world, &babble, 0)?;

    let mut data = Vec::with_capacity(2 * log.len());
    for obs in &log.observations {
        data.extend_from_slice(&point(&cfg.wall, obs.sensory.values()[0], obs.motor.0));
    }
    let points = Matrix::from_vec(log.len(), 2, data);
    let mut distinct: Vec<[u64; 2]> = (0..points.rows())
        .map(|i| [points.get(i, 0).to_bits(), points.get(i, 1).to_bits()])
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < cfg.k_clusters {
        return Err(ExperimentError::Insufficient(format!(
            "{} distinct sensorimotor points for {} clusters",
            distinct.len(),
            cfg.k_clusters
        )));
    }
    let model = kmeans_fit(&points, cfg.k_clusters, seeds["kmeans"], 300, 1e-6)?;
    let sample_clusters = (0..points.rows())
        .map(|i| model.assign(points.row(i)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut counts = TransitionCounts::square(cfg.k_clusters);
    for t in &log.transitions {
        counts.record(sample_clusters[t.from], sample_clusters[t.to], 0)?;
    }
    let matrix = normalize(&counts);
    let graph = partition_graph(cfg, &matrix, seeds["spectral"])?;

    let mut cluster_truth = vec![vec![0u64; cfg.wall.n_env_states]; cfg.k_clusters];
    for (&c, truth) in sample_clusters.iter().zip(log.truths()) {
        cluster_truth[c][truth.id] += 1;
    }
    let composition = compose(&cluster_truth, &graph.partition);
    let (ari, purity) = scores(&composition);
    let metrics = EnvDiscoveryMetrics {
        ari,
        purity,
        k_used: graph.k_used,
        eigengap: graph.eigengap,
        n_samples: log.len(),
        n_transitions: log.transitions.len(),
        distinct_points: distinct.len(),
        kmeans_inertia: model.inertia(),
        kmeans_iterations: model.iterations(),
        observed_clusters: matrix.observed_count(),
        cluster_truth,
        composition,
        subgraph_sizes: graph.partition.sizes(),
    };
    let report = ExperimentReport {
        experiment: EXPERIMENT.into(),
        seed: cfg.seed,
        config: to_value(cfg),
        seeds,
        metrics: to_value(&metrics),
    };
    Ok(EnvDiscoveryRun {
        report,
        metrics,
        log,
        model,
        sample_clusters,
        counts,
        matrix,
        partition: graph.partition,
    })
}

/// Rebuilds the graph stage from the saved counts and the per-cluster
/// composition stored in the report, returning freshly computed metrics.
pub fn recompute_env_discovery(
    report: &ExperimentReport,
    counts: &TransitionCounts,
) -> Result<(EnvDiscoveryMetrics, SubgraphPartition), ExperimentError> {
    check_experiment(report, EXPERIMENT)?;
    let cfg: EnvDiscoveryConfig = from_value(&report.config, "config")?;
    let stored: EnvDiscoveryMetrics = from_value(&report.metrics, "metrics")?;
    let seed = *report
        .seeds
        .get("spectral")
        .ok_or_else(|| ExperimentError::Config("missing spectral seed".into()))?;
    if counts.shape() != (cfg.k_clusters, cfg.k_clusters, 1) {
        return Err(ExperimentError::Config(format!(
            "counts shape {:?} does not match k_clusters",
            counts.shape()
        )));
    }
    let matrix = normalize(counts);
    let graph = partition_graph(&cfg, &matrix, seed)?;
    let composition = compose(&stored.cluster_truth, &graph.partition);
    let (ari, purity) = scores(&composition);
    let metrics = EnvDiscoveryMetrics {
        ari,
        purity,
        k_used: graph.k_used,
        eigengap: graph.eigengap,
        n_transitions: counts.total() as usize,
        observed_clusters: matrix.observed_count(),
        composition,
        subgraph_sizes: graph.partition.sizes(),
        ..stored
    };
    Ok((metrics, graph.partition))
}
