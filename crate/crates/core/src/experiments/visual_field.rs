//! Learning the geometry of a four-field retina from random saccades.
//!
//! Patches from all fields share one k-means model. A state is a
//! `(field, cluster)` pair laid out as `field * K + cluster`; each saccade
//! gets its own slice of transitions, and every row is normalized separately
//! per target field.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::metrics::{diagonal_dominance, DominanceStats};
use super::{check_experiment, from_value, par_map, to_value, ExperimentError, ExperimentReport};
use crate::clustering::{kmeans_fit_weighted, Matrix};
use crate::explore::{run_babble, BabbleConfig, Policy};
use crate::rng::Streams;
use crate::sample::MotorDelta;
use crate::transitions::{normalize_blocked, ProbabilityMatrix, TransitionCounts};
use crate::worlds::retina::{correspondence_table, retina_render};
use crate::worlds::{Field, RetinaWorld, RetinaWorldConfig};

pub const EXPERIMENT: &str = "retina";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VisualFieldConfig {
    pub retina: RetinaWorldConfig,
    pub n_scenes: usize,
    pub steps_per_scene: usize,
    /// Clusters per field.
    pub k_clusters: usize,
    /// Probability above which an entry is reported as high.
    pub high_probability: f64,
    /// Trials an entry needs before it can be reported as high.
    pub min_high_trials: u64,
    pub seed: u64,
}

impl Default for VisualFieldConfig {
    fn default() -> Self {
        Self {
            retina: RetinaWorldConfig::default(),
            n_scenes: 100,
            steps_per_scene: 2_000,
            k_clusters: 10,
            high_probability: 0.5,
            min_high_trials: 50,
            seed: 0,
        }
    }
}

impl VisualFieldConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.retina.validate()?;
        if self.k_clusters < 2 {
            return Err(ExperimentError::Config(
                "k_clusters must be at least 2".into(),
            ));
        }
        if self.n_scenes == 0 {
            return Err(ExperimentError::Config("n_scenes must be positive".into()));
        }
        if self.steps_per_scene < 2 {
            return Err(ExperimentError::Config(
                "steps_per_scene must be at least 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.high_probability) {
            return Err(ExperimentError::Config(
                "high_probability must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        Field::ALL.len() * self.k_clusters
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighEntry {
    pub from: usize,
    pub to: usize,
    pub cmd: usize,
    pub probability: f64,
    pub trials: u64,
    pub on_correspondence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisualFieldMetrics {
    pub distinct_patches: usize,
    /// Fewer than `k_clusters` when the scenes hold fewer distinct patches.
    pub clusters_fitted: usize,
    pub kmeans_inertia: f64,
    pub n_transitions: u64,
    /// Field pairs `(before, after)` per saccade.
    pub correspondence: Vec<Vec<(Field, Field)>>,
    pub dominance: Vec<DominanceStats>,
    pub high_entries: Vec<HighEntry>,
    pub off_correspondence_high: usize,
}

pub struct VisualFieldRun {
    pub report: ExperimentReport,
    pub metrics: VisualFieldMetrics,
    pub counts: TransitionCounts,
    pub matrix: ProbabilityMatrix,
    /// Cluster centroids, one 5×5 patch per row.
    pub centroids: Matrix,
}

/// Patches and steps of one scene with scene-local patch ids.
struct SceneData {
    patches: Vec<Vec<u8>>,
    steps: Vec<[u32; 4]>,
    moves: Vec<(usize, usize)>,
}

fn explore_scene(
    cfg: &VisualFieldConfig,
    streams: &Streams,
    episode: usize,
) -> Result<SceneData, ExperimentError> {
    let scene = retina_render(&cfg.retina, &mut streams.stream("render"));
    let mut world = RetinaWorld::with_random_position(
        cfg.retina.clone(),
        scene,
        &mut streams.stream("position"),
    )?;
    let babble = BabbleConfig {
        steps: cfg.steps_per_scene,
        policy: Policy::UniformMotorDelta,
        seed: streams.derive_seed("babble"),
    };
    let log = run_babble(&mut world, &babble, episode)?;
    let field_len = cfg.retina.field_len();
    let mut ids: HashMap<Vec<u8>, u32> = HashMap::new();
    let mut patches = Vec::new();
    let steps = log
        .observations
        .iter()
        .map(|obs| {
            let mut step = [0u32; 4];
            for (f, chunk) in obs.sensory.values().chunks(field_len).enumerate() {
                let patch: Vec<u8> = chunk.iter().map(|&v| v as u8).collect();
                step[f] = *ids.entry(patch.clone()).or_insert_with(|| {
                    patches.push(patch);
                    (patches.len() - 1) as u32
                });
            }
            step
        })
        .collect();
    let moves = log
        .transitions
        .iter()
        .map(|t| (t.from, t.delta.expect("saccades are relative").0))
        .collect();
    Ok(SceneData {
        patches,
        steps,
        moves,
    })
}

fn correspondence(cfg: &VisualFieldConfig) -> Result<Vec<Vec<(Field, Field)>>, ExperimentError> {
    (0..cfg.retina.saccades().len())
        .map(|q| correspondence_table(&cfg.retina, MotorDelta(q)).map_err(ExperimentError::from))
        .collect()
}

fn block_trials(counts: &TransitionCounts, from: usize, to: usize, cmd: usize, k: usize) -> u64 {
    let start = (to / k) * k;
    counts.row(from, cmd)[start..start + k].iter().sum()
}

fn high_entries(
    cfg: &VisualFieldConfig,
    counts: &TransitionCounts,
    matrix: &ProbabilityMatrix,
    tables: &[Vec<(Field, Field)>],
) -> Vec<HighEntry> {
    let k = cfg.k_clusters;
    let (n, _, n_cmd) = matrix.shape();
    let mut out = Vec::new();
    for cmd in 0..n_cmd {
        for from in (0..n).filter(|&f| matrix.is_observed(f, cmd)) {
            for to in 0..n {
                let probability = matrix.get(from, to, cmd);
                if probability <= cfg.high_probability {
                    continue;
                }
                let trials = block_trials(counts, from, to, cmd, k);
                if trials < cfg.min_high_trials {
                    continue;
                }
                let (a, b) = (Field::ALL[from / k], Field::ALL[to / k]);
                let on_correspondence = from % k == to % k && tables[cmd].contains(&(a, b));
                out.push(HighEntry {
                    from,
                    to,
                    cmd,
                    probability,
                    trials,
                    on_correspondence,
                });
            }
        }
    }
    out
}

fn matrix_metrics(
    cfg: &VisualFieldConfig,
    counts: &TransitionCounts,
) -> Result<
    (
        ProbabilityMatrix,
        Vec<Vec<(Field, Field)>>,
        Vec<DominanceStats>,
        Vec<HighEntry>,
    ),
    ExperimentError,
> {
    let matrix = normalize_blocked(counts, cfg.k_clusters)?;
    let tables = correspondence(cfg)?;
    let dominance = diagonal_dominance(&matrix, &tables, cfg.k_clusters)?;
    let high = high_entries(cfg, counts, &matrix, &tables);
    Ok((matrix, tables, dominance, high))
}

/// Runs the full pipeline. `jobs` threads explore scenes; the result does
/// not depend on it.
pub fn run_visual_field(
    cfg: &VisualFieldConfig,
    jobs: usize,
) -> Result<VisualFieldRun, ExperimentError> {
    cfg.validate()?;
    let streams = Streams::new(cfg.seed);
    let scenes = par_map(jobs, (0..cfg.n_scenes).collect(), |s| {
        explore_scene(
            cfg,
            &Streams::new(streams.derive_seed(&format!("scene{s}"))),
            s,
        )
    })?;

    let mut ids: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut unique: Vec<Vec<u8>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut global_ids = Vec::with_capacity(scenes.len());
    for scene in &scenes {
        let map: Vec<usize> = scene
            .patches
            .iter()
            .map(|p| {
                *ids.entry(p.clone()).or_insert_with(|| {
                    unique.push(p.clone());
                    weights.push(0.0);
                    unique.len() - 1
                })
            })
            .collect();
        for step in &scene.steps {
            for &local in step {
                weights[map[local as usize]] += 1.0;
            }
        }
        global_ids.push(map);
    }

    let field_len = cfg.retina.field_len();
    let data: Vec<f64> = unique.iter().flatten().map(|&v| f64::from(v)).collect();
    let points = Matrix::from_vec(unique.len(), field_len, data);
    let k_fit = cfg.k_clusters.min(unique.len());
    let kmeans_seed = streams.derive_seed("kmeans");
    let model = kmeans_fit_weighted(&points, &weights, k_fit, kmeans_seed, 300, 1e-6)?;
    let cluster_of = (0..points.rows())
        .map(|i| model.assign(points.row(i)))
        .collect::<Result<Vec<_>, _>>()?;

    let k = cfg.k_clusters;
    let n = cfg.n_states();
    let mut counts = TransitionCounts::new(n, n, cfg.retina.saccades().len());
    for (scene, map) in scenes.iter().zip(&global_ids) {
        let state = |step: usize, field: usize| {
            field * k + cluster_of[map[scene.steps[step][field] as usize]]
        };
        for &(from, q) in &scene.moves {
            for a in 0..4 {
                for b in 0..4 {
                    counts.record(state(from, a), state(from + 1, b), q)?;
                }
            }
        }
    }

    let (matrix, correspondence, dominance, high_entries) = matrix_metrics(cfg, &counts)?;
    let metrics = VisualFieldMetrics {
        distinct_patches: unique.len(),
        clusters_fitted: k_fit,
        kmeans_inertia: model.inertia(),
        n_transitions: counts.total() / 16,
        correspondence,
        dominance,
        off_correspondence_high: high_entries.iter().filter(|e| !e.on_correspondence).count(),
        high_entries,
    };
    let report = ExperimentReport {
        experiment: EXPERIMENT.into(),
        seed: cfg.seed,
        config: to_value(cfg),
        seeds: [("kmeans".to_string(), kmeans_seed)].into_iter().collect(),
        metrics: to_value(&metrics),
    };
    Ok(VisualFieldRun {
        report,
        metrics,
        counts,
        matrix,
        centroids: model.centroids().clone(),
    })
}

pub fn recompute_visual_field(
    report: &ExperimentReport,
    counts: &TransitionCounts,
) -> Result<VisualFieldMetrics, ExperimentError> {
    check_experiment(report, EXPERIMENT)?;
    let cfg: VisualFieldConfig = from_value(&report.config, "config")?;
    let stored: VisualFieldMetrics = from_value(&report.metrics, "metrics")?;
    if counts.shape() != (cfg.n_states(), cfg.n_states(), cfg.retina.saccades().len()) {
        return Err(ExperimentError::Config(format!(
            "counts shape {:?} does not match the config",
            counts.shape()
        )));
    }
    let (_, correspondence, dominance, high_entries) = matrix_metrics(&cfg, counts)?;
    Ok(VisualFieldMetrics {
        n_transitions: counts.total() / 16,
        correspondence,
        dominance,
        off_correspondence_high: high_entries.iter().filter(|e| !e.on_correspondence).count(),
        high_entries,
        ..stored
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_scene_has_one_cluster_and_sure_correspondence() {
        let cfg = VisualFieldConfig {
            retina: RetinaWorldConfig {
                square_count: 0,
                ..Default::default()
            },
            n_scenes: 1,
            steps_per_scene: 300,
            ..Default::default()
        };
        let run = run_visual_field(&cfg, 1).unwrap();
        assert_eq!(run.metrics.distinct_patches, 1);
        assert_eq!(run.metrics.clusters_fitted, 1);
        for (q, table) in run.metrics.correspondence.iter().enumerate() {
            for &(a, b) in table {
                assert_eq!(run.matrix.get(a.index() * 10, b.index() * 10, q), 1.0);
            }
        }
    }

    #[test]
    fn recompute_and_jobs_agree() {
        let cfg = VisualFieldConfig {
            n_scenes: 6,
            steps_per_scene: 300,
            ..Default::default()
        };
        let a = run_visual_field(&cfg, 1).unwrap();
        let b = run_visual_field(&cfg, 4).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        assert_eq!(
            recompute_visual_field(&a.report, &a.counts).unwrap(),
            a.metrics
        );
    }
}
