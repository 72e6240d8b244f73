//! Discovering rigid objects as sets of sensorimotor transitions that stay
//! predictable when the objects are moved around.
//!
//! Only salient inputs enter the dictionary. A stored transition links a
//! salient input of the first scene's walk to each salient input sensed
//! within `link_horizon` steps after it, and carries the accumulated
//! displacement between them. In later scenes a trial is counted whenever
//! the agent, within the horizon after sensing a stored input, stands at one
//! of its stored displacements; it succeeds if the stored target is sensed
//! there.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_experiment, from_value, par_map, to_value, ExperimentError, ExperimentReport};
use crate::clustering::{
    spectral_decompose, symmetrize_dense, Affinity, EigengapAnalysis, Matrix, SubgraphPartition,
};
use crate::explore::{run_babble, BabbleConfig, ExplorationLog, Policy};
use crate::rng::Streams;
use crate::sample::{HiddenLabel, LabelKind, SensoryInput};
use crate::transitions::TransitionCounts;
use crate::worlds::grid::{
    contrast, draw_background, draw_patches, grid_build_scene, salience_threshold,
};
use crate::worlds::{GridWorld, GridWorldConfig, ObjectPatch};

pub const EXPERIMENT: &str = "objects";
pub const PURITY_MIN: f64 = 0.95;
pub const COVERAGE_MIN: f64 = 0.90;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectDiscoveryConfig {
    pub grid: GridWorldConfig,
    /// Scenes including the first one.
    pub n_scenes: usize,
    pub initial_steps: usize,
    pub steps_per_scene: usize,
    pub min_trials: u64,
    /// Steps after a salient input within which transitions are linked.
    pub link_horizon: usize,
    pub k_subgraphs: usize,
    /// Uniform affinity added between connected states, as a multiple of
    /// the mean degree spread over all of them.
    pub regularization: f64,
    /// Share of first-scene inputs treated as salient.
    pub salient_fraction: f64,
    /// Fixed contrast threshold; overrides `salient_fraction`.
    pub tau: Option<f64>,
    pub seed: u64,
}

impl Default for ObjectDiscoveryConfig {
    fn default() -> Self {
        Self {
            grid: GridWorldConfig::default(),
            n_scenes: 200,
            initial_steps: 1_000_000,
            steps_per_scene: 50_000,
            min_trials: 5,
            link_horizon: 300,
            k_subgraphs: 4,
            regularization: 0.0,
            salient_fraction: 0.10,
            tau: None,
            seed: 0,
        }
    }
}

impl ObjectDiscoveryConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.grid.validate()?;
        if self.n_scenes == 0 {
            return Err(ExperimentError::Config("n_scenes must be positive".into()));
        }
        if self.initial_steps < 2 || self.steps_per_scene < 2 {
            return Err(ExperimentError::Config(
                "scenes need at least 2 steps".into(),
            ));
        }
        if self.link_horizon == 0 {
            return Err(ExperimentError::Config(
                "link_horizon must be positive".into(),
            ));
        }
        if self.min_trials == 0 {
            return Err(ExperimentError::Config(
                "min_trials must be positive".into(),
            ));
        }
        if self.k_subgraphs < 2 {
            return Err(ExperimentError::Config(
                "k_subgraphs must be at least 2".into(),
            ));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(ExperimentError::Config(
                "regularization must be finite and non-negative".into(),
            ));
        }
        if !(self.salient_fraction > 0.0 && self.salient_fraction <= 1.0) {
            return Err(ExperimentError::Config(
                "salient_fraction must lie in (0, 1]".into(),
            ));
        }
        if self.tau.is_some_and(|t| !t.is_finite()) {
            return Err(ExperimentError::Config("tau must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectMatch {
    pub object: usize,
    /// Subgraph holding most of the object's interior states.
    pub subgraph: usize,
    pub purity: f64,
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectDiscoveryMetrics {
    pub tau: f64,
    pub dictionary_size: usize,
    pub stored_transitions: usize,
    pub total_trials: u64,
    pub observed_pairs: usize,
    pub kept_states: usize,
    pub eigengap: EigengapAnalysis,
    /// Column names of `composition`.
    pub classes: Vec<String>,
    /// Dictionary states per (subgraph, class); the residual label is the
    /// last row.
    pub composition: Vec<Vec<u64>>,
    /// Dictionary states lying fully inside each object.
    pub interior_states: Vec<u64>,
    pub subgraph_sizes: Vec<usize>,
    /// Mean observed probability among transitions inside each subgraph.
    pub mean_internal_probability: Vec<Option<f64>>,
    pub objects: Vec<ObjectMatch>,
    /// The single subgraph not claimed by any object, if there is one.
    pub background_subgraph: Option<usize>,
    pub recovered: bool,
}

pub struct ObjectDiscoveryRun {
    pub report: ExperimentReport,
    pub metrics: ObjectDiscoveryMetrics,
    pub first_scene: ExplorationLog,
    /// Hidden label of each dictionary state where it was first sensed.
    pub state_truths: Vec<HiddenLabel>,
    pub trials: TransitionCounts,
    pub successes: TransitionCounts,
    /// Success rates; zero where masked.
    pub matrix: Matrix,
    pub observed: Vec<bool>,
    pub partition: SubgraphPartition,
}

type Key = Vec<i64>;

fn key(input: &SensoryInput, decimals: u32) -> Key {
    let scale = 10f64.powi(decimals as i32);
    input
        .values()
        .iter()
        .map(|v| (v * scale).round() as i64)
        .collect()
}

#[derive(Default)]
struct Dictionary {
    ids: HashMap<Key, usize>,
    truths: Vec<HiddenLabel>,
    links: Vec<(usize, usize)>,
    lookup: HashMap<(usize, i64, i64), usize>,
}

/// Displacement that led into each sample; zero for the first sample and for
/// refused moves.
fn step_displacements(log: &ExplorationLog, grid: &GridWorldConfig) -> Vec<(i64, i64)> {
    let mut out = vec![(0, 0); log.len()];
    for t in &log.transitions {
        if let Some(d) = t.delta {
            out[t.to] = grid.deltas[d.0];
        }
    }
    out
}

/// Salient inputs of the last `horizon` steps with the displacement
/// accumulated since each was sensed.
struct Recent {
    horizon: usize,
    entries: std::collections::VecDeque<(usize, usize, (i64, i64))>,
}

impl Recent {
    fn new(horizon: usize) -> Self {
        Self {
            horizon,
            entries: Default::default(),
        }
    }

    fn advance(&mut self, t: usize, step: (i64, i64)) {
        while self
            .entries
            .front()
            .is_some_and(|&(t0, _, _)| t - t0 > self.horizon)
        {
            self.entries.pop_front();
        }
        for e in self.entries.iter_mut() {
            e.2 = (e.2 .0 + step.0, e.2 .1 + step.1);
        }
    }

    fn push(&mut self, t: usize, id: usize) {
        self.entries.push_back((t, id, (0, 0)));
    }
}

fn build_dictionary(
    log: &ExplorationLog,
    grid: &GridWorldConfig,
    tau: f64,
    horizon: usize,
) -> Dictionary {
    let mut dict = Dictionary::default();
    let moves = step_displacements(log, grid);
    let mut recent = Recent::new(horizon);
    for (t, obs) in log.observations.iter().enumerate() {
        recent.advance(t, moves[t]);
        if contrast(&obs.sensory) < tau {
            continue;
        }
        let next = dict.ids.len();
        let id = *dict
            .ids
            .entry(key(&obs.sensory, grid.decimals))
            .or_insert(next);
        if id == next {
            dict.truths.push(log.truths()[t]);
        }
        for &(_, i, cum) in &recent.entries {
            if cum != (0, 0) {
                let links = &mut dict.links;
                dict.lookup.entry((i, cum.0, cum.1)).or_insert_with(|| {
                    links.push((i, id));
                    links.len() - 1
                });
            }
        }
        recent.push(t, id);
    }
    dict
}

/// Trials and successes per stored link over one later scene.
fn count_trials(
    log: &ExplorationLog,
    grid: &GridWorldConfig,
    tau: f64,
    horizon: usize,
    dict: &Dictionary,
) -> (Vec<u64>, Vec<u64>) {
    let mut trials = vec![0u64; dict.links.len()];
    let mut successes = vec![0u64; dict.links.len()];
    let moves = step_displacements(log, grid);
    let mut recent = Recent::new(horizon);
    for (t, obs) in log.observations.iter().enumerate() {
        recent.advance(t, moves[t]);
        let here = if contrast(&obs.sensory) >= tau {
            dict.ids.get(&key(&obs.sensory, grid.decimals)).copied()
        } else {
            None
        };
        for &(_, i, cum) in &recent.entries {
            if cum == (0, 0) {
                continue;
            }
            if let Some(&l) = dict.lookup.get(&(i, cum.0, cum.1)) {
                trials[l] += 1;
                if here == Some(dict.links[l].1) {
                    successes[l] += 1;
                }
            }
        }
        if let Some(id) = here {
            recent.push(t, id);
        }
    }
    (trials, successes)
}

fn scene_streams(base: &Streams, scene: usize) -> Streams {
    Streams::new(base.derive_seed(&format!("scene{scene}")))
}

/// Walks one scene built on `background` and returns its log.
fn explore_scene(
    cfg: &ObjectDiscoveryConfig,
    patches: &[ObjectPatch],
    mut background: Vec<f64>,
    streams: &Streams,
    non_overlap: bool,
    steps: usize,
    episode: usize,
) -> Result<ExplorationLog, ExperimentError> {
    let scene = grid_build_scene(
        &cfg.grid,
        patches,
        &mut background,
        &mut streams.stream("layout"),
        false,
        non_overlap,
    )?;
    let mut world =
        GridWorld::with_random_position(cfg.grid.clone(), scene, &mut streams.stream("position"))?;
    let babble = BabbleConfig {
        steps,
        policy: Policy::UniformMotorDelta,
        seed: streams.derive_seed("babble"),
    };
    Ok(run_babble(&mut world, &babble, episode)?)
}

fn class_of(label: HiddenLabel, n_objects: usize) -> usize {
    match label.kind {
        LabelKind::ObjectId => label.id,
        LabelKind::Background => n_objects,
        _ => n_objects + 1,
    }
}

fn class_names(n_objects: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..n_objects).map(|o| format!("object{o}")).collect();
    names.push("background".into());
    names.push("none".into());
    names
}

/// Success rates where at least `min_trials` trials were counted.
fn rates(
    trials: &TransitionCounts,
    successes: &TransitionCounts,
    min_trials: u64,
) -> (Matrix, Vec<bool>) {
    let (n, _, _) = trials.shape();
    let mut p = Matrix::zeros(n, n);
    let mut observed = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            let t = trials.get(i, j, 0);
            if t >= min_trials {
                p.set(i, j, successes.get(i, j, 0) as f64 / t as f64);
                observed[i * n + j] = true;
            }
        }
    }
    (p, observed)
}

struct Graph {
    partition: SubgraphPartition,
    eigengap: EigengapAnalysis,
    kept: usize,
    observed_pairs: usize,
}

/// Adds `tau * mean_degree / n` between every pair of connected nodes, so
/// that small stray components cannot claim a subgraph of their own.
/// Isolated nodes stay isolated.
fn regularize(w: &Affinity, tau: f64) -> Result<Affinity, ExperimentError> {
    if tau == 0.0 {
        return Ok(w.clone());
    }
    let degrees = w.degrees();
    let active: Vec<usize> = (0..w.n_nodes()).filter(|&i| degrees[i] > 0.0).collect();
    if active.is_empty() {
        return Ok(w.clone());
    }
    let mean = active.iter().map(|&i| degrees[i]).sum::<f64>() / active.len() as f64;
    let add = tau * mean / active.len() as f64;
    let mut weights = w.weights().clone();
    for &i in &active {
        for &j in &active {
            weights.set(i, j, weights.get(i, j) + add);
        }
    }
    Ok(Affinity::with_index_map(
        weights,
        w.index_map().to_vec(),
        w.n_states(),
    )?)
}

fn partition_graph(
    p: &Matrix,
    observed: &[bool],
    k: usize,
    regularization: f64,
    seed: u64,
) -> Result<Graph, ExperimentError> {
    let n = p.rows();
    let observed_pairs = observed.iter().filter(|&&o| o).count();
    if observed_pairs == 0 {
        return Err(ExperimentError::Insufficient(
            "no stored transition reached the minimum number of trials".into(),
        ));
    }
    let keep: Vec<bool> = (0..n)
        .map(|i| (0..n).any(|j| observed[i * n + j] || observed[j * n + i]))
        .collect();
    let kept = keep.iter().filter(|&&k| k).count();
    let w = symmetrize_dense(p, &keep)?;
    let w = regularize(&w, regularization)?;
    let active = w.degrees().iter().filter(|&&d| d > 0.0).count();
    if active < k {
        return Err(ExperimentError::Insufficient(format!(
            "{active} connected states for {k} subgraphs"
        )));
    }
    let spectrum = spectral_decompose(&w)?;
    let eigengap = spectrum.eigengap(active.min(10))?;
    let partition = spectrum.cluster(k, seed)?;
    Ok(Graph {
        partition,
        eigengap,
        kept,
        observed_pairs,
    })
}

fn mean_internal(p: &Matrix, observed: &[bool], partition: &SubgraphPartition) -> Vec<Option<f64>> {
    let n = p.rows();
    let mut sums = vec![(0.0, 0usize); partition.k];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (partition.labels[i], partition.labels[j]);
            if observed[i * n + j] && a == b && a < partition.k {
                sums[a].0 += p.get(i, j);
                sums[a].1 += 1;
            }
        }
    }
    sums.into_iter()
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect()
}

fn evaluate(
    composition: &[Vec<u64>],
    interior: &[u64],
    k: usize,
    means: &[Option<f64>],
) -> (Vec<ObjectMatch>, Option<usize>, bool) {
    let objects: Vec<ObjectMatch> = (0..interior.len())
        .map(|o| {
            let mut best = 0;
            for s in 1..k {
                if composition[s][o] > composition[best][o] {
                    best = s;
                }
            }
            let size: u64 = composition[best].iter().sum();
            let hits = composition[best][o];
            ObjectMatch {
                object: o,
                subgraph: best,
                purity: if size == 0 {
                    0.0
                } else {
                    hits as f64 / size as f64
                },
                coverage: if interior[o] == 0 {
                    0.0
                } else {
                    hits as f64 / interior[o] as f64
                },
            }
        })
        .collect();
    let claimed: Vec<usize> = objects.iter().map(|m| m.subgraph).collect();
    let free: Vec<usize> = (0..k).filter(|s| !claimed.contains(s)).collect();
    let background = (free.len() == 1).then(|| free[0]);
    let mut distinct = claimed.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let recovered = distinct.len() == objects.len()
        && objects
            .iter()
            .all(|m| m.purity >= PURITY_MIN && m.coverage >= COVERAGE_MIN)
        && background.is_some_and(|b| {
            let bg = means[b].unwrap_or(0.0);
            objects
                .iter()
                .all(|m| means[m.subgraph].is_some_and(|p| bg < p))
        });
    (objects, background, recovered)
}

fn composition(
    partition: &SubgraphPartition,
    classes: &[usize],
    n_classes: usize,
) -> Vec<Vec<u64>> {
    let mut table = vec![vec![0u64; n_classes]; partition.n_labels()];
    for (&l, &c) in partition.labels.iter().zip(classes) {
        table[l][c] += 1;
    }
    table
}

/// Runs the full pipeline. `jobs` threads explore the later scenes; the
/// result does not depend on it.
pub fn run_object_discovery(
    cfg: &ObjectDiscoveryConfig,
    jobs: usize,
) -> Result<ObjectDiscoveryRun, ExperimentError> {
    cfg.validate()?;
    let streams = Streams::new(cfg.seed);
    let patches = draw_patches(&cfg.grid, &mut streams.stream("objects"));
    let initial_background = draw_background(&cfg.grid, &mut streams.stream("background"));
    let first_scene = explore_scene(
        cfg,
        &patches,
        initial_background.clone(),
        &scene_streams(&streams, 0),
        true,
        cfg.initial_steps,
        0,
    )?;

    let tau = match cfg.tau {
        Some(t) => t,
        None => {
            let contrasts: Vec<f64> = first_scene
                .observations
                .iter()
                .map(|o| contrast(&o.sensory))
                .collect();
            salience_threshold(&contrasts, cfg.salient_fraction)
        }
    };
    let dict = build_dictionary(&first_scene, &cfg.grid, tau, cfg.link_horizon);
    if dict.ids.is_empty() {
        return Err(ExperimentError::Insufficient(
            "no salient input in the first scene".into(),
        ));
    }
    if cfg.n_scenes < 2 {
        return Err(ExperimentError::Insufficient(
            "no scene after the first: every probability is masked".into(),
        ));
    }

    // Scene s keeps the background of the latest redraw at or before s.
    let mut redraw = streams.stream("redraw");
    let mut source = vec![0usize; cfg.n_scenes];
    for s in 1..cfg.n_scenes {
        source[s] = if redraw.gen::<f64>() < cfg.grid.p_env_redraw {
            s
        } else {
            source[s - 1]
        };
    }
    let per_scene = par_map(jobs, (1..cfg.n_scenes).collect(), |s| {
        let background = match source[s] {
            0 => initial_background.clone(),
            r => draw_background(
                &cfg.grid,
                &mut scene_streams(&streams, r).stream("background"),
            ),
        };
        let log = explore_scene(
            cfg,
            &patches,
            background,
            &scene_streams(&streams, s),
            !cfg.grid.allow_overlap,
            cfg.steps_per_scene,
            s,
        )?;
        Ok(count_trials(&log, &cfg.grid, tau, cfg.link_horizon, &dict))
    })?;

    let n = dict.truths.len();
    let mut trials = TransitionCounts::square(n);
    let mut successes = TransitionCounts::square(n);
    for (scene_trials, scene_successes) in &per_scene {
        for (l, &(i, j)) in dict.links.iter().enumerate() {
            trials.add(i, j, 0, scene_trials[l])?;
            successes.add(i, j, 0, scene_successes[l])?;
        }
    }

    let seed = streams.derive_seed("spectral");
    let (matrix, observed) = rates(&trials, &successes, cfg.min_trials);
    let graph = partition_graph(
        &matrix,
        &observed,
        cfg.k_subgraphs,
        cfg.regularization,
        seed,
    )?;

    let n_objects = cfg.grid.n_objects;
    let classes: Vec<usize> = dict
        .truths
        .iter()
        .map(|&t| class_of(t, n_objects))
        .collect();
    let mut interior = vec![0u64; n_objects];
    for &c in classes.iter().filter(|&&c| c < n_objects) {
        interior[c] += 1;
    }
    let composition = composition(&graph.partition, &classes, n_objects + 2);
    let means = mean_internal(&matrix, &observed, &graph.partition);
    let (objects, background_subgraph, recovered) =
        evaluate(&composition, &interior, cfg.k_subgraphs, &means);
    let metrics = ObjectDiscoveryMetrics {
        tau,
        dictionary_size: n,
        stored_transitions: dict.links.len(),
        total_trials: trials.total(),
        observed_pairs: graph.observed_pairs,
        kept_states: graph.kept,
        eigengap: graph.eigengap,
        classes: class_names(n_objects),
        composition,
        interior_states: interior,
        subgraph_sizes: graph.partition.sizes(),
        mean_internal_probability: means,
        objects,
        background_subgraph,
        recovered,
    };
    let report = ExperimentReport {
        experiment: EXPERIMENT.into(),
        seed: cfg.seed,
        config: to_value(cfg),
        seeds: [("spectral".to_string(), seed)].into_iter().collect(),
        metrics: to_value(&metrics),
    };
    Ok(ObjectDiscoveryRun {
        report,
        metrics,
        first_scene,
        state_truths: dict.truths,
        trials,
        successes,
        matrix,
        observed,
        partition: graph.partition,
    })
}

/// Rebuilds the graph stage from saved trial and success counts. Class
/// composition cannot be rebuilt without hidden labels, so it is taken from
/// the report and checked against the recomputed subgraph sizes.
pub fn recompute_object_discovery(
    report: &ExperimentReport,
    trials: &TransitionCounts,
    successes: &TransitionCounts,
) -> Result<(ObjectDiscoveryMetrics, SubgraphPartition), ExperimentError> {
    check_experiment(report, EXPERIMENT)?;
    let cfg: ObjectDiscoveryConfig = from_value(&report.config, "config")?;
    let stored: ObjectDiscoveryMetrics = from_value(&report.metrics, "metrics")?;
    let seed = *report
        .seeds
        .get("spectral")
        .ok_or_else(|| ExperimentError::Config("missing spectral seed".into()))?;
    if trials.shape() != successes.shape() || trials.shape().0 != stored.dictionary_size {
        return Err(ExperimentError::Config(
            "count matrices do not match the dictionary".into(),
        ));
    }
    let (matrix, observed) = rates(trials, successes, cfg.min_trials);
    let graph = partition_graph(
        &matrix,
        &observed,
        cfg.k_subgraphs,
        cfg.regularization,
        seed,
    )?;
    let means = mean_internal(&matrix, &observed, &graph.partition);
    let sizes = graph.partition.sizes();
    let stored_sizes: Vec<usize> = stored
        .composition
        .iter()
        .map(|r| r.iter().sum::<u64>() as usize)
        .collect();
    if sizes != stored_sizes {
        return Err(ExperimentError::Config(
            "recomputed partition disagrees with the stored composition".into(),
        ));
    }
    let (objects, background_subgraph, recovered) = evaluate(
        &stored.composition,
        &stored.interior_states,
        cfg.k_subgraphs,
        &means,
    );
    let metrics = ObjectDiscoveryMetrics {
        total_trials: trials.total(),
        observed_pairs: graph.observed_pairs,
        kept_states: graph.kept,
        eigengap: graph.eigengap,
        subgraph_sizes: sizes,
        mean_internal_probability: means,
        objects,
        background_subgraph,
        recovered,
        ..stored
    };
    Ok((metrics, graph.partition))
}
