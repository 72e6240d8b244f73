//! Experiment dispatch and run-directory output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use smc_core::clustering::{spectral_decompose, symmetrize, SubgraphPartition};
use smc_core::experiments::{
    recompute_env_discovery, recompute_object_discovery, recompute_visual_field, run_env_discovery,
    run_object_discovery, run_visual_field, ExperimentReport,
};
use smc_core::{HiddenLabel, LabelKind, ProbabilityMatrix, TransitionCounts};

use crate::config::{ExperimentConfig, RunConfig};
use crate::heatmap::{subgraph_order, Heatmap};

/// `report --recompute` found values differing from the stored ones.
#[derive(Debug)]
pub struct RecomputeMismatch(pub Vec<String>);

impl std::fmt::Display for RecomputeMismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "recomputed values differ: {}", self.0.join(", "))
    }
}

impl std::error::Error for RecomputeMismatch {}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_all(dir: &Path, files: &[(String, String)]) -> Result<()> {
    files
        .iter()
        .try_for_each(|(name, text)| write(dir, name, text))
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))
}

fn partition_json(p: &SubgraphPartition) -> String {
    let mut s = serde_json::to_string_pretty(p).expect("partition serializes");
    s.push('\n');
    s
}

fn label_name(kind: LabelKind) -> &'static str {
    match kind {
        LabelKind::EnvironmentState => "environment_state",
        LabelKind::ObjectId => "object_id",
        LabelKind::Background => "background",
        LabelKind::None => "none",
    }
}

fn truth_csv(truths: &[HiddenLabel]) -> String {
    let mut s = String::from("state,truth_kind,truth_id\n");
    for (i, t) in truths.iter().enumerate() {
        writeln!(s, "{i},{},{}", label_name(t.kind), t.id).unwrap();
    }
    s
}

fn centroids_csv(m: &smc_core::clustering::Matrix) -> String {
    let mut s = String::from("cluster");
    for d in 0..m.cols() {
        write!(s, ",c{d}").unwrap();
    }
    s.push('\n');
    for i in 0..m.rows() {
        write!(s, "{i}").unwrap();
        for v in m.row(i) {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn matrix_heatmap(t: &ProbabilityMatrix, cmd: usize, order: &[usize], max_cells: usize) -> String {
    let (n, _, _) = t.shape();
    let masked: Vec<bool> = t.observed_rows(cmd).iter().map(|o| !o).collect();
    Heatmap::reordered(t.slice(cmd), n, &masked, order, max_cells).to_svg()
}

/// Runs the configured experiment and writes its run directory, which is
/// returned.
pub fn run(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir, "config.toml", &cfg.to_toml())?;
    match &cfg.experiment {
        ExperimentConfig::Envdisc(c) => {
            let run = run_env_discovery(c)?;
            write(&dir, "report.json", &run.report.to_json())?;
            write(&dir, "partition.json", &partition_json(&run.partition))?;
            write_all(&dir, &run.counts.to_csv_slices("counts"))?;
            write_all(&dir, &run.matrix.to_csv_slices("T"))?;
            write(&dir, "centroids.csv", &centroids_csv(run.model.centroids()))?;
            let order = subgraph_order(&run.partition.labels);
            write(
                &dir,
                "T.svg",
                &matrix_heatmap(&run.matrix, 0, &order, cfg.max_cells),
            )?;
            if cfg.emit_log {
                write(&dir, "log.csv", &run.log.to_csv(false))?;
            }
            if cfg.emit_truth {
                write(&dir, "log_truth.csv", &run.log.to_csv(true))?;
            }
        }
        ExperimentConfig::Objects(c) => {
            let run = run_object_discovery(c, cfg.jobs)?;
            write(&dir, "report.json", &run.report.to_json())?;
            write(&dir, "partition.json", &partition_json(&run.partition))?;
            write_all(&dir, &run.trials.to_csv_slices("trials"))?;
            write_all(&dir, &run.successes.to_csv_slices("successes"))?;
            let n = run.matrix.rows();
            let row_seen: Vec<bool> = (0..n)
                .map(|i| run.observed[i * n..(i + 1) * n].iter().any(|&o| o))
                .collect();
            write(
                &dir,
                "T.csv",
                &rates_csv(run.matrix.as_slice(), n, &row_seen),
            )?;
            let masked: Vec<bool> = row_seen.iter().map(|s| !s).collect();
            let order = subgraph_order(&run.partition.labels);
            let svg = Heatmap::reordered(run.matrix.as_slice(), n, &masked, &order, cfg.max_cells);
            write(&dir, "T.svg", &svg.to_svg())?;
            if cfg.emit_log {
                write(&dir, "first_scene.csv", &run.first_scene.to_csv(false))?;
            }
            if cfg.emit_truth {
                write(&dir, "first_scene_truth.csv", &run.first_scene.to_csv(true))?;
                write(&dir, "states_truth.csv", &truth_csv(&run.state_truths))?;
            }
        }
        ExperimentConfig::Retina(c) => {
            let run = run_visual_field(c, cfg.jobs)?;
            write(&dir, "report.json", &run.report.to_json())?;
            write_all(&dir, &run.counts.to_csv_slices("counts"))?;
            write_all(&dir, &run.matrix.to_csv_slices("T"))?;
            write(&dir, "centroids.csv", &centroids_csv(&run.centroids))?;
            let (n, _, n_cmd) = run.matrix.shape();
            let order: Vec<usize> = (0..n).collect();
            for cmd in 0..n_cmd {
                write(
                    &dir,
                    &format!("T_cmd{cmd}.svg"),
                    &matrix_heatmap(&run.matrix, cmd, &order, cfg.max_cells),
                )?;
            }
        }
    }
    Ok(dir)
}

/// Success rates with rows lacking any observed entry left empty.
fn rates_csv(values: &[f64], n: usize, row_seen: &[bool]) -> String {
    let mut s = String::from("state");
    for j in 0..n {
        write!(s, ",{j}").unwrap();
    }
    s.push('\n');
    for i in 0..n {
        write!(s, "{i}").unwrap();
        for j in 0..n {
            s.push(',');
            if row_seen[i] {
                write!(s, "{}", values[i * n + j]).unwrap();
            }
        }
        s.push('\n');
    }
    s
}

/// Partitions a square matrix read from CSV into `k` subgraphs, writing
/// `partition.json` and a reordered heatmap into `out`.
pub fn cluster(
    matrix: &Path,
    k: usize,
    seed: u64,
    out: &Path,
    max_cells: usize,
) -> Result<PathBuf> {
    let text =
        fs::read_to_string(matrix).with_context(|| format!("reading {}", matrix.display()))?;
    let n_to = text
        .lines()
        .next()
        .map_or(0, |h| h.split(',').count().saturating_sub(1));
    let t = ProbabilityMatrix::from_csv_slices(&[text], n_to.max(1))
        .map_err(|e| crate::ConfigError(format!("{}: {e}", matrix.display())))?;
    let w = symmetrize(&t)?;
    let partition = spectral_decompose(&w)?.cluster(k, seed)?;
    let dir = out.join(format!("cluster_seed{seed}"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir, "partition.json", &partition_json(&partition))?;
    let order = subgraph_order(&partition.labels);
    write(&dir, "T.svg", &matrix_heatmap(&t, 0, &order, max_cells))?;
    Ok(dir)
}

fn diff_keys(stored: &serde_json::Value, fresh: &serde_json::Value) -> Vec<String> {
    match (stored, fresh) {
        (serde_json::Value::Object(a), serde_json::Value::Object(b)) => {
            let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
            keys.sort();
            keys.dedup();
            keys.into_iter()
                .filter(|k| a.get(*k) != b.get(*k))
                .map(|k| format!("metrics.{k}"))
                .collect()
        }
        _ if stored != fresh => vec!["metrics".into()],
        _ => Vec::new(),
    }
}

fn read_slices(dir: &Path, stem: &str, n_cmd: usize) -> Result<TransitionCounts> {
    let names: Vec<String> = if n_cmd == 1 {
        vec![format!("{stem}.csv")]
    } else {
        (0..n_cmd).map(|c| format!("{stem}_cmd{c}.csv")).collect()
    };
    let texts = names
        .iter()
        .map(|n| read(dir, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(TransitionCounts::from_csv_slices(&texts)?)
}

fn count_slices(dir: &Path, stem: &str) -> Result<usize> {
    if dir.join(format!("{stem}.csv")).exists() {
        return Ok(1);
    }
    let mut n = 0;
    while dir.join(format!("{stem}_cmd{n}.csv")).exists() {
        n += 1;
    }
    if n == 0 {
        bail!("no {stem} matrices in {}", dir.display());
    }
    Ok(n)
}

/// Recomputes every metric of a run directory from `report.json` and the
/// emitted count matrices, failing with [`RecomputeMismatch`] on any
/// difference.
pub fn recompute(dir: &Path) -> Result<()> {
    let report = ExperimentReport::from_json(&read(dir, "report.json")?)?;
    let (fresh, partition) = match report.experiment.as_str() {
        "envdisc" => {
            let counts = read_slices(dir, "counts", 1)?;
            let (m, p) = recompute_env_discovery(&report, &counts)?;
            (serde_json::to_value(m)?, Some(p))
        }
        "objects" => {
            let trials = read_slices(dir, "trials", 1)?;
            let successes = read_slices(dir, "successes", 1)?;
            let (m, p) = recompute_object_discovery(&report, &trials, &successes)?;
            (serde_json::to_value(m)?, Some(p))
        }
        "retina" => {
            let n_cmd = count_slices(dir, "counts")?;
            let counts = read_slices(dir, "counts", n_cmd)?;
            (
                serde_json::to_value(recompute_visual_field(&report, &counts)?)?,
                None,
            )
        }
        other => bail!("unknown experiment `{other}` in report.json"),
    };
    let mut diffs = diff_keys(&report.metrics, &fresh);
    if let Some(p) = partition {
        if read(dir, "partition.json")? != partition_json(&p) {
            diffs.push("partition".into());
        }
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(RecomputeMismatch(diffs).into())
    }
}
