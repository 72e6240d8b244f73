//! Run configuration: a TOML file with top-level run options and one table
//! per experiment, overridden by command-line flags.

use std::fmt;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use smc_core::experiments::{EnvDiscoveryConfig, ObjectDiscoveryConfig, VisualFieldConfig};

pub const DEFAULT_OUT: &str = "runs";
pub const DEFAULT_MAX_CELLS: usize = 200;

/// Invalid configuration; the message names the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Envdisc,
    Objects,
    Retina,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Envdisc => "envdisc",
            Experiment::Objects => "objects",
            Experiment::Retina => "retina",
        }
    }

    /// Key that `--steps` overrides.
    fn steps_key(self) -> &'static str {
        match self {
            Experiment::Envdisc => "steps",
            Experiment::Objects | Experiment::Retina => "steps_per_scene",
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    emit_truth: Option<bool>,
    emit_log: Option<bool>,
    max_cells: Option<usize>,
    envdisc: Option<toml::Table>,
    objects: Option<toml::Table>,
    retina: Option<toml::Table>,
}

/// Values given on the command line; `None` and `false` leave the file
/// value in place.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub emit_truth: bool,
    pub emit_log: bool,
    pub max_cells: Option<usize>,
    pub steps: Option<usize>,
    pub noise: bool,
    /// `key=value` assignments into the experiment table; dotted keys reach
    /// nested tables such as `wall.p_env`.
    pub set: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentConfig {
    Envdisc(EnvDiscoveryConfig),
    Objects(ObjectDiscoveryConfig),
    Retina(VisualFieldConfig),
}

impl ExperimentConfig {
    pub fn experiment(&self) -> Experiment {
        match self {
            ExperimentConfig::Envdisc(_) => Experiment::Envdisc,
            ExperimentConfig::Objects(_) => Experiment::Objects,
            ExperimentConfig::Retina(_) => Experiment::Retina,
        }
    }

    fn to_table(&self) -> toml::Table {
        let value = match self {
            ExperimentConfig::Envdisc(c) => toml::Table::try_from(c),
            ExperimentConfig::Objects(c) => toml::Table::try_from(c),
            ExperimentConfig::Retina(c) => toml::Table::try_from(c),
        };
        let mut table = value.expect("experiment configs serialize to TOML");
        table.remove("seed");
        table
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub emit_truth: bool,
    pub emit_log: bool,
    pub max_cells: usize,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn run_dir(&self) -> PathBuf {
        self.out.join(format!(
            "{}_seed{}",
            self.experiment.experiment().name(),
            self.seed
        ))
    }

    /// The fully resolved configuration in the file format. Parsing it back
    /// yields the same configuration.
    pub fn to_toml(&self) -> String {
        let mut top = toml::Table::new();
        top.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        top.insert(
            "out".into(),
            toml::Value::String(self.out.to_string_lossy().into_owned()),
        );
        top.insert("jobs".into(), toml::Value::Integer(self.jobs as i64));
        top.insert("emit_truth".into(), toml::Value::Boolean(self.emit_truth));
        top.insert("emit_log".into(), toml::Value::Boolean(self.emit_log));
        top.insert(
            "max_cells".into(),
            toml::Value::Integer(self.max_cells as i64),
        );
        top.insert(
            self.experiment.experiment().name().into(),
            toml::Value::Table(self.experiment.to_table()),
        );
        toml::to_string(&top).expect("resolved config serializes")
    }
}

fn parse_value(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty());
    let last = last.ok_or_else(|| ConfigError(format!("empty key in `{key}`")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError(format!("`{part}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn typed<T: DeserializeOwned>(name: &str, table: toml::Table) -> Result<T, ConfigError> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError(format!("[{name}]: {}", e.message())))
}

/// Resolves `file` (TOML text, possibly empty) and `flags` into a run
/// configuration. Precedence, lowest first: defaults, file, `--set`, flags.
pub fn parse_config(
    experiment: Experiment,
    file: &str,
    flags: &Overrides,
) -> Result<RunConfig, ConfigError> {
    let mut file: FileConfig =
        toml::from_str(file).map_err(|e| ConfigError(format!("config file: {e}")))?;
    let name = experiment.name();
    let mut table = match experiment {
        Experiment::Envdisc => file.envdisc.take(),
        Experiment::Objects => file.objects.take(),
        Experiment::Retina => file.retina.take(),
    }
    .unwrap_or_default();
    if table.contains_key("seed") {
        return Err(ConfigError(format!(
            "[{name}].seed: the seed is set at the top level"
        )));
    }
    for assignment in &flags.set {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("--set `{assignment}`: expected key=value")))?;
        let key = key.trim();
        if key == "seed" {
            return Err(ConfigError("--set seed: use --seed".into()));
        }
        set_path(&mut table, key, parse_value(value.trim()))?;
    }
    if let Some(steps) = flags.steps {
        table.insert(
            experiment.steps_key().into(),
            toml::Value::Integer(steps as i64),
        );
    }
    if flags.noise {
        if experiment != Experiment::Retina {
            return Err(ConfigError("--noise applies to retina only".into()));
        }
        set_path(&mut table, "retina.noise_mode", toml::Value::Boolean(true))?;
    }

    let seed = flags.seed.or(file.seed).unwrap_or(0);
    let experiment = match experiment {
        Experiment::Envdisc => ExperimentConfig::Envdisc(EnvDiscoveryConfig {
            seed,
            ..typed(name, table)?
        }),
        Experiment::Objects => ExperimentConfig::Objects(ObjectDiscoveryConfig {
            seed,
            ..typed(name, table)?
        }),
        Experiment::Retina => ExperimentConfig::Retina(VisualFieldConfig {
            seed,
            ..typed(name, table)?
        }),
    };
    let jobs = flags.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(ConfigError("jobs: must be at least 1".into()));
    }
    let max_cells = flags
        .max_cells
        .or(file.max_cells)
        .unwrap_or(DEFAULT_MAX_CELLS);
    if max_cells == 0 {
        return Err(ConfigError("max_cells: must be at least 1".into()));
    }
    Ok(RunConfig {
        seed,
        out: flags
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        jobs,
        emit_truth: flags.emit_truth || file.emit_truth.unwrap_or(false),
        emit_log: flags.emit_log || file.emit_log.unwrap_or(false),
        max_cells,
        experiment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_set_reaches_nested_tables() {
        let flags = Overrides {
            set: vec!["wall.p_env=0.25".into(), "k_clusters=12".into()],
            ..Default::default()
        };
        let cfg = parse_config(Experiment::Envdisc, "", &flags).unwrap();
        let ExperimentConfig::Envdisc(c) = cfg.experiment else {
            panic!()
        };
        assert_eq!(c.wall.p_env, 0.25);
        assert_eq!(c.k_clusters, 12);
    }

    #[test]
    fn section_seed_is_rejected() {
        let err = parse_config(
            Experiment::Retina,
            "[retina]\nseed = 3\n",
            &Overrides::default(),
        )
        .unwrap_err();
        assert!(err.0.contains("seed"));
    }
}
