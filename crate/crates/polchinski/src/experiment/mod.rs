//! Batch experiments: a JSON config names a task and its parameters; the run writes a results JSON and CSV tables.

pub mod catalogue;
mod report;
pub mod specs;
mod tasks;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub use report::{csv, num, Quantity, Relation, Report};

pub const SCHEMA: u32 = 1;

/// `git describe` of the build, or "unknown" outside a checkout.
pub const GIT_DESCRIBE: &str = env!("POLCHINSKI_GIT_DESCRIBE");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Flow,
    Lsi,
    Sample,
    Ising,
    Cw,
    Hj,
    Transport,
}

impl Task {
    pub const ALL: [Task; 7] = [Task::Flow, Task::Lsi, Task::Sample, Task::Ising, Task::Cw, Task::Hj, Task::Transport];

    pub fn name(self) -> &'static str {
        match self {
            Task::Flow => "flow",
            Task::Lsi => "lsi",
            Task::Sample => "sample",
            Task::Ising => "ising",
            Task::Cw => "cw",
            Task::Hj => "hj",
            Task::Transport => "transport",
        }
    }

    pub fn from_name(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Task-specific; validated when the task runs.
    pub params: Value,
}

fn pointer_of(path: &serde_path_to_error::Path, prefix: &str, message: &str) -> String {
    use serde_path_to_error::Segment;
    let mut p = String::from(prefix);
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => p.push_str(&format!("/{index}")),
            Segment::Map { key } => p.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => p.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    // serde reports unknown keys against the enclosing object
    if let Some(rest) = message.strip_prefix("unknown field `") {
        if let Some(field) = rest.split('`').next() {
            if !p.ends_with(&format!("/{field}")) {
                p.push_str(&format!("/{field}"));
            }
        }
    }
    if p.is_empty() {
        p.push('/');
    }
    p
}

fn config_error(path: &serde_path_to_error::Path, prefix: &str, e: impl std::fmt::Display) -> Error {
    let message = e.to_string();
    let message = match message.find(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message,
    };
    Error::Config { pointer: pointer_of(path, prefix, &message), message }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| config_error(&e.path().clone(), "", e.into_inner()))?;
    Ok(cfg)
}

/// Deserialises task parameters; errors carry a pointer rooted at `/params`.
pub fn parse_params<T: DeserializeOwned>(v: &Value) -> Result<T> {
    serde_path_to_error::deserialize(v.clone()).map_err(|e| config_error(&e.path().clone(), "/params", e.into_inner()))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub config: ExperimentConfig,
    pub report: Report,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }

    /// 0 when every declared check passed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() { 0 } else { 2 }
    }

    /// The results document; contains nothing run-dependent beyond the config and seed.
    pub fn results(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "experiment": self.config.name,
            "task": self.config.task,
            "seed": self.config.seed,
            "build": { "version": env!("CARGO_PKG_VERSION"), "git_describe": GIT_DESCRIBE },
            "config": self.config,
            "passed": self.passed(),
            "failures": self.report.failures(),
            "quantities": self.report.quantities,
            "records": self.report.records,
            "tables": self.report.tables.keys().collect::<Vec<_>>(),
        })
    }

    /// Writes results.json, the CSV tables and run.json (timestamp, threads, wall time) into `dir`.
    pub fn write(&self, dir: &Path, run_info: &Value) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(&self.results()).map_err(|e| Error::Numerical(e.to_string()))?;
        text.push('\n');
        std::fs::write(dir.join("results.json"), text)?;
        for (name, body) in &self.report.tables {
            std::fs::write(dir.join(name), body)?;
        }
        let mut info = serde_json::to_string_pretty(run_info).map_err(|e| Error::Numerical(e.to_string()))?;
        info.push('\n');
        std::fs::write(dir.join("run.json"), info)?;
        Ok(())
    }
}

/// Runs a parsed config; `task` must match the config's task when given.
pub fn run(config: &ExperimentConfig, task: Option<Task>, seed: Option<u64>) -> Result<Outcome> {
    if let Some(t) = task {
        if t != config.task {
            return Err(Error::Config {
                pointer: "/task".into(),
                message: format!("config is a `{}` experiment, invoked as `{}`", config.task.name(), t.name()),
            });
        }
    }
    let mut config = config.clone();
    if let Some(s) = seed {
        config.seed = s;
    }
    let mut report = Report::default();
    tasks::dispatch(config.task, &config.params, config.seed, &mut report)?;
    Ok(Outcome { config, report })
}
