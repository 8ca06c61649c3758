//! The bundled reproduction catalogue and the configs it points to.

use serde::{Deserialize, Serialize};

use super::Task;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub id: String,
    /// Acceptance criterion number, when the entry reproduces one.
    #[serde(default)]
    pub criterion: Option<u32>,
    pub title: String,
    pub task: Task,
    pub configs: Vec<String>,
    pub anchor: String,
    /// Release-build wall time on one core.
    pub expected_runtime: String,
    pub check: String,
}

const CATALOGUE: &str = include_str!("../../configs/catalogue.json");

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../configs/", $name, ".json")))),*]
    };
}

/// (name, JSON text) for every bundled config.
pub const BUNDLED: &[(&str, &str)] = bundled!(
    "gaussian-closed-form",
    "bakry-emery-heat",
    "pde-double-well",
    "entropy-split",
    "localisation-ks",
    "follmer-gaussian",
    "martingale-double-well",
    "high-temperature",
    "ring-gap-sweep",
    "covariance-domination",
    "mean-field-scaling",
    "curie-weiss",
    "transport-gaussian",
    "transport-double-well",
    "reparametrisation",
    "gaussian-exactness",
    "ising-ring-n8-beta0.3",
    "lsi-divergent-beta1.5",
    "hopf-lax-double-well",
    "sampler-diagnostics",
);

/// Entries in catalogue order.
pub fn list_experiments() -> Result<Vec<Entry>> {
    serde_json::from_str(CATALOGUE).map_err(|e| Error::Invalid(format!("bundled catalogue is malformed: {e}")))
}

pub fn bundled_config(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Fixed-width listing, one line per entry.
pub fn render(entries: &[Entry]) -> String {
    let mut s = String::new();
    for e in entries {
        let crit = e.criterion.map(|c| format!("{c:>2}")).unwrap_or_else(|| " -".into());
        s.push_str(&format!(
            "{crit}  {:<24} {:<9} {:>7}  {}  [{}]\n      configs: {}\n      check: {}\n",
            e.id,
            e.task.name(),
            e.expected_runtime,
            e.title,
            e.anchor,
            e.configs.join(", "),
            e.check
        ));
    }
    s
}
