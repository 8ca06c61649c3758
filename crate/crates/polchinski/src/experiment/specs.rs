//! Model and schedule descriptions accepted in experiment configs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ising::IsingModel;
use crate::lattice::{build_torus, Coupling, Schedule, ScheduleKind, TimeMap};
use crate::model::ContinuousModel;
use crate::potential::Potential;
use crate::renorm::Backend;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CouplingSpec {
    /// a·I on `sites` sites.
    Identity { value: f64, #[serde(default = "one")] sites: usize },
    /// −Δ + mass on a periodic lattice of the given dimension and side.
    Laplacian { dim: usize, side: usize, #[serde(default)] mass: f64 },
    Dense { matrix: Vec<Vec<f64>> },
}

fn one() -> usize {
    1
}

fn unit_weight() -> f64 {
    1.0
}

impl CouplingSpec {
    pub fn build(&self) -> Result<Coupling> {
        match self {
            CouplingSpec::Identity { value, sites } => {
                if *sites == 0 {
                    return invalid("coupling needs at least one site");
                }
                Ok(if *sites == 1 { Coupling::scalar(*value) } else { Coupling::identity(*sites, *value) })
            }
            CouplingSpec::Laplacian { dim, side, mass } => {
                let torus = build_torus(*dim, *side as f64, 1.0)?;
                Ok(torus.laplacian().shifted(*mass))
            }
            CouplingSpec::Dense { matrix } => {
                let n = matrix.len();
                if n == 0 || matrix.iter().any(|r| r.len() != n) {
                    return invalid("dense coupling must be a non-empty square matrix");
                }
                Coupling::new(DMatrix::from_fn(n, n, |i, j| matrix[i][j]))
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousSpec {
    /// Omitted for the unit schedule, whose coupling is 1/horizon.
    #[serde(default)]
    pub coupling: Option<CouplingSpec>,
    pub potential: Potential,
    #[serde(default = "unit_weight")]
    pub weight: f64,
    /// Site count for the unit schedule.
    #[serde(default = "one")]
    pub sites: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Unit { horizon: f64, #[serde(default)] time_map: Option<TimeMap> },
    Heat { t_max: f64, #[serde(default)] time_map: Option<TimeMap> },
    PauliVillars { t_max: f64, #[serde(default)] time_map: Option<TimeMap> },
}

impl ScheduleSpec {
    pub fn time_map(&self) -> Option<TimeMap> {
        match self {
            ScheduleSpec::Unit { time_map, .. } | ScheduleSpec::Heat { time_map, .. } | ScheduleSpec::PauliVillars { time_map, .. } => *time_map,
        }
    }
}

/// Builds the model and its schedule together; the unit schedule fixes the coupling.
pub fn build_continuous(model: &ContinuousSpec, sched: &ScheduleSpec) -> Result<(ContinuousModel, Schedule)> {
    model.potential.check_bounded_below(12.0, 2401)?;
    let base = match sched {
        ScheduleSpec::Unit { horizon, .. } => {
            if model.coupling.is_some() {
                return invalid("the unit schedule fixes the coupling to 1/horizon; omit `coupling`");
            }
            if !(*horizon > 0.0) {
                return invalid("horizon must be positive");
            }
            Schedule::unit(model.sites, *horizon)
        }
        ScheduleSpec::Heat { t_max, .. } | ScheduleSpec::PauliVillars { t_max, .. } => {
            let Some(c) = &model.coupling else {
                return invalid("heat and pauli-villars schedules need a `coupling`");
            };
            let c = c.build()?;
            let kind = if matches!(sched, ScheduleSpec::Heat { .. }) {
                ScheduleKind::Heat { t_max: *t_max }
            } else {
                ScheduleKind::PauliVillars { t_max: *t_max }
            };
            Schedule::new(kind, c)?
        }
    };
    let sched_full = match sched.time_map() {
        Some(m) if m != TimeMap::Identity => base.reparametrize(m)?,
        _ => base,
    };
    let mut m = ContinuousModel::new(sched_full.coupling.clone(), model.potential.clone());
    m.weight = model.weight;
    Ok((m, sched_full))
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IsingLattice {
    Ring { sites: usize },
    Chain { sites: usize, #[serde(default = "unit_weight")] coupling: f64 },
    Dense { matrix: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IsingSpec {
    pub lattice: IsingLattice,
    pub beta: f64,
    #[serde(default)]
    pub field: Option<Vec<f64>>,
}

impl IsingSpec {
    pub fn build(&self) -> Result<IsingModel> {
        let m = match &self.lattice {
            IsingLattice::Ring { sites } => IsingModel::ring(*sites, self.beta)?,
            IsingLattice::Chain { sites, coupling } => IsingModel::chain(*sites, self.beta, *coupling)?,
            IsingLattice::Dense { matrix } => {
                let n = matrix.len();
                if n == 0 || matrix.iter().any(|r| r.len() != n) {
                    return invalid("dense coupling must be a non-empty square matrix");
                }
                IsingModel::new(DMatrix::from_fn(n, n, |i, j| matrix[i][j]), self.beta, vec![0.0; n])?
            }
        };
        Ok(match &self.field {
            Some(h) if h.len() != m.dim() => return invalid("field length differs from the site count"),
            Some(h) => m.with_field(h.clone()),
            None => m,
        })
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendSpec {
    Auto,
    Quadrature { #[serde(default)] order: Option<usize> },
    MonteCarlo { samples: usize, #[serde(default)] seed: u64 },
}

impl BackendSpec {
    pub fn build(&self) -> Backend {
        match *self {
            BackendSpec::Auto => Backend::Auto,
            BackendSpec::Quadrature { order } => Backend::Quadrature { order },
            BackendSpec::MonteCarlo { samples, seed } => Backend::MonteCarlo { samples, seed },
        }
    }
}

/// A range written as {"from", "to", "count"}.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.from];
        }
        (0..self.count).map(|i| self.from + (self.to - self.from) * i as f64 / (self.count - 1) as f64).collect()
    }
}
