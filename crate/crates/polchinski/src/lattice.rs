//! Torus geometry, discrete Laplacian, coupling matrices and covariance schedules.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Eigen};

pub const MAX_DENSE_SITES: usize = 4096;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Torus {
    pub dim: usize,
    pub side: f64,
    pub mesh: f64,
    pub per_side: usize,
    #[serde(skip)]
    neighbours: Vec<Vec<usize>>,
}

/// Periodic lattice `side·T^d ∩ mesh·Z^d`.
pub fn build_torus(dim: usize, side: f64, mesh: f64) -> Result<Torus> {
    if dim == 0 {
        return invalid("dimension must be at least 1");
    }
    if !(side > 0.0) || !(mesh > 0.0) {
        return invalid(format!("side length {side} and mesh {mesh} must be positive"));
    }
    let ratio = side / mesh;
    let per_side = ratio.round();
    if (ratio - per_side).abs() > 1e-9 * ratio.max(1.0) || per_side < 1.0 {
        return invalid(format!("side length L={side} is not an integer multiple of mesh ε={mesh}"));
    }
    let per_side = per_side as usize;
    if per_side < 2 {
        return invalid(format!("torus with L={side}, ε={mesh} has a single site per side"));
    }
    let n = per_side
        .checked_pow(dim as u32)
        .filter(|&n| n <= MAX_DENSE_SITES)
        .ok_or_else(|| Error::Invalid(format!("{per_side}^{dim} sites exceeds the dense cap {MAX_DENSE_SITES}")))?;
    let mut neighbours = vec![Vec::with_capacity(2 * dim); n];
    for (site, nb) in neighbours.iter_mut().enumerate() {
        let mut stride = 1;
        for _ in 0..dim {
            let coord = (site / stride) % per_side;
            let up = (coord + 1) % per_side;
            let down = (coord + per_side - 1) % per_side;
            nb.push(site - coord * stride + up * stride);
            nb.push(site - coord * stride + down * stride);
            stride *= per_side;
        }
    }
    Ok(Torus { dim, side, mesh, per_side, neighbours })
}

impl Torus {
    pub fn sites(&self) -> usize {
        self.per_side.pow(self.dim as u32)
    }

    pub fn neighbours(&self, site: usize) -> &[usize] {
        &self.neighbours[site]
    }

    /// Weight ε^d of the continuum inner product.
    pub fn volume_element(&self) -> f64 {
        self.mesh.powi(self.dim as i32)
    }

    /// −Δ^ε, positive semi-definite; multi-edges counted with multiplicity.
    pub fn laplacian(&self) -> Coupling {
        let n = self.sites();
        let inv_h2 = 1.0 / (self.mesh * self.mesh);
        let mut m = DMatrix::zeros(n, n);
        for x in 0..n {
            m[(x, x)] += 2.0 * self.dim as f64 * inv_h2;
            for &y in &self.neighbours[x] {
                m[(x, y)] -= inv_h2;
            }
        }
        Coupling::with_label(m, CouplingLabel::Laplacian).expect("laplacian is symmetric")
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingLabel {
    Laplacian,
    MeanField,
    Scalar,
    Dense,
}

/// Symmetric coupling matrix with a cached spectral decomposition.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub matrix: DMatrix<f64>,
    pub label: CouplingLabel,
    pub eigen: Eigen,
}

impl Coupling {
    pub fn new(matrix: DMatrix<f64>) -> Result<Coupling> {
        Self::with_label(matrix, CouplingLabel::Dense)
    }

    pub fn with_label(matrix: DMatrix<f64>, label: CouplingLabel) -> Result<Coupling> {
        if matrix.nrows() > MAX_DENSE_SITES {
            return invalid(format!("{} sites exceeds the dense cap", matrix.nrows()));
        }
        if !linalg::is_symmetric(&matrix, 1e-12) {
            return invalid("coupling matrix is not symmetric");
        }
        let eigen = Eigen::of(&matrix)?;
        Ok(Coupling { matrix, label, eigen })
    }

    pub fn scalar(a: f64) -> Coupling {
        Self::with_label(DMatrix::from_element(1, 1, a), CouplingLabel::Scalar).unwrap()
    }

    pub fn identity(n: usize, a: f64) -> Coupling {
        Self::with_label(DMatrix::identity(n, n) * a, CouplingLabel::Scalar).unwrap()
    }

    /// Mean-field projector P = I − Q, Q the projection onto constants.
    pub fn mean_field(n: usize) -> Coupling {
        let m = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
        Self::with_label(m, CouplingLabel::MeanField).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// A + shift·I
    pub fn shifted(&self, shift: f64) -> Coupling {
        let n = self.dim();
        let m = &self.matrix + DMatrix::identity(n, n) * shift;
        Coupling::with_label(m, self.label).unwrap()
    }

    pub fn scaled(&self, s: f64) -> Coupling {
        Coupling::with_label(&self.matrix * s, self.label).unwrap()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleKind {
    /// C_t = t·I on [0, horizon]; the reference Gaussian is N(0, horizon).
    Unit { horizon: f64 },
    /// Ċ_t = e^{−tA}; truncation time for reports.
    Heat { t_max: f64 },
    /// C_t = (A + 1/t)^{-1}
    PauliVillars { t_max: f64 },
    /// C_t = (tA + (α−t))^{-1} on [0, β]
    Ising { alpha: f64, beta: f64 },
}

/// Strictly monotone clock change t ↦ a(t).
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "map", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeMap {
    Identity,
    /// a(t) = t^p, p ≥ 1
    Power { p: f64 },
    /// a(t) = k t
    Linear { k: f64 },
    /// a(t) = a t + b t²
    Quadratic { a: f64, b: f64 },
}

impl TimeMap {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeMap::Identity => t,
            TimeMap::Power { p } => t.powf(p),
            TimeMap::Linear { k } => k * t,
            TimeMap::Quadratic { a, b } => a * t + b * t * t,
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        match *self {
            TimeMap::Identity => 1.0,
            TimeMap::Power { p } => {
                if t == 0.0 {
                    if p == 1.0 { 1.0 } else { 0.0 }
                } else {
                    p * t.powf(p - 1.0)
                }
            }
            TimeMap::Linear { k } => k,
            TimeMap::Quadratic { a, b } => a + 2.0 * b * t,
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        match *self {
            TimeMap::Identity | TimeMap::Linear { .. } => 0.0,
            TimeMap::Power { p } => {
                if p == 1.0 {
                    0.0
                } else if p == 2.0 {
                    2.0
                } else if t == 0.0 {
                    if p > 2.0 { 0.0 } else { f64::INFINITY }
                } else {
                    p * (p - 1.0) * t.powf(p - 2.0)
                }
            }
            TimeMap::Quadratic { b, .. } => 2.0 * b,
        }
    }

    /// Inverse on [0, ∞) for the finite-horizon endpoint.
    pub fn inverse(&self, s: f64) -> f64 {
        match *self {
            TimeMap::Identity => s,
            TimeMap::Power { p } => s.powf(1.0 / p),
            TimeMap::Linear { k } => s / k,
            TimeMap::Quadratic { a, b } => {
                if b == 0.0 {
                    s / a
                } else {
                    (-a + (a * a + 4.0 * b * s).sqrt()) / (2.0 * b)
                }
            }
        }
    }

    fn validate(&self, horizon: f64) -> Result<()> {
        match *self {
            TimeMap::Identity => Ok(()),
            TimeMap::Power { p } if p >= 1.0 && p.is_finite() => Ok(()),
            TimeMap::Power { p } => invalid(format!("power time map needs p ≥ 1, got {p}")),
            TimeMap::Linear { k } if k > 0.0 => Ok(()),
            TimeMap::Linear { k } => invalid(format!("linear time map needs k > 0, got {k}")),
            TimeMap::Quadratic { a, b } => {
                // a + 2bt > 0 on (0, horizon); a(0) = 0 by construction
                let end = if horizon.is_finite() { self.inverse_checked(horizon) } else { f64::INFINITY };
                let slope_end = if end.is_finite() { a + 2.0 * b * end } else if b < 0.0 { -1.0 } else { a.max(b) };
                if a < 0.0 || (a == 0.0 && b <= 0.0) || slope_end <= 0.0 || end.is_nan() {
                    invalid(format!("time map {a}t + {b}t² is not strictly increasing on the schedule domain"))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn inverse_checked(&self, s: f64) -> f64 {
        match *self {
            TimeMap::Quadratic { a, b } if b < 0.0 => {
                let disc = a * a + 4.0 * b * s;
                if disc < 0.0 { f64::NAN } else { (-a + disc.sqrt()) / (2.0 * b) }
            }
            _ => self.inverse(s),
        }
    }
}

/// Per-mode scalars (c, ċ, c̈) at one time, in A's eigenbasis.
#[derive(Clone, Debug)]
pub struct Modes {
    pub c: Vec<f64>,
    pub cdot: Vec<f64>,
    pub cddot: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ScheduleEval {
    pub c: DMatrix<f64>,
    pub cdot: DMatrix<f64>,
    pub cddot: DMatrix<f64>,
}

/// t ↦ (C_t, Ċ_t, C̈_t), all functions of the coupling A.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub coupling: Coupling,
    pub time_map: TimeMap,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, coupling: Coupling) -> Result<Schedule> {
        match kind {
            ScheduleKind::Unit { horizon } if !(horizon > 0.0 && horizon.is_finite()) => {
                return invalid(format!("unit schedule needs a finite positive horizon, got {horizon}"))
            }
            ScheduleKind::Heat { t_max } | ScheduleKind::PauliVillars { t_max } if !(t_max > 0.0) => {
                return invalid(format!("truncation time must be positive, got {t_max}"))
            }
            ScheduleKind::Ising { alpha, beta } => {
                if !(beta >= 0.0 && alpha > beta) {
                    return invalid(format!("ising schedule needs α > β ≥ 0, got α={alpha}, β={beta}"));
                }
                let (lo, hi) = (coupling.eigen.min(), coupling.eigen.max());
                if lo < -1e-10 || hi > 1.0 + 1e-10 {
                    return invalid(format!("ising coupling spectrum [{lo}, {hi}] is not inside [0, 1]"));
                }
            }
            ScheduleKind::Heat { .. } | ScheduleKind::PauliVillars { .. } => {
                if coupling.eigen.min() < -1e-12 {
                    return invalid("coupling must be positive semi-definite");
                }
            }
            _ => {}
        }
        Ok(Schedule { kind, coupling, time_map: TimeMap::Identity })
    }

    /// c_t = t on [0, horizon] for a single site (A = 1/horizon).
    pub fn unit_1d(horizon: f64) -> Schedule {
        Self::unit(1, horizon)
    }

    pub fn unit(n: usize, horizon: f64) -> Schedule {
        Self::new(ScheduleKind::Unit { horizon }, Coupling::identity(n, 1.0 / horizon)).expect("valid unit schedule")
    }

    pub fn heat(coupling: Coupling, t_max: f64) -> Result<Schedule> {
        Self::new(ScheduleKind::Heat { t_max }, coupling)
    }

    pub fn pauli_villars(coupling: Coupling, t_max: f64) -> Result<Schedule> {
        Self::new(ScheduleKind::PauliVillars { t_max }, coupling)
    }

    pub fn ising(coupling: Coupling, alpha: f64, beta: f64) -> Result<Schedule> {
        Self::new(ScheduleKind::Ising { alpha, beta }, coupling)
    }

    pub fn dim(&self) -> usize {
        self.coupling.dim()
    }

    /// New schedule with C^a_t = C_{a(t)}.
    pub fn reparametrize(&self, map: TimeMap) -> Result<Schedule> {
        if self.time_map != TimeMap::Identity {
            return Err(Error::Unsupported("composition of time maps".into()));
        }
        map.validate(self.native_end())?;
        let mut s = self.clone();
        s.time_map = map;
        Ok(s)
    }

    fn native_end(&self) -> f64 {
        match self.kind {
            ScheduleKind::Unit { horizon } => horizon,
            ScheduleKind::Ising { beta, .. } => beta,
            _ => f64::INFINITY,
        }
    }

    /// End of the (possibly reparametrised) domain; ∞ for infinite horizons.
    pub fn end(&self) -> f64 {
        let e = self.native_end();
        if e.is_finite() { self.time_map.inverse(e) } else { e }
    }

    pub fn is_infinite(&self) -> bool {
        !self.end().is_finite()
    }

    /// Truncation time used by reports on infinite horizons.
    pub fn truncation(&self) -> f64 {
        match self.kind {
            ScheduleKind::Heat { t_max } | ScheduleKind::PauliVillars { t_max } => self.time_map.inverse(t_max),
            _ => self.end(),
        }
    }

    /// Clock speed ȧ(t) of the time map; 1 without reparametrisation.
    pub fn speed(&self, t: f64) -> f64 {
        self.time_map.d1(t)
    }

    /// d/dt log ȧ(t)
    pub fn speed_log_derivative(&self, t: f64) -> f64 {
        self.time_map.d2(t) / self.time_map.d1(t)
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let hi = self.end();
        if !(t >= 0.0) || t > hi * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain { t, lo: 0.0, hi });
        }
        Ok(())
    }

    /// (c, ċ, c̈) for a single eigenvalue `a` at native time s.
    fn native_mode(&self, a: f64, s: f64) -> (f64, f64, f64) {
        match self.kind {
            ScheduleKind::Unit { .. } => (s, 1.0, 0.0),
            ScheduleKind::Heat { .. } => {
                let e = (-s * a).exp();
                let c = if a.abs() * s < 1e-300 || a == 0.0 { s } else { -(-s * a).exp_m1() / a };
                (c, e, -a * e)
            }
            ScheduleKind::PauliVillars { .. } => {
                let d = 1.0 + s * a;
                (s / d, 1.0 / (d * d), -2.0 * a / (d * d * d))
            }
            ScheduleKind::Ising { alpha, .. } => {
                let c = 1.0 / (alpha - s * (1.0 - a));
                let k = 1.0 - a;
                (c, k * c * c, 2.0 * k * k * c * c * c)
            }
        }
    }

    pub fn mode(&self, a: f64, t: f64) -> (f64, f64, f64) {
        let s = self.time_map.value(t);
        let (c, cd, cdd) = self.native_mode(a, s);
        if self.time_map == TimeMap::Identity {
            return (c, cd, cdd);
        }
        let (d1, d2) = (self.time_map.d1(t), self.time_map.d2(t));
        (c, d1 * cd, d2 * cd + d1 * d1 * cdd)
    }

    pub fn modes(&self, t: f64) -> Result<Modes> {
        self.check_time(t)?;
        let mut out = Modes { c: vec![], cdot: vec![], cddot: vec![] };
        for &a in self.coupling.eigen.values.iter() {
            let (c, cd, cdd) = self.mode(a, t);
            out.c.push(c);
            out.cdot.push(cd);
            out.cddot.push(cdd);
        }
        if out.c.iter().any(|&c| !(c >= -1e-14)) {
            return Err(Error::Numerical(format!("C_t not positive semi-definite at t={t}")));
        }
        Ok(out)
    }

    pub fn eval(&self, t: f64) -> Result<ScheduleEval> {
        let m = self.modes(t)?;
        let e = &self.coupling.eigen;
        Ok(ScheduleEval { c: e.from_diag(&m.c), cdot: e.from_diag(&m.cdot), cddot: e.from_diag(&m.cddot) })
    }

    /// Same quantities from dense matrix formulas, without the eigenbasis.
    pub fn eval_dense(&self, t: f64) -> Result<ScheduleEval> {
        self.check_time(t)?;
        let n = self.dim();
        let a = &self.coupling.matrix;
        let id = DMatrix::<f64>::identity(n, n);
        let s = self.time_map.value(t);
        let (c, cd, cdd) = match self.kind {
            ScheduleKind::Unit { .. } => (&id * s, id.clone(), DMatrix::zeros(n, n)),
            ScheduleKind::Heat { .. } => {
                let e = linalg::expm(&(a * -s));
                let c = linalg::phi1(&(a * -s)) * s;
                let cdd = -(a * &e);
                (c, e, cdd)
            }
            ScheduleKind::PauliVillars { .. } => {
                let inv = linalg::inverse(&(&id + a * s))?;
                let cd = &inv * &inv;
                let cdd = -2.0 * a * &cd * &inv;
                (&inv * s, cd, cdd)
            }
            ScheduleKind::Ising { alpha, .. } => {
                let c = linalg::inverse(&(a * s + &id * (alpha - s)))?;
                let k = &id - a;
                let cd = &c * &k * &c;
                let cdd = 2.0 * &cd * &k * &c;
                (c, cd, cdd)
            }
        };
        if self.time_map == TimeMap::Identity {
            return Ok(ScheduleEval { c, cdot: cd, cddot: cdd });
        }
        let (d1, d2) = (self.time_map.d1(t), self.time_map.d2(t));
        Ok(ScheduleEval { c, cdot: &cd * d1, cddot: &cd * d2 + cdd * (d1 * d1) })
    }

    /// Per-mode C_∞ (or C at the end of a finite horizon).
    pub fn c_inf_modes(&self) -> Vec<f64> {
        self.coupling
            .eigen
            .values
            .iter()
            .map(|&a| match self.kind {
                ScheduleKind::Unit { horizon } => horizon,
                ScheduleKind::Heat { .. } | ScheduleKind::PauliVillars { .. } => {
                    if a > 0.0 { 1.0 / a } else { f64::INFINITY }
                }
                ScheduleKind::Ising { beta, .. } => self.native_mode(a, beta).0,
            })
            .collect()
    }

    pub fn c_inf(&self) -> Result<DMatrix<f64>> {
        let m = self.c_inf_modes();
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("C_∞ is infinite: coupling has a zero mode".into()));
        }
        Ok(self.coupling.eigen.from_diag(&m))
    }

    /// True when every matrix of the schedule is a scalar multiple of I.
    pub fn is_scalar(&self) -> bool {
        let v = &self.coupling.eigen.values;
        v.max() - v.min() <= 1e-14 * v.amax().max(1.0)
    }

    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "time_map": self.time_map,
            "coupling_label": self.coupling.label,
            "sites": self.dim(),
            "coupling_spectrum": [self.coupling.eigen.min(), self.coupling.eigen.max()],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_neighbours() {
        let t = build_torus(1, 4.0, 1.0).unwrap();
        assert_eq!(t.sites(), 4);
        for x in 0..4 {
            assert_eq!(t.neighbours(x).len(), 2);
        }
    }

    #[test]
    fn small_two_torus_has_multi_edges() {
        let t = build_torus(2, 2.0, 1.0).unwrap();
        assert_eq!(t.sites(), 4);
        assert!(t.neighbours(0).iter().all(|&y| y != 0));
        assert_eq!(t.neighbours(0).len(), 4);
    }

    #[test]
    fn rejects_bad_ratio_and_single_site() {
        let e = build_torus(1, 1.0, 0.3).unwrap_err().to_string();
        assert!(e.contains("1") && e.contains("0.3"), "{e}");
        assert!(build_torus(2, 1.0, 1.0).is_err());
    }

    #[test]
    fn pauli_villars_scalar_values() {
        let s = Schedule::pauli_villars(Coupling::scalar(1.0), 10.0).unwrap();
        let (c, cd, cdd) = s.mode(1.0, 1.0);
        assert!((c - 0.5).abs() < 1e-15 && (cd - 0.25).abs() < 1e-15 && (cdd + 0.25).abs() < 1e-15);
    }

    #[test]
    fn ising_starts_at_inverse_alpha() {
        let s = Schedule::ising(Coupling::scalar(0.5), 0.6, 0.5).unwrap();
        let m = s.modes(0.0).unwrap();
        assert!((m.c[0] - 1.0 / 0.6).abs() < 1e-14);
    }

    #[test]
    fn quadratic_time_map_rejected_when_decreasing() {
        let s = Schedule::unit_1d(1.0);
        assert!(s.reparametrize(TimeMap::Quadratic { a: 1.0, b: -1.0 }).is_err());
        assert!(s.reparametrize(TimeMap::Quadratic { a: 1.0, b: -0.2 }).is_ok());
        assert!(s.reparametrize(TimeMap::Linear { k: -1.0 }).is_err());
    }
}
