//! Deterministic transport flow between ν₀ and the rescaled renormalised measures.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::Schedule;
use crate::linalg;
use crate::model::ContinuousModel;
use crate::renorm::{tilt_with, Backend};
use crate::sampling::renorm_measure_grid;
use crate::stats::{self, MeanErr};

/// Per-mode (1 − a c_a)^{−1/2}.
pub fn scaling_modes(sched: &Schedule, t: f64) -> Result<Vec<f64>> {
    let m = sched.modes(t)?;
    sched
        .coupling
        .eigen
        .values
        .iter()
        .zip(&m.c)
        .map(|(&a, &c)| {
            let d = 1.0 - a * c;
            if d > 0.0 {
                Ok(d.powf(-0.5))
            } else {
                Err(Error::Invalid(format!("I − AC_t is not positive definite at t={t} (mode value {d})")))
            }
        })
        .collect()
}

/// D_t = (I − AC_t)^{−1/2}
pub fn scaling_matrix(sched: &Schedule, t: f64) -> Result<DMatrix<f64>> {
    Ok(sched.coupling.eigen.from_diag(&scaling_modes(sched, t)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct TransportOptions {
    /// Relative max-norm agreement required between one step and two half steps.
    pub tol: f64,
    /// Initial pieces per output interval.
    pub base_steps: usize,
    /// Bisection depth allowed per piece.
    pub max_halvings: usize,
    #[serde(skip)]
    pub backend: Backend,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { tol: 1e-11, base_steps: 4, max_halvings: 24, backend: Backend::Quadrature { order: None } }
    }
}

#[derive(Clone, Debug)]
pub struct TransportState {
    pub t: f64,
    pub points: Vec<DVector<f64>>,
    pub jacobians: Vec<DMatrix<f64>>,
    pub scaling: DMatrix<f64>,
    /// Substeps used on the interval ending at t.
    pub substeps: usize,
}

struct Rhs<'a> {
    model: &'a ContinuousModel,
    sched: &'a Schedule,
    backend: Backend,
}

impl Rhs<'_> {
    /// (∂S, ∂J) = ½ D Ċ (∇V, Hess V · D⁻¹ J) at D⁻¹ S.
    fn eval(&self, t: f64, s: &DVector<f64>, j: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = s.len();
        if self.model.potential.is_zero() {
            return Ok((DVector::zeros(n), DMatrix::zeros(n, n)));
        }
        let e = &self.sched.coupling.eigen;
        let d = scaling_modes(self.sched, t)?;
        let ev = self.sched.eval(t)?;
        let dmat = e.from_diag(&d);
        let dinv = e.from_diag(&d.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
        let y = &dinv * s;
        let tl = tilt_with(self.model, &ev.c, y.as_slice(), self.backend)?;
        let left = 0.5 * &dmat * &ev.cdot;
        Ok((&left * &tl.mean_grad, &left * &tl.hess * &dinv * j))
    }
}

fn rk4_interval(rhs: &Rhs, t0: f64, t1: f64, steps: usize, s: &DVector<f64>, j: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let h = (t1 - t0) / steps as f64;
    let (mut s, mut j) = (s.clone(), j.clone());
    for k in 0..steps {
        let t = t0 + h * k as f64;
        let (a1, b1) = rhs.eval(t, &s, &j)?;
        let (a2, b2) = rhs.eval(t + 0.5 * h, &(&s + &a1 * (0.5 * h)), &(&j + &b1 * (0.5 * h)))?;
        let (a3, b3) = rhs.eval(t + 0.5 * h, &(&s + &a2 * (0.5 * h)), &(&j + &b2 * (0.5 * h)))?;
        let (a4, b4) = rhs.eval(t + h, &(&s + &a3 * h), &(&j + &b3 * h))?;
        s += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
        j += (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (h / 6.0);
    }
    Ok((s, j))
}

fn step_error(coarse: &(DVector<f64>, DMatrix<f64>), fine: &(DVector<f64>, DMatrix<f64>)) -> f64 {
    let ds = (&fine.0 - &coarse.0).amax() / (1.0 + fine.0.amax());
    let dj = (&fine.1 - &coarse.1).amax() / (1.0 + fine.1.amax());
    let e = ds.max(dj);
    if e.is_finite() { e } else { f64::INFINITY }
}

/// One RK4 step against two half steps; failed or inaccurate pieces are bisected up to `depth` times.
fn bisect_interval(
    rhs: &Rhs,
    t0: f64,
    t1: f64,
    s: &DVector<f64>,
    j: &DMatrix<f64>,
    tol: f64,
    depth: usize,
) -> Result<(DVector<f64>, DMatrix<f64>, usize)> {
    let attempt = rk4_interval(rhs, t0, t1, 1, s, j).and_then(|c| rk4_interval(rhs, t0, t1, 2, s, j).map(|f| (c, f)));
    if let Ok((coarse, fine)) = &attempt {
        if step_error(coarse, fine) <= tol {
            return Ok((fine.0.clone(), fine.1.clone(), 2));
        }
    }
    if depth == 0 {
        return match attempt {
            Err(e) => Err(e),
            Ok(_) => Err(Error::Unstable(format!("transport step below {:e} still fails the tolerance at t={t0}", t1 - t0))),
        };
    }
    let mid = 0.5 * (t0 + t1);
    let (s1, j1, a) = bisect_interval(rhs, t0, mid, s, j, tol, depth - 1)?;
    let (s2, j2, b) = bisect_interval(rhs, mid, t1, &s1, &j1, tol, depth - 1)?;
    Ok((s2, j2, a + b))
}

fn adaptive_interval(
    rhs: &Rhs,
    t0: f64,
    t1: f64,
    s: &DVector<f64>,
    j: &DMatrix<f64>,
    opts: &TransportOptions,
) -> Result<(DVector<f64>, DMatrix<f64>, usize)> {
    let pieces = opts.base_steps.max(1);
    let h = (t1 - t0) / pieces as f64;
    let (mut s, mut j, mut used) = (s.clone(), j.clone(), 0);
    for k in 0..pieces {
        let a = t0 + h * k as f64;
        let b = if k + 1 == pieces { t1 } else { a + h };
        let (s1, j1, n) = bisect_interval(rhs, a, b, &s, &j, opts.tol, opts.max_halvings)?;
        s = s1;
        j = j1;
        used += n;
    }
    Ok((s, j, used))
}

/// Integrates S_t and ∇S_t from the identity at t = 0 through the increasing `times`.
pub fn transport_flow(
    model: &ContinuousModel,
    sched: &Schedule,
    base: &[Vec<f64>],
    times: &[f64],
    opts: &TransportOptions,
) -> Result<Vec<TransportState>> {
    let n = model.dim();
    if sched.dim() != n {
        return invalid("model and schedule dimensions differ");
    }
    if base.iter().any(|p| p.len() != n) {
        return invalid("base point has the wrong dimension");
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return invalid("transport times must be increasing and non-negative");
    }
    for &t in times {
        sched.check_time(t)?;
        if sched.is_infinite() && t > sched.truncation() {
            return invalid(format!("time {t} beyond the truncation {}", sched.truncation()));
        }
    }
    let rhs = Rhs { model, sched, backend: opts.backend };
    let mut grid = vec![0.0];
    grid.extend(times.iter().copied().filter(|&t| t > 0.0));
    let per_point: Vec<Vec<(DVector<f64>, DMatrix<f64>, usize)>> = base
        .par_iter()
        .map(|p| {
            let mut s = DVector::from_column_slice(p);
            let mut j = DMatrix::identity(n, n);
            let mut out = vec![(s.clone(), j.clone(), 0)];
            for w in grid.windows(2) {
                let (s1, j1, k) = adaptive_interval(&rhs, w[0], w[1], &s, &j, opts)?;
                s = s1;
                j = j1;
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Unstable(format!("transport state not finite at t={}", w[1])));
                }
                out.push((s.clone(), j.clone(), k));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let skip = usize::from(times.first() != Some(&0.0));
    let mut states = vec![];
    for (k, &t) in grid.iter().enumerate().skip(skip) {
        let substeps = per_point.iter().map(|v| v[k].2).max().unwrap_or(0);
        states.push(TransportState {
            t,
            points: per_point.iter().map(|v| v[k].0.clone()).collect(),
            jacobians: per_point.iter().map(|v| v[k].1.clone()).collect(),
            scaling: scaling_matrix(sched, t)?,
            substeps,
        });
    }
    Ok(states)
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub t: f64,
    pub point: usize,
    pub probe: Option<usize>,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    pub times: Vec<f64>,
    /// λ_t used at each time.
    pub lambda: Vec<f64>,
    /// min over points of σ_min(D_t∇S_t)² e^{−λ_t} − 1
    pub min_slack: Vec<f64>,
    /// max over points of |σ_max(D_t∇S_t)² e^{−λ_t} − 1|, small when the bound is saturated
    pub saturation_gap: Vec<f64>,
    /// Implied ∇Ŝ_t bound e^{−λ_t/2} in the |D_t ·| input norm.
    pub inverse_bound: Vec<f64>,
    pub worst: Option<Violation>,
    pub passed: bool,
    pub tolerance: f64,
}

/// Checks |D_t∇S_t(φ)f|² ≥ e^{λ_t}|f|² for all base points, the given probes and the worst direction.
pub fn lipschitz_monitor(states: &[TransportState], lambda: impl Fn(f64) -> f64, probes: &[Vec<f64>], tolerance: f64) -> Result<LipschitzReport> {
    let mut rep = LipschitzReport {
        times: vec![],
        lambda: vec![],
        min_slack: vec![],
        saturation_gap: vec![],
        inverse_bound: vec![],
        worst: None,
        passed: true,
        tolerance,
    };
    for st in states {
        let l = lambda(st.t);
        let el = (-l).exp();
        let (mut lo, mut gap) = (f64::INFINITY, 0.0f64);
        for (p, jac) in st.jacobians.iter().enumerate() {
            let m = &st.scaling * jac;
            let gram = m.transpose() * &m;
            let (emin, emax) = (linalg::sym_min_eig(&gram)?, linalg::sym_max_eig(&gram)?);
            let s = emin * el - 1.0;
            gap = gap.max((emin * el - 1.0).abs()).max((emax * el - 1.0).abs());
            let mut consider = |slack: f64, probe: Option<usize>| {
                if slack < lo {
                    lo = slack;
                }
                if rep.worst.as_ref().is_none_or(|w| slack < w.slack) {
                    rep.worst = Some(Violation { t: st.t, point: p, probe, slack });
                }
            };
            consider(s, None);
            for (k, f) in probes.iter().enumerate() {
                if f.len() != m.ncols() {
                    return invalid("probe vector has the wrong dimension");
                }
                let f = DVector::from_column_slice(f);
                let nf = f.norm_squared();
                if nf == 0.0 {
                    continue;
                }
                consider((&m * &f).norm_squared() * el / nf - 1.0, Some(k));
            }
        }
        rep.passed &= lo >= -tolerance;
        rep.times.push(st.t);
        rep.lambda.push(l);
        rep.min_slack.push(lo);
        rep.saturation_gap.push(gap);
        rep.inverse_bound.push((-0.5 * l).exp());
    }
    if rep.passed {
        rep.worst = None;
    }
    Ok(rep)
}

/// S_t(φ) and ∇S_t(φ) for one base point.
pub fn transport_map(model: &ContinuousModel, sched: &Schedule, t: f64, phi: &[f64], opts: &TransportOptions) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let st = transport_flow(model, sched, &[phi.to_vec()], &[t], opts)?;
    let last = st.last().unwrap();
    Ok((last.points[0].clone(), last.jacobians[0].clone()))
}

#[derive(Clone, Debug, Serialize)]
pub struct Inversion {
    pub point: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Newton solve of S_t(φ) = target.
pub fn transport_inverse(
    model: &ContinuousModel,
    sched: &Schedule,
    t: f64,
    target: &[f64],
    guess: &[f64],
    opts: &TransportOptions,
) -> Result<Inversion> {
    let y = DVector::from_column_slice(target);
    let mut x = DVector::from_column_slice(guess);
    for it in 1..=50 {
        let (s, j) = transport_map(model, sched, t, x.as_slice(), opts)?;
        let r = &s - &y;
        let res = r.amax();
        if res < 1e-12 * (1.0 + y.amax()) {
            return Ok(Inversion { point: x.iter().copied().collect(), iterations: it - 1, residual: res });
        }
        let step = j.lu().solve(&r).ok_or_else(|| Error::Numerical("singular transport Jacobian".into()))?;
        x -= step;
    }
    Err(Error::Numerical("Newton inversion of the transport map did not converge".into()))
}

#[derive(Clone, Debug, Serialize)]
pub struct PushforwardCheck {
    pub t: f64,
    pub mean: MeanErr,
    pub second: MeanErr,
    pub target_mean: f64,
    pub target_second: f64,
    /// Both moments within 3 standard errors.
    pub passed: bool,
}

/// 1-D: samples of ν₀ pushed by D_t⁻¹S_t against grid moments of ν_t.
pub fn pushforward_check(
    model: &ContinuousModel,
    sched: &Schedule,
    times: &[f64],
    samples: usize,
    seed: u64,
    opts: &TransportOptions,
) -> Result<Vec<PushforwardCheck>> {
    if model.dim() != 1 {
        return Err(Error::Unsupported("pushforward moments are checked for single-site models".into()));
    }
    let nu0 = renorm_measure_grid(model, sched, 0.0, 20000)?;
    let xs = nu0.sample(samples, seed);
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let nodes = 121;
    let base: Vec<Vec<f64>> = (0..nodes).map(|i| vec![lo + (hi - lo) * i as f64 / (nodes - 1) as f64]).collect();
    let states = transport_flow(model, sched, &base, times, opts)?;
    let mut out = vec![];
    for st in states.iter().filter(|s| s.t > 0.0) {
        let d = st.scaling[(0, 0)];
        let vals: Vec<f64> = st.points.iter().map(|p| p[0]).collect();
        let ders: Vec<f64> = st.jacobians.iter().map(|j| j[(0, 0)]).collect();
        let h = (hi - lo) / (nodes - 1) as f64;
        let pushed: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let u = ((x - lo) / h).clamp(0.0, (nodes - 1) as f64);
                let i = (u.floor() as usize).min(nodes - 2);
                let s = u - i as f64;
                cubic(vals[i], vals[i + 1], ders[i] * h, ders[i + 1] * h, s) / d
            })
            .collect();
        let sq: Vec<f64> = pushed.iter().map(|x| x * x).collect();
        let (m1, m2) = (stats::mean_stderr(&pushed), stats::mean_stderr(&sq));
        let target = renorm_measure_grid(model, sched, st.t, 20000)?;
        let (tm, tv) = target.moments();
        let t2 = tv + tm * tm;
        let ok = |m: MeanErr, v: f64| (m.mean - v).abs() <= 3.0 * m.stderr + 1e-9;
        out.push(PushforwardCheck { t: st.t, mean: m1, second: m2, target_mean: tm, target_second: t2, passed: ok(m1, tm) && ok(m2, t2) });
    }
    Ok(out)
}

fn cubic(p0: f64, p1: f64, m0: f64, m1: f64, s: f64) -> f64 {
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
}

/// CSV rows t,point,phi,S,dS for a 1-D flow.
pub fn flow_to_csv(states: &[TransportState], base: &[Vec<f64>]) -> String {
    let mut s = String::from("t,point,phi,s,jacobian\n");
    for st in states {
        for (k, p) in st.points.iter().enumerate() {
            s.push_str(&format!("{:.12e},{k},{:.12e},{:.12e},{:.12e}\n", st.t, base[k][0], p[0], st.jacobians[k][(0, 0)]));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Coupling;
    use crate::potential::Potential;

    #[test]
    fn scaling_on_pauli_villars() {
        let s = Schedule::pauli_villars(Coupling::scalar(1.0), 100.0).unwrap();
        assert!((scaling_matrix(&s, 3.0).unwrap()[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((scaling_matrix(&s, 0.0).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        let h = Schedule::heat(Coupling::scalar(1.0), 100.0).unwrap();
        assert!((scaling_matrix(&h, 1.0).unwrap()[(0, 0)] - 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn free_field_is_identity() {
        let s = Schedule::pauli_villars(Coupling::scalar(1.0), 10.0).unwrap();
        let m = ContinuousModel::single_site(1.0, Potential::Zero);
        let st = transport_flow(&m, &s, &[vec![0.7]], &[1.0, 5.0], &TransportOptions::default()).unwrap();
        assert_eq!(st.last().unwrap().points[0][0], 0.7);
    }

    #[test]
    fn gaussian_slope_saturates() {
        // λ_t = log(1 + (1+m)t), |D∇S|² = e^{λ_t}
        let s = Schedule::pauli_villars(Coupling::scalar(1.0), 50.0).unwrap();
        let m = 0.8;
        let model = ContinuousModel::single_site(1.0, Potential::quadratic(m));
        let st = transport_flow(&model, &s, &[vec![0.3]], &[0.5, 2.0, 10.0], &TransportOptions::default()).unwrap();
        let rep = lipschitz_monitor(&st, |t| (1.0 + (1.0 + m) * t).ln(), &[], 1e-8).unwrap();
        assert!(rep.passed);
        assert!(rep.saturation_gap.iter().all(|g| *g < 1e-8), "{:?}", rep.saturation_gap);
    }
}
