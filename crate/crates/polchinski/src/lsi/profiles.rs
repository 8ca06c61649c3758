//! λ̇ profiles: continuous models (observed minimum), φ⁴ examples, the 1-D exercise profile.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{build_profile, multiscale_be_bound, LambdaProfile, LsiReport, ProfileOptions, Provenance};
use crate::error::{invalid, Result};
use crate::lattice::Schedule;
use crate::linalg::sym_min_eig;
use crate::model::ContinuousModel;
use crate::renorm::{tilt_with, Backend};

/// Smallest eigenvalue of Ċ^{1/2} H Ċ^{1/2} − ½ Ċ^{−1/2} C̈ Ċ^{−1/2}, computed in A's eigenbasis.
pub fn criterion_min_eig(sched: &Schedule, t: f64, hess: &DMatrix<f64>) -> Result<f64> {
    let m = sched.modes(t)?;
    let q = &sched.coupling.eigen.vectors;
    let hp = q.transpose() * hess * q;
    let n = hp.nrows();
    let root: Vec<f64> = m.cdot.iter().map(|c| c.max(0.0).sqrt()).collect();
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            mat[(i, j)] = root[i] * hp[(i, j)] * root[j];
        }
        let ratio = if m.cdot[i] > 1e-300 { m.cddot[i] / m.cdot[i] } else { sched.speed_log_derivative(t) };
        mat[(i, i)] -= 0.5 * ratio;
    }
    if n == 1 {
        return Ok(mat[(0, 0)]);
    }
    sym_min_eig(&mat)
}

/// Field points probed for the observed minimum: constant fields on a grid.
pub fn default_probe_fields(model: &ContinuousModel, sched: &Schedule, points: usize) -> Result<Vec<Vec<f64>>> {
    let n = model.dim();
    let cmax = sched.c_inf_modes().into_iter().filter(|c| c.is_finite()).fold(0.0, f64::max);
    let r = 4.0 * cmax.sqrt().max(0.5) + 1.5;
    Ok((0..points).map(|i| vec![-r + 2.0 * r * i as f64 / (points - 1) as f64; n]).collect())
}

fn rate_at(model: &ContinuousModel, sched: &Schedule, t: f64, phi: &[f64], backend: Backend) -> Result<f64> {
    let c = sched.eval(t)?.c;
    let r = tilt_with(model, &c, phi, backend)?;
    criterion_min_eig(sched, t, &r.hess)
}

/// Observed minimum over the probe fields, refined by golden section around the worst probe (1-D fields).
pub fn observed_min_rate(
    model: &ContinuousModel,
    sched: &Schedule,
    probes: &[Vec<f64>],
    t: f64,
    backend: Backend,
) -> Result<f64> {
    let vals: Vec<f64> = probes.iter().map(|p| rate_at(model, sched, t, p, backend)).collect::<Result<_>>()?;
    let (k, mut best) = vals.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    if probes.len() >= 3 && probes[0].len() == 1 {
        let lo = probes[k.saturating_sub(1)][0];
        let hi = probes[(k + 1).min(probes.len() - 1)][0];
        let f = |x: f64| rate_at(model, sched, t, &[x], backend);
        let (x, v) = golden_min(f, lo, hi, 1e-7)?;
        let _ = x;
        best = best.min(v);
    }
    Ok(best)
}

/// Golden-section search for a minimum on [a, b].
pub fn golden_min(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// The criterion rate at time t: exact at φ = 0 for quadratic potentials, else the observed minimum over probes.
pub fn criterion_rate<'a>(
    model: &'a ContinuousModel,
    sched: &'a Schedule,
    probes: &'a [Vec<f64>],
    backend: Backend,
) -> impl Fn(f64) -> Result<f64> + Sync + 'a {
    let exact = model.potential.quadratic_curvature().is_some();
    move |t: f64| {
        if exact {
            rate_at(model, sched, t, &vec![0.0; model.dim()], backend)
        } else {
            observed_min_rate(model, sched, probes, t, backend)
        }
    }
}

/// Observed-minimum profile of a continuous model along its schedule.
pub fn continuous_profile(
    model: &ContinuousModel,
    sched: &Schedule,
    probes: &[Vec<f64>],
    backend: Backend,
    opts: &ProfileOptions,
) -> Result<LambdaProfile> {
    if model.dim() != sched.dim() {
        return invalid("model and schedule dimensions differ");
    }
    let rate = criterion_rate(model, sched, probes, backend);
    let prov = if model.potential.quadratic_curvature().is_some() { Provenance::AnalyticFormula } else { Provenance::ObservedMinimum };
    build_profile(&rate, sched.time_map, sched.end(), sched.truncation(), prov, opts)
}

/// Probes and backend used by the default continuous bound.
pub fn default_rate_setup(model: &ContinuousModel, sched: &Schedule) -> Result<(Vec<Vec<f64>>, Backend)> {
    let probes = default_probe_fields(model, sched, 41)?;
    let backend = if model.dim() <= 2 { Backend::Quadrature { order: None } } else { Backend::MonteCarlo { samples: 4000, seed: 0 } };
    Ok((probes, backend))
}

pub fn continuous_lsi_bound(model: &ContinuousModel, sched: &Schedule, opts: &ProfileOptions) -> Result<(LambdaProfile, LsiReport)> {
    let (probes, backend) = default_rate_setup(model, sched)?;
    let p = continuous_profile(model, sched, &probes, backend, opts)?;
    let r = multiscale_be_bound(&p);
    Ok((p, r))
}

/// λ̇_t = 1/t − χ(g, r+1/t)/t² for lattice φ⁴ with Ċ_t = (tA+1)^{−2}.
pub fn phi4_lambda_dot(t: f64, chi_shifted: f64) -> f64 {
    1.0 / t - chi_shifted / (t * t)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Phi4Regimes {
    /// λ_{t₀} ≥ log(1 + r t₀)
    pub small_scale: f64,
    /// λ_t − λ_{t₀} ≥ log(t/t₀) − χ(g,r)/t₀
    pub large_scale: f64,
}

pub fn phi4_regime_bounds(r: f64, t0: f64, t: f64, chi_at_r: f64) -> Result<Phi4Regimes> {
    if !(r + 1.0 / t0 > 0.0) {
        return invalid("small-scale regime needs r + 1/t₀ > 0");
    }
    Ok(Phi4Regimes { small_scale: (1.0 + r * t0).ln(), large_scale: (t / t0).ln() - chi_at_r / t0 })
}

/// Mean-field susceptibility bound χ(t) = D/(δ + 1/t) with λ̇ = 0 on [0, 1].
pub fn mean_field_rate(d: f64, delta: f64) -> impl Fn(f64) -> Result<f64> + Sync {
    move |t: f64| Ok(if t <= 1.0 { 0.0 } else { phi4_lambda_dot(t, d / (delta + 1.0 / t)) })
}

pub fn mean_field_integral(d: f64, delta: f64, opts: &ProfileOptions) -> Result<LambdaProfile> {
    if !(d > 0.5 && delta > 0.0) {
        return invalid("mean-field profile needs D > ½ and δ > 0");
    }
    let rate = mean_field_rate(d, delta);
    let mut o = opts.clone();
    o.breakpoints.push(1.0);
    build_profile(&rate, crate::lattice::TimeMap::Identity, f64::INFINITY, 10.0 / delta, Provenance::AnalyticFormula, &o)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub deltas: Vec<f64>,
    pub integrals: Vec<f64>,
    pub slope: f64,
    pub expected: f64,
}

/// Log-log slope of ∫e^{−2λ} against δ; expected 1 − 2D.
pub fn mean_field_scaling(d: f64, deltas: &[f64], opts: &ProfileOptions) -> Result<ScalingFit> {
    let integrals: Vec<f64> = deltas.iter().map(|&dl| mean_field_integral(d, dl, opts).map(|p| p.total())).collect::<Result<_>>()?;
    let x: Vec<f64> = deltas.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = integrals.iter().map(|v| v.ln()).collect();
    let fit = crate::stats::linear_fit(&x, &y)?;
    Ok(ScalingFit { deltas: deltas.to_vec(), integrals, slope: fit.slope, expected: 1.0 - 2.0 * d })
}

/// λ̇ = −1/(t₀−t) on [0, t₀/2], 1/t − C/t² on [t₀/2, 1].
pub fn exercise_rate(t0: f64, c: f64) -> impl Fn(f64) -> Result<f64> + Sync {
    move |t: f64| Ok(if t <= 0.5 * t0 { -1.0 / (t0 - t) } else { 1.0 / t - c / (t * t) })
}

/// sup over t ∈ [lo, hi] and probe fields of var_{μ_t^φ}(ζ), for a 1-D model.
pub fn observed_variance_sup(model: &ContinuousModel, sched: &Schedule, lo: f64, hi: f64, times: usize, probes: &[f64]) -> Result<f64> {
    if model.dim() != 1 {
        return invalid("variance sup is implemented for single-site models");
    }
    let mut best: f64 = 0.0;
    for i in 0..times {
        let t = lo + (hi - lo) * i as f64 / (times - 1).max(1) as f64;
        let c = sched.eval(t)?.c;
        for &p in probes {
            let r = tilt_with(model, &c, &[p], Backend::Quadrature { order: None })?;
            best = best.max(r.cov[(0, 0)]);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExerciseProfile {
    pub t0: f64,
    pub variance_sup: f64,
    pub inverse_gamma: f64,
}

/// 1-D unit-schedule profile built from −inf V₀″ and the observed variance bound.
pub fn exercise_profile(model: &ContinuousModel, opts: &ProfileOptions) -> Result<(ExerciseProfile, LambdaProfile)> {
    let curv = model.potential.inf_d2().filter(|v| *v < 0.0);
    let Some(k) = curv else {
        return invalid("the exercise profile needs a potential with negative inf V″");
    };
    let t0 = -1.0 / (k * model.weight);
    if t0 >= 2.0 {
        return invalid("t₀/2 must lie inside the unit horizon");
    }
    let sched = Schedule::unit_1d(1.0);
    let probes: Vec<f64> = (0..81).map(|i| -4.0 + 0.1 * i as f64).collect();
    let c = observed_variance_sup(model, &sched, 0.5 * t0, 1.0, 41, &probes)?;
    let rate = exercise_rate(t0, c);
    let mut o = opts.clone();
    o.breakpoints.push(0.5 * t0);
    let p = build_profile(&rate, crate::lattice::TimeMap::Identity, 1.0, 1.0, Provenance::ObservedMinimum, &o)?;
    Ok((ExerciseProfile { t0, variance_sup: c, inverse_gamma: p.total() }, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Coupling, TimeMap};
    use crate::potential::Potential;

    #[test]
    fn free_field_heat_is_inverse_mass() {
        let m = ContinuousModel::single_site(2.0, Potential::Zero);
        let s = Schedule::heat(Coupling::scalar(2.0), 20.0).unwrap();
        let (_, r) = continuous_lsi_bound(&m, &s, &ProfileOptions::default()).unwrap();
        assert!((r.inverse_gamma - 0.5).abs() < 1e-9, "{}", r.inverse_gamma);
    }

    #[test]
    fn gaussian_unit_profile_is_log() {
        let m = ContinuousModel::single_site(1.0, Potential::quadratic(2.0));
        let s = Schedule::unit_1d(1.0);
        let (p, r) = continuous_lsi_bound(&m, &s, &ProfileOptions::default()).unwrap();
        let lam = *p.knot_cumulative.last().unwrap();
        assert!((lam - 3f64.ln()).abs() < 1e-10, "{lam}");
        // ∫₀¹ (1+2t)^{-2} dt = 1/3
        assert!((r.inverse_gamma - 1.0 / 3.0).abs() < 1e-10);
        let rp = s.reparametrize(TimeMap::Power { p: 2.0 }).unwrap();
        let (_, r2) = continuous_lsi_bound(&m, &rp, &ProfileOptions::default()).unwrap();
        assert!((r2.inverse_gamma - r.inverse_gamma).abs() < 1e-10);
    }

    #[test]
    fn mean_field_matches_closed_form() {
        let d = 1.5;
        for delta in [0.1, 1e-3] {
            let p = mean_field_integral(d, delta, &ProfileOptions::default()).unwrap();
            let exact = 1.0 + (1.0 + delta).powi(3) / (delta * delta) * (1.0 / (1.0 + delta) - 0.5 / (1.0 + delta).powi(2));
            assert!((p.total() - exact).abs() / exact < 1e-6, "{} {}", p.total(), exact);
        }
    }
}
