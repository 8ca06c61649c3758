//! Task runners: each parses its parameter block and fills a report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use super::report::{csv, Relation, Report};
use super::specs::{build_continuous, BackendSpec, ContinuousSpec, CouplingSpec, IsingSpec, Range, ScheduleSpec};
use super::{parse_params, Task};
use crate::error::{invalid, Error, Result};
use crate::hj::{self, HopfLaxOptions, Spins};
use crate::ising::{covariance_domination, IsingModel};
use crate::lattice::{Schedule, TimeMap};
use crate::linalg::{max_abs_diff, Eigen};
use crate::lsi::{self, LsiReport, ProfileOptions};
use crate::model::ContinuousModel;
use crate::pde::{choose_radius, polchinski_pde_solve_1d};
use crate::potential::Potential;
use crate::quadrature::gauss_legendre;
use crate::renorm::{entropy_decomposition, renorm_potential, tilt_with, Backend};
use crate::sampling::renorm_measure_grid;
use crate::stats::{self, ks_one_sample, ks_two_sample};
use crate::stochastic::{self, DriftSource, SdeConfig};
use crate::transport::{self, TransportOptions};

pub(super) fn dispatch(task: Task, params: &Value, seed: u64, r: &mut Report) -> Result<()> {
    match task {
        Task::Flow => flow(parse_params(params)?, r),
        Task::Lsi => lsi_task(parse_params(params)?, r),
        Task::Sample => sample(parse_params(params)?, seed, r),
        Task::Ising => ising(parse_params(params)?, seed, r),
        Task::Cw => cw(parse_params(params)?, r),
        Task::Hj => hj_task(parse_params(params)?, seed, r),
        Task::Transport => transport_task(parse_params(params)?, seed, r),
    }
}

fn tol_1e8() -> f64 {
    1e-8
}

fn tol_1e6() -> f64 {
    1e-6
}

fn tol_1e10() -> f64 {
    1e-10
}

fn tol_1e12() -> f64 {
    1e-12
}

fn default_backend(spec: &Option<BackendSpec>) -> Backend {
    spec.as_ref().map(|b| b.build()).unwrap_or(Backend::Quadrature { order: None })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileSpec {
    #[serde(default)]
    per_decade: Option<usize>,
    #[serde(default)]
    first: Option<f64>,
    #[serde(default)]
    verify: Option<bool>,
}

fn profile_options(spec: &Option<ProfileSpec>) -> ProfileOptions {
    let mut o = ProfileOptions::default();
    if let Some(s) = spec {
        if let Some(v) = s.per_decade {
            o.per_decade = v;
        }
        if let Some(v) = s.first {
            o.first = v;
        }
        if let Some(v) = s.verify {
            o.verify = v;
        }
    }
    o
}

// ---------------------------------------------------------------- flow

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowParams {
    model: ContinuousSpec,
    schedule: ScheduleSpec,
    #[serde(default)]
    backend: Option<BackendSpec>,
    #[serde(default)]
    evaluate: Option<EvaluateGrid>,
    #[serde(default)]
    gaussian_check: Option<GaussianCheck>,
    #[serde(default)]
    pde: Option<PdeCheck>,
    #[serde(default)]
    entropy: Option<EntropyCheck>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateGrid {
    times: Vec<f64>,
    phis: Range,
}

/// Closed-form comparison for V₀ = ½mφ² on the unit schedule.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianCheck {
    masses: Vec<f64>,
    times: Vec<f64>,
    phis: Vec<f64>,
    #[serde(default = "tol_1e8")]
    tol: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PdeCheck {
    t: f64,
    points: usize,
    #[serde(default = "inner_default")]
    inner: f64,
    #[serde(default)]
    radius: Option<f64>,
    #[serde(default = "pde_tol")]
    tol: f64,
}

fn inner_default() -> f64 {
    0.8
}

fn pde_tol() -> f64 {
    1e-4
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntropyCheck {
    /// F(φ) = exp(exponent · Σφ)
    exponent: f64,
    times: Vec<f64>,
    #[serde(default = "tol_1e6")]
    tol: f64,
}

fn flow(p: FlowParams, r: &mut Report) -> Result<()> {
    let (model, sched) = build_continuous(&p.model, &p.schedule)?;
    let backend = default_backend(&p.backend);
    r.record("schedule", sched.describe());
    if let Some(g) = &p.evaluate {
        let phis = g.phis.points();
        if model.dim() != 1 {
            return invalid("evaluation grids are written for single-site models; use a one-site model");
        }
        let mut rows = vec![];
        for &t in &g.times {
            let c = sched.eval(t)?.c;
            let vals: Vec<Vec<f64>> = phis
                .par_iter()
                .map(|&x| tilt_with(&model, &c, &[x], backend).map(|w| vec![t, x, -w.log_mass, w.mean_grad[0], w.hess[(0, 0)]]))
                .collect::<Result<_>>()?;
            rows.extend(vals);
        }
        r.info("evaluate/points", rows.len() as f64);
        r.table("potential.csv", csv(&["t", "phi", "value", "gradient", "hessian"], rows));
    }
    if let Some(g) = &p.gaussian_check {
        let ScheduleSpec::Unit { horizon, time_map: None } = p.schedule else {
            return invalid("the closed-form Gaussian check needs the unit schedule without a time map");
        };
        if p.model.sites != 1 {
            return invalid("the closed-form Gaussian check is single-site");
        }
        let sched = Schedule::unit_1d(horizon);
        let mut worst = [0.0f64; 3];
        let mut rows = vec![];
        for &m in &g.masses {
            if !(m > 0.0) {
                return invalid("Gaussian masses must be positive");
            }
            let model = ContinuousModel::single_site(1.0 / horizon, Potential::quadratic(m));
            for &t in &g.times {
                let c = sched.eval(t)?.c;
                for &x in &g.phis {
                    let w = tilt_with(&model, &c, &[x], backend)?;
                    let s = t + 1.0 / m;
                    let exact = [x * x / (2.0 * s) + 0.5 * (m * t).ln_1p(), x / s, 1.0 / s];
                    let got = [-w.log_mass, w.mean_grad[0], w.hess[(0, 0)]];
                    for k in 0..3 {
                        worst[k] = worst[k].max((got[k] - exact[k]).abs());
                    }
                    rows.push(vec![m, t, x, got[0], exact[0], got[1], exact[1], got[2], exact[2]]);
                }
            }
        }
        r.info("gaussian/points", rows.len() as f64);
        r.at_most("gaussian/value_error", worst[0], 0.0, g.tol);
        r.at_most("gaussian/gradient_error", worst[1], 0.0, g.tol);
        r.at_most("gaussian/hessian_error", worst[2], 0.0, g.tol);
        r.table(
            "gaussian.csv",
            csv(&["m", "t", "phi", "value", "value_exact", "gradient", "gradient_exact", "hessian", "hessian_exact"], rows),
        );
    }
    if let Some(c) = &p.pde {
        if model.dim() != 1 || model.weight != 1.0 {
            return invalid("the PDE comparison needs a single-site model with unit weight");
        }
        let radius = c.radius.unwrap_or_else(|| choose_radius(&model.potential));
        let grid = polchinski_pde_solve_1d(&model.potential, &sched, radius, c.points, c.t)?;
        let idx: Vec<usize> = grid.inner(c.inner).collect();
        let errs: Vec<(f64, f64, f64)> = idx
            .par_iter()
            .map(|&i| {
                let x = grid.x(i);
                renorm_potential(&model, &sched, c.t, &[x], backend).map(|e| (x, grid.values[i], e.value))
            })
            .collect::<Result<_>>()?;
        let sup = errs.iter().map(|(_, a, b)| (a - b).abs()).fold(0.0, f64::max);
        r.info("pde/time_steps", grid.steps as f64);
        r.info("pde/radius", radius);
        r.at_most("pde/sup_error", sup, 0.0, c.tol);
        r.table("pde.csv", csv(&["phi", "pde", "quadrature"], errs.iter().map(|(x, a, b)| vec![*x, *a, *b])));
    }
    if let Some(c) = &p.entropy {
        let a = c.exponent;
        let f = move |x: &[f64]| (a * x.iter().sum::<f64>()).exp();
        let mut rows = vec![];
        for &t in &c.times {
            let s = entropy_decomposition(&model, &sched, &f, t, backend)?;
            r.at_most(format!("entropy/t{t}/residual"), s.residual().abs(), 0.0, c.tol);
            rows.push(vec![t, s.total, s.renormalised, s.fluctuation, s.residual()]);
        }
        r.table("entropy.csv", csv(&["t", "total", "renormalised", "fluctuation", "residual"], rows));
    }
    Ok(())
}

// ---------------------------------------------------------------- lsi

#[derive(Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum MethodName {
    Multiscale,
    EntropicStability,
    HighTemperature,
    HeatBath,
}

impl MethodName {
    fn key(self) -> &'static str {
        match self {
            MethodName::Multiscale => "multiscale",
            MethodName::EntropicStability => "entropic-stability",
            MethodName::HighTemperature => "high-temperature",
            MethodName::HeatBath => "heat-bath",
        }
    }
}

fn default_methods() -> Vec<MethodName> {
    vec![MethodName::Multiscale]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LsiParams {
    #[serde(default)]
    model: Option<ContinuousSpec>,
    #[serde(default)]
    schedule: Option<ScheduleSpec>,
    #[serde(default)]
    ising: Option<IsingSpec>,
    #[serde(default = "default_methods")]
    methods: Vec<MethodName>,
    #[serde(default)]
    profile: Option<ProfileSpec>,
    #[serde(default)]
    reparametrise: Option<Reparametrise>,
    #[serde(default)]
    mean_field: Option<MeanFieldCheck>,
    #[serde(default)]
    expect: Vec<Expectation>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Reparametrise {
    map: TimeMap,
    #[serde(default = "tol_1e8")]
    tol: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeanFieldCheck {
    d: f64,
    deltas: Vec<f64>,
    #[serde(default = "slope_tol")]
    tol: f64,
}

fn slope_tol() -> f64 {
    0.1
}

/// Turns a computed quantity into a check.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Expectation {
    quantity: String,
    relation: Relation,
    value: f64,
    #[serde(default)]
    tol: f64,
}

fn put_lsi(r: &mut Report, key: &str, rep: &LsiReport) {
    r.info(format!("{key}/inverse_gamma"), rep.inverse_gamma);
    r.record(key.to_string(), rep);
    if rep.divergent {
        r.record(format!("{key}/divergence"), json!({ "partial_integral": super::num(rep.partial), "tail": rep.tail, "status": "divergent" }));
    }
}

fn lsi_task(p: LsiParams, r: &mut Report) -> Result<()> {
    let opts = profile_options(&p.profile);
    let mut divergent = false;
    match (&p.model, &p.schedule, &p.ising) {
        (Some(m), Some(s), None) => {
            let (model, sched) = build_continuous(m, s)?;
            r.record("schedule", sched.describe());
            for &method in &p.methods {
                let key = method.key();
                match method {
                    MethodName::Multiscale => {
                        let (prof, rep) = lsi::continuous_lsi_bound(&model, &sched, &opts)?;
                        r.table("profile.csv", prof.to_csv());
                        r.record("multiscale/provenance", prof.provenance);
                        if let Some(d) = prof.halving_delta {
                            r.info("multiscale/halving_delta", d);
                        }
                        divergent |= rep.divergent;
                        put_lsi(r, key, &rep);
                        if let Some(rp) = &p.reparametrise {
                            let sched2 = sched.reparametrize(rp.map)?;
                            let (_, rep2) = lsi::continuous_lsi_bound(&model, &sched2, &opts)?;
                            r.record("reparametrised/map", rp.map);
                            r.info("reparametrised/inverse_gamma", rep2.inverse_gamma);
                            let rel = if rep.inverse_gamma.is_finite() {
                                (rep2.inverse_gamma - rep.inverse_gamma).abs() / rep.inverse_gamma.abs().max(1.0)
                            } else if rep2.inverse_gamma.is_infinite() {
                                0.0
                            } else {
                                f64::INFINITY
                            };
                            r.at_most("reparametrised/difference", rel, 0.0, rp.tol);
                        }
                    }
                    MethodName::EntropicStability => {
                        let (probes, _) = lsi::default_rate_setup(&model, &sched)?;
                        let (rep, prof) = lsi::entropic_stability_bound(&model, &sched, &probes)?;
                        r.table("stability.csv", csv(&["t", "alpha"], prof.times.iter().zip(&prof.alpha).map(|(t, a)| vec![*t, *a])));
                        put_lsi(r, key, &rep);
                    }
                    _ => return invalid(format!("method `{key}` applies to Ising models")),
                }
            }
        }
        (None, None, Some(spec)) => {
            let model = spec.build()?;
            if p.reparametrise.is_some() {
                return invalid("reparametrisation is checked on continuous models");
            }
            for &method in &p.methods {
                let key = method.key();
                let rep = match method {
                    MethodName::Multiscale => {
                        let (rep, prof) = lsi::ising_lsi_bound(&model, &opts)?;
                        if let Some(prof) = prof {
                            r.table("profile.csv", prof.to_csv());
                        }
                        rep
                    }
                    MethodName::EntropicStability => {
                        let (rep, prof) = lsi::ising_entropic_stability(&model)?;
                        r.table("stability.csv", csv(&["t", "alpha"], prof.times.iter().zip(&prof.alpha).map(|(t, a)| vec![*t, *a])));
                        rep
                    }
                    MethodName::HighTemperature => lsi::high_temperature_bound(model.beta),
                    MethodName::HeatBath => lsi::heatbath_mlsi_bound(&model, &opts)?,
                };
                divergent |= rep.divergent;
                put_lsi(r, key, &rep);
            }
        }
        (None, None, None) if p.mean_field.is_some() => {}
        _ => return invalid("give either `model` with `schedule`, or `ising`"),
    }
    r.record("divergent", divergent);
    if let Some(mf) = &p.mean_field {
        let fit = lsi::mean_field_scaling(mf.d, &mf.deltas, &opts)?;
        r.equal("mean_field/slope", fit.slope, fit.expected, mf.tol);
        r.table(
            "mean_field.csv",
            csv(&["delta", "integral"], fit.deltas.iter().zip(&fit.integrals).map(|(d, i)| vec![*d, *i])),
        );
    }
    for e in &p.expect {
        let Some(v) = r.value_of(&e.quantity) else {
            return Err(Error::Config { pointer: "/params/expect".into(), message: format!("no computed quantity named `{}`", e.quantity) });
        };
        r.compare(e.quantity.clone(), v, e.relation, e.value, e.tol);
    }
    Ok(())
}

// ---------------------------------------------------------------- sample

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleParams {
    model: ContinuousSpec,
    schedule: ScheduleSpec,
    #[serde(default)]
    ks: Option<KsCheck>,
    #[serde(default)]
    follmer: Option<FollmerCheck>,
    #[serde(default)]
    martingale: Option<MartingaleCheck>,
    #[serde(default)]
    boue_dupuis: Option<BoueDupuisCheck>,
    #[serde(default)]
    step_refinement: Option<StepRefinement>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KsCheck {
    count: usize,
    steps: usize,
    #[serde(default = "cells_default")]
    cells: usize,
    #[serde(default = "ks_tol")]
    tol: f64,
}

fn cells_default() -> usize {
    20000
}

fn ks_tol() -> f64 {
    0.02
}

fn sigmas_default() -> f64 {
    3.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FollmerCheck {
    count: usize,
    steps: usize,
    /// Added to `sigmas` standard errors for time-discretisation bias.
    allowance: f64,
    #[serde(default = "sigmas_default")]
    sigmas: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MartingaleCheck {
    count: usize,
    steps: usize,
    record_every: usize,
    #[serde(default = "confidence_default")]
    confidence: f64,
}

fn confidence_default() -> f64 {
    0.95
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoueDupuisCheck {
    scales: Vec<f64>,
    count: usize,
    steps: usize,
    #[serde(default)]
    phi: f64,
    allowance: f64,
    #[serde(default = "sigmas_default")]
    sigmas: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRefinement {
    count: usize,
    steps: Vec<usize>,
    t_min: f64,
}

fn z_for(confidence: f64) -> Result<f64> {
    use statrs::distribution::{ContinuousCDF, Normal};
    if !(confidence > 0.0 && confidence < 1.0) {
        return invalid("confidence must lie in (0, 1)");
    }
    let n = Normal::new(0.0, 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(n.inverse_cdf(0.5 + 0.5 * confidence))
}

fn sample(p: SampleParams, seed: u64, r: &mut Report) -> Result<()> {
    let (model, sched) = build_continuous(&p.model, &p.schedule)?;
    if model.dim() != 1 {
        return Err(Error::Unsupported("sampling experiments are single-site".into()));
    }
    let t_start = if sched.is_infinite() { sched.truncation() } else { sched.end() };
    r.info("start_time", t_start);
    if let Some(k) = &p.ks {
        let loc = stochastic::localization_sample(&model, &sched, k.count, k.steps, seed)?;
        let grid = renorm_measure_grid(&model, &sched, 0.0, k.cells)?;
        let reference = grid.sample(k.count, seed.wrapping_add(1));
        let d2 = ks_two_sample(&loc.samples, &reference);
        let d1 = ks_one_sample(&loc.samples, |x| grid.cdf(x));
        r.info("ks/one_sample", d1);
        r.at_most("ks/distance", d2, k.tol, 0.0);
        let (m, v) = grid.moments();
        let ms = stats::mean_stderr(&loc.samples);
        r.info("ks/mean", ms.mean);
        r.info("ks/target_mean", m);
        r.info("ks/target_variance", v);
        r.info("ks/variance", stats::variance(&loc.samples));
    }
    if let Some(f) = &p.follmer {
        let cfg = SdeConfig { steps: f.steps, count: f.count, seed, ..Default::default() };
        let rep = stochastic::follmer_cost(&model, &sched, &cfg)?;
        let tol = f.sigmas * rep.cost.stderr + f.allowance;
        r.equal("follmer/cost", rep.cost.mean, rep.reference, tol);
        r.info("follmer/stderr", rep.cost.stderr);
        r.info("follmer/step", rep.step);
    }
    if let Some(m) = &p.martingale {
        let z = z_for(m.confidence)?;
        let source = DriftSource::for_model(&model)?;
        let start = stochastic::initial_states(&sched, m.count, seed)?;
        let cfg = SdeConfig { steps: m.steps, count: m.count, seed, record_every: m.record_every, ..Default::default() };
        let e = stochastic::run_ensemble(&source, &sched, start, &cfg)?;
        let rep = stochastic::martingale_diagnostics(&e, z)?;
        let ratio = |s: stats::MeanErr| if s.stderr > 0.0 { s.mean.abs() / s.stderr } else { 0.0 };
        r.at_most("martingale/gradient_slope_z", ratio(rep.grad_slope), z, 0.0);
        r.at_most("martingale/value_slope_z", ratio(rep.value_slope), z, 0.0);
        r.info("martingale/gradient_slope", rep.grad_slope.mean);
        r.info("martingale/gradient_slope_stderr", rep.grad_slope.stderr);
        r.table(
            "martingale.csv",
            csv(&["t", "gradient_mean", "value_mean"], (0..rep.times.len()).map(|i| vec![rep.times[i], rep.grad_means[i], rep.value_means[i]])),
        );
    }
    if let Some(b) = &p.boue_dupuis {
        let target = renorm_potential(&model, &sched, t_start, &[b.phi], Backend::Quadrature { order: None })?.value;
        r.info("boue_dupuis/target", target);
        let mut rows = vec![];
        for &s in &b.scales {
            let cfg = SdeConfig { steps: b.steps, count: b.count, seed, drift_scale: s, ..Default::default() };
            let v = stochastic::boue_dupuis_eval(&model, &sched, t_start, b.phi, &cfg)?.value;
            let tol = b.sigmas * v.stderr + b.allowance;
            if s == 1.0 {
                r.equal("boue_dupuis/optimal", v.mean, target, tol);
            } else {
                r.at_least(format!("boue_dupuis/scale{s}"), v.mean, target, tol);
            }
            rows.push(vec![s, v.mean, v.stderr]);
        }
        r.table("boue_dupuis.csv", csv(&["scale", "value", "stderr"], rows));
    }
    if let Some(s) = &p.step_refinement {
        let source = DriftSource::for_model(&model)?;
        let mut res = vec![];
        for &n in &s.steps {
            let v = stochastic::localization_view(&source, &sched, s.count, n, seed, s.t_min)?;
            res.push(v.accumulated_residual);
        }
        r.holds("step_refinement/decreasing", res.windows(2).all(|w| w[1] < w[0]));
        r.table("step_refinement.csv", csv(&["steps", "residual"], s.steps.iter().zip(&res).map(|(n, v)| vec![*n as f64, *v])));
    }
    Ok(())
}

// ---------------------------------------------------------------- ising

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IsingParams {
    #[serde(default)]
    model: Option<IsingSpec>,
    #[serde(default = "tol_1e10")]
    gap_tol: f64,
    /// Random F checked against Ent ≤ (2/γ)·D(√F) on `model`.
    #[serde(default)]
    entropy_trials: usize,
    #[serde(default)]
    heat_bath_trials: Option<usize>,
    #[serde(default)]
    rings: Option<RingSweep>,
    #[serde(default)]
    high_temperature: Option<HighTemperatureCheck>,
    #[serde(default)]
    domination: Option<DominationParams>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RingSweep {
    sizes: Vec<usize>,
    betas: Vec<f64>,
    #[serde(default = "tol_1e10")]
    tol: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HighTemperatureCheck {
    beta: f64,
    expected: f64,
    #[serde(default = "three")]
    sites: usize,
    #[serde(default = "two_hundred")]
    trials: usize,
    #[serde(default = "tol_1e12")]
    tol: f64,
}

fn three() -> usize {
    3
}

fn two_hundred() -> usize {
    200
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DominationParams {
    models: usize,
    fields: usize,
    max_sites: usize,
    #[serde(default = "tol_1e12")]
    tol: f64,
}

fn ising(p: IsingParams, seed: u64, r: &mut Report) -> Result<()> {
    let opts = ProfileOptions::default();
    if let Some(spec) = &p.model {
        let model = spec.build()?;
        let (rep, _) = lsi::ising_lsi_bound(&model, &opts)?;
        put_lsi(r, "bound", &rep);
        let gamma = 1.0 / rep.inverse_gamma;
        let gap = lsi::glauber_gap(&model)?;
        r.info("bound/gamma", gamma);
        r.at_least("bound/gap_dominates", gap, gamma, p.gap_tol);
        if p.entropy_trials > 0 {
            let sweep = lsi::check_entropy_inequality(&model, 2.0 * rep.inverse_gamma, p.entropy_trials, seed)?;
            r.at_least("bound/entropy_min_slack", sweep.min_slack, 0.0, 1e-12);
        }
        if let Some(trials) = p.heat_bath_trials {
            let hb = lsi::heatbath_mlsi_bound(&model, &opts)?;
            put_lsi(r, "heat_bath", &hb);
            let sweep = lsi::check_heatbath_inequality(&model, hb.inverse_gamma, trials, seed)?;
            r.at_least("heat_bath/min_slack", sweep.min_slack, 0.0, 1e-12);
        }
    }
    if let Some(s) = &p.rings {
        let mut rows = vec![];
        for &n in &s.sizes {
            for &b in &s.betas {
                let model = IsingModel::ring(n, b)?;
                let (rep, _) = lsi::ising_lsi_bound(&model, &opts)?;
                let gamma = 1.0 / rep.inverse_gamma;
                let gap = lsi::glauber_gap(&model)?;
                r.at_least(format!("rings/n{n}/beta{b}"), gap, gamma, s.tol);
                rows.push(vec![n as f64, b, gamma, gap]);
            }
        }
        r.table("rings.csv", csv(&["sites", "beta", "gamma", "gap"], rows));
    }
    if let Some(h) = &p.high_temperature {
        let c = lsi::high_temperature_constant(h.beta);
        r.equal("high_temperature/constant", c, h.expected, h.tol);
        let model = IsingModel::ring(h.sites, h.beta)?;
        let sweep = lsi::check_entropy_inequality(&model, c, h.trials, seed)?;
        r.at_least("high_temperature/min_slack", sweep.min_slack, 0.0, 1e-12);
        r.info("high_temperature/trials", sweep.trials as f64);
    }
    if let Some(d) = &p.domination {
        let c = covariance_domination(d.models, d.fields, d.max_sites, seed)?;
        r.at_least("domination/min_slack", c.min_slack, 0.0, d.tol);
        r.record("domination", c);
    }
    Ok(())
}

// ---------------------------------------------------------------- cw

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CwParams {
    #[serde(default)]
    options: Option<HopfLaxOptions>,
    #[serde(default)]
    convergence: Option<ConvergenceCheck>,
    #[serde(default)]
    hj_residual: Option<ResidualCheck>,
    #[serde(default)]
    reduced: Option<ReducedCheckParams>,
    #[serde(default)]
    magnetisation: Option<MagnetisationCheck>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvergenceCheck {
    beta: f64,
    #[serde(default)]
    field: f64,
    sizes: Vec<u64>,
    min_exponent: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResidualCheck {
    spins: u64,
    betas: Vec<f64>,
    fields: Range,
    step: f64,
    #[serde(default = "tol_1e6")]
    tol: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReducedCheckParams {
    alpha: f64,
    t: f64,
    phis: Range,
    sizes: Vec<u64>,
    #[serde(default = "tol_1e10")]
    identity_tol: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MagnetisationCheck {
    betas: Vec<f64>,
    sizes: Vec<u64>,
    fields: Range,
    /// Smallest sup gap counted as non-vanishing in the ordered phase.
    #[serde(default = "gap_floor")]
    floor: f64,
}

fn gap_floor() -> f64 {
    0.25
}

fn cw(p: CwParams, r: &mut Report) -> Result<()> {
    let opts = p.options.clone().unwrap_or_default();
    if let Some(c) = &p.convergence {
        let fit = hj::free_energy_convergence(c.beta, c.field, &c.sizes)?;
        r.info("convergence/limit", fit.limit);
        r.at_least("convergence/exponent", fit.exponent, c.min_exponent, 0.0);
        r.table("convergence.csv", csv(&["spins", "error"], fit.sizes.iter().zip(&fit.errors).map(|(n, e)| vec![*n as f64, *e])));
    }
    if let Some(c) = &p.hj_residual {
        let res = hj::discrete_hj_residual(c.spins, &c.betas, &c.fields.points(), c.step)?;
        r.at_most("hj_residual/max", res.max_residual, 0.0, c.tol);
        r.info("hj_residual/points", res.points as f64);
    }
    if let Some(c) = &p.reduced {
        let phis = c.phis.points();
        let conv = hj::reduced_convergence(c.alpha, c.t, &phis, &c.sizes, &opts)?;
        r.holds("reduced/decreasing", conv.decreasing);
        r.table("reduced.csv", csv(&["spins", "sup_distance"], conv.sizes.iter().zip(&conv.sup_distance).map(|(n, d)| vec![*n as f64, *d])));
        let mut spins: Vec<Spins> = c.sizes.iter().map(|&n| Spins::Finite(n)).collect();
        spins.push(Spins::Infinite);
        for s in spins {
            let g = hj::cw_reduced_polchinski(s, c.alpha, c.t, &phis, &opts)?;
            let chk = hj::reduced_free_energy_check(&g)?;
            let tag = match s {
                Spins::Finite(n) => format!("n{n}"),
                Spins::Infinite => "limit".into(),
            };
            r.at_most(format!("reduced/identity/{tag}"), chk.max_error, 0.0, c.identity_tol);
            r.info(format!("reduced/offset/{tag}"), chk.offset);
        }
    }
    if let Some(c) = &p.magnetisation {
        let fields = c.fields.points();
        let mut rows = vec![];
        for &b in &c.betas {
            let g = hj::magnetisation_gap(b, &c.sizes, &fields, &opts)?;
            r.holds(format!("magnetisation/beta{b}/shock_iff_ordered"), g.shock == (b > 1.0));
            if b > 1.0 {
                let lo = g.sup_gap.iter().cloned().fold(f64::INFINITY, f64::min);
                r.at_least(format!("magnetisation/beta{b}/gap_persists"), lo, c.floor, 0.0);
            } else {
                r.holds(format!("magnetisation/beta{b}/gap_vanishes"), g.sup_gap.windows(2).all(|w| w[1] < w[0]));
            }
            for (n, s) in g.sizes.iter().zip(&g.sup_gap) {
                rows.push(vec![b, *n as f64, *s]);
            }
        }
        r.table("magnetisation.csv", csv(&["beta", "spins", "sup_gap"], rows));
    }
    Ok(())
}

// ---------------------------------------------------------------- hj

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HjParams {
    potential: Potential,
    #[serde(default = "unit")]
    weight: f64,
    #[serde(default)]
    options: Option<HopfLaxOptions>,
    #[serde(default)]
    values: Option<EvaluateGrid>,
    #[serde(default)]
    characteristics: Option<CharacteristicCheck>,
    #[serde(default)]
    viscosity: Option<ViscosityCheck>,
    #[serde(default)]
    semigroup: Option<SemigroupCheck>,
    #[serde(default)]
    variational: Option<VariationalCheck>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CharacteristicCheck {
    t: f64,
    phis: Vec<f64>,
    #[serde(default = "tol_1e6")]
    tol: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ViscosityCheck {
    t: f64,
    viscosities: Vec<f64>,
    phis: Range,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SemigroupCheck {
    s: f64,
    t: f64,
    phis: Vec<f64>,
    #[serde(default = "tol_1e8")]
    tol: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VariationalCheck {
    t: f64,
    phi: f64,
    trials: usize,
    #[serde(default = "tol_1e8")]
    tol: f64,
}

fn hj_task(p: HjParams, seed: u64, r: &mut Report) -> Result<()> {
    p.potential.check_bounded_below(12.0, 2401)?;
    let opts = p.options.clone().unwrap_or_default();
    let v0 = hj::potential_initial(&p.potential, p.weight);
    if let Some(g) = &p.values {
        let phis = g.phis.points();
        let mut rows = vec![];
        let mut shocks = vec![];
        for &t in &g.times {
            for h in hj::hopf_lax_grid(&v0, t, &phis, &opts)? {
                if h.shock {
                    shocks.push(json!({ "t": t, "phi": h.phi, "minimisers": h.minimisers }));
                }
                rows.push(vec![t, h.phi, h.value, h.minimisers.len() as f64]);
            }
        }
        r.info("values/shock_points", shocks.len() as f64);
        r.record("shocks", shocks);
        r.table("hopf_lax.csv", csv(&["t", "phi", "value", "minimisers"], rows));
    }
    if let Some(c) = &p.characteristics {
        let mut worst = 0.0f64;
        let mut end_err = 0.0f64;
        for &x in &c.phis {
            let ch = hj::characteristics(&v0, c.t, x, &opts)?;
            worst = worst.max(ch.conservation_residual);
            if ch.shock_at.is_none() {
                let h = hj::hopf_lax(&v0, c.t, x, &opts)?;
                end_err = end_err.max((ch.path.last().unwrap() - h.minimisers[0]).abs());
            }
        }
        r.at_most("characteristics/conservation", worst, 0.0, c.tol);
        r.at_most("characteristics/endpoint", end_err, 0.0, c.tol);
    }
    if let Some(c) = &p.viscosity {
        let st = hj::zero_viscosity_study(&v0, c.t, &c.phis.points(), &c.viscosities, &opts)?;
        r.holds("viscosity/decreasing", st.decreasing);
        r.table("viscosity.csv", csv(&["viscosity", "sup_distance"], st.viscosities.iter().zip(&st.sup_distance).map(|(e, d)| vec![*e, *d])));
    }
    if let Some(c) = &p.semigroup {
        let inner_opts = HopfLaxOptions { scan_points: 1001, ..opts.clone() };
        let vs = |z: f64| match hj::hopf_lax(&v0, c.s, z, &inner_opts) {
            Ok(h) => (h.value, h.gradient(&v0)),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let outer = HopfLaxOptions { scan_points: 801, ..opts.clone() };
        let mut worst = 0.0f64;
        for &x in &c.phis {
            let composed = hj::hopf_lax(&vs, c.t, x, &outer)?.value;
            let direct = hj::hopf_lax(&v0, c.s + c.t, x, &opts)?.value;
            worst = worst.max((composed - direct).abs());
        }
        r.at_most("semigroup/difference", worst, 0.0, c.tol);
    }
    if let Some(c) = &p.variational {
        let h = hj::hopf_lax(&v0, c.t, c.phi, &opts)?;
        let star = (c.phi - h.minimisers[0]) / c.t;
        let opt = hj::classical_variational(&v0, c.t, c.phi, |_| star)?;
        r.equal("variational/optimal", opt, h.value, c.tol);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lowest = f64::INFINITY;
        for _ in 0..c.trials {
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = c.t;
            let cost = hj::classical_variational(&v0, t, c.phi, |s| {
                star + a[0] + (1..4).map(|k| a[k] * (k as f64 * std::f64::consts::PI * s / t).sin()).sum::<f64>()
            })?;
            lowest = lowest.min(cost);
        }
        r.at_least("variational/random_drifts", lowest, h.value, c.tol);
    }
    Ok(())
}

// ---------------------------------------------------------------- transport

#[derive(Deserialize)]
#[serde(untagged)]
enum BasePoints {
    Points(Vec<Vec<f64>>),
    Range(Range),
}

impl BasePoints {
    fn points(&self) -> Vec<Vec<f64>> {
        match self {
            BasePoints::Points(p) => p.clone(),
            BasePoints::Range(r) => r.points().into_iter().map(|x| vec![x]).collect(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TransportParams {
    model: ContinuousSpec,
    schedule: ScheduleSpec,
    base: BasePoints,
    times: Vec<f64>,
    #[serde(default)]
    probes: Vec<Vec<f64>>,
    #[serde(default = "tol_1e6")]
    slack_tol: f64,
    /// When set, the bound must be saturated to this tolerance.
    #[serde(default)]
    saturation_tol: Option<f64>,
    #[serde(default)]
    ode_tol: Option<f64>,
    #[serde(default)]
    scaling_identity: Option<ScalingIdentity>,
    #[serde(default)]
    pushforward: Option<PushforwardParams>,
    #[serde(default)]
    inverse: Option<InverseCheck>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalingIdentity {
    /// Coupling for the check; defaults to the model's.
    #[serde(default)]
    coupling: Option<CouplingSpec>,
    times: Vec<f64>,
    #[serde(default = "tol_1e12")]
    tol: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PushforwardParams {
    times: Vec<f64>,
    samples: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InverseCheck {
    t: f64,
    #[serde(default = "tol_1e8")]
    tol: f64,
}

/// λ_t = ∫₀ᵗ λ̇ by composite Gauss–Legendre between consecutive times.
fn integrated_lambda(rate: &(dyn Fn(f64) -> Result<f64> + Sync), times: &[f64]) -> Result<Vec<f64>> {
    let rule = gauss_legendre(8);
    let panels = 8;
    let mut out = vec![];
    let (mut prev, mut acc) = (0.0, 0.0);
    for &t in times {
        let w = (t - prev) / panels as f64;
        let nodes: Vec<(f64, f64)> = (0..panels)
            .flat_map(|k| {
                let mid = prev + w * (k as f64 + 0.5);
                rule.nodes.iter().zip(&rule.weights).map(move |(x, wt)| (mid + 0.5 * w * x, 0.5 * w * wt)).collect::<Vec<_>>()
            })
            .collect();
        let vals: Vec<f64> = nodes.par_iter().map(|(s, wt)| rate(*s).map(|v| v * wt)).collect::<Result<_>>()?;
        acc += vals.iter().sum::<f64>();
        out.push(acc);
        prev = t;
    }
    Ok(out)
}

const TRANSPORT_ORDER: usize = 160;

fn transport_task(p: TransportParams, seed: u64, r: &mut Report) -> Result<()> {
    let (model, sched) = build_continuous(&p.model, &p.schedule)?;
    let base = p.base.points();
    if base.is_empty() || base.iter().any(|b| b.len() != model.dim()) {
        return invalid("base points must be non-empty with the model's dimension");
    }
    let mut times = p.times.clone();
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return invalid("transport times must be increasing and non-negative");
    }
    times.retain(|&t| t > 0.0);
    let mut opts = TransportOptions { backend: Backend::Quadrature { order: Some(TRANSPORT_ORDER) }, ..Default::default() };
    if let Some(t) = p.ode_tol {
        opts.tol = t;
    }
    let states = transport::transport_flow(&model, &sched, &base, &times, &opts)?;
    let (probes, backend) = lsi::default_rate_setup(&model, &sched)?;
    let rate = lsi::criterion_rate(&model, &sched, &probes, backend);
    let lambda = integrated_lambda(&rate, &times)?;
    let lookup = |t: f64| times.iter().position(|&s| s == t).map(|i| lambda[i]).unwrap_or(0.0);
    let mon = transport::lipschitz_monitor(&states, lookup, &p.probes, p.slack_tol)?;
    let min_slack = mon.min_slack.iter().cloned().fold(f64::INFINITY, f64::min);
    r.at_least("monitor/min_slack", min_slack, 0.0, p.slack_tol);
    let sat = mon.saturation_gap.iter().cloned().fold(0.0, f64::max);
    match p.saturation_tol {
        Some(tol) => {
            r.at_most("monitor/saturation_gap", sat, 0.0, tol);
        }
        None => r.info("monitor/saturation_gap", sat),
    }
    r.record(
        "monitor/provenance",
        if model.potential.quadratic_curvature().is_some() { "analytic-formula" } else { "observed-minimum" },
    );
    r.record("monitor/worst", &mon.worst);
    r.table(
        "monitor.csv",
        csv(
            &["t", "lambda", "min_slack", "saturation_gap", "inverse_bound"],
            (0..mon.times.len()).map(|i| vec![mon.times[i], mon.lambda[i], mon.min_slack[i], mon.saturation_gap[i], mon.inverse_bound[i]]),
        ),
    );
    if model.dim() == 1 {
        r.table("flow.csv", transport::flow_to_csv(&states, &base));
    }
    if let Some(s) = &p.scaling_identity {
        let sched_s = match &s.coupling {
            Some(c) => Schedule::pauli_villars(c.build()?, sched.truncation().max(*s.times.last().unwrap_or(&1.0)))?,
            None => sched.clone(),
        };
        let mut worst = 0.0f64;
        for &t in &s.times {
            let d = transport::scaling_matrix(&sched_s, t)?;
            let cdot = sched_s.eval_dense(t)?.cdot;
            let expected = Eigen::of(&cdot)?.apply_fn(|v| v.powf(-0.25));
            worst = worst.max(max_abs_diff(&d, &expected));
        }
        r.at_most("scaling/identity", worst, 0.0, s.tol);
    }
    if let Some(pf) = &p.pushforward {
        let checks = transport::pushforward_check(&model, &sched, &pf.times, pf.samples, seed, &opts)?;
        for c in &checks {
            r.holds(format!("pushforward/t{}", c.t), c.passed);
        }
        r.record("pushforward", checks);
    }
    if let Some(c) = &p.inverse {
        let mut worst = 0.0f64;
        for b in &base {
            let (s, _) = transport::transport_map(&model, &sched, c.t, b, &opts)?;
            let guess: Vec<f64> = b.iter().map(|x| 0.9 * x).collect();
            let inv = transport::transport_inverse(&model, &sched, c.t, s.as_slice(), &guess, &opts)?;
            worst = worst.max(inv.point.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        }
        r.at_most("inverse/roundtrip", worst, 0.0, c.tol);
    }
    Ok(())
}
