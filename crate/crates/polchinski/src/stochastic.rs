//! Backward characteristic SDE, stochastic localisation, Föllmer cost and martingale diagnostics.

use nalgebra::DVector;
use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::Schedule;
use crate::linalg;
use crate::model::ContinuousModel;
use crate::quadrature::integrate;
use crate::renorm::{tilt_with, Backend, GaussianNodes};
use crate::stats::{self, MeanErr};

pub const TABLE_POINTS: usize = 601;
pub const TABLE_RADIUS: f64 = 6.0;
pub const TABLE_ORDER: usize = 40;
pub const MIN_STEPS: usize = 100;

/// Where ∇V_t comes from along the path (single-site models).
#[derive(Clone, Debug)]
pub enum DriftSource {
    Zero,
    /// V₀ = ½mφ²: V_t = φ²/(2(1/m + c_t)) + ½ log(1 + m c_t).
    Gaussian { m: f64 },
    /// Gauss–Hermite table of (V_t, V_t′, V_t″) rebuilt at every step.
    Quadrature { model: ContinuousModel },
}

impl DriftSource {
    pub fn for_model(model: &ContinuousModel) -> Result<DriftSource> {
        if model.dim() != 1 {
            return Err(Error::Unsupported("ensemble drifts are implemented for single-site models".into()));
        }
        Ok(if model.potential.is_zero() {
            DriftSource::Zero
        } else if let Some(m) = model.potential.quadratic_curvature() {
            DriftSource::Gaussian { m: m * model.weight }
        } else {
            DriftSource::Quadrature { model: model.clone() }
        })
    }

    fn slice(&self, sched: &Schedule, t: f64) -> Result<Slice> {
        Ok(match self {
            DriftSource::Zero => Slice::Zero,
            DriftSource::Gaussian { m } => {
                let c = sched.mode(sched.coupling.eigen.values[0], t).0;
                Slice::Quadratic { k: m / (1.0 + m * c), offset: 0.5 * (m * c).ln_1p() }
            }
            DriftSource::Quadrature { model } => Slice::Table(FastTable::build(model, sched, t)?),
        })
    }
}

enum Slice {
    Zero,
    Quadratic { k: f64, offset: f64 },
    Table(FastTable),
}

impl Slice {
    #[inline]
    fn grad(&self, x: f64) -> f64 {
        match self {
            Slice::Zero => 0.0,
            Slice::Quadratic { k, .. } => k * x,
            Slice::Table(t) => t.grad(x),
        }
    }

    #[inline]
    fn value(&self, x: f64) -> f64 {
        match self {
            Slice::Zero => 0.0,
            Slice::Quadratic { k, offset } => 0.5 * k * x * x + offset,
            Slice::Table(t) => t.value(x),
        }
    }
}

/// (V, V′, V″) on a uniform grid with cubic Hermite interpolation of V and V′.
struct FastTable {
    lo: f64,
    step: f64,
    v: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl FastTable {
    fn build(model: &ContinuousModel, sched: &Schedule, t: f64) -> Result<FastTable> {
        let c = sched.eval(t)?.c;
        let rule = GaussianNodes::quadrature(&c, TABLE_ORDER)?;
        let w0 = model.weight;
        let step = 2.0 * TABLE_RADIUS / (TABLE_POINTS - 1) as f64;
        let lo = -TABLE_RADIUS;
        let mut tab = FastTable { lo, step, v: vec![0.0; TABLE_POINTS], d1: vec![0.0; TABLE_POINTS], d2: vec![0.0; TABLE_POINTS] };
        let mut buf = vec![(0.0, 0.0, 0.0); rule.len()];
        for i in 0..TABLE_POINTS {
            let x = lo + step * i as f64;
            let mut shift = f64::NEG_INFINITY;
            for (j, z) in rule.points.iter().enumerate() {
                let (v, g, h) = model.potential.eval(x + z);
                buf[j] = (-w0 * v, w0 * g, w0 * h);
                shift = shift.max(-w0 * v);
            }
            let (mut z, mut m1, mut m2, mut mh) = (0.0, 0.0, 0.0, 0.0);
            for (j, w) in rule.probs.iter().enumerate() {
                let p = w * (buf[j].0 - shift).exp();
                z += p;
                m1 += p * buf[j].1;
                m2 += p * buf[j].1 * buf[j].1;
                mh += p * buf[j].2;
            }
            if !(z > 0.0) || !z.is_finite() {
                return Err(Error::Numerical(format!("drift table degenerate at x={x}, t={t}")));
            }
            let (m1, m2, mh) = (m1 / z, m2 / z, mh / z);
            tab.v[i] = -(shift + z.ln());
            tab.d1[i] = m1;
            tab.d2[i] = mh - (m2 - m1 * m1);
        }
        Ok(tab)
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let u = (x - self.lo) / self.step;
        let i = (u.floor().max(0.0) as usize).min(TABLE_POINTS - 2);
        (i, u - i as f64)
    }

    #[inline]
    fn grad(&self, x: f64) -> f64 {
        let hi = self.lo + self.step * (TABLE_POINTS - 1) as f64;
        if x <= self.lo {
            return self.d1[0] + self.d2[0] * (x - self.lo);
        }
        if x >= hi {
            return self.d1[TABLE_POINTS - 1] + self.d2[TABLE_POINTS - 1] * (x - hi);
        }
        let (i, s) = self.locate(x);
        hermite(self.d1[i], self.d1[i + 1], self.d2[i] * self.step, self.d2[i + 1] * self.step, s)
    }

    #[inline]
    fn value(&self, x: f64) -> f64 {
        let hi = self.lo + self.step * (TABLE_POINTS - 1) as f64;
        let n = TABLE_POINTS - 1;
        if x <= self.lo {
            let d = x - self.lo;
            return self.v[0] + self.d1[0] * d + 0.5 * self.d2[0] * d * d;
        }
        if x >= hi {
            let d = x - hi;
            return self.v[n] + self.d1[n] * d + 0.5 * self.d2[n] * d * d;
        }
        let (i, s) = self.locate(x);
        hermite(self.v[i], self.v[i + 1], self.d1[i] * self.step, self.d1[i + 1] * self.step, s)
    }
}

#[inline]
fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
#[serde(tag = "grid", rename_all = "kebab-case")]
pub enum TimeGrid {
    Uniform,
    /// Geometric spacing clustered at 0; first step relative to the start time.
    Geometric { first: f64 },
}

impl TimeGrid {
    /// Decreasing times t_start = τ₀ > τ₁ > … > τ_steps = 0.
    pub fn times(&self, t_start: f64, steps: usize) -> Vec<f64> {
        let mut up: Vec<f64> = match *self {
            TimeGrid::Uniform => (0..=steps).map(|k| t_start * k as f64 / steps as f64).collect(),
            TimeGrid::Geometric { first } => {
                let a = first * t_start;
                let mut v = vec![0.0];
                let r = (t_start / a).powf(1.0 / (steps - 1) as f64);
                for k in 0..steps {
                    v.push(a * r.powi(k as i32));
                }
                *v.last_mut().unwrap() = t_start;
                v
            }
        };
        up.reverse();
        up
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SdeConfig {
    pub steps: usize,
    pub count: usize,
    pub seed: u64,
    pub grid: TimeGrid,
    /// Record every k-th step (0: only the endpoints).
    pub record_every: usize,
    /// Drift used is `drift_scale · ∇V_t`.
    pub drift_scale: f64,
}

impl Default for SdeConfig {
    fn default() -> Self {
        SdeConfig { steps: 1000, count: 1000, seed: 0, grid: TimeGrid::Uniform, record_every: 0, drift_scale: 1.0 }
    }
}

/// Lockstep ensemble of backward trajectories for a single-site model.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub times: Vec<f64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    /// Γ₀ = Σ √(ċΔ) ξ per trajectory.
    pub gaussian: Vec<f64>,
    /// ½ Σ ċ U² Δ per trajectory.
    pub cost: Vec<f64>,
    pub recorded_times: Vec<f64>,
    /// `count × recorded` row-major: states, ∇V and V + accumulated cost at recorded times.
    pub rec_state: Vec<f64>,
    pub rec_grad: Vec<f64>,
    pub rec_value: Vec<f64>,
    pub seed: u64,
}

impl Ensemble {
    pub fn recorded(&self) -> usize {
        self.recorded_times.len()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

const NOISE_BLOCK: usize = 4096;

/// Standard normals for one time step; block b of step k uses stream (k << 24) + b.
fn fill_normals(z: &mut [f64], seed: u64, step: usize) {
    z.par_chunks_mut(NOISE_BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut rng = stream_rng(seed, ((step as u64) << 24) + b as u64);
        for v in chunk {
            *v = rng.sample(StandardNormal);
        }
    });
}

/// Runs `count` trajectories from the given start states at time `times[0]` down to 0.
pub fn run_ensemble(source: &DriftSource, sched: &Schedule, start: Vec<f64>, cfg: &SdeConfig) -> Result<Ensemble> {
    if cfg.steps < MIN_STEPS {
        return invalid(format!("backward SDE needs at least {MIN_STEPS} steps"));
    }
    if sched.dim() != 1 {
        return Err(Error::Unsupported("ensemble SDE needs a single-site schedule".into()));
    }
    let t_start = if sched.is_infinite() { sched.truncation() } else { sched.end() };
    let times = cfg.grid.times(t_start, cfg.steps);
    let a = sched.coupling.eigen.values[0];
    let count = start.len();
    let mut x = start.clone();
    let mut gauss = vec![0.0; count];
    let mut cost = vec![0.0; count];
    let mut noise = vec![0.0; count];
    let mut recorded_times = vec![];
    let record = |k: usize| cfg.record_every > 0 && (k % cfg.record_every == 0 || k == cfg.steps);
    let mut snapshots: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = vec![];
    let mut slice = source.slice(sched, times[0])?;
    for k in 0..cfg.steps {
        let (t, t_next) = (times[k], times[k + 1]);
        let dt = t - t_next;
        let cd = sched.mode(a, t).1;
        let amp = (cd * dt).sqrt();
        let scale = cfg.drift_scale;
        if record(k) {
            recorded_times.push(t);
            let g: Vec<f64> = x.iter().map(|&v| slice.grad(v)).collect();
            let val: Vec<f64> = x.iter().zip(&cost).map(|(&v, c)| slice.value(v) + c).collect();
            snapshots.push((x.clone(), g, val));
        }
        let sl = &slice;
        fill_normals(&mut noise, cfg.seed, k);
        x.par_iter_mut()
            .zip(gauss.par_iter_mut())
            .zip(cost.par_iter_mut())
            .zip(noise.par_iter())
            .for_each(|(((xi, gi), ci), &z)| {
                let u = scale * sl.grad(*xi);
                *ci += 0.5 * cd * u * u * dt;
                *gi += amp * z;
                *xi += -cd * u * dt + amp * z;
            });
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable(format!("trajectory state not finite at t={t_next}")));
        }
        slice = if t_next > 0.0 || !matches!(source, DriftSource::Quadrature { .. }) {
            source.slice(sched, t_next)?
        } else {
            Slice::Zero
        };
    }
    if record(cfg.steps) {
        recorded_times.push(0.0);
        let DriftSource::Quadrature { model } = source else {
            let g: Vec<f64> = x.iter().map(|&v| slice.grad(v)).collect();
            let val: Vec<f64> = x.iter().zip(&cost).map(|(&v, c)| slice.value(v) + c).collect();
            snapshots.push((x.clone(), g, val));
            return finish(times, start, x, gauss, cost, recorded_times, snapshots, cfg.seed);
        };
        let g: Vec<f64> = x.iter().map(|&v| model.weight * model.potential.d1(v)).collect();
        let val: Vec<f64> = x.iter().zip(&cost).map(|(&v, c)| model.weight * model.potential.value(v) + c).collect();
        snapshots.push((x.clone(), g, val));
    }
    finish(times, start, x, gauss, cost, recorded_times, snapshots, cfg.seed)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    times: Vec<f64>,
    start: Vec<f64>,
    end: Vec<f64>,
    gaussian: Vec<f64>,
    cost: Vec<f64>,
    recorded_times: Vec<f64>,
    snapshots: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    seed: u64,
) -> Result<Ensemble> {
    let count = end.len();
    let r = snapshots.len();
    let mut rec_state = vec![0.0; count * r];
    let mut rec_grad = vec![0.0; count * r];
    let mut rec_value = vec![0.0; count * r];
    for (j, (s, g, v)) in snapshots.into_iter().enumerate() {
        for i in 0..count {
            rec_state[i * r + j] = s[i];
            rec_grad[i * r + j] = g[i];
            rec_value[i * r + j] = v[i];
        }
    }
    Ok(Ensemble { times, start, end, gaussian, cost, recorded_times, rec_state, rec_grad, rec_value, seed })
}

/// Start states: φ_T = 0 on a finite horizon, N(0, C_∞ − C_T) at the truncation time otherwise.
pub fn initial_states(sched: &Schedule, count: usize, seed: u64) -> Result<Vec<f64>> {
    if !sched.is_infinite() {
        return Ok(vec![0.0; count]);
    }
    let a = sched.coupling.eigen.values[0];
    let k = sched.c_inf_modes()[0] - sched.mode(a, sched.truncation()).0;
    let mut rng = stream_rng(seed ^ 0x5eed, u64::MAX);
    Ok((0..count).map(|_| k.max(0.0).sqrt() * rng.sample::<f64, _>(StandardNormal)).collect())
}

#[derive(Clone, Debug)]
pub struct LocalizationSamples {
    pub samples: Vec<f64>,
    /// Coupled Gaussian reference field Γ₀.
    pub gaussian: Vec<f64>,
}

/// Samples of ν₀ by running the backward SDE from the truncation time to 0.
pub fn localization_sample(model: &ContinuousModel, sched: &Schedule, count: usize, steps: usize, seed: u64) -> Result<LocalizationSamples> {
    let source = DriftSource::for_model(model)?;
    let start = initial_states(sched, count, seed)?;
    let cfg = SdeConfig { steps, count, seed, ..Default::default() };
    let e = run_ensemble(&source, sched, start.clone(), &cfg)?;
    let gaussian = e.gaussian.iter().zip(&start).map(|(g, s)| g + s).collect();
    Ok(LocalizationSamples { samples: e.end, gaussian })
}

/// One trajectory for any dimension, with drift from fluctuation moments.
#[derive(Clone, Debug, Serialize)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub drifts: Vec<Vec<f64>>,
    pub noises: Vec<Vec<f64>>,
    pub cost: f64,
    pub seed: u64,
}

impl FlowTrajectory {
    /// |φ_end − (φ_start + Σ increments)|∞
    pub fn bookkeeping_error(&self) -> f64 {
        let n = self.states[0].len();
        let mut x = self.states[0].clone();
        for k in 0..self.drifts.len() {
            for i in 0..n {
                x[i] += -self.drifts[k][i] + self.noises[k][i];
            }
        }
        let last = self.states.last().unwrap();
        (0..n).map(|i| (x[i] - last[i]).abs()).fold(0.0, f64::max)
    }
}

pub fn backward_sde_sample(
    model: &ContinuousModel,
    sched: &Schedule,
    t_start: f64,
    phi_start: &[f64],
    steps: usize,
    seed: u64,
    backend: Backend,
) -> Result<FlowTrajectory> {
    if steps < MIN_STEPS {
        return invalid(format!("backward SDE needs at least {MIN_STEPS} steps"));
    }
    sched.check_time(t_start)?;
    let n = model.dim();
    if phi_start.len() != n {
        return invalid("start field has the wrong dimension");
    }
    let times = TimeGrid::Uniform.times(t_start, steps);
    let mut rng = stream_rng(seed, 0);
    let mut x = DVector::from_column_slice(phi_start);
    let mut tr = FlowTrajectory { times: times.clone(), states: vec![phi_start.to_vec()], drifts: vec![], noises: vec![], cost: 0.0, seed };
    for k in 0..steps {
        let (t, dt) = (times[k], times[k] - times[k + 1]);
        let ev = sched.eval(t)?;
        let g = if model.potential.is_zero() {
            DVector::zeros(n)
        } else {
            tilt_with(model, &ev.c, x.as_slice(), backend)?.mean_grad
        };
        let cg = &ev.cdot * &g;
        let root = linalg::sym_sqrt(&(ev.cdot.clone() * dt))?;
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let noise = root * z;
        tr.cost += 0.5 * g.dot(&cg) * dt;
        let drift = cg * dt;
        x = &x - &drift + &noise;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable(format!("state not finite at t={}", times[k + 1])));
        }
        tr.drifts.push(drift.iter().copied().collect());
        tr.noises.push(noise.iter().copied().collect());
        tr.states.push(x.iter().copied().collect());
    }
    Ok(tr)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FollmerReport {
    pub cost: MeanErr,
    /// H(ν₀ | γ₀) by quadrature.
    pub reference: f64,
    pub difference: f64,
    pub step: f64,
}

/// H(ν₀|γ₀) = −E_ν[V₀] − log E_γ[e^{−V₀}] with γ₀ = N(0, c_∞).
pub fn reference_entropy(model: &ContinuousModel, c_inf: f64) -> Result<f64> {
    if model.dim() != 1 {
        return Err(Error::Unsupported("reference entropy is implemented for single-site models".into()));
    }
    let r = 12.0 * c_inf.sqrt() + 4.0;
    let g = |x: f64| (-x * x / (2.0 * c_inf)).exp() / (2.0 * std::f64::consts::PI * c_inf).sqrt();
    let v = |x: f64| model.weight * model.potential.value(x);
    let z = integrate(|x| g(x) * (-v(x)).exp(), -r, r, 4000);
    let ev = integrate(|x| g(x) * (-v(x)).exp() * v(x), -r, r, 4000) / z;
    Ok(-ev - z.ln())
}

pub fn follmer_cost(model: &ContinuousModel, sched: &Schedule, cfg: &SdeConfig) -> Result<FollmerReport> {
    if cfg.drift_scale != 1.0 {
        return invalid("Föllmer cost needs the optimal drift; use boue_dupuis_eval for other drifts");
    }
    let source = DriftSource::for_model(model)?;
    let start = initial_states(sched, cfg.count, cfg.seed)?;
    let e = run_ensemble(&source, sched, start, cfg)?;
    let cost = stats::mean_stderr(&e.cost);
    let reference = reference_entropy(model, sched.c_inf_modes()[0])?;
    let step = e.times[0] / cfg.steps as f64;
    Ok(FollmerReport { cost, reference, difference: cost.mean - reference, step })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoueDupuis {
    pub value: MeanErr,
    pub drift_scale: f64,
}

/// E[V₀(φ₀^U) + ½∫ ċ U²] for U = scale·∇V started at φ at time t.
pub fn boue_dupuis_eval(model: &ContinuousModel, sched: &Schedule, t: f64, phi: f64, cfg: &SdeConfig) -> Result<BoueDupuis> {
    sched.check_time(t)?;
    let source = DriftSource::for_model(model)?;
    let times = cfg.grid.times(t, cfg.steps);
    let e = run_from(&source, sched, &times, vec![phi; cfg.count], cfg)?;
    let vals: Vec<f64> = e.0.iter().zip(&e.1).map(|(x, c)| model.weight * model.potential.value(*x) + c).collect();
    Ok(BoueDupuis { value: stats::mean_stderr(&vals), drift_scale: cfg.drift_scale })
}

fn run_from(source: &DriftSource, sched: &Schedule, times: &[f64], start: Vec<f64>, cfg: &SdeConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = sched.coupling.eigen.values[0];
    let mut x = start;
    let mut cost = vec![0.0; x.len()];
    let mut noise = vec![0.0; x.len()];
    for k in 0..times.len() - 1 {
        let (t, dt) = (times[k], times[k] - times[k + 1]);
        let slice = source.slice(sched, t)?;
        let cd = sched.mode(a, t).1;
        let amp = (cd * dt).sqrt();
        fill_normals(&mut noise, cfg.seed, k);
        x.par_iter_mut().zip(cost.par_iter_mut()).zip(noise.par_iter()).for_each(|((xi, ci), &z)| {
            let u = cfg.drift_scale * slice.grad(*xi);
            *ci += 0.5 * cd * u * u * dt;
            *xi += -cd * u * dt + amp * z;
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Unstable("controlled drift exploded".into()));
    }
    Ok((x, cost))
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleReport {
    pub times: Vec<f64>,
    pub grad_means: Vec<f64>,
    pub value_means: Vec<f64>,
    pub grad_slope: MeanErr,
    pub value_slope: MeanErr,
    /// |mean slope| < z·stderr for both martingales.
    pub consistent: bool,
}

/// Per-trajectory regression slopes in s, averaged across the ensemble; `z` is the two-sided critical value.
pub fn martingale_diagnostics(e: &Ensemble, z: f64) -> Result<MartingaleReport> {
    let r = e.recorded();
    if r < 3 {
        return invalid("martingale diagnostics need at least three recorded times");
    }
    let count = e.end.len();
    let slopes = |data: &[f64]| -> Result<Vec<f64>> {
        (0..count).map(|i| stats::linear_fit(&e.recorded_times, &data[i * r..(i + 1) * r]).map(|f| f.slope)).collect()
    };
    let gs = slopes(&e.rec_grad)?;
    let vs = slopes(&e.rec_value)?;
    let column_mean = |data: &[f64], j: usize| (0..count).map(|i| data[i * r + j]).sum::<f64>() / count as f64;
    let grad_slope = stats::mean_stderr(&gs);
    let value_slope = stats::mean_stderr(&vs);
    let ok = |m: MeanErr| m.stderr == 0.0 && m.mean.abs() < 1e-12 || m.mean.abs() < z * m.stderr;
    Ok(MartingaleReport {
        times: e.recorded_times.clone(),
        grad_means: (0..r).map(|j| column_mean(&e.rec_grad, j)).collect(),
        value_means: (0..r).map(|j| column_mean(&e.rec_value, j)).collect(),
        grad_slope,
        value_slope,
        consistent: ok(grad_slope) && ok(value_slope),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationView {
    pub times: Vec<f64>,
    /// h_t = φ_t / c_t along the first trajectory.
    pub field: Vec<f64>,
    /// RMS over trajectories of the accumulated residual of the h-equation.
    pub accumulated_residual: f64,
    pub step: f64,
}

/// External-field path h = C⁻¹φ for a 1-D ensemble, with the residual of dh = Σ̇ b dτ + Σ̇^{1/2} dB on [t_min, T].
pub fn localization_view(source: &DriftSource, sched: &Schedule, count: usize, steps: usize, seed: u64, t_min: f64) -> Result<LocalizationView> {
    if sched.dim() != 1 {
        return Err(Error::Unsupported("localisation view is implemented for single-site schedules".into()));
    }
    let a = sched.coupling.eigen.values[0];
    let t_start = if sched.is_infinite() { sched.truncation() } else { sched.end() };
    if !(t_min > 0.0 && t_min < t_start) {
        return invalid("localisation view needs 0 < t_min < start time");
    }
    let times = TimeGrid::Uniform.times(t_start, steps);
    let mut x = initial_states(sched, count, seed)?;
    let mut noise = vec![0.0; count];
    let mut resid = vec![0.0; count];
    let mut field = vec![];
    let mut used = vec![];
    for k in 0..steps {
        let (t, tn) = (times[k], times[k + 1]);
        if tn < t_min {
            break;
        }
        let dt = t - tn;
        let slice = source.slice(sched, t)?;
        let (c, cd, _) = sched.mode(a, t);
        let cn = sched.mode(a, tn).0;
        let amp = (cd * dt).sqrt();
        let sdot = cd / (c * c);
        used.push(t);
        field.push(x[0] / c);
        fill_normals(&mut noise, seed, k);
        x.iter_mut().zip(resid.iter_mut()).zip(&noise).for_each(|((xi, ri), &z)| {
            let g = slice.grad(*xi);
            let b = *xi - c * g;
            let h0 = *xi / c;
            *xi += -cd * g * dt + amp * z;
            let h1 = *xi / cn;
            *ri += (h1 - h0) - (sdot * b * dt + (cd.sqrt() / c) * dt.sqrt() * z);
        });
    }
    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / count as f64).sqrt();
    Ok(LocalizationView { times: used, field, accumulated_residual: rms, step: times[0] - times[1] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    #[test]
    fn zero_drift_is_pure_noise() {
        let s = Schedule::unit_1d(1.0);
        let e = run_ensemble(&DriftSource::Zero, &s, vec![0.0; 4], &SdeConfig { steps: 200, count: 4, ..Default::default() }).unwrap();
        for i in 0..4 {
            assert!((e.end[i] - e.gaussian[i]).abs() < 1e-12);
            assert_eq!(e.cost[i], 0.0);
        }
    }

    #[test]
    fn seed_determinism() {
        let s = Schedule::unit_1d(1.0);
        let m = ContinuousModel::single_site(1.0, Potential::double_well(1.0));
        let a = localization_sample(&m, &s, 50, 200, 9).unwrap();
        let b = localization_sample(&m, &s, 50, 200, 9).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn single_trajectory_bookkeeping() {
        let s = Schedule::unit_1d(1.0);
        let m = ContinuousModel::single_site(1.0, Potential::quadratic(1.0));
        let tr = backward_sde_sample(&m, &s, 1.0, &[2.0], 100, 1, Backend::Quadrature { order: Some(40) }).unwrap();
        assert!(tr.bookkeeping_error() < 1e-12);
    }
}
