//! Renormalised potential V_t, fluctuation measures μ_t^φ, the Polchinski semigroup and ν_t.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::Schedule;
use crate::linalg::{self, Eigen};
use crate::model::ContinuousModel;
use crate::quadrature::{gauss_hermite, gauss_legendre};

pub const DEFAULT_ORDER: usize = 80;
pub const MAX_ORDER: usize = 320;
pub const ORDER_TOL: f64 = 1e-8;
/// Truncation of the 1-D Gaussian rule in standard deviations.
pub const GAUSS_RADIUS: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "backend", rename_all = "kebab-case")]
pub enum Backend {
    /// Quadrature for N ≤ 2, Monte Carlo otherwise.
    Auto,
    /// Deterministic rule; `None` doubles the order from 80 until two orders agree.
    Quadrature { order: Option<usize> },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Backend {
    fn resolve(self, dim: usize) -> Result<Backend> {
        match self {
            Backend::Auto if dim <= 2 => Ok(Backend::Quadrature { order: None }),
            Backend::Auto => Ok(Backend::MonteCarlo { samples: 20_000, seed: 0 }),
            Backend::Quadrature { .. } if dim > 2 => {
                Err(Error::Unsupported(format!("quadrature backend supports N ≤ 2, model has {dim} sites")))
            }
            Backend::MonteCarlo { samples, .. } if samples < 40 => invalid("Monte Carlo needs at least 40 samples"),
            b => Ok(b),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Points ζᵢ and probabilities pᵢ representing N(0, K).
#[derive(Clone, Debug)]
pub struct GaussianNodes {
    pub dim: usize,
    pub points: Vec<f64>,
    pub probs: Vec<f64>,
    pub monte_carlo: bool,
}

impl GaussianNodes {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// 1-D: composite Gauss–Legendre on ±12σ with `order/2` panels of 8 nodes.
    /// 2-D: tensor Gauss–Hermite in K's eigenbasis.
    pub fn quadrature(k: &DMatrix<f64>, order: usize) -> Result<GaussianNodes> {
        let dim = k.nrows();
        let pi = std::f64::consts::PI;
        match dim {
            1 => {
                let sd = k[(0, 0)].max(0.0).sqrt();
                let panels = (order / 2).max(2);
                let gl = gauss_legendre(8);
                let width = 2.0 * GAUSS_RADIUS / panels as f64;
                let mut points = Vec::with_capacity(panels * 8);
                let mut probs = Vec::with_capacity(panels * 8);
                for p in 0..panels {
                    let mid = -GAUSS_RADIUS + width * (p as f64 + 0.5);
                    for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                        let z = mid + 0.5 * width * x;
                        points.push(sd * z);
                        probs.push(0.5 * width * w * (-0.5 * z * z).exp() / (2.0 * pi).sqrt());
                    }
                }
                let total: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|p| *p /= total);
                Ok(GaussianNodes { dim, points, probs, monte_carlo: false })
            }
            2 => {
                let rule = gauss_hermite(order);
                let e = Eigen::of(k)?;
                let s: Vec<f64> = e.values.iter().map(|&l| (2.0 * l.max(0.0)).sqrt()).collect();
                let mut points = Vec::with_capacity(order * order * 2);
                let mut probs = Vec::with_capacity(order * order);
                for (xi, wi) in rule.nodes.iter().zip(&rule.weights) {
                    for (xj, wj) in rule.nodes.iter().zip(&rule.weights) {
                        let (u, v) = (s[0] * xi, s[1] * xj);
                        points.push(e.vectors[(0, 0)] * u + e.vectors[(0, 1)] * v);
                        points.push(e.vectors[(1, 0)] * u + e.vectors[(1, 1)] * v);
                        probs.push(wi * wj / pi);
                    }
                }
                Ok(GaussianNodes { dim, points, probs, monte_carlo: false })
            }
            _ => Err(Error::Unsupported("tensor quadrature beyond two sites".into())),
        }
    }

    /// Common random numbers: the same standard normals for a given seed.
    pub fn monte_carlo(k: &DMatrix<f64>, samples: usize, seed: u64) -> Result<GaussianNodes> {
        let dim = k.nrows();
        let root = linalg::sym_sqrt(k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(samples * dim);
        let mut xi = DVector::zeros(dim);
        for _ in 0..samples {
            for v in xi.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            points.extend((&root * &xi).iter());
        }
        Ok(GaussianNodes { dim, points, probs: vec![1.0 / samples as f64; samples], monte_carlo: true })
    }
}

/// Moments of the tilted measure ∝ e^{−V₀(φ+ζ)} N(0,K)(dζ), i.e. of the full field φ+ζ.
#[derive(Clone, Debug)]
pub struct Tilted {
    /// log E[e^{−V₀(φ+ζ)}]
    pub log_mass: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// E[∇V₀]
    pub mean_grad: DVector<f64>,
    /// E[Hess V₀] − Cov(∇V₀)
    pub hess: DMatrix<f64>,
    pub stderr_value: f64,
    pub stderr_grad: DVector<f64>,
}

const JACKKNIFE_GROUPS: usize = 20;

pub fn tilt(model: &ContinuousModel, nodes: &GaussianNodes, phi: &[f64]) -> Result<Tilted> {
    let n = nodes.dim;
    if phi.len() != n || model.dim() != n {
        return invalid("field dimension does not match the model");
    }
    let w0 = model.weight;
    let m = nodes.len();
    let mut logw = Vec::with_capacity(m);
    let mut fields = Vec::with_capacity(m * n);
    let mut grads = Vec::with_capacity(m * n);
    let mut d2s = Vec::with_capacity(m * n);
    for i in 0..m {
        let z = nodes.point(i);
        let mut v = 0.0;
        for x in 0..n {
            let f = phi[x] + z[x];
            let (a, b, c) = model.potential.eval(f);
            v += a;
            fields.push(f);
            grads.push(w0 * b);
            d2s.push(w0 * c);
        }
        logw.push(-w0 * v);
    }
    if logw.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("potential evaluated outside its domain during quadrature".into()));
    }
    let shift = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::Numerical("e^{-V₀} vanishes at every quadrature node".into()));
    }
    let w: Vec<f64> = logw.iter().zip(&nodes.probs).map(|(l, p)| p * (l - shift).exp()).collect();
    let mass: f64 = w.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::Numerical("tilted mass is zero".into()));
    }
    let mut mean = DVector::zeros(n);
    let mut mean_grad = DVector::zeros(n);
    let mut mean_d2 = DVector::<f64>::zeros(n);
    for i in 0..m {
        let wi = w[i] / mass;
        for x in 0..n {
            mean[x] += wi * fields[i * n + x];
            mean_grad[x] += wi * grads[i * n + x];
            mean_d2[x] += wi * d2s[i * n + x];
        }
    }
    let mut cov = DMatrix::zeros(n, n);
    let mut cov_g = DMatrix::zeros(n, n);
    for i in 0..m {
        let wi = w[i] / mass;
        for x in 0..n {
            let dx = fields[i * n + x] - mean[x];
            let gx = grads[i * n + x] - mean_grad[x];
            for y in 0..n {
                cov[(x, y)] += wi * dx * (fields[i * n + y] - mean[y]);
                cov_g[(x, y)] += wi * gx * (grads[i * n + y] - mean_grad[y]);
            }
        }
    }
    let mut hess = -cov_g;
    for x in 0..n {
        hess[(x, x)] += mean_d2[x];
    }
    let log_mass = shift + mass.ln();
    let (stderr_value, stderr_grad) = if nodes.monte_carlo {
        jackknife(&w, &grads, n, log_mass - shift)
    } else {
        (0.0, DVector::zeros(n))
    };
    Ok(Tilted { log_mass, mean, cov, mean_grad, hess, stderr_value, stderr_grad })
}

fn jackknife(w: &[f64], grads: &[f64], n: usize, _log_mass: f64) -> (f64, DVector<f64>) {
    let m = w.len();
    let g = JACKKNIFE_GROUPS.min(m);
    let mut vals = Vec::with_capacity(g);
    let mut gr = Vec::with_capacity(g);
    let total: f64 = w.iter().sum();
    let mut total_g = vec![0.0; n];
    for i in 0..m {
        for x in 0..n {
            total_g[x] += w[i] * grads[i * n + x];
        }
    }
    for k in 0..g {
        let (lo, hi) = (k * m / g, (k + 1) * m / g);
        let mut sw = 0.0;
        let mut sg = vec![0.0; n];
        for i in lo..hi {
            sw += w[i];
            for x in 0..n {
                sg[x] += w[i] * grads[i * n + x];
            }
        }
        let rest = total - sw;
        let cnt = (m - (hi - lo)) as f64;
        vals.push(-(rest / cnt).ln());
        gr.push((0..n).map(|x| (total_g[x] - sg[x]) / rest).collect::<Vec<f64>>());
    }
    let gf = g as f64;
    let mv = vals.iter().sum::<f64>() / gf;
    let se_v = ((gf - 1.0) / gf * vals.iter().map(|v| (v - mv).powi(2)).sum::<f64>()).sqrt();
    let mut se_g = DVector::zeros(n);
    for x in 0..n {
        let mg = gr.iter().map(|v| v[x]).sum::<f64>() / gf;
        se_g[x] = ((gf - 1.0) / gf * gr.iter().map(|v| (v[x] - mg).powi(2)).sum::<f64>()).sqrt();
    }
    (se_v, se_g)
}

/// Tilted moments at covariance K with order doubling for quadrature.
pub fn tilt_with(model: &ContinuousModel, k: &DMatrix<f64>, phi: &[f64], backend: Backend) -> Result<Tilted> {
    match backend.resolve(k.nrows())? {
        Backend::MonteCarlo { samples, seed } => tilt(model, &GaussianNodes::monte_carlo(k, samples, seed)?, phi),
        Backend::Quadrature { order: Some(o) } => tilt(model, &GaussianNodes::quadrature(k, o)?, phi),
        Backend::Quadrature { order: None } => {
            let mut order = DEFAULT_ORDER;
            let mut prev = tilt(model, &GaussianNodes::quadrature(k, order)?, phi)?;
            loop {
                let next_order = order * 2;
                if next_order > MAX_ORDER {
                    return Err(Error::Quadrature(format!(
                        "Gauss–Hermite orders {order} and {} disagree beyond {ORDER_TOL} at φ={phi:?}",
                        order / 2
                    )));
                }
                let next = tilt(model, &GaussianNodes::quadrature(k, next_order)?, phi)?;
                if agree(&prev, &next) {
                    return Ok(next);
                }
                prev = next;
                order = next_order;
            }
        }
        Backend::Auto => unreachable!(),
    }
}

fn agree(a: &Tilted, b: &Tilted) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= ORDER_TOL * (1.0 + x.abs().max(y.abs()));
    close(a.log_mass, b.log_mass)
        && a.mean_grad.iter().zip(b.mean_grad.iter()).all(|(x, y)| close(*x, *y))
        && a.hess.iter().zip(b.hess.iter()).all(|(x, y)| close(*x, *y))
}

/// V_t(φ) = −log E_{C_t}[e^{−V₀(φ+ζ)}].
pub fn renorm_potential(
    model: &ContinuousModel,
    sched: &Schedule,
    t: f64,
    phi: &[f64],
    backend: Backend,
) -> Result<Estimate> {
    let c = sched.eval(t)?.c;
    let r = tilt_with(model, &c, phi, backend)?;
    Ok(Estimate { value: -r.log_mass, stderr: r.stderr_value })
}

#[derive(Clone, Debug)]
pub struct FluctuationMoments {
    pub value: f64,
    /// b_t(φ), mean of μ_t^φ
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    pub stderr_value: f64,
    pub stderr_grad: DVector<f64>,
}

impl FluctuationMoments {
    /// ∇V_t via C_t^{-1}(φ − b_t(φ)); singular at t = 0.
    pub fn grad_from_mean(&self, c: &DMatrix<f64>, phi: &[f64]) -> Result<DVector<f64>> {
        let cinv = invert_covariance(c)?;
        Ok(cinv * (DVector::from_column_slice(phi) - &self.mean))
    }

    /// Hess V_t via C^{-1} − C^{-1} cov C^{-1}.
    pub fn hess_from_cov(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let cinv = invert_covariance(c)?;
        Ok(&cinv - &cinv * &self.cov * &cinv)
    }
}

fn invert_covariance(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = Eigen::of(c)?;
    if e.min() <= 1e-12 * e.max().max(1e-300) {
        return Err(Error::Numerical(format!(
            "C_t nearly singular (min eig {:.3e}); use the direct derivative forms",
            e.min()
        )));
    }
    Ok(e.apply_fn(|v| 1.0 / v))
}

/// Mean/covariance of μ_t^φ with ∇V_t = E_μ[∇V₀] and Hess V_t = E_μ[Hess V₀] − Cov_μ(∇V₀).
pub fn fluctuation_moments(
    model: &ContinuousModel,
    sched: &Schedule,
    t: f64,
    phi: &[f64],
    backend: Backend,
) -> Result<FluctuationMoments> {
    let c = sched.eval(t)?.c;
    let r = tilt_with(model, &c, phi, backend)?;
    Ok(FluctuationMoments {
        value: -r.log_mass,
        mean: r.mean,
        cov: r.cov,
        grad: r.mean_grad,
        hess: r.hess,
        stderr_value: r.stderr_value,
        stderr_grad: r.stderr_grad,
    })
}

pub type Observable<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

fn order_of(backend: Backend) -> Option<usize> {
    match backend {
        Backend::Quadrature { order } => order,
        _ => None,
    }
}

/// P_{s,t}F(φ) = e^{V_t(φ)} E_{C_t−C_s}[e^{−V_s(φ+ζ)} F(φ+ζ)].
pub fn semigroup_apply(
    model: &ContinuousModel,
    sched: &Schedule,
    f: Observable,
    s: f64,
    t: f64,
    phi: &[f64],
    backend: Backend,
) -> Result<f64> {
    if !(s <= t) {
        return invalid(format!("semigroup needs s ≤ t, got s={s}, t={t}"));
    }
    let backend = backend.resolve(model.dim())?;
    if s == t {
        return Ok(f(phi));
    }
    let k = &sched.eval(t)?.c - &sched.eval(s)?.c;
    let run = |order: usize| -> Result<f64> {
        let nodes = match backend {
            Backend::MonteCarlo { samples, seed } => GaussianNodes::monte_carlo(&k, samples, seed)?,
            _ => GaussianNodes::quadrature(&k, order)?,
        };
        let inner = match backend {
            Backend::MonteCarlo { samples, seed } => {
                Backend::MonteCarlo { samples, seed: seed.wrapping_add(0x9e37_79b9) }
            }
            _ => Backend::Quadrature { order: Some(order) },
        };
        let n = model.dim();
        let mut logs = Vec::with_capacity(nodes.len());
        let mut vals = Vec::with_capacity(nodes.len());
        let mut x = vec![0.0; n];
        for i in 0..nodes.len() {
            for (d, xv) in x.iter_mut().enumerate() {
                *xv = phi[d] + nodes.point(i)[d];
            }
            let vs = if s == 0.0 {
                model.local_value(&x)
            } else {
                renorm_potential(model, sched, s, &x, inner)?.value
            };
            logs.push(-vs);
            vals.push(f(&x));
        }
        let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..nodes.len() {
            let w = nodes.probs[i] * (logs[i] - shift).exp();
            num += w * vals[i];
            den += w;
        }
        Ok(num / den)
    };
    match (backend, order_of(backend)) {
        (Backend::MonteCarlo { .. }, _) => run(0),
        (_, Some(o)) => run(o),
        _ => {
            let a = run(DEFAULT_ORDER)?;
            let b = run(2 * DEFAULT_ORDER)?;
            if (a - b).abs() > ORDER_TOL * (1.0 + b.abs()) {
                let c = run(MAX_ORDER)?;
                if (b - c).abs() > ORDER_TOL * (1.0 + c.abs()) {
                    return Err(Error::Quadrature(format!("semigroup orders disagree: {b} vs {c}")));
                }
                return Ok(c);
            }
            Ok(b)
        }
    }
}

/// Three pieces of the entropy split along the flow.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EntropySplit {
    pub total: f64,
    pub renormalised: f64,
    pub fluctuation: f64,
}

impl EntropySplit {
    pub fn residual(&self) -> f64 {
        self.total - self.renormalised - self.fluctuation
    }
}

fn ent_terms(vals: &[f64], probs: &[f64]) -> f64 {
    let mut m = 0.0;
    let mut mphi = 0.0;
    for (v, p) in vals.iter().zip(probs) {
        m += p * v;
        mphi += p * if *v > 0.0 { v * v.ln() } else { 0.0 };
    }
    mphi - if m > 0.0 { m * m.ln() } else { 0.0 }
}

/// Normalised probabilities of e^{logw} against the node probabilities.
fn tilted_probs(nodes: &GaussianNodes, logw: &[f64]) -> Vec<f64> {
    let shift = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().zip(&nodes.probs).map(|(l, p)| p * (l - shift).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Ent_{ν₀}(F) = Ent_{ν_t}(P_{0,t}F) + E_{ν_t}[Ent_{μ_t^φ}(F)], each side computed separately.
pub fn entropy_decomposition(
    model: &ContinuousModel,
    sched: &Schedule,
    f: Observable,
    t: f64,
    backend: Backend,
) -> Result<EntropySplit> {
    let run = |order: usize| -> Result<EntropySplit> { entropy_split_at(model, sched, f, t, order) };
    match order_of(backend) {
        Some(o) => run(o),
        None => {
            if model.dim() > 2 {
                return Err(Error::Unsupported("entropy decomposition is implemented for N ≤ 2".into()));
            }
            let a = run(DEFAULT_ORDER)?;
            let b = run(2 * DEFAULT_ORDER)?;
            let close = |x: f64, y: f64| (x - y).abs() <= ORDER_TOL * (1.0 + y.abs());
            if close(a.total, b.total) && close(a.renormalised, b.renormalised) && close(a.fluctuation, b.fluctuation) {
                Ok(b)
            } else {
                Err(Error::Quadrature("entropy decomposition orders 80/160 disagree".into()))
            }
        }
    }
}

fn entropy_split_at(
    model: &ContinuousModel,
    sched: &Schedule,
    f: Observable,
    t: f64,
    order: usize,
) -> Result<EntropySplit> {
    let n = model.dim();
    let c_inf = sched.c_inf()?;
    let c_t = sched.eval(t)?.c;
    // total: ν₀ ∝ e^{−V₀} N(0, C_∞)
    let nodes0 = GaussianNodes::quadrature(&c_inf, order)?;
    let logw0: Vec<f64> = (0..nodes0.len()).map(|i| -model.local_value(nodes0.point(i))).collect();
    let p0 = tilted_probs(&nodes0, &logw0);
    let f0: Vec<f64> = (0..nodes0.len()).map(|i| f(nodes0.point(i))).collect();
    if f0.iter().any(|v| !(*v > 0.0)) {
        return invalid("entropy needs a strictly positive observable");
    }
    let total = ent_terms(&f0, &p0);
    // renormalised measure ν_t ∝ e^{−V_t} N(0, C_∞ − C_t)
    let k = &c_inf - &c_t;
    let nodes_t = GaussianNodes::quadrature(&k, order)?;
    let inner = GaussianNodes::quadrature(&c_t, order)?;
    let mut logw_t = Vec::with_capacity(nodes_t.len());
    let mut pf = Vec::with_capacity(nodes_t.len());
    let mut ent_mu = Vec::with_capacity(nodes_t.len());
    let mut x = vec![0.0; n];
    for i in 0..nodes_t.len() {
        let phi = nodes_t.point(i);
        // μ_t^φ ∝ e^{−V₀(ζ)} N(φ, C_t)
        let lw: Vec<f64> = (0..inner.len())
            .map(|j| {
                for d in 0..n {
                    x[d] = phi[d] + inner.point(j)[d];
                }
                -model.local_value(&x)
            })
            .collect();
        let shift = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mass: f64 = lw.iter().zip(&inner.probs).map(|(l, p)| p * (l - shift).exp()).sum();
        logw_t.push(shift + mass.ln());
        let pm = tilted_probs(&inner, &lw);
        let fv: Vec<f64> = (0..inner.len())
            .map(|j| {
                for d in 0..n {
                    x[d] = phi[d] + inner.point(j)[d];
                }
                f(&x)
            })
            .collect();
        pf.push(fv.iter().zip(&pm).map(|(a, b)| a * b).sum::<f64>());
        ent_mu.push(ent_terms(&fv, &pm));
    }
    let pt = tilted_probs(&nodes_t, &logw_t);
    let renormalised = ent_terms(&pf, &pt);
    let fluctuation = ent_mu.iter().zip(&pt).map(|(a, b)| a * b).sum();
    Ok(EntropySplit { total, renormalised, fluctuation })
}

/// Values of V_t, V_t′, V_t″ on a 1-D grid, with cubic Hermite interpolation.
#[derive(Clone, Debug)]
pub struct Table1d {
    pub t: f64,
    pub lo: f64,
    pub step: f64,
    pub value: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl Table1d {
    pub fn build(model: &ContinuousModel, sched: &Schedule, t: f64, lo: f64, hi: f64, points: usize, order: usize) -> Result<Table1d> {
        if model.dim() != 1 {
            return invalid("1-D table needs a single-site model");
        }
        let c = sched.eval(t)?.c;
        let nodes = GaussianNodes::quadrature(&c, order)?;
        let step = (hi - lo) / (points - 1) as f64;
        let mut tab = Table1d { t, lo, step, value: vec![], d1: vec![], d2: vec![] };
        for i in 0..points {
            let x = lo + step * i as f64;
            let r = tilt(model, &nodes, &[x])?;
            tab.value.push(-r.log_mass);
            tab.d1.push(r.mean_grad[0]);
            tab.d2.push(r.hess[(0, 0)]);
        }
        Ok(tab)
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.step * (self.value.len() - 1) as f64
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.value.len();
        let u = ((x - self.lo) / self.step).clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        (i, u - i as f64)
    }

    /// V_t′ by cubic Hermite interpolation of (V′, V″); linear extrapolation outside.
    #[inline]
    pub fn grad(&self, x: f64) -> f64 {
        let hi = self.hi();
        if x < self.lo {
            return self.d1[0] + self.d2[0] * (x - self.lo);
        }
        if x > hi {
            let n = self.d1.len() - 1;
            return self.d1[n] + self.d2[n] * (x - hi);
        }
        let (i, s) = self.locate(x);
        hermite(self.d1[i], self.d1[i + 1], self.d2[i] * self.step, self.d2[i + 1] * self.step, s)
    }

    #[inline]
    pub fn value_at(&self, x: f64) -> f64 {
        let hi = self.hi();
        if x < self.lo {
            let d = x - self.lo;
            return self.value[0] + self.d1[0] * d + 0.5 * self.d2[0] * d * d;
        }
        if x > hi {
            let n = self.value.len() - 1;
            let d = x - hi;
            return self.value[n] + self.d1[n] * d + 0.5 * self.d2[n] * d * d;
        }
        let (i, s) = self.locate(x);
        hermite(self.value[i], self.value[i + 1], self.d1[i] * self.step, self.d1[i + 1] * self.step, s)
    }

    #[inline]
    pub fn hess(&self, x: f64) -> f64 {
        let (i, s) = self.locate(x);
        self.d2[i] * (1.0 - s) + self.d2[i + 1] * s
    }
}

#[inline]
fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    #[test]
    fn zero_time_is_initial_potential() {
        let m = ContinuousModel::single_site(1.0, Potential::double_well(1.0));
        let s = Schedule::unit_1d(1.0);
        let v = renorm_potential(&m, &s, 0.0, &[0.7], Backend::Auto).unwrap();
        assert!((v.value - m.potential.value(0.7)).abs() < 1e-14);
    }

    #[test]
    fn monte_carlo_close_to_quadrature() {
        let m = ContinuousModel::single_site(1.0, Potential::double_well(1.0));
        let s = Schedule::unit_1d(1.0);
        let q = renorm_potential(&m, &s, 0.5, &[0.3], Backend::Auto).unwrap();
        let mc = renorm_potential(&m, &s, 0.5, &[0.3], Backend::MonteCarlo { samples: 40_000, seed: 3 }).unwrap();
        assert!((q.value - mc.value).abs() < 4.0 * mc.stderr + 1e-3, "{} {} ± {}", q.value, mc.value, mc.stderr);
        assert!(mc.stderr > 0.0);
    }
}
