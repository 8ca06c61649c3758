//! Log-Sobolev estimates: entropy functionals, λ̇ profiles and the multiscale Bakry–Émery bound.

pub(crate) mod discrete;
mod profiles;
mod stability;

pub use discrete::*;
pub use profiles::*;
pub use stability::*;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::TimeMap;
use crate::quadrature::{gauss_legendre, Rule};

/// GL nodes per profile interval.
pub const NODES_PER_INTERVAL: usize = 6;
pub const HALVING_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactIsing,
    ObservedMinimum,
    AnalyticFormula,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LsiMethod {
    MultiscaleBe,
    EntropicStability,
    HighTemp,
    IsingChi,
    HeatBath,
}

/// λ̇ as a function of (reparametrised) time.
pub type Rate<'a> = &'a (dyn Fn(f64) -> Result<f64> + Sync);

#[derive(Clone, Debug)]
pub struct ProfileOptions {
    /// Geometric intervals per decade.
    pub per_decade: usize,
    /// First geometric grid point, relative to min(1, end).
    pub first: f64,
    /// Times where the rate may jump; always grid points.
    pub breakpoints: Vec<f64>,
    /// Largest native time an infinite-horizon profile may be extended to.
    pub max_native: f64,
    /// Stop extending once tail ≤ tail_tol · integral.
    pub tail_tol: f64,
    /// Rebuild at twice the resolution and require agreement within 1e-6.
    pub verify: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions { per_decade: 20, first: 1e-6, breakpoints: vec![], max_native: 1e14, tail_tol: 1e-12, verify: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Tail {
    FiniteHorizon,
    /// Λ̇/σ ≥ rate over the last native decade, extrapolated.
    Exponential { rate: f64, bound: f64 },
    /// u·Λ̇/σ ≥ exponent > ½ over the last native decade, extrapolated.
    Power { exponent: f64, bound: f64 },
    Divergent,
}

impl Tail {
    pub fn bound(&self) -> f64 {
        match self {
            Tail::FiniteHorizon => 0.0,
            Tail::Exponential { bound, .. } | Tail::Power { bound, .. } => *bound,
            Tail::Divergent => f64::INFINITY,
        }
    }
}

/// Piecewise profile on [0, end]: rate λ̇ at GL nodes and interval endpoints' cumulative values.
///
/// `cumulative` is the metric-normalised Λ with Λ̇ = λ̇ + ½ä/ȧ; with the identity clock it equals λ.
#[derive(Clone, Debug, Serialize)]
pub struct LambdaProfile {
    pub provenance: Provenance,
    pub map: TimeMap,
    pub times: Vec<f64>,
    pub rate: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Interval endpoints with Λ and 1/γ_s there.
    pub knots: Vec<f64>,
    pub knot_cumulative: Vec<f64>,
    pub per_scale: Vec<f64>,
    pub end: f64,
    pub infinite: bool,
    /// ∫₀^end ȧ e^{−2Λ}
    pub integral: f64,
    pub tail: Tail,
    /// Relative change of the total under doubled resolution.
    pub halving_delta: Option<f64>,
}

impl LambdaProfile {
    pub fn total(&self) -> f64 {
        self.integral + self.tail.bound()
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self.tail, Tail::Divergent)
    }

    /// λ at time t by interpolating the node data (linear).
    pub fn cumulative_at(&self, t: f64) -> f64 {
        let i = self.knots.partition_point(|&k| k < t);
        if i == 0 {
            return self.knot_cumulative[0];
        }
        if i >= self.knots.len() {
            return *self.knot_cumulative.last().unwrap();
        }
        let (a, b) = (self.knots[i - 1], self.knots[i]);
        let f = (t - a) / (b - a);
        self.knot_cumulative[i - 1] * (1.0 - f) + self.knot_cumulative[i] * f
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,rate,cumulative\n");
        for i in 0..self.times.len() {
            s.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", self.times[i], self.rate[i], self.cumulative[i]));
        }
        s
    }
}

/// Integration weights of Lagrange interpolants: W[k][j] = ∫_{−1}^{x_k} ℓ_j.
fn partial_weights(rule: &Rule) -> Vec<Vec<f64>> {
    let n = rule.nodes.len();
    let fine = gauss_legendre(n + 2);
    let ell = |j: usize, x: f64| -> f64 {
        let mut p = 1.0;
        for m in 0..n {
            if m != j {
                p *= (x - rule.nodes[m]) / (rule.nodes[j] - rule.nodes[m]);
            }
        }
        p
    };
    (0..n)
        .map(|k| {
            let xk = rule.nodes[k];
            let half = 0.5 * (xk + 1.0);
            (0..n)
                .map(|j| fine.nodes.iter().zip(&fine.weights).map(|(y, w)| w * half * ell(j, -1.0 + half * (y + 1.0))).sum())
                .collect()
        })
        .collect()
}

fn grid(end: f64, first: f64, per_decade: usize, breakpoints: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0];
    let start = first * end.min(1.0);
    let ratio = 10f64.powf(1.0 / per_decade as f64);
    let mut x = start;
    while x < end * (1.0 - 1e-9) {
        g.push(x);
        x *= ratio;
    }
    g.push(end);
    for &b in breakpoints {
        if b > 0.0 && b < end {
            g.push(b);
        }
    }
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    g
}

struct Builder<'a> {
    rate: Rate<'a>,
    map: TimeMap,
    rule: std::sync::Arc<Rule>,
    w: Vec<Vec<f64>>,
}

struct Segments {
    times: Vec<f64>,
    rate: Vec<f64>,
    cumulative: Vec<f64>,
    knots: Vec<f64>,
    knot_cum: Vec<f64>,
    /// ∫ over each interval
    pieces: Vec<f64>,
    /// (u, Λ̇/σ) at nodes
    normalised: Vec<(f64, f64)>,
}

impl Builder<'_> {
    fn run(&self, knots: &[f64], seg: &mut Segments) -> Result<()> {
        let n = self.rule.nodes.len();
        let mut nodes = Vec::new();
        for k in 0..knots.len() - 1 {
            let (a, b) = (knots[k], knots[k + 1]);
            for x in &self.rule.nodes {
                nodes.push(0.5 * (a + b) + 0.5 * (b - a) * x);
            }
        }
        let rates: Vec<f64> = nodes.par_iter().map(|&t| (self.rate)(t)).collect::<Result<Vec<f64>>>()?;
        if let Some(i) = rates.iter().position(|r| !r.is_finite()) {
            return Err(Error::Numerical(format!("λ̇ not finite at t={}", nodes[i])));
        }
        for k in 0..knots.len() - 1 {
            let (a, b) = (knots[k], knots[k + 1]);
            let half = 0.5 * (b - a);
            let lam0 = *seg.knot_cum.last().unwrap();
            let idx = k * n;
            let big: Vec<f64> = (0..n)
                .map(|j| {
                    let t = nodes[idx + j];
                    rates[idx + j] + 0.5 * self.map.d2(t) / self.map.d1(t)
                })
                .collect();
            let mut piece = 0.0;
            for j in 0..n {
                let t = nodes[idx + j];
                let lam = lam0 + half * (0..n).map(|m| self.w[j][m] * big[m]).sum::<f64>();
                let sigma = self.map.d1(t);
                piece += half * self.rule.weights[j] * sigma * (-2.0 * lam).exp();
                seg.times.push(t);
                seg.rate.push(rates[idx + j]);
                seg.cumulative.push(lam);
                seg.normalised.push((self.map.value(t), big[j] / sigma));
            }
            let lam1 = lam0 + half * (0..n).map(|m| self.rule.weights[m] * big[m]).sum::<f64>();
            seg.knots.push(b);
            seg.knot_cum.push(lam1);
            seg.pieces.push(piece);
            let _ = a;
        }
        Ok(())
    }
}

fn certificate(seg: &Segments, map: &TimeMap) -> Option<Tail> {
    let t_end = *seg.knots.last().unwrap();
    let u_end = map.value(t_end);
    let lam = *seg.knot_cum.last().unwrap();
    let decade: Vec<(f64, f64)> = seg.normalised.iter().copied().filter(|(u, _)| *u >= 0.1 * u_end).collect();
    if decade.is_empty() {
        return None;
    }
    let kappa = decade.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let c = decade.iter().map(|p| p.0 * p.1).fold(f64::INFINITY, f64::min);
    let scale = (-2.0 * lam).exp();
    let exp = (kappa > 0.0).then(|| Tail::Exponential { rate: kappa, bound: scale / (2.0 * kappa) });
    let pow = (c > 0.5).then(|| Tail::Power { exponent: c, bound: scale * u_end / (2.0 * c - 1.0) });
    match (exp, pow) {
        (Some(a), Some(b)) => Some(if a.bound() <= b.bound() { a } else { b }),
        (a, b) => a.or(b),
    }
}

/// Integrates a rate into a profile. `end` may be ∞; then `truncation` is the first trial end.
pub fn build_profile(
    rate: Rate,
    map: TimeMap,
    end: f64,
    truncation: f64,
    provenance: Provenance,
    opts: &ProfileOptions,
) -> Result<LambdaProfile> {
    let mut p = build_once(rate, map, end, truncation, provenance, opts, opts.per_decade)?;
    if opts.verify {
        let q = build_once(rate, map, p.end, p.end, provenance, opts, 2 * opts.per_decade)?;
        let d = (p.integral - q.integral).abs() / q.integral.abs().max(1e-300);
        if d > HALVING_TOL {
            return Err(Error::Quadrature(format!(
                "profile integral changed by {d:.2e} under doubled resolution ({} vs {})",
                p.integral, q.integral
            )));
        }
        p.halving_delta = Some(d);
    }
    Ok(p)
}

fn build_once(
    rate: Rate,
    map: TimeMap,
    end: f64,
    truncation: f64,
    provenance: Provenance,
    opts: &ProfileOptions,
    per_decade: usize,
) -> Result<LambdaProfile> {
    if !(end > 0.0) || (end.is_infinite() && !(truncation > 0.0 && truncation.is_finite())) {
        return invalid("profile needs a positive end time (or a finite truncation for infinite horizons)");
    }
    let rule = gauss_legendre(NODES_PER_INTERVAL);
    let b = Builder { rate, map, w: partial_weights(&rule), rule };
    let mut seg = Segments {
        times: vec![],
        rate: vec![],
        cumulative: vec![],
        knots: vec![0.0],
        knot_cum: vec![0.0],
        pieces: vec![],
        normalised: vec![],
    };
    let infinite = end.is_infinite();
    let mut t_end = if infinite { truncation } else { end };
    let knots = grid(t_end, opts.first, per_decade, &opts.breakpoints);
    b.run(&knots, &mut seg)?;
    let tail = if !infinite {
        Tail::FiniteHorizon
    } else {
        loop {
            let integral: f64 = seg.pieces.iter().sum();
            let cert = certificate(&seg, &map);
            if let Some(c) = cert {
                if c.bound() <= opts.tail_tol * integral {
                    break c;
                }
            }
            let next = t_end * 10.0;
            if map.value(next) > opts.max_native {
                break cert.unwrap_or(Tail::Divergent);
            }
            // one more decade, same geometric density
            let mut k = grid(next, opts.first, per_decade, &opts.breakpoints);
            k.retain(|&x| x > t_end);
            let mut knots = vec![t_end];
            knots.extend(k);
            b.run(&knots, &mut seg)?;
            t_end = next;
        }
    };
    // per-scale 1/γ_s at knots
    let integral: f64 = seg.pieces.iter().sum();
    let mut suffix = vec![0.0; seg.knots.len()];
    let mut acc = tail.bound();
    suffix[seg.knots.len() - 1] = acc;
    for k in (0..seg.pieces.len()).rev() {
        acc += seg.pieces[k];
        suffix[k] = acc;
    }
    let per_scale = suffix.iter().zip(&seg.knot_cum).map(|(s, l)| s * (2.0 * l).exp()).collect();
    Ok(LambdaProfile {
        provenance,
        map,
        times: seg.times,
        rate: seg.rate,
        cumulative: seg.cumulative,
        knots: seg.knots,
        knot_cumulative: seg.knot_cum,
        per_scale,
        end: t_end,
        infinite,
        integral,
        tail,
        halving_delta: None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Annealing {
    pub scale: f64,
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LsiReport {
    pub method: LsiMethod,
    /// Upper bound on 1/γ; ∞ when divergent.
    pub inverse_gamma: f64,
    pub divergent: bool,
    /// Integral up to the last grid time (the partial integral when divergent).
    pub partial: f64,
    /// Constant added to the integral (e.g. the single-site term).
    pub offset: f64,
    pub tail: Tail,
    pub caveat: Option<String>,
    pub annealing: Option<Annealing>,
}

impl LsiReport {
    pub fn closed_form(method: LsiMethod, inverse_gamma: f64) -> LsiReport {
        let divergent = !inverse_gamma.is_finite();
        LsiReport {
            method,
            inverse_gamma,
            divergent,
            partial: inverse_gamma,
            offset: 0.0,
            tail: if divergent { Tail::Divergent } else { Tail::FiniteHorizon },
            caveat: None,
            annealing: None,
        }
    }
}

/// 1/γ ≤ ∫₀^∞ e^{−2λ_t} dt, in the metric-normalised form under clock changes.
pub fn multiscale_be_bound(profile: &LambdaProfile) -> LsiReport {
    let divergent = profile.is_divergent();
    LsiReport {
        method: LsiMethod::MultiscaleBe,
        inverse_gamma: if divergent { f64::INFINITY } else { profile.total() },
        divergent,
        partial: profile.integral,
        offset: 0.0,
        tail: profile.tail,
        caveat: (profile.provenance == Provenance::ObservedMinimum)
            .then(|| "profile is an observed minimum over sampled fields, not a proof".to_string()),
        annealing: None,
    }
}

/// Entropy and Fisher information of F > 0 under a 1-D density, by Gauss–Legendre on [lo, hi].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EntropyFisher {
    pub entropy: f64,
    pub fisher: f64,
    /// E[(√F)′²]
    pub dirichlet_sqrt: f64,
}

pub fn entropy_and_fisher_1d(
    f: impl Fn(f64) -> (f64, f64),
    log_density: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    panels: usize,
) -> Result<EntropyFisher> {
    let rule = gauss_legendre(16);
    let h = (hi - lo) / panels as f64;
    let mut pts = Vec::with_capacity(panels * 16);
    for p in 0..panels {
        let c = lo + h * (p as f64 + 0.5);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            pts.push((c + 0.5 * h * x, 0.5 * h * w));
        }
    }
    let logs: Vec<f64> = pts.iter().map(|(x, _)| log_density(*x)).collect();
    let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut ef, mut eflog, mut fis, mut dir) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((x, w), l) in pts.iter().zip(&logs) {
        let p = w * (l - shift).exp();
        let (v, dv) = f(*x);
        if !(v > 0.0) {
            return invalid(format!("entropy needs F > 0, got F({x}) = {v}"));
        }
        z += p;
        ef += p * v;
        eflog += p * v * v.ln();
        fis += p * dv * dv / v;
        let ds = 0.5 * dv / v.sqrt();
        dir += p * ds * ds;
    }
    let (ef, eflog) = (ef / z, eflog / z);
    Ok(EntropyFisher { entropy: eflog - ef * ef.ln(), fisher: fis / z, dirichlet_sqrt: dir / z })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rate_recovers_bakry_emery() {
        let r = |_t: f64| Ok(0.5);
        let p = build_profile(&r, TimeMap::Identity, f64::INFINITY, 10.0, Provenance::AnalyticFormula, &ProfileOptions::default()).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-10, "{}", p.total());
    }

    #[test]
    fn zero_rate_finite_horizon() {
        let r = |_t: f64| Ok(0.0);
        let p = build_profile(&r, TimeMap::Identity, 3.0, 3.0, Provenance::AnalyticFormula, &ProfileOptions::default()).unwrap();
        assert!((p.total() - 3.0).abs() < 1e-12);
        assert!((p.per_scale[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rate_diverges() {
        let r = |_t: f64| Ok(-0.1);
        let p = build_profile(&r, TimeMap::Identity, f64::INFINITY, 1.0, Provenance::AnalyticFormula, &ProfileOptions { max_native: 1e4, verify: false, ..Default::default() }).unwrap();
        assert!(p.is_divergent());
        assert!(multiscale_be_bound(&p).divergent);
    }

    #[test]
    fn gaussian_tilt_entropy() {
        let e = entropy_and_fisher_1d(|x| ((x - 0.5).exp(), (x - 0.5).exp()), |x| -0.5 * x * x, -12.0, 12.0, 64).unwrap();
        assert!((e.entropy - 0.5).abs() < 1e-10, "{}", e.entropy);
        assert!((e.fisher - 4.0 * e.dirichlet_sqrt).abs() < 1e-10);
    }
}
