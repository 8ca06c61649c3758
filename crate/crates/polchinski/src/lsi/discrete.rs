//! Ising log-Sobolev bounds, Glauber spectral gaps and enumeration checks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{build_profile, criterion_min_eig, LambdaProfile, LsiMethod, LsiReport, ProfileOptions, Provenance, Tail};
use crate::error::{invalid, Error, Result};
use crate::ising::{configuration_weights, ising_renormalised, moments_at, IsingModel, Method, MAX_ENUMERATION};
use crate::lattice::{Coupling, Schedule};
use crate::linalg::{sym_max_eig, Eigen};

/// Single-spin log-Sobolev constant for the standard Dirichlet form.
pub const SINGLE_SPIN_GAMMA: f64 = 2.0;

/// ‖Σ_t(h)‖ for the normalised coupling at inverse temperature t.
pub fn chi_bar(coupling: &DMatrix<f64>, t: f64, field: &[f64]) -> Result<f64> {
    let m = moments_at(coupling, t, field, Method::Auto)?;
    sym_max_eig(&m.cov)
}

/// Ising schedule on [0, β] for the model's normalised coupling.
pub fn ising_schedule_for(model: &IsingModel) -> Result<Schedule> {
    let alpha = model.alpha.max(model.beta + 1e-3);
    Schedule::ising(Coupling::new(model.coupling.clone())?, alpha, model.beta)
}

/// λ̇_t = −sup_h ‖Σ_t(h)‖: exact at h = 0 for ferromagnets, observed maximum over random fields otherwise.
pub fn ising_chi_profile(model: &IsingModel, opts: &ProfileOptions) -> Result<(LambdaProfile, Option<String>)> {
    if !(model.beta > 0.0) {
        return invalid("χ profile needs β > 0");
    }
    let n = model.dim();
    let ferro = model.is_ferromagnetic();
    let fields: Vec<Vec<f64>> = if ferro {
        vec![vec![0.0; n]]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1d5);
        let mut f = vec![vec![0.0; n]];
        for _ in 0..32 {
            f.push((0..n).map(|_| rng.random_range(-2.0..2.0)).collect());
        }
        f
    };
    let rate = |t: f64| -> Result<f64> {
        let mut best: f64 = 0.0;
        for h in &fields {
            best = best.max(chi_bar(&model.coupling, t, h)?);
        }
        Ok(-best)
    };
    let prov = if ferro { Provenance::ExactIsing } else { Provenance::ObservedMinimum };
    let p = build_profile(&rate, crate::lattice::TimeMap::Identity, model.beta, model.beta, prov, opts)?;
    let caveat = (!ferro).then(|| "non-ferromagnetic coupling: χ is an observed maximum over sampled fields, not rigorous".to_string());
    Ok((p, caveat))
}

/// Criterion-matrix profile on the (possibly reparametrised) Ising schedule, worst field h_eff = 0.
pub fn ising_criterion_profile(model: &IsingModel, sched: &Schedule, opts: &ProfileOptions) -> Result<LambdaProfile> {
    if !model.is_ferromagnetic() {
        return Err(Error::Unsupported("exact Ising criterion profile needs a ferromagnet".into()));
    }
    let rate = |t: f64| -> Result<f64> {
        // φ = −C_t h puts the effective field at zero
        let c = sched.eval(t)?.c;
        let h = nalgebra::DVector::from_column_slice(&model.field);
        let phi = -(&c * h);
        let r = ising_renormalised(model, sched, t, &phi)?;
        criterion_min_eig(sched, t, &r.hess)
    };
    build_profile(&rate, sched.time_map, sched.end(), sched.end(), Provenance::ExactIsing, opts)
}

/// 1/γ ≤ ½ + ∫₀^β e^{2∫₀^t χ_s ds} dt.
pub fn ising_lsi_bound(model: &IsingModel, opts: &ProfileOptions) -> Result<(LsiReport, Option<LambdaProfile>)> {
    let half = 1.0 / SINGLE_SPIN_GAMMA;
    if model.beta == 0.0 {
        let mut r = LsiReport::closed_form(LsiMethod::IsingChi, half);
        r.offset = half;
        r.partial = 0.0;
        return Ok((r, None));
    }
    let (p, caveat) = ising_chi_profile(model, opts)?;
    let r = LsiReport {
        method: LsiMethod::IsingChi,
        inverse_gamma: half + p.total(),
        divergent: false,
        partial: p.integral,
        offset: half,
        tail: Tail::FiniteHorizon,
        caveat,
        annealing: None,
    };
    Ok((r, Some(p)))
}

/// χ ≤ 1/(1−t) for spectrum in [0,1]: 1/γ ≤ ½ + β/(1−β), divergent for β ≥ 1.
pub fn high_temperature_bound(beta: f64) -> LsiReport {
    let v = if beta < 1.0 { 0.5 + beta / (1.0 - beta) } else { f64::INFINITY };
    let mut r = LsiReport::closed_form(LsiMethod::HighTemp, v);
    r.offset = 0.5;
    if !v.is_finite() {
        r.partial = f64::INFINITY;
        r.caveat = Some(format!("∫₀^β (1−t)^{{-2}} dt diverges at β = {beta} ≥ 1"));
    }
    r
}

/// Ent ≤ C·D(√F) with C = 2/γ = 1 + 2β/(1−β).
pub fn high_temperature_constant(beta: f64) -> f64 {
    2.0 * high_temperature_bound(beta).inverse_gamma
}

/// Modified LSI for the heat-bath form: 1/γ ≤ 2 + 4∫₀^β e^{−2λ_t} dt.
pub fn heatbath_mlsi_bound(model: &IsingModel, opts: &ProfileOptions) -> Result<LsiReport> {
    if model.beta == 0.0 {
        let mut r = LsiReport::closed_form(LsiMethod::HeatBath, 2.0);
        r.offset = 2.0;
        r.partial = 0.0;
        return Ok(r);
    }
    let (p, caveat) = ising_chi_profile(model, opts)?;
    Ok(LsiReport {
        method: LsiMethod::HeatBath,
        inverse_gamma: 2.0 + 4.0 * p.total(),
        divergent: false,
        partial: p.integral,
        offset: 2.0,
        tail: Tail::FiniteHorizon,
        caveat,
        annealing: None,
    })
}

/// Probabilities over 2^N configurations, bit i set ⇔ σ_i = +1.
#[derive(Clone, Debug)]
pub struct SpinMeasure {
    pub n: usize,
    pub probs: Vec<f64>,
}

impl SpinMeasure {
    pub fn of(model: &IsingModel) -> Result<SpinMeasure> {
        Ok(SpinMeasure { n: model.dim(), probs: configuration_weights(model)? })
    }

    pub fn entropy(&self, f: &[f64]) -> Result<f64> {
        if f.iter().any(|v| !(*v > 0.0)) {
            return invalid("entropy needs F > 0");
        }
        let m: f64 = self.probs.iter().zip(f).map(|(p, v)| p * v).sum();
        let e: f64 = self.probs.iter().zip(f).map(|(p, v)| p * v * v.ln()).sum();
        Ok(e - m * m.ln())
    }

    /// D(G) = ½ Σ_x E[(G(σ^x) − G(σ))²]
    pub fn dirichlet(&self, g: &[f64]) -> f64 {
        let mut s = 0.0;
        for c in 0..self.probs.len() {
            for x in 0..self.n {
                let d = g[c ^ (1 << x)] - g[c];
                s += self.probs[c] * d * d;
            }
        }
        0.5 * s
    }

    /// D^HB(F, log F) = ½ Σ_σ Σ_x Ψ(μ(σ), μ(σ^x))(F(σ)−F(σ^x))(log F(σ) − log F(σ^x))
    pub fn heatbath_entropy_production(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for c in 0..self.probs.len() {
            for x in 0..self.n {
                let d = c ^ (1 << x);
                s += psi(self.probs[c], self.probs[d]) * (f[c] - f[d]) * (f[c].ln() - f[d].ln());
            }
        }
        0.5 * s
    }
}

pub fn psi(a: f64, b: f64) -> f64 {
    if a + b == 0.0 { 0.0 } else { a * b / (a + b) }
}

/// Smallest nonzero eigenvalue of −L for Glauber rates c_x = ½(1 + μ(σ^x)/μ(σ)).
pub fn glauber_gap(model: &IsingModel) -> Result<f64> {
    let n = model.dim();
    if n > 12 {
        return invalid("dense Glauber generator is limited to 12 spins");
    }
    let mu = configuration_weights(model)?;
    let size = mu.len();
    let mut s = DMatrix::zeros(size, size);
    for c in 0..size {
        for x in 0..n {
            let d = c ^ (1 << x);
            let rate = 0.5 * (1.0 + mu[d] / mu[c]);
            s[(c, c)] += rate;
            // symmetrised off-diagonal √(μ_c/μ_d)·(−rate)
            s[(c, d)] -= (mu[c] / mu[d]).sqrt() * rate;
        }
    }
    let e = Eigen::of(&s)?;
    if e.values[0].abs() > 1e-8 {
        return Err(Error::Numerical(format!("generator ground state {} is not zero", e.values[0])));
    }
    Ok(e.values[1])
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InequalitySweep {
    pub trials: usize,
    pub min_slack: f64,
    pub violations: usize,
}

/// Random positive F on all configurations; slack = C·D(√F) − Ent(F).
pub fn check_entropy_inequality(model: &IsingModel, constant: f64, trials: usize, seed: u64) -> Result<InequalitySweep> {
    let m = SpinMeasure::of(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    let mut violations = 0;
    for k in 0..trials {
        let spread = if k % 2 == 0 { 0.5 } else { 3.0 };
        let f: Vec<f64> = (0..m.probs.len()).map(|_| (rng.random_range(-spread..spread) as f64).exp()).collect();
        let g: Vec<f64> = f.iter().map(|v| v.sqrt()).collect();
        let slack = constant * m.dirichlet(&g) - m.entropy(&f)?;
        min_slack = min_slack.min(slack);
        if slack < -1e-12 {
            violations += 1;
        }
    }
    Ok(InequalitySweep { trials, min_slack, violations })
}

/// Random F; slack = ½(1/γ^HB)·D^HB(F, log F) − Ent(F).
pub fn check_heatbath_inequality(model: &IsingModel, inverse_gamma: f64, trials: usize, seed: u64) -> Result<InequalitySweep> {
    let m = SpinMeasure::of(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..trials {
        let f: Vec<f64> = (0..m.probs.len()).map(|_| (rng.random_range(-2.0..2.0) as f64).exp()).collect();
        let slack = 0.5 * inverse_gamma * m.heatbath_entropy_production(&f) - m.entropy(&f)?;
        min_slack = min_slack.min(slack);
        if slack < -1e-12 {
            violations += 1;
        }
    }
    Ok(InequalitySweep { trials, min_slack, violations })
}

/// Ent ≤ (pq(log p − log q)/(p − q))(√F₊ − √F₋)² for a single spin.
pub fn single_spin_standard(p: f64, fp: f64, fm: f64) -> (f64, f64) {
    let q = 1.0 - p;
    let coef = if (p - q).abs() < 1e-12 { 0.5 } else { p * q * (p.ln() - q.ln()) / (p - q) };
    let ent = single_spin_entropy(p, fp, fm);
    (ent, coef * (fp.sqrt() - fm.sqrt()).powi(2))
}

/// Ent ≤ pq(log F₊ − log F₋)(F₊ − F₋)
pub fn single_spin_heatbath(p: f64, fp: f64, fm: f64) -> (f64, f64) {
    let q = 1.0 - p;
    (single_spin_entropy(p, fp, fm), p * q * (fp.ln() - fm.ln()) * (fp - fm))
}

fn single_spin_entropy(p: f64, fp: f64, fm: f64) -> f64 {
    let q = 1.0 - p;
    let m = p * fp + q * fm;
    p * fp * fp.ln() + q * fm * fm.ln() - m * m.ln()
}

/// Concavity step of the heat-bath argument: E_ν[Ψ(μ^φ(σ), μ^φ(σ^x))] ≤ Ψ(μ(σ), μ(σ^x)) with μ = E_ν[μ^φ].
/// The mixture is over a finite set of product measures given by their fields; returns min slack.
pub fn psi_concavity_slack(fields: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
    let n = fields.first().map(|f| f.len()).unwrap_or(0);
    if n == 0 || n > MAX_ENUMERATION || fields.len() != weights.len() {
        return invalid("concavity check needs matching fields and weights");
    }
    let size = 1usize << n;
    let prod = |h: &[f64], c: usize| -> f64 {
        (0..n).map(|i| {
            let s = if (c >> i) & 1 == 1 { 1.0 } else { -1.0 };
            (s * h[i]).exp() / (2.0 * h[i].cosh())
        }).product()
    };
    let wsum: f64 = weights.iter().sum();
    let mut min_slack = f64::INFINITY;
    for c in 0..size {
        for x in 0..n {
            let d = c ^ (1 << x);
            let (mut avg_psi, mut mc, mut md) = (0.0, 0.0, 0.0);
            for (h, w) in fields.iter().zip(weights) {
                let (a, b) = (prod(h, c), prod(h, d));
                avg_psi += w / wsum * psi(a, b);
                mc += w / wsum * a;
                md += w / wsum * b;
            }
            min_slack = min_slack.min(psi(mc, md) - avg_psi);
        }
    }
    Ok(min_slack)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn high_temperature_at_half() {
        assert!((high_temperature_constant(0.5) - 3.0).abs() < 1e-15);
        assert!(high_temperature_bound(1.5).divergent);
    }

    #[test]
    fn free_spins_gap_is_one() {
        let m = IsingModel::ring(4, 0.0).unwrap();
        assert!((glauber_gap(&m).unwrap() - 2.0).abs() < 1e-12);
        let (r, _) = ising_lsi_bound(&m, &ProfileOptions::default()).unwrap();
        assert_eq!(r.inverse_gamma, 0.5);
    }

    #[test]
    fn single_spin_sweeps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p: f64 = rng.random_range(0.001..0.999);
            let (fp, fm) = (rng.random_range(0.01..10.0), rng.random_range(0.01..10.0));
            let (e, b) = single_spin_standard(p, fp, fm);
            assert!(e <= b + 1e-12);
            let (e, b) = single_spin_heatbath(p, fp, fm);
            assert!(e <= b + 1e-12);
        }
    }
}
