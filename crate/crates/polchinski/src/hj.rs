//! Zero-viscosity renormalised potential: Hopf–Lax, characteristics, Cole–Hopf and the Curie–Weiss pipeline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lsi::golden_min;
use crate::potential::Potential;
use crate::quadrature::gauss_legendre;
use crate::stats;
use statrs::function::gamma::ln_gamma;

/// Initial datum as φ ↦ (V₀(φ), V₀′(φ)).
pub type Initial<'a> = &'a (dyn Fn(f64) -> (f64, f64) + Sync);

pub fn potential_initial(p: &Potential, weight: f64) -> impl Fn(f64) -> (f64, f64) + Sync + '_ {
    move |x| {
        let (v, d, _) = p.eval(x);
        (weight * v, weight * d)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopfLaxOptions {
    /// ζ is scanned on [φ − radius, φ + radius].
    pub radius: f64,
    pub scan_points: usize,
    /// Minimisers closer than this are merged.
    pub separation: f64,
    /// Minimisers whose values differ by less than this count as tied.
    pub value_tol: f64,
}

impl Default for HopfLaxOptions {
    fn default() -> Self {
        HopfLaxOptions { radius: 8.0, scan_points: 4001, separation: 1e-4, value_tol: 1e-9 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HopfLax {
    pub t: f64,
    pub phi: f64,
    pub value: f64,
    pub minimisers: Vec<f64>,
    pub shock: bool,
}

impl HopfLax {
    /// ∇V_t(φ) = V₀′(ζ*) at the smallest minimiser.
    pub fn gradient(&self, v0: Initial) -> f64 {
        v0(self.minimisers[0]).1
    }
}

/// V_t(φ) = min_ζ V₀(ζ) + |φ − ζ|²/(2t) by grid scan and golden refinement.
pub fn hopf_lax(v0: Initial, t: f64, phi: f64, opts: &HopfLaxOptions) -> Result<HopfLax> {
    if !(t >= 0.0) || !phi.is_finite() {
        return invalid(format!("Hopf–Lax needs t ≥ 0 and finite φ (t={t}, φ={phi})"));
    }
    if t == 0.0 {
        return Ok(HopfLax { t, phi, value: v0(phi).0, minimisers: vec![phi], shock: false });
    }
    if opts.scan_points < 5 {
        return invalid("Hopf–Lax scan needs at least 5 points");
    }
    let g = |z: f64| v0(z).0 + (phi - z) * (phi - z) / (2.0 * t);
    let n = opts.scan_points;
    let h = 2.0 * opts.radius / (n - 1) as f64;
    let zs: Vec<f64> = (0..n).map(|i| phi - opts.radius + h * i as f64).collect();
    let gs: Vec<f64> = zs.iter().map(|&z| g(z)).collect();
    if gs.iter().any(|v| v.is_nan()) {
        return invalid(format!("initial potential not finite on the Hopf–Lax window around φ={phi}"));
    }
    let best = gs.iter().cloned().fold(f64::INFINITY, f64::min);
    if gs[0] <= best + opts.value_tol || gs[n - 1] <= best + opts.value_tol {
        return invalid(format!("Hopf–Lax objective not coercive on the window around φ={phi} at t={t}"));
    }
    let mut cands = vec![];
    for i in 1..n - 1 {
        if gs[i] <= gs[i - 1] && gs[i] <= gs[i + 1] {
            let (z, v) = golden_min(|z| Ok(g(z)), zs[i - 1], zs[i + 1], 1e-13)?;
            cands.push((z, v));
        }
    }
    let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let mut mins: Vec<f64> = vec![];
    for (z, v) in cands {
        if v <= min + opts.value_tol && mins.last().is_none_or(|&m| z - m >= opts.separation) {
            mins.push(z);
        }
    }
    Ok(HopfLax { t, phi, value: min, shock: mins.len() > 1, minimisers: mins })
}

pub fn hopf_lax_grid(v0: Initial, t: f64, phis: &[f64], opts: &HopfLaxOptions) -> Result<Vec<HopfLax>> {
    phis.par_iter().map(|&p| hopf_lax(v0, t, p, opts)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Characteristic {
    pub times: Vec<f64>,
    pub path: Vec<f64>,
    pub gradients: Vec<f64>,
    /// max_s |∇V_s(φ_s) − ∇V_t(φ_t)|
    pub conservation_residual: f64,
    /// Time of the first multiple-minimiser event, if the path crossed a shock.
    pub shock_at: Option<f64>,
}

/// Backward characteristic dφ_s/ds = ∇V_s(φ_s) from φ at time t down to 0, by RK4 with step halving.
pub fn characteristics(v0: Initial, t: f64, phi: f64, opts: &HopfLaxOptions) -> Result<Characteristic> {
    if !(t > 0.0) {
        return invalid("characteristics need t > 0");
    }
    let grad = |s: f64, x: f64| -> Result<(f64, bool)> {
        let r = hopf_lax(v0, s, x, opts)?;
        Ok((r.gradient(v0), r.shock))
    };
    let run = |steps: usize| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Option<f64>)> {
        let h = t / steps as f64;
        let mut x = phi;
        let (mut ts, mut xs, mut gsv) = (vec![t], vec![phi], vec![grad(t, phi)?.0]);
        let mut shock = None;
        let time = |k: usize| t * (steps - k) as f64 / steps as f64;
        for k in 0..steps {
            let (s, next) = (time(k), time(k + 1));
            let mid = 0.5 * (s + next);
            let (k1, s1) = grad(s, x)?;
            let (k2, _) = grad(mid, x - 0.5 * h * k1)?;
            let (k3, _) = grad(mid, x - 0.5 * h * k2)?;
            let (k4, _) = grad(next, x - h * k3)?;
            if s1 && shock.is_none() {
                shock = Some(s);
            }
            x -= h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
            let (gn, sn) = grad(next, x)?;
            if sn && shock.is_none() {
                shock = Some(next);
            }
            ts.push(next);
            xs.push(x);
            gsv.push(gn);
        }
        Ok((ts, xs, gsv, shock))
    };
    let mut steps = 32;
    let mut prev = run(steps)?;
    for _ in 0..4 {
        steps *= 2;
        let next = run(steps)?;
        let err = (next.1.last().unwrap() - prev.1.last().unwrap()).abs();
        prev = next;
        if err < 1e-9 {
            break;
        }
    }
    let (times, path, gradients, shock_at) = prev;
    let g0 = gradients[0];
    let conservation_residual = gradients.iter().map(|g| (g - g0).abs()).fold(0.0, f64::max);
    Ok(Characteristic { times, path, gradients, conservation_residual, shock_at })
}

/// V₀(φ − ∫₀ᵗ u) + ½∫₀ᵗ u² for a time-dependent drift u.
pub fn classical_variational(v0: Initial, t: f64, phi: f64, drift: impl Fn(f64) -> f64) -> Result<f64> {
    if !(t > 0.0) {
        return invalid("variational formula needs t > 0");
    }
    let rule = gauss_legendre(16);
    let panels = 64;
    let w = t / panels as f64;
    let (mut disp, mut energy) = (0.0, 0.0);
    for p in 0..panels {
        let mid = w * (p as f64 + 0.5);
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let u = drift(mid + 0.5 * w * x);
            if !u.is_finite() {
                return Err(Error::Numerical("drift not finite".into()));
            }
            disp += 0.5 * w * wt * u;
            energy += 0.5 * w * wt * u * u;
        }
    }
    Ok(v0(phi - disp).0 + 0.5 * energy)
}

/// Viscous solution −ε log E[e^{−V₀(φ + √(εt) Z)/ε}] of ∂V = (ε/2)V″ − ½V′².
pub fn cole_hopf(v0: Initial, t: f64, eps: f64, phi: f64, radius: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return invalid("Cole–Hopf needs positive viscosity");
    }
    if t == 0.0 {
        return Ok(v0(phi).0);
    }
    let width = (0.25 * (eps * t).sqrt()).min(0.05);
    let panels = ((2.0 * radius / width).ceil() as usize).max(16);
    let pw = 2.0 * radius / panels as f64;
    let rule = gauss_legendre(8);
    let mut logs = Vec::with_capacity(panels * 8);
    for p in 0..panels {
        let mid = phi - radius + pw * (p as f64 + 0.5);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let z = mid + 0.5 * pw * x;
            let g = v0(z).0 + (phi - z) * (phi - z) / (2.0 * t);
            logs.push((0.5 * pw * w).ln() - g / eps);
        }
    }
    let l = stats::log_sum_exp(&logs);
    if !l.is_finite() {
        return Err(Error::Numerical(format!("Cole–Hopf integral degenerate at φ={phi}")));
    }
    Ok(-eps * (l - 0.5 * (2.0 * std::f64::consts::PI * eps * t).ln()))
}

#[derive(Clone, Debug, Serialize)]
pub struct ViscosityStudy {
    pub viscosities: Vec<f64>,
    pub sup_distance: Vec<f64>,
    pub decreasing: bool,
}

/// sup_φ |V^ε_t − V_t| over the given points for each viscosity.
pub fn zero_viscosity_study(v0: Initial, t: f64, phis: &[f64], viscosities: &[f64], opts: &HopfLaxOptions) -> Result<ViscosityStudy> {
    let hl = hopf_lax_grid(v0, t, phis, opts)?;
    let mut sup = vec![];
    for &e in viscosities {
        let d = phis
            .par_iter()
            .zip(&hl)
            .map(|(&p, h)| cole_hopf(v0, t, e, p, opts.radius).map(|v| (v - h.value).abs()))
            .collect::<Result<Vec<f64>>>()?;
        sup.push(d.into_iter().fold(0.0, f64::max));
    }
    let decreasing = sup.windows(2).all(|w| w[1] < w[0]);
    Ok(ViscosityStudy { viscosities: viscosities.to_vec(), sup_distance: sup, decreasing })
}

/// Curie–Weiss spin count: finite or the mean-field limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Spins {
    Finite(u64),
    Infinite,
}

pub const MAX_SPINS: u64 = 1_000_000;

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Magnetisation-sector log weights log[C(N,k) 2^{−N} e^{βNm²/2 + hNm}], m = (2k − N)/N.
fn sector_logs(n: u64, beta: f64, h: f64) -> Vec<f64> {
    let nf = n as f64;
    (0..=n)
        .into_par_iter()
        .map(|k| {
            let m = (2.0 * k as f64 - nf) / nf;
            ln_choose(n, k) - nf * std::f64::consts::LN_2 + nf * (0.5 * beta * m * m + h * m)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CwPoint {
    pub free_energy: f64,
    /// ⟨m⟩ = −∂F/∂h
    pub magnetisation: f64,
    /// ⟨m²⟩ = −2∂F/∂β
    pub second_moment: f64,
}

/// F_N(β,h) = −(1/N) log E_σ[e^{(β/2N)(Σσ)² + hΣσ}] with uniform σ; at N = ∞, min_φ βφ²/2 − log cosh(βφ + h).
pub fn curie_weiss(spins: Spins, beta: f64, h: f64) -> Result<CwPoint> {
    match spins {
        Spins::Finite(n) => {
            if n == 0 || n > MAX_SPINS {
                return invalid(format!("Curie–Weiss spin count must be in 1..={MAX_SPINS}"));
            }
            let logs = sector_logs(n, beta, h);
            let l = stats::log_sum_exp(&logs);
            let nf = n as f64;
            let (mut m1, mut m2) = (0.0, 0.0);
            for (k, lw) in logs.iter().enumerate() {
                let p = (lw - l).exp();
                let m = (2.0 * k as f64 - nf) / nf;
                m1 += p * m;
                m2 += p * m * m;
            }
            Ok(CwPoint { free_energy: -l / nf, magnetisation: m1, second_moment: m2 })
        }
        Spins::Infinite => {
            let (phi, f) = mean_field_minimiser(beta, h)?;
            let m = (beta * phi + h).tanh();
            Ok(CwPoint { free_energy: f, magnetisation: m, second_moment: m * m })
        }
    }
}

pub fn curie_weiss_free_energy(spins: Spins, beta: f64, h: f64) -> Result<f64> {
    Ok(curie_weiss(spins, beta, h)?.free_energy)
}

/// Global minimiser of βφ²/2 − log cosh(βφ + h); on ties (h = 0) the positive root.
pub fn mean_field_minimiser(beta: f64, h: f64) -> Result<(f64, f64)> {
    if beta == 0.0 {
        return Ok((0.0, -log_cosh(h)));
    }
    if beta < 0.0 {
        return invalid("mean-field free energy needs β ≥ 0");
    }
    let g = |p: f64| 0.5 * beta * p * p - log_cosh(beta * p + h);
    let mut best = (0.0, g(0.0));
    for (a, b) in [(-1.5, 0.0), (0.0, 1.5)] {
        let (x, v) = golden_min(|p| Ok(g(p)), a, b, 1e-14)?;
        // fixed-point polish φ = tanh(βφ + h)
        let mut p = x;
        for _ in 0..200 {
            let q = (beta * p + h).tanh();
            let d = (1.0 - beta * (1.0 - q * q)).abs();
            if d < 1e-3 {
                break;
            }
            p += (q - p) / (1.0 - beta * (1.0 - q * q));
        }
        let (x, v) = if g(p) <= v && (p - x).abs() < 1e-3 { (p, g(p)) } else { (x, v) };
        if v < best.1 - 1e-15 || (v <= best.1 + 1e-15 && x > best.0) {
            best = (x, v);
        }
    }
    Ok(best)
}

pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceFit {
    pub sizes: Vec<u64>,
    pub errors: Vec<f64>,
    /// −slope of log|F_N − F| against log N.
    pub exponent: f64,
    pub limit: f64,
}

pub fn free_energy_convergence(beta: f64, h: f64, sizes: &[u64]) -> Result<ConvergenceFit> {
    let limit = curie_weiss_free_energy(Spins::Infinite, beta, h)?;
    let errors: Vec<f64> = sizes
        .iter()
        .map(|&n| curie_weiss_free_energy(Spins::Finite(n), beta, h).map(|f| (f - limit).abs()))
        .collect::<Result<_>>()?;
    let x: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
    let fit = stats::linear_fit(&x, &y)?;
    Ok(ConvergenceFit { sizes: sizes.to_vec(), errors, exponent: -fit.slope, limit })
}

#[derive(Clone, Debug, Serialize)]
pub struct HjResidual {
    pub n: u64,
    pub step: f64,
    pub max_residual: f64,
    pub points: usize,
}

/// max |∂_βF_N − (1/2N)∂²_hF_N + ½(∂_hF_N)²| by central differences on exact F_N.
pub fn discrete_hj_residual(n: u64, betas: &[f64], fields: &[f64], step: f64) -> Result<HjResidual> {
    let f = |b: f64, h: f64| curie_weiss_free_energy(Spins::Finite(n), b, h);
    let nf = n as f64;
    let mut worst: f64 = 0.0;
    for &b in betas {
        for &h in fields {
            let fb = (f(b + step, h)? - f(b - step, h)?) / (2.0 * step);
            let (fp, f0, fm) = (f(b, h + step)?, f(b, h)?, f(b, h - step)?);
            let fh = (fp - fm) / (2.0 * step);
            let fhh = (fp - 2.0 * f0 + fm) / (step * step);
            worst = worst.max((fb - fhh / (2.0 * nf) + 0.5 * fh * fh).abs());
        }
    }
    Ok(HjResidual { n, step, max_residual: worst, points: betas.len() * fields.len() })
}

/// Reduced Curie–Weiss datum (α/2)φ² − log cosh(αφ).
pub fn reduced_initial(alpha: f64) -> impl Fn(f64) -> (f64, f64) + Sync {
    move |x| (0.5 * alpha * x * x - log_cosh(alpha * x), alpha * x - alpha * (alpha * x).tanh())
}

/// Clock τ(t) = ∫₀ᵗ (α − s)^{−2} ds.
pub fn reduced_clock(alpha: f64, t: f64) -> f64 {
    1.0 / (alpha - t) - 1.0 / alpha
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducedGrid {
    pub spins: Spins,
    pub alpha: f64,
    pub t: f64,
    pub clock: f64,
    pub phis: Vec<f64>,
    pub values: Vec<f64>,
}

/// Ṽ_t on a grid: Cole–Hopf with viscosity 1/N in the clock τ, or Hopf–Lax at N = ∞.
pub fn cw_reduced_polchinski(spins: Spins, alpha: f64, t: f64, phis: &[f64], opts: &HopfLaxOptions) -> Result<ReducedGrid> {
    if !(t >= 0.0 && t < alpha) {
        return invalid(format!("reduced Curie–Weiss needs 0 ≤ t < α (t={t}, α={alpha})"));
    }
    let v0 = reduced_initial(alpha);
    let tau = reduced_clock(alpha, t);
    let values = match spins {
        Spins::Infinite => hopf_lax_grid(&v0, tau, phis, opts)?.into_iter().map(|r| r.value).collect(),
        Spins::Finite(n) => {
            let eps = 1.0 / n as f64;
            phis.par_iter().map(|&p| cole_hopf(&v0, tau, eps, p, opts.radius)).collect::<Result<Vec<_>>>()?
        }
    };
    Ok(ReducedGrid { spins, alpha, t, clock: tau, phis: phis.to_vec(), values })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducedCheck {
    /// Additive constant pinned at φ = 0.
    pub offset: f64,
    /// max_φ |−h²/(2(α−t)) + Ṽ_t(h/(α−t)) + offset − F(t, h)|
    pub max_error: f64,
}

/// Reconstructs F(t, h) from Ṽ_t and compares against the direct free energy.
pub fn reduced_free_energy_check(grid: &ReducedGrid) -> Result<ReducedCheck> {
    let s = grid.alpha - grid.t;
    let recon = |i: usize| {
        let h = s * grid.phis[i];
        (h, -0.5 * h * h / s + grid.values[i])
    };
    let zero = grid
        .phis
        .iter()
        .position(|p| p.abs() < 1e-14)
        .ok_or_else(|| Error::Invalid("reduced grid must contain φ = 0 to pin the constant".into()))?;
    let (h0, r0) = recon(zero);
    let offset = curie_weiss_free_energy(grid.spins, grid.t, h0)? - r0;
    let mut worst: f64 = 0.0;
    for i in 0..grid.phis.len() {
        let (h, r) = recon(i);
        worst = worst.max((r + offset - curie_weiss_free_energy(grid.spins, grid.t, h)?).abs());
    }
    Ok(ReducedCheck { offset, max_error: worst })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducedConvergence {
    pub sizes: Vec<u64>,
    pub sup_distance: Vec<f64>,
    pub decreasing: bool,
}

/// sup_φ |Ṽ^N_t − Ṽ^∞_t| for each N.
pub fn reduced_convergence(alpha: f64, t: f64, phis: &[f64], sizes: &[u64], opts: &HopfLaxOptions) -> Result<ReducedConvergence> {
    let lim = cw_reduced_polchinski(Spins::Infinite, alpha, t, phis, opts)?;
    let mut sup = vec![];
    for &n in sizes {
        let g = cw_reduced_polchinski(Spins::Finite(n), alpha, t, phis, opts)?;
        sup.push(g.values.iter().zip(&lim.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let decreasing = sup.windows(2).all(|w| w[1] < w[0]);
    Ok(ReducedConvergence { sizes: sizes.to_vec(), sup_distance: sup, decreasing })
}

#[derive(Clone, Debug, Serialize)]
pub struct MagnetisationGap {
    pub beta: f64,
    pub sizes: Vec<u64>,
    /// sup_h |∂_hF − ∂_hF_N| per N.
    pub sup_gap: Vec<f64>,
    /// Shock flag of Hopf–Lax for the reduced datum at φ = 0 and clock τ(β).
    pub shock: bool,
}

pub fn magnetisation_gap(beta: f64, sizes: &[u64], fields: &[f64], opts: &HopfLaxOptions) -> Result<MagnetisationGap> {
    let mut sup_gap = vec![];
    for &n in sizes {
        let mut s: f64 = 0.0;
        for &h in fields {
            let a = curie_weiss(Spins::Infinite, beta, h)?.magnetisation;
            let b = curie_weiss(Spins::Finite(n), beta, h)?.magnetisation;
            s = s.max((a - b).abs());
        }
        sup_gap.push(s);
    }
    let alpha = beta + 0.1;
    let v0 = reduced_initial(alpha);
    let shock = hopf_lax(&v0, reduced_clock(alpha, beta), 0.0, opts)?.shock;
    Ok(MagnetisationGap { beta, sizes: sizes.to_vec(), sup_gap, shock })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_hopf_lax() {
        let v0 = |x: f64| (0.5 * x * x, x);
        let r = hopf_lax(&v0, 1.0, 2.0, &HopfLaxOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!((r.minimisers[0] - 1.0).abs() < 1e-6);
        assert!(!r.shock);
    }

    #[test]
    fn abs_value_at_origin() {
        let v0 = |x: f64| (x.abs(), x.signum());
        let r = hopf_lax(&v0, 3.0, 0.0, &HopfLaxOptions::default()).unwrap();
        assert!(r.value.abs() < 1e-10);
    }

    #[test]
    fn double_well_shock() {
        let p = Potential::double_well(1.0);
        let v0 = potential_initial(&p, 1.0);
        let r = hopf_lax(&v0, 1.0, 0.0, &HopfLaxOptions::default()).unwrap();
        assert!(r.shock);
        assert_eq!(r.minimisers.len(), 2);
        assert!((r.minimisers[0] + r.minimisers[1]).abs() < 1e-6);
    }

    #[test]
    fn beta_zero_free_energy() {
        let f = curie_weiss_free_energy(Spins::Finite(37), 0.0, 1.0).unwrap();
        assert!((f + 1f64.cosh().ln()).abs() < 1e-12);
        let f = curie_weiss_free_energy(Spins::Infinite, 0.0, 1.0).unwrap();
        assert!((f + 0.433_780_830_483_027).abs() < 1e-12);
    }

    #[test]
    fn ln_gamma_integers() {
        assert!((ln_gamma(11.0) - 3_628_800f64.ln()).abs() < 1e-12);
    }
}
