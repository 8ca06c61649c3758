//! Ising measures ∝ exp(−½β(σ,Aσ) + (h,σ)) with exact small-N moments.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::{Schedule, ScheduleKind};
use crate::linalg::Eigen;

pub const MAX_ENUMERATION: usize = 20;
pub const MAX_TRANSFER: usize = 10_000;

/// How the raw coupling was brought into spectrum [0, 1].
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Normalisation {
    pub shift: f64,
    pub scale: f64,
}

#[derive(Clone, Debug)]
pub struct IsingModel {
    pub coupling: DMatrix<f64>,
    pub beta: f64,
    /// Entries may be ±∞ (pinned spins).
    pub field: Vec<f64>,
    pub alpha: f64,
    pub normalisation: Normalisation,
}

impl IsingModel {
    /// Normalises `raw` to spectrum [0,1]; β is rescaled along with A.
    pub fn new(raw: DMatrix<f64>, beta: f64, field: Vec<f64>) -> Result<IsingModel> {
        let n = raw.nrows();
        if n == 0 || raw.ncols() != n || field.len() != n {
            return invalid("coupling must be square with one field entry per site");
        }
        if !(beta >= 0.0) {
            return invalid(format!("inverse temperature must be nonnegative, got {beta}"));
        }
        if field.iter().any(|h| h.is_nan()) {
            return invalid("field contains NaN");
        }
        let e = Eigen::of(&raw)?;
        let (lo, hi) = (e.min(), e.max());
        let (shift, scale) = if lo >= -1e-12 && hi <= 1.0 + 1e-12 {
            (0.0, 1.0)
        } else {
            let width = hi - lo;
            (lo, if width > 1.0 { width } else { 1.0 })
        };
        let coupling = (raw - DMatrix::identity(n, n) * shift) / scale;
        let coupling = (&coupling + coupling.transpose()) * 0.5;
        let beta = beta * scale;
        Ok(IsingModel { coupling, beta, field, alpha: beta + 1e-3, normalisation: Normalisation { shift, scale } })
    }

    /// Ring with A = −Δ/4, spectrum in [0,1].
    pub fn ring(n: usize, beta: f64) -> Result<IsingModel> {
        if n < 3 {
            return invalid("ring needs at least 3 sites");
        }
        let mut a = DMatrix::zeros(n, n);
        for x in 0..n {
            a[(x, x)] = 0.5;
            a[(x, (x + 1) % n)] -= 0.25;
            a[(x, (x + n - 1) % n)] -= 0.25;
        }
        Self::new(a, beta, vec![0.0; n])
    }

    /// Open chain with nearest-neighbour coupling J: energy exponent βJ Σ σ_iσ_{i+1}.
    pub fn chain(n: usize, beta: f64, j: f64) -> Result<IsingModel> {
        let mut a = DMatrix::zeros(n, n);
        for x in 0..n.saturating_sub(1) {
            a[(x, x + 1)] = -j;
            a[(x + 1, x)] = -j;
        }
        Self::new(a, beta, vec![0.0; n])
    }

    pub fn with_field(mut self, field: Vec<f64>) -> Self {
        self.field = field;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn dim(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn is_ferromagnetic(&self) -> bool {
        let n = self.dim();
        (0..n).all(|x| (0..n).all(|y| x == y || self.coupling[(x, y)] <= 0.0))
    }

    pub fn has_zero_field(&self) -> bool {
        self.field.iter().all(|&h| h == 0.0)
    }

    /// Nearest-neighbour chain or ring structure (needed for transfer matrices).
    pub fn is_chain(&self) -> bool {
        let n = self.dim();
        (0..n).all(|x| {
            (0..n).all(|y| {
                let d = x.abs_diff(y);
                d <= 1 || d == n - 1 || self.coupling[(x, y)] == 0.0
            })
        })
    }
}

#[derive(Clone, Debug)]
pub struct IsingMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// log Z of the conditioned measure (pinned spins removed).
    pub log_z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Auto,
    Enumerate,
    Transfer,
}

pub fn ising_moments(model: &IsingModel, field_override: Option<&[f64]>, method: Method) -> Result<IsingMoments> {
    let h = field_override.unwrap_or(&model.field);
    moments_at(&model.coupling, model.beta, h, method)
}

/// Moments of exp(−½β(σ,Aσ) + (h,σ)) for an arbitrary field.
pub fn moments_at(a: &DMatrix<f64>, beta: f64, h: &[f64], method: Method) -> Result<IsingMoments> {
    let n = a.nrows();
    if h.len() != n {
        return invalid("field length does not match the coupling");
    }
    let chain = n >= 3 && {
        (0..n).all(|x| (0..n).all(|y| {
            let d = x.abs_diff(y);
            d <= 1 || d == n - 1 || a[(x, y)] == 0.0
        }))
    };
    match method {
        Method::Enumerate => enumerate(a, beta, h),
        Method::Transfer => {
            if n <= 2 {
                enumerate(a, beta, h)
            } else if !chain {
                Err(Error::Unsupported("transfer matrices need a nearest-neighbour chain".into()))
            } else if n > MAX_TRANSFER {
                Err(Error::Unsupported(format!("{n} sites exceeds the transfer-matrix cap {MAX_TRANSFER}")))
            } else {
                transfer(a, beta, h)
            }
        }
        Method::Auto => {
            let free = h.iter().filter(|v| v.is_finite()).count();
            if free <= MAX_ENUMERATION && (free <= 12 || !chain) {
                enumerate(a, beta, h)
            } else if chain && n <= MAX_TRANSFER {
                transfer(a, beta, h)
            } else {
                Err(Error::Unsupported(format!(
                    "{free} free spins: too many for enumeration (cap {MAX_ENUMERATION}) and not a chain"
                )))
            }
        }
    }
}

struct Block {
    max: f64,
    z: f64,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

fn merge(mut a: Block, b: Block) -> Block {
    if b.z == 0.0 {
        return a;
    }
    if a.z == 0.0 {
        return b;
    }
    let m = a.max.max(b.max);
    let (sa, sb) = ((a.max - m).exp(), (b.max - m).exp());
    a.z = a.z * sa + b.z * sb;
    for (x, y) in a.m1.iter_mut().zip(&b.m1) {
        *x = *x * sa + y * sb;
    }
    for (x, y) in a.m2.iter_mut().zip(&b.m2) {
        *x = *x * sa + y * sb;
    }
    a.max = m;
    a
}

fn enumerate(a: &DMatrix<f64>, beta: f64, h: &[f64]) -> Result<IsingMoments> {
    let n = a.nrows();
    let pinned: Vec<Option<f64>> =
        h.iter().map(|&v| if v.is_infinite() { Some(v.signum()) } else { None }).collect();
    let free: Vec<usize> = (0..n).filter(|&x| pinned[x].is_none()).collect();
    let k = free.len();
    if k > MAX_ENUMERATION {
        return Err(Error::Unsupported(format!("{k} free spins exceeds the enumeration cap {MAX_ENUMERATION}")));
    }
    // conditioning: effective field and constant from pinned spins
    let mut heff = vec![0.0; k];
    for (i, &x) in free.iter().enumerate() {
        heff[i] = h[x];
        for y in 0..n {
            if let Some(s) = pinned[y] {
                heff[i] -= beta * a[(x, y)] * s;
            }
        }
    }
    let mut constant = 0.0;
    for x in 0..n {
        for y in 0..n {
            if let (Some(sx), Some(sy)) = (pinned[x], pinned[y]) {
                constant -= 0.5 * beta * a[(x, y)] * sx * sy;
            }
        }
    }
    let asub = DMatrix::from_fn(k, k, |i, j| a[(free[i], free[j])]);
    let total: u64 = 1u64 << k;
    let block_bits = k.min(12);
    let nblocks = total >> block_bits;
    let run_block = |b: u64| -> Block {
        let start = b << block_bits;
        let len = 1u64 << block_bits;
        let mut energies = Vec::with_capacity(len as usize);
        let mut s = vec![0.0; k];
        for c in start..start + len {
            for (i, si) in s.iter_mut().enumerate() {
                *si = if (c >> i) & 1 == 1 { 1.0 } else { -1.0 };
            }
            let mut e = 0.0;
            for i in 0..k {
                let mut row = 0.0;
                for j in 0..k {
                    row += asub[(i, j)] * s[j];
                }
                e += -0.5 * beta * s[i] * row + heff[i] * s[i];
            }
            energies.push(e);
        }
        let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut blk = Block { max, z: 0.0, m1: vec![0.0; k], m2: vec![0.0; k * k] };
        for (off, &e) in energies.iter().enumerate() {
            let c = start + off as u64;
            let w = (e - max).exp();
            blk.z += w;
            for i in 0..k {
                s[i] = if (c >> i) & 1 == 1 { 1.0 } else { -1.0 };
            }
            for i in 0..k {
                let wi = w * s[i];
                blk.m1[i] += wi;
                for j in i..k {
                    blk.m2[i * k + j] += wi * s[j];
                }
            }
        }
        blk
    };
    let blocks: Vec<Block> = (0..nblocks).into_par_iter().map(run_block).collect();
    let mut acc = Block { max: f64::NEG_INFINITY, z: 0.0, m1: vec![0.0; k], m2: vec![0.0; k * k] };
    for b in blocks {
        acc = merge(acc, b);
    }
    let log_z = acc.max + acc.z.ln() + constant;
    let mut mean = DVector::zeros(n);
    let mut cov = DMatrix::zeros(n, n);
    for x in 0..n {
        if let Some(s) = pinned[x] {
            mean[x] = s;
        }
    }
    for i in 0..k {
        mean[free[i]] = acc.m1[i] / acc.z;
    }
    for i in 0..k {
        for j in i..k {
            let c = acc.m2[i * k + j] / acc.z - mean[free[i]] * mean[free[j]];
            cov[(free[i], free[j])] = c;
            cov[(free[j], free[i])] = c;
        }
    }
    Ok(IsingMoments { mean, cov, log_z })
}

#[derive(Clone, Copy, Debug)]
struct Scaled {
    m: [[f64; 2]; 2],
    log: f64,
}

impl Scaled {
    fn identity() -> Scaled {
        Scaled { m: [[1.0, 0.0], [0.0, 1.0]], log: 0.0 }
    }

    fn mul(&self, o: &Scaled) -> Scaled {
        let a = &self.m;
        let b = &o.m;
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        let s = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let (m, log) = if s > 0.0 && s.is_finite() {
            (m.map(|r| r.map(|v| v / s)), self.log + o.log + s.ln())
        } else {
            (m, self.log + o.log)
        };
        Scaled { m, log }
    }

    fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    /// tr(S · self) with S = diag(1, −1) on the left.
    fn with_spin_left(&self) -> Scaled {
        Scaled { m: [self.m[0], [-self.m[1][0], -self.m[1][1]]], log: self.log }
    }
}

fn transfer(a: &DMatrix<f64>, beta: f64, h: &[f64]) -> Result<IsingMoments> {
    let n = a.nrows();
    // state 0 ↔ σ=+1, state 1 ↔ σ=−1
    let spin = [1.0, -1.0];
    let diag_const: f64 = -0.5 * beta * (0..n).map(|x| a[(x, x)]).sum::<f64>();
    let mats: Vec<Scaled> = (0..n)
        .map(|i| {
            let k = -beta * a[(i, (i + 1) % n)];
            let mut m = [[0.0; 2]; 2];
            for (s, &si) in spin.iter().enumerate() {
                let lw = if h[i].is_infinite() {
                    if h[i].signum() == si { 0.0 } else { f64::NEG_INFINITY }
                } else {
                    h[i] * si
                };
                for (t, &tj) in spin.iter().enumerate() {
                    m[s][t] = (lw + k * si * tj).exp();
                }
            }
            Scaled::identity().mul(&Scaled { m, log: 0.0 })
        })
        .collect();
    // prefix[i] = M_0..M_{i-1}, suffix[j] = M_j..M_{n-1}
    let mut prefix = vec![Scaled::identity(); n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i].mul(&mats[i]);
    }
    let mut suffix = vec![Scaled::identity(); n + 1];
    for j in (0..n).rev() {
        suffix[j] = mats[j].mul(&suffix[j + 1]);
    }
    let full = &prefix[n];
    let tr = full.trace();
    if !(tr > 0.0) {
        return Err(Error::Numerical("transfer-matrix partition function vanished".into()));
    }
    let log_z_raw = full.log + tr.ln();
    // pinned spins carry weight 1 in their allowed state, so this is the conditioned log Z
    let log_z = log_z_raw + diag_const;
    let mut mean = DVector::zeros(n);
    for i in 0..n {
        // tr(P_i S R_i)
        let w = suffix[i].mul(&prefix[i]).with_spin_left();
        mean[i] = w.trace() * (w.log - log_z_raw).exp();
    }
    let mut corr = DMatrix::identity(n, n);
    for i in 0..n {
        let mut q = Scaled::identity();
        for j in i + 1..n {
            q = q.mul(&mats[j - 1]);
            // tr(S Q S (R_j P_i))
            let wrap = suffix[j].mul(&prefix[i]);
            let inner = q.with_spin_left().mul(&wrap.with_spin_left());
            let v = inner.trace() * (inner.log - log_z_raw).exp();
            corr[(i, j)] = v;
            corr[(j, i)] = v;
        }
    }
    let mut cov = corr;
    for i in 0..n {
        for j in 0..n {
            cov[(i, j)] -= mean[i] * mean[j];
        }
    }
    for i in 0..n {
        if h[i].is_infinite() {
            for j in 0..n {
                cov[(i, j)] = 0.0;
                cov[(j, i)] = 0.0;
            }
        }
    }
    Ok(IsingMoments { mean, cov, log_z })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SusceptibilityMode {
    Rowsum,
    Spectral,
}

/// χ = sup_x Σ_y E[σ_xσ_y] (rowsum) or the top eigenvalue of the correlation matrix.
pub fn susceptibility(model: &IsingModel, mode: SusceptibilityMode) -> Result<f64> {
    if !model.has_zero_field() {
        return invalid("susceptibility is defined at zero external field");
    }
    let m = ising_moments(model, None, Method::Auto)?;
    susceptibility_of(&m.cov, mode)
}

pub fn susceptibility_of(corr: &DMatrix<f64>, mode: SusceptibilityMode) -> Result<f64> {
    match mode {
        SusceptibilityMode::Rowsum => Ok(corr.row_iter().map(|r| r.sum()).fold(f64::NEG_INFINITY, f64::max)),
        SusceptibilityMode::Spectral => Ok(Eigen::of(corr)?.max()),
    }
}

/// V_t, ∇V_t and Hess V_t of the Ising renormalised potential on the ising schedule.
#[derive(Clone, Debug)]
pub struct IsingRenorm {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    /// Σ_t(C_t^{-1}φ + h)
    pub sigma: DMatrix<f64>,
}

pub fn ising_renormalised(model: &IsingModel, sched: &Schedule, t: f64, phi: &DVector<f64>) -> Result<IsingRenorm> {
    let ScheduleKind::Ising { alpha, .. } = sched.kind else {
        return invalid("the Ising renormalised potential needs an ising schedule");
    };
    sched.check_time(t)?;
    let n = model.dim();
    let cinv = &model.coupling * t + DMatrix::identity(n, n) * (alpha - t);
    let cphi = &cinv * phi;
    let g: Vec<f64> = (0..n).map(|x| cphi[x] + model.field[x]).collect();
    let mom = moments_at(&model.coupling, t, &g, Method::Auto)?;
    let value = 0.5 * phi.dot(&cphi) + 0.5 * (alpha - t) * n as f64 - mom.log_z;
    let grad = &cphi - &cinv * &mom.mean;
    let hess = &cinv - &cinv * &mom.cov * &cinv;
    Ok(IsingRenorm { value, grad, hess, sigma: mom.cov })
}

/// All configurations (bit i set ⇔ σ_i = +1) with their probabilities; zero field only needs finite h.
pub fn configuration_weights(model: &IsingModel) -> Result<Vec<f64>> {
    let n = model.dim();
    if n > MAX_ENUMERATION || model.field.iter().any(|h| !h.is_finite()) {
        return invalid("configuration weights need N ≤ 20 and finite fields");
    }
    let a = &model.coupling;
    let mut logw: Vec<f64> = (0..1u64 << n)
        .map(|c| {
            let s: Vec<f64> = (0..n).map(|i| if (c >> i) & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let mut e = 0.0;
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    row += a[(i, j)] * s[j];
                }
                e += -0.5 * model.beta * s[i] * row + model.field[i] * s[i];
            }
            e
        })
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in logw.iter_mut() {
        *v = (*v - max).exp();
        z += *v;
    }
    for v in logw.iter_mut() {
        *v /= z;
    }
    Ok(logw)
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationCheck {
    pub models: usize,
    pub fields: usize,
    /// min over models, fields and entries of Σ(0)_{xy} − Σ(h)_{xy}
    pub min_slack: f64,
}

/// Random ferromagnet: nonnegative bond strengths on a random graph, as −J off the diagonal.
pub fn random_ferromagnet(n: usize, beta: f64, rng: &mut impl rand::Rng) -> Result<IsingModel> {
    let mut a = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in x + 1..n {
            if rng.random::<f64>() < 0.6 {
                let j = rng.random::<f64>();
                a[(x, y)] = -j;
                a[(y, x)] = -j;
            }
        }
    }
    IsingModel::new(a, beta, vec![0.0; n])
}

/// Entrywise Σ(h) ≤ Σ(0) for ferromagnets over random models and fields.
pub fn covariance_domination(models: usize, fields: usize, max_sites: usize, seed: u64) -> Result<DominationCheck> {
    use rand::{Rng, SeedableRng};
    if max_sites < 2 || max_sites > MAX_ENUMERATION {
        return invalid(format!("site count must lie in 2..={MAX_ENUMERATION}"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..models {
        let n = rng.random_range(2..=max_sites);
        let beta = rng.random_range(0.1..2.0);
        let m = random_ferromagnet(n, beta, &mut rng)?;
        let zero = moments_at(&m.coupling, m.beta, &vec![0.0; n], Method::Enumerate)?.cov;
        for _ in 0..fields {
            let h: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let cov = moments_at(&m.coupling, m.beta, &h, Method::Enumerate)?.cov;
            worst = worst.min((&zero - &cov).min());
        }
    }
    Ok(DominationCheck { models, fields, min_slack: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_spin() {
        let m = IsingModel::new(DMatrix::zeros(1, 1), 0.0, vec![0.0]).unwrap();
        let mo = ising_moments(&m, None, Method::Auto).unwrap();
        assert!(mo.mean[0].abs() < 1e-15 && (mo.cov[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pinned_pair() {
        let m = IsingModel::chain(2, 0.5, 1.0).unwrap().with_field(vec![f64::INFINITY, f64::INFINITY]);
        let mo = ising_moments(&m, None, Method::Auto).unwrap();
        assert_eq!(mo.mean.as_slice(), &[1.0, 1.0]);
        assert!(mo.cov.amax() == 0.0);
    }

    #[test]
    fn normalisation_reports_shift() {
        let raw = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        let m = IsingModel::new(raw, 0.3, vec![0.0; 2]).unwrap();
        assert!((m.normalisation.shift + 1.0).abs() < 1e-12);
        assert!((m.normalisation.scale - 2.0).abs() < 1e-12);
        assert!((m.beta - 0.6).abs() < 1e-12);
    }

    #[test]
    fn transfer_with_pins_matches_enumeration() {
        let m = IsingModel::ring(7, 0.8).unwrap();
        let h = vec![0.1, f64::INFINITY, -0.3, 0.0, f64::NEG_INFINITY, 0.2, 0.05];
        let e = moments_at(&m.coupling, m.beta, &h, Method::Enumerate).unwrap();
        let t = moments_at(&m.coupling, m.beta, &h, Method::Transfer).unwrap();
        assert!((e.mean - t.mean).amax() < 1e-12);
        assert!((&e.cov - &t.cov).amax() < 1e-12, "{}\n{}", e.cov, t.cov);
        assert!((e.log_z - t.log_z).abs() < 1e-10, "{} {}", e.log_z, t.log_z);
    }
}
