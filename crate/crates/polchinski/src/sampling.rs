//! Samplers for 1-D densities on a grid and for the renormalised measure ν_t.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::Schedule;
use crate::linalg::{self, Eigen};
use crate::mcmc::{self, MalaConfig};
use crate::model::ContinuousModel;
use crate::renorm::{self, Backend, Table1d};

/// Piecewise-constant density on equal cells; exact inverse CDF.
#[derive(Clone, Debug)]
pub struct GridSampler1d {
    pub lo: f64,
    pub step: f64,
    /// Cumulative mass at cell boundaries, normalised to end at 1.
    cdf: Vec<f64>,
}

impl GridSampler1d {
    pub fn new(log_density: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Result<GridSampler1d> {
        if !(hi > lo) || cells < 2 {
            return invalid("grid sampler needs lo < hi and at least two cells");
        }
        let step = (hi - lo) / cells as f64;
        // Simpson mass per cell
        let logs: Vec<f64> = (0..=2 * cells).map(|i| log_density(lo + 0.5 * step * i as f64)).collect();
        let shift = logs.iter().cloned().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(Error::Numerical("density vanishes on the whole grid".into()));
        }
        let w: Vec<f64> = logs.iter().map(|l| (l - shift).exp()).collect();
        let mut cdf = Vec::with_capacity(cells + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for c in 0..cells {
            acc += (w[2 * c] + 4.0 * w[2 * c + 1] + w[2 * c + 2]) / 6.0;
            cdf.push(acc);
        }
        for v in cdf.iter_mut() {
            *v /= acc;
        }
        Ok(GridSampler1d { lo, step, cdf })
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.step * (self.cdf.len() - 1) as f64
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi() {
            return 1.0;
        }
        let u = (x - self.lo) / self.step;
        let i = u.floor() as usize;
        let f = u - i as f64;
        self.cdf[i] + f * (self.cdf[i + 1] - self.cdf[i])
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c < p).clamp(1, self.cdf.len() - 1);
        let (a, b) = (self.cdf[i - 1], self.cdf[i]);
        let f = if b > a { (p - a) / (b - a) } else { 0.5 };
        self.lo + self.step * ((i - 1) as f64 + f)
    }

    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.quantile(rng.random::<f64>())).collect()
    }

    /// Mean and variance of the piecewise-constant density.
    pub fn moments(&self) -> (f64, f64) {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for i in 0..self.cdf.len() - 1 {
            let p = self.cdf[i + 1] - self.cdf[i];
            let (a, b) = (self.lo + self.step * i as f64, self.lo + self.step * (i + 1) as f64);
            m1 += p * 0.5 * (a + b);
            m2 += p * (a * a + a * b + b * b) / 3.0;
        }
        (m1, m2 - m1 * m1)
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMethod {
    Gaussian,
    PointMass,
    Grid,
    Mala,
}

#[derive(Clone, Debug, Serialize)]
pub struct RenormSamples {
    pub dim: usize,
    /// Row-major, `count × dim`.
    #[serde(skip)]
    pub samples: Vec<f64>,
    pub method: SampleMethod,
    pub acceptance: Option<f64>,
    pub iat: Option<f64>,
}

impl RenormSamples {
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.samples.iter().skip(i).step_by(self.dim).copied().collect()
    }
}

/// 1-D log density of ν_t: −V_t(φ) − φ²/(2k), k = c_∞ − c_t.
pub fn renorm_measure_grid(model: &ContinuousModel, sched: &Schedule, t: f64, cells: usize) -> Result<GridSampler1d> {
    if model.dim() != 1 {
        return invalid("grid sampling of ν_t needs a single-site model");
    }
    let k = sched.c_inf()?[(0, 0)] - sched.eval(t)?.c[(0, 0)];
    if !(k > 0.0) {
        return invalid("ν_t is a point mass at this time");
    }
    let r = 10.0 * k.sqrt() + 1.0;
    let r = r.min(12.0 * k.sqrt().max(1.0));
    if t == 0.0 {
        return GridSampler1d::new(|x| -model.potential.value(x) * model.weight - x * x / (2.0 * k), -r, r, cells);
    }
    let table = Table1d::build(model, sched, t, -r, r, 801, renorm::DEFAULT_ORDER * 2)?;
    GridSampler1d::new(|x| -table.value_at(x) - x * x / (2.0 * k), -r, r, cells)
}

/// Samples of ν_t: exact Gaussian for V₀ = 0, inverse CDF in 1-D, MALA otherwise.
pub fn renorm_measure_sample(
    model: &ContinuousModel,
    sched: &Schedule,
    t: f64,
    count: usize,
    seed: u64,
) -> Result<RenormSamples> {
    let n = model.dim();
    let k = &sched.c_inf()? - &sched.eval(t)?.c;
    let ek = Eigen::of(&k)?;
    if ek.max() <= 1e-14 {
        return Ok(RenormSamples { dim: n, samples: vec![0.0; n * count], method: SampleMethod::PointMass, acceptance: None, iat: None });
    }
    if model.potential.is_zero() {
        let root = linalg::sym_sqrt(&k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n * count);
        for _ in 0..count {
            let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
            out.extend((&root * z).iter());
        }
        return Ok(RenormSamples { dim: n, samples: out, method: SampleMethod::Gaussian, acceptance: None, iat: None });
    }
    if n == 1 {
        let g = renorm_measure_grid(model, sched, t, 20_000)?;
        return Ok(RenormSamples { dim: 1, samples: g.sample(count, seed), method: SampleMethod::Grid, acceptance: None, iat: None });
    }
    if ek.min() <= 1e-12 * ek.max() {
        return Err(Error::Unsupported("MALA on ν_t needs C_∞ − C_t nondegenerate".into()));
    }
    let kinv = ek.apply_fn(|v| 1.0 / v);
    let backend = if n <= 2 { Backend::Quadrature { order: None } } else { Backend::MonteCarlo { samples: 4000, seed } };
    let target = (n, |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let xv = DVector::from_column_slice(x);
        let kx = &kinv * &xv;
        let (v, g) = if t == 0.0 {
            let (_, g, _) = model.energy_grad_hess(&xv)?;
            let g0 = g - &model.coupling.matrix * &xv;
            (model.local_value(x), g0)
        } else {
            let r = renorm::tilt_with(model, &sched.eval(t)?.c, x, backend)?;
            (-r.log_mass, r.mean_grad)
        };
        Ok((-v - 0.5 * xv.dot(&kx), (-(g + kx)).iter().copied().collect()))
    });
    let cfg = MalaConfig { step: 0.1 * ek.min(), burn_in: 1000, samples: count, thin: 1, seed };
    let run = mcmc::mala(&target, &vec![0.0; n], &cfg)?;
    let iat = (0..n).map(|i| crate::stats::integrated_autocorr_time(&run.coordinate(i))).fold(1.0, f64::max);
    Ok(RenormSamples { dim: n, samples: run.samples, method: SampleMethod::Mala, acceptance: Some(run.acceptance), iat: Some(iat) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    #[test]
    fn gaussian_grid_moments() {
        let g = GridSampler1d::new(|x| -0.5 * x * x, -10.0, 10.0, 4000).unwrap();
        let (m, v) = g.moments();
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-4, "{m} {v}");
        assert!((g.quantile(g.cdf(0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn free_field_pass_through() {
        let m = ContinuousModel::single_site(1.0, Potential::Zero);
        let s = Schedule::unit_1d(1.0);
        let r = renorm_measure_sample(&m, &s, 0.5, 10, 1).unwrap();
        assert!(matches!(r.method, SampleMethod::Gaussian));
        let end = renorm_measure_sample(&m, &s, 1.0, 3, 1).unwrap();
        assert!(end.samples.iter().all(|v| *v == 0.0));
    }
}
