//! Metropolis-adjusted Langevin with burn-in step tuning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::stats;

pub const TARGET_ACCEPTANCE: f64 = 0.574;
pub const MIN_ACCEPTANCE: f64 = 0.1;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MalaConfig {
    pub step: f64,
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for MalaConfig {
    fn default() -> Self {
        MalaConfig { step: 0.5, burn_in: 2000, samples: 10_000, thin: 1, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct MalaRun {
    pub dim: usize,
    /// Row-major, `samples × dim`.
    pub samples: Vec<f64>,
    pub acceptance: f64,
    pub step: f64,
    pub retuned: bool,
}

impl MalaRun {
    pub fn len(&self) -> usize {
        self.samples.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.samples.iter().skip(i).step_by(self.dim).copied().collect()
    }
}

/// Target given as x ↦ (log density, ∇ log density).
pub trait LogTarget: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl<F> LogTarget for (usize, F)
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Sync,
{
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        (self.1)(x)
    }
}

struct State {
    x: Vec<f64>,
    logp: f64,
    grad: Vec<f64>,
}

fn log_q(to: &[f64], from: &State, step: f64) -> f64 {
    // proposal N(from + (h/2)∇, h)
    let mut s = 0.0;
    for i in 0..to.len() {
        let m = from.x[i] + 0.5 * step * from.grad[i];
        s += (to[i] - m).powi(2);
    }
    -s / (2.0 * step)
}

fn mh_step(target: &dyn LogTarget, cur: &mut State, step: f64, rng: &mut ChaCha8Rng) -> Result<bool> {
    let n = cur.x.len();
    let prop: Vec<f64> = (0..n)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            cur.x[i] + 0.5 * step * cur.grad[i] + step.sqrt() * z
        })
        .collect();
    let (lp, g) = target.eval(&prop)?;
    let u: f64 = rng.random();
    if !lp.is_finite() {
        return Ok(false);
    }
    let next = State { x: prop, logp: lp, grad: g };
    let log_ratio = next.logp - cur.logp + log_q(&cur.x, &next, step) - log_q(&next.x, cur, step);
    if u.ln() < log_ratio {
        *cur = next;
        Ok(true)
    } else {
        Ok(false)
    }
}

fn tune(target: &dyn LogTarget, cur: &mut State, mut step: f64, iters: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    for k in 0..iters {
        let acc = mh_step(target, cur, step, rng)?;
        let gain = 1.0 / (1.0 + k as f64).sqrt();
        step *= (gain * ((acc as u8 as f64) - TARGET_ACCEPTANCE)).exp();
        step = step.clamp(1e-8, 1e4);
    }
    Ok(step)
}

fn collect(target: &dyn LogTarget, cur: &mut State, step: f64, cfg: &MalaConfig, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> {
    let thin = cfg.thin.max(1);
    let mut out = Vec::with_capacity(cfg.samples * cur.x.len());
    let mut accepted = 0usize;
    for _ in 0..cfg.samples {
        for _ in 0..thin {
            accepted += mh_step(target, cur, step, rng)? as usize;
        }
        out.extend_from_slice(&cur.x);
    }
    Ok((out, accepted as f64 / (cfg.samples * thin) as f64))
}

/// One chain; step tuned towards 0.574 during burn-in, retuned once if acceptance falls below 0.1.
pub fn mala(target: &dyn LogTarget, x0: &[f64], cfg: &MalaConfig) -> Result<MalaRun> {
    if x0.len() != target.dim() || cfg.samples == 0 {
        return invalid("MALA needs a start point of the target dimension and at least one sample");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (logp, grad) = target.eval(x0)?;
    if !logp.is_finite() {
        return Err(Error::Numerical("MALA start point has zero density".into()));
    }
    let mut cur = State { x: x0.to_vec(), logp, grad };
    let step = tune(target, &mut cur, cfg.step, cfg.burn_in, &mut rng)?;
    let (samples, acceptance) = collect(target, &mut cur, step, cfg, &mut rng)?;
    if acceptance >= MIN_ACCEPTANCE {
        return Ok(MalaRun { dim: x0.len(), samples, acceptance, step, retuned: false });
    }
    let step = tune(target, &mut cur, step * 0.25, cfg.burn_in.max(1000), &mut rng)?;
    let (samples, acceptance) = collect(target, &mut cur, step, cfg, &mut rng)?;
    if acceptance < MIN_ACCEPTANCE {
        return Err(Error::Numerical(format!("MALA acceptance {acceptance:.3} below {MIN_ACCEPTANCE} after retuning")));
    }
    Ok(MalaRun { dim: x0.len(), samples, acceptance, step, retuned: true })
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainSummary {
    pub mean: f64,
    pub stderr: f64,
    pub rhat: f64,
    pub iat: f64,
    pub acceptance: f64,
}

/// Summary of a scalar observable over several chains, stderr inflated by the autocorrelation time.
pub fn summarise(chains: &[Vec<f64>], acceptance: f64) -> ChainSummary {
    let all: Vec<f64> = chains.iter().flatten().copied().collect();
    let iat = chains.iter().map(|c| stats::integrated_autocorr_time(c)).sum::<f64>() / chains.len() as f64;
    let me = stats::mean_stderr(&all);
    ChainSummary { mean: me.mean, stderr: me.stderr * iat.sqrt(), rhat: stats::rhat(chains), iat, acceptance }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_moments() {
        let t = (1usize, |x: &[f64]| Ok((-0.5 * x[0] * x[0], vec![-x[0]])));
        let run = mala(&t, &[3.0], &MalaConfig { samples: 20_000, seed: 7, ..Default::default() }).unwrap();
        let xs = run.coordinate(0);
        let s = summarise(&[xs.clone()], run.acceptance);
        assert!(s.mean.abs() < 4.0 * s.stderr + 1e-3, "{s:?}");
        let v = stats::variance(&xs);
        assert!((v - 1.0).abs() < 0.1, "{v}");
        assert!(run.acceptance > 0.4);
    }
}
