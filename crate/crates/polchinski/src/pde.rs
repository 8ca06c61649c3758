//! Explicit finite-difference solver for ∂_t V = κ(t)[η V″ − ½ (V′)²] on a 1-D grid.

use crate::error::{invalid, Error, Result};
use crate::lattice::Schedule;
use crate::potential::Potential;

#[derive(Clone, Debug)]
pub struct PdeGrid1d {
    pub lo: f64,
    pub step: f64,
    pub values: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    pub steps: usize,
}

impl PdeGrid1d {
    pub fn x(&self, i: usize) -> f64 {
        self.lo + self.step * i as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index range of the central `fraction` of the grid.
    pub fn inner(&self, fraction: f64) -> std::ops::Range<usize> {
        let n = self.len();
        let cut = ((1.0 - fraction) * 0.5 * (n - 1) as f64).ceil() as usize;
        cut..n - cut
    }
}

/// Smallest R with V(±R) − min V ≥ log(1e30), so e^{−V} is negligible beyond.
pub fn choose_radius(v: &Potential) -> f64 {
    let floor = v.check_bounded_below(10.0, 2001).unwrap_or(0.0);
    let target = 30.0 * std::f64::consts::LN_10;
    let mut r = 1.0;
    while r < 1e3 {
        if v.value(r) - floor >= target && v.value(-r) - floor >= target {
            return r;
        }
        r *= 1.02;
    }
    r
}

/// Step-size bound h²/(2ηκ) and the advective bound h/(κ max|V′|).
pub fn stable_dt(h: f64, viscosity: f64, kappa_max: f64, grad_max: f64) -> f64 {
    let diff = if viscosity > 0.0 { h * h / (2.0 * viscosity * kappa_max) } else { f64::INFINITY };
    let adv = if grad_max > 0.0 { h / (kappa_max * grad_max) } else { f64::INFINITY };
    diff.min(adv)
}

pub struct ViscousHj<'a> {
    pub kappa: &'a dyn Fn(f64) -> f64,
    pub viscosity: f64,
}

impl ViscousHj<'_> {
    fn rhs(&self, t: f64, v: &[f64], h: f64, out: &mut [f64]) {
        let k = (self.kappa)(t);
        let n = v.len();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        let inv_h2 = 1.0 / (h * h);
        let inv_2h = 0.5 / h;
        for i in 1..n - 1 {
            let lap = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_h2;
            let g = (v[i + 1] - v[i - 1]) * inv_2h;
            out[i] = k * (self.viscosity * lap - 0.5 * g * g);
        }
    }

    /// Heun steps from the initial grid to t_end; `dt` defaults to 0.9 of the stability bound.
    pub fn solve(&self, lo: f64, step: f64, init: Vec<f64>, t0: f64, t_end: f64, dt: Option<f64>) -> Result<PdeGrid1d> {
        let n = init.len();
        if n < 5 {
            return invalid("PDE grid needs at least 5 points");
        }
        if !(self.viscosity > 0.0) {
            return invalid("zero viscosity: use the Hopf–Lax solver");
        }
        let samples = 64;
        let kappa_max = (0..=samples)
            .map(|i| (self.kappa)(t0 + (t_end - t0) * i as f64 / samples as f64).abs())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let grad_max = init.windows(2).map(|w| ((w[1] - w[0]) / step).abs()).fold(0.0f64, f64::max);
        let bound = stable_dt(step, self.viscosity, kappa_max, grad_max);
        let dt_req = dt.unwrap_or(0.9 * bound);
        let steps = ((t_end - t0) / dt_req).ceil().max(1.0) as usize;
        let dt = (t_end - t0) / steps as f64;
        let mut v = init;
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for s in 0..steps {
            let t = t0 + dt * s as f64;
            self.rhs(t, &v, step, &mut k1);
            for i in 0..n {
                tmp[i] = v[i] + dt * k1[i];
            }
            extrapolate(&mut tmp);
            self.rhs(t + dt, &tmp, step, &mut k2);
            for i in 0..n {
                v[i] += 0.5 * dt * (k1[i] + k2[i]);
            }
            extrapolate(&mut v);
            if s % 64 == 0 || s + 1 == steps {
                if v.iter().any(|x| !x.is_finite() || x.abs() > 1e100) {
                    return Err(Error::Unstable(format!(
                        "explicit scheme exploded at t={:.4}: dt={dt:.3e} violates the bound dt ≤ {bound:.3e} \
                         (h={step:.3e}, max κ={kappa_max:.3e}, viscosity={})",
                        t + dt,
                        self.viscosity
                    )));
                }
            }
        }
        Ok(PdeGrid1d { lo, step, values: v, t: t_end, dt, steps })
    }
}

/// Quadratic extrapolation into the two boundary nodes.
fn extrapolate(v: &mut [f64]) {
    let n = v.len();
    v[0] = 3.0 * v[1] - 3.0 * v[2] + v[3];
    v[n - 1] = 3.0 * v[n - 2] - 3.0 * v[n - 3] + v[n - 4];
}

/// Polchinski equation ∂_t V = ½ ċ V″ − ½ ċ (V′)² for a single-site schedule.
pub fn polchinski_pde_solve_1d(
    v0: &Potential,
    sched: &Schedule,
    radius: f64,
    points: usize,
    t_end: f64,
) -> Result<PdeGrid1d> {
    if sched.dim() != 1 {
        return invalid("the 1-D PDE solver needs a single-site schedule");
    }
    sched.check_time(t_end)?;
    let a = sched.coupling.eigen.values[0];
    let kappa = |t: f64| sched.mode(a, t).1;
    let step = 2.0 * radius / (points - 1) as f64;
    let init: Vec<f64> = (0..points).map(|i| v0.value(-radius + step * i as f64)).collect();
    ViscousHj { kappa: &kappa, viscosity: 0.5 }.solve(-radius, step, init, 0.0, t_end, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stays_constant() {
        let s = Schedule::unit_1d(1.0);
        let g = polchinski_pde_solve_1d(&Potential::Zero, &s, 3.0, 101, 0.5).unwrap();
        assert!(g.values.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn oversized_step_reports_bound() {
        let kappa = |_t: f64| 1.0;
        let init: Vec<f64> = (0..201).map(|i| {
            let x = -2.0 + 0.02 * i as f64;
            0.5 * x * x
        }).collect();
        let e = ViscousHj { kappa: &kappa, viscosity: 0.5 }.solve(-2.0, 0.02, init, 0.0, 1.0, Some(0.01)).unwrap_err();
        assert!(e.to_string().contains("bound"), "{e}");
    }
}
