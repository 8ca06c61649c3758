//! Gauss–Hermite and Gauss–Legendre rules.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

#[derive(Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Physicists' Gauss–Hermite rule: ∫ e^{−x²} f(x) dx ≈ Σ wᵢ f(xᵢ).
pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return r.clone();
    }
    let r = Arc::new(hermite_rule(n));
    cache.lock().unwrap().insert(n, r.clone());
    r
}

fn hermite_rule(n: usize) -> Rule {
    assert!((1..=400).contains(&n), "Gauss–Hermite order {n} unsupported");
    // Jacobi-matrix eigenvalues as starting points, then Newton on the orthonormal recurrence.
    let jac = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = jac.symmetric_eigenvalues().iter().cloned().collect();
    guesses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for (i, &g) in guesses.iter().enumerate() {
        let mut z = g;
        let mut pp = 1.0;
        for _ in 0..50 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / (pp * pp);
    }
    Rule { nodes: x, weights: w }
}

/// Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return r.clone();
    }
    let r = Arc::new(legendre_rule(n));
    cache.lock().unwrap().insert(n, r.clone());
    r
}

fn legendre_rule(n: usize) -> Rule {
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    Rule { nodes: x, weights: w }
}

/// ∫_a^b f by an n-point Gauss–Legendre rule.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let r = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    r.nodes.iter().zip(&r.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        for n in [20, 80, 160, 320] {
            let r = gauss_hermite(n);
            let pi = std::f64::consts::PI;
            let m0: f64 = r.weights.iter().sum();
            let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
            let m4: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(4)).sum();
            assert!((m0 - pi.sqrt()).abs() < 1e-13, "n={n} m0={m0}");
            assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-13);
            assert!((m4 - 0.75 * pi.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn legendre_polynomial_exactness() {
        let v = integrate(|x| x.powi(9) + 3.0 * x * x, 0.0, 2.0, 6);
        assert!((v - (1024.0 / 10.0 + 8.0)).abs() < 1e-12);
    }
}
