//! Continuous-spin Gibbs measures H(φ) = ½(φ, Aφ) + w Σ_x V(φ_x).

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::lattice::{Coupling, Torus};
use crate::linalg;
use crate::potential::Potential;

#[derive(Clone, Debug)]
pub struct ContinuousModel {
    pub geometry: Option<Torus>,
    pub coupling: Coupling,
    pub potential: Potential,
    /// ε^d in the continuum convention, 1 on the unit lattice.
    pub weight: f64,
}

impl ContinuousModel {
    pub fn new(coupling: Coupling, potential: Potential) -> ContinuousModel {
        ContinuousModel { geometry: None, coupling, potential, weight: 1.0 }
    }

    pub fn single_site(a: f64, potential: Potential) -> ContinuousModel {
        Self::new(Coupling::scalar(a), potential)
    }

    pub fn on_lattice(geometry: Torus, coupling: Coupling, potential: Potential) -> ContinuousModel {
        ContinuousModel { weight: 1.0, geometry: Some(geometry), coupling, potential }
    }

    pub fn dim(&self) -> usize {
        self.coupling.dim()
    }

    /// Local part V₀(φ) = w Σ V(φ_x).
    pub fn local_value(&self, phi: &[f64]) -> f64 {
        self.weight * phi.iter().map(|&x| self.potential.value(x)).sum::<f64>()
    }

    pub fn energy_grad_hess(&self, phi: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = self.dim();
        if phi.len() != n {
            return invalid(format!("field has {} entries, model has {n} sites", phi.len()));
        }
        let a = &self.coupling.matrix;
        let aphi = a * phi;
        let mut h = 0.5 * phi.dot(&aphi);
        let mut g = aphi;
        let mut hess = a.clone();
        for x in 0..n {
            let (v, d1, d2) = self.potential.eval(phi[x]);
            if !(v.is_finite() && d1.is_finite() && d2.is_finite()) {
                return Err(Error::Invalid(format!(
                    "potential evaluated outside its domain at φ={} (site {x})",
                    phi[x]
                )));
            }
            h += self.weight * v;
            g[x] += self.weight * d1;
            hess[(x, x)] += self.weight * d2;
        }
        Ok((h, g, hess))
    }
}

/// Lattice Green function G = ε^{-d}(−Δ^ε + m²)^{-1}, the kernel of the inverse w.r.t. ε^d Σ.
pub fn green_function(geom: &Torus, mass2: f64) -> Result<DMatrix<f64>> {
    if !(mass2 > 0.0) {
        return invalid(format!("mass² must be positive, got {mass2}"));
    }
    let lap = geom.laplacian();
    let n = lap.dim();
    let m = &lap.matrix + DMatrix::identity(n, n) * mass2;
    Ok(linalg::inverse(&m)? / geom.volume_element())
}

/// a(g, m²) = −3g G(0,0) + 6g² ε^d Σ_x |G(0,x)|³.
pub fn counterterm(g: f64, mass2: f64, geom: &Torus) -> Result<f64> {
    let (first, second) = counterterm_parts(g, mass2, geom)?;
    Ok(first + second)
}

/// The two terms of the counterterm, separately.
pub fn counterterm_parts(g: f64, mass2: f64, geom: &Torus) -> Result<(f64, f64)> {
    let green = green_function(geom, mass2)?;
    let first = -3.0 * g * green[(0, 0)];
    let l3: f64 = green.row(0).iter().map(|v| v.abs().powi(3)).sum::<f64>() * geom.volume_element();
    Ok((first, 6.0 * g * g * l3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_torus;

    #[test]
    fn quadratic_gradient_is_field() {
        let m = ContinuousModel::new(Coupling::identity(3, 1.0), Potential::Zero);
        let phi = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let (_, g, _) = m.energy_grad_hess(&phi).unwrap();
        assert!((g - &phi).amax() < 1e-15);
    }

    #[test]
    fn counterterm_vanishes_without_coupling() {
        let t = build_torus(1, 4.0, 1.0).unwrap();
        assert_eq!(counterterm(0.0, 1.0, &t).unwrap(), 0.0);
    }

    #[test]
    fn tabulated_out_of_grid_is_error() {
        let s = crate::potential::Spline::new(vec![-1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0]).unwrap();
        let m = ContinuousModel::single_site(1.0, Potential::Tabulated(s));
        assert!(m.energy_grad_hess(&DVector::from_vec(vec![2.0])).is_err());
    }
}
