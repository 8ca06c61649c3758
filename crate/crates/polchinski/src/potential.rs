//! Single-site potentials V and their first two derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    /// ½ m φ²
    Quadratic { m: f64 },
    /// g/4 φ⁴ + ½(r + counterterm) φ²
    Phi4 {
        g: f64,
        r: f64,
        #[serde(default)]
        counterterm: f64,
    },
    /// 2z ε^{−β/4π} cos(√β φ)
    SineGordon { z: f64, beta: f64, eps: f64 },
    /// scale·(φ² − 1)²
    DoubleWell { scale: f64 },
    /// Natural cubic spline through the given nodes.
    Tabulated(Spline),
}

impl Potential {
    pub fn double_well(scale: f64) -> Potential {
        Potential::DoubleWell { scale }
    }

    pub fn quadratic(m: f64) -> Potential {
        Potential::Quadratic { m }
    }

    pub fn phi4(g: f64, r: f64) -> Potential {
        Potential::Phi4 { g, r, counterterm: 0.0 }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.eval(x).2
    }

    /// (V, V′, V″); NaN outside a tabulated grid.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match self {
            Potential::Zero => (0.0, 0.0, 0.0),
            Potential::Quadratic { m } => (0.5 * m * x * x, m * x, *m),
            Potential::Phi4 { g, r, counterterm } => {
                let q = r + counterterm;
                let x2 = x * x;
                (0.25 * g * x2 * x2 + 0.5 * q * x2, g * x2 * x + q * x, 3.0 * g * x2 + q)
            }
            Potential::SineGordon { z, beta, eps } => {
                let amp = 2.0 * z * eps.powf(-beta / (4.0 * std::f64::consts::PI));
                let k = beta.sqrt();
                let (s, c) = (k * x).sin_cos();
                (amp * c, -amp * k * s, -amp * k * k * c)
            }
            Potential::DoubleWell { scale } => {
                let u = x * x - 1.0;
                (scale * u * u, 4.0 * scale * x * u, scale * (12.0 * x * x - 4.0))
            }
            Potential::Tabulated(s) => s.eval(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Potential::Zero => true,
            Potential::Quadratic { m } => *m == 0.0,
            Potential::Phi4 { g, r, counterterm } => *g == 0.0 && r + counterterm == 0.0,
            Potential::SineGordon { z, .. } => *z == 0.0,
            Potential::DoubleWell { scale } => *scale == 0.0,
            Potential::Tabulated(_) => false,
        }
    }

    /// Curvature m when V is exactly ½mφ².
    pub fn quadratic_curvature(&self) -> Option<f64> {
        match self {
            Potential::Zero => Some(0.0),
            Potential::Quadratic { m } => Some(*m),
            Potential::Phi4 { g, r, counterterm } if *g == 0.0 => Some(r + counterterm),
            Potential::DoubleWell { scale } if *scale == 0.0 => Some(0.0),
            Potential::SineGordon { z, .. } if *z == 0.0 => Some(0.0),
            _ => None,
        }
    }

    /// Known global lower bound of V″, when available in closed form.
    pub fn inf_d2(&self) -> Option<f64> {
        match self {
            Potential::Zero => Some(0.0),
            Potential::Quadratic { m } => Some(*m),
            Potential::Phi4 { g, r, counterterm } if *g >= 0.0 => Some(r + counterterm),
            Potential::SineGordon { z, beta, eps } => {
                Some(-(2.0 * z * eps.powf(-beta / (4.0 * std::f64::consts::PI))).abs() * beta)
            }
            Potential::DoubleWell { scale } if *scale >= 0.0 => Some(-4.0 * scale),
            _ => None,
        }
    }

    pub fn is_convex(&self) -> bool {
        self.inf_d2().map(|v| v >= 0.0).unwrap_or(false)
    }

    /// Grid scan of V on [−r, r]: returns the minimum found, or an error if V is not finite there.
    pub fn check_bounded_below(&self, r: f64, points: usize) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for i in 0..points {
            let x = -r + 2.0 * r * i as f64 / (points - 1) as f64;
            let v = self.value(x);
            if !v.is_finite() {
                return invalid(format!("potential not finite at {x}"));
            }
            lo = lo.min(v);
        }
        Ok(lo)
    }
}

/// Natural cubic spline on strictly increasing nodes.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Spline {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(skip)]
    m: Vec<f64>,
}

impl Spline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Spline> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return invalid("spline needs at least 3 nodes and matching values");
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("spline nodes must be strictly increasing");
        }
        let mut s = Spline { x, y, m: vec![] };
        s.solve();
        Ok(s)
    }

    fn solve(&mut self) {
        // second derivatives via the tridiagonal system, natural ends
        let (x, y) = (&self.x, &self.y);
        let n = x.len();
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let cc = h1 / 6.0;
            let r = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            let denom = b - a * c[i - 1];
            c[i] = cc / denom;
            d[i] = (r - a * d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        self.m = m;
    }

    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        if self.m.len() != self.x.len() {
            // deserialised without coefficients
            let mut s = self.clone();
            s.solve();
            return s.eval(t);
        }
        let n = self.x.len();
        if !(t >= self.x[0] && t <= self.x[n - 1]) {
            return (f64::NAN, f64::NAN, f64::NAN);
        }
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dv = (y1 - y0) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let d2 = a * m0 + b * m1;
        (v, dv, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi4_derivative() {
        assert_eq!(Potential::phi4(1.0, 0.0).d1(2.0), 8.0);
    }

    #[test]
    fn double_well_critical_point() {
        assert_eq!(Potential::double_well(1.0).d1(1.0), 0.0);
    }

    #[test]
    fn spline_reproduces_cubic_interior() {
        let xs: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let s = Spline::new(xs, ys).unwrap();
        let (v, d, _) = s.eval(0.33);
        assert!((v - 0.33f64.sin()).abs() < 1e-5);
        assert!((d - 0.33f64.cos()).abs() < 1e-4);
        assert!(s.eval(3.0).0.is_nan());
    }
}
