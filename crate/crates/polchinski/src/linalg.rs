//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigen {
    pub fn of(m: &DMatrix<f64>) -> Result<Eigen> {
        if m.nrows() != m.ncols() {
            return Err(Error::Invalid("matrix not square".into()));
        }
        let sym = (m + m.transpose()) * 0.5;
        let e = SymmetricEigen::new(sym);
        if e.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("eigen-decomposition produced non-finite values".into()));
        }
        // ascending order
        let n = m.nrows();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| e.eigenvalues[a].partial_cmp(&e.eigenvalues[b]).unwrap());
        let values = DVector::from_iterator(n, idx.iter().map(|&i| e.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (k, &i) in idx.iter().enumerate() {
            vectors.set_column(k, &e.eigenvectors.column(i));
        }
        Ok(Eigen { values, vectors })
    }

    /// V diag(f(λ)) Vᵀ
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let d: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        self.from_diag(&d)
    }

    pub fn from_diag(&self, d: &[f64]) -> DMatrix<f64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            for i in 0..n {
                scaled[(i, j)] *= d[j];
            }
        }
        scaled * self.vectors.transpose()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

pub fn sym_max_eig(m: &DMatrix<f64>) -> Result<f64> {
    Ok(Eigen::of(m)?.max())
}

pub fn sym_min_eig(m: &DMatrix<f64>) -> Result<f64> {
    Ok(Eigen::of(m)?.min())
}

pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = Eigen::of(m)?;
    if e.min() < -1e-10 * e.max().abs().max(1.0) {
        return Err(Error::Numerical(format!("square root of non-PSD matrix (min eig {})", e.min())));
    }
    Ok(e.apply_fn(|x| x.max(0.0).sqrt()))
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular matrix".into()))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= tol * scale
}

/// Dense matrix exponential by scaling and squaring with a Taylor polynomial.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.amax() * n as f64;
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m / 2f64.powi(s);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// φ₁(X) = Σ Xᵏ/(k+1)!, read off the exponential of an augmented block matrix.
pub fn phi1(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(m);
    for i in 0..n {
        big[(i, n + i)] = 1.0;
    }
    expm(&big).view((0, n), (n, n)).into_owned()
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_matches_eigen_route() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let e = Eigen::of(&a).unwrap();
        let via_eig = e.apply_fn(|x| (-0.7 * x).exp());
        let dense = expm(&(-0.7 * &a));
        assert!(max_abs_diff(&via_eig, &dense) < 1e-13);
    }

    #[test]
    fn phi1_scalar() {
        let x = DMatrix::from_element(1, 1, -0.3);
        let v = phi1(&x)[(0, 0)];
        assert!((v - (1.0 - (-0.3f64).exp()) / 0.3).abs() < 1e-14);
    }
}
