//! Small dense helpers on complex matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::model::CMatrix;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Fermi function `1/(1+e^x)` without overflow.
pub fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

pub fn singular_values(m: &CMatrix) -> DVector<f64> {
    m.clone().singular_values()
}

pub fn sigma_min(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    singular_values(m).iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    if h.iter().all(|z| z.im == 0.0) {
        let eig = h.map(|z| z.re).symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(h.nrows(), order.len(), |r, c| {
            Complex64::new(eig.eigenvectors[(r, order[c])], 0.0)
        });
        return (values, vectors);
    }
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(h.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `F(h) = V diag(f(λ)) V†` for Hermitian `h`.
pub fn hermitian_function<F: Fn(f64) -> Complex64>(h: &CMatrix, f: F) -> CMatrix {
    let (values, v) = hermitian_eigen(h);
    let mut scaled = v.clone();
    for (c, &lam) in values.iter().enumerate() {
        let fl = f(lam);
        scaled.column_mut(c).iter_mut().for_each(|z| *z *= fl);
    }
    scaled * v.adjoint()
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Determinant of a matrix whose entries are real up to rounding.
pub fn real_determinant(m: &CMatrix) -> f64 {
    m.map(|z| z.re).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fermi_limits() {
        assert_eq!(fermi(0.0), 0.5);
        assert!(fermi(800.0) >= 0.0 && fermi(800.0) < 1e-300);
        assert_eq!(fermi(-800.0), 1.0);
        assert!((fermi(1.3) + fermi(-1.3) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn matrix_function_reproduces_inverse() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.3, 0.4),
                Complex64::new(0.3, -0.4),
                Complex64::new(-0.5, 0.0),
            ],
        );
        let inv = hermitian_function(&h, |x| Complex64::new(1.0 / x, 0.0));
        let id = &h * inv;
        assert!((id - CMatrix::identity(2, 2)).camax() < 1e-14);
        let (vals, _) = hermitian_eigen(&h);
        assert!(vals[0] < vals[1]);
    }

    #[test]
    fn smallest_singular_value() {
        let m = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, Complex64::new(0.0, 1e-9)]);
        assert!((sigma_min(&m) - 1e-9).abs() < 1e-20);
    }
}
