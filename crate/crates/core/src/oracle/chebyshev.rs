//! Sparse Hermitian matrices acting on blocks of vectors, and Chebyshev
//! expansions of `e^{-isH}` and of the Fermi function.

use num_complex::Complex64;
use rayon::prelude::*;

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Row-compressed Hermitian matrix.
#[derive(Clone, Debug)]
pub struct SparseHermitian {
    pub dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseHermitian {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// both triangles must be present.
    pub fn from_triplets(dim: usize, entries: &[(usize, usize, Complex64)]) -> Self {
        let mut sorted: Vec<(usize, usize, Complex64)> = entries.to_vec();
        sorted.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(sorted.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseHermitian {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dim {
            let mut centre = 0.0;
            let mut radius = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] == r {
                    centre += self.vals[k].re;
                } else {
                    radius += self.vals[k].norm();
                }
            }
            lo = lo.min(centre - radius);
            hi = hi.max(centre + radius);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// `out = alpha * (H - shift) X + beta * out` for a row-major block with
    /// `ncols` columns.
    pub fn apply_block(&self, x: &[Complex64], ncols: usize, shift: f64, alpha: f64, beta: f64, out: &mut [Complex64]) {
        let row = |r: usize, dst: &mut [Complex64]| {
            let mut acc = vec![CZERO; ncols];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                let mut v = self.vals[k];
                if c == r {
                    v -= shift;
                }
                let src = &x[c * ncols..(c + 1) * ncols];
                for (a, s) in acc.iter_mut().zip(src) {
                    *a += v * s;
                }
            }
            if beta == 0.0 {
                for (d, a) in dst.iter_mut().zip(&acc) {
                    *d = a * alpha;
                }
            } else {
                for (d, a) in dst.iter_mut().zip(&acc) {
                    *d = *d * beta + a * alpha;
                }
            }
        };
        if ncols * self.nnz() >= 1 << 16 {
            out.par_chunks_mut(ncols).enumerate().for_each(|(r, dst)| row(r, dst));
        } else {
            out.chunks_mut(ncols).enumerate().for_each(|(r, dst)| row(r, dst));
        }
    }

    pub fn to_dense(&self) -> crate::model::CMatrix {
        let mut m = crate::model::CMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }
}

/// `J_0(x), …, J_K(x)` by Miller's backward recurrence, with `K` chosen so
/// that the tail is below double precision.
pub fn bessel_j_sequence(x: f64) -> Vec<f64> {
    let ax = x.abs();
    if ax == 0.0 {
        return vec![1.0];
    }
    let kmax = (ax + 12.0 * ax.cbrt() + 25.0).ceil() as usize;
    let start = kmax + 20 + (ax.sqrt() as usize);
    let mut j = vec![0.0; start + 2];
    j[start + 1] = 0.0;
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / ax * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            // rescale to avoid overflow
            for v in j[k - 1..=start].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = j[0];
    for k in (2..=start).step_by(2) {
        norm += 2.0 * j[k];
    }
    let mut out: Vec<f64> = j[..=kmax].iter().map(|v| v / norm).collect();
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    // trim the negligible tail
    while out.len() > 1 && out.last().unwrap().abs() < 1e-18 && out.len() > ax as usize + 2 {
        out.pop();
    }
    out
}

/// Applies `e^{-i s H}` to a row-major block in place, given an interval
/// `[lo, hi]` containing the spectrum.
pub fn propagate_block(h: &SparseHermitian, bounds: (f64, f64), s: f64, x: &mut [Complex64], ncols: usize) {
    if s == 0.0 {
        return;
    }
    let centre = 0.5 * (bounds.0 + bounds.1);
    let half = 0.5 * (bounds.1 - bounds.0) * 1.01 + 1e-12;
    let coeffs = bessel_j_sequence(half * s);
    let n = x.len();
    let mut t_prev = x.to_vec();
    let mut t_cur = vec![CZERO; n];
    let mut acc: Vec<Complex64> = x.iter().map(|v| v * coeffs[0]).collect();
    if coeffs.len() > 1 {
        h.apply_block(&t_prev, ncols, centre, 1.0 / half, 0.0, &mut t_cur);
        let c1 = Complex64::new(0.0, -2.0 * coeffs[1]);
        for (a, t) in acc.iter_mut().zip(&t_cur) {
            *a += t * c1;
        }
    }
    // (-i)^k cycles through 1, -i, -1, i
    let phases = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    for (k, &ck) in coeffs.iter().enumerate().skip(2) {
        // t_prev <- 2 H' t_cur - t_prev
        h.apply_block(&t_cur, ncols, centre, 2.0 / half, -1.0, &mut t_prev);
        std::mem::swap(&mut t_prev, &mut t_cur);
        let c = phases[k % 4] * (2.0 * ck);
        for (a, t) in acc.iter_mut().zip(&t_cur) {
            *a += t * c;
        }
    }
    let global = Complex64::from_polar(1.0, -s * centre);
    for (xi, a) in x.iter_mut().zip(&acc) {
        *xi = a * global;
    }
}

/// Chebyshev coefficients of `g` on `[lo, hi]`, `count` terms.
pub fn chebyshev_coefficients<F: Fn(f64) -> f64>(g: F, bounds: (f64, f64), count: usize) -> Vec<f64> {
    let centre = 0.5 * (bounds.0 + bounds.1);
    let half = 0.5 * (bounds.1 - bounds.0);
    let nodes = 2 * count + 16;
    let samples: Vec<f64> = (0..nodes)
        .map(|i| {
            let th = std::f64::consts::PI * (i as f64 + 0.5) / nodes as f64;
            g(centre + half * th.cos())
        })
        .collect();
    (0..count)
        .map(|k| {
            let s: f64 = samples
                .iter()
                .enumerate()
                .map(|(i, v)| v * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / nodes as f64).cos())
                .sum();
            let c = 2.0 * s / nodes as f64;
            if k == 0 {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

/// `g(H) X` for a real function given by its Chebyshev coefficients.
pub fn apply_polynomial(
    h: &SparseHermitian,
    bounds: (f64, f64),
    coeffs: &[f64],
    x: &[Complex64],
    ncols: usize,
) -> Vec<Complex64> {
    let centre = 0.5 * (bounds.0 + bounds.1);
    let half = 0.5 * (bounds.1 - bounds.0);
    let n = x.len();
    let mut acc: Vec<Complex64> = x.iter().map(|v| v * coeffs[0]).collect();
    if coeffs.len() == 1 {
        return acc;
    }
    let mut t_prev = x.to_vec();
    let mut t_cur = vec![CZERO; n];
    h.apply_block(&t_prev, ncols, centre, 1.0 / half, 0.0, &mut t_cur);
    for (a, t) in acc.iter_mut().zip(&t_cur) {
        *a += t * coeffs[1];
    }
    for &ck in coeffs.iter().skip(2) {
        h.apply_block(&t_cur, ncols, centre, 2.0 / half, -1.0, &mut t_prev);
        std::mem::swap(&mut t_prev, &mut t_cur);
        for (a, t) in acc.iter_mut().zip(&t_cur) {
            *a += t * ck;
        }
    }
    acc
}

/// Number of Chebyshev terms for `f(β(E - μ))` on an interval of half-width
/// `half`: the poles at distance `π/β` from the real axis set the rate.
pub fn fermi_terms(beta: f64, half: f64) -> usize {
    let rho = (std::f64::consts::PI / (beta * half)).asinh();
    ((40.0 / rho).ceil() as usize + 20).min(200_000)
}
