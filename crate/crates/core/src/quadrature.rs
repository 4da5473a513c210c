//! Vector-valued double-exponential (tanh-sinh) quadrature.
//!
//! One integrand call fills every component, so a single resolvent solve
//! serves all currents or all matrix entries at once. Integration domains are
//! split at caller-supplied breakpoints and each piece is refined by level
//! halving, then by bisection if a level budget runs out.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Absolute tolerance on the max-norm of the integral vector.
    pub abs_tol: f64,
    /// Levels of step halving before a piece is bisected.
    pub max_level: u32,
    /// Bisection depth before giving up.
    pub max_depth: u32,
    /// Pieces longer than this are cut into equal panels (oscillatory integrands).
    pub max_panel: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-10,
            max_level: 7,
            max_depth: 14,
            max_panel: None,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tol(abs_tol: f64) -> Self {
        QuadratureSpec {
            abs_tol,
            ..Default::default()
        }
    }

    /// Panels no longer than `π / |t|` for integrands carrying `e^{-itE}`.
    pub fn for_phase(mut self, t: f64) -> Self {
        if t.abs() > 1.0 {
            self.max_panel = Some(std::f64::consts::PI / t.abs());
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Integral {
    pub value: Vec<f64>,
    /// Estimated absolute error (max-norm), summed over pieces.
    pub error: f64,
    pub evaluations: usize,
}

/// Half-width of the truncated `t` range. Nodes beyond it sit within 1e-37
/// of an endpoint, so even `x^{-1/2}` singularities lose nothing measurable.
const T_MAX: f64 = 4.0;
const H0: f64 = 0.5;

/// Node at parameter `t` on `[a, b]`: returns `(x, w)` with the distance to
/// the nearer endpoint computed without cancellation.
fn node(a: f64, b: f64, t: f64) -> Option<(f64, f64)> {
    let half = 0.5 * (b - a);
    let u = FRAC_PI_2 * t.sinh();
    let ch = u.cosh();
    let w = half * FRAC_PI_2 * t.cosh() / (ch * ch);
    // 1 - tanh|u| = 2 / (1 + e^{2|u|})
    let gap = half * 2.0 / (1.0 + (2.0 * u.abs()).exp());
    if gap <= 0.0 || !w.is_finite() {
        return None;
    }
    let x = if t >= 0.0 { b - gap } else { a + gap };
    if x <= a || x >= b {
        return None;
    }
    Some((x, w))
}

struct Piece {
    value: Vec<f64>,
    error: f64,
    evaluations: usize,
    converged: bool,
}

fn tanh_sinh<F>(f: &F, dim: usize, a: f64, b: f64, tol: f64, max_level: u32) -> Result<Piece>
where
    F: Fn(f64, &mut [f64]) -> Result<()>,
{
    let mut buf = vec![0.0; dim];
    let mut sum = vec![0.0; dim];
    let mut evaluations = 0;
    let mut add = |t: f64, sum: &mut [f64], evaluations: &mut usize| -> Result<()> {
        if let Some((x, w)) = node(a, b, t) {
            buf.iter_mut().for_each(|v| *v = 0.0);
            f(x, &mut buf)?;
            *evaluations += 1;
            for (s, v) in sum.iter_mut().zip(&buf) {
                *s += w * v;
            }
        }
        Ok(())
    };

    let n0 = (T_MAX / H0).round() as i64;
    for k in -n0..=n0 {
        add(k as f64 * H0, &mut sum, &mut evaluations)?;
    }
    let mut h = H0;
    let mut prev: Vec<f64> = sum.iter().map(|s| s * h).collect();
    let mut error = f64::INFINITY;
    for level in 1..=max_level {
        h *= 0.5;
        let n = (T_MAX / h).round() as i64;
        let mut k = -n + if n % 2 == 0 { 1 } else { 0 };
        while k <= n {
            add(k as f64 * h, &mut sum, &mut evaluations)?;
            k += 2;
        }
        let cur: Vec<f64> = sum.iter().map(|s| s * h).collect();
        error = cur.iter().zip(&prev).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prev = cur;
        if level >= 2 && error <= tol {
            return Ok(Piece {
                value: prev,
                error,
                evaluations,
                converged: true,
            });
        }
    }
    Ok(Piece {
        value: prev,
        error,
        evaluations,
        converged: false,
    })
}

fn adaptive<F>(f: &F, dim: usize, a: f64, b: f64, tol: f64, spec: &QuadratureSpec, depth: u32) -> Result<Integral>
where
    F: Fn(f64, &mut [f64]) -> Result<()>,
{
    let piece = tanh_sinh(f, dim, a, b, tol, spec.max_level)?;
    if piece.converged {
        return Ok(Integral {
            value: piece.value,
            error: piece.error,
            evaluations: piece.evaluations,
        });
    }
    if depth >= spec.max_depth || (b - a) <= 1e-12 * (1.0 + a.abs().max(b.abs())) {
        return Err(Error::QuadratureFailure {
            a,
            b,
            tol,
            estimate: piece.error,
        });
    }
    let m = 0.5 * (a + b);
    let left = adaptive(f, dim, a, m, 0.5 * tol, spec, depth + 1)?;
    let right = adaptive(f, dim, m, b, 0.5 * tol, spec, depth + 1)?;
    Ok(Integral {
        value: left.value.iter().zip(&right.value).map(|(x, y)| x + y).collect(),
        error: left.error + right.error,
        evaluations: left.evaluations + right.evaluations + piece.evaluations,
    })
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F>(f: F, dim: usize, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(f64, &mut [f64]) -> Result<()> + Sync,
{
    integrate_pieces(f, dim, &[a, b], spec)
}

/// Integrates `f` over `[breaks[0], breaks.last()]`, splitting at every
/// breakpoint. Pieces run in parallel; the sum is taken in piece order so the
/// result does not depend on scheduling.
pub fn integrate_pieces<F>(f: F, dim: usize, breaks: &[f64], spec: &QuadratureSpec) -> Result<Integral>
where
    F: Fn(f64, &mut [f64]) -> Result<()> + Sync,
{
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| x.is_finite()).collect();
    crate::model::sort_dedup(&mut pts);
    let mut pieces = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let panels = match spec.max_panel {
            Some(p) if p > 0.0 => ((b - a) / p).ceil().max(1.0) as usize,
            _ => 1,
        };
        for i in 0..panels {
            let lo = a + (b - a) * i as f64 / panels as f64;
            let hi = if i + 1 == panels {
                b
            } else {
                a + (b - a) * (i + 1) as f64 / panels as f64
            };
            pieces.push((lo, hi));
        }
    }
    if pieces.is_empty() {
        return Ok(Integral {
            value: vec![0.0; dim],
            error: 0.0,
            evaluations: 0,
        });
    }
    let total: f64 = pieces.iter().map(|(a, b)| b - a).sum();
    let results: Vec<Result<Integral>> = pieces
        .par_iter()
        .map(|&(a, b)| {
            let tol = spec.abs_tol * (b - a) / total;
            adaptive(&f, dim, a, b, tol, spec, 0)
        })
        .collect();
    let mut out = Integral {
        value: vec![0.0; dim],
        error: 0.0,
        evaluations: 0,
    };
    for r in results {
        let r = r?;
        for (o, v) in out.value.iter_mut().zip(&r.value) {
            *o += v;
        }
        out.error += r.error;
        out.evaluations += r.evaluations;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scalar<F: Fn(f64) -> f64 + Sync>(f: F) -> impl Fn(f64, &mut [f64]) -> Result<()> + Sync {
        move |x, out| {
            out[0] = f(x);
            Ok(())
        }
    }

    #[test]
    fn polynomial_and_semicircle() {
        let spec = QuadratureSpec::with_tol(1e-13);
        let r = integrate(scalar(|x| x * x), 1, -1.0, 2.0, &spec).unwrap();
        assert!((r.value[0] - 3.0).abs() < 1e-13);
        // ∫ sqrt(4 - E²) dE over the band = 2π
        let r = integrate(scalar(|x| (4.0 - x * x).max(0.0).sqrt()), 1, -2.0, 2.0, &spec).unwrap();
        assert!((r.value[0] - 2.0 * PI).abs() < 1e-12, "{}", r.value[0]);
    }

    #[test]
    fn endpoint_singularity() {
        let spec = QuadratureSpec::with_tol(1e-11);
        let r = integrate(scalar(|x| 1.0 / x.sqrt()), 1, 0.0, 1.0, &spec).unwrap();
        assert!((r.value[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn vector_components_and_breakpoints() {
        let spec = QuadratureSpec::with_tol(1e-12);
        let f = |x: f64, out: &mut [f64]| {
            out[0] = x.abs();
            out[1] = if x < 0.5 { 1.0 } else { 0.0 };
            Ok(())
        };
        let r = integrate_pieces(f, 2, &[-1.0, 0.0, 0.5, 1.0], &spec).unwrap();
        assert!((r.value[0] - 1.0).abs() < 1e-12);
        assert!((r.value[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn sharp_fermi_step() {
        let spec = QuadratureSpec::with_tol(1e-10);
        let beta = 200.0;
        let f = scalar(move |x: f64| 1.0 / (1.0 + (beta * (x - 0.1)).exp()));
        let r = integrate_pieces(f, 1, &[-2.0, 0.1, 2.0], &spec).unwrap();
        // ∫_{-2}^{2} f = (1/β) ln((1+e^{β·2.1})/(1+e^{-β·1.9}))
        let exact = 2.1 + (1.0 + (-beta * 2.1f64).exp()).ln() / beta - (1.0 + (-beta * 1.9f64).exp()).ln() / beta;
        assert!((r.value[0] - exact).abs() < 1e-10);
    }

    #[test]
    fn oscillatory_panels() {
        let t = 300.0;
        let spec = QuadratureSpec::with_tol(1e-11).for_phase(t);
        let f = move |x: f64, out: &mut [f64]| {
            out[0] = (t * x).cos();
            out[1] = -(t * x).sin();
            Ok(())
        };
        let r = integrate(f, 2, -2.0, 2.0, &spec).unwrap();
        let exact = 2.0 * (2.0 * t).sin() / t;
        assert!((r.value[0] - exact).abs() < 1e-11);
        assert!(r.value[1].abs() < 1e-11);
    }

    #[test]
    fn reports_failure() {
        let spec = QuadratureSpec {
            abs_tol: 1e-14,
            max_level: 3,
            max_depth: 1,
            max_panel: None,
        };
        let err = integrate(scalar(|x| (50.0 * x).sin().abs()), 1, 0.0, 3.0, &spec).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure { .. }));
    }

    #[test]
    fn integrand_errors_propagate() {
        let spec = QuadratureSpec::default();
        let f = |x: f64, _: &mut [f64]| -> Result<()> {
            Err(Error::SingularMatrix {
                energy: x,
                sigma_min: 0.0,
            })
        };
        assert!(matches!(
            integrate(f, 1, 0.0, 1.0, &spec),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn deterministic_sum() {
        let spec = QuadratureSpec::with_tol(1e-12);
        let breaks: Vec<f64> = (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let f = scalar(|x: f64| (3.0 * x).exp() * x.cos());
        let a = integrate_pieces(f, 1, &breaks, &spec).unwrap();
        let b = integrate_pieces(scalar(|x: f64| (3.0 * x).exp() * x.cos()), 1, &breaks, &spec).unwrap();
        assert_eq!(a.value[0].to_bits(), b.value[0].to_bits());
    }
}
