//! Closed-form Green functions of the semi-infinite Dirichlet chain with
//! hopping `-c` and on-site energy `v`.

use num_complex::Complex64;
use std::f64::consts::PI;

const CLAMP: f64 = 1e-15;

/// Position of an energy relative to a band `[v - 2c, v + 2c]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BandPoint {
    /// `E - v = 2c cos θ`, `θ ∈ [0, π]`.
    Inside { theta: f64 },
    /// `E - v = 2c cosh χ`.
    Above { chi: f64 },
    /// `E - v = -2c cosh χ`.
    Below { chi: f64 },
}

pub fn band_point(e: f64, v: f64, c: f64) -> BandPoint {
    let x = (e - v) / (2.0 * c);
    if x.abs() <= 1.0 + CLAMP {
        BandPoint::Inside {
            theta: x.clamp(-1.0, 1.0).acos(),
        }
    } else if x > 0.0 {
        BandPoint::Above { chi: x.acosh() }
    } else {
        BandPoint::Below { chi: (-x).acosh() }
    }
}

/// Surface Green function `g(E, v)`; `-g` is the boundary value of the
/// resolvent at the contact site.
pub fn surface_green(e: f64, v: f64, c: f64) -> Complex64 {
    match band_point(e, v, c) {
        BandPoint::Inside { theta } => Complex64::from_polar(1.0 / c, -theta),
        BandPoint::Above { chi } => Complex64::new((-chi).exp() / c, 0.0),
        BandPoint::Below { chi } => Complex64::new(-(-chi).exp() / c, 0.0),
    }
}

/// `r(E) = sqrt(2/(π c²) (1 - (E/2c)²))` on the band centred at 0, zero outside.
pub fn spectral_factor(e: f64, c: f64) -> f64 {
    let x = e / (2.0 * c);
    if x.abs() >= 1.0 {
        0.0
    } else {
        (2.0 / (PI * c * c) * (1.0 - x * x)).sqrt()
    }
}

/// `⟨δ_x|(h + v - E - i0)^{-1} δ_y⟩` for the chain with sites `0, 1, …`
/// and hopping `-c`. The staggering `(-1)^{x+y}` relates it to the chain with
/// hopping `+c`, whose entries have the familiar plane-wave form.
pub fn lead_resolvent_entry(x: usize, y: usize, e: f64, v: f64, c: f64) -> Complex64 {
    let near = x.abs_diff(y) as f64;
    let image = (x + y + 2) as f64;
    let odd = (x + y) % 2 == 1;
    let stagger = if odd { -1.0 } else { 1.0 };
    let plus = match band_point(e, v, c) {
        BandPoint::Inside { theta } => {
            let s = theta.sin();
            if s == 0.0 {
                // band edges: θ → 0 gives -(min+1)/c, θ → π gives (-1)^{x+y}(min+1)/c
                let k = (x.min(y) + 1) as f64 / c;
                let r = if theta < 1.0 { -k } else { stagger * k };
                Complex64::new(r, 0.0)
            } else {
                let num = Complex64::from_polar(1.0, -theta * near) - Complex64::from_polar(1.0, -theta * image);
                -num / Complex64::new(0.0, 2.0 * c * s)
            }
        }
        BandPoint::Above { chi } => Complex64::new(-off_band(near, image, chi) / c, 0.0),
        BandPoint::Below { chi } => Complex64::new(stagger * off_band(near, image, chi) / c, 0.0),
    };
    plus * stagger
}

/// `(e^{-χ|x-y|} - e^{-χ(x+y+2)}) / (2 sinh χ)`, stable as χ → 0.
fn off_band(near: f64, image: f64, chi: f64) -> f64 {
    if chi < 1e-8 {
        // (image - near)/2 = min(x,y)+1 to leading order
        return (image - near) / 2.0;
    }
    let a = (-chi * near).exp();
    let b = (-chi * image).exp();
    (a - b) / (2.0 * chi.sinh())
}

/// `u(x) = (-1)^x sin(θ(x+1)) / sqrt(c sin θ)`: the rank-one factor of
/// `Im R(x, y; E) = u(x) u(y)` for in-band `E`. Zero outside the band.
pub fn lead_mode(x: usize, e: f64, v: f64, c: f64) -> f64 {
    match band_point(e, v, c) {
        BandPoint::Inside { theta } => {
            let s = theta.sin();
            if s <= 0.0 {
                0.0
            } else {
                let sign = if x % 2 == 1 { -1.0 } else { 1.0 };
                sign * (theta * (x + 1) as f64).sin() / (c * s).sqrt()
            }
        }
        _ => 0.0,
    }
}

/// Thresholds and pairwise overlaps of the lead bands.
#[derive(Clone, Debug, PartialEq)]
pub struct BandGeometry {
    pub thresholds: Vec<f64>,
    pub bands: Vec<(f64, f64)>,
}

impl BandGeometry {
    pub fn new(biases: &[f64], c: f64) -> Self {
        let bands: Vec<(f64, f64)> = biases.iter().map(|&v| (v - 2.0 * c, v + 2.0 * c)).collect();
        let mut thresholds: Vec<f64> = bands.iter().flat_map(|&(a, b)| [a, b]).collect();
        crate::model::sort_dedup(&mut thresholds);
        BandGeometry { thresholds, bands }
    }

    /// `I_{j,k}`; `None` if the bands do not overlap.
    pub fn overlap(&self, j: usize, k: usize) -> Option<(f64, f64)> {
        let a = self.bands[j].0.max(self.bands[k].0);
        let b = self.bands[j].1.min(self.bands[k].1);
        (a < b).then_some((a, b))
    }

    pub fn union_contains(&self, e: f64) -> bool {
        self.bands.iter().any(|&(a, b)| e >= a && e <= b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn surface_values() {
        assert!(close(surface_green(0.3, 0.3, 1.0), Complex64::new(0.0, -1.0), 1e-15));
        assert!(close(surface_green(2.5, 0.5, 1.0), Complex64::new(1.0, 0.0), 1e-15));
        assert!(close(surface_green(-1.5, 0.5, 1.0), Complex64::new(-1.0, 0.0), 1e-15));
        assert!(close(
            surface_green(1.5, 0.0, 0.5),
            Complex64::new(2.0, 0.0) * (-(1.5f64).acosh()).exp(),
            1e-14
        ));
    }

    #[test]
    fn quadratic_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let c: f64 = rng.gen_range(0.2..3.0);
            let v: f64 = rng.gen_range(-2.0..2.0);
            let e = v + c * rng.gen_range(-10.0..10.0);
            let g = surface_green(e, v, c);
            let q = g * g * c * c - g * (e - v) + 1.0;
            assert!(q.norm() < 1e-12, "residual {q} at E={e}, v={v}, c={c}");
            assert!(g.im <= 0.0);
            let inside = (e - v).abs() <= 2.0 * c;
            if inside {
                assert!(((g * c).norm() - 1.0).abs() < 1e-12);
            } else {
                assert_eq!(g.im, 0.0);
                assert!((g * c).norm() < 1.0);
            }
        }
    }

    #[test]
    fn continuous_across_thresholds() {
        for &(v, c) in &[(0.0, 1.0), (0.4, 0.7)] {
            for &edge in &[v - 2.0 * c, v + 2.0 * c] {
                let a = surface_green(edge - 1e-12, v, c);
                let b = surface_green(edge + 1e-12, v, c);
                assert!(close(a, b, 1e-5));
            }
        }
    }

    #[test]
    fn spectral_factor_values() {
        assert!((spectral_factor(0.0, 1.0) - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!((spectral_factor(0.0, 1.0) - 0.797_884_560_802_865_4).abs() < 1e-15);
        assert_eq!(spectral_factor(2.0, 1.0), 0.0);
        assert_eq!(spectral_factor(-2.0, 1.0), 0.0);
        for i in 0..200 {
            let c = 0.8;
            let e = -1.6 + 3.2 * (i as f64 + 0.5) / 200.0;
            let g = surface_green(e, 0.0, c);
            assert!((spectral_factor(e, c) - (2.0 / PI).sqrt() * g.im.abs()).abs() < 1e-14);
            assert!((spectral_factor(e, c).powi(2) - 2.0 / PI * (c * g.im).powi(2) / (c * c)).abs() < 1e-14);
        }
    }

    #[test]
    fn resolvent_corner_is_minus_g() {
        for &e in &[-2.5, -1.9, -0.3, 0.0, 1.1, 1.99, 2.0, 3.7] {
            let r = lead_resolvent_entry(0, 0, e, 0.1, 1.0);
            assert!(close(r, -surface_green(e, 0.1, 1.0), 1e-12), "E={e}");
        }
    }

    #[test]
    fn resolvent_symmetric_and_decaying() {
        let (v, c) = (0.0, 1.0);
        for &e in &[-3.0, -0.5, 0.7, 2.6] {
            for x in 0..6 {
                for y in 0..6 {
                    assert_eq!(lead_resolvent_entry(x, y, e, v, c), lead_resolvent_entry(y, x, e, v, c));
                }
            }
        }
        let e = 3.0;
        let chi = (e / 2.0f64).acosh();
        let ratio = lead_resolvent_entry(0, 5, e, v, c) / lead_resolvent_entry(0, 0, e, v, c);
        // image term: (e^{-5χ} - e^{-7χ}) / (1 - e^{-2χ}) = e^{-5χ}
        assert!((ratio.norm() - (-5.0 * chi).exp()).abs() < 1e-14);
    }

    /// Dense inverse of a long truncated chain, evaluated off the real axis
    /// far enough that the truncation does not matter.
    #[test]
    fn resolvent_matches_truncated_chain_off_band() {
        use nalgebra::DMatrix;
        let (v, c, n) = (0.2, 0.9, 80);
        for &e in &[-2.4, 2.9, 5.0] {
            let m = DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    v - e
                } else if i.abs_diff(j) == 1 {
                    -c
                } else {
                    0.0
                }
            });
            let inv = m.try_inverse().unwrap();
            for (x, y) in [(0, 0), (0, 3), (2, 5), (4, 4)] {
                let r = lead_resolvent_entry(x, y, e, v, c);
                assert!((r.re - inv[(x, y)]).abs() < 1e-10, "E={e} ({x},{y})");
            }
        }
    }

    /// In-band boundary values against the truncated chain at E + iη with a
    /// large truncation, where the reflected wave is damped out.
    #[test]
    fn resolvent_matches_truncated_chain_in_band() {
        let (v, c, n, eta) = (0.0, 1.0, 20_000, 0.001);
        for &e in &[0.6, -1.3] {
            let z = Complex64::new(e, eta);
            for y in [0usize, 2] {
                // Thomas algorithm for (h + v - z) col = δ_y
                let off = Complex64::new(-c, 0.0);
                let diag = Complex64::new(v, 0.0) - z;
                let mut cp = vec![Complex64::new(0.0, 0.0); n];
                let mut dp = vec![Complex64::new(0.0, 0.0); n];
                for i in 0..n {
                    let rhs = if i == y {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    let (prev_c, prev_d) = if i == 0 {
                        (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
                    } else {
                        (cp[i - 1], dp[i - 1])
                    };
                    let den = diag - off * prev_c;
                    cp[i] = off / den;
                    dp[i] = (rhs - off * prev_d) / den;
                }
                let mut col = dp.clone();
                for i in (0..n - 1).rev() {
                    col[i] = dp[i] - cp[i] * col[i + 1];
                }
                for (x, cx) in col.iter().enumerate().take(4) {
                    let r = lead_resolvent_entry(x, y, e, v, c);
                    assert!((r - cx).norm() < 5e-3, "E={e} ({x},{y}) {r} vs {cx}");
                }
            }
        }
    }

    #[test]
    fn imaginary_part_is_rank_one() {
        let (v, c) = (-0.3, 1.3);
        for &e in &[-2.5, -1.0, 0.2, 2.1] {
            for x in 0..5 {
                for y in 0..5 {
                    let im = lead_resolvent_entry(x, y, e, v, c).im;
                    let uu = lead_mode(x, e, v, c) * lead_mode(y, e, v, c);
                    assert!((im - uu).abs() < 1e-12, "E={e} ({x},{y}) {im} vs {uu}");
                }
            }
        }
    }

    #[test]
    fn band_overlaps() {
        let g = BandGeometry::new(&[0.0, 1.0, 10.0], 1.0);
        assert_eq!(g.overlap(0, 1), Some((-1.0, 2.0)));
        assert_eq!(g.overlap(1, 0), g.overlap(0, 1));
        assert_eq!(g.overlap(0, 0), Some((-2.0, 2.0)));
        assert_eq!(g.overlap(0, 2), None);
        assert_eq!(g.thresholds, vec![-2.0, -1.0, 2.0, 3.0, 8.0, 12.0]);
    }

    proptest::proptest! {
        #[test]
        fn im_g_nonpositive(e in -50.0..50.0f64, v in -3.0..3.0f64, c in 0.05..5.0f64) {
            let g = surface_green(e, v, c);
            proptest::prop_assert!(g.im <= 0.0);
            proptest::prop_assert!((c * g).norm() <= 1.0 + 1e-14);
        }
    }
}
