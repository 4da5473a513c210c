//! Embedding self-energy, the sample resolvent `m(E) = (h_S + v_S(E) - E)^{-1}`
//! and the scan for real energies where it fails to exist.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::leads::surface_green;
use crate::linalg::{hermitian_eigen, real_determinant, sigma_min, ONE};
use crate::model::{CMatrix, SystemConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct SelfEnergy {
    pub energy: f64,
    pub matrix: CMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleResolvent {
    pub energy: f64,
    pub matrix: CMatrix,
    pub sigma_min: f64,
    pub condition_number: f64,
}

/// `v_S(E) = Σ_j d_j² g_j(E) |φ_j⟩⟨φ_j|`.
pub fn embedding_self_energy(config: &SystemConfig, e: f64) -> SelfEnergy {
    let n = config.n_sites();
    let mut m = CMatrix::zeros(n, n);
    for lead in &config.leads {
        if lead.coupling == 0.0 {
            continue;
        }
        let s = surface_green(e, lead.bias, config.hopping) * lead.coupling * lead.coupling;
        let phi = &lead.coupling_vector;
        m += phi * phi.adjoint() * s;
    }
    SelfEnergy { energy: e, matrix: m }
}

/// `h_S + v_S(E) - E`.
pub fn resolvent_inverse(config: &SystemConfig, e: f64) -> CMatrix {
    let n = config.n_sites();
    let mut d = config.sample.hamiltonian.clone() + embedding_self_energy(config, e).matrix;
    for i in 0..n {
        d[(i, i)] -= e;
    }
    d
}

/// Threshold below which the smallest singular value of `h_S + v_S - E`
/// counts as zero.
pub fn singular_tol(config: &SystemConfig) -> f64 {
    1e-8 * config.sample_norm() + 1e-12
}

pub fn sample_resolvent(config: &SystemConfig, e: f64) -> Result<SampleResolvent> {
    let d = resolvent_inverse(config, e);
    let sv = d.clone().singular_values();
    let smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let smax = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    if !(smin >= singular_tol(config)) {
        return Err(Error::SingularMatrix {
            energy: e,
            sigma_min: smin,
        });
    }
    let matrix = d.try_inverse().ok_or(Error::SingularMatrix {
        energy: e,
        sigma_min: smin,
    })?;
    Ok(SampleResolvent {
        energy: e,
        matrix,
        sigma_min: smin,
        condition_number: smax / smin,
    })
}

/// Resolvent without the SVD, for quadrature inner loops. Singularity is
/// detected from the norm of the inverse (`σ_min ≥ 1/‖m‖_F`).
pub fn resolvent(config: &SystemConfig, e: f64) -> Result<CMatrix> {
    let d = resolvent_inverse(config, e);
    let tol = singular_tol(config);
    match d.try_inverse() {
        Some(m) if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && m.norm() * tol < 1.0 => Ok(m),
        _ => Err(Error::SingularMatrix {
            energy: e,
            sigma_min: sigma_min(&resolvent_inverse(config, e)),
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSpec {
    pub points: usize,
    /// Extra range beyond the extreme thresholds; `None` picks a bound on the
    /// spectrum of the coupled one-particle Hamiltonian.
    pub margin: Option<f64>,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec {
            points: 2048,
            margin: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub energy: f64,
    pub sigma_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanMetadata {
    pub e_min: f64,
    pub e_max: f64,
    pub grid_points: usize,
    pub refined_candidates: usize,
    pub determinant_roots: usize,
    pub singular_tol: f64,
    pub min_sigma: f64,
    pub min_sigma_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    pub scan: ScanMetadata,
}

impl SpectralReport {
    pub fn into_result(self) -> Result<SpectralReport> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::SpectralViolation(self.violations.len()))
        }
    }
}

fn smin_at(config: &SystemConfig, e: f64) -> f64 {
    sigma_min(&resolvent_inverse(config, e))
}

/// Golden-section minimisation of `σ_min` on `[a, b]`, run down to
/// floating-point resolution so that V-shaped zeros are resolved.
fn golden_min(config: &SystemConfig, mut a: f64, mut b: f64) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - R * (b - a);
    let mut x2 = a + R * (b - a);
    let mut f1 = smin_at(config, x1);
    let mut f2 = smin_at(config, x2);
    for _ in 0..200 {
        if (b - a) <= 4.0 * f64::EPSILON * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - R * (b - a);
            f1 = smin_at(config, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + R * (b - a);
            f2 = smin_at(config, x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bisection on a sign change of the real determinant.
fn det_root(config: &SystemConfig, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = real_determinant(&resolvent_inverse(config, m));
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Spectral radius bound for the coupled one-particle Hamiltonian, used as
/// the default scan margin.
fn default_margin(config: &SystemConfig) -> f64 {
    4.0 * config.hopping + config.sample_norm() + config.leads.iter().map(|l| l.coupling.abs()).sum::<f64>()
}

pub fn check_spectral_condition(config: &SystemConfig, scan: &ScanSpec) -> SpectralReport {
    let thresholds = config.thresholds();
    let margin = scan.margin.unwrap_or_else(|| default_margin(config));
    let lo = thresholds.first().copied().unwrap_or(0.0) - margin;
    let hi = thresholds.last().copied().unwrap_or(0.0) + margin;
    let tol = singular_tol(config);
    let np = scan.points.max(16);

    let mut grid: Vec<f64> = (0..np).map(|i| lo + (hi - lo) * i as f64 / (np - 1) as f64).collect();
    grid.extend(thresholds.iter().copied());
    if config.n_sites() > 0 {
        // eigenvalues of h_S are natural candidates in the weak-coupling limit
        grid.extend(hermitian_eigen(&config.sample.hamiltonian).0);
    }
    crate::model::sort_dedup(&mut grid);
    let values: Vec<f64> = grid.par_iter().map(|&e| smin_at(config, e)).collect();

    let mut candidates: Vec<(f64, f64)> = Vec::new();
    let mut refined = 0;
    for i in 0..grid.len() {
        let left = if i > 0 { values[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < grid.len() {
            values[i + 1]
        } else {
            f64::INFINITY
        };
        if values[i] <= left && values[i] <= right {
            let a = if i > 0 { grid[i - 1] } else { grid[i] };
            let b = if i + 1 < grid.len() { grid[i + 1] } else { grid[i] };
            candidates.push((a, b));
        }
    }
    let mut found: Vec<Violation> = candidates
        .par_iter()
        .map(|&(a, b)| {
            let (e, s) = if b > a {
                golden_min(config, a, b)
            } else {
                (a, smin_at(config, a))
            };
            Violation {
                energy: e,
                sigma_min: s,
            }
        })
        .collect();
    refined += found.len();
    // thresholds themselves: resonances sitting exactly at a band edge
    for &t in &thresholds {
        found.push(Violation {
            energy: t,
            sigma_min: smin_at(config, t),
        });
    }

    let mut roots = 0;
    if config.is_time_reversal_invariant() {
        let bands: Vec<(f64, f64)> = config
            .leads
            .iter()
            .map(|l| (l.bias - 2.0 * config.hopping, l.bias + 2.0 * config.hopping))
            .collect();
        let off_band = |e: f64| bands.iter().all(|&(a, b)| e < a || e > b);
        let dets: Vec<f64> = grid
            .par_iter()
            .map(|&e| real_determinant(&resolvent_inverse(config, e)))
            .collect();
        for i in 0..grid.len().saturating_sub(1) {
            let (a, b) = (grid[i], grid[i + 1]);
            if !off_band(a) || !off_band(b) || !off_band(0.5 * (a + b)) {
                continue;
            }
            if (dets[i] > 0.0) != (dets[i + 1] > 0.0) || dets[i] == 0.0 {
                let e = if dets[i] == 0.0 {
                    a
                } else {
                    det_root(config, a, b, dets[i])
                };
                roots += 1;
                found.push(Violation {
                    energy: e,
                    sigma_min: smin_at(config, e),
                });
            }
        }
    }

    let (min_sigma, min_sigma_energy) = grid
        .iter()
        .zip(&values)
        .chain(found.iter().map(|v| (&v.energy, &v.sigma_min)))
        .fold(
            (f64::INFINITY, 0.0),
            |acc, (&e, &s)| if s < acc.0 { (s, e) } else { acc },
        );

    let mut violations: Vec<Violation> = found.into_iter().filter(|v| v.sigma_min < tol).collect();
    violations.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    violations.dedup_by(|a, b| {
        if (a.energy - b.energy).abs() <= 1e-8 * (1.0 + a.energy.abs()) {
            if a.sigma_min < b.sigma_min {
                *b = *a;
            }
            true
        } else {
            false
        }
    });

    SpectralReport {
        passed: violations.is_empty(),
        violations,
        scan: ScanMetadata {
            e_min: lo,
            e_max: hi,
            grid_points: grid.len(),
            refined_candidates: refined,
            determinant_roots: roots,
            singular_tol: tol,
            min_sigma,
            min_sigma_energy,
        },
    }
}

/// Residual `‖(h_S + v_S - E) m - 1‖_max`.
pub fn resolvent_residual(config: &SystemConfig, e: f64, m: &CMatrix) -> f64 {
    let n = config.n_sites();
    let prod = resolvent_inverse(config, e) * m;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { crate::linalg::ZERO };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}
