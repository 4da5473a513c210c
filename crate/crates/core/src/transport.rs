//! Transmission, Landauer–Büttiker currents, entropy production and the
//! Onsager matrix.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::leads::{spectral_factor, BandGeometry};
use crate::linalg::fermi;
use crate::model::{CMatrix, SystemConfig};
use crate::quadrature::{integrate_pieces, QuadratureSpec};
use crate::spectral::resolvent;

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionMatrix {
    pub energy: f64,
    pub t: DMatrix<f64>,
}

/// `f(β_j(E - v_j - μ_j))` for every lead.
pub fn occupations(config: &SystemConfig, e: f64) -> Vec<f64> {
    config
        .leads
        .iter()
        .map(|l| fermi(l.beta * (e - l.bias - l.mu)))
        .collect()
}

/// `d_j² r(E - v_j)` for every lead.
fn weights(config: &SystemConfig, e: f64) -> Vec<f64> {
    config
        .leads
        .iter()
        .map(|l| l.coupling * l.coupling * spectral_factor(e - l.bias, config.hopping))
        .collect()
}

fn transmission_with(config: &SystemConfig, m: &CMatrix, w: &[f64]) -> DMatrix<f64> {
    let k = config.n_leads();
    // ⟨φ_j| m φ_k⟩ for all pairs
    let mphi: Vec<_> = config.leads.iter().map(|l| m * &l.coupling_vector).collect();
    DMatrix::from_fn(k, k, |a, b| {
        if a == b || w[a] == 0.0 || w[b] == 0.0 {
            return 0.0;
        }
        let amp = config.leads[a].coupling_vector.dotc(&mphi[b]);
        w[a] * w[b] * amp.norm_sqr()
    })
}

/// `T_jk(E) = d_j² d_k² r(E - v_j) r(E - v_k) |⟨φ_j|m(E) φ_k⟩|²`, zero diagonal.
pub fn transmission(config: &SystemConfig, e: f64) -> Result<TransmissionMatrix> {
    let w = weights(config, e);
    let k = config.n_leads();
    if w.iter().filter(|&&x| x != 0.0).count() < 2 {
        return Ok(TransmissionMatrix {
            energy: e,
            t: DMatrix::zeros(k, k),
        });
    }
    let m = resolvent(config, e)?;
    Ok(TransmissionMatrix {
        energy: e,
        t: transmission_with(config, &m, &w),
    })
}

pub fn transmission_sweep(config: &SystemConfig, energies: &[f64]) -> Result<Vec<TransmissionMatrix>> {
    energies.par_iter().map(|&e| transmission(config, e)).collect()
}

/// Breakpoints for energy integrals: band thresholds and, inside the bands,
/// each Fermi edge together with a few thermal widths around it.
pub fn energy_breakpoints(config: &SystemConfig) -> Vec<f64> {
    let geo = BandGeometry::new(&config.leads.iter().map(|l| l.bias).collect::<Vec<_>>(), config.hopping);
    let lo = geo.thresholds.first().copied().unwrap_or(0.0);
    let hi = geo.thresholds.last().copied().unwrap_or(0.0);
    let mut pts = geo.thresholds.clone();
    for l in &config.leads {
        let edge = l.bias + l.mu;
        for k in [-12.0, -4.0, 0.0, 4.0, 12.0] {
            let p = edge + k / l.beta;
            if p > lo && p < hi {
                pts.push(p);
            }
        }
    }
    crate::model::sort_dedup(&mut pts);
    pts
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteadyObservables {
    /// Charge current `J_j` leaving lead `j` into the sample.
    pub charge: Vec<f64>,
    /// Energy current `E_j`, energies measured from the lead's own band centre.
    pub energy: Vec<f64>,
    /// `σ = -Σ_j β_j (E_j - μ_j J_j)`.
    pub entropy_production: f64,
    /// Quadrature error estimate (max over components).
    pub quadrature_error: f64,
    pub evaluations: usize,
}

impl SteadyObservables {
    pub fn charge_sum(&self) -> f64 {
        self.charge.iter().sum()
    }

    /// `Σ_j (E_j + v_j J_j)`.
    pub fn energy_sum(&self, config: &SystemConfig) -> f64 {
        self.energy
            .iter()
            .zip(&self.charge)
            .zip(&config.leads)
            .map(|((e, j), l)| e + l.bias * j)
            .sum()
    }
}

pub fn entropy_from_currents(config: &SystemConfig, charge: &[f64], energy: &[f64]) -> f64 {
    -config
        .leads
        .iter()
        .zip(charge.iter().zip(energy))
        .map(|(l, (j, e))| l.beta * (e - l.mu * j))
        .sum::<f64>()
}

/// Landauer–Büttiker currents
/// `J_j = Σ_k ∫ T_jk (f_j - f_k) dE`, `E_j = Σ_k ∫ (E - v_j) T_jk (f_j - f_k) dE`.
pub fn lb_currents(config: &SystemConfig, spec: &QuadratureSpec) -> Result<SteadyObservables> {
    let k = config.n_leads();
    let integrand = |e: f64, out: &mut [f64]| -> Result<()> {
        let w = weights(config, e);
        if w.iter().filter(|&&x| x != 0.0).count() < 2 {
            return Ok(());
        }
        let m = resolvent(config, e)?;
        let t = transmission_with(config, &m, &w);
        let f = occupations(config, e);
        for a in 0..k {
            let mut s = 0.0;
            for b in 0..k {
                s += t[(a, b)] * (f[a] - f[b]);
            }
            out[a] = s;
            out[k + a] = (e - config.leads[a].bias) * s;
        }
        Ok(())
    };
    let r = integrate_pieces(integrand, 2 * k, &energy_breakpoints(config), spec)?;
    let charge = r.value[..k].to_vec();
    let energy = r.value[k..].to_vec();
    let entropy_production = entropy_from_currents(config, &charge, &energy);
    Ok(SteadyObservables {
        charge,
        energy,
        entropy_production,
        quadrature_error: r.error,
        evaluations: r.evaluations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyReport {
    pub sigma: f64,
    /// Some pair of leads with non-vanishing transmission has different
    /// temperatures or different electrochemical potentials `v + μ`.
    pub strictly_positive: bool,
    pub observables: SteadyObservables,
}

/// True if `T_jk` is not identically zero on the overlap of bands `j`, `k`.
pub fn transmits(config: &SystemConfig, j: usize, k: usize) -> Result<bool> {
    let geo = BandGeometry::new(&config.leads.iter().map(|l| l.bias).collect::<Vec<_>>(), config.hopping);
    let Some((a, b)) = geo.overlap(j, k) else {
        return Ok(false);
    };
    for i in 1..=9 {
        let e = a + (b - a) * i as f64 / 10.0;
        if transmission(config, e)?.t[(j, k)] > 1e-14 {
            return Ok(true);
        }
    }
    Ok(false)
}

pub fn strict_positivity_criterion(config: &SystemConfig) -> Result<bool> {
    let k = config.n_leads();
    for a in 0..k {
        for b in (a + 1)..k {
            let (la, lb) = (&config.leads[a], &config.leads[b]);
            let forced = la.beta != lb.beta || la.bias + la.mu != lb.bias + lb.mu;
            if forced && transmits(config, a, b)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

pub fn entropy_production(config: &SystemConfig, spec: &QuadratureSpec) -> Result<EntropyReport> {
    let observables = lb_currents(config, spec)?;
    Ok(EntropyReport {
        sigma: observables.entropy_production,
        strictly_positive: strict_positivity_criterion(config)?,
        observables,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OnsagerMatrix {
    /// `L_jk = β^{-1} ∂J_j/∂μ_k` at equilibrium.
    pub matrix: Vec<Vec<f64>>,
    pub step: f64,
    /// Max entry-wise change between steps `h` and `h/2`.
    pub richardson_delta: f64,
}

impl OnsagerMatrix {
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().flatten().fold(0.0, |a, &b| a.max(b.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.matrix.len();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((self.matrix[j][k] - self.matrix[k][j]).abs());
            }
        }
        worst
    }

    pub fn max_column_sum(&self) -> f64 {
        let n = self.matrix.len();
        (0..n)
            .map(|k| (0..n).map(|j| self.matrix[j][k]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

fn central_difference(config: &SystemConfig, h: f64, spec: &QuadratureSpec) -> Result<Vec<Vec<f64>>> {
    let k = config.n_leads();
    let beta = config.leads[0].beta;
    let columns: Vec<Result<Vec<f64>>> = (0..k)
        .into_par_iter()
        .map(|col| {
            let mut plus = config.clone();
            plus.leads[col].mu += h;
            let mut minus = config.clone();
            minus.leads[col].mu -= h;
            let jp = lb_currents(&plus, spec)?.charge;
            let jm = lb_currents(&minus, spec)?.charge;
            Ok(jp.iter().zip(&jm).map(|(a, b)| (a - b) / (2.0 * h * beta)).collect())
        })
        .collect();
    let columns: Vec<Vec<f64>> = columns.into_iter().collect::<Result<_>>()?;
    Ok((0..k).map(|j| (0..k).map(|col| columns[col][j]).collect()).collect())
}

/// Finite-difference Onsager matrix around an equilibrium configuration.
pub fn onsager_matrix(config: &SystemConfig, step: f64, spec: &QuadratureSpec) -> Result<OnsagerMatrix> {
    let first = config
        .leads
        .first()
        .ok_or_else(|| Error::InvalidArgument("no leads".into()))?;
    let equilibrium = config
        .leads
        .iter()
        .all(|l| l.beta == first.beta && l.mu == first.mu && l.bias == 0.0);
    if !equilibrium {
        return Err(Error::InvalidArgument(
            "Onsager matrix needs equal beta and mu on all leads and zero biases".into(),
        ));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive (got {step})"
        )));
    }
    let coarse = central_difference(config, step, spec)?;
    let fine = central_difference(config, 0.5 * step, spec)?;
    let richardson_delta = coarse
        .iter()
        .flatten()
        .zip(fine.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(OnsagerMatrix {
        matrix: coarse,
        step,
        richardson_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{real_sample, single_dot, site_vector, LeadSpec, Scenario};
    use std::f64::consts::PI;

    #[test]
    fn resonant_symmetric_dot() {
        for &d in &[0.2, 0.5, 1.0] {
            let t = transmission(&single_dot(0.0, d, 1.0, 0.0, 0.0), 0.0).unwrap();
            assert!((t.t[(0, 1)] - 1.0 / (2.0 * PI)).abs() < 1e-14, "d={d}");
            assert_eq!(t.t[(0, 0)], 0.0);
        }
    }

    #[test]
    fn zero_coupling_and_off_band() {
        let mut cfg = single_dot(0.0, 0.5, 1.0, 0.0, 0.0);
        cfg.leads.push(LeadSpec::new(0.0, site_vector(1, 0), 1.0, 0.0));
        let t = transmission(&cfg, 0.3).unwrap();
        assert!(t.t[(0, 1)] > 0.0);
        for j in 0..3 {
            assert_eq!(t.t[(2, j)], 0.0);
            assert_eq!(t.t[(j, 2)], 0.0);
        }
        cfg.leads[1].bias = 5.0;
        assert_eq!(transmission(&cfg, 0.5).unwrap().t[(0, 1)], 0.0);
        assert_eq!(transmission(&cfg, 2.5).unwrap().t[(0, 1)], 0.0);
    }

    #[test]
    fn single_dot_closed_form() {
        // T(E) = d⁴ r(E)² / |ε₀ + 2d² g(E) - E|²
        let (eps0, d) = (0.3, 0.6);
        let cfg = single_dot(eps0, d, 1.0, 0.0, 0.0);
        for i in 0..50 {
            let e = -1.98 + 3.96 * i as f64 / 49.0;
            let g = crate::leads::surface_green(e, 0.0, 1.0);
            let den = (g * (2.0 * d * d) + eps0 - e).norm_sqr();
            let expect = d.powi(4) * spectral_factor(e, 1.0).powi(2) / den;
            let got = transmission(&cfg, e).unwrap().t[(0, 1)];
            assert!((got - expect).abs() < 1e-14 * (1.0 + expect));
        }
    }

    #[test]
    fn equilibrium_null() {
        let cfg = single_dot(0.2, 0.5, 3.0, 0.1, 0.1);
        let obs = lb_currents(&cfg, &QuadratureSpec::default()).unwrap();
        assert!(obs.charge.iter().all(|j| j.abs() < 1e-12));
        assert!(obs.energy.iter().all(|j| j.abs() < 1e-12));
        assert!(obs.entropy_production.abs() < 1e-12);
        assert!(!strict_positivity_criterion(&cfg).unwrap());
    }

    /// Symmetric dot in the wide-band-free closed form: at low temperature the
    /// current is the integral of T between the two chemical potentials.
    #[test]
    fn symmetric_dot_current_zero_temperature_limit() {
        let (d, dmu) = (0.5, 0.2);
        let cfg = single_dot(0.0, d, 400.0, dmu / 2.0, -dmu / 2.0);
        let obs = lb_currents(&cfg, &QuadratureSpec::with_tol(1e-11)).unwrap();
        let direct = crate::quadrature::integrate(
            |e, out: &mut [f64]| {
                out[0] = transmission(&cfg, e)?.t[(0, 1)];
                Ok(())
            },
            1,
            -dmu / 2.0,
            dmu / 2.0,
            &QuadratureSpec::with_tol(1e-12),
        )
        .unwrap()
        .value[0];
        assert!((obs.charge[0] - direct).abs() < 1e-4 * direct);
        assert!(obs.charge[0] > 0.0);
        assert!((obs.charge_sum()).abs() < 1e-10);
        let report = entropy_production(&cfg, &QuadratureSpec::default()).unwrap();
        assert!(report.strictly_positive && report.sigma > 0.0);
        let recomputed = entropy_from_currents(&cfg, &report.observables.charge, &report.observables.energy);
        assert!((recomputed - report.sigma).abs() <= 1e-10 * report.sigma.abs());
    }

    #[test]
    fn transmission_symmetric_for_real_models() {
        let cfg = SystemConfig {
            sample: real_sample(&[&[0.1, 0.4, 0.0], &[0.4, -0.3, 0.2], &[0.0, 0.2, 0.5]]),
            leads: vec![
                LeadSpec::new(0.7, site_vector(3, 0), 2.0, 0.1),
                LeadSpec::new(0.5, site_vector(3, 2), 1.0, -0.2).with_bias(0.3),
                LeadSpec::new(0.4, site_vector(3, 1), 1.5, 0.0).with_bias(-0.4),
            ],
            hopping: 1.0,
            scenario: Scenario::Partitioned,
            equilibrium: None,
        };
        for i in 0..100 {
            let e = -2.5 + 5.0 * i as f64 / 99.0;
            let t = transmission(&cfg, e).unwrap().t;
            assert!((&t - t.transpose()).amax() < 1e-12);
            // unitarity: row sums equal column sums pointwise
            for j in 0..3 {
                let row: f64 = t.row(j).sum();
                let col: f64 = t.column(j).sum();
                assert!((row - col).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn onsager_decoupled_is_zero_and_rejects_bias() {
        let cfg = single_dot(0.0, 0.0, 2.0, 0.0, 0.0);
        let l = onsager_matrix(&cfg, 1e-4, &QuadratureSpec::default()).unwrap();
        assert_eq!(l.max_abs(), 0.0);
        let mut biased = single_dot(0.0, 0.3, 2.0, 0.0, 0.0);
        biased.leads[0].bias = 0.1;
        assert!(onsager_matrix(&biased, 1e-4, &QuadratureSpec::default()).is_err());
    }
}
