//! One-shot Hartree–Fock potential built from the non-interacting steady state.

use num_complex::Complex64;
use serde::Serialize;

use crate::correlators::ness_density_matrix;
use crate::error::{Error, Result};
use crate::linalg::hermiticity_error;
use crate::model::{CMatrix, Site, SystemConfig};
use crate::quadrature::QuadratureSpec;
use crate::spectral::{check_spectral_condition, ScanSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct HartreeFockPotential {
    /// Diagonal Hartree part `v_H(x,x) = Σ_y w(x,y) n₀(y)`.
    pub hartree: CMatrix,
    /// Exchange part `v_X(x,y) = w(x,y) ⟨a*_y a_x⟩₀`.
    pub exchange: CMatrix,
    /// `v_H - v_X`.
    pub potential: CMatrix,
    /// Sample block of the `ξ = 0` correlation matrix used as the source.
    pub source: CMatrix,
}

/// Hartree and exchange potentials for a given sample correlation matrix
/// `C_xy = ⟨a*_y a_x⟩`.
pub fn potential_from_correlations(w: &nalgebra::DMatrix<f64>, c: &CMatrix) -> HartreeFockPotential {
    let n = w.nrows();
    let mut hartree = CMatrix::zeros(n, n);
    for x in 0..n {
        let s: f64 = (0..n).map(|y| w[(x, y)] * c[(y, y)].re).sum();
        hartree[(x, x)] = Complex64::new(s, 0.0);
    }
    let exchange = CMatrix::from_fn(n, n, |x, y| c[(x, y)] * w[(x, y)]);
    HartreeFockPotential {
        potential: &hartree - &exchange,
        hartree,
        exchange,
        source: c.clone(),
    }
}

pub fn build_potential(config: &SystemConfig, spec: &QuadratureSpec) -> Result<HartreeFockPotential> {
    let n = config.n_sites();
    let w = &config.sample.pair_potential;
    if w.iter().all(|&v| v == 0.0) {
        let z = CMatrix::zeros(n, n);
        return Ok(HartreeFockPotential {
            hartree: z.clone(),
            exchange: z.clone(),
            potential: z.clone(),
            source: z,
        });
    }
    let sites: Vec<Site> = (0..n).map(Site::Sample).collect();
    let c = ness_density_matrix(&config.with_interaction(0.0), &sites, spec)?;
    let mut hf = potential_from_correlations(w, &c.values);
    // remove quadrature-level asymmetry so the potential is Hermitian to rounding
    hf.potential = (&hf.potential + hf.potential.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(hf)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HartreeFockSummary {
    pub xi: f64,
    pub hermiticity_error: f64,
}

/// The non-interacting configuration with sample Hamiltonian `h_S + ξ v_HF`
/// and `ξ` reset to 0; re-checks the spectral condition.
pub fn hf_system(config: &SystemConfig, potential: &HartreeFockPotential) -> Result<SystemConfig> {
    let xi = config.sample.interaction;
    let mut out = config.clone();
    out.sample.interaction = 0.0;
    if xi == 0.0 {
        return Ok(out);
    }
    if hermiticity_error(&potential.potential) > 1e-12 {
        return Err(Error::InvalidArgument("Hartree-Fock potential is not Hermitian".into()));
    }
    out.sample.hamiltonian = &config.sample.hamiltonian + &potential.potential * Complex64::new(xi, 0.0);
    let report = check_spectral_condition(&out, &ScanSpec::default());
    if !report.passed {
        return Err(Error::SpectralViolation(report.violations.len()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{real_sample, single_dot, site_vector, LeadSpec, Scenario};
    use nalgebra::DMatrix;

    fn two_site(w01: f64, xi: f64) -> SystemConfig {
        let mut sample = real_sample(&[&[0.1, -0.4], &[-0.4, -0.2]]);
        sample.pair_potential = DMatrix::from_row_slice(2, 2, &[0.0, w01, w01, 0.0]);
        sample.interaction = xi;
        SystemConfig {
            sample,
            leads: vec![
                LeadSpec::new(0.5, site_vector(2, 0), 5.0, 0.1),
                LeadSpec::new(0.5, site_vector(2, 1), 5.0, -0.1),
            ],
            hopping: 1.0,
            scenario: Scenario::Partitioned,
            equilibrium: None,
        }
    }

    #[test]
    fn zero_pair_potential_gives_zero() {
        let hf = build_potential(&two_site(0.0, 0.3), &QuadratureSpec::default()).unwrap();
        assert_eq!(hf.potential, CMatrix::zeros(2, 2));
        let single = build_potential(&single_dot(0.0, 0.4, 1.0, 0.1, 0.0), &QuadratureSpec::default()).unwrap();
        assert_eq!(single.potential, CMatrix::zeros(1, 1));
    }

    #[test]
    fn hartree_uses_the_other_site() {
        let cfg = two_site(1.0, 0.1);
        let q = QuadratureSpec::with_tol(1e-12);
        let hf = build_potential(&cfg, &q).unwrap();
        let c = ness_density_matrix(&cfg, &[Site::Sample(0), Site::Sample(1)], &q).unwrap();
        assert!((hf.hartree[(0, 0)].re - c.values[(1, 1)].re).abs() < 1e-14);
        assert!((hf.hartree[(1, 1)].re - c.values[(0, 0)].re).abs() < 1e-14);
        assert!((hf.exchange[(0, 1)] - c.values[(0, 1)]).norm() < 1e-14);
        assert!(hermiticity_error(&hf.potential) < 1e-12);
    }

    #[test]
    fn hf_system_shifts_the_sample() {
        let cfg = two_site(1.0, 0.05);
        let hf = build_potential(&cfg, &QuadratureSpec::default()).unwrap();
        let sys = hf_system(&cfg, &hf).unwrap();
        assert_eq!(sys.sample.interaction, 0.0);
        let diff = &sys.sample.hamiltonian - &cfg.sample.hamiltonian;
        assert!((diff - &hf.potential * Complex64::new(0.05, 0.0)).camax() < 1e-15);
        let unchanged = hf_system(&two_site(1.0, 0.0), &hf).unwrap();
        assert_eq!(unchanged, two_site(1.0, 0.0));
    }

    #[test]
    fn hf_system_rechecks_spectral_condition() {
        let cfg = two_site(1.0, 1.0);
        let mut hf = build_potential(&cfg, &QuadratureSpec::default()).unwrap();
        // an artificially huge shift pushes a level far below the band
        hf.potential[(0, 0)] = Complex64::new(-40.0, 0.0);
        assert!(matches!(hf_system(&cfg, &hf), Err(Error::SpectralViolation(_))));
    }
}
