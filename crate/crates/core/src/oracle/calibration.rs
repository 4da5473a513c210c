//! Equilibrium correlation matrix of a long truncated system, from a
//! Chebyshev expansion of the Fermi function.

use num_complex::Complex64;

use super::chebyshev::{apply_polynomial, chebyshev_coefficients, fermi_terms, SparseHermitian};
use crate::error::{Error, Result};
use crate::linalg::fermi;
use crate::model::{CMatrix, FiniteHamiltonian, Site, SystemConfig};

/// `⟨δx| f(β(h_v - v - μ)) |δy⟩` on the given sites, for a configuration
/// in which every lead has the same `β` and `v + μ`.
pub fn truncated_density_matrix(config: &SystemConfig, sites: &[Site], lead_len: usize) -> Result<CMatrix> {
    config.ensure_valid()?;
    let l0 = &config.leads[0];
    let level = l0.bias + l0.mu;
    for lead in &config.leads {
        if (lead.beta - l0.beta).abs() > 1e-14 || (lead.bias + lead.mu - level).abs() > 1e-14 {
            return Err(Error::InvalidArgument(
                "calibration needs equal beta and v + mu in every lead".into(),
            ));
        }
    }
    let fh = FiniteHamiltonian::new(config, lead_len)?;
    let dim = fh.layout.dim();
    let h = SparseHermitian::from_triplets(dim, &fh.entries(1.0, 1.0));
    let bounds = h.gershgorin();
    let terms = fermi_terms(l0.beta, 0.5 * (bounds.1 - bounds.0));
    let coeffs = chebyshev_coefficients(|e| fermi(l0.beta * (e - level)), bounds, terms);
    let k = sites.len();
    let mut x = vec![Complex64::new(0.0, 0.0); dim * k];
    for (q, s) in sites.iter().enumerate() {
        if let Site::Lead { pos, .. } = s {
            if *pos >= lead_len {
                return Err(Error::LeadTruncation(lead_len));
            }
        }
        x[fh.layout.index(*s) * k + q] = Complex64::new(1.0, 0.0);
    }
    let y = apply_polynomial(&h, bounds, &coeffs, &x, k);
    Ok(CMatrix::from_fn(k, k, |a, b| y[fh.layout.index(sites[a]) * k + b]))
}
