//! First-order mean-field dynamics on the finite-lead system.
//!
//! The correlation matrix evolves with `h + ξ v_HF[C⁰(t)]`, where `C⁰(t)` is
//! the non-interacting evolution of the same initial state. For a
//! quasi-free initial state this agrees with the interacting evolution to
//! first order in `ξ`, so the difference to exact diagonalization is `O(ξ²)`
//! at every time.

use num_complex::Complex64;

use super::{OracleConfig, OracleRun};
use crate::error::{Error, Result};
use crate::hartree_fock::potential_from_correlations;
use crate::linalg::{fermi, hermitian_eigen, hermitian_function};
use crate::model::{CMatrix, FiniteHamiltonian, Scenario, SystemConfig};

/// Largest RK4 step.
pub const MAX_STEP: f64 = 0.002;

fn initial_correlation(config: &SystemConfig, oc: &OracleConfig, fh: &FiniteHamiltonian) -> CMatrix {
    let n = config.n_sites();
    let dim = fh.layout.dim();
    let len = fh.layout.lead_len;
    let mut c = CMatrix::zeros(dim, dim);
    c.view_mut((0, 0), (n, n)).copy_from(&oc.sample_state.matrix(n));
    for (j, lead) in config.leads.iter().enumerate() {
        let mut hj = CMatrix::zeros(len, len);
        for x in 0..len.saturating_sub(1) {
            hj[(x, x + 1)] = Complex64::new(-config.hopping, 0.0);
            hj[(x + 1, x)] = Complex64::new(-config.hopping, 0.0);
        }
        let f = hermitian_function(&hj, |e| Complex64::new(fermi(lead.beta * (e - lead.mu)), 0.0));
        let off = fh.layout.lead_site(j, 0);
        c.view_mut((off, off), (len, len)).copy_from(&f);
    }
    c
}

/// Sudden switch in the partitioned scenario; the output has the same layout
/// as an oracle run (plateaus over the same window).
pub fn evolve_mean_field(config: &SystemConfig, oc: &OracleConfig) -> Result<OracleRun> {
    config.ensure_valid()?;
    if config.scenario != Scenario::Partitioned {
        return Err(Error::InvalidArgument(
            "mean-field dynamics needs a quasi-free initial state (partitioned scenario)".into(),
        ));
    }
    let oc = OracleConfig {
        profile: super::Profile::Sudden,
        t0: 0.0,
        ..oc.clone()
    };
    oc.check(config)?;
    let fh = FiniteHamiltonian::new(config, oc.lead_len)?;
    let n = config.n_sites();
    let m = config.n_leads();
    let xi = config.sample.interaction;
    let w = &config.sample.pair_potential;
    let h = fh.dense(1.0, 1.0);
    let (lam, v) = hermitian_eigen(&h);
    let c_init = initial_correlation(config, &oc, &fh);
    let c0_eig = v.adjoint() * &c_init * &v;
    let v_sample = v.rows(0, n).into_owned();
    // sample block of the free evolution, `u X u†` with `u = V_S e^{-iλt}`
    let free_sample_at = |t: f64| {
        let mut u = v_sample.clone();
        for (a, mut col) in u.column_iter_mut().enumerate() {
            col *= Complex64::from_polar(1.0, -lam[a] * t);
        }
        &u * &c0_eig * u.adjoint()
    };
    let base = fh.entries(1.0, 1.0);
    let hf_at = |t: f64| {
        let pot = potential_from_correlations(w, &free_sample_at(t));
        let mut trip = base.clone();
        for x in 0..n {
            for y in 0..n {
                let z = pot.potential[(x, y)] * xi;
                if z != Complex64::new(0.0, 0.0) {
                    trip.push((x, y, z));
                }
            }
        }
        trip
    };
    // -i[H, C] for Hermitian H and C: with P = CH, HC = P†
    let rhs = |trip: &[(usize, usize, Complex64)], c: &CMatrix| {
        let mut p = CMatrix::zeros(c.nrows(), c.ncols());
        for &(i, k, val) in trip {
            p.column_mut(k).axpy(val, &c.column(i), Complex64::new(1.0, 0.0));
        }
        (p.adjoint() - p) * Complex64::new(0.0, -1.0)
    };

    let times = oc.output_times();
    let mut charge = vec![Vec::with_capacity(times.len()); m];
    let mut energy = vec![Vec::with_capacity(times.len()); m];
    let mut sample_c = Vec::with_capacity(times.len());
    let layout = fh.layout;
    let mut c = c_init.clone();
    let mut t_now = 0.0;
    let mut herm: f64 = 0.0;
    let mut trace_drift: f64 = 0.0;
    let trace0 = c.trace().re;
    for &t in &times {
        let span = t - t_now;
        if span > 0.0 {
            let steps = (span / MAX_STEP).ceil() as usize;
            let dt = span / steps as f64;
            for _ in 0..steps {
                let h0 = hf_at(t_now);
                let hm = hf_at(t_now + 0.5 * dt);
                let h1 = hf_at(t_now + dt);
                let half = Complex64::new(0.5 * dt, 0.0);
                let k1 = rhs(&h0, &c);
                let k2 = rhs(&hm, &(&c + &k1 * half));
                let k3 = rhs(&hm, &(&c + &k2 * half));
                let k4 = rhs(&h1, &(&c + &k3 * Complex64::new(dt, 0.0)));
                c += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
                    * Complex64::new(dt / 6.0, 0.0);
                t_now += dt;
            }
            t_now = t;
        }
        herm = herm.max(crate::linalg::hermiticity_error(&c));
        trace_drift = trace_drift.max((c.trace().re - trace0).abs());
        for (j, lead) in config.leads.iter().enumerate() {
            let phi_sum = |row: usize| -> Complex64 { (0..n).map(|x| c[(row, x)] * lead.coupling_vector[x]).sum() };
            charge[j].push(2.0 * lead.coupling * phi_sum(layout.lead_site(j, 0)).im);
            let e = if oc.lead_len >= 2 {
                -2.0 * config.hopping * lead.coupling * phi_sum(layout.lead_site(j, 1)).im
            } else {
                0.0
            };
            energy[j].push(e);
        }
        sample_c.push(c.view((0, 0), (n, n)).into_owned());
    }
    let mut run = OracleRun::assemble(&oc, config.hopping, times, charge, energy, sample_c);
    run.hermiticity_error = herm;
    run.number_drift = trace_drift;
    Ok(run)
}
