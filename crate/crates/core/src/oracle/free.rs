//! One-particle propagation of the finite-lead system.
//!
//! The initial density matrix is kept diagonal, `ρ₀ = Y F Y†`, and probe
//! vectors are moved in the Heisenberg picture, so that
//! `⟨δp|ρ(t)|δq⟩ = (Y† e^{iht}δp)† F (Y† e^{iht}δq)`. A ramp is applied to
//! `Y` in the Schrödinger picture first.

use num_complex::Complex64;
use rayon::prelude::*;

use super::chebyshev::{propagate_block, SparseHermitian};
use super::{OracleConfig, OracleRun, Profile};
use crate::error::Result;
use crate::linalg::{fermi, hermitian_eigen};
use crate::model::{CMatrix, FiniteHamiltonian, Scenario, SystemConfig};

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

enum Frame {
    /// Partitioned: eigenbasis of the sample block of `C₀` and the sine
    /// modes of each lead (`modes[k*L + x]`).
    Modes {
        v_s: CMatrix,
        modes: Vec<f64>,
        eps: Vec<f64>,
    },
    /// Partition-free: site basis; `ρ₀` is diagonal in the eigenbasis of the
    /// coupled unbiased Hamiltonian.
    Sites { y0: Vec<Complex64> },
}

struct Setup<'a> {
    config: &'a SystemConfig,
    fh: FiniteHamiltonian,
    frame: Frame,
    occ: Vec<f64>,
    dim: usize,
}

/// Sine modes of the open chain with hopping `-c`: eigenvalues and the
/// orthogonal (symmetric) eigenvector matrix.
pub(crate) fn chain_modes(len: usize, c: f64) -> (Vec<f64>, Vec<f64>) {
    let l1 = (len + 1) as f64;
    let norm = (2.0 / l1).sqrt();
    let eps = (0..len)
        .map(|k| -2.0 * c * (std::f64::consts::PI * (k + 1) as f64 / l1).cos())
        .collect();
    let mut modes = vec![0.0; len * len];
    for k in 0..len {
        for x in 0..len {
            modes[k * len + x] = norm * (std::f64::consts::PI * ((k + 1) * (x + 1)) as f64 / l1).sin();
        }
    }
    (eps, modes)
}

impl<'a> Setup<'a> {
    fn new(config: &'a SystemConfig, oc: &OracleConfig) -> Result<Self> {
        let fh = FiniteHamiltonian::new(config, oc.lead_len)?;
        let dim = fh.layout.dim();
        let (frame, occ) = match config.scenario {
            Scenario::Partitioned => {
                let n = config.n_sites();
                let (nu, v_s) = hermitian_eigen(&oc.sample_state.matrix(n));
                let mut occ: Vec<f64> = nu.iter().map(|v| v.clamp(0.0, 1.0)).collect();
                let (eps, modes) = chain_modes(oc.lead_len, config.hopping);
                for lead in &config.leads {
                    occ.extend(eps.iter().map(|e| fermi(lead.beta * (e - lead.mu))));
                }
                (Frame::Modes { v_s, modes, eps }, occ)
            }
            Scenario::PartitionFree => {
                let eq = config.reference_equilibrium();
                let (lam, b) = hermitian_eigen(&fh.dense(1.0, 0.0));
                let occ = lam.iter().map(|e| fermi(eq.beta * (e - eq.mu))).collect();
                let mut y0 = vec![CZERO; dim * dim];
                for r in 0..dim {
                    for k in 0..dim {
                        y0[r * dim + k] = b[(r, k)];
                    }
                }
                (Frame::Sites { y0 }, occ)
            }
        };
        Ok(Setup {
            config,
            fh,
            frame,
            occ,
            dim,
        })
    }

    /// Spectral bounds, taken from the site-basis matrix (same spectrum).
    fn bounds(&self, coupling: f64, bias: f64) -> (f64, f64) {
        SparseHermitian::from_triplets(self.dim, &self.fh.entries(coupling, bias)).gershgorin()
    }

    fn hamiltonian(&self, coupling: f64, bias: f64) -> SparseHermitian {
        match &self.frame {
            Frame::Sites { .. } => SparseHermitian::from_triplets(self.dim, &self.fh.entries(coupling, bias)),
            Frame::Modes { v_s, modes, eps } => {
                let cfg = self.config;
                let n = cfg.n_sites();
                let len = self.fh.layout.lead_len;
                let hs = v_s.adjoint() * &cfg.sample.hamiltonian * v_s;
                let mut t = Vec::new();
                for a in 0..n {
                    for b in 0..n {
                        if hs[(a, b)] != CZERO {
                            t.push((a, b, hs[(a, b)]));
                        }
                    }
                }
                for (j, lead) in cfg.leads.iter().enumerate() {
                    let off = n + j * len;
                    for (k, e) in eps.iter().enumerate() {
                        t.push((off + k, off + k, Complex64::new(e + bias * lead.bias, 0.0)));
                    }
                    // d ⟨φ_j| V_S e_a⟩
                    let z: Vec<Complex64> = (0..n)
                        .map(|a| {
                            (0..n)
                                .map(|x| lead.coupling_vector[x].conj() * v_s[(x, a)])
                                .sum::<Complex64>()
                                * lead.coupling
                        })
                        .collect();
                    for k in 0..len {
                        let s0 = modes[k * len] * coupling;
                        for (a, za) in z.iter().enumerate() {
                            if *za != CZERO && s0 != 0.0 {
                                t.push((off + k, a, za * s0));
                                t.push((a, off + k, za.conj() * s0));
                            }
                        }
                    }
                }
                SparseHermitian::from_triplets(self.dim, &t)
            }
        }
    }

    fn to_frame(&self, v: &[Complex64]) -> Vec<Complex64> {
        match &self.frame {
            Frame::Sites { .. } => v.to_vec(),
            Frame::Modes { v_s, modes, .. } => {
                let n = v_s.nrows();
                let len = self.fh.layout.lead_len;
                let mut out = vec![CZERO; self.dim];
                for a in 0..n {
                    out[a] = (0..n).map(|x| v_s[(x, a)].conj() * v[x]).sum();
                }
                for j in 0..self.config.n_leads() {
                    let off = n + j * len;
                    for k in 0..len {
                        out[off + k] = (0..len).map(|x| v[off + x] * modes[k * len + x]).sum();
                    }
                }
                out
            }
        }
    }

    /// `(χ_T, χ_v)` for a switching factor.
    fn scales(&self, chi: f64) -> (f64, f64) {
        match self.config.scenario {
            Scenario::Partitioned => (chi, 1.0),
            Scenario::PartitionFree => (1.0, chi),
        }
    }
}

/// `Y† B` for row-major `Y` (`rows × k`) and `B` (`rows × p`), via the
/// precomputed row-major `Y†`.
fn adjoint_apply(y_adj: &[Complex64], rows: usize, b: &[Complex64], p: usize) -> Vec<Complex64> {
    let k = y_adj.len() / rows;
    let mut out = vec![CZERO; k * p];
    out.par_chunks_mut(p).enumerate().for_each(|(i, dst)| {
        let row = &y_adj[i * rows..(i + 1) * rows];
        for (r, yv) in row.iter().enumerate() {
            if *yv == CZERO {
                continue;
            }
            let src = &b[r * p..(r + 1) * p];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += yv * s;
            }
        }
    });
    out
}

fn column_weights(y: &[Complex64], rows: usize, occ: &[f64]) -> f64 {
    let k = occ.len();
    let mut norms = vec![0.0; k];
    for r in 0..rows {
        for (c, nv) in norms.iter_mut().enumerate() {
            *nv += y[r * k + c].norm_sqr();
        }
    }
    norms.iter().zip(occ).map(|(a, f)| a * f).sum()
}

pub(super) fn run(config: &SystemConfig, oc: &OracleConfig) -> Result<OracleRun> {
    let setup = Setup::new(config, oc)?;
    let dim = setup.dim;
    let n = config.n_sites();
    let m = config.n_leads();
    let layout = setup.fh.layout;
    let len = layout.lead_len;

    // Y, row-major dim × dim
    let mut y: Option<Vec<Complex64>> = match &setup.frame {
        Frame::Sites { y0 } => Some(y0.clone()),
        Frame::Modes { .. } => None,
    };
    let t0 = oc.ramp_start();
    let mut number_drift: f64 = 0.0;
    if t0 < 0.0 && oc.profile != Profile::Sudden {
        let mut yy = y.take().unwrap_or_else(|| {
            let mut id = vec![CZERO; dim * dim];
            for r in 0..dim {
                id[r * dim + r] = Complex64::new(1.0, 0.0);
            }
            id
        });
        let before = column_weights(&yy, dim, &setup.occ);
        let steps = ((-t0) / oc.dt - 1e-9).ceil().max(1.0) as usize;
        let h = -t0 / steps as f64;
        for s in 0..steps {
            let tm = t0 + (s as f64 + 0.5) * h;
            let (ct, cv) = setup.scales(oc.profile.chi(tm / t0));
            let ham = setup.hamiltonian(ct, cv);
            propagate_block(&ham, setup.bounds(ct, cv), h, &mut yy, dim);
        }
        let after = column_weights(&yy, dim, &setup.occ);
        number_drift = number_drift.max((after - before).abs());
        y = Some(yy);
    }
    let y_adj: Option<Vec<Complex64>> = y.map(|yy| {
        let mut a = vec![CZERO; dim * dim];
        for r in 0..dim {
            for k in 0..dim {
                a[k * dim + r] = yy[r * dim + k].conj();
            }
        }
        a
    });

    // probes: per lead δ_{0j}, δ_{1j}, φ_j; then the sample sites
    let mut probes: Vec<Vec<Complex64>> = Vec::new();
    let unit = |i: usize| {
        let mut v = vec![CZERO; dim];
        v[i] = Complex64::new(1.0, 0.0);
        v
    };
    for (j, lead) in config.leads.iter().enumerate() {
        probes.push(unit(layout.lead_site(j, 0)));
        probes.push(if len >= 2 {
            unit(layout.lead_site(j, 1))
        } else {
            vec![CZERO; dim]
        });
        let mut phi = vec![CZERO; dim];
        phi[..n].copy_from_slice(lead.coupling_vector.as_slice());
        probes.push(phi);
    }
    for x in 0..n {
        probes.push(unit(x));
    }
    let p = probes.len();
    let mut b = vec![CZERO; dim * p];
    for (q, v) in probes.iter().enumerate() {
        let f = setup.to_frame(v);
        for r in 0..dim {
            b[r * p + q] = f[r];
        }
    }
    let norms0: Vec<f64> = (0..p)
        .map(|q| (0..dim).map(|r| b[r * p + q].norm_sqr()).sum::<f64>().sqrt())
        .collect();

    let ham = setup.hamiltonian(1.0, 1.0);
    let bounds = setup.bounds(1.0, 1.0);
    let times = oc.output_times();
    let mut charge = vec![Vec::with_capacity(times.len()); m];
    let mut energy = vec![Vec::with_capacity(times.len()); m];
    let mut sample_c = Vec::with_capacity(times.len());
    let mut herm: f64 = 0.0;
    let mut prev_t = 0.0;
    for &t in &times {
        // e^{+ih(t - prev)}
        propagate_block(&ham, bounds, -(t - prev_t), &mut b, p);
        prev_t = t;
        for q in 0..p {
            let nq: f64 = (0..dim).map(|r| b[r * p + q].norm_sqr()).sum::<f64>().sqrt();
            number_drift = number_drift.max((nq - norms0[q]).abs());
        }
        let c = match &y_adj {
            Some(a) => adjoint_apply(a, dim, &b, p),
            None => b.clone(),
        };
        let mut corr = CMatrix::zeros(p, p);
        for (k, f) in setup.occ.iter().enumerate() {
            if *f == 0.0 {
                continue;
            }
            let row = &c[k * p..(k + 1) * p];
            for q1 in 0..p {
                let a = row[q1].conj() * *f;
                for q2 in 0..p {
                    corr[(q1, q2)] += a * row[q2];
                }
            }
        }
        herm = herm.max(crate::linalg::hermiticity_error(&corr));
        for (j, lead) in config.leads.iter().enumerate() {
            charge[j].push(2.0 * lead.coupling * corr[(3 * j, 3 * j + 2)].im);
            energy[j].push(-2.0 * config.hopping * lead.coupling * corr[(3 * j + 1, 3 * j + 2)].im);
        }
        sample_c.push(CMatrix::from_fn(n, n, |a, bb| corr[(3 * m + a, 3 * m + bb)]));
    }
    let mut run = OracleRun::assemble(oc, config.hopping, times, charge, energy, sample_c);
    run.number_drift = number_drift;
    run.hermiticity_error = herm;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_function;
    use crate::model::single_dot;

    #[test]
    fn chain_modes_diagonalize_the_lead() {
        let (eps, s) = chain_modes(7, 1.3);
        for k in 0..7 {
            for x in 0..7 {
                let mut hv = 0.0;
                if x > 0 {
                    hv -= 1.3 * s[k * 7 + x - 1];
                }
                if x + 1 < 7 {
                    hv -= 1.3 * s[k * 7 + x + 1];
                }
                assert!((hv - eps[k] * s[k * 7 + x]).abs() < 1e-14);
            }
        }
    }

    /// Direct dense evolution of the full correlation matrix.
    fn dense_reference(config: &SystemConfig, len: usize, t: f64) -> CMatrix {
        let fh = FiniteHamiltonian::new(config, len).unwrap();
        let dim = fh.layout.dim();
        let mut c0 = CMatrix::zeros(dim, dim);
        c0[(0, 0)] = Complex64::new(0.5, 0.0);
        for (j, lead) in config.leads.iter().enumerate() {
            let off = fh.layout.lead_site(j, 0);
            let mut hj = CMatrix::zeros(len, len);
            for x in 0..len - 1 {
                hj[(x, x + 1)] = Complex64::new(-config.hopping, 0.0);
                hj[(x + 1, x)] = Complex64::new(-config.hopping, 0.0);
            }
            let f = hermitian_function(&hj, |e| Complex64::new(fermi(lead.beta * (e - lead.mu)), 0.0));
            c0.view_mut((off, off), (len, len)).copy_from(&f);
        }
        let h = fh.dense(1.0, 1.0);
        let u = hermitian_function(&h, |e| Complex64::from_polar(1.0, -t * e));
        &u * c0 * u.adjoint()
    }

    #[test]
    fn matches_dense_evolution() {
        let mut cfg = single_dot(0.2, 0.5, 3.0, 0.3, -0.2);
        cfg.leads[1].bias = 0.1;
        let len = 12;
        let oc = OracleConfig::sudden(len, 6.0, 0.5);
        let run = run(&cfg, &oc).unwrap();
        let layout = FiniteHamiltonian::new(&cfg, len).unwrap().layout;
        for (i, &t) in run.times.iter().enumerate() {
            let c = dense_reference(&cfg, len, t);
            for j in 0..2 {
                let want = 2.0 * 0.5 * c[(layout.lead_site(j, 0), 0)].im;
                assert!((run.charge_current[j][i] - want).abs() < 1e-12, "t={t}");
                let want_e = -2.0 * 0.5 * c[(layout.lead_site(j, 1), 0)].im;
                assert!((run.energy_current[j][i] - want_e).abs() < 1e-12);
            }
            assert!((run.density[0][i] - c[(0, 0)].re).abs() < 1e-12);
        }
        assert!(run.number_drift < 1e-12);
    }

    #[test]
    fn ramp_with_trivial_profile_matches_sudden() {
        let cfg = single_dot(0.0, 0.4, 2.0, 0.2, -0.2);
        let sudden = run(&cfg, &OracleConfig::sudden(20, 10.0, 0.5)).unwrap();
        // a ramp whose factor is already 1 everywhere only adds decoupled-free time
        let ramp = run(&cfg, &OracleConfig::ramp(20, 10.0, 0.5, Profile::Sudden, -3.0)).unwrap();
        for (a, b) in sudden.charge_current[0].iter().zip(&ramp.charge_current[0]) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
