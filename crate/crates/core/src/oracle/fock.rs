//! Exact diagonalization on the fermionic Fock space, one particle-number
//! sector at a time.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{OracleConfig, OracleRun, Profile, MAX_FOCK_SITES};
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::model::{CMatrix, FiniteHamiltonian, Scenario, SystemConfig};

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

pub(crate) struct FockSpace {
    pub sectors: Vec<Vec<u32>>,
    index: Vec<usize>,
}

fn parity_below(s: u32, site: usize) -> f64 {
    if (s & ((1u32 << site) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl FockSpace {
    pub fn new(sites: usize) -> Self {
        let mut sectors = vec![Vec::new(); sites + 1];
        let mut index = vec![0; 1 << sites];
        for s in 0..(1u32 << sites) {
            let k = s.count_ones() as usize;
            index[s as usize] = sectors[k].len();
            sectors[k].push(s);
        }
        FockSpace { sectors, index }
    }

    /// `dΓ(A) = Σ A_xy a*_x a_y` restricted to a sector.
    pub fn one_body(&self, sector: usize, a: &[(usize, usize, Complex64)]) -> CMatrix {
        let states = &self.sectors[sector];
        let mut m = CMatrix::zeros(states.len(), states.len());
        for (col, &s) in states.iter().enumerate() {
            for &(x, y, v) in a {
                if s & (1 << y) == 0 {
                    continue;
                }
                if x == y {
                    m[(col, col)] += v;
                    continue;
                }
                if s & (1 << x) != 0 {
                    continue;
                }
                let s1 = s ^ (1 << y);
                let sign = parity_below(s, y) * parity_below(s1, x);
                let s2 = s1 | (1 << x);
                m[(self.index[s2 as usize], col)] += v * sign;
            }
        }
        m
    }

    /// `Σ_{x<y} w(x,y) n_x n_y` on the first `w.nrows()` sites.
    pub fn pair_interaction(&self, sector: usize, w: &nalgebra::DMatrix<f64>) -> CMatrix {
        let states = &self.sectors[sector];
        let n = w.nrows();
        let mut m = CMatrix::zeros(states.len(), states.len());
        for (i, &s) in states.iter().enumerate() {
            let mut e = 0.0;
            for x in 0..n {
                for y in x + 1..n {
                    if s & (1 << x) != 0 && s & (1 << y) != 0 {
                        e += w[(x, y)];
                    }
                }
            }
            m[(i, i)] = Complex64::new(e, 0.0);
        }
        m
    }
}

fn nonzero(m: &CMatrix) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if m[(r, c)] != CZERO {
                out.push((r, c, m[(r, c)]));
            }
        }
    }
    out
}

fn dense(dim: usize, entries: &[(usize, usize, Complex64)]) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for &(r, c, v) in entries {
        m[(r, c)] += v;
    }
    m
}

/// One-body matrix of the initial state's "Gibbs exponent" `k` with
/// `ρ₀ ∝ exp(-dΓ(k))` in the partitioned scenario.
fn partitioned_exponent(config: &SystemConfig, oc: &OracleConfig, fh: &FiniteHamiltonian) -> CMatrix {
    let n = config.n_sites();
    let dim = fh.layout.dim();
    let mut k = CMatrix::zeros(dim, dim);
    let (nu, v) = hermitian_eigen(&oc.sample_state.matrix(n));
    let clamp = 1e-15;
    let ks =
        &v * CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            nu.iter().map(|&x| {
                let x = x.clamp(clamp, 1.0 - clamp);
                Complex64::new(((1.0 - x) / x).ln(), 0.0)
            }),
        )) * v.adjoint();
    k.view_mut((0, 0), (n, n)).copy_from(&ks);
    let len = fh.layout.lead_len;
    for (j, lead) in config.leads.iter().enumerate() {
        let off = fh.layout.lead_site(j, 0);
        for x in 0..len {
            k[(off + x, off + x)] = Complex64::new(-lead.beta * lead.mu, 0.0);
            if x + 1 < len {
                let h = Complex64::new(-lead.beta * config.hopping, 0.0);
                k[(off + x, off + x + 1)] = h;
                k[(off + x + 1, off + x)] = h;
            }
        }
    }
    k
}

/// Normalized `exp(-K_N)` per sector.
fn gibbs(blocks: Vec<CMatrix>) -> Vec<CMatrix> {
    let eig: Vec<(Vec<f64>, CMatrix)> = blocks.par_iter().map(hermitian_eigen).collect();
    let lo = eig
        .iter()
        .flat_map(|(l, _)| l.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let mut rho: Vec<CMatrix> = eig
        .iter()
        .map(|(l, v)| {
            let mut scaled = v.clone();
            for (c, &lam) in l.iter().enumerate() {
                let wgt = (-(lam - lo)).exp();
                scaled.column_mut(c).iter_mut().for_each(|z| *z *= wgt);
            }
            scaled * v.adjoint()
        })
        .collect();
    let z: f64 = rho.iter().map(|r| r.trace().re).sum();
    for r in rho.iter_mut() {
        *r /= Complex64::new(z, 0.0);
    }
    rho
}

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub(super) fn run(config: &SystemConfig, oc: &OracleConfig) -> Result<OracleRun> {
    let fh = FiniteHamiltonian::new(config, oc.lead_len)?;
    let sites = fh.layout.dim();
    if sites > MAX_FOCK_SITES {
        return Err(Error::DimensionCap {
            sites,
            max: MAX_FOCK_SITES,
        });
    }
    let n = config.n_sites();
    let m = config.n_leads();
    let xi = config.sample.interaction;
    let space = FockSpace::new(sites);
    let n_sectors = space.sectors.len();
    let w = &config.sample.pair_potential;
    let interaction: Vec<CMatrix> = (0..n_sectors)
        .map(|s| space.pair_interaction(s, w) * Complex64::new(xi, 0.0))
        .collect();
    let hamiltonian =
        |s: usize, coupling: f64, bias: f64| space.one_body(s, &fh.entries(coupling, bias)) + &interaction[s];

    let exponents: Vec<CMatrix> = match config.scenario {
        Scenario::Partitioned => {
            let k = nonzero(&partitioned_exponent(config, oc, &fh));
            (0..n_sectors).map(|s| space.one_body(s, &k)).collect()
        }
        Scenario::PartitionFree => {
            let eq = config.reference_equilibrium();
            (0..n_sectors)
                .map(|s| {
                    let shifted = hamiltonian(s, 1.0, 0.0)
                        - CMatrix::identity(space.sectors[s].len(), space.sectors[s].len())
                            * Complex64::new(eq.mu * s as f64, 0.0);
                    shifted * Complex64::new(eq.beta, 0.0)
                })
                .collect()
        }
    };
    let mut rho = gibbs(exponents);
    let trace0: f64 = rho.iter().map(|r| r.trace().re).sum();
    let number = |r: &[CMatrix]| r.iter().enumerate().map(|(s, b)| s as f64 * b.trace().re).sum::<f64>();
    let number0 = number(&rho);

    let t0 = oc.ramp_start();
    if t0 < 0.0 && oc.profile != Profile::Sudden {
        let steps = ((-t0) / oc.dt - 1e-9).ceil().max(1.0) as usize;
        let h = -t0 / steps as f64;
        for st in 0..steps {
            let tm = t0 + (st as f64 + 0.5) * h;
            let chi = oc.profile.chi(tm / t0);
            let (ct, cv) = match config.scenario {
                Scenario::Partitioned => (chi, 1.0),
                Scenario::PartitionFree => (1.0, chi),
            };
            rho = rho
                .par_iter()
                .enumerate()
                .map(|(s, r)| {
                    let (lam, v) = hermitian_eigen(&hamiltonian(s, ct, cv));
                    let mut vu = v.clone();
                    for (c, &l) in lam.iter().enumerate() {
                        let ph = Complex64::from_polar(1.0, -l * h);
                        vu.column_mut(c).iter_mut().for_each(|z| *z *= ph);
                    }
                    let u = vu * v.adjoint();
                    &u * r * u.adjoint()
                })
                .collect();
        }
    }
    let trace_ramp: f64 = rho.iter().map(|r| r.trace().re).sum();
    let number_ramp = number(&rho);

    // one-body observables
    let h_t = dense(sites, &fh.tunneling);
    let mut ops: Vec<CMatrix> = Vec::new();
    let minus_i = Complex64::new(0.0, -1.0);
    for j in 0..m {
        let mut proj = CMatrix::zeros(sites, sites);
        let mut hj = CMatrix::zeros(sites, sites);
        for x in 0..oc.lead_len {
            let s = fh.layout.lead_site(j, x);
            proj[(s, s)] = Complex64::new(1.0, 0.0);
            if x + 1 < oc.lead_len {
                hj[(s, s + 1)] = Complex64::new(-config.hopping, 0.0);
                hj[(s + 1, s)] = Complex64::new(-config.hopping, 0.0);
            }
        }
        ops.push(commutator(&h_t, &proj) * minus_i);
        ops.push(commutator(&h_t, &hj) * minus_i);
    }
    // ⟨a*_y a_x⟩ = ⟨dΓ(|δy⟩⟨δx|)⟩
    for x in 0..n {
        for y in 0..n {
            let mut e = CMatrix::zeros(sites, sites);
            e[(y, x)] = Complex64::new(1.0, 0.0);
            ops.push(e);
        }
    }
    let op_entries: Vec<Vec<(usize, usize, Complex64)>> = ops.iter().map(nonzero).collect();

    // eigenbasis of the final Hamiltonian, per sector
    struct Sector {
        energies: Vec<f64>,
        rho: CMatrix,
        ops: Vec<CMatrix>,
    }
    let sectors: Vec<Sector> = rho
        .par_iter()
        .enumerate()
        .map(|(s, r)| {
            let (energies, v) = hermitian_eigen(&hamiltonian(s, 1.0, 1.0));
            let vt = v.adjoint();
            let rho_e = &vt * r * &v;
            let ops = op_entries
                .iter()
                .map(|e| {
                    let o = space.one_body(s, e);
                    // transposed so that ⟨O⟩ = Σ_ab ρ_ab O^T_ab
                    (&vt * o * &v).transpose()
                })
                .collect();
            Sector {
                energies,
                rho: rho_e,
                ops,
            }
        })
        .collect();

    let times = oc.output_times();
    let n_ops = ops.len();
    let values: Vec<Vec<Complex64>> = times
        .par_iter()
        .map(|&t| {
            let mut acc = vec![CZERO; n_ops];
            for sec in &sectors {
                let u: Vec<Complex64> = sec
                    .energies
                    .iter()
                    .map(|e| Complex64::from_polar(1.0, -e * t))
                    .collect();
                let d = u.len();
                for b in 0..d {
                    for a in 0..d {
                        let r = u[a] * sec.rho[(a, b)] * u[b].conj();
                        if r == CZERO {
                            continue;
                        }
                        for (k, o) in sec.ops.iter().enumerate() {
                            acc[k] += r * o[(a, b)];
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut charge = vec![Vec::with_capacity(times.len()); m];
    let mut energy = vec![Vec::with_capacity(times.len()); m];
    let mut sample_c = Vec::with_capacity(times.len());
    let mut herm: f64 = 0.0;
    for v in &values {
        for j in 0..m {
            charge[j].push(v[2 * j].re);
            energy[j].push(v[2 * j + 1].re);
        }
        let c = CMatrix::from_fn(n, n, |x, y| v[2 * m + x * n + y]);
        herm = herm.max(crate::linalg::hermiticity_error(&c));
        sample_c.push(c);
    }
    let mut run = OracleRun::assemble(oc, config.hopping, times, charge, energy, sample_c);
    run.trace_drift = (trace0 - 1.0).abs().max((trace_ramp - trace0).abs());
    run.number_drift = (number_ramp - number0).abs();
    run.hermiticity_error = herm;
    Ok(run)
}
