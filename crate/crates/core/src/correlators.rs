//! Two-point functions of the non-interacting steady state.
//!
//! Conventions: `C_xy = ⟨a*_y a_x⟩ = ⟨δ_x|ρ δ_y⟩` for the one-particle
//! density `ρ`, and `G^<(t; x, y) = i⟨δ_x|e^{-ith} ρ δ_y⟩`. The density is
//! expanded in the stationary scattering states `ψ_j(E)` incoming from lead
//! `j`,
//!
//! `ρ = (1/π) Σ_j ∫_{band j} f_j(E) |ψ_j(E)⟩⟨ψ_j(E)| dE`,
//!
//! which on sample sites is the familiar `d_j² r(E - v_j) |mφ_j⟩⟨mφ_j| dE/√(2π)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::leads::{lead_mode, lead_resolvent_entry, BandGeometry};
use crate::linalg::fermi;
use crate::model::{CMatrix, Site, SystemConfig};
use crate::quadrature::{integrate_pieces, QuadratureSpec};
use crate::spectral::resolvent;
use crate::transport::energy_breakpoints;

/// Measure constant in front of `d_j² r(E - v_j) (mφ_j)(mφ_j)* dE` for the
/// sample block. Calibrated against the equilibrium Fermi function of long
/// truncations; equals `1/√(2π)`.
pub const DENSITY_MEASURE: f64 = 0.398_942_280_401_432_7;

/// Scattering states `ψ_j(E)` restricted to `sites`, for every lead whose
/// band contains `E` (others are left `None`).
pub fn scattering_states(config: &SystemConfig, e: f64, sites: &[Site]) -> Result<Vec<Option<Vec<Complex64>>>> {
    let c = config.hopping;
    let inside: Vec<bool> = config.leads.iter().map(|l| (e - l.bias).abs() < 2.0 * c).collect();
    if !inside.iter().any(|&b| b) {
        return Ok(vec![None; config.n_leads()]);
    }
    let m = resolvent(config, e)?;
    let mphi: Vec<_> = config.leads.iter().map(|l| &m * &l.coupling_vector).collect();
    // ⟨φ_k| m φ_j⟩
    let overlap = |k: usize, j: usize| config.leads[k].coupling_vector.dotc(&mphi[j]);
    let mut out = Vec::with_capacity(config.n_leads());
    for (j, lead) in config.leads.iter().enumerate() {
        if !inside[j] {
            out.push(None);
            continue;
        }
        let u0 = lead_mode(0, e, lead.bias, c);
        let amp = lead.coupling * u0;
        let psi = sites
            .iter()
            .map(|&s| match s {
                Site::Sample(x) => -mphi[j][x] * amp,
                Site::Lead { lead: k, pos } => {
                    let direct = if k == j { lead_mode(pos, e, lead.bias, c) } else { 0.0 };
                    let lk = &config.leads[k];
                    let scattered = if lk.coupling == 0.0 || amp == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        lead_resolvent_entry(pos, 0, e, lk.bias, c) * overlap(k, j) * (amp * lk.coupling)
                    };
                    Complex64::new(direct, 0.0) + scattered
                }
            })
            .collect();
        out.push(Some(psi));
    }
    Ok(out)
}

fn check_sites(config: &SystemConfig, sites: &[Site]) -> Result<()> {
    for s in sites {
        match *s {
            Site::Sample(x) if x >= config.n_sites() => {
                return Err(Error::InvalidArgument(format!("sample site {x} out of range")))
            }
            Site::Lead { lead, .. } if lead >= config.n_leads() => {
                return Err(Error::InvalidArgument(format!("lead {lead} out of range")))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Occupation weights used in a spectral integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Filling {
    /// `f_j`
    Lesser,
    /// `f_j - 1`
    Greater,
    /// `1`
    Spectral,
}

fn filling(config: &SystemConfig, j: usize, e: f64, kind: Filling) -> f64 {
    let l = &config.leads[j];
    match kind {
        Filling::Lesser => fermi(l.beta * (e - l.bias - l.mu)),
        Filling::Greater => fermi(l.beta * (e - l.bias - l.mu)) - 1.0,
        Filling::Spectral => 1.0,
    }
}

/// `(1/π) Σ_j ∫ w_j(E) e^{-itE} ψ_j(x) ψ_j(y)* dE` for each requested
/// filling, packed as consecutive `|X|×|X|` complex blocks (row-major, re/im).
fn spectral_matrices(
    config: &SystemConfig,
    sites: &[Site],
    t: f64,
    kinds: &[Filling],
    spec: &QuadratureSpec,
) -> Result<(Vec<CMatrix>, f64)> {
    check_sites(config, sites)?;
    let n = sites.len();
    let block = 2 * n * n;
    let integrand = |e: f64, out: &mut [f64]| -> Result<()> {
        let states = scattering_states(config, e, sites)?;
        let phase = Complex64::from_polar(1.0 / std::f64::consts::PI, -t * e);
        for (j, psi) in states.iter().enumerate() {
            let Some(psi) = psi else { continue };
            for (q, &kind) in kinds.iter().enumerate() {
                let w = phase * filling(config, j, e, kind);
                if w == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let base = q * block;
                for a in 0..n {
                    let wa = psi[a] * w;
                    for (b, pb) in psi.iter().enumerate() {
                        let z = wa * pb.conj();
                        let idx = base + 2 * (a * n + b);
                        out[idx] += z.re;
                        out[idx + 1] += z.im;
                    }
                }
            }
        }
        Ok(())
    };
    let geo = BandGeometry::new(&config.leads.iter().map(|l| l.bias).collect::<Vec<_>>(), config.hopping);
    let mut breaks = energy_breakpoints(config);
    breaks.extend(geo.thresholds);
    let spec = spec.for_phase(t);
    let r = integrate_pieces(integrand, kinds.len() * block, &breaks, &spec)?;
    let mats = (0..kinds.len())
        .map(|q| {
            CMatrix::from_fn(n, n, |a, b| {
                let idx = q * block + 2 * (a * n + b);
                Complex64::new(r.value[idx], r.value[idx + 1])
            })
        })
        .collect();
    Ok((mats, r.error))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub sites: Vec<Site>,
    /// `C_xy = ⟨a*_y a_x⟩`.
    pub values: CMatrix,
    pub quadrature_error: f64,
    /// Constant of the sample-block density integral; see [`DENSITY_MEASURE`].
    pub normalization: f64,
}

impl CorrelationMatrix {
    pub fn get(&self, x: Site, y: Site) -> Option<Complex64> {
        let i = self.sites.iter().position(|&s| s == x)?;
        let j = self.sites.iter().position(|&s| s == y)?;
        Some(self.values[(i, j)])
    }
}

/// Steady-state correlation matrix of the non-interacting system on `sites`.
/// The interaction strength of `config` is ignored.
pub fn ness_density_matrix(config: &SystemConfig, sites: &[Site], spec: &QuadratureSpec) -> Result<CorrelationMatrix> {
    let (mut mats, err) = spectral_matrices(config, sites, 0.0, &[Filling::Lesser], spec)?;
    Ok(CorrelationMatrix {
        sites: sites.to_vec(),
        values: mats.remove(0),
        quadrature_error: err,
        normalization: DENSITY_MEASURE,
    })
}

/// All sample sites followed by the first `depth` sites of every lead.
pub fn window_sites(config: &SystemConfig, depth: usize) -> Vec<Site> {
    let mut s: Vec<Site> = (0..config.n_sites()).map(Site::Sample).collect();
    for lead in 0..config.n_leads() {
        s.extend((0..depth).map(|pos| Site::Lead { lead, pos }));
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenKind {
    Lesser,
    Greater,
    Retarded,
    Advanced,
}

impl std::str::FromStr for GreenKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lesser" => Ok(GreenKind::Lesser),
            "greater" => Ok(GreenKind::Greater),
            "retarded" => Ok(GreenKind::Retarded),
            "advanced" => Ok(GreenKind::Advanced),
            _ => Err(Error::InvalidArgument(format!("unknown Green function kind `{s}`"))),
        }
    }
}

/// The four Green–Keldysh functions at one time difference and site pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenSet {
    pub t: f64,
    pub lesser: Complex64,
    pub greater: Complex64,
    /// Anticommutator function `A(t) = ⟨{a*_y, τ^t(a_x)}⟩`, integrated on its own.
    pub spectral: Complex64,
    pub quadrature_error: f64,
}

/// Step function with `θ(0) = 1/2`.
fn step(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        0.0
    } else {
        0.5
    }
}

impl GreenSet {
    /// `G^r(t) = iθ(-t) A(t)`.
    pub fn retarded(&self) -> Complex64 {
        Complex64::new(0.0, step(-self.t)) * self.spectral
    }

    /// `G^a(t) = -iθ(t) A(t)`.
    pub fn advanced(&self) -> Complex64 {
        Complex64::new(0.0, -step(self.t)) * self.spectral
    }

    pub fn get(&self, kind: GreenKind) -> Complex64 {
        match kind {
            GreenKind::Lesser => self.lesser,
            GreenKind::Greater => self.greater,
            GreenKind::Retarded => self.retarded(),
            GreenKind::Advanced => self.advanced(),
        }
    }
}

pub fn green_functions(config: &SystemConfig, t: f64, x: Site, y: Site, spec: &QuadratureSpec) -> Result<GreenSet> {
    let sites = if x == y { vec![x] } else { vec![x, y] };
    let (mats, err) = spectral_matrices(
        config,
        &sites,
        t,
        &[Filling::Lesser, Filling::Greater, Filling::Spectral],
        spec,
    )?;
    let (i, j) = (0, sites.len() - 1);
    let i_unit = Complex64::new(0.0, 1.0);
    Ok(GreenSet {
        t,
        lesser: i_unit * mats[0][(i, j)],
        greater: i_unit * mats[1][(i, j)],
        spectral: mats[2][(i, j)],
        quadrature_error: err,
    })
}

/// `G^<(t; x, y) = i⟨a*_y τ^t(a_x)⟩`.
pub fn lesser_green(config: &SystemConfig, t: f64, x: Site, y: Site, spec: &QuadratureSpec) -> Result<Complex64> {
    let sites = if x == y { vec![x] } else { vec![x, y] };
    let (mats, _) = spectral_matrices(config, &sites, t, &[Filling::Lesser], spec)?;
    Ok(Complex64::new(0.0, 1.0) * mats[0][(0, sites.len() - 1)])
}

/// Time series of one Green function kind on `times`.
pub fn green_series(
    config: &SystemConfig,
    kind: GreenKind,
    x: Site,
    y: Site,
    times: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<Complex64>> {
    times
        .iter()
        .map(|&t| Ok(green_functions(config, t, x, y, spec)?.get(kind)))
        .collect()
}

/// Charge current out of lead `j` from the lesser function:
/// `-2 d_j Re Σ_x G^<(0; 0_j, x) φ_j(x)`.
pub fn steady_current_from_lesser(config: &SystemConfig, j: usize, spec: &QuadratureSpec) -> Result<f64> {
    let lead = config
        .leads
        .get(j)
        .ok_or_else(|| Error::InvalidArgument(format!("lead {j} out of range")))?;
    if lead.coupling == 0.0 {
        return Ok(0.0);
    }
    let mut sites = vec![Site::Lead { lead: j, pos: 0 }];
    sites.extend((0..config.n_sites()).map(Site::Sample));
    let c = ness_density_matrix(config, &sites, spec)?;
    let s: Complex64 = (0..config.n_sites())
        .map(|x| Complex64::new(0.0, 1.0) * c.values[(0, x + 1)] * lead.coupling_vector[x])
        .sum();
    Ok(-2.0 * lead.coupling * s.re)
}

/// Energy current out of lead `j`: `-2 c d_j Im Σ_x C_{1_j, x} φ_j(x)`.
pub fn steady_energy_current(config: &SystemConfig, j: usize, spec: &QuadratureSpec) -> Result<f64> {
    let lead = &config.leads[j];
    if lead.coupling == 0.0 {
        return Ok(0.0);
    }
    let mut sites = vec![Site::Lead { lead: j, pos: 1 }];
    sites.extend((0..config.n_sites()).map(Site::Sample));
    let c = ness_density_matrix(config, &sites, spec)?;
    let s: Complex64 = (0..config.n_sites())
        .map(|x| c.values[(0, x + 1)] * lead.coupling_vector[x])
        .sum();
    Ok(-2.0 * config.hopping * lead.coupling * s.im)
}

/// `Ĝ^<(ω) = ∫ G^<(t) e^{iωt} dt = 2i Σ_j f_j(ω) ψ_j(x;ω) ψ_j(y;ω)*`,
/// evaluated directly from the spectral integrand.
pub fn lesser_spectral(config: &SystemConfig, omega: f64, x: Site, y: Site) -> Result<Complex64> {
    spectral_point(config, omega, x, y, Filling::Lesser)
}

/// `Ĝ^>(ω)`, with `f_j - 1` in place of `f_j`.
pub fn greater_spectral(config: &SystemConfig, omega: f64, x: Site, y: Site) -> Result<Complex64> {
    spectral_point(config, omega, x, y, Filling::Greater)
}

fn spectral_point(config: &SystemConfig, omega: f64, x: Site, y: Site, kind: Filling) -> Result<Complex64> {
    check_sites(config, &[x, y])?;
    let states = scattering_states(config, omega, &[x, y])?;
    let mut s = Complex64::new(0.0, 0.0);
    for (j, psi) in states.iter().enumerate() {
        if let Some(psi) = psi {
            s += psi[0] * psi[1].conj() * filling(config, j, omega, kind);
        }
    }
    Ok(Complex64::new(0.0, 2.0) * s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "window", rename_all = "snake_case")]
pub enum Window {
    None,
    /// Multiply by `exp(-(t/width)²)` before transforming.
    Gaussian {
        width: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FourierSamples {
    pub omega: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<Complex64>,
    pub window: Window,
    /// `|G|` at the window edges relative to the peak, after windowing.
    pub edge_ratio: f64,
}

/// Trapezoidal `Ĝ(ω) = ∫ G(t) e^{iωt} dt` on a uniform time grid.
pub fn fourier_transform(times: &[f64], values: &[Complex64], omega: &[f64], window: Window) -> Result<FourierSamples> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::InvalidArgument(
            "time grid and samples must match and have at least two points".into(),
        ));
    }
    let dt = times[1] - times[0];
    let windowed: Vec<Complex64> = times
        .iter()
        .zip(values)
        .map(|(&t, &g)| match window {
            Window::None => g,
            Window::Gaussian { width } => g * (-(t / width).powi(2)).exp(),
        })
        .collect();
    let peak = windowed.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let edge = windowed[0].norm().max(windowed[windowed.len() - 1].norm());
    let edge_ratio = if peak > 0.0 { edge / peak } else { 0.0 };
    if edge_ratio > 1e-6 {
        return Err(Error::UndecayedWindow { edge: edge_ratio });
    }
    let last = times.len() - 1;
    let out = omega
        .par_iter()
        .map(|&w| {
            let mut s = Complex64::new(0.0, 0.0);
            for (k, (&t, &g)) in times.iter().zip(&windowed).enumerate() {
                let wt = if k == 0 || k == last { 0.5 } else { 1.0 };
                s += g * Complex64::from_polar(wt, w * t);
            }
            s * dt
        })
        .collect();
    Ok(FourierSamples {
        omega: omega.to_vec(),
        values: out,
        window,
        edge_ratio,
    })
}

/// Inverse of [`fourier_transform`] on a uniform frequency grid:
/// `G(t) = (1/2π) ∫ Ĝ(ω) e^{-iωt} dω` (rectangle rule, exact for the
/// discrete transform pair on dual grids).
pub fn inverse_fourier(omega: &[f64], values: &[Complex64], times: &[f64]) -> Vec<Complex64> {
    let dw = if omega.len() > 1 { omega[1] - omega[0] } else { 1.0 };
    times
        .iter()
        .map(|&t| {
            let s: Complex64 = omega
                .iter()
                .zip(values)
                .map(|(&w, &g)| g * Complex64::from_polar(1.0, -w * t))
                .sum();
            s * dw / (2.0 * std::f64::consts::PI)
        })
        .collect()
}
