//! Finite-lead reference simulations: free-fermion propagation of the
//! one-particle density matrix, exact diagonalization for interacting
//! samples, switching protocols and plateau extraction.

pub mod calibration;
pub mod chebyshev;
mod fock;
mod free;
pub mod mean_field;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen;
use crate::model::{CMatrix, Scenario, SystemConfig};

/// Largest one-particle dimension accepted by the many-body path.
pub const MAX_FOCK_SITES: usize = 14;

/// Switching profile `χ(s)`, `s = t/t₀`, with `χ = 1` for `s ≤ 0` and
/// `χ = 0` for `s ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Sudden,
    Linear,
    Smooth,
}

impl Profile {
    pub fn chi(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 1.0;
        }
        if s >= 1.0 {
            return 0.0;
        }
        match self {
            Profile::Sudden => 1.0,
            Profile::Linear => 1.0 - s,
            Profile::Smooth => 0.5 * (1.0 + (std::f64::consts::PI * s).cos()),
        }
    }
}

/// Initial one-particle state of the sample in the partitioned scenario.
#[derive(Clone, Debug, PartialEq)]
pub enum SampleState {
    /// `½·1`
    Half,
    Empty,
    Full,
    /// Any Hermitian matrix with spectrum in `[0, 1]`.
    Density(CMatrix),
}

impl SampleState {
    pub fn matrix(&self, n: usize) -> CMatrix {
        match self {
            SampleState::Half => CMatrix::identity(n, n) * num_complex::Complex64::new(0.5, 0.0),
            SampleState::Empty => CMatrix::zeros(n, n),
            SampleState::Full => CMatrix::identity(n, n),
            SampleState::Density(m) => m.clone(),
        }
    }

    /// A valid density obtained by passing the spectrum of a Hermitian
    /// matrix through the logistic function.
    pub fn from_hermitian(h: &CMatrix) -> SampleState {
        SampleState::Density(crate::linalg::hermitian_function(h, |e| {
            num_complex::Complex64::new(crate::linalg::fermi(e), 0.0)
        }))
    }

    pub fn label(&self) -> &'static str {
        match self {
            SampleState::Half => "half",
            SampleState::Empty => "empty",
            SampleState::Full => "full",
            SampleState::Density(_) => "density",
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let m = self.matrix(n);
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::InvalidArgument(format!("sample state must be {n}x{n}")));
        }
        if crate::linalg::hermiticity_error(&m) > 1e-12 {
            return Err(Error::InvalidArgument("sample state is not Hermitian".into()));
        }
        let (ev, _) = hermitian_eigen(&m);
        if ev.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
            return Err(Error::InvalidArgument("sample state spectrum leaves [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub lead_len: usize,
    pub t_max: f64,
    /// Output spacing, and the step of the piecewise-constant ramp.
    pub dt: f64,
    pub profile: Profile,
    /// Start of the ramp (`t₀ ≤ 0`); the coupling (or bias) is fully on at 0.
    pub t0: f64,
    pub sample_state: SampleState,
    pub enforce_recurrence: bool,
    /// Repeat ramped runs at `dt/2` and require the plateau to move < 0.1%.
    pub check_dt: bool,
}

impl OracleConfig {
    pub fn sudden(lead_len: usize, t_max: f64, dt: f64) -> Self {
        OracleConfig {
            lead_len,
            t_max,
            dt,
            profile: Profile::Sudden,
            t0: 0.0,
            sample_state: SampleState::Half,
            enforce_recurrence: true,
            check_dt: false,
        }
    }

    pub fn ramp(lead_len: usize, t_max: f64, dt: f64, profile: Profile, t0: f64) -> Self {
        OracleConfig {
            profile,
            t0,
            ..Self::sudden(lead_len, t_max, dt)
        }
    }

    /// `2L/(2c)`: the time a signal at the maximal group velocity needs to
    /// reach the far end of a lead and return.
    pub fn recurrence(&self, hopping: f64) -> f64 {
        self.lead_len as f64 / hopping
    }

    fn ramp_start(&self) -> f64 {
        if self.profile == Profile::Sudden {
            0.0
        } else {
            self.t0.min(0.0)
        }
    }

    fn output_times(&self) -> Vec<f64> {
        let steps = (self.t_max / self.dt + 1e-9).floor() as usize;
        (0..=steps).map(|k| k as f64 * self.dt).collect()
    }

    fn check(&self, config: &SystemConfig) -> Result<()> {
        if self.lead_len < 1 {
            return Err(Error::LeadTruncation(self.lead_len));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidArgument("time grid needs dt > 0 and t_max >= 0".into()));
        }
        if self.t0 > 0.0 {
            return Err(Error::InvalidArgument("ramp start t0 must be <= 0".into()));
        }
        let rec = self.recurrence(config.hopping);
        let start = self.ramp_start();
        if self.enforce_recurrence && self.t_max - start > rec * (1.0 + 1e-12) {
            return Err(Error::BeyondRecurrence {
                t_max: self.t_max - start,
                recurrence: rec,
            });
        }
        if config.scenario == Scenario::Partitioned {
            self.sample_state.validate(config.n_sites())?;
        }
        Ok(())
    }

    /// `[0.5, 0.9]·t_rec` measured from the start of the perturbation,
    /// clipped to the output range.
    pub fn plateau_window(&self, hopping: f64) -> (f64, f64) {
        let rec = self.recurrence(hopping);
        let start = self.ramp_start();
        let lo = (start + 0.5 * rec).max(0.0);
        let hi = (start + 0.9 * rec).min(self.t_max);
        (lo, hi)
    }
}

/// Least-squares straight line `a + b (t - t̄)` over a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Plateau {
    pub value: f64,
    pub slope: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub accepted: bool,
}

pub fn fit_plateau(times: &[f64], values: &[f64], window: (f64, f64)) -> Plateau {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 - 1e-9 && **t <= window.1 + 1e-9)
        .map(|(t, v)| (*t, *v))
        .collect();
    let n = pts.len();
    if n == 0 {
        return Plateau {
            value: f64::NAN,
            slope: f64::NAN,
            window,
            points: 0,
            accepted: false,
        };
    }
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let vm = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let slope = if stt > 0.0 {
        pts.iter().map(|p| (p.0 - tm) * (p.1 - vm)).sum::<f64>() / stt
    } else {
        0.0
    };
    let width = window.1 - window.0;
    Plateau {
        value: vm,
        slope,
        window,
        points: n,
        accepted: n >= 2 && slope.abs() * width <= 0.01 * vm.abs() + 1e-12,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRun {
    pub times: Vec<f64>,
    /// `[lead][time]`
    pub charge_current: Vec<Vec<f64>>,
    pub energy_current: Vec<Vec<f64>>,
    /// `[sample site][time]`
    pub density: Vec<Vec<f64>>,
    /// Sample block of `C(t)`, one matrix per output time.
    #[serde(skip)]
    pub sample_correlation: Vec<CMatrix>,
    pub plateau: Vec<Plateau>,
    pub energy_plateau: Vec<Plateau>,
    pub window: (f64, f64),
    pub recurrence: f64,
    pub number_drift: f64,
    pub hermiticity_error: f64,
    /// Trace drift of the many-body density matrix (0 for free runs).
    pub trace_drift: f64,
    /// Relative plateau change when the ramp step is halved.
    pub dt_change: Option<f64>,
    pub lead_len: usize,
}

impl OracleRun {
    pub(crate) fn assemble(
        oc: &OracleConfig,
        hopping: f64,
        times: Vec<f64>,
        charge_current: Vec<Vec<f64>>,
        energy_current: Vec<Vec<f64>>,
        sample_correlation: Vec<CMatrix>,
    ) -> OracleRun {
        let window = oc.plateau_window(hopping);
        let n = sample_correlation.first().map_or(0, |c| c.nrows());
        let density = (0..n)
            .map(|x| sample_correlation.iter().map(|c| c[(x, x)].re).collect())
            .collect();
        let plateau = charge_current.iter().map(|j| fit_plateau(&times, j, window)).collect();
        let energy_plateau = energy_current.iter().map(|j| fit_plateau(&times, j, window)).collect();
        OracleRun {
            times,
            charge_current,
            energy_current,
            density,
            sample_correlation,
            plateau,
            energy_plateau,
            window,
            recurrence: oc.recurrence(hopping),
            number_drift: 0.0,
            hermiticity_error: 0.0,
            trace_drift: 0.0,
            dt_change: None,
            lead_len: oc.lead_len,
        }
    }

    pub fn plateau_values(&self) -> Vec<f64> {
        self.plateau.iter().map(|p| p.value).collect()
    }

    pub fn all_accepted(&self) -> bool {
        self.plateau.iter().all(|p| p.accepted)
    }
}

fn require_free(config: &SystemConfig) -> Result<()> {
    if config.sample.interaction != 0.0 {
        return Err(Error::InvalidArgument(
            "free evolution needs xi = 0; use the interacting oracle".into(),
        ));
    }
    Ok(())
}

/// Sudden switch at `t = 0` for a non-interacting sample.
pub fn evolve_free(config: &SystemConfig, oc: &OracleConfig) -> Result<OracleRun> {
    config.ensure_valid()?;
    require_free(config)?;
    let oc = OracleConfig {
        profile: Profile::Sudden,
        t0: 0.0,
        ..oc.clone()
    };
    oc.check(config)?;
    free::run(config, &oc)
}

/// Sudden switch at `t = 0`, exact diagonalization of the many-body problem.
pub fn evolve_interacting(config: &SystemConfig, oc: &OracleConfig) -> Result<OracleRun> {
    config.ensure_valid()?;
    let oc = OracleConfig {
        profile: Profile::Sudden,
        t0: 0.0,
        ..oc.clone()
    };
    oc.check(config)?;
    fock::run(config, &oc)
}

/// Switch on the coupling (partitioned) or the bias (partition-free) along
/// `χ(t/t₀)` over `[t₀, 0]`, then run freely.
pub fn evolve_adiabatic(config: &SystemConfig, oc: &OracleConfig) -> Result<OracleRun> {
    config.ensure_valid()?;
    oc.check(config)?;
    let single = |o: &OracleConfig| {
        if config.sample.interaction == 0.0 {
            free::run(config, o)
        } else {
            fock::run(config, o)
        }
    };
    let mut run = single(oc)?;
    if oc.check_dt && oc.ramp_start() < 0.0 {
        let fine = OracleConfig {
            dt: 0.5 * oc.dt,
            ..oc.clone()
        };
        let other = single(&fine)?;
        let change = run
            .plateau
            .iter()
            .zip(&other.plateau)
            .map(|(a, b)| (a.value - b.value).abs() / a.value.abs().max(1e-300))
            .fold(0.0, f64::max);
        run.dt_change = Some(change);
        if !(change < 1e-3) {
            return Err(Error::NotConverged {
                what: "ramp step halving".into(),
                change,
            });
        }
    }
    Ok(run)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub labels: Vec<String>,
    /// `[state][lead]`
    pub plateaus: Vec<Vec<f64>>,
    /// Largest pairwise plateau difference relative to the largest plateau
    /// magnitude, over all leads.
    pub spread: f64,
    pub lead_len: usize,
}

pub fn initial_state_independence(
    config: &SystemConfig,
    oc: &OracleConfig,
    states: &[SampleState],
) -> Result<IndependenceReport> {
    if config.scenario != Scenario::Partitioned {
        return Err(Error::InvalidArgument(
            "initial-state independence applies to the partitioned scenario".into(),
        ));
    }
    if states.is_empty() {
        return Err(Error::InvalidArgument("no sample states given".into()));
    }
    let runs: Vec<Result<OracleRun>> = states
        .par_iter()
        .map(|s| {
            let o = OracleConfig {
                sample_state: s.clone(),
                ..oc.clone()
            };
            if config.sample.interaction == 0.0 {
                evolve_free(config, &o)
            } else {
                evolve_interacting(config, &o)
            }
        })
        .collect();
    let mut plateaus = Vec::new();
    for r in runs {
        plateaus.push(r?.plateau_values());
    }
    let m = config.n_leads();
    let mut spread: f64 = 0.0;
    for j in 0..m {
        let scale = plateaus.iter().map(|p| p[j].abs()).fold(0.0, f64::max).max(1e-300);
        for a in &plateaus {
            for b in &plateaus {
                spread = spread.max((a[j] - b[j]).abs() / scale);
            }
        }
    }
    Ok(IndependenceReport {
        labels: states.iter().map(|s| s.label().to_string()).collect(),
        plateaus,
        spread,
        lead_len: oc.lead_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_hit_endpoints() {
        for p in [Profile::Linear, Profile::Smooth, Profile::Sudden] {
            assert_eq!(p.chi(-0.3), 1.0);
            assert_eq!(p.chi(0.0), 1.0);
            assert_eq!(p.chi(1.0), 0.0);
            assert_eq!(p.chi(2.0), 0.0);
        }
        assert!((Profile::Linear.chi(0.25) - 0.75).abs() < 1e-15);
        assert!((Profile::Smooth.chi(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn plateau_fit_of_a_line() {
        let t: Vec<f64> = (0..101).map(|k| k as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|x| 2.0 + 0.5 * (x - 5.0)).collect();
        let p = fit_plateau(&t, &v, (2.0, 8.0));
        assert!((p.value - 2.0).abs() < 1e-12);
        assert!((p.slope - 0.5).abs() < 1e-12);
        assert!(!p.accepted);
        let flat = vec![0.3; t.len()];
        let p = fit_plateau(&t, &flat, (2.0, 8.0));
        assert!(p.accepted && p.points == 61);
        assert!(fit_plateau(&t, &flat, (20.0, 30.0)).value.is_nan());
    }

    #[test]
    fn window_before_recurrence() {
        let oc = OracleConfig::sudden(100, 90.0, 0.5);
        assert_eq!(oc.plateau_window(1.0), (50.0, 90.0));
        let ramp = OracleConfig::ramp(100, 60.0, 0.5, Profile::Linear, -40.0);
        assert_eq!(ramp.plateau_window(1.0), (10.0, 50.0));
    }
}
