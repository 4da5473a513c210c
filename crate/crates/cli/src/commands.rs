use std::collections::BTreeMap;

use clap::ValueEnum;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use neqt_core::correlators::{
    greater_spectral, green_functions, lesser_spectral, steady_current_from_lesser, steady_energy_current,
};
use neqt_core::hartree_fock::{build_potential, hf_system};
use neqt_core::model::Site;
use neqt_core::oracle::mean_field::evolve_mean_field;
use neqt_core::oracle::{
    evolve_adiabatic, evolve_free, evolve_interacting, initial_state_independence, OracleConfig, OracleRun, Profile,
    SampleState, MAX_FOCK_SITES,
};
use neqt_core::quadrature::QuadratureSpec;
use neqt_core::spectral::{check_spectral_condition, ScanSpec};
use neqt_core::transport::{entropy_production, lb_currents, onsager_matrix, transmission_sweep};
use neqt_core::{CMatrix, SystemConfig};

use crate::table::Table;
use crate::{
    Cli, CliError, Command, CurrentsArgs, GreensArgs, OnsagerArgs, OracleArgs, OracleMode, Outcome, ProfileArg,
    SpectralArgs, StateArg, TransmissionArgs,
};

type Params = BTreeMap<String, String>;

/// Default total size for many-body runs; the cap itself takes minutes.
const DEFAULT_FOCK_SITES: usize = 10;

fn params<const N: usize>(pairs: [(&str, String); N]) -> Params {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn outcome(table: Table, report: serde_json::Value, parameters: Params) -> Outcome {
    Outcome {
        table,
        report,
        parameters,
        failure: None,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "auto".to_string(), |v| format!("{v:e}"))
}

pub fn dispatch(cli: &Cli, config: &SystemConfig) -> Result<Outcome, CliError> {
    let spec = QuadratureSpec::with_tol(cli.tol);
    match &cli.command {
        Command::CheckSpectral(a) => check_spectral(config, a),
        Command::Transmission(a) => transmission(config, a),
        Command::Currents(a) => currents(config, a, &spec),
        Command::Entropy => entropy(config, &spec),
        Command::Onsager(a) => onsager(config, a, &spec),
        Command::Greens(a) => greens(config, a, &spec),
        Command::HartreeFock => hartree_fock(config, &spec),
        Command::Oracle(a) => oracle(config, a, cli.seed),
    }
}

fn check_spectral(config: &SystemConfig, a: &SpectralArgs) -> Result<Outcome, CliError> {
    if a.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let report = check_spectral_condition(
        config,
        &ScanSpec {
            points: a.points,
            margin: a.margin,
        },
    );
    let mut table = Table::new(["E", "sigma_min"]);
    for v in &report.violations {
        table.push(vec![v.energy, v.sigma_min]);
    }
    let failure = (!report.passed).then(|| {
        let list: Vec<String> = report
            .violations
            .iter()
            .map(|v| format!("E* = {:.6} (sigma_min {:.3e})", v.energy, v.sigma_min))
            .collect();
        CliError::Numerical(format!("spectral condition violated: {}", list.join(", ")))
    });
    Ok(Outcome {
        table,
        report: serde_json::to_value(&report).expect("report serializes"),
        parameters: params([("points", a.points.to_string()), ("margin", opt(a.margin))]),
        failure,
    })
}

fn transmission(config: &SystemConfig, a: &TransmissionArgs) -> Result<Outcome, CliError> {
    let th = config.thresholds();
    let emin = a.emin.unwrap_or(th[0]);
    let emax = a.emax.unwrap_or(th[th.len() - 1]);
    if !(emax >= emin) {
        return Err(CliError::Usage(format!("empty energy range [{emin}, {emax}]")));
    }
    let energies: Vec<f64> = match a.points {
        0 => Vec::new(),
        1 => vec![emin],
        n => (0..n)
            .map(|i| emin + (emax - emin) * i as f64 / (n - 1) as f64)
            .collect(),
    };
    let m = config.n_leads();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|j| (0..m).map(move |k| (j, k)))
        .filter(|(j, k)| j != k)
        .collect();
    let mut cols = vec!["E".to_string()];
    cols.extend(pairs.iter().map(|(j, k)| format!("T_{}_{}", j + 1, k + 1)));
    let mut table = Table::new(cols);
    for t in transmission_sweep(config, &energies)? {
        let mut row = vec![t.energy];
        row.extend(pairs.iter().map(|&(j, k)| t.t[(j, k)]));
        table.push(row);
    }
    let report = json!({ "points": energies.len(), "emin": emin, "emax": emax });
    Ok(outcome(
        table,
        report,
        params([
            ("emin", format!("{emin:e}")),
            ("emax", format!("{emax:e}")),
            ("points", a.points.to_string()),
        ]),
    ))
}

fn currents(config: &SystemConfig, a: &CurrentsArgs, spec: &QuadratureSpec) -> Result<Outcome, CliError> {
    let (charge, energy, qerr) = if a.from_lesser {
        let m = config.n_leads();
        let charge = (0..m)
            .map(|j| steady_current_from_lesser(config, j, spec))
            .collect::<Result<Vec<_>, _>>()?;
        let energy = (0..m)
            .map(|j| steady_energy_current(config, j, spec))
            .collect::<Result<Vec<_>, _>>()?;
        (charge, energy, None)
    } else {
        let obs = lb_currents(config, spec)?;
        (obs.charge, obs.energy, Some(obs.quadrature_error))
    };
    let mut table = Table::new(["lead", "J", "E"]);
    for (j, (c, e)) in charge.iter().zip(&energy).enumerate() {
        table.push(vec![(j + 1) as f64, *c, *e]);
    }
    let energy_sum: f64 = energy
        .iter()
        .zip(&config.leads)
        .zip(&charge)
        .map(|((e, l), c)| e + l.bias * c)
        .sum();
    let report = json!({
        "method": if a.from_lesser { "lesser" } else { "landauer_buttiker" },
        "charge": charge,
        "energy": energy,
        "charge_sum": charge.iter().sum::<f64>(),
        "energy_sum": energy_sum,
        "quadrature_error": qerr,
    });
    Ok(outcome(
        table,
        report,
        params([("method", if a.from_lesser { "lesser" } else { "lb" }.to_string())]),
    ))
}

fn entropy(config: &SystemConfig, spec: &QuadratureSpec) -> Result<Outcome, CliError> {
    let rep = entropy_production(config, spec)?;
    let mut table = Table::new(["lead", "beta", "mu", "J", "E", "contribution"]);
    for (j, l) in config.leads.iter().enumerate() {
        let (c, e) = (rep.observables.charge[j], rep.observables.energy[j]);
        table.push(vec![(j + 1) as f64, l.beta, l.mu, c, e, -l.beta * (e - l.mu * c)]);
    }
    Ok(outcome(
        table,
        serde_json::to_value(&rep).expect("report serializes"),
        Params::new(),
    ))
}

fn onsager(config: &SystemConfig, a: &OnsagerArgs, spec: &QuadratureSpec) -> Result<Outcome, CliError> {
    let l = onsager_matrix(config, a.step, spec)?;
    let m = l.matrix.len();
    let mut cols = vec!["j".to_string()];
    cols.extend((1..=m).map(|k| format!("L_j_{k}")));
    let mut table = Table::new(cols);
    for (j, row) in l.matrix.iter().enumerate() {
        let mut r = vec![(j + 1) as f64];
        r.extend(row);
        table.push(r);
    }
    let report = json!({
        "matrix": l.matrix,
        "step": l.step,
        "max_abs": l.max_abs(),
        "max_asymmetry": l.max_asymmetry(),
        "max_column_sum": l.max_column_sum(),
        "richardson_delta": l.richardson_delta,
    });
    Ok(outcome(table, report, params([("step", format!("{:e}", a.step))])))
}

/// `s<k>` for sample site `k` (from 1), `l<j>:<p>` for lead `j` (from 1) at
/// distance `p` from its contact.
pub fn parse_site(s: &str, config: &SystemConfig) -> Result<Site, CliError> {
    let bad = || CliError::Usage(format!("bad site `{s}`: expected s<k> or l<j>:<p>"));
    if let Some(k) = s.strip_prefix('s') {
        let k: usize = k.parse().map_err(|_| bad())?;
        if k == 0 || k > config.n_sites() {
            return Err(CliError::Validation(format!(
                "sample site {k} out of range 1..={}",
                config.n_sites()
            )));
        }
        return Ok(Site::Sample(k - 1));
    }
    if let Some(rest) = s.strip_prefix('l') {
        let (j, p) = rest.split_once(':').ok_or_else(bad)?;
        let j: usize = j.parse().map_err(|_| bad())?;
        let pos: usize = p.parse().map_err(|_| bad())?;
        if j == 0 || j > config.n_leads() {
            return Err(CliError::Validation(format!(
                "lead {j} out of range 1..={}",
                config.n_leads()
            )));
        }
        return Ok(Site::Lead { lead: j - 1, pos });
    }
    Err(bad())
}

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn greens(config: &SystemConfig, a: &GreensArgs, spec: &QuadratureSpec) -> Result<Outcome, CliError> {
    let x = parse_site(&a.x, config)?;
    let y = parse_site(&a.y, config)?;
    let mut p = params([("x", a.x.clone()), ("y", a.y.clone()), ("points", a.points.to_string())]);
    if a.frequency {
        let th = config.thresholds();
        let wmin = a.wmin.unwrap_or(th[0] - 1.0);
        let wmax = a.wmax.unwrap_or(th[th.len() - 1] + 1.0);
        let mut table = Table::new(["omega", "lesser_re", "lesser_im", "greater_re", "greater_im"]);
        for w in grid(wmin, wmax, a.points) {
            let l = lesser_spectral(config, w, x, y)?;
            let g = greater_spectral(config, w, x, y)?;
            table.push(vec![w, l.re, l.im, g.re, g.im]);
        }
        p.insert("domain".into(), "frequency".into());
        p.insert("wmin".into(), format!("{wmin:e}"));
        p.insert("wmax".into(), format!("{wmax:e}"));
        let report = json!({ "domain": "frequency", "rows": table.rows.len() });
        return Ok(outcome(table, report, p));
    }
    let mut table = Table::new([
        "t",
        "lesser_re",
        "lesser_im",
        "greater_re",
        "greater_im",
        "retarded_re",
        "retarded_im",
        "advanced_re",
        "advanced_im",
    ]);
    let mut qerr: f64 = 0.0;
    for t in grid(a.tmin, a.tmax, a.points) {
        let g = green_functions(config, t, x, y, &spec.for_phase(t))?;
        qerr = qerr.max(g.quadrature_error);
        let (r, ad) = (g.retarded(), g.advanced());
        table.push(vec![
            t,
            g.lesser.re,
            g.lesser.im,
            g.greater.re,
            g.greater.im,
            r.re,
            r.im,
            ad.re,
            ad.im,
        ]);
    }
    p.insert("domain".into(), "time".into());
    p.insert("tmin".into(), format!("{:e}", a.tmin));
    p.insert("tmax".into(), format!("{:e}", a.tmax));
    Ok(outcome(
        table,
        json!({ "domain": "time", "rows": a.points, "quadrature_error": qerr }),
        p,
    ))
}

fn complex_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn hartree_fock(config: &SystemConfig, spec: &QuadratureSpec) -> Result<Outcome, CliError> {
    let potential = build_potential(config, spec)?;
    let corrected = hf_system(config, &potential)?;
    let bare = lb_currents(&config.with_interaction(0.0), spec)?;
    let hf = lb_currents(&corrected, spec)?;
    let mut table = Table::new(["lead", "J0", "J_HF", "E0", "E_HF"]);
    for j in 0..config.n_leads() {
        table.push(vec![
            (j + 1) as f64,
            bare.charge[j],
            hf.charge[j],
            bare.energy[j],
            hf.energy[j],
        ]);
    }
    let report = json!({
        "xi": config.sample.interaction,
        "potential": complex_rows(&potential.potential),
        "hartree": complex_rows(&potential.hartree),
        "exchange": complex_rows(&potential.exchange),
        "source_density": complex_rows(&potential.source),
        "currents_bare": bare,
        "currents_hf": hf,
    });
    Ok(outcome(table, report, Params::new()))
}

fn state(s: StateArg) -> SampleState {
    match s {
        StateArg::Half => SampleState::Half,
        StateArg::Empty => SampleState::Empty,
        StateArg::Full => SampleState::Full,
    }
}

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> SampleState {
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = Complex64::new(rng.gen_range(-3.0..3.0), 0.0);
        for j in 0..i {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    SampleState::from_hermitian(&h)
}

fn oracle_config(config: &SystemConfig, a: &OracleArgs) -> Result<OracleConfig, CliError> {
    let c = config.hopping;
    // mean-field runs are dense RK4 and only serve as a comparator for exact
    // diagonalization, so they share its size
    let small = matches!(a.mode, OracleMode::Interacting | OracleMode::MeanField)
        || (matches!(a.mode, OracleMode::Adiabatic | OracleMode::Independence) && config.sample.interaction != 0.0);
    let many_body = small && a.mode != OracleMode::MeanField;
    let lead_len = match a.lead_len {
        Some(l) => l,
        None if small => DEFAULT_FOCK_SITES.saturating_sub(config.n_sites()) / config.n_leads().max(1),
        None => 400,
    };
    if lead_len == 0 {
        return Err(CliError::Validation(format!(
            "no room for lead sites under the {MAX_FOCK_SITES}-site many-body cap"
        )));
    }
    if many_body && config.n_sites() + config.n_leads() * lead_len > MAX_FOCK_SITES {
        return Err(CliError::Validation(format!(
            "{} sites exceed the {MAX_FOCK_SITES}-site many-body cap; lower --lead-len",
            config.n_sites() + config.n_leads() * lead_len
        )));
    }
    if !(a.dt > 0.0) {
        return Err(CliError::Usage(format!("--dt must be positive (got {})", a.dt)));
    }
    let recurrence = lead_len as f64 / c;
    let profile = match a.profile {
        ProfileArg::Sudden => Profile::Sudden,
        ProfileArg::Linear => Profile::Linear,
        ProfileArg::Smooth => Profile::Smooth,
    };
    let mut oc = if a.mode == OracleMode::Adiabatic {
        let t0 = a.t0.unwrap_or(-0.4 * recurrence);
        let t_max = a.tmax.unwrap_or(t0.min(0.0) + 0.9 * recurrence);
        OracleConfig::ramp(lead_len, t_max, a.dt, profile, t0)
    } else {
        OracleConfig::sudden(lead_len, a.tmax.unwrap_or(0.9 * recurrence), a.dt)
    };
    oc.sample_state = state(a.state);
    oc.check_dt = a.check_dt;
    Ok(oc)
}

fn run_report(run: &OracleRun) -> serde_json::Value {
    serde_json::to_value(run).expect("run serializes")
}

fn oracle(config: &SystemConfig, a: &OracleArgs, seed: u64) -> Result<Outcome, CliError> {
    let oc = oracle_config(config, a)?;
    let mode = a
        .mode
        .to_possible_value()
        .expect("mode has a name")
        .get_name()
        .to_string();
    let mut p = params([
        ("mode", mode),
        ("lead_len", oc.lead_len.to_string()),
        ("tmax", format!("{:e}", oc.t_max)),
        ("dt", format!("{:e}", oc.dt)),
    ]);
    if a.mode == OracleMode::Independence {
        let mut states: Vec<SampleState> = a.states.iter().map(|&s| state(s)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        states.extend((0..a.random_states).map(|_| random_state(config.n_sites(), &mut rng)));
        let rep = initial_state_independence(config, &oc, &states)?;
        let mut cols = vec!["state".to_string()];
        cols.extend((1..=config.n_leads()).map(|j| format!("J_{j}")));
        let mut table = Table::new(cols);
        for (i, pl) in rep.plateaus.iter().enumerate() {
            let mut r = vec![(i + 1) as f64];
            r.extend(pl);
            table.push(r);
        }
        let failure = rep
            .plateaus
            .iter()
            .flatten()
            .any(|v| !v.is_finite())
            .then(|| CliError::Numerical("plateau rejected: no points in the fit window".into()));
        p.insert("random_states".into(), a.random_states.to_string());
        return Ok(Outcome {
            table,
            report: serde_json::to_value(&rep).expect("report serializes"),
            parameters: p,
            failure,
        });
    }
    let run = match a.mode {
        OracleMode::Free => evolve_free(config, &oc)?,
        OracleMode::Interacting => evolve_interacting(config, &oc)?,
        OracleMode::Adiabatic => evolve_adiabatic(config, &oc)?,
        OracleMode::MeanField => evolve_mean_field(config, &oc)?,
        OracleMode::Independence => unreachable!(),
    };
    if a.mode == OracleMode::Adiabatic {
        p.insert("profile".into(), format!("{:?}", oc.profile).to_lowercase());
        p.insert("t0".into(), format!("{:e}", oc.t0));
    }
    p.insert("state".into(), oc.sample_state.label().to_string());
    let m = config.n_leads();
    let n = config.n_sites();
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=m).map(|j| format!("J_{j}")));
    cols.extend((1..=m).map(|j| format!("E_{j}")));
    cols.extend((1..=n).map(|x| format!("n_{x}")));
    let mut table = Table::new(cols);
    for (k, &t) in run.times.iter().enumerate() {
        let mut r = vec![t];
        r.extend(run.charge_current.iter().map(|s| s[k]));
        r.extend(run.energy_current.iter().map(|s| s[k]));
        r.extend(run.density.iter().map(|s| s[k]));
        table.push(r);
    }
    let failure = (!run.all_accepted()).then(|| {
        CliError::Numerical(format!(
            "plateau rejected on the window [{:.3}, {:.3}]; increase --lead-len",
            run.window.0, run.window.1
        ))
    });
    Ok(Outcome {
        table,
        report: run_report(&run),
        parameters: p,
        failure,
    })
}
