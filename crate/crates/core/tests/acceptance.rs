//! Acceptance checks. Each test prints one `ACCEPTANCE PASS|FAIL` line.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use neqt_core::correlators::{green_functions, lesser_spectral, ness_density_matrix, window_sites};
use neqt_core::model::{
    real_sample, single_dot, site_vector, CMatrix, CVector, LeadSpec, SampleSpec, Scenario, Site, SystemConfig,
};
use neqt_core::oracle::calibration::truncated_density_matrix;
use neqt_core::oracle::mean_field::evolve_mean_field;
use neqt_core::oracle::{
    evolve_adiabatic, evolve_free, evolve_interacting, fit_plateau, initial_state_independence, OracleConfig, Profile,
    SampleState,
};
use neqt_core::quadrature::QuadratureSpec;
use neqt_core::spectral::{check_spectral_condition, ScanSpec};
use neqt_core::transport::{entropy_production, lb_currents, onsager_matrix, transmission};

/// Writes straight to the process stderr so the line shows up even when the
/// harness captures test output.
fn report(name: &str, pass: bool, detail: &str) {
    let line = format!("ACCEPTANCE {} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    let v = CVector::from_fn(n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

fn random_config(rng: &mut ChaCha8Rng) -> SystemConfig {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(2..=3);
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..n {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    let leads = (0..m)
        .map(|_| {
            let phi = random_unit(rng, n);
            LeadSpec::new(
                rng.gen_range(0.3..1.0),
                phi,
                rng.gen_range(1.0..10.0),
                rng.gen_range(-0.5..0.5),
            )
            .with_bias(rng.gen_range(-0.5..0.5))
        })
        .collect();
    SystemConfig {
        sample: SampleSpec {
            hamiltonian: h,
            pair_potential: DMatrix::zeros(n, n),
            interaction: 0.0,
        },
        leads,
        hopping: rng.gen_range(0.8..1.5),
        scenario: Scenario::Partitioned,
        equilibrium: None,
    }
}

/// 100 random configurations that pass the spectral check.
fn random_suite(seed: u64) -> Vec<SystemConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < 100 {
        let cfg = random_config(&mut rng);
        if cfg.validate().passed() && check_spectral_condition(&cfg, &ScanSpec::default()).passed {
            out.push(cfg);
        }
    }
    out
}

fn symmetric_dot() -> SystemConfig {
    single_dot(0.0, 0.4, 20.0, 0.1, -0.1)
}

fn two_site(xi: f64) -> SystemConfig {
    let mut sample = real_sample(&[&[0.3, -0.5], &[-0.5, -0.1]]);
    sample.pair_potential = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    sample.interaction = xi;
    SystemConfig {
        sample,
        leads: vec![
            LeadSpec::new(0.6, site_vector(2, 0), 4.0, 0.4),
            LeadSpec::new(0.6, site_vector(2, 1), 4.0, -0.4),
        ],
        hopping: 1.0,
        scenario: Scenario::Partitioned,
        equilibrium: None,
    }
}

#[test]
fn sum_rules_on_random_configurations() {
    let start = Instant::now();
    let spec = QuadratureSpec::default();
    let mut worst_j: f64 = 0.0;
    let mut worst_e: f64 = 0.0;
    for cfg in random_suite(11) {
        let obs = lb_currents(&cfg, &spec).unwrap();
        worst_j = worst_j.max(obs.charge_sum().abs());
        worst_e = worst_e.max(obs.energy_sum(&cfg).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "sum rules",
        worst_j <= 1e-8 && worst_e <= 1e-8 && secs <= 300.0,
        &format!("max |sum J| = {worst_j:.2e}, max |sum (E + vJ)| = {worst_e:.2e} over 100 configs in {secs:.1} s"),
    );
}

#[test]
fn equilibrium_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    let mut worst_sigma = f64::NEG_INFINITY;
    let mut count = 0;
    while count < 20 {
        let mut cfg = random_config(&mut rng);
        let (beta, mu, v) = (
            rng.gen_range(1.0..10.0),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
        );
        for lead in cfg.leads.iter_mut() {
            lead.beta = beta;
            lead.mu = mu;
            lead.bias = v;
        }
        if !check_spectral_condition(&cfg, &ScanSpec::default()).passed {
            continue;
        }
        count += 1;
        let obs = lb_currents(&cfg, &spec).unwrap();
        for x in obs.charge.iter().chain(&obs.energy) {
            worst = worst.max(x.abs());
        }
        worst_sigma = worst_sigma.max(obs.entropy_production);
    }
    report(
        "equilibrium null",
        worst <= 1e-8 && worst_sigma <= 1e-10,
        &format!("max |J|, |E| = {worst:.2e}, max sigma = {worst_sigma:.2e} over 20 configs"),
    );
}

#[test]
fn landauer_buttiker_against_oracle() {
    let start = Instant::now();
    let cfg = symmetric_dot();
    let lb = lb_currents(&cfg, &QuadratureSpec::with_tol(1e-13)).unwrap();
    let err = |len: usize| {
        let run = evolve_free(&cfg, &OracleConfig::sudden(len, 0.9 * len as f64, 0.5)).unwrap();
        (run.plateau[0].value - lb.charge[0]).abs() / lb.charge[0].abs()
    };
    let (e400, e800) = (err(400), err(800));
    let secs = start.elapsed().as_secs_f64();
    report(
        "LB vs oracle",
        e400 <= 0.05 && e800 <= 0.6 * e400 && secs <= 120.0,
        &format!(
            "J_LB = {:.12e}, rel. error L=400 {e400:.3e}, L=800 {e800:.3e} (ratio {:.3}) in {secs:.1} s",
            lb.charge[0],
            e800 / e400
        ),
    );
}

#[test]
fn resonant_transmission() {
    let want = 1.0 / (2.0 * std::f64::consts::PI);
    let mut worst: f64 = 0.0;
    for d in [0.2, 0.5, 1.0] {
        let t = transmission(&single_dot(0.0, d, 1.0, 0.0, 0.0), 0.0).unwrap();
        worst = worst.max((t.t[(0, 1)] - want).abs());
    }
    report(
        "resonant transmission",
        worst <= 1e-10,
        &format!("max |T(0) - 1/(2 pi)| = {worst:.2e} over d in {{0.2, 0.5, 1.0}}"),
    );
}

#[test]
fn entropy_production_positivity() {
    let spec = QuadratureSpec::default();
    let mut min_sigma = f64::INFINITY;
    let mut min_strict = f64::INFINITY;
    let mut strict_cases = 0;
    for cfg in random_suite(11) {
        let rep = entropy_production(&cfg, &spec).unwrap();
        min_sigma = min_sigma.min(rep.sigma);
        // forces of at least 0.1 between some pair of leads
        let forced = cfg.leads.iter().any(|a| {
            cfg.leads
                .iter()
                .any(|b| (a.beta - b.beta).abs() >= 0.1 || (a.bias + a.mu - b.bias - b.mu).abs() >= 0.1)
        });
        if rep.strictly_positive && forced {
            strict_cases += 1;
            min_strict = min_strict.min(rep.sigma);
        }
    }
    report(
        "entropy production",
        min_sigma >= -1e-10 && (strict_cases == 0 || min_strict > 1e-4),
        &format!(
            "min sigma = {min_sigma:.3e}; {strict_cases} strictly positive cases, min sigma there {min_strict:.3e}"
        ),
    );
}

#[test]
fn onsager_reciprocity() {
    let mut sample = real_sample(&[&[0.2, -0.6, 0.1], &[-0.6, -0.3, 0.4], &[0.1, 0.4, 0.5]]);
    sample.pair_potential = DMatrix::zeros(3, 3);
    let s = 1.0 / 2f64.sqrt();
    let leads = vec![
        LeadSpec::new(0.5, site_vector(3, 0), 3.0, 0.05),
        LeadSpec::new(
            0.7,
            CVector::from_vec(vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(-s, 0.0),
            ]),
            3.0,
            0.05,
        ),
        LeadSpec::new(0.4, site_vector(3, 2), 3.0, 0.05),
    ];
    let cfg = SystemConfig {
        sample,
        leads,
        hopping: 1.0,
        scenario: Scenario::Partitioned,
        equilibrium: None,
    };
    assert!(check_spectral_condition(&cfg, &ScanSpec::default()).passed);
    let l = onsager_matrix(&cfg, 1e-4, &QuadratureSpec::with_tol(1e-13)).unwrap();
    let ratio = l.max_asymmetry() / l.max_abs();
    report(
        "Onsager reciprocity",
        ratio <= 1e-5,
        &format!(
            "max |L_jk - L_kj| / max |L| = {ratio:.2e} (max |L| = {:.4e})",
            l.max_abs()
        ),
    );
}

#[test]
fn adiabatic_equivalence() {
    let start = Instant::now();
    // non-interacting dot
    let cfg = symmetric_dot();
    let sudden = evolve_free(&cfg, &OracleConfig::sudden(400, 360.0, 0.5)).unwrap();
    let ramp = evolve_adiabatic(&cfg, &OracleConfig::ramp(400, 160.0, 1.0, Profile::Linear, -200.0)).unwrap();
    let (a, b) = (sudden.plateau[0].value, ramp.plateau[0].value);
    let free_diff = (a - b).abs() / a.abs();
    let free_ok = free_diff <= 0.02;
    let _ = std::io::stderr().write_all(
        format!("  dot (xi = 0, L = 400): sudden {a:.10e}, ramped {b:.10e}, rel. diff {free_diff:.2e}\n").as_bytes(),
    );

    // interacting two-site sample, one-particle dimension 2 + 2L capped at 14
    let cfg = two_site(0.05);
    let len = 4;
    let sudden = evolve_interacting(&cfg, &OracleConfig::sudden(len, 0.9 * len as f64, 0.05)).unwrap();
    let ramp_cfg = OracleConfig::ramp(len, 0.9 * len as f64, 0.5, Profile::Linear, -200.0);
    let inter = match evolve_adiabatic(&cfg, &ramp_cfg) {
        Ok(run) => {
            let d = (run.plateau[0].value - sudden.plateau[0].value).abs() / sudden.plateau[0].value.abs();
            (d <= 0.02, format!("rel. diff {d:.2e}"))
        }
        Err(e) => {
            // rerun past the recurrence bound to show how far apart the two are
            let forced = OracleConfig {
                enforce_recurrence: false,
                ..ramp_cfg.clone()
            };
            let run = evolve_adiabatic(&cfg, &forced).unwrap();
            // the ramp's own window would end before t = 0; use the sudden one
            let ramped = fit_plateau(&run.times, &run.charge_current[0], sudden.window).value;
            let d = (ramped - sudden.plateau[0].value).abs() / sudden.plateau[0].value.abs();
            (
                false,
                format!(
                    "rejected ({e}); forced past the recurrence: sudden {:.6e}, ramped {:.6e}, rel. diff {d:.2e}",
                    sudden.plateau[0].value, ramped
                ),
            )
        }
    };
    let _ = std::io::stderr().write_all(format!("  two-site (xi = 0.05, L = {len}): {}\n", inter.1).as_bytes());
    let secs = start.elapsed().as_secs_f64();
    report(
        "adiabatic equivalence",
        free_ok && inter.0 && secs <= 600.0,
        &format!(
            "dot {} (rel. diff {free_diff:.2e}); interacting two-site {}; {secs:.1} s",
            if free_ok { "ok" } else { "mismatch" },
            if inter.0 { "ok" } else { "not attainable" }
        ),
    );
}

#[test]
fn hartree_fock_second_order() {
    let oc = OracleConfig::sudden(4, 3.6, 0.05);
    let j0 = evolve_interacting(&two_site(0.0), &oc).unwrap().plateau[0].value;
    let xis = [0.02, 0.04, 0.08];
    let mut r2 = Vec::new();
    let mut r1 = Vec::new();
    let mut d2 = Vec::new();
    let mut d1 = Vec::new();
    for &xi in &xis {
        let exact = evolve_interacting(&two_site(xi), &oc).unwrap().plateau[0].value;
        let hf = evolve_mean_field(&two_site(xi), &oc).unwrap().plateau[0].value;
        d2.push((exact - hf).abs());
        d1.push((exact - j0).abs());
        r2.push((exact - hf).abs() / (xi * xi));
        r1.push((exact - j0).abs() / xi);
    }
    let spread = |v: &[f64]| {
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        (hi - lo) / lo
    };
    // log-log slope between the smallest and largest xi
    let order = |d: &[f64]| (d[2] / d[0]).ln() / (xis[2] / xis[0]).ln();
    let (p2, p1) = (order(&d2), order(&d1));
    let pass = spread(&r2) < 0.5 && spread(&r1) < 0.5 && (p2 - 2.0).abs() < 0.3 && (p1 - 1.0).abs() < 0.3;
    report(
        "Hartree-Fock second order",
        pass,
        &format!(
            "|J - J_HF|/xi^2 = {:.4e} {:.4e} {:.4e} (spread {:.1}%, order {p2:.2}); |J - J_0|/xi = {:.4e} {:.4e} {:.4e} (order {p1:.2})",
            r2[0],
            r2[1],
            r2[2],
            100.0 * spread(&r2),
            r1[0],
            r1[1],
            r1[2]
        ),
    );
}

#[test]
fn equilibrium_calibration() {
    let mut sample = real_sample(&[&[0.2, -0.5], &[-0.5, -0.3]]);
    sample.pair_potential = DMatrix::zeros(2, 2);
    let cfg = SystemConfig {
        sample,
        leads: vec![
            LeadSpec::new(0.6, site_vector(2, 0), 5.0, 0.15),
            LeadSpec::new(0.4, site_vector(2, 1), 5.0, 0.15),
        ],
        hopping: 1.0,
        scenario: Scenario::Partitioned,
        equilibrium: None,
    };
    assert!(check_spectral_condition(&cfg, &ScanSpec::default()).passed);
    let sites = window_sites(&cfg, 10);
    let ness = ness_density_matrix(&cfg, &sites, &QuadratureSpec::with_tol(1e-12)).unwrap();
    let oracle = truncated_density_matrix(&cfg, &sites, 2000).unwrap();
    let err = (&ness.values - &oracle).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    report(
        "equilibrium calibration",
        err <= 1e-4,
        &format!(
            "max |C_NESS - C_truncated| = {err:.2e} on {} sites (L = 2000)",
            sites.len()
        ),
    );
}

#[test]
fn green_function_structure() {
    let mut cfg = single_dot(0.1, 0.5, 4.0, 0.3, -0.2);
    cfg.leads[1].bias = 0.4;
    let (x, y) = (Site::Sample(0), Site::Lead { lead: 1, pos: 2 });
    // outside the union of bands [-2, 2.4]
    let mut outside: f64 = 0.0;
    for w in [-4.0, -2.5, -2.01, 2.41, 3.0, 5.0] {
        outside = outside.max(lesser_spectral(&cfg, w, x, y).unwrap().norm());
        outside = outside.max(lesser_spectral(&cfg, w, x, x).unwrap().norm());
    }
    let spec = QuadratureSpec::with_tol(1e-12);
    let mut identity: f64 = 0.0;
    for t in [-7.0, -1.0, 0.0, 0.5, 3.0, 12.0] {
        let g = green_functions(&cfg, t, x, y, &spec).unwrap();
        let lhs = g.retarded() - g.advanced();
        let rhs = g.lesser - g.greater;
        identity = identity.max((lhs - rhs).norm());
    }
    let g0 = green_functions(&cfg, 0.0, x, x, &spec).unwrap().lesser.norm();
    let t_long = 1e3 / cfg.hopping;
    let g_long = green_functions(&cfg, t_long, x, x, &QuadratureSpec::default().for_phase(t_long))
        .unwrap()
        .lesser
        .norm();
    let decay = g_long / g0;
    report(
        "Green-function structure",
        outside < 1e-10 && identity <= 1e-10 && decay < 1e-2,
        &format!("max |G<(w)| off-band = {outside:.1e}; max |G^r - G^a - G^< + G^>| = {identity:.1e}; |G<(1000/c)|/|G<(0)| = {decay:.2e}"),
    );
}

#[test]
fn initial_state_independence_of_plateau() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let random = SampleState::from_hermitian(&CMatrix::from_element(
        1,
        1,
        Complex64::new(rng.gen_range(-3.0..3.0), 0.0),
    ));
    let states = [SampleState::Empty, SampleState::Full, SampleState::Half, random];
    let spread = |cfg: &SystemConfig, len: usize| {
        initial_state_independence(cfg, &OracleConfig::sudden(len, 0.9 * len as f64, 0.5), &states)
            .unwrap()
            .spread
    };
    // at d = 0.4 the memory of the sample state is gone to round-off before
    // the window opens, so the L dependence is only visible at weaker coupling
    let strong = symmetric_dot();
    let (q400, q800) = (spread(&strong, 400), spread(&strong, 800));
    let _ = std::io::stderr().write_all(format!("  d = 0.4: spread L=400 {q400:.3e}, L=800 {q800:.3e}\n").as_bytes());
    let weak = single_dot(0.0, 0.1, 20.0, 0.1, -0.1);
    let (s400, s800) = (spread(&weak, 400), spread(&weak, 800));
    report(
        "initial-state independence",
        s400 < 0.01 && s800 < s400,
        &format!("d = 0.1: plateau spread L=400 {s400:.3e}, L=800 {s800:.3e}"),
    );
}
