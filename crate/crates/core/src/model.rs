//! System description: sample, leads, thermodynamic parameters and biases.
//!
//! Sites are flattened deterministically: sample sites `0..n`, then the
//! sites of lead `j` (contact site first) occupy `n + j*L .. n + (j+1)*L`
//! in any finite truncation with `L` sites per lead.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Absolute tolerance for the structural checks on user-supplied matrices.
pub const INPUT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSpec {
    /// One-particle sample Hamiltonian `h_S` (Hermitian).
    pub hamiltonian: CMatrix,
    /// Pair potential `w(x, y)`: real, symmetric, zero diagonal, `|w| <= 1`.
    pub pair_potential: DMatrix<f64>,
    /// Interaction strength multiplying the pair interaction.
    pub interaction: f64,
}

impl SampleSpec {
    pub fn n_sites(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn is_real(&self) -> bool {
        self.hamiltonian.iter().all(|z| z.im.abs() <= INPUT_TOL)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeadSpec {
    /// Tunneling constant `d_j`.
    pub coupling: f64,
    /// Unit vector `φ_j` on the sample the lead couples to.
    pub coupling_vector: CVector,
    /// Bias `v_j`.
    pub bias: f64,
    pub beta: f64,
    pub mu: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Partitioned,
    PartitionFree,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub beta: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    pub sample: SampleSpec,
    pub leads: Vec<LeadSpec>,
    /// Hopping constant `c_R > 0` shared by all leads.
    pub hopping: f64,
    pub scenario: Scenario,
    /// Reference `(β, μ)` of the initial joint equilibrium (partition-free only).
    pub equilibrium: Option<Equilibrium>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn names(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.contains(needle))
    }

    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(self.violations))
        }
    }
}

impl SystemConfig {
    pub fn n_sites(&self) -> usize {
        self.sample.n_sites()
    }

    pub fn n_leads(&self) -> usize {
        self.leads.len()
    }

    /// True when `h_S` and every `φ_j` are real (time-reversal invariant case).
    pub fn is_time_reversal_invariant(&self) -> bool {
        self.sample.is_real()
            && self
                .leads
                .iter()
                .all(|l| l.coupling_vector.iter().all(|z| z.im.abs() <= INPUT_TOL))
    }

    /// Largest absolute eigenvalue of `h_S`.
    pub fn sample_norm(&self) -> f64 {
        if self.n_sites() == 0 {
            return 0.0;
        }
        self.sample
            .hamiltonian
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, e| acc.max(e.abs()))
    }

    /// Band thresholds `v_j ± 2c_R`, sorted and deduplicated.
    pub fn thresholds(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .leads
            .iter()
            .flat_map(|l| [l.bias - 2.0 * self.hopping, l.bias + 2.0 * self.hopping])
            .collect();
        sort_dedup(&mut t);
        t
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        self.validate().into_result()
    }

    /// `(β, μ)` of the initial joint equilibrium in the partition-free scenario.
    pub fn reference_equilibrium(&self) -> Equilibrium {
        self.equilibrium.unwrap_or_else(|| {
            let lead = &self.leads[0];
            Equilibrium {
                beta: lead.beta,
                mu: lead.mu,
            }
        })
    }

    pub fn with_interaction(&self, xi: f64) -> SystemConfig {
        let mut c = self.clone();
        c.sample.interaction = xi;
        c
    }

    pub fn from_json(text: &str) -> Result<SystemConfig> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ConfigFile::from(self)).expect("config serializes")
    }
}

pub(crate) fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
}

/// Checks every structural invariant and reports all failures at once.
pub fn validate(config: &SystemConfig) -> ValidationReport {
    let mut violations = Vec::new();
    let h = &config.sample.hamiltonian;
    let n = h.nrows();

    if h.ncols() != n {
        violations.push(format!("h_S must be square (got {}x{})", n, h.ncols()));
    } else if n == 0 {
        violations.push("sample must have at least one site".to_string());
    } else {
        let herm = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .any(|(i, j)| (h[(i, j)] - h[(j, i)].conj()).norm() > INPUT_TOL);
        if herm {
            violations.push("h_S hermiticity".to_string());
        }
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        violations.push("h_S finite entries".to_string());
    }

    let w = &config.sample.pair_potential;
    if w.nrows() != n || w.ncols() != n {
        violations.push(format!(
            "w dimension must match h_S ({}x{} vs {n})",
            w.nrows(),
            w.ncols()
        ));
    } else {
        if (0..n).any(|x| w[(x, x)].abs() > INPUT_TOL) {
            violations.push("zero diagonal of w".to_string());
        }
        if (0..n).any(|x| (0..n).any(|y| (w[(x, y)] - w[(y, x)]).abs() > INPUT_TOL)) {
            violations.push("w symmetry".to_string());
        }
        if w.iter().any(|v| !(v.abs() <= 1.0 + INPUT_TOL)) {
            violations.push("w normalization |w(x,y)| <= 1".to_string());
        }
    }
    if !config.sample.interaction.is_finite() {
        violations.push("xi finite".to_string());
    }

    if !(config.hopping > 0.0) || !config.hopping.is_finite() {
        violations.push("c_R > 0".to_string());
    }
    if config.leads.is_empty() {
        violations.push("at least one lead".to_string());
    }
    for (j, lead) in config.leads.iter().enumerate() {
        if lead.coupling_vector.len() != n {
            violations.push(format!(
                "phi_{j} length {} does not match sample size {n}",
                lead.coupling_vector.len()
            ));
        } else if (lead.coupling_vector.norm() - 1.0).abs() > 1e-10 {
            violations.push(format!("phi_{j} unit norm"));
        }
        if !(lead.beta > 0.0) || !lead.beta.is_finite() {
            violations.push(format!("beta_{j} > 0"));
        }
        if !lead.coupling.is_finite() || !lead.bias.is_finite() || !lead.mu.is_finite() {
            violations.push(format!("lead {j} finite parameters"));
        }
    }

    if config.scenario == Scenario::PartitionFree && !config.leads.is_empty() {
        let eq = config.reference_equilibrium();
        if !(eq.beta > 0.0) {
            violations.push("partition_free reference beta > 0".to_string());
        }
        if config.leads.iter().any(|l| (l.beta - eq.beta).abs() > INPUT_TOL) {
            violations.push("partition_free common beta".to_string());
        }
        if config.leads.iter().any(|l| (l.mu - eq.mu).abs() > INPUT_TOL) {
            violations.push("partition_free common mu".to_string());
        }
    }

    ValidationReport { violations }
}

/// Flattened site indices of a finite truncation with `L` sites per lead.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteLayout {
    pub n_sample: usize,
    pub n_leads: usize,
    pub lead_len: usize,
}

impl SiteLayout {
    pub fn new(config: &SystemConfig, lead_len: usize) -> Self {
        SiteLayout {
            n_sample: config.n_sites(),
            n_leads: config.n_leads(),
            lead_len,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_sample + self.n_leads * self.lead_len
    }

    pub fn lead_site(&self, lead: usize, pos: usize) -> usize {
        debug_assert!(lead < self.n_leads && pos < self.lead_len);
        self.n_sample + lead * self.lead_len + pos
    }

    pub fn index(&self, site: Site) -> usize {
        match site {
            Site::Sample(x) => x,
            Site::Lead { lead, pos } => self.lead_site(lead, pos),
        }
    }
}

/// A site of the infinite system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    Sample(usize),
    Lead { lead: usize, pos: usize },
}

/// The pieces of a finite-lead one-particle Hamiltonian, kept separate so
/// that the tunneling term and the biases can be switched independently.
#[derive(Clone, Debug)]
pub struct FiniteHamiltonian {
    pub layout: SiteLayout,
    /// Sample block and lead hoppings: `h_S ⊕ h_1 ⊕ … ⊕ h_m`.
    pub decoupled: Vec<(usize, usize, Complex64)>,
    /// `h_T`, both triangles.
    pub tunneling: Vec<(usize, usize, Complex64)>,
    /// Diagonal bias entries `v_j` on every site of lead `j`.
    pub bias: Vec<(usize, usize, Complex64)>,
}

impl FiniteHamiltonian {
    pub fn new(config: &SystemConfig, lead_len: usize) -> Result<Self> {
        if lead_len < 1 {
            return Err(Error::LeadTruncation(lead_len));
        }
        let layout = SiteLayout::new(config, lead_len);
        let n = layout.n_sample;
        let mut decoupled = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let z = config.sample.hamiltonian[(i, j)];
                if z != Complex64::new(0.0, 0.0) {
                    decoupled.push((i, j, z));
                }
            }
        }
        let hop = Complex64::new(-config.hopping, 0.0);
        let mut tunneling = Vec::new();
        let mut bias = Vec::new();
        for (j, lead) in config.leads.iter().enumerate() {
            for p in 0..lead_len {
                let s = layout.lead_site(j, p);
                if p + 1 < lead_len {
                    decoupled.push((s, s + 1, hop));
                    decoupled.push((s + 1, s, hop));
                }
                if lead.bias != 0.0 {
                    bias.push((s, s, Complex64::new(lead.bias, 0.0)));
                }
            }
            let contact = layout.lead_site(j, 0);
            for x in 0..n {
                let z = lead.coupling_vector[x] * lead.coupling;
                if z != Complex64::new(0.0, 0.0) {
                    // d_j |δ_0j⟩⟨φ_j| + h.c.
                    tunneling.push((contact, x, z.conj()));
                    tunneling.push((x, contact, z));
                }
            }
        }
        Ok(FiniteHamiltonian {
            layout,
            decoupled,
            tunneling,
            bias,
        })
    }

    /// Entries of `h_D + coupling·h_T + bias·v_R`.
    pub fn entries(&self, coupling: f64, bias: f64) -> Vec<(usize, usize, Complex64)> {
        let mut out = self.decoupled.clone();
        if coupling != 0.0 {
            out.extend(self.tunneling.iter().map(|&(i, j, z)| (i, j, z * coupling)));
        }
        if bias != 0.0 {
            out.extend(self.bias.iter().map(|&(i, j, z)| (i, j, z * bias)));
        }
        out
    }

    pub fn dense(&self, coupling: f64, bias: f64) -> CMatrix {
        let d = self.layout.dim();
        let mut m = CMatrix::zeros(d, d);
        for (i, j, z) in self.entries(coupling, bias) {
            m[(i, j)] += z;
        }
        m
    }
}

/// Dense one-particle Hamiltonian `h_v = h_D,v + h_T` of the system with
/// every lead truncated to `lead_len` sites (Dirichlet end).
pub fn effective_single_particle_hamiltonian(config: &SystemConfig, lead_len: usize) -> Result<CMatrix> {
    Ok(FiniteHamiltonian::new(config, lead_len)?.dense(1.0, 1.0))
}

// ---------------------------------------------------------------------------
// JSON schema

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    sample: SampleFile,
    leads: Vec<LeadFile>,
    #[serde(rename = "c_R")]
    c_r: f64,
    #[serde(default)]
    scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    equilibrium: Option<Equilibrium>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleFile {
    /// Row-major rows of `[re, im]` pairs.
    #[serde(rename = "h_S")]
    h_s: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    xi: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeadFile {
    d: f64,
    phi: Vec<[f64; 2]>,
    #[serde(default)]
    v: f64,
    beta: f64,
    #[serde(default)]
    mu: f64,
}

impl TryFrom<ConfigFile> for SystemConfig {
    type Error = Error;

    fn try_from(file: ConfigFile) -> Result<Self> {
        let n = file.sample.h_s.len();
        for (i, row) in file.sample.h_s.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse {
                    path: format!("sample.h_S[{i}]"),
                    message: format!("row has {} entries, expected {n}", row.len()),
                });
            }
        }
        let hamiltonian = CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(file.sample.h_s[i][j][0], file.sample.h_s[i][j][1])
        });
        let pair_potential = match &file.sample.w {
            None => DMatrix::zeros(n, n),
            Some(rows) => {
                if rows.len() != n {
                    return Err(Error::Parse {
                        path: "sample.w".to_string(),
                        message: format!("{} rows, expected {n}", rows.len()),
                    });
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::Parse {
                            path: format!("sample.w[{i}]"),
                            message: format!("row has {} entries, expected {n}", row.len()),
                        });
                    }
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
        };
        let leads = file
            .leads
            .iter()
            .map(|l| LeadSpec {
                coupling: l.d,
                coupling_vector: CVector::from_iterator(l.phi.len(), l.phi.iter().map(|p| Complex64::new(p[0], p[1]))),
                bias: l.v,
                beta: l.beta,
                mu: l.mu,
            })
            .collect();
        Ok(SystemConfig {
            sample: SampleSpec {
                hamiltonian,
                pair_potential,
                interaction: file.sample.xi,
            },
            leads,
            hopping: file.c_r,
            scenario: file.scenario,
            equilibrium: file.equilibrium,
        })
    }
}

impl From<&SystemConfig> for ConfigFile {
    fn from(c: &SystemConfig) -> Self {
        let n = c.n_sites();
        let h = &c.sample.hamiltonian;
        let w = &c.sample.pair_potential;
        ConfigFile {
            sample: SampleFile {
                h_s: (0..n)
                    .map(|i| (0..n).map(|j| [h[(i, j)].re, h[(i, j)].im]).collect())
                    .collect(),
                w: if w.iter().all(|v| *v == 0.0) {
                    None
                } else {
                    Some((0..n).map(|i| (0..n).map(|j| w[(i, j)]).collect()).collect())
                },
                xi: c.sample.interaction,
            },
            leads: c
                .leads
                .iter()
                .map(|l| LeadFile {
                    d: l.coupling,
                    phi: l.coupling_vector.iter().map(|z| [z.re, z.im]).collect(),
                    v: l.bias,
                    beta: l.beta,
                    mu: l.mu,
                })
                .collect(),
            c_r: c.hopping,
            scenario: c.scenario,
            equilibrium: c.equilibrium,
        }
    }
}

// ---------------------------------------------------------------------------
// Builders used throughout the tests and the CLI examples.

/// Real symmetric `h_S`, zero interaction, no leads yet.
pub fn real_sample(h: &[&[f64]]) -> SampleSpec {
    let n = h.len();
    SampleSpec {
        hamiltonian: CMatrix::from_fn(n, n, |i, j| Complex64::new(h[i][j], 0.0)),
        pair_potential: DMatrix::zeros(n, n),
        interaction: 0.0,
    }
}

/// Basis vector `δ_x` on an `n`-site sample.
pub fn site_vector(n: usize, x: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[x] = Complex64::new(1.0, 0.0);
    v
}

impl LeadSpec {
    pub fn new(coupling: f64, coupling_vector: CVector, beta: f64, mu: f64) -> Self {
        LeadSpec {
            coupling,
            coupling_vector,
            bias: 0.0,
            beta,
            mu,
        }
    }

    pub fn with_bias(mut self, bias: f64) -> Self {
        self.bias = bias;
        self
    }
}

/// Single-level dot `ε₀` symmetrically coupled (`d`) to two leads at site 0.
pub fn single_dot(eps0: f64, d: f64, beta: f64, mu_left: f64, mu_right: f64) -> SystemConfig {
    SystemConfig {
        sample: real_sample(&[&[eps0]]),
        leads: vec![
            LeadSpec::new(d, site_vector(1, 0), beta, mu_left),
            LeadSpec::new(d, site_vector(1, 0), beta, mu_right),
        ],
        hopping: 1.0,
        scenario: Scenario::Partitioned,
        equilibrium: None,
    }
}
