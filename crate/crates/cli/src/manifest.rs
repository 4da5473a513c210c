//! Run manifests. The CSV header carries everything except timestamps, so
//! identical inputs give byte-identical CSV; timestamps live in the sidecar.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use neqt_core::correlators::DENSITY_MEASURE;

use crate::table::format_value;

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_path: String,
    pub config_sha256: String,
    pub parameters: BTreeMap<String, String>,
    pub normalization: BTreeMap<String, f64>,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(subcommand: &str, config_path: &str, config_bytes: &[u8], parameters: BTreeMap<String, String>) -> Self {
        let mut normalization = BTreeMap::new();
        normalization.insert("density_measure".to_string(), DENSITY_MEASURE);
        RunManifest {
            tool: "neqt".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config_path: config_path.into(),
            config_sha256: sha256_hex(config_bytes),
            parameters,
            normalization,
            started_unix: unix_now(),
            finished_unix: None,
        }
    }

    /// Comment lines for the CSV header. `sidecar` names the manifest file
    /// holding the timestamps, if one is written.
    pub fn comment_lines(&self, sidecar: Option<&str>) -> Vec<String> {
        let mut out = vec![
            format!("{} {}", self.tool, self.version),
            format!("subcommand: {}", self.subcommand),
            format!("config_sha256: {}", self.config_sha256),
        ];
        for (k, v) in &self.parameters {
            out.push(format!("param {k} = {v}"));
        }
        for (k, v) in &self.normalization {
            out.push(format!("normalization {k} = {}", format_value(*v)));
        }
        if let Some(s) = sidecar {
            out.push(format!("manifest: {s}"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn comments_have_no_timestamps() {
        let mut p = BTreeMap::new();
        p.insert("tol".to_string(), "1e-10".to_string());
        let a = RunManifest::new("currents", "a.json", b"{}", p.clone()).comment_lines(None);
        let mut m = RunManifest::new("currents", "b.json", b"{}", p);
        m.started_unix += 100.0;
        assert_eq!(a, m.comment_lines(None));
        assert!(a.iter().any(|l| l.starts_with("param tol")));
    }
}
