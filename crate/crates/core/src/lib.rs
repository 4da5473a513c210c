//! Non-equilibrium steady states of a finite tight-binding sample coupled to
//! semi-infinite one-dimensional leads, with finite-system oracles.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod leads;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{CMatrix, CVector, LeadSpec, SampleSpec, Scenario, SystemConfig, ValidationReport};
pub mod correlators;
pub mod hartree_fock;
pub mod oracle;
pub mod transport;
