//! Localized reduced basis additive Schwarz (LRBAS) solver for sequences of
//! SPD linear systems that differ by local modifications.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: sparse/dense kernels, pivoted semidefinite Cholesky and the
//!   dense generalized symmetric eigensolvers.
//! * [`fem`]: Q1 finite element assembly of the high-contrast channel problem
//!   and its port-opening modification schedule.
//! * [`decomposition`]: overlapping decomposition, partition of unity, GenEO
//!   coarse space and the two-level additive Schwarz operators.
//! * [`lrbas`]: the reduced basis enrichment solver, PCG baselines and the
//!   sequence driver.
//! * [`experiment`]: configuration, report artifacts and strategy comparison
//!   used by the `lrbas` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomposition;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod linalg;
pub mod lrbas;

pub use error::{Error, Result};
