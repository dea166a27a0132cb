//! Copy detection pattern workbench.
//!
//! Covers the full lifecycle of a printed CDP: random binary templates
//! ([`patterns`]), a parameterized print-scan channel ([`printchan`]),
//! template-estimation attacks ([`attack`]), defender-side similarity
//! features ([`authmetrics`]), SVM authentication ([`classify`]) and
//! ROC/KDE reporting ([`evalreport`]).

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod authmetrics;
pub mod classify;
pub mod error;
pub mod evalreport;
pub mod io;
pub mod par;
pub mod patterns;
pub mod printchan;

pub use error::{Error, Result};
