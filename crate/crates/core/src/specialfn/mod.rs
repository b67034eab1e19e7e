//! Special functions and exact combinatorics.
//!
//! Everything here is pure and re-entrant. Floating-point results are `f64`
//! or [`Complex64`]; the combinatorial quantities (Stirling numbers, Bell
//! numbers, factorials) are exact big integers and are only converted to
//! floating point at the call site that needs it.

mod branch;
mod combinatorics;
mod gamma;
mod mittag_leffler;

pub use branch::{complex_pow_alpha, expm1_complex, principal_arg, principal_root};
pub use combinatorics::{
    bell, bell_bound, factorial, falling_factorial, poisson_moment, stirling2, stirling_row,
    MAX_STIRLING_ORDER,
};
pub use gamma::{gamma, log_gamma};
pub use mittag_leffler::{mittag_leffler, MittagLeffler, MlMethod, SeriesOutcome};

use thiserror::Error;

pub use num_complex::Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialFnError {
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("{op} did not converge after {terms} terms (last increment {last:e})")]
    NonConvergence {
        op: &'static str,
        terms: usize,
        last: f64,
    },
    #[error("{op}: order {order} exceeds the supported cap {cap}")]
    Cap {
        op: &'static str,
        order: usize,
        cap: usize,
    },
}
