//! Random-walk representations of high-order and fractional heat-type
//! equations `∂_t u = β/N! ∂_x^N u`.
//!
//! Walks with steps on the `N`-th roots of `β` ([`walks`]), time-changed by
//! stable subordinators or their inverses ([`subordination`]), are compared
//! against spectral and Mittag-Leffler reference solutions ([`symbols`]).
//! [`montecarlo`] holds the estimators, [`harness`] the `fracwalk` binary.

pub mod harness;
pub mod initialdata;
pub mod montecarlo;
pub mod quadrature;
pub mod rng;
pub mod specialfn;
pub mod subordination;
pub mod symbols;
pub mod walks;
