//! Compiles and runs every Rust listing of the guide in `book/`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/walks.md")]
pub mod walks {}

#[doc = include_str!("../../../book/src/symbols.md")]
pub mod symbols {}

#[doc = include_str!("../../../book/src/subordinators.md")]
pub mod subordinators {}

#[doc = include_str!("../../../book/src/monte_carlo.md")]
pub mod monte_carlo {}

#[doc = include_str!("../../../book/src/time_fractional.md")]
pub mod time_fractional {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
