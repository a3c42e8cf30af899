//! Runs the code blocks of the guide in `book/src` as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}
#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}
#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
