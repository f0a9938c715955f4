//! The chapters of `book/` as doc modules, so `cargo test` runs every listing.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/elementary.md")]
pub mod elementary {}
#[doc = include_str!("../../../book/src/convergence.md")]
pub mod convergence {}
#[doc = include_str!("../../../book/src/counterexample.md")]
pub mod counterexample {}
#[doc = include_str!("../../../book/src/zalcman.md")]
pub mod zalcman {}
#[doc = include_str!("../../../book/src/correspondence.md")]
pub mod correspondence {}
#[doc = include_str!("../../../book/src/basin.md")]
pub mod basin {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
