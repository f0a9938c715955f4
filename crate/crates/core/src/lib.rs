//! Polynomial renormalization of iterated elementary holomorphic maps of `C^2`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN
pub mod basin;
pub mod correspondence;
pub mod elementary;
pub mod error;
pub mod poly2;
pub mod series;
pub mod zalcman;

pub use error::{Error, ErrorClass, Result};
pub use series::{CoefficientRule, Jet, C64};
