#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod lifting;
pub mod linalg;
pub mod poincare;
pub mod report;
pub mod sparse;
pub mod stils;
pub mod transport;
pub mod vlasov;

pub use error::{Error, Result};
