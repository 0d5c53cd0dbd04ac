// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cavity;
pub mod config;
pub mod discretize;
pub mod error;
pub mod io;
pub mod linalg;
pub mod linsys;
pub mod lqg;
pub mod pipeline;
pub mod reduction;
pub mod riccati;
pub mod sim;
pub mod synthetic;
pub mod sysid;

pub use error::{Error, Result};
pub use linsys::{feedback, series, DiscreteStateSpace, FrequencyResponse, StateSpace};
