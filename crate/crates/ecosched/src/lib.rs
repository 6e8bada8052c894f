//! Files, reports, sweeps and the command-line driver around `ecosched-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod error;
pub mod generate;
pub mod io;
pub mod report;
pub mod sweep;

pub use error::AppError;
