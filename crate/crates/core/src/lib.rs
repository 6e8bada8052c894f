//! Online energy-efficient scheduling with primal-dual certificates.
//!
//! Four online algorithms share one water-filling primitive:
//!
//! * [`energy_value`]: single machine, energy plus lost value.
//! * [`value_energy`]: unrelated machines, value minus energy, with speed
//!   augmentation.
//! * [`sleep`]: speed scaling with a sleep state and wake-up cost.
//! * [`flow`]: weighted flow-time plus energy with a sleep state.
//!
//! Each run carries the dual variables it constructs, so the dual objective
//! and every inequality needed for the competitive bound can be checked on
//! the concrete instance. [`oracles`] supplies exact or bracketing offline
//! optima for small instances and [`certify`] assembles the verdict.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod num;
pub mod step;
pub mod model;
pub mod power;
pub mod waterfill;
pub mod ode;
pub mod edf;
pub mod energy_value;
pub mod value_energy;
pub mod oracles;
pub mod sleep;
pub mod flow;
pub mod certify;
