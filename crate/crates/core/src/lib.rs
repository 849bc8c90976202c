//! Learning-based task offloading among vehicles.
//!
//! A task vehicle picks one service vehicle per period, observes the
//! end-to-end offloading delay of that choice only, and an online policy
//! learns which service vehicle is fastest while the candidate set changes.
//!
//! * [`model`]: link rates and the upload / compute / download delay model.
//! * [`policy`]: ALTO and the UCB, VUCB, AdaUCB, random and genie baselines.
//! * [`env`]: scenario schedules and the per-period environment.
//! * [`metrics`]: epoch oracles, regret traces, fits and bound checks.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod env;
pub mod error;
pub mod metrics;
pub mod model;
pub mod policy;
pub mod stats;

pub use error::{Error, Result};
pub use policy::ArmId;

/// Discrete time period index. Periods count from 1.
pub type Period = u32;
