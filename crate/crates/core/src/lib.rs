//! Fault-tolerant neuromorphic design toolkit built around astrocyte self-repair.
//!
//! The crate covers the whole flow at desk scale:
//!
//! * [`astro`]: continuous-time astrocyte dynamics (2-AG, Ca²⁺, glutamate, e-SP,
//!   DSE, release probability) driven by spike trains with fault schedules.
//! * [`snn`]: a small LIF inference engine with 2-bit weights, fault injection and
//!   astrocyte-coupled transmission.
//! * [`reliability`]: closed-form MTTF / failure-rate models and Poisson fault counts.
//! * [`netmap`]: core capacity models and distance-based partitioning onto cores.
//! * [`synthesis`]: astrocyte insertion into clusters under an accuracy threshold.
//! * [`costmodel`]: area and power estimates for replication, redundant mapping
//!   and astrocyte-enabled designs.
//! * [`fixed`]: 42-bit fixed point, piece-wise-linear tables and the fixed-point
//!   astrocyte datapath.
//! * [`config`], [`scenarios`], [`cli`]: experiment configuration and runners.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod astro;
pub mod config;
pub mod costmodel;
pub mod error;
pub mod fixed;
pub mod netmap;
pub mod reliability;
pub mod rng;
pub mod scenarios;
pub mod snn;
pub mod svg;
pub mod synthesis;

pub mod cli;

pub use error::{Error, Result};
