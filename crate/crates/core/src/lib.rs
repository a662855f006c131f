//! Wideband terahertz multi-user MIMO precoding simulator.
//!
//! Models the frequency-dependent beam-split effect of very-large phased
//! arrays driven by frequency-flat phase shifters, and compares seven
//! precoder architectures (fully-digital ZF, single-beam analog, PS and
//! true-time-delay hybrids in full- and sub-connected forms, and delay-phase
//! precoding) in achievable sum-rate and energy efficiency.
//!
//! Layout follows the processing chain:
//! - [`channel`]: user geometry, array responses, single-LoS
//!   Saleh-Valenzuela channels, distance-dependent path loss and the
//!   absorption-window model;
//! - [`precoders`]: the precoder architectures plus the shared zero-forcing
//!   and power-normalization core;
//! - [`metrics`]: SINR/sum-rate, beam diagnostics, hardware power and energy
//!   efficiency;
//! - [`runner`]: deterministic Monte-Carlo sweeps, config loading, CSV
//!   output. The `terabeam` binary is a thin CLI over this module.

pub mod channel;
pub mod error;
pub mod metrics;
pub mod precoders;
pub mod runner;

pub use error::{Error, Result};
