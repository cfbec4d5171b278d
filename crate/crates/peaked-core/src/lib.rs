//! Construction, obfuscation, and simulation of quasi-random peaked
//! brick-wall quantum circuits.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: small dense complex matrices, the U3/CZ gate conventions,
//!   the block-deviation metric, and ZYZ decomposition.
//! - [`circuit`]: the brick-wall circuit model, exact mirror inversion, the
//!   dense unitary oracle, and JSON (de)serialization.
//! - [`qasm`]: OpenQASM 2.0 subset emission/parsing with block recognition.
//! - [`rewrite`]: NOT-gate propagation (hidden-string embedding), U3 merging,
//!   and the double-peak entangler.
//! - [`optimize`]: derivative-free minimization used by the obfuscator.
//! - [`obfuscate`]: mirror-block re-synthesis to a target deviation and
//!   tail-group reduction.
//! - [`statevector`]: exact dense simulation, sampling, peakedness reports.
//! - [`mps`]: matrix-product-state simulation with a bond-dimension cap and
//!   the χ-threshold search.
//! - [`pipeline`]: the end-to-end generator tying the steps together.

pub mod bits;
pub mod circuit;
pub mod error;
pub mod linalg;
pub mod mps;
pub mod obfuscate;
pub mod optimize;
pub mod pipeline;
pub mod qasm;
pub mod rewrite;
pub mod statevector;
pub mod stats;

#[doc(hidden)]
pub mod testutil;

pub use bits::BitString;
pub use error::{Error, Result};
