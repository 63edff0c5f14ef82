//! Bell inequality violations for mode-entangled bosonic states measured
//! under a particle-number super-selection rule.
//!
//! Each of `M` parties holds one mode of a state (or one mode of each of two
//! copies) and measures through a beamsplitter followed by number-resolving
//! detectors whose counts are binned into a ±1 outcome. The crate builds the
//! fixed-particle-number Fock sector, W, Dicke and dual-rail Bell states, the
//! measurement observables, the Svetlichny/Bancal and
//! MABK/Żukowski–Brukner expressions together with brute-force classical and
//! hybrid bounds, and a multi-start simplex optimizer over measurement angles.

pub mod bell;
pub mod cli;
pub mod correlator;
pub mod error;
pub mod fock;
pub mod measurement;
pub mod optimizer;
pub mod ssr;
pub mod states;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
