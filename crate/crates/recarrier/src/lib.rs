//! Simulation of quantum state sharing over reusable entangled carriers.
//!
//! A group of parties shares an entangled carrier state (a GHZ state, or its
//! Hadamard image, an even-parity state). The sender entangles message
//! qubits onto the carrier with CNOTs, the receivers disentangle them at the
//! other end, and a joint Hadamard flips the carrier between its two forms
//! after every round. The point of the construction is that the carrier is
//! *reusable*: even when it has been contaminated by de-phasing or global
//! depolarizing noise, running rounds over it does not degrade it further,
//! and the end-to-end channel on each message qubit is a plain bit-flip
//! channel with a fixed, known error weight.
//!
//! This crate verifies those claims two ways:
//!
//! - **exactly**, with a dense density-matrix engine ([`dense`],
//!   [`protocol`]), and
//! - **statistically**, with a Pauli-frame Monte Carlo engine
//!   ([`pauliframe`]) that propagates sampled error words through the round
//!   circuit symbolically.
//!
//! [`states`] constructs every named carrier and encoding, [`noise`] builds
//! the contaminated carriers and the phase-kick integral, and [`ecc`] layers
//! a 3-qubit repetition code over the derived bit-flip channel.
//!
//! # Quick start
//!
//! ```
//! use recarrier::protocol::{run_round, RoundKind};
//! use recarrier::states;
//! use recarrier::noise::dephased_carrier;
//! use recarrier::dense::PureState;
//! use num_complex::Complex64;
//!
//! let message = PureState::qubit(Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0))?;
//! let carrier = dephased_carrier(0.2)?;
//! // De-phasing does not hurt GHZ-carrier rounds at all.
//! let record = run_round(&carrier, &message, RoundKind::GhzCarrier)?;
//! assert!((record.fidelity_to_sent - 1.0).abs() < 1e-12);
//! # Ok::<(), recarrier::Error>(())
//! ```

#![forbid(unsafe_code)]

pub mod dense;
pub mod ecc;
mod error;
pub mod noise;
pub mod pauliframe;
pub mod protocol;
pub mod states;

pub use error::{Error, Result};

/// Hard cap on dense register width; matrices are `2^n x 2^n`.
pub const REGISTER_CAP: usize = 14;

/// Tolerance for structural validation: norms, Hermiticity, traces,
/// unitarity. Double precision leaves ample headroom at these dimensions.
pub const STRUCTURAL_TOL: f64 = 1e-10;

/// Tolerance for algebraic identities on registers of up to ~6 qubits.
pub const ALGEBRAIC_TOL: f64 = 1e-12;

/// Tolerance for probability vectors: mixture weights, channel weights.
pub const PROBABILITY_TOL: f64 = 1e-9;

// Every fenced code block in the book runs under `cargo test --doc`, so
// the guide in book/ cannot drift out of sync with the library.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/pauliframe.md")]
    mod pauliframe {}
    #[doc = include_str!("../../../book/src/error-correction.md")]
    mod error_correction {}
}
