//! Repetition-code layer over the bit-flip complete channel.
//!
//! Both noise families reduce the end-to-end channel to a bit-flip channel,
//! so the minimal matched code is the 3-qubit repetition code: encode
//! `|0⟩ -> |000⟩`, `|1⟩ -> |111⟩`, send each physical qubit through one
//! channel use, majority-vote the syndrome, decode. A logical flip needs at
//! least two physical flips, so the logical rate is `3q^2 - 2q^3`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dense::{embed_unitary, gates, partial_trace, DensityMatrix, PureState};
use crate::error::{Error, Result};
use crate::pauliframe::Gate;
use crate::protocol::apply_gates;
use crate::states::encode_product;

/// Physical bit-flip probability of one complete-channel use.
#[derive(Clone, Copy, Debug)]
pub struct LogicalChannelSpec {
    q: f64,
}

impl LogicalChannelSpec {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) || !q.is_finite() {
            return Err(Error::OutOfRange {
                name: "q",
                value: q,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Independent bit-flip channel with parameter `q` on every qubit of a
/// register.
pub fn bit_flip_each(rho: &DensityMatrix, q: f64) -> Result<DensityMatrix> {
    let spec = LogicalChannelSpec::new(q)?;
    let q = spec.q();
    let x = gates::pauli_x();
    let mut out = rho.clone();
    for qubit in 0..rho.n_qubits() {
        let flipped = crate::dense::apply_unitary(&out, &x, &[qubit])?;
        out = DensityMatrix::mixture(&[(1.0 - q, &out), (q, &flipped)])?;
    }
    Ok(out)
}

/// Exact majority-vote recovery on the 3-qubit repetition code: the sum
/// over syndrome projectors with their conditional X corrections, not a
/// sampled measurement.
pub fn majority_correct(rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.n_qubits() != 3 {
        return Err(Error::DimensionMismatch {
            left: rho.n_qubits(),
            right: 3,
        });
    }
    // Syndrome classes: basis strings grouped by which single qubit
    // disagrees with the nearest codeword; class members listed as basis
    // indices (position 0 is the most significant bit).
    let classes: [(Option<usize>, [usize; 2]); 4] = [
        (None, [0b000, 0b111]),
        (Some(0), [0b100, 0b011]),
        (Some(1), [0b010, 0b101]),
        (Some(2), [0b001, 0b110]),
    ];
    let mut entries = DMatrix::<Complex64>::zeros(8, 8);
    for (correction, members) in classes {
        let mut projector = DMatrix::<Complex64>::zeros(8, 8);
        for idx in members {
            projector[(idx, idx)] = Complex64::ONE;
        }
        let kraus = match correction {
            None => projector,
            Some(qubit) => embed_unitary(&gates::pauli_x(), &[qubit], 3)? * projector,
        };
        entries += &kraus * rho.entries() * kraus.adjoint();
    }
    DensityMatrix::from_entries(entries)
}

/// Encode into the repetition code, push every physical qubit through a
/// bit-flip channel of weight `q`, majority-correct, and decode back to one
/// qubit.
pub fn transmit_encoded(psi: &PureState, q: f64) -> Result<DensityMatrix> {
    let encoded = encode_product(psi, 3)?.to_density();
    let noisy = bit_flip_each(&encoded, q)?;
    let corrected = majority_correct(&noisy)?;
    decode_repetition(&corrected)
}

/// Inverse of the repetition encoding on the code space: fold the syndrome
/// qubits onto the first with CNOTs and keep it.
pub fn decode_repetition(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let unfolded = apply_gates(
        rho,
        &[
            Gate::Cnot {
                control: 0,
                target: 1,
            },
            Gate::Cnot {
                control: 0,
                target: 2,
            },
        ],
    )?;
    partial_trace(&unfolded, &[0])
}

/// Logical flip rate of one encoded transmission: `3q^2 - 2q^3` (a logical
/// flip needs at least two physical flips).
pub fn logical_error_rate(q: f64) -> Result<f64> {
    let q = LogicalChannelSpec::new(q)?.q();
    Ok(3.0 * q * q - 2.0 * q * q * q)
}
