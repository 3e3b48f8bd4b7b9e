//! Pauli-frame Monte Carlo engine.
//!
//! A trial samples one Pauli error word for the carrier from a
//! [`PauliMixture`], conjugates it through the round's Clifford circuit
//! *symbolically* (no state-vector arithmetic), and reads off whether the
//! word's restriction to the message slots flips the delivered codeword.
//! This trades the dense engine's exactness for per-trial costs measured in
//! nanoseconds, and is cross-validated against the dense engine in tests.
//!
//! Words are kept in `sign * X^x * Z^z` normal form (all X factors to the
//! left), which keeps signs in {+1, -1} under products and under
//! conjugation by H, X, Z and CNOT.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::PauliMixture;
use crate::protocol::{omega_gates, RoundKind};

/// Signed n-qubit Pauli operator `sign * X^{x_mask} * Z^{z_mask}`.
///
/// Mask bit `i` refers to qubit position `i`. A set bit in both masks means
/// the literal product `XZ` on that qubit (`-iY`; the suppressed `i` never
/// surfaces because the tracked Cliffords are real).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliWord {
    n_qubits: usize,
    x_mask: u64,
    z_mask: u64,
    negative: bool,
}

impl PauliWord {
    pub fn new(n_qubits: usize, x_mask: u64, z_mask: u64, negative: bool) -> Result<Self> {
        if n_qubits > 64 {
            return Err(Error::RegisterCap {
                requested: n_qubits,
                cap: 64,
            });
        }
        let valid = if n_qubits == 64 {
            u64::MAX
        } else {
            (1u64 << n_qubits) - 1
        };
        for mask in [x_mask, z_mask] {
            if mask & !valid != 0 {
                return Err(Error::TargetOutOfRange {
                    target: (63 - mask.leading_zeros()) as usize,
                    n_qubits,
                });
            }
        }
        Ok(Self {
            n_qubits,
            x_mask,
            z_mask,
            negative,
        })
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            x_mask: 0,
            z_mask: 0,
            negative: false,
        }
    }

    pub fn single_x(n_qubits: usize, qubit: usize) -> Result<Self> {
        Self::new(n_qubits, mask_bit(qubit, n_qubits)?, 0, false)
    }

    pub fn single_z(n_qubits: usize, qubit: usize) -> Result<Self> {
        Self::new(n_qubits, 0, mask_bit(qubit, n_qubits)?, false)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u64 {
        self.z_mask
    }

    pub fn sign(&self) -> i8 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    /// True when both masks are empty, regardless of sign.
    pub fn is_identity_operator(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    pub fn has_x_on(&self, qubit: usize) -> bool {
        self.x_mask >> qubit & 1 == 1
    }

    pub fn has_z_on(&self, qubit: usize) -> bool {
        self.z_mask >> qubit & 1 == 1
    }

    /// Product `self * other` in normal form:
    /// `(X^a Z^b)(X^c Z^d) = (-1)^{|b & c|} X^{a^c} Z^{b^d}`.
    pub fn compose(&self, other: &PauliWord) -> Result<PauliWord> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        let crossings = (self.z_mask & other.x_mask).count_ones();
        Ok(PauliWord {
            n_qubits: self.n_qubits,
            x_mask: self.x_mask ^ other.x_mask,
            z_mask: self.z_mask ^ other.z_mask,
            negative: self.negative ^ other.negative ^ (crossings % 2 == 1),
        })
    }

    /// The tensor factor living on the given positions, re-indexed to a
    /// register of `positions.len()` qubits. The global sign stays with the
    /// full word and is not carried into the restriction.
    pub fn restricted_to(&self, positions: &[usize]) -> Result<PauliWord> {
        let mut x = 0u64;
        let mut z = 0u64;
        for (j, pos) in positions.iter().enumerate() {
            if *pos >= self.n_qubits {
                return Err(Error::TargetOutOfRange {
                    target: *pos,
                    n_qubits: self.n_qubits,
                });
            }
            if self.has_x_on(*pos) {
                x |= 1 << j;
            }
            if self.has_z_on(*pos) {
                z |= 1 << j;
            }
        }
        PauliWord::new(positions.len(), x, z, false)
    }

    /// Widen to a larger register; existing qubits keep their positions.
    pub fn widened(&self, n_qubits: usize) -> Result<PauliWord> {
        if n_qubits < self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: n_qubits,
                right: self.n_qubits,
            });
        }
        PauliWord::new(n_qubits, self.x_mask, self.z_mask, self.negative)
    }

    /// Dense matrix of the word (position 0 as the leftmost factor).
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let one = Complex64::ONE;
        let mut out = DMatrix::from_element(1, 1, if self.negative { -one } else { one });
        for q in 0..self.n_qubits {
            let factor = match (self.has_x_on(q), self.has_z_on(q)) {
                (false, false) => crate::dense::gates::identity(),
                (true, false) => crate::dense::gates::pauli_x(),
                (false, true) => crate::dense::gates::pauli_z(),
                // literal X * Z = [[0, -1], [1, 0]]
                (true, true) => DMatrix::from_row_slice(
                    2,
                    2,
                    &[Complex64::ZERO, -one, one, Complex64::ZERO],
                ),
            };
            out = out.kronecker(&factor);
        }
        out
    }
}

impl std::fmt::Display for PauliWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", if self.negative { '-' } else { '+' })?;
        for q in 0..self.n_qubits {
            let c = match (self.has_x_on(q), self.has_z_on(q)) {
                (false, false) => 'I',
                (true, false) => 'X',
                (false, true) => 'Z',
                (true, true) => 'Y',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Clifford gates the frame engine understands, in application order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Cnot { control: usize, target: usize },
    H(usize),
    X(usize),
    Z(usize),
}

impl Gate {
    fn check(&self, n_qubits: usize) -> Result<()> {
        let check_one = |q: usize| {
            if q >= n_qubits {
                Err(Error::TargetOutOfRange {
                    target: q,
                    n_qubits,
                })
            } else {
                Ok(())
            }
        };
        match self {
            Gate::Cnot { control, target } => {
                check_one(*control)?;
                check_one(*target)?;
                if control == target {
                    return Err(Error::DuplicateTarget { target: *target });
                }
                Ok(())
            }
            Gate::H(q) | Gate::X(q) | Gate::Z(q) => check_one(*q),
        }
    }
}

/// Conjugate a word through a circuit: returns `w'` with `U w = w' U` as an
/// exact operator identity, where `U` applies the gates in list order.
pub fn conjugate_through(word: &PauliWord, circuit: &[Gate]) -> Result<PauliWord> {
    let mut w = *word;
    for gate in circuit {
        gate.check(w.n_qubits)?;
        match *gate {
            Gate::H(q) => {
                let bit = 1u64 << q;
                let had_x = w.x_mask & bit != 0;
                let had_z = w.z_mask & bit != 0;
                // H swaps X and Z; H(XZ)H = ZX = -XZ.
                if had_x && had_z {
                    w.negative = !w.negative;
                }
                w.x_mask = (w.x_mask & !bit) | if had_z { bit } else { 0 };
                w.z_mask = (w.z_mask & !bit) | if had_x { bit } else { 0 };
            }
            Gate::X(q) => {
                if w.z_mask >> q & 1 == 1 {
                    w.negative = !w.negative;
                }
            }
            Gate::Z(q) => {
                if w.x_mask >> q & 1 == 1 {
                    w.negative = !w.negative;
                }
            }
            Gate::Cnot { control, target } => {
                // X_c -> X_c X_t and Z_t -> Z_c Z_t; in X-left normal form
                // the images regroup without crossing an anticommuting pair,
                // so no sign is picked up.
                if w.x_mask >> control & 1 == 1 {
                    w.x_mask ^= 1 << target;
                }
                if w.z_mask >> target & 1 == 1 {
                    w.z_mask ^= 1 << control;
                }
            }
        }
    }
    Ok(w)
}

/// The circuit a sampled carrier word is pushed through for one round.
///
/// The mixture is referenced to the GHZ form of the carrier, so
/// parity-carrier rounds start with the joint Hadamard that produced their
/// carrier, followed by the round's upload and download CNOTs.
pub fn frame_circuit(kind: RoundKind, n_receivers: usize) -> Vec<Gate> {
    let mut gates = Vec::new();
    if kind == RoundKind::ParityCarrier {
        for q in 0..=n_receivers {
            gates.push(Gate::H(q));
        }
    }
    gates.extend(omega_gates(kind, n_receivers));
    gates
}

/// Outcome of one sampled trial.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub kind: RoundKind,
    /// Restriction of the conjugated word to the message slots; any X
    /// content means this trial delivers a flipped codeword.
    pub message_flip: PauliWord,
    /// Restriction to the carrier qubits. Stays within the round-start
    /// carrier family (it permutes the mixture's branch states).
    pub carrier_residual: PauliWord,
    pub flipped: bool,
}

/// Run one trial: sample a carrier word, conjugate it through the round
/// circuit, and restrict to the message slots.
///
/// Deterministic in `rng_seed`; a trial consumes exactly one mixed draw.
pub fn sample_trial(noise: &PauliMixture, kind: RoundKind, rng_seed: u64) -> Result<TrialOutcome> {
    let m = noise.n_qubits();
    if m < 3 {
        return Err(Error::TooFewParties { min: 3, got: m });
    }
    let n_receivers = m - 1;
    let total = 2 * n_receivers + 1;

    let u = unit_from_bits(mix64(rng_seed));
    let (word, _) = &noise.terms()[noise.select(u)];
    let full = word.widened(total)?;
    let conjugated = conjugate_through(&full, &frame_circuit(kind, n_receivers))?;

    let carrier_positions: Vec<usize> = (0..=n_receivers).collect();
    let slot_positions: Vec<usize> = (n_receivers + 1..total).collect();
    let message_flip = conjugated.restricted_to(&slot_positions)?;
    let carrier_residual = conjugated.restricted_to(&carrier_positions)?;
    let flipped = message_flip.x_mask() != 0;

    Ok(TrialOutcome {
        kind,
        message_flip,
        carrier_residual,
        flipped,
    })
}

/// Monte Carlo estimate of the codeword flip rate.
#[derive(Clone, Copy, Debug)]
pub struct FlipRateEstimate {
    pub rate: f64,
    pub std_error: f64,
    pub trials: usize,
    pub flips: usize,
}

/// Estimate the flip rate over `trials` independent trials.
///
/// Per-trial seeds derive from the master seed through a fixed integer
/// mixing function, so trials are order-independent: the result is
/// deterministic for a `(seed, trials)` pair no matter how the work is
/// scheduled across threads.
pub fn estimate_flip_rates(
    noise: &PauliMixture,
    kind: RoundKind,
    trials: usize,
    seed: u64,
) -> Result<FlipRateEstimate> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    // Surface argument errors before the parallel loop.
    sample_trial(noise, kind, trial_seed(seed, 0))?;

    // Same draws and decisions as sample_trial, with the circuit and the
    // widened words precomputed so the per-trial work is a seed mix, a
    // cumulative-weight lookup and a pass of mask arithmetic.
    let n_receivers = noise.n_qubits() - 1;
    let total = 2 * n_receivers + 1;
    let circuit = frame_circuit(kind, n_receivers);
    let slot_mask = ((1u64 << total) - 1) & !((1u64 << (n_receivers + 1)) - 1);
    let widened: Vec<PauliWord> = noise
        .terms()
        .iter()
        .map(|(w, _)| w.widened(total).expect("carrier fits the round register"))
        .collect();

    let flips = (0..trials)
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| {
            let u = unit_from_bits(mix64(trial_seed(seed, i as u64)));
            let word = widened[noise.select(u)];
            let conjugated =
                conjugate_through(&word, &circuit).expect("inputs validated above");
            usize::from(conjugated.x_mask() & slot_mask != 0)
        })
        .sum::<usize>();

    let rate = flips as f64 / trials as f64;
    let std_error = (rate * (1.0 - rate) / trials as f64).sqrt();
    Ok(FlipRateEstimate {
        rate,
        std_error,
        trials,
        flips,
    })
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` in the stream rooted at `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn mask_bit(qubit: usize, n_qubits: usize) -> Result<u64> {
    if qubit >= n_qubits {
        return Err(Error::TargetOutOfRange {
            target: qubit,
            n_qubits,
        });
    }
    Ok(1u64 << qubit)
}
