//! Canonical constructors for the named carrier states and message
//! encodings: n-party parity states, GHZ states, the 3-qubit GHZ octet, and
//! the product/parity message encodings.
//!
//! All constructors fix amplitudes real and nonnegative except for the
//! explicit minus of the primed (−) states; comparisons elsewhere go through
//! fidelity, which absorbs global phase.

use num_complex::Complex64;

use crate::dense::PureState;
use crate::error::{Error, Result};

/// A classical parity bit. Negation is an involution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParityBit {
    Zero,
    One,
}

impl ParityBit {
    pub fn flipped(self) -> Self {
        match self {
            ParityBit::Zero => ParityBit::One,
            ParityBit::One => ParityBit::Zero,
        }
    }

    pub fn value(self) -> usize {
        match self {
            ParityBit::Zero => 0,
            ParityBit::One => 1,
        }
    }

    pub fn from_parity_of(bits: usize) -> Self {
        if bits.count_ones().is_multiple_of(2) {
            ParityBit::Zero
        } else {
            ParityBit::One
        }
    }
}

/// Sign of a GHZ-family state: `+` for `|0..0⟩ + |1..1⟩`, `−` for the
/// primed states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

/// Which carrier qubit carries the X flip relative to the standard GHZ
/// state. `Zero` is no flip: the label (Zero, +) denotes `G_0` itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GhzSite {
    Zero,
    A,
    B,
    C,
}

impl GhzSite {
    /// Qubit position of the flip, if any (A, B, C at positions 0, 1, 2).
    pub fn flip_position(self) -> Option<usize> {
        match self {
            GhzSite::Zero => None,
            GhzSite::A => Some(0),
            GhzSite::B => Some(1),
            GhzSite::C => Some(2),
        }
    }

    pub const ALL: [GhzSite; 4] = [GhzSite::Zero, GhzSite::A, GhzSite::B, GhzSite::C];
}

/// Label of one member of the 3-qubit GHZ basis octet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GhzLabel {
    pub site: GhzSite,
    pub sign: Sign,
}

/// Uniform positive superposition of all n-bit strings of the given parity.
pub fn parity_state(n: usize, q: ParityBit) -> Result<PureState> {
    if n < 2 {
        return Err(Error::TooFewParties { min: 2, got: n });
    }
    let dim = 1usize << n;
    let amp = Complex64::new(1.0 / ((dim / 2) as f64).sqrt(), 0.0);
    let amplitudes = (0..dim)
        .map(|i| {
            if ParityBit::from_parity_of(i) == q {
                amp
            } else {
                Complex64::ZERO
            }
        })
        .collect();
    PureState::new(n, amplitudes)
}

/// `(|0..0⟩ ± |1..1⟩)/sqrt(2)` on n qubits.
pub fn ghz_state(n: usize, sign: Sign) -> Result<PureState> {
    if n < 2 {
        return Err(Error::TooFewParties { min: 2, got: n });
    }
    let dim = 1usize << n;
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut amplitudes = vec![Complex64::ZERO; dim];
    amplitudes[0] = s;
    amplitudes[dim - 1] = match sign {
        Sign::Plus => s,
        Sign::Minus => -s,
    };
    PureState::new(n, amplitudes)
}

/// One member of the 3-qubit GHZ octet; satisfies `|G_i⟩ = X_i |G_0⟩` and
/// `|G'_i⟩ = X_i |G'_0⟩` exactly.
pub fn ghz_basis_state(label: GhzLabel) -> PureState {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mask = match label.site.flip_position() {
        // Position p is bit (3 - 1 - p) of the basis index.
        Some(p) => 1usize << (2 - p),
        None => 0,
    };
    let mut amplitudes = vec![Complex64::ZERO; 8];
    amplitudes[mask] = s;
    amplitudes[7 ^ mask] = match label.sign {
        Sign::Plus => s,
        Sign::Minus => -s,
    };
    PureState::new(3, amplitudes).expect("octet states are normalized by construction")
}

/// The eight octet members in the order
/// `G_0, G'_0, G_A, G'_A, G_B, G'_B, G_C, G'_C`.
pub fn ghz_octet() -> Vec<(GhzLabel, PureState)> {
    let mut out = Vec::with_capacity(8);
    for site in GhzSite::ALL {
        for sign in [Sign::Plus, Sign::Minus] {
            let label = GhzLabel { site, sign };
            out.push((label, ghz_basis_state(label)));
        }
    }
    out
}

/// Product encoding `alpha|0^n⟩ + beta|1^n⟩`, used in GHZ-carrier rounds.
pub fn encode_product(psi: &PureState, n: usize) -> Result<PureState> {
    let (alpha, beta) = single_qubit_amplitudes(psi)?;
    if n == 0 {
        return Err(Error::TooFewParties { min: 1, got: 0 });
    }
    let dim = 1usize << n;
    let mut amplitudes = vec![Complex64::ZERO; dim];
    amplitudes[0] = alpha;
    amplitudes[dim - 1] = beta;
    PureState::new(n, amplitudes)
}

/// Parity encoding `alpha|par 0⟩ + beta|par 1⟩`, used in parity-carrier
/// rounds.
pub fn encode_parity(psi: &PureState, n: usize) -> Result<PureState> {
    let (alpha, beta) = single_qubit_amplitudes(psi)?;
    if n < 2 {
        return Err(Error::TooFewParties { min: 2, got: n });
    }
    let dim = 1usize << n;
    let scale = Complex64::new(1.0 / ((dim / 2) as f64).sqrt(), 0.0);
    let amplitudes = (0..dim)
        .map(|i| match ParityBit::from_parity_of(i) {
            ParityBit::Zero => alpha * scale,
            ParityBit::One => beta * scale,
        })
        .collect();
    PureState::new(n, amplitudes)
}

fn single_qubit_amplitudes(psi: &PureState) -> Result<(Complex64, Complex64)> {
    if psi.n_qubits() != 1 {
        return Err(Error::DimensionMismatch {
            left: psi.n_qubits(),
            right: 1,
        });
    }
    Ok((psi.amplitude(0), psi.amplitude(1)))
}
