//! Exact complex linear algebra over multi-qubit registers.
//!
//! States are stored dense: a pure state on `n` qubits is a `2^n` amplitude
//! vector, a mixed state a `2^n x 2^n` density matrix. Qubit position 0 is
//! the *leftmost* tensor factor, i.e. the most significant bit of a basis
//! index, matching the left-to-right subscript order A, B, C, 1, 2 used
//! throughout the protocol layer.
//!
//! Nothing here renormalizes: constructors and operations validate their
//! outputs and fail loudly when a state drifts out of tolerance, because at
//! these register sizes drift indicates a bug rather than numerical debt.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{ALGEBRAIC_TOL, REGISTER_CAP, STRUCTURAL_TOL};

/// Normalized amplitude vector on a fixed number of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amplitudes: DVector<Complex64>,
}

impl PureState {
    /// Build from amplitudes, validating length (`2^n_qubits`) and unit norm.
    pub fn new(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_cap(n_qubits)?;
        let expected = 1usize << n_qubits;
        if amplitudes.len() != expected {
            return Err(Error::AmplitudeLength {
                expected,
                got: amplitudes.len(),
            });
        }
        let amplitudes = DVector::from_vec(amplitudes);
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STRUCTURAL_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_cap(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::TargetOutOfRange {
                target: index,
                n_qubits,
            });
        }
        let mut amplitudes = vec![Complex64::ZERO; dim];
        amplitudes[index] = Complex64::ONE;
        Self::new(n_qubits, amplitudes)
    }

    /// Single qubit `alpha|0⟩ + beta|1⟩`.
    pub fn qubit(alpha: Complex64, beta: Complex64) -> Result<Self> {
        Self::new(1, vec![alpha, beta])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// The projector `|self⟩⟨self|`.
    pub fn to_density(&self) -> DensityMatrix {
        let entries = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix {
            n_qubits: self.n_qubits,
            entries,
        }
    }
}

/// Exact mixed-state representation: Hermitian, trace-1, positive
/// semidefinite matrix on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Build from entries with full validation, including the positive
    /// semidefiniteness eigencheck.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self::from_entries(entries)?;
        rho.check_positive()?;
        Ok(rho)
    }

    /// Build with the cheap structural checks only (shape, Hermiticity,
    /// trace). Used by operations whose outputs are positive by
    /// construction; the eigencheck stays available through [`validate`].
    ///
    /// [`validate`]: DensityMatrix::validate
    pub(crate) fn from_entries(entries: DMatrix<Complex64>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols || !rows.is_power_of_two() || rows == 0 {
            return Err(Error::BadShape { rows, cols });
        }
        let n_qubits = rows.trailing_zeros() as usize;
        check_cap(n_qubits)?;
        let herm_dev = hermiticity_deviation(&entries);
        if herm_dev > STRUCTURAL_TOL {
            return Err(Error::NotHermitian {
                deviation: herm_dev,
            });
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > STRUCTURAL_TOL || trace.im.abs() > STRUCTURAL_TOL {
            return Err(Error::BadTrace { trace: trace.re });
        }
        Ok(Self { n_qubits, entries })
    }

    /// Pure-state projector `|psi⟩⟨psi|`.
    pub fn from_pure(psi: &PureState) -> Self {
        psi.to_density()
    }

    /// The maximally mixed state `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_cap(n_qubits)?;
        let dim = 1usize << n_qubits;
        let entries = DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0);
        Ok(Self { n_qubits, entries })
    }

    /// Convex mixture `sum_k w_k rho_k`. Weights must be nonnegative and sum
    /// to 1 within the probability tolerance.
    pub fn mixture(terms: &[(f64, &DensityMatrix)]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidMixture {
                reason: "empty mixture".into(),
            });
        }
        let n = terms[0].1.n_qubits;
        let dim = 1usize << n;
        let mut total = 0.0;
        let mut entries = DMatrix::zeros(dim, dim);
        for (w, rho) in terms {
            if *w < -crate::PROBABILITY_TOL {
                return Err(Error::InvalidMixture {
                    reason: format!("negative weight {w}"),
                });
            }
            if rho.n_qubits != n {
                return Err(Error::DimensionMismatch {
                    left: n,
                    right: rho.n_qubits,
                });
            }
            total += w;
            entries += &rho.entries * Complex64::new(*w, 0.0);
        }
        if (total - 1.0).abs() > crate::PROBABILITY_TOL {
            return Err(Error::InvalidMixture {
                reason: format!("weights sum to {total}"),
            });
        }
        Self::from_entries(entries)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// Full validation, including the positive semidefiniteness eigencheck.
    pub fn validate(&self) -> Result<()> {
        Self::from_entries(self.entries.clone())?;
        self.check_positive()
    }

    fn check_positive(&self) -> Result<()> {
        let eigenvalues = hermitian_eigenvalues(&self.entries);
        let min = eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -STRUCTURAL_TOL {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
            });
        }
        Ok(())
    }
}

/// Ordered role labels for the qubits of a register.
///
/// Position 0 is the leftmost tensor factor. The protocol layout places the
/// sender's carrier qubit first, then one carrier qubit per receiver, then
/// the message slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    labels: Vec<Role>,
}

/// Role of one qubit in a register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    /// The sender's carrier qubit (A).
    Alice,
    /// Carrier qubit of receiver `i` (1-based; receiver 1 is B).
    Receiver(usize),
    /// Message slot `i` (1-based; slot `i` travels to receiver `i`).
    Slot(usize),
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Role::Alice => write!(f, "A"),
            Role::Receiver(i) if (1..=25).contains(i) => {
                write!(f, "{}", (b'A' + *i as u8) as char)
            }
            Role::Receiver(i) => write!(f, "R{i}"),
            Role::Slot(i) => write!(f, "{i}"),
        }
    }
}

impl RegisterLayout {
    pub fn new(labels: Vec<Role>) -> Result<Self> {
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::DuplicateLabel {
                    label: label.to_string(),
                });
            }
        }
        check_cap(labels.len())?;
        Ok(Self { labels })
    }

    /// The protocol register for `n` receivers:
    /// `A, B, C, ... | slot 1 .. slot n`.
    pub fn for_protocol(n_receivers: usize) -> Result<Self> {
        if n_receivers < 2 {
            return Err(Error::TooFewParties {
                min: 2,
                got: n_receivers,
            });
        }
        let mut labels = vec![Role::Alice];
        labels.extend((1..=n_receivers).map(Role::Receiver));
        labels.extend((1..=n_receivers).map(Role::Slot));
        Self::new(labels)
    }

    pub fn n_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Role] {
        &self.labels
    }

    pub fn position(&self, role: Role) -> Option<usize> {
        self.labels.iter().position(|l| *l == role)
    }

    pub fn require(&self, role: Role) -> Result<usize> {
        self.position(role).ok_or_else(|| Error::MissingRole {
            role: role.to_string(),
        })
    }

    /// Positions of the carrier qubits (Alice plus all receivers), in order.
    pub fn carrier_positions(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, Role::Alice | Role::Receiver(_)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Positions of the message slots, in slot order.
    pub fn slot_positions(&self) -> Vec<usize> {
        let mut slots: Vec<(usize, usize)> = self
            .labels
            .iter()
            .enumerate()
            .filter_map(|(pos, l)| match l {
                Role::Slot(i) => Some((*i, pos)),
                _ => None,
            })
            .collect();
        slots.sort_unstable();
        slots.into_iter().map(|(_, pos)| pos).collect()
    }

    pub fn n_receivers(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| matches!(l, Role::Receiver(_)))
            .count()
    }
}

/// Small fixed gate matrices (2x2 and 4x4, most significant qubit first).
pub mod gates {
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn m(rows: usize, data: &[f64]) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            rows,
            rows,
            &data
                .iter()
                .map(|x| Complex64::new(*x, 0.0))
                .collect::<Vec<_>>(),
        )
    }

    pub fn identity() -> DMatrix<Complex64> {
        m(2, &[1.0, 0.0, 0.0, 1.0])
    }

    pub fn pauli_x() -> DMatrix<Complex64> {
        m(2, &[0.0, 1.0, 1.0, 0.0])
    }

    pub fn pauli_y() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::ZERO,
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                Complex64::ZERO,
            ],
        )
    }

    pub fn pauli_z() -> DMatrix<Complex64> {
        m(2, &[1.0, 0.0, 0.0, -1.0])
    }

    pub fn hadamard() -> DMatrix<Complex64> {
        m(
            2,
            &[
                FRAC_1_SQRT_2,
                FRAC_1_SQRT_2,
                FRAC_1_SQRT_2,
                -FRAC_1_SQRT_2,
            ],
        )
    }

    /// CNOT with the first (more significant) target as control.
    pub fn cnot() -> DMatrix<Complex64> {
        m(
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        )
    }
}

/// Kronecker product of two density matrices, `a` as the left factor.
pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    check_cap(a.n_qubits + b.n_qubits)?;
    let entries = a.entries.kronecker(&b.entries);
    Ok(DensityMatrix {
        n_qubits: a.n_qubits + b.n_qubits,
        entries,
    })
}

/// Kronecker product of two pure states, `a` as the left factor.
pub fn tensor_pure(a: &PureState, b: &PureState) -> Result<PureState> {
    check_cap(a.n_qubits + b.n_qubits)?;
    let amplitudes = a.amplitudes.kronecker(&b.amplitudes);
    Ok(PureState {
        n_qubits: a.n_qubits + b.n_qubits,
        amplitudes,
    })
}

/// Conjugate `rho` by a small unitary acting on the given target positions:
/// `U rho U†` with `u` embedded as identity elsewhere.
///
/// `targets[0]` is the most significant qubit of `u`'s own basis ordering.
pub fn apply_unitary(
    rho: &DensityMatrix,
    u: &DMatrix<Complex64>,
    targets: &[usize],
) -> Result<DensityMatrix> {
    check_targets(u, targets, rho.n_qubits)?;
    let mut entries = rho.entries.clone();
    transform_side(&mut entries, u, targets, rho.n_qubits, Side::Rows);
    let u_conj = u.conjugate();
    transform_side(&mut entries, &u_conj, targets, rho.n_qubits, Side::Cols);
    DensityMatrix::from_entries(entries)
}

/// Apply a small unitary to a pure state on the given target positions.
pub fn apply_unitary_pure(
    psi: &PureState,
    u: &DMatrix<Complex64>,
    targets: &[usize],
) -> Result<PureState> {
    check_targets(u, targets, psi.n_qubits)?;
    let n = psi.n_qubits;
    let k = targets.len();
    let local_dim = 1usize << k;
    let target_bits: Vec<usize> = targets.iter().map(|t| n - 1 - t).collect();
    let mut sorted_bits = target_bits.clone();
    sorted_bits.sort_unstable();

    let mut amplitudes = psi.amplitudes.clone();
    let mut gathered = vec![Complex64::ZERO; local_dim];
    for rest in 0..(1usize << (n - k)) {
        let base = expand_with_zeros(rest, &sorted_bits);
        for local in 0..local_dim {
            gathered[local] = amplitudes[base | scatter_local(local, &target_bits)];
        }
        for local_out in 0..local_dim {
            let mut acc = Complex64::ZERO;
            for (local_in, g) in gathered.iter().enumerate() {
                acc += u[(local_out, local_in)] * g;
            }
            amplitudes[base | scatter_local(local_out, &target_bits)] = acc;
        }
    }
    let norm = amplitudes.norm();
    if (norm - 1.0).abs() > STRUCTURAL_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(PureState {
        n_qubits: n,
        amplitudes,
    })
}

enum Side {
    Rows,
    Cols,
}

/// Apply `u` to the row (or column) index group of the target qubits, for
/// every value of the untouched indices. Cost `O(4^n 2^k)` instead of the
/// `O(8^n)` of a full embedded matrix product.
fn transform_side(
    entries: &mut DMatrix<Complex64>,
    u: &DMatrix<Complex64>,
    targets: &[usize],
    n: usize,
    side: Side,
) {
    let k = targets.len();
    let local_dim = 1usize << k;
    let dim = 1usize << n;
    let target_bits: Vec<usize> = targets.iter().map(|t| n - 1 - t).collect();
    let mut sorted_bits = target_bits.clone();
    sorted_bits.sort_unstable();
    let scatter: Vec<usize> = (0..local_dim)
        .map(|l| scatter_local(l, &target_bits))
        .collect();

    let mut gathered = vec![Complex64::ZERO; local_dim];
    for other in 0..dim {
        for rest in 0..(1usize << (n - k)) {
            let base = expand_with_zeros(rest, &sorted_bits);
            match side {
                Side::Rows => {
                    for local in 0..local_dim {
                        gathered[local] = entries[(base | scatter[local], other)];
                    }
                    for local_out in 0..local_dim {
                        let mut acc = Complex64::ZERO;
                        for (local_in, g) in gathered.iter().enumerate() {
                            acc += u[(local_out, local_in)] * g;
                        }
                        entries[(base | scatter[local_out], other)] = acc;
                    }
                }
                Side::Cols => {
                    for local in 0..local_dim {
                        gathered[local] = entries[(other, base | scatter[local])];
                    }
                    for local_out in 0..local_dim {
                        let mut acc = Complex64::ZERO;
                        for (local_in, g) in gathered.iter().enumerate() {
                            acc += u[(local_out, local_in)] * g;
                        }
                        entries[(other, base | scatter[local_out])] = acc;
                    }
                }
            }
        }
    }
}

/// Embed a small unitary on the target positions as a full `2^n x 2^n`
/// operator. Exponentially more memory than [`apply_unitary`]; intended for
/// operator-identity checks on small registers.
pub fn embed_unitary(
    u: &DMatrix<Complex64>,
    targets: &[usize],
    n_qubits: usize,
) -> Result<DMatrix<Complex64>> {
    check_targets(u, targets, n_qubits)?;
    let dim = 1usize << n_qubits;
    let k = targets.len();
    let target_bits: Vec<usize> = targets.iter().map(|t| n_qubits - 1 - t).collect();
    let target_mask: usize = target_bits.iter().map(|b| 1usize << b).sum();
    let mut full = DMatrix::zeros(dim, dim);
    for row in 0..dim {
        let row_local = gather_local(row, &target_bits);
        let rest = row & !target_mask;
        for col_local in 0..(1usize << k) {
            let col = rest | scatter_local(col_local, &target_bits);
            full[(row, col)] = u[(row_local, col_local)];
        }
    }
    Ok(full)
}

/// Reduced state on the kept qubits, in ascending-position order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    let n = rho.n_qubits;
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    for (i, pos) in keep.iter().enumerate() {
        if *pos >= n {
            return Err(Error::TargetOutOfRange {
                target: *pos,
                n_qubits: n,
            });
        }
        if i > 0 && keep[i - 1] == *pos {
            return Err(Error::DuplicateTarget { target: *pos });
        }
    }
    let k = keep.len();
    if k == n {
        return Ok(rho.clone());
    }
    let keep_bits: Vec<usize> = keep.iter().map(|p| n - 1 - p).collect();
    let traced_bits: Vec<usize> = (0..n)
        .filter(|p| !keep.contains(p))
        .map(|p| n - 1 - p)
        .collect();

    let kept_dim = 1usize << k;
    let traced_dim = 1usize << (n - k);
    let keep_scatter: Vec<usize> = (0..kept_dim)
        .map(|a| scatter_local(a, &keep_bits))
        .collect();
    let traced_scatter: Vec<usize> = (0..traced_dim)
        .map(|t| scatter_local(t, &traced_bits))
        .collect();

    let mut reduced = DMatrix::zeros(kept_dim, kept_dim);
    for a in 0..kept_dim {
        for b in 0..kept_dim {
            let mut acc = Complex64::ZERO;
            for t in traced_scatter.iter() {
                acc += rho.entries[(keep_scatter[a] | t, keep_scatter[b] | t)];
            }
            reduced[(a, b)] = acc;
        }
    }
    DensityMatrix::from_entries(reduced)
}

/// `⟨psi|rho|psi⟩` as a real number.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.n_qubits != psi.n_qubits {
        return Err(Error::DimensionMismatch {
            left: rho.n_qubits,
            right: psi.n_qubits,
        });
    }
    let value = psi.amplitudes.dotc(&(&rho.entries * &psi.amplitudes));
    debug_assert!(value.im.abs() < ALGEBRAIC_TOL * 10.0);
    Ok(value.re)
}

/// Trace distance `(1/2) * sum |eigenvalues(a - b)|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::DimensionMismatch {
            left: a.n_qubits,
            right: b.n_qubits,
        });
    }
    let diff = &a.entries - &b.entries;
    let sum: f64 = hermitian_eigenvalues(&diff).iter().map(|x| x.abs()).sum();
    Ok(0.5 * sum)
}

/// Eigenvalues of a Hermitian matrix, unordered.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    m.clone().symmetric_eigen().eigenvalues.as_slice().to_vec()
}

/// Max entrywise deviation from Hermiticity.
pub fn hermiticity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_cap(n_qubits: usize) -> Result<()> {
    if n_qubits > REGISTER_CAP {
        return Err(Error::RegisterCap {
            requested: n_qubits,
            cap: REGISTER_CAP,
        });
    }
    Ok(())
}

fn check_targets(u: &DMatrix<Complex64>, targets: &[usize], n_qubits: usize) -> Result<()> {
    let k = targets.len();
    let local_dim = 1usize << k;
    if u.nrows() != local_dim || u.ncols() != local_dim {
        return Err(Error::BadShape {
            rows: u.nrows(),
            cols: u.ncols(),
        });
    }
    for (i, t) in targets.iter().enumerate() {
        if *t >= n_qubits {
            return Err(Error::TargetOutOfRange {
                target: *t,
                n_qubits,
            });
        }
        if targets[..i].contains(t) {
            return Err(Error::DuplicateTarget { target: *t });
        }
    }
    let dev = (u.adjoint() * u - DMatrix::<Complex64>::identity(local_dim, local_dim))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if dev > STRUCTURAL_TOL {
        return Err(Error::NotUnitary { deviation: dev });
    }
    Ok(())
}

/// Place the bits of `local` (MSB first over `target_bits`) at their global
/// bit positions.
fn scatter_local(local: usize, target_bits: &[usize]) -> usize {
    let k = target_bits.len();
    let mut out = 0usize;
    for (j, bit) in target_bits.iter().enumerate() {
        if (local >> (k - 1 - j)) & 1 == 1 {
            out |= 1usize << bit;
        }
    }
    out
}

/// Read the local index (MSB first over `target_bits`) out of a global index.
fn gather_local(global: usize, target_bits: &[usize]) -> usize {
    let k = target_bits.len();
    let mut out = 0usize;
    for (j, bit) in target_bits.iter().enumerate() {
        if (global >> bit) & 1 == 1 {
            out |= 1usize << (k - 1 - j);
        }
    }
    out
}

/// Expand `compressed` into a full index with zero bits at the given
/// (ascending) bit positions.
fn expand_with_zeros(compressed: usize, sorted_bits: &[usize]) -> usize {
    let mut x = compressed;
    for bit in sorted_bits {
        let low = x & ((1usize << bit) - 1);
        let high = x >> bit;
        x = (high << (bit + 1)) | low;
    }
    x
}
