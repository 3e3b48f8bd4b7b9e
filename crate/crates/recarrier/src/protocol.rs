//! The round state machine: encode, upload (the sender's CNOTs), download
//! (the receivers' CNOTs), the joint Hadamard step, collaborative decoding,
//! multi-round execution over noisy carriers, and extraction of the
//! effective end-to-end channel.
//!
//! Rounds are numbered from 0 and alternate carrier kinds: GHZ-carrier
//! rounds (even) product-encode the message so each receiver can read its
//! bit independently; parity-carrier rounds (odd) parity-encode it so the
//! receivers must collaborate. The joint Hadamard between rounds turns the
//! two carriers into each other.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dense::{
    apply_unitary, fidelity_pure, gates, partial_trace, tensor, DensityMatrix, PureState,
    RegisterLayout, Role,
};
use crate::error::{Error, Result};
use crate::noise::{dephased_carrier_on, depolarized_carrier_on, p_from_kicks, NoiseSpec};
use crate::pauliframe::{Gate, PauliWord};
use crate::states::{encode_parity, encode_product, ghz_state, ParityBit, Sign};
use crate::{PROBABILITY_TOL, REGISTER_CAP};

/// Carrier kind of a round. GHZ carriers serve the even rounds 0, 2, 4, ...
/// and parity carriers the odd rounds; the Hadamard step toggles the kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RoundKind {
    GhzCarrier,
    ParityCarrier,
}

impl RoundKind {
    pub fn toggled(self) -> Self {
        match self {
            RoundKind::GhzCarrier => RoundKind::ParityCarrier,
            RoundKind::ParityCarrier => RoundKind::GhzCarrier,
        }
    }

    /// Kind of round `index`, starting from round 0 with the GHZ carrier.
    pub fn of_round(index: usize) -> Self {
        if index.is_multiple_of(2) {
            RoundKind::GhzCarrier
        } else {
            RoundKind::ParityCarrier
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RoundKind::GhzCarrier => "ghz",
            RoundKind::ParityCarrier => "parity",
        }
    }
}

/// What the sender feeds into one round: a message state, or a redundant
/// filler round that carries no information (a fixed `|0⟩`).
#[derive(Clone, Debug)]
pub enum RoundInput {
    Message(PureState),
    Redundant,
}

/// Configuration of a multi-round run. The number of rounds is the length
/// of `messages`.
#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub n_receivers: usize,
    pub noise: NoiseSpec,
    pub messages: Vec<RoundInput>,
    /// Seed for any sampled execution driven from this config; the dense
    /// engine itself is deterministic.
    pub seed: u64,
}

impl ProtocolConfig {
    /// The same message in every round.
    pub fn repeated(
        n_receivers: usize,
        noise: NoiseSpec,
        message: PureState,
        rounds: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_receivers,
            noise,
            messages: vec![RoundInput::Message(message); rounds],
            seed,
        }
    }

    pub fn rounds(&self) -> usize {
        self.messages.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_receivers < 2 {
            return Err(Error::TooFewParties {
                min: 2,
                got: self.n_receivers,
            });
        }
        let register = 2 * self.n_receivers + 1;
        if register > REGISTER_CAP {
            return Err(Error::RegisterCap {
                requested: register,
                cap: REGISTER_CAP,
            });
        }
        for (i, input) in self.messages.iter().enumerate() {
            if let RoundInput::Message(psi) = input {
                if psi.n_qubits() != 1 {
                    return Err(Error::BadConfig {
                        reason: format!("round {i}: message must be a single qubit"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Everything observable about one executed round.
#[derive(Clone, Debug)]
pub struct RoundRecord {
    pub index: usize,
    pub kind: RoundKind,
    /// The collaboratively decoded single-qubit state.
    pub delivered: DensityMatrix,
    pub fidelity_to_sent: f64,
    pub carrier_before: DensityMatrix,
    /// Carrier after download, before the Hadamard step.
    pub carrier_after: DensityMatrix,
}

/// The effective single-qubit channel as Pauli-conjugation weights
/// `(p_I, p_X, p_Y, p_Z)`.
#[derive(Clone, Copy, Debug)]
pub struct ChannelEstimate {
    weights: [f64; 4],
}

impl ChannelEstimate {
    pub fn new(weights: [f64; 4]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::ChannelConsistency {
                detail: format!("channel weights sum to {sum}"),
            });
        }
        if let Some(w) = weights.iter().find(|w| **w < -PROBABILITY_TOL) {
            return Err(Error::ChannelConsistency {
                detail: format!("negative channel weight {w}"),
            });
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> [f64; 4] {
        self.weights
    }

    pub fn p_i(&self) -> f64 {
        self.weights[0]
    }

    pub fn p_x(&self) -> f64 {
        self.weights[1]
    }

    pub fn p_y(&self) -> f64 {
        self.weights[2]
    }

    pub fn p_z(&self) -> f64 {
        self.weights[3]
    }

    /// Apply the channel to a single-qubit state:
    /// `sum_k w_k P_k rho P_k`.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                left: rho.n_qubits(),
                right: 1,
            });
        }
        let paulis = [
            gates::identity(),
            gates::pauli_x(),
            gates::pauli_y(),
            gates::pauli_z(),
        ];
        let mut entries = DMatrix::<Complex64>::zeros(2, 2);
        for (w, p) in self.weights.iter().zip(paulis.iter()) {
            entries += (p * rho.entries() * p.adjoint()) * Complex64::new(*w, 0.0);
        }
        DensityMatrix::from_entries(entries)
    }
}

/// Exhaustive view of a complete-channel extraction.
///
/// `estimate` is the codeword-level channel: `p_X` is the probability that
/// the delivered message register differs from the ideal codeword at all
/// (the protocol's headline error rate; `3p/4` for depolarizing GHZ rounds).
/// `decoded` is the channel seen by the collaboratively decoded qubit,
/// which can be smaller when corrupted codewords still decode to the sent
/// qubit (`p/2` for depolarizing GHZ rounds). The two coincide in
/// parity-carrier rounds.
#[derive(Clone, Debug)]
pub struct ChannelReport {
    pub kind: RoundKind,
    pub estimate: ChannelEstimate,
    pub decoded: ChannelEstimate,
    /// GHZ-carrier rounds only: weight of each joint X-flip pattern on the
    /// delivered register. Bit `j` of the mask means slot `j+1` flipped.
    pub pattern_weights: Vec<(u32, f64)>,
    /// GHZ-carrier rounds only: marginal flip probability of each slot.
    pub per_slot_flip: Vec<f64>,
}

/// Gates of the sender's upload for one round, in application order.
///
/// GHZ rounds entangle every slot with `C_{A,i}`; parity rounds apply a
/// single `C_{A,1}`, because one CNOT onto a parity pair already adds the
/// control bit to its parity.
pub fn upload_gates(kind: RoundKind, layout: &RegisterLayout) -> Result<Vec<Gate>> {
    let alice = layout.require(Role::Alice)?;
    let n = layout.n_receivers();
    let mut gates = Vec::new();
    match kind {
        RoundKind::GhzCarrier => {
            for i in 1..=n {
                gates.push(Gate::Cnot {
                    control: alice,
                    target: layout.require(Role::Slot(i))?,
                });
            }
        }
        RoundKind::ParityCarrier => {
            gates.push(Gate::Cnot {
                control: alice,
                target: layout.require(Role::Slot(1))?,
            });
        }
    }
    if gates.is_empty() {
        return Err(Error::MissingRole {
            role: "message slots".into(),
        });
    }
    Ok(gates)
}

/// Gates of the receivers' download: each receiver disentangles its slot
/// with `C_{R_i, i}`. The same for both round kinds.
pub fn download_gates(layout: &RegisterLayout) -> Result<Vec<Gate>> {
    let n = layout.n_receivers();
    if n == 0 {
        return Err(Error::MissingRole {
            role: "receivers".into(),
        });
    }
    let mut gates = Vec::new();
    for i in 1..=n {
        gates.push(Gate::Cnot {
            control: layout.require(Role::Receiver(i))?,
            target: layout.require(Role::Slot(i))?,
        });
    }
    Ok(gates)
}

/// The full round word (upload then download) on the standard layout:
/// `Omega_even = C_{C,2} C_{B,1} C_{A,2} C_{A,1}` for two receivers, and
/// `Omega_odd = C_{C,2} C_{B,1} C_{A,1}`, generalized to n receivers.
pub fn omega_gates(kind: RoundKind, n_receivers: usize) -> Vec<Gate> {
    let layout =
        RegisterLayout::for_protocol(n_receivers).expect("standard layout for n >= 2 receivers");
    let mut gates = upload_gates(kind, &layout).expect("standard layout has all roles");
    gates.extend(download_gates(&layout).expect("standard layout has all roles"));
    gates
}

/// Apply a gate list to a dense state.
pub fn apply_gates(rho: &DensityMatrix, circuit: &[Gate]) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    for gate in circuit {
        out = match *gate {
            Gate::Cnot { control, target } => {
                apply_unitary(&out, &gates::cnot(), &[control, target])?
            }
            Gate::H(q) => apply_unitary(&out, &gates::hadamard(), &[q])?,
            Gate::X(q) => apply_unitary(&out, &gates::pauli_x(), &[q])?,
            Gate::Z(q) => apply_unitary(&out, &gates::pauli_z(), &[q])?,
        };
    }
    Ok(out)
}

/// The dense operator of a gate list (gates applied in list order).
pub fn circuit_operator(circuit: &[Gate], n_qubits: usize) -> Result<DMatrix<Complex64>> {
    let dim = 1usize << n_qubits;
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    for gate in circuit {
        let full = match *gate {
            Gate::Cnot { control, target } => {
                crate::dense::embed_unitary(&gates::cnot(), &[control, target], n_qubits)?
            }
            Gate::H(q) => crate::dense::embed_unitary(&gates::hadamard(), &[q], n_qubits)?,
            Gate::X(q) => crate::dense::embed_unitary(&gates::pauli_x(), &[q], n_qubits)?,
            Gate::Z(q) => crate::dense::embed_unitary(&gates::pauli_z(), &[q], n_qubits)?,
        };
        u = full * u;
    }
    Ok(u)
}

/// Alice's upload: entangle the encoded message onto the carrier.
pub fn upload(
    joint: &DensityMatrix,
    kind: RoundKind,
    layout: &RegisterLayout,
) -> Result<DensityMatrix> {
    check_layout_dims(joint, layout)?;
    apply_gates(joint, &upload_gates(kind, layout)?)
}

/// The receivers' download: disentangle the message register.
pub fn download(
    joint: &DensityMatrix,
    _kind: RoundKind,
    layout: &RegisterLayout,
) -> Result<DensityMatrix> {
    check_layout_dims(joint, layout)?;
    apply_gates(joint, &download_gates(layout)?)
}

fn check_layout_dims(joint: &DensityMatrix, layout: &RegisterLayout) -> Result<()> {
    if joint.n_qubits() != layout.n_qubits() {
        return Err(Error::DimensionMismatch {
            left: joint.n_qubits(),
            right: layout.n_qubits(),
        });
    }
    Ok(())
}

/// The joint Hadamard all parties apply to their carrier share at the end
/// of a round. Involutive; toggles the carrier kind.
pub fn hadamard_step(carrier: &DensityMatrix) -> Result<DensityMatrix> {
    let h = gates::hadamard();
    let mut out = carrier.clone();
    for q in 0..carrier.n_qubits() {
        out = apply_unitary(&out, &h, &[q])?;
    }
    Ok(out)
}

/// Encode a single-qubit message for a round of the given kind.
pub fn encode_message(psi: &PureState, kind: RoundKind, n_slots: usize) -> Result<PureState> {
    match kind {
        RoundKind::GhzCarrier => encode_product(psi, n_slots),
        RoundKind::ParityCarrier => encode_parity(psi, n_slots),
    }
}

/// Collaborative decoding of the delivered message register back to one
/// qubit: a CNOT cascade, then the slot that holds the logical qubit.
///
/// GHZ rounds fold onto slot 1 (the cascade clears the other slots);
/// parity rounds fold the register parity into the last slot and leave the
/// others in `|+⟩`, which are traced out.
pub fn collaborate_decode(message: &DensityMatrix, kind: RoundKind) -> Result<DensityMatrix> {
    let n = message.n_qubits();
    let mut cascade = Vec::new();
    let keep = match kind {
        RoundKind::GhzCarrier => {
            if n < 1 {
                return Err(Error::TooFewParties { min: 1, got: n });
            }
            for j in 1..n {
                cascade.push(Gate::Cnot {
                    control: 0,
                    target: j,
                });
            }
            0
        }
        RoundKind::ParityCarrier => {
            if n < 2 {
                return Err(Error::TooFewParties { min: 2, got: n });
            }
            for j in 0..n - 1 {
                cascade.push(Gate::Cnot {
                    control: j,
                    target: n - 1,
                });
            }
            n - 1
        }
    };
    let folded = apply_gates(message, &cascade)?;
    partial_trace(&folded, &[keep])
}

struct Transport {
    carrier_after: DensityMatrix,
    message_register: DensityMatrix,
    delivered: DensityMatrix,
}

fn transport(carrier: &DensityMatrix, message: &PureState, kind: RoundKind) -> Result<Transport> {
    let n_receivers = carrier
        .n_qubits()
        .checked_sub(1)
        .filter(|n| *n >= 2)
        .ok_or(Error::TooFewParties {
            min: 2,
            got: carrier.n_qubits().saturating_sub(1),
        })?;
    let layout = RegisterLayout::for_protocol(n_receivers)?;
    let encoded = encode_message(message, kind, n_receivers)?;
    let joint = tensor(carrier, &encoded.to_density())?;
    let uploaded = upload(&joint, kind, &layout)?;
    let downloaded = download(&uploaded, kind, &layout)?;
    let carrier_after = partial_trace(&downloaded, &layout.carrier_positions())?;
    let message_register = partial_trace(&downloaded, &layout.slot_positions())?;
    let delivered = collaborate_decode(&message_register, kind)?;
    Ok(Transport {
        carrier_after,
        message_register,
        delivered,
    })
}

/// Run one round: encode, upload, download, trace out, decode.
///
/// `carrier_after` in the record is taken before the Hadamard step; the
/// caller (or [`run_protocol`]) applies [`hadamard_step`] between rounds.
pub fn run_round(
    carrier: &DensityMatrix,
    message: &PureState,
    kind: RoundKind,
) -> Result<RoundRecord> {
    let t = transport(carrier, message, kind)?;
    let fidelity_to_sent = fidelity_pure(&t.delivered, message)?;
    Ok(RoundRecord {
        index: 0,
        kind,
        delivered: t.delivered,
        fidelity_to_sent,
        carrier_before: carrier.clone(),
        carrier_after: t.carrier_after,
    })
}

/// The round-0 carrier for a noise spec: the (possibly contaminated) GHZ
/// state on `n_receivers + 1` qubits. Kick noise is reduced to its
/// de-phasing parameter first.
pub fn initial_carrier(noise: &NoiseSpec, n_receivers: usize) -> Result<DensityMatrix> {
    if n_receivers < 2 {
        return Err(Error::TooFewParties {
            min: 2,
            got: n_receivers,
        });
    }
    let m = n_receivers + 1;
    match noise {
        NoiseSpec::None => Ok(ghz_state(m, Sign::Plus)?.to_density()),
        NoiseSpec::Dephasing { p } => dephased_carrier_on(m, *p),
        NoiseSpec::Depolarizing { p } => depolarized_carrier_on(m, *p),
        NoiseSpec::Kicks { samples } => dephased_carrier_on(m, p_from_kicks(samples).p),
    }
}

/// Execute rounds 0..R-1, alternating carrier kinds from the GHZ carrier
/// and interleaving the Hadamard step between rounds.
pub fn run_protocol(config: &ProtocolConfig) -> Result<Vec<RoundRecord>> {
    config.validate()?;
    let mut carrier = initial_carrier(&config.noise, config.n_receivers)?;
    let zero = PureState::basis(1, 0)?;
    let mut records = Vec::with_capacity(config.rounds());
    for (index, input) in config.messages.iter().enumerate() {
        let kind = RoundKind::of_round(index);
        let message = match input {
            RoundInput::Message(psi) => psi,
            RoundInput::Redundant => &zero,
        };
        let mut record = run_round(&carrier, message, kind)?;
        record.index = index;
        carrier = hadamard_step(&record.carrier_after)?;
        records.push(record);
    }
    Ok(records)
}

fn channel_probes() -> [PureState; 4] {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let i_s = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    [
        PureState::basis(1, 0).expect("probe"),
        PureState::basis(1, 1).expect("probe"),
        PureState::qubit(s, s).expect("probe"),
        PureState::qubit(s, i_s).expect("probe"),
    ]
}

/// Pauli-conjugation weights of an arbitrary single-qubit map, extracted by
/// running it on four probe states and assembling the Pauli transfer
/// matrix. Fails with a consistency error when the map is not a Pauli
/// channel within tolerance.
pub fn extract_pauli_channel<F>(mut map: F) -> Result<ChannelEstimate>
where
    F: FnMut(&PureState) -> Result<DensityMatrix>,
{
    let [p0, p1, pp, py] = channel_probes();
    let out0 = map(&p0)?;
    let out1 = map(&p1)?;
    let outp = map(&pp)?;
    let outy = map(&py)?;
    pauli_weights_from_probe_images(
        out0.entries(),
        out1.entries(),
        outp.entries(),
        outy.entries(),
    )
}

/// Weights from the images of the probes `|0⟩, |1⟩, |+⟩, |+i⟩`.
fn pauli_weights_from_probe_images(
    out0: &DMatrix<Complex64>,
    out1: &DMatrix<Complex64>,
    outp: &DMatrix<Complex64>,
    outy: &DMatrix<Complex64>,
) -> Result<ChannelEstimate> {
    // Images of the Pauli operators by linearity.
    let phi_i = out0 + out1;
    let phi_x = outp * Complex64::new(2.0, 0.0) - &phi_i;
    let phi_y = outy * Complex64::new(2.0, 0.0) - &phi_i;
    let phi_z = out0 - out1;
    let images = [phi_i, phi_x, phi_y, phi_z];
    let paulis = [
        gates::identity(),
        gates::pauli_x(),
        gates::pauli_y(),
        gates::pauli_z(),
    ];

    // Pauli transfer matrix R[a][b] = tr(P_a Phi(P_b)) / 2.
    let mut transfer = [[0.0f64; 4]; 4];
    for (a, pauli) in paulis.iter().enumerate() {
        for (b, image) in images.iter().enumerate() {
            let value = (pauli * image).trace() * Complex64::new(0.5, 0.0);
            if value.im.abs() > PROBABILITY_TOL {
                return Err(Error::ChannelConsistency {
                    detail: format!("complex transfer entry ({a},{b}): {value}"),
                });
            }
            transfer[a][b] = value.re;
        }
    }

    for (a, row) in transfer.iter().enumerate() {
        for (b, entry) in row.iter().enumerate() {
            let expected_zero = a != b;
            if expected_zero && entry.abs() > PROBABILITY_TOL {
                return Err(Error::ChannelConsistency {
                    detail: format!("non-Pauli transfer entry ({a},{b}) = {entry:.3e}"),
                });
            }
        }
    }
    if (transfer[0][0] - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::ChannelConsistency {
            detail: format!("trace not preserved: {}", transfer[0][0]),
        });
    }

    let (lx, ly, lz) = (transfer[1][1], transfer[2][2], transfer[3][3]);
    ChannelEstimate::new([
        (1.0 + lx + ly + lz) / 4.0,
        (1.0 + lx - ly - lz) / 4.0,
        (1.0 - lx + ly - lz) / 4.0,
        (1.0 - lx - ly + lz) / 4.0,
    ])
}

/// The complete channel of a round over the given carrier: the
/// codeword-level Pauli weights `(p_I, p_X, p_Y, p_Z)`.
///
/// See [`channel_report`] for the full decomposition.
pub fn complete_channel(carrier: &DensityMatrix, kind: RoundKind) -> Result<ChannelEstimate> {
    channel_report(carrier, kind).map(|r| r.estimate)
}

/// Run the round map over the operator basis by linearity and decompose it:
/// the decoded-qubit Pauli channel, the codeword-corruption weight, and
/// (for GHZ-carrier rounds) the joint X-pattern weights on the slots.
pub fn channel_report(carrier: &DensityMatrix, kind: RoundKind) -> Result<ChannelReport> {
    let n_receivers = carrier
        .n_qubits()
        .checked_sub(1)
        .filter(|n| *n >= 2)
        .ok_or(Error::TooFewParties {
            min: 2,
            got: carrier.n_qubits().saturating_sub(1),
        })?;
    let n = n_receivers;
    let probes = channel_probes();
    let mut delivered = Vec::with_capacity(4);
    let mut registers = Vec::with_capacity(4);
    for probe in &probes {
        let t = transport(carrier, probe, kind)?;
        delivered.push(t.delivered);
        registers.push(t.message_register);
    }

    let decoded = pauli_weights_from_probe_images(
        delivered[0].entries(),
        delivered[1].entries(),
        delivered[2].entries(),
        delivered[3].entries(),
    )?;

    // Reassemble the register map on the matrix units E_ij by linearity.
    let half = Complex64::new(0.5, 0.0);
    let i_half = Complex64::new(0.0, 0.5);
    let reg0 = registers[0].entries();
    let reg1 = registers[1].entries();
    let regp = registers[2].entries();
    let regy = registers[3].entries();
    let sum01 = reg0 + reg1;
    let d01 = regp + regy * Complex64::i() - &sum01 * (half + i_half);
    let d10 = regp - regy * Complex64::i() - &sum01 * (half - i_half);
    let units: [(usize, usize, &DMatrix<Complex64>); 4] =
        [(0, 0, reg0), (1, 1, reg1), (0, 1, &d01), (1, 0, &d10)];

    // Codeword frame vectors: the encodings of |0⟩ and |1⟩.
    let dim = 1usize << n;
    let frame: [DVector<Complex64>; 2] = match kind {
        RoundKind::GhzCarrier => [
            PureState::basis(n, 0)?.amplitudes().clone(),
            PureState::basis(n, dim - 1)?.amplitudes().clone(),
        ],
        RoundKind::ParityCarrier => [
            crate::states::parity_state(n, ParityBit::Zero)?.amplitudes().clone(),
            crate::states::parity_state(n, ParityBit::One)?.amplitudes().clone(),
        ],
    };

    // Weight of the intact-codeword branch, consistent across the four
    // matrix units.
    let mut intact = None;
    for (i, j, d) in &units {
        let value = frame[*i].dotc(&(*d * &frame[*j]));
        if value.im.abs() > PROBABILITY_TOL {
            return Err(Error::ChannelConsistency {
                detail: format!("complex codeword weight on E_{i}{j}: {value}"),
            });
        }
        match intact {
            None => intact = Some(value.re),
            Some(previous) => {
                if (previous - value.re).abs() > PROBABILITY_TOL {
                    return Err(Error::ChannelConsistency {
                        detail: format!(
                            "codeword weight differs across inputs: {previous} vs {}",
                            value.re
                        ),
                    });
                }
            }
        }
    }
    let intact = intact.expect("four units inspected");

    // Joint X-flip patterns are a well-defined frame only for the product
    // code: the pattern states are distinct basis vectors there, while on
    // parity codewords every pattern collapses onto its parity.
    let mut pattern_weights = Vec::new();
    let mut per_slot_flip = Vec::new();
    if kind == RoundKind::GhzCarrier {
        per_slot_flip = vec![0.0; n];
        for index_mask in 0..dim {
            let mut weight = None;
            for (i, j, d) in &units {
                let row = if *i == 0 { 0 } else { dim - 1 } ^ index_mask;
                let col = if *j == 0 { 0 } else { dim - 1 } ^ index_mask;
                let value = d[(row, col)];
                if value.im.abs() > PROBABILITY_TOL {
                    return Err(Error::ChannelConsistency {
                        detail: format!("complex pattern weight at mask {index_mask:b}"),
                    });
                }
                match weight {
                    None => weight = Some(value.re),
                    Some(previous) => {
                        if (previous - value.re).abs() > PROBABILITY_TOL {
                            return Err(Error::ChannelConsistency {
                                detail: format!(
                                    "pattern weight differs across inputs at mask {index_mask:b}"
                                ),
                            });
                        }
                    }
                }
            }
            let weight = weight.expect("four units inspected");
            if weight < -PROBABILITY_TOL {
                return Err(Error::ChannelConsistency {
                    detail: format!("negative pattern weight {weight:.3e}"),
                });
            }
            // Index bit (n-1-j) is slot j+1.
            let mut slot_mask = 0u32;
            for (slot, marginal) in per_slot_flip.iter_mut().enumerate() {
                if index_mask >> (n - 1 - slot) & 1 == 1 {
                    slot_mask |= 1 << slot;
                    *marginal += weight;
                }
            }
            pattern_weights.push((slot_mask, weight));
        }
        pattern_weights.sort_by_key(|(mask, _)| *mask);
        let total: f64 = pattern_weights.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::ChannelConsistency {
                detail: format!("pattern weights sum to {total}"),
            });
        }
    }

    let decoded_weights = decoded.weights();
    let estimate = ChannelEstimate::new([
        intact,
        1.0 - intact - decoded_weights[2] - decoded_weights[3],
        decoded_weights[2],
        decoded_weights[3],
    ])?;

    Ok(ChannelReport {
        kind,
        estimate,
        decoded,
        pattern_weights,
        per_slot_flip,
    })
}

/// Result of one operator-identity check.
#[derive(Clone, Debug)]
pub struct IdentityCheck {
    pub name: String,
    pub deviation: f64,
    pub pass: bool,
}

/// Pass/fail report over the round-word conjugation identities.
#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl std::fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for check in &self.checks {
            writeln!(
                f,
                "{} {} (deviation {:.3e})",
                if check.pass { "ok  " } else { "FAIL" },
                check.name,
                check.deviation
            )?;
        }
        Ok(())
    }
}

/// Max entrywise deviation of the operator identity
/// `omega * word == image * omega`.
pub fn identity_deviation(
    omega: &DMatrix<Complex64>,
    word: &DMatrix<Complex64>,
    image: &DMatrix<Complex64>,
) -> f64 {
    (omega * word - image * omega)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Verify, as exact 32x32 matrix identities, how Pauli words on the carrier
/// commute through the round words for two receivers: X words through
/// `Omega_even` pick up the slot flips of the X table, Z words commute with
/// both round words, and X_A through `Omega_odd` picks up a single slot
/// flip.
pub fn conjugation_identities_check() -> IdentityReport {
    const N: usize = 5;
    let even = circuit_operator(&omega_gates(RoundKind::GhzCarrier, 2), N)
        .expect("fixed 5-qubit circuit");
    let odd = circuit_operator(&omega_gates(RoundKind::ParityCarrier, 2), N)
        .expect("fixed 5-qubit circuit");

    let word = |x_mask: u64, z_mask: u64| {
        PauliWord::new(N, x_mask, z_mask, false)
            .expect("5-qubit word")
            .to_matrix()
    };
    // Carrier positions A, B, C = 0, 1, 2; slots 1, 2 = positions 3, 4.
    let (a, b, c, s1, s2) = (1u64 << 0, 1u64 << 1, 1u64 << 2, 1u64 << 3, 1u64 << 4);

    type Case<'a> = (String, DMatrix<Complex64>, DMatrix<Complex64>, &'a DMatrix<Complex64>);
    let cases: Vec<Case> = vec![
        (
            "omega_even X_A = X_A X_1 X_2 omega_even".into(),
            word(a, 0),
            word(a | s1 | s2, 0),
            &even,
        ),
        (
            "omega_even X_B = X_B X_1 omega_even".into(),
            word(b, 0),
            word(b | s1, 0),
            &even,
        ),
        (
            "omega_even X_C = X_C X_2 omega_even".into(),
            word(c, 0),
            word(c | s2, 0),
            &even,
        ),
        (
            "omega_even X_A Z_A = X_A Z_A X_1 X_2 omega_even".into(),
            word(a, a),
            word(a | s1 | s2, a),
            &even,
        ),
        (
            "omega_even X_B Z_A = X_B Z_A X_1 omega_even".into(),
            word(b, a),
            word(b | s1, a),
            &even,
        ),
        (
            "omega_even X_C Z_A = X_C Z_A X_2 omega_even".into(),
            word(c, a),
            word(c | s2, a),
            &even,
        ),
        (
            "omega_even Z_A = Z_A omega_even".into(),
            word(0, a),
            word(0, a),
            &even,
        ),
        (
            "omega_even Z_B = Z_B omega_even".into(),
            word(0, b),
            word(0, b),
            &even,
        ),
        (
            "omega_even Z_C = Z_C omega_even".into(),
            word(0, c),
            word(0, c),
            &even,
        ),
        (
            "omega_odd Z_A = Z_A omega_odd".into(),
            word(0, a),
            word(0, a),
            &odd,
        ),
        (
            "omega_odd Z_B = Z_B omega_odd".into(),
            word(0, b),
            word(0, b),
            &odd,
        ),
        (
            "omega_odd Z_C = Z_C omega_odd".into(),
            word(0, c),
            word(0, c),
            &odd,
        ),
        (
            "omega_odd X_A = X_A X_1 omega_odd".into(),
            word(a, 0),
            word(a | s1, 0),
            &odd,
        ),
        (
            "omega_odd X_A X_B X_C = X_A X_B X_C X_2 omega_odd".into(),
            word(a | b | c, 0),
            word(a | b | c | s2, 0),
            &odd,
        ),
    ];

    let checks = cases
        .into_iter()
        .map(|(name, w, image, omega)| {
            let deviation = identity_deviation(omega, &w, &image);
            IdentityCheck {
                name,
                deviation,
                pass: deviation <= crate::ALGEBRAIC_TOL,
            }
        })
        .collect();
    IdentityReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{dephased_carrier, depolarized_carrier};
    use crate::states::parity_state;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn max_entry_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        (a.entries() - b.entries())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    fn random_message(rng: &mut impl Rng) -> PureState {
        let v: Vec<Complex64> = (0..2)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        PureState::new(1, v.into_iter().map(|a| a / norm).collect()).unwrap()
    }

    fn clean_carrier(kind: RoundKind, n: usize) -> DensityMatrix {
        let ghz = ghz_state(n + 1, Sign::Plus).unwrap().to_density();
        match kind {
            RoundKind::GhzCarrier => ghz,
            RoundKind::ParityCarrier => hadamard_step(&ghz).unwrap(),
        }
    }

    #[test]
    fn upload_on_ghz_carrier_matches_psi_even() {
        // |GHZ> ⊗ |00> -> (|000 00> + |111 11>)/sqrt2.
        let layout = RegisterLayout::for_protocol(2).unwrap();
        let ghz = ghz_state(3, Sign::Plus).unwrap().to_density();
        let message = PureState::basis(2, 0).unwrap().to_density();
        let joint = tensor(&ghz, &message).unwrap();
        let uploaded = upload(&joint, RoundKind::GhzCarrier, &layout).unwrap();
        assert_abs_diff_eq!(uploaded.entry(0, 0).re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(uploaded.entry(0, 31).re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(uploaded.entry(31, 31).re, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn upload_on_parity_carrier_matches_psi_odd() {
        // |par 0_3> ⊗ |par q_2| -> (|0>|par 0>|par q> + |1>|par 1>|par q̄>)
        // normalized; enumeration over all 32 basis strings.
        for q in [ParityBit::Zero, ParityBit::One] {
            let layout = RegisterLayout::for_protocol(2).unwrap();
            let carrier = parity_state(3, ParityBit::Zero).unwrap().to_density();
            let message = parity_state(2, q).unwrap().to_density();
            let joint = tensor(&carrier, &message).unwrap();
            let uploaded = upload(&joint, RoundKind::ParityCarrier, &layout).unwrap();

            let amp = 1.0 / (2.0 * std::f64::consts::SQRT_2);
            let mut expected = vec![Complex64::ZERO; 32];
            for (idx, entry) in expected.iter_mut().enumerate() {
                let alice = idx >> 4 & 1;
                let bc = idx >> 2 & 0b11;
                let slots = idx & 0b11;
                let bc_parity = (bc.count_ones() % 2) as usize;
                let slot_parity = (slots.count_ones() % 2) as usize;
                let wanted_slot_parity = (q.value() + alice) % 2;
                if bc_parity == alice && slot_parity == wanted_slot_parity {
                    *entry = r(amp);
                }
            }
            let expected = PureState::new(5, expected).unwrap().to_density();
            assert!(max_entry_diff(&uploaded, &expected) < 1e-12);
        }
    }

    #[test]
    fn upload_with_control_in_zero_leaves_state_unchanged() {
        let layout = RegisterLayout::for_protocol(2).unwrap();
        let carrier = PureState::basis(3, 0).unwrap().to_density();
        let message = PureState::basis(2, 0).unwrap().to_density();
        let joint = tensor(&carrier, &message).unwrap();
        let uploaded = upload(&joint, RoundKind::GhzCarrier, &layout).unwrap();
        assert!(max_entry_diff(&uploaded, &joint) < 1e-14);
    }

    #[test]
    fn omega_even_preserves_both_ghz_carriers() {
        let layout = RegisterLayout::for_protocol(2).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let carrier = ghz_state(3, sign).unwrap();
            for q in 0..2usize {
                let message = PureState::basis(2, 3 * q).unwrap(); // |00> or |11>
                let joint =
                    tensor(&carrier.to_density(), &message.to_density()).unwrap();
                let out = download(
                    &upload(&joint, RoundKind::GhzCarrier, &layout).unwrap(),
                    RoundKind::GhzCarrier,
                    &layout,
                )
                .unwrap();
                assert!(max_entry_diff(&out, &joint) < 1e-12);
            }
        }
    }

    #[test]
    fn omega_odd_on_odd_carrier_flips_the_message() {
        // Omega_odd (|par 1_3> ⊗ |par q>) = |par 1_3> ⊗ |par q̄>.
        let layout = RegisterLayout::for_protocol(2).unwrap();
        for q in [ParityBit::Zero, ParityBit::One] {
            let carrier = parity_state(3, ParityBit::One).unwrap().to_density();
            let message = parity_state(2, q).unwrap();
            let joint = tensor(&carrier, &message.to_density()).unwrap();
            let out = download(
                &upload(&joint, RoundKind::ParityCarrier, &layout).unwrap(),
                RoundKind::ParityCarrier,
                &layout,
            )
            .unwrap();
            let flipped = parity_state(2, q.flipped()).unwrap();
            let expected = tensor(&carrier, &flipped.to_density()).unwrap();
            assert!(max_entry_diff(&out, &expected) < 1e-12);
        }
    }

    #[test]
    fn hadamard_step_turns_carriers_into_each_other() {
        let ghz = ghz_state(3, Sign::Plus).unwrap().to_density();
        let even = parity_state(3, ParityBit::Zero).unwrap().to_density();
        let stepped = hadamard_step(&ghz).unwrap();
        assert!(max_entry_diff(&stepped, &even) < 1e-12);

        // Applied twice: the identity map.
        let back = hadamard_step(&stepped).unwrap();
        assert!(max_entry_diff(&back, &ghz) < 1e-12);
    }

    #[test]
    fn hadamard_step_on_dephased_carrier() {
        // (1-p)|GHZ><GHZ| + p|GHZ'><GHZ'| -> (1-p)|par0><par0| + p|par1><par1|.
        let p = 0.3;
        let stepped = hadamard_step(&dephased_carrier(p).unwrap()).unwrap();
        let even = parity_state(3, ParityBit::Zero).unwrap().to_density();
        let odd = parity_state(3, ParityBit::One).unwrap().to_density();
        let expected = DensityMatrix::mixture(&[(1.0 - p, &even), (p, &odd)]).unwrap();
        assert!(max_entry_diff(&stepped, &expected) < 1e-12);
    }

    #[test]
    fn decode_inverts_both_encodings() {
        let psi = PureState::qubit(r(0.6), r(0.8)).unwrap();
        for kind in [RoundKind::GhzCarrier, RoundKind::ParityCarrier] {
            for n in 2..=4usize {
                let encoded = encode_message(&psi, kind, n).unwrap().to_density();
                let decoded = collaborate_decode(&encoded, kind).unwrap();
                assert!(
                    max_entry_diff(&decoded, &psi.to_density()) < 1e-12,
                    "{kind:?} n={n}"
                );
            }
        }
    }

    #[test]
    fn single_slot_flip_decodes_to_flipped_qubit_in_parity_rounds() {
        // X on one slot flips the parity, so the cascade delivers X|psi>;
        // X on both slots preserves parity and decodes to |psi| unchanged.
        let psi = PureState::qubit(r(0.6), r(0.8)).unwrap();
        let encoded = encode_parity(&psi, 2).unwrap().to_density();
        let x = gates::pauli_x();
        let flipped_psi = apply_unitary(&psi.to_density(), &x, &[0]).unwrap();

        for slot in 0..2usize {
            let corrupted = apply_unitary(&encoded, &x, &[slot]).unwrap();
            let decoded = collaborate_decode(&corrupted, RoundKind::ParityCarrier).unwrap();
            assert!(max_entry_diff(&decoded, &flipped_psi) < 1e-12);
        }

        let both = apply_unitary(&apply_unitary(&encoded, &x, &[0]).unwrap(), &x, &[1]).unwrap();
        let decoded = collaborate_decode(&both, RoundKind::ParityCarrier).unwrap();
        assert!(max_entry_diff(&decoded, &psi.to_density()) < 1e-12);
    }

    #[test]
    fn noiseless_round_is_the_identity_channel() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for kind in [RoundKind::GhzCarrier, RoundKind::ParityCarrier] {
            let carrier = clean_carrier(kind, 2);
            for _ in 0..50 {
                let message = random_message(&mut rng);
                let record = run_round(&carrier, &message, kind).unwrap();
                assert!((record.fidelity_to_sent - 1.0).abs() < 1e-12);
                assert!(max_entry_diff(&record.carrier_after, &carrier) < 1e-12);
            }
        }
    }

    #[test]
    fn dephasing_is_harmless_in_ghz_rounds() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for p in [0.1, 0.3, 0.5] {
            let carrier = dephased_carrier(p).unwrap();
            for _ in 0..5 {
                let message = random_message(&mut rng);
                let record = run_round(&carrier, &message, RoundKind::GhzCarrier).unwrap();
                assert!((record.fidelity_to_sent - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dephasing_parity_round_delivers_bit_flip_mixture() {
        let p = 0.25;
        let carrier = hadamard_step(&dephased_carrier(p).unwrap()).unwrap();
        let psi = PureState::qubit(r(0.6), r(0.8)).unwrap();
        let record = run_round(&carrier, &psi, RoundKind::ParityCarrier).unwrap();

        let rho = psi.to_density();
        let flipped = apply_unitary(&rho, &gates::pauli_x(), &[0]).unwrap();
        let expected = DensityMatrix::mixture(&[(1.0 - p, &rho), (p, &flipped)]).unwrap();
        assert!(max_entry_diff(&record.delivered, &expected) < 1e-12);
    }

    #[test]
    fn ghz_round_slots_are_independently_readable() {
        // Each receiver's slot marginal carries the basis bit on its own in
        // GHZ rounds; in parity rounds each slot alone is maximally mixed.
        for q in 0..2usize {
            let message = PureState::basis(1, q).unwrap();
            let carrier = clean_carrier(RoundKind::GhzCarrier, 2);
            let t = transport(&carrier, &message, RoundKind::GhzCarrier).unwrap();
            for slot in 0..2usize {
                let marginal = partial_trace(&t.message_register, &[slot]).unwrap();
                assert_abs_diff_eq!(marginal.entry(q, q).re, 1.0, epsilon = 1e-12);
            }

            let carrier = clean_carrier(RoundKind::ParityCarrier, 2);
            let t = transport(&carrier, &message, RoundKind::ParityCarrier).unwrap();
            for slot in 0..2usize {
                let marginal = partial_trace(&t.message_register, &[slot]).unwrap();
                let mixed = DensityMatrix::maximally_mixed(1).unwrap();
                assert!(max_entry_diff(&marginal, &mixed) < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_protocol_has_period_two_carriers() {
        let psi = PureState::qubit(r(0.6), r(0.8)).unwrap();
        let config = ProtocolConfig::repeated(2, NoiseSpec::None, psi, 4, 0);
        let records = run_protocol(&config).unwrap();
        assert_eq!(records.len(), 4);
        for record in &records {
            assert!((record.fidelity_to_sent - 1.0).abs() < 1e-12);
        }
        for k in 0..2 {
            assert!(
                max_entry_diff(&records[k].carrier_before, &records[k + 2].carrier_before)
                    < 1e-12
            );
        }
    }

    #[test]
    fn dephasing_parity_fidelities_are_constant_across_rounds() {
        let p = 0.2;
        let psi = PureState::qubit(r(0.6), r(0.8)).unwrap();
        let config =
            ProtocolConfig::repeated(2, NoiseSpec::Dephasing { p }, psi.clone(), 10, 0);
        let records = run_protocol(&config).unwrap();

        // F(psi, (1-p) psi + p X psi X) = (1-p) + p |<psi|X|psi>|^2.
        let x_expectation = 2.0 * 0.6 * 0.8;
        let expected = (1.0 - p) + p * x_expectation * x_expectation;
        for record in records {
            match record.kind {
                RoundKind::GhzCarrier => {
                    assert!((record.fidelity_to_sent - 1.0).abs() < 1e-12)
                }
                RoundKind::ParityCarrier => {
                    assert_abs_diff_eq!(record.fidelity_to_sent, expected, epsilon = 1e-12)
                }
            }
        }
    }

    #[test]
    fn depolarizing_ghz_round_carriers_stay_at_the_noisy_form() {
        let p = 0.4;
        let psi = PureState::qubit(r(0.6), r(0.8)).unwrap();
        let config =
            ProtocolConfig::repeated(2, NoiseSpec::Depolarizing { p }, psi, 10, 0);
        let records = run_protocol(&config).unwrap();
        let reference = depolarized_carrier(p).unwrap();
        for record in records.iter().filter(|r| r.kind == RoundKind::GhzCarrier) {
            assert!(max_entry_diff(&record.carrier_before, &reference) < 1e-10);
        }
    }

    #[test]
    fn carrier_reuse_is_period_two_for_both_noise_families() {
        let psi = PureState::qubit(r(0.6), r(0.8)).unwrap();
        for p in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
            for noise in [NoiseSpec::Dephasing { p }, NoiseSpec::Depolarizing { p }] {
                let config = ProtocolConfig::repeated(2, noise, psi.clone(), 8, 0);
                let records = run_protocol(&config).unwrap();
                for k in 0..records.len() - 2 {
                    let d = crate::dense::trace_distance(
                        &records[k].carrier_before,
                        &records[k + 2].carrier_before,
                    )
                    .unwrap();
                    assert!(d < 1e-10, "p={p} round {k}: {d}");
                }
            }
        }
    }

    #[test]
    fn complete_channel_dephasing() {
        for p in [0.1, 0.3, 0.5] {
            let carrier = dephased_carrier(p).unwrap();
            let even = complete_channel(&carrier, RoundKind::GhzCarrier).unwrap();
            let expected = [1.0, 0.0, 0.0, 0.0];
            for (got, want) in even.weights().iter().zip(expected) {
                assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
            }

            let odd_carrier = hadamard_step(&carrier).unwrap();
            let odd = complete_channel(&odd_carrier, RoundKind::ParityCarrier).unwrap();
            let expected = [1.0 - p, p, 0.0, 0.0];
            for (got, want) in odd.weights().iter().zip(expected) {
                assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn complete_channel_depolarizing() {
        for p in [0.1, 0.2, 0.4] {
            let carrier = depolarized_carrier(p).unwrap();
            let even = complete_channel(&carrier, RoundKind::GhzCarrier).unwrap();
            let expected = [1.0 - 0.75 * p, 0.75 * p, 0.0, 0.0];
            for (got, want) in even.weights().iter().zip(expected) {
                assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
            }

            let odd_carrier = hadamard_step(&carrier).unwrap();
            let odd = complete_channel(&odd_carrier, RoundKind::ParityCarrier).unwrap();
            let expected = [1.0 - 0.5 * p, 0.5 * p, 0.0, 0.0];
            for (got, want) in odd.weights().iter().zip(expected) {
                assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn depolarizing_ghz_round_pattern_decomposition() {
        // Joint pattern weights: intact 1-3p/4; each single flip and the
        // double flip carry p/4. The decoded qubit only sees p/2 because
        // the pattern X_2 leaves slot 1 intact, and the slot marginals are
        // p/2 each.
        let p = 0.4;
        let report =
            channel_report(&depolarized_carrier(p).unwrap(), RoundKind::GhzCarrier).unwrap();
        let by_mask: std::collections::BTreeMap<u32, f64> =
            report.pattern_weights.iter().cloned().collect();
        assert_abs_diff_eq!(by_mask[&0b00], 1.0 - 0.75 * p, epsilon = 1e-12);
        assert_abs_diff_eq!(by_mask[&0b01], 0.25 * p, epsilon = 1e-12);
        assert_abs_diff_eq!(by_mask[&0b10], 0.25 * p, epsilon = 1e-12);
        assert_abs_diff_eq!(by_mask[&0b11], 0.25 * p, epsilon = 1e-12);

        for slot_rate in &report.per_slot_flip {
            assert_abs_diff_eq!(*slot_rate, 0.5 * p, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(report.decoded.p_x(), 0.5 * p, epsilon = 1e-10);
        assert_abs_diff_eq!(report.estimate.p_x(), 0.75 * p, epsilon = 1e-10);
    }

    #[test]
    fn decoded_channel_predicts_run_round_output() {
        // Channel weights are independent of the message used to
        // cross-check: applying the extracted decoded channel to random
        // states reproduces the actual round output.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for (noise_carrier, kind) in [
            (dephased_carrier(0.3).unwrap(), RoundKind::GhzCarrier),
            (
                hadamard_step(&dephased_carrier(0.3).unwrap()).unwrap(),
                RoundKind::ParityCarrier,
            ),
            (depolarized_carrier(0.25).unwrap(), RoundKind::GhzCarrier),
            (
                hadamard_step(&depolarized_carrier(0.25).unwrap()).unwrap(),
                RoundKind::ParityCarrier,
            ),
        ] {
            let report = channel_report(&noise_carrier, kind).unwrap();
            for _ in 0..5 {
                let message = random_message(&mut rng);
                let record = run_round(&noise_carrier, &message, kind).unwrap();
                let predicted = report.decoded.apply(&message.to_density()).unwrap();
                assert!(max_entry_diff(&record.delivered, &predicted) < 1e-10);
            }
        }
    }

    #[test]
    fn bit_flip_average_fidelity_matches_the_closed_form() {
        // Average fidelity of a bit-flip channel of weight q over
        // Haar-random states is 1 - 2q/3. Oracle: Monte Carlo average of
        // <psi|Phi(psi)|psi> over Gaussian-sampled (Haar) states, compared
        // within three standard errors of the sample mean.
        let q = 0.3;
        let channel = ChannelEstimate::new([1.0 - q, q, 0.0, 0.0]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(64);
        let mut gaussian = || loop {
            let u1: f64 = rng.gen();
            let u2: f64 = rng.gen();
            if u1 > 1e-300 {
                let radius = (-2.0 * u1.ln()).sqrt();
                break Complex64::new(
                    radius * (2.0 * std::f64::consts::PI * u2).cos(),
                    radius * (2.0 * std::f64::consts::PI * u2).sin(),
                );
            }
        };

        let trials = 20_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..trials {
            let v = [gaussian(), gaussian()];
            let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
            let psi = PureState::new(1, v.iter().map(|a| a / norm).collect()).unwrap();
            let fidelity =
                fidelity_pure(&channel.apply(&psi.to_density()).unwrap(), &psi).unwrap();
            sum += fidelity;
            sum_sq += fidelity * fidelity;
        }
        let mean = sum / trials as f64;
        let variance = (sum_sq / trials as f64 - mean * mean).max(0.0);
        let std_error = (variance / trials as f64).sqrt();
        let expected = 1.0 - 2.0 * q / 3.0;
        assert!(
            (mean - expected).abs() < 3.0 * std_error,
            "mean {mean} vs {expected} (3se {})",
            3.0 * std_error
        );
    }

    #[test]
    fn complete_channel_on_clean_carrier_is_identity() {
        for kind in [RoundKind::GhzCarrier, RoundKind::ParityCarrier] {
            let carrier = clean_carrier(kind, 2);
            let estimate = complete_channel(&carrier, kind).unwrap();
            assert_abs_diff_eq!(estimate.p_i(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn n_party_generalization_holds() {
        let psi = PureState::qubit(r(0.6), r(0.8)).unwrap();
        for n in [3usize, 4] {
            // Noiseless identity channel for both kinds.
            for kind in [RoundKind::GhzCarrier, RoundKind::ParityCarrier] {
                let carrier = clean_carrier(kind, n);
                let record = run_round(&carrier, &psi, kind).unwrap();
                assert!((record.fidelity_to_sent - 1.0).abs() < 1e-12, "n={n}");
            }
            // Period-2 carrier invariance under noise.
            for noise in [
                NoiseSpec::Dephasing { p: 0.3 },
                NoiseSpec::Depolarizing { p: 0.3 },
            ] {
                let config = ProtocolConfig::repeated(n, noise, psi.clone(), 6, 0);
                let records = run_protocol(&config).unwrap();
                for k in 0..records.len() - 2 {
                    let d = crate::dense::trace_distance(
                        &records[k].carrier_before,
                        &records[k + 2].carrier_before,
                    )
                    .unwrap();
                    assert!(d < 1e-10, "n={n} round {k}: {d}");
                }
            }
        }
    }

    #[test]
    fn redundant_rounds_send_the_zero_state() {
        let psi = PureState::qubit(r(0.6), r(0.8)).unwrap();
        let config = ProtocolConfig {
            n_receivers: 2,
            noise: NoiseSpec::None,
            messages: vec![RoundInput::Redundant, RoundInput::Message(psi)],
            seed: 0,
        };
        let records = run_protocol(&config).unwrap();
        assert_abs_diff_eq!(records[0].delivered.entry(0, 0).re, 1.0, epsilon = 1e-12);
        assert!((records[1].fidelity_to_sent - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let psi = PureState::qubit(r(0.6), r(0.8)).unwrap();
        let too_few = ProtocolConfig::repeated(1, NoiseSpec::None, psi.clone(), 1, 0);
        assert!(matches!(
            run_protocol(&too_few),
            Err(Error::TooFewParties { .. })
        ));
        let too_big = ProtocolConfig::repeated(7, NoiseSpec::None, psi.clone(), 1, 0);
        assert!(matches!(
            run_protocol(&too_big),
            Err(Error::RegisterCap { .. })
        ));
        let bad_message = ProtocolConfig {
            n_receivers: 2,
            noise: NoiseSpec::None,
            messages: vec![RoundInput::Message(
                PureState::basis(2, 0).unwrap(),
            )],
            seed: 0,
        };
        assert!(matches!(
            run_protocol(&bad_message),
            Err(Error::BadConfig { .. })
        ));
    }

    #[test]
    fn upload_requires_protocol_roles() {
        let layout = RegisterLayout::new(vec![Role::Receiver(1), Role::Slot(1)]).unwrap();
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(matches!(
            upload(&rho, RoundKind::GhzCarrier, &layout),
            Err(Error::MissingRole { .. })
        ));
    }

    #[test]
    fn all_conjugation_identities_pass() {
        let report = conjugation_identities_check();
        assert_eq!(report.checks.len(), 14);
        for check in &report.checks {
            assert!(
                check.pass,
                "{} deviates by {:.3e}",
                check.name, check.deviation
            );
        }
        assert!(report.all_pass());
    }

    #[test]
    fn deliberately_false_identity_fails() {
        // Omega_odd X_A != X_A Omega_odd: the upload CNOT pushes the flip
        // onto slot 1.
        let odd = circuit_operator(&omega_gates(RoundKind::ParityCarrier, 2), 5).unwrap();
        let x_a = PauliWord::single_x(5, 0).unwrap().to_matrix();
        let deviation = identity_deviation(&odd, &x_a, &x_a);
        assert!(deviation > 0.1);

        // Controls commute with Z: Omega_even Z_A = Z_A Omega_even.
        let even = circuit_operator(&omega_gates(RoundKind::GhzCarrier, 2), 5).unwrap();
        let z_a = PauliWord::single_z(5, 0).unwrap().to_matrix();
        assert!(identity_deviation(&even, &z_a, &z_a) < 1e-12);
    }
}
