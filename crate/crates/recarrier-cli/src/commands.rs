//! The five subcommands: simulate, channel, sweep, ecc, check.

use std::io::Write;

use num_complex::Complex64;

use recarrier::dense::{trace_distance, DensityMatrix, PureState};
use recarrier::ecc::transmit_encoded;
use recarrier::noise::{as_pauli_mixture, p_from_kicks, NoiseSpec};
use recarrier::pauliframe::estimate_flip_rates;
use recarrier::protocol::{
    complete_channel, conjugation_identities_check, extract_pauli_channel, hadamard_step,
    initial_carrier, run_protocol, run_round, ChannelEstimate, ProtocolConfig, RoundKind,
};
use recarrier::states::ghz_octet;

use crate::config::ExperimentConfig;
use crate::output::{Cell, Table};
use crate::CliError;

/// The default message state sent in every round: 0.6|0> + 0.8|1>.
fn default_message() -> PureState {
    PureState::qubit(Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0))
        .expect("hardcoded state is normalized")
}

fn kind_cell(kind: RoundKind) -> Cell {
    Cell::Text(kind.label())
}

/// Noise strength to report: the reduced de-phasing parameter for kick
/// noise, the configured p otherwise (0 for no noise).
fn effective_p(spec: &NoiseSpec) -> f64 {
    match spec {
        NoiseSpec::None => 0.0,
        NoiseSpec::Dephasing { p } | NoiseSpec::Depolarizing { p } => *p,
        NoiseSpec::Kicks { samples } => p_from_kicks(samples).p,
    }
}

/// Round-start carrier of the given kind for a noise spec.
fn carrier_of_kind(
    spec: &NoiseSpec,
    kind: RoundKind,
    n_receivers: usize,
) -> Result<DensityMatrix, CliError> {
    let ghz_form = initial_carrier(spec, n_receivers).map_err(CliError::from_library)?;
    match kind {
        RoundKind::GhzCarrier => Ok(ghz_form),
        RoundKind::ParityCarrier => hadamard_step(&ghz_form).map_err(CliError::from_library),
    }
}

/// The mixture the frame engine samples from: kick noise is reduced to its
/// de-phasing parameter first.
fn mixture_for(spec: &NoiseSpec, n_receivers: usize) -> Result<recarrier::noise::PauliMixture, CliError> {
    let reduced = match spec {
        NoiseSpec::Kicks { samples } => NoiseSpec::Dephasing {
            p: p_from_kicks(samples).p,
        },
        other => other.clone(),
    };
    recarrier::noise::as_pauli_mixture_on(&reduced, n_receivers + 1).map_err(CliError::from_library)
}

/// One row per executed round: index, kind, delivered fidelity, and the
/// trace distance of the round-start carrier to the first carrier of the
/// same kind.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = cfg.noise_spec()?;
    let protocol = ProtocolConfig::repeated(
        cfg.receivers,
        spec,
        default_message(),
        cfg.rounds,
        cfg.seed,
    );
    let records = run_protocol(&protocol).map_err(CliError::from_library)?;

    let mut references: [Option<&DensityMatrix>; 2] = [None, None];
    let mut table = Table::new(vec!["round", "kind", "fidelity", "carrier_distance"]);
    for record in &records {
        let slot = record.index % 2;
        let reference = references[slot].get_or_insert(&record.carrier_before);
        let distance = trace_distance(reference, &record.carrier_before)
            .map_err(CliError::from_library)?;
        table.push(vec![
            Cell::Int(record.index as u64),
            kind_cell(record.kind),
            Cell::Float(record.fidelity_to_sent),
            Cell::Float(distance),
        ]);
    }
    table.write(cfg.format, out)
}

fn push_channel_rows(
    table: &mut Table,
    cfg: &ExperimentConfig,
    spec: &NoiseSpec,
    p_shown: f64,
    with_avg_fidelity: bool,
) -> Result<(), CliError> {
    for kind in [RoundKind::GhzCarrier, RoundKind::ParityCarrier] {
        if cfg.engine.wants_dense() {
            let carrier = carrier_of_kind(spec, kind, cfg.receivers)?;
            let estimate =
                complete_channel(&carrier, kind).map_err(CliError::from_library)?;
            push_weight_row(table, cfg, p_shown, kind, &estimate, None, "dense", with_avg_fidelity);
        }
        if cfg.engine.wants_pauliframe() {
            let mixture = mixture_for(spec, cfg.receivers)?;
            let rates = estimate_flip_rates(&mixture, kind, cfg.trials, cfg.seed)
                .map_err(CliError::from_library)?;
            let estimate = ChannelEstimate::new([1.0 - rates.rate, rates.rate, 0.0, 0.0])
                .map_err(CliError::from_library)?;
            push_weight_row(
                table,
                cfg,
                p_shown,
                kind,
                &estimate,
                Some(rates.std_error),
                "pauliframe",
                with_avg_fidelity,
            );
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn push_weight_row(
    table: &mut Table,
    cfg: &ExperimentConfig,
    p_shown: f64,
    kind: RoundKind,
    estimate: &ChannelEstimate,
    std_error: Option<f64>,
    engine: &'static str,
    with_avg_fidelity: bool,
) {
    let w = estimate.weights();
    let mut row = Vec::new();
    if !with_avg_fidelity {
        row.push(Cell::Text(cfg.noise.label()));
    }
    row.extend([
        Cell::Float(p_shown),
        kind_cell(kind),
        Cell::Float(w[0]),
        Cell::Float(w[1]),
        Cell::Float(w[2]),
        Cell::Float(w[3]),
    ]);
    if with_avg_fidelity {
        // Average fidelity of a bit-flip channel over the Bloch sphere.
        row.push(Cell::Float(1.0 - 2.0 * w[1] / 3.0));
    }
    row.push(Cell::Text(engine));
    row.push(match std_error {
        Some(se) => Cell::Float(se),
        None => Cell::Empty,
    });
    table.push(row);
}

/// Complete-channel Pauli weights for both round kinds at the configured
/// noise strength.
pub fn cmd_channel(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = cfg.noise_spec()?;
    let p_shown = effective_p(&spec);
    let mut table = Table::new(vec![
        "noise", "p", "kind", "p_i", "p_x", "p_y", "p_z", "engine", "std_error",
    ]);
    push_channel_rows(&mut table, cfg, &spec, p_shown, false)?;
    table.write(cfg.format, out)
}

/// Channel weights over a grid of noise strengths, with the average
/// fidelity column `1 - 2 p_X / 3`.
pub fn cmd_sweep(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let mut table = Table::new(vec![
        "p",
        "kind",
        "p_i",
        "p_x",
        "p_y",
        "p_z",
        "avg_fidelity",
        "engine",
        "std_error",
    ]);
    for p in cfg.grid.values() {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::config(format!("grid value {p} outside [0, 1]")));
        }
        let spec = cfg.noise_spec_at(p)?;
        push_channel_rows(&mut table, cfg, &spec, p, true)?;
    }
    table.write(cfg.format, out)
}

/// Logical error rate of one encoded transmission over a grid of physical
/// flip probabilities. The rate is measured from the dense induced channel
/// (it equals 3q^2 - 2q^3).
pub fn cmd_ecc(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let mut table = Table::new(vec!["q", "logical_rate", "suppression_factor"]);
    for q in cfg.grid.values() {
        if !(0.0..=1.0).contains(&q) {
            return Err(CliError::config(format!("grid value {q} outside [0, 1]")));
        }
        let estimate = extract_pauli_channel(|probe| transmit_encoded(probe, q))
            .map_err(CliError::from_library)?;
        let rate = estimate.p_x();
        table.push(vec![
            Cell::Float(q),
            Cell::Float(rate),
            if q > 0.0 {
                Cell::Float(rate / q)
            } else {
                Cell::Empty
            },
        ]);
    }
    table.write(cfg.format, out)
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Self-check runner: the conjugation identities plus the library's main
/// invariants. Prints one ok/FAIL line per check; any failure exits with
/// the internal-consistency status.
pub fn cmd_check(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<bool, CliError> {
    let mut checks: Vec<Check> = Vec::new();
    let message = default_message();

    let report = conjugation_identities_check();
    let worst = report
        .checks
        .iter()
        .map(|c| c.deviation)
        .fold(0.0f64, f64::max);
    checks.push(Check {
        name: "conjugation identities (14 operator equalities)",
        pass: report.all_pass(),
        detail: format!("max deviation {worst:.3e}"),
    });

    {
        let mut pass = true;
        let mut worst_note = String::from("all grids valid");
        for p in [0.0, 0.25, 0.5, 1.0] {
            for spec in [NoiseSpec::Dephasing { p }, NoiseSpec::Depolarizing { p }] {
                let carrier =
                    initial_carrier(&spec, 2).and_then(|c| c.validate().map(|_| c));
                if let Err(e) = carrier {
                    pass = false;
                    worst_note = format!("{} p={p}: {e}", spec.label());
                }
            }
        }
        checks.push(Check {
            name: "noisy carriers validate (Hermitian, trace 1, positive)",
            pass,
            detail: worst_note,
        });
    }

    {
        let mut worst: f64 = 0.0;
        for p in [0.0, 0.1, 0.25, 0.5] {
            for spec in [NoiseSpec::Dephasing { p }, NoiseSpec::Depolarizing { p }] {
                let direct = initial_carrier(&spec, 2).map_err(CliError::from_library)?;
                let rebuilt = as_pauli_mixture(&spec)
                    .and_then(|m| {
                        m.reconstruct_on(
                            &recarrier::states::ghz_state(3, recarrier::states::Sign::Plus)?
                                .to_density(),
                        )
                    })
                    .map_err(CliError::from_library)?;
                let dev = (direct.entries() - rebuilt.entries())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                worst = worst.max(dev);
            }
        }
        checks.push(Check {
            name: "pauli mixtures rebuild the dense carriers",
            pass: worst < 1e-12,
            detail: format!("max deviation {worst:.3e}"),
        });
    }

    {
        let mut worst: f64 = 0.0;
        for n in [2usize, 3] {
            let ghz = recarrier::states::ghz_state(n + 1, recarrier::states::Sign::Plus)
                .map_err(CliError::from_library)?
                .to_density();
            let even = recarrier::states::parity_state(
                n + 1,
                recarrier::states::ParityBit::Zero,
            )
            .map_err(CliError::from_library)?
            .to_density();
            let stepped = hadamard_step(&ghz).map_err(CliError::from_library)?;
            let dev = (stepped.entries() - even.entries())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            worst = worst.max(dev);
        }
        checks.push(Check {
            name: "joint Hadamard alternates the two carrier forms",
            pass: worst < 1e-12,
            detail: format!("max deviation {worst:.3e}"),
        });
    }

    {
        let mut worst: f64 = 0.0;
        for spec in [
            NoiseSpec::Dephasing { p: 0.3 },
            NoiseSpec::Depolarizing { p: 0.3 },
        ] {
            let protocol = ProtocolConfig::repeated(2, spec, message.clone(), 20, cfg.seed);
            let records = run_protocol(&protocol).map_err(CliError::from_library)?;
            for k in 0..records.len() - 2 {
                let d = trace_distance(
                    &records[k].carrier_before,
                    &records[k + 2].carrier_before,
                )
                .map_err(CliError::from_library)?;
                worst = worst.max(d);
            }
        }
        checks.push(Check {
            name: "carrier reuse is period-2 over 20 rounds (p = 0.3)",
            pass: worst < 1e-10,
            detail: format!("max same-kind distance {worst:.3e}"),
        });
    }

    {
        let mut worst: f64 = 0.0;
        for kind in [RoundKind::GhzCarrier, RoundKind::ParityCarrier] {
            let carrier = carrier_of_kind(&NoiseSpec::None, kind, 2)?;
            let record =
                run_round(&carrier, &message, kind).map_err(CliError::from_library)?;
            worst = worst.max((record.fidelity_to_sent - 1.0).abs());
        }
        checks.push(Check {
            name: "noiseless rounds are the identity channel",
            pass: worst < 1e-12,
            detail: format!("max fidelity deviation {worst:.3e}"),
        });
    }

    {
        let p = 0.2;
        let mut worst: f64 = 0.0;
        let cases: [(NoiseSpec, RoundKind, f64); 3] = [
            (NoiseSpec::Dephasing { p }, RoundKind::ParityCarrier, p),
            (NoiseSpec::Depolarizing { p }, RoundKind::GhzCarrier, 0.75 * p),
            (NoiseSpec::Depolarizing { p }, RoundKind::ParityCarrier, 0.5 * p),
        ];
        for (spec, kind, expected) in cases {
            let carrier = carrier_of_kind(&spec, kind, 2)?;
            let estimate = complete_channel(&carrier, kind).map_err(CliError::from_library)?;
            worst = worst.max((estimate.p_x() - expected).abs());
        }
        checks.push(Check {
            name: "channel weights match the closed forms at p = 0.2",
            pass: worst < 1e-10,
            detail: format!("max deviation {worst:.3e}"),
        });
    }

    {
        let octet = ghz_octet();
        let mut worst: f64 = 0.0;
        for (i, (_, a)) in octet.iter().enumerate() {
            for (j, (_, b)) in octet.iter().enumerate() {
                let g = a.inner(b).map_err(CliError::from_library)?;
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - Complex64::new(expected, 0.0)).norm());
            }
        }
        checks.push(Check {
            name: "GHZ octet is orthonormal",
            pass: worst < 1e-12,
            detail: format!("max Gram deviation {worst:.3e}"),
        });
    }

    {
        let p = 0.2;
        let trials = cfg.trials.max(1);
        let mut pass = true;
        let mut detail = String::new();
        for kind in [RoundKind::GhzCarrier, RoundKind::ParityCarrier] {
            let spec = NoiseSpec::Depolarizing { p };
            let carrier = carrier_of_kind(&spec, kind, 2)?;
            let dense_px = complete_channel(&carrier, kind)
                .map_err(CliError::from_library)?
                .p_x();
            let mixture = mixture_for(&spec, 2)?;
            let estimate = estimate_flip_rates(&mixture, kind, trials, cfg.seed)
                .map_err(CliError::from_library)?;
            let gap = (estimate.rate - dense_px).abs();
            let bound = 3.0 * estimate.std_error;
            if gap > bound {
                pass = false;
            }
            detail = format!("{detail}{} gap {gap:.2e} (3se {bound:.2e}); ", kind.label());
        }
        checks.push(Check {
            name: "monte carlo flip rates agree with the dense channel",
            pass,
            detail: detail.trim_end_matches([' ', ';']).to_string(),
        });
    }

    let mut all_pass = true;
    for check in &checks {
        all_pass &= check.pass;
        writeln!(
            out,
            "{} {} ({})",
            if check.pass { "ok  " } else { "FAIL" },
            check.name,
            check.detail
        )
        .map_err(CliError::io)?;
    }
    writeln!(
        out,
        "{}",
        if all_pass {
            "all checks passed".to_string()
        } else {
            let failed = checks.iter().filter(|c| !c.pass).count();
            format!("{failed} check(s) failed")
        }
    )
    .map_err(CliError::io)?;
    Ok(all_pass)
}
