//! Noisy carrier construction for the two noise families, and the
//! phase-kick integral that reduces an arbitrary symmetric kick distribution
//! to the de-phasing parameter `p`.
//!
//! De-phasing maps the GHZ carrier to `(1-p)|GHZ⟩⟨GHZ| + p|GHZ'⟩⟨GHZ'|`;
//! for `p <= 1/2` this equals the equivalent form
//! `(1-2p)|GHZ⟩⟨GHZ| + p|0..0⟩⟨0..0| + p|1..1⟩⟨1..1|`. The library stores
//! the mixture form, which is a proper mixture for all `p <= 1`.
//!
//! Global depolarizing mixes the carrier with the maximally mixed state:
//! `(1-p)|G_0⟩⟨G_0| + (p/2^m) I` on `m` carrier qubits.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dense::DensityMatrix;
use crate::error::{Error, Result};
use crate::pauliframe::PauliWord;
use crate::states::{ghz_state, Sign};
use crate::PROBABILITY_TOL;

/// Tagged description of how the carrier was contaminated before the
/// protocol starts.
#[derive(Clone, Debug)]
pub enum NoiseSpec {
    /// Pristine carrier.
    None,
    /// De-phasing with mixture weight `p` on the primed carrier.
    Dephasing { p: f64 },
    /// Global depolarizing with weight `p` on the maximally mixed state.
    Depolarizing { p: f64 },
    /// Random phase kicks described by a weighted sample set; reduced to a
    /// de-phasing parameter through [`p_from_kicks`].
    Kicks { samples: KickSamples },
}

impl NoiseSpec {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseSpec::None => "none",
            NoiseSpec::Dephasing { .. } => "dephasing",
            NoiseSpec::Depolarizing { .. } => "depolarizing",
            NoiseSpec::Kicks { .. } => "kicks",
        }
    }
}

/// Weighted sample set of phase-kick angle triples `(theta1, theta2,
/// theta3)` in radians. An empirical measure: integration is summation.
#[derive(Clone, Debug)]
pub struct KickSamples {
    angles: Vec<[f64; 3]>,
    weights: Option<Vec<f64>>,
}

impl KickSamples {
    /// Equal-weight samples.
    pub fn uniform(angles: Vec<[f64; 3]>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::EmptyKickSet);
        }
        Ok(Self {
            angles,
            weights: None,
        })
    }

    /// Explicitly weighted samples. Weights must be nonnegative and sum to 1
    /// within the probability tolerance.
    pub fn weighted(angles: Vec<[f64; 3]>, weights: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::EmptyKickSet);
        }
        if weights.len() != angles.len() {
            return Err(Error::InvalidKickWeights {
                reason: format!(
                    "{} weights for {} samples",
                    weights.len(),
                    angles.len()
                ),
            });
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0) {
            return Err(Error::InvalidKickWeights {
                reason: format!("negative weight {w}"),
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::InvalidKickWeights {
                reason: format!("weights sum to {total}, expected 1"),
            });
        }
        Ok(Self {
            angles,
            weights: Some(weights),
        })
    }

    /// Load from a columnar text file: a header line, then rows of three
    /// radian columns plus an optional weight column.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::KickFile {
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::from_str_table(&text)
    }

    /// Parse the columnar text format; see [`from_path`].
    ///
    /// [`from_path`]: KickSamples::from_path
    pub fn from_str_table(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::KickFile {
            reason: "empty file".into(),
        })?;
        if parse_row(header).is_ok() {
            return Err(Error::KickFile {
                reason: "first line parses as data; a header line is required".into(),
            });
        }
        let mut angles = Vec::new();
        let mut weights = Vec::new();
        let mut n_cols = None;
        for (lineno, line) in lines.enumerate() {
            let row = parse_row(line).map_err(|reason| Error::KickFile {
                reason: format!("line {}: {reason}", lineno + 2),
            })?;
            let cols = row.len();
            if cols != 3 && cols != 4 {
                return Err(Error::KickFile {
                    reason: format!("line {}: expected 3 or 4 columns, got {cols}", lineno + 2),
                });
            }
            match n_cols {
                None => n_cols = Some(cols),
                Some(expected) if expected != cols => {
                    return Err(Error::KickFile {
                        reason: format!(
                            "line {}: inconsistent column count ({cols} vs {expected})",
                            lineno + 2
                        ),
                    });
                }
                _ => {}
            }
            angles.push([row[0], row[1], row[2]]);
            if cols == 4 {
                weights.push(row[3]);
            }
        }
        if weights.is_empty() {
            Self::uniform(angles)
        } else {
            Self::weighted(angles, weights)
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[[f64; 3]] {
        &self.angles
    }

    /// Weight of sample `i` (uniform when no explicit weights were given).
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.angles.len() as f64,
        }
    }

    /// The same distribution with every angle negated. Used to check
    /// evenness: `p_from_kicks` on the mirror equals it on the original.
    pub fn mirrored(&self) -> Self {
        Self {
            angles: self
                .angles
                .iter()
                .map(|[a, b, c]| [-a, -b, -c])
                .collect(),
            weights: self.weights.clone(),
        }
    }
}

fn parse_row(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| format!("not a number: {tok:?}"))
        })
        .collect()
}

/// Result of the kick-distribution integral.
///
/// `p = (1 - E[cos 2(t1+t2+t3)]) / 2`; the sine part of the integrand
/// vanishes for distributions even in their arguments. The imaginary
/// residue (the sine mean) is reported rather than silently dropped, with an
/// asymmetry flag when it exceeds three standard errors.
#[derive(Clone, Copy, Debug)]
pub struct KickIntegral {
    pub p: f64,
    pub std_error: f64,
    pub imaginary_residue: f64,
    pub imaginary_std_error: f64,
    pub asymmetry_detected: bool,
}

/// Reduce a kick sample set to the de-phasing parameter `p`.
pub fn p_from_kicks(kicks: &KickSamples) -> KickIntegral {
    let n = kicks.len();
    let values: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let [a, b, c] = kicks.angles()[i];
            let phase = 2.0 * (a + b + c);
            (phase.cos(), phase.sin(), kicks.weight(i))
        })
        .collect();

    let cos_mean = weighted_mean(values.iter().map(|(c, _, w)| (*c, *w)));
    let sin_mean = weighted_mean(values.iter().map(|(_, s, w)| (*s, *w)));
    // Standard error of a weighted mean over an empirical measure:
    // sqrt(sum w_i^2 (x_i - mean)^2); reduces to s/sqrt(N) for uniform
    // weights.
    let cos_se = weighted_mean_std_error(values.iter().map(|(c, _, w)| (*c, *w)), cos_mean);
    let sin_se = weighted_mean_std_error(values.iter().map(|(_, s, w)| (*s, *w)), sin_mean);

    let asymmetry_detected = if sin_se > 0.0 {
        sin_mean.abs() > 3.0 * sin_se
    } else {
        sin_mean.abs() > PROBABILITY_TOL
    };

    KickIntegral {
        p: 0.5 * (1.0 - cos_mean),
        std_error: 0.5 * cos_se,
        imaginary_residue: sin_mean,
        imaginary_std_error: sin_se,
        asymmetry_detected,
    }
}

fn weighted_mean(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut sum = NeumaierSum::default();
    for (x, w) in values {
        sum.add(w * x);
    }
    sum.total()
}

fn weighted_mean_std_error(values: impl Iterator<Item = (f64, f64)>, mean: f64) -> f64 {
    let mut sum = NeumaierSum::default();
    for (x, w) in values {
        sum.add(w * w * (x - mean) * (x - mean));
    }
    sum.total().max(0.0).sqrt()
}

/// Compensated (Neumaier) summation; summation order is fixed by the caller
/// so results are deterministic for a fixed sample set.
#[derive(Default)]
struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// A mixture of signed Pauli words with probabilities; conjugating a
/// reference state by a sampled word realizes the corresponding noisy
/// carrier. This is the seed format for the Pauli-frame engine.
#[derive(Clone, Debug)]
pub struct PauliMixture {
    n_qubits: usize,
    terms: Vec<(PauliWord, f64)>,
}

impl PauliMixture {
    pub fn new(terms: Vec<(PauliWord, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidMixture {
                reason: "empty mixture".into(),
            });
        }
        let n_qubits = terms[0].0.n_qubits();
        let mut total = 0.0;
        for (word, prob) in &terms {
            if word.n_qubits() != n_qubits {
                return Err(Error::InvalidMixture {
                    reason: "inconsistent word widths".into(),
                });
            }
            if *prob < 0.0 {
                return Err(Error::InvalidMixture {
                    reason: format!("negative probability {prob}"),
                });
            }
            total += prob;
        }
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::InvalidMixture {
                reason: format!("probabilities sum to {total}"),
            });
        }
        Ok(Self { n_qubits, terms })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(PauliWord, f64)] {
        &self.terms
    }

    /// Index of the term selected by a uniform draw `u` in `[0, 1)`.
    pub fn select(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, (_, prob)) in self.terms.iter().enumerate() {
            acc += prob;
            if u < acc {
                return i;
            }
        }
        self.terms.len() - 1
    }

    /// Dense reconstruction `sum_w pi_w (w rho w†)` on a reference state.
    pub fn reconstruct_on(&self, reference: &DensityMatrix) -> Result<DensityMatrix> {
        if reference.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                left: reference.n_qubits(),
                right: self.n_qubits,
            });
        }
        let dim = reference.dim();
        let mut entries = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
        for (word, prob) in &self.terms {
            let m = word.to_matrix();
            entries += (&m * reference.entries() * m.adjoint()) * Complex64::new(*prob, 0.0);
        }
        DensityMatrix::from_entries(entries)
    }
}

/// De-phased 3-qubit carrier `(1-p)|GHZ⟩⟨GHZ| + p|GHZ'⟩⟨GHZ'|`.
pub fn dephased_carrier(p: f64) -> Result<DensityMatrix> {
    dephased_carrier_on(3, p)
}

/// De-phased carrier on `m` carrier qubits.
pub fn dephased_carrier_on(m: usize, p: f64) -> Result<DensityMatrix> {
    check_probability("p", p, 1.0)?;
    let plus = ghz_state(m, Sign::Plus)?.to_density();
    let minus = ghz_state(m, Sign::Minus)?.to_density();
    DensityMatrix::mixture(&[(1.0 - p, &plus), (p, &minus)])
}

/// The same de-phased carrier in its other written form,
/// `(1-2p)|GHZ⟩⟨GHZ| + p|0..0⟩⟨0..0| + p|1..1⟩⟨1..1|`, which is only a
/// mixture for `p <= 1/2`. Equal to [`dephased_carrier`] on that domain.
pub fn dephased_carrier_diagonal_form(p: f64) -> Result<DensityMatrix> {
    check_probability("p", p, 0.5)?;
    let ghz = ghz_state(3, Sign::Plus)?.to_density();
    let zeros = crate::dense::PureState::basis(3, 0)?.to_density();
    let ones = crate::dense::PureState::basis(3, 7)?.to_density();
    DensityMatrix::mixture(&[(1.0 - 2.0 * p, &ghz), (p, &zeros), (p, &ones)])
}

/// Depolarized 3-qubit carrier `(1-p)|G_0⟩⟨G_0| + (p/8) I`.
pub fn depolarized_carrier(p: f64) -> Result<DensityMatrix> {
    depolarized_carrier_on(3, p)
}

/// Depolarized carrier on `m` carrier qubits:
/// `(1-p)|G_0⟩⟨G_0| + (p/2^m) I`.
pub fn depolarized_carrier_on(m: usize, p: f64) -> Result<DensityMatrix> {
    check_probability("p", p, 1.0)?;
    let ghz = ghz_state(m, Sign::Plus)?.to_density();
    let mixed = DensityMatrix::maximally_mixed(m)?;
    DensityMatrix::mixture(&[(1.0 - p, &ghz), (p, &mixed)])
}

/// Express a noise spec as a Pauli mixture relative to the clean GHZ
/// carrier on three qubits: conjugating `|G_0⟩⟨G_0|` by a word sampled from
/// the mixture reproduces the noisy carrier.
pub fn as_pauli_mixture(spec: &NoiseSpec) -> Result<PauliMixture> {
    as_pauli_mixture_on(spec, 3)
}

/// [`as_pauli_mixture`] generalized to `m` carrier qubits.
///
/// The representation is not unique; one canonical word is fixed per
/// GHZ-basis projector: X on the labeled sites (receiver sites only, since
/// flipping every qubit stabilizes the GHZ pair) and Z on site A for the
/// primed states.
pub fn as_pauli_mixture_on(spec: &NoiseSpec, m: usize) -> Result<PauliMixture> {
    if m < 2 {
        return Err(Error::TooFewParties { min: 2, got: m });
    }
    match spec {
        NoiseSpec::None => PauliMixture::new(vec![(PauliWord::identity(m), 1.0)]),
        NoiseSpec::Dephasing { p } => {
            check_probability("p", *p, 1.0)?;
            let mut terms = vec![(PauliWord::identity(m), 1.0 - p)];
            if *p > 0.0 {
                terms.push((PauliWord::single_z(m, 0)?, *p));
            }
            PauliMixture::new(terms)
        }
        NoiseSpec::Depolarizing { p } => {
            check_probability("p", *p, 1.0)?;
            let dim = 1usize << m;
            let share = p / dim as f64;
            // One word per GHZ-basis projector: X on a subset of the
            // receiver sites (qubits 1..m-1), optionally Z_A for the primed
            // member. The identity word absorbs the share of |G_0⟩ itself.
            let mut terms = vec![(PauliWord::identity(m), 1.0 - p + share)];
            if *p > 0.0 {
                let full_receiver_set = dim / 2 - 1;
                for flips in 0..(dim / 2) {
                    for primed in [false, true] {
                        if flips == 0 && !primed {
                            continue;
                        }
                        // Flipping every site stabilizes the GHZ pair, so
                        // the all-receivers subset is written as X on site A
                        // (the labeled-site form of that translate).
                        let x_mask = if flips == full_receiver_set {
                            1
                        } else {
                            (flips as u64) << 1
                        };
                        let z_mask = if primed { 1 } else { 0 };
                        let word = PauliWord::new(m, x_mask, z_mask, false)?;
                        terms.push((word, share));
                    }
                }
            }
            PauliMixture::new(terms)
        }
        NoiseSpec::Kicks { .. } => Err(Error::KicksNotDirectlySupported),
    }
}

fn check_probability(name: &'static str, value: f64, hi: f64) -> Result<()> {
    if !(0.0..=hi).contains(&value) || !value.is_finite() {
        return Err(Error::OutOfRange {
            name,
            value,
            lo: 0.0,
            hi,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::hermitian_eigenvalues;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dephased_carrier_limits() {
        let clean = dephased_carrier(0.0).unwrap();
        let ghz = ghz_state(3, Sign::Plus).unwrap().to_density();
        assert_abs_diff_eq!(
            (clean.entries() - ghz.entries()).norm(),
            0.0,
            epsilon = 1e-14
        );

        // p = 1/2: fully de-phased, (|000><000| + |111><111|)/2.
        let full = dephased_carrier(0.5).unwrap();
        assert_abs_diff_eq!(full.entry(0, 0).re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(full.entry(7, 7).re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(full.entry(0, 7).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dephased_carrier_off_diagonal() {
        // <000|rho|111> = (1 - 2p)/2 = 0.4 at p = 0.1.
        let rho = dephased_carrier(0.1).unwrap();
        assert_abs_diff_eq!(rho.entry(0, 7).re, 0.4, epsilon = 1e-14);
    }

    #[test]
    fn dephased_forms_agree_on_common_domain() {
        for p in [0.0, 0.1, 0.25, 0.4, 0.5] {
            let mixture_form = dephased_carrier(p).unwrap();
            let diagonal_form = dephased_carrier_diagonal_form(p).unwrap();
            let dev = (mixture_form.entries() - diagonal_form.entries())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12, "p={p}: deviation {dev}");
        }
    }

    #[test]
    fn dephased_carrier_rejects_out_of_range() {
        assert!(matches!(
            dephased_carrier(1.2),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            dephased_carrier_diagonal_form(0.6),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn depolarized_carrier_limits() {
        let clean = depolarized_carrier(0.0).unwrap();
        let ghz = ghz_state(3, Sign::Plus).unwrap().to_density();
        assert_abs_diff_eq!(
            (clean.entries() - ghz.entries()).norm(),
            0.0,
            epsilon = 1e-14
        );

        let mixed = depolarized_carrier(1.0).unwrap();
        for i in 0..8 {
            assert_abs_diff_eq!(mixed.entry(i, i).re, 0.125, epsilon = 1e-14);
        }
    }

    #[test]
    fn depolarized_carrier_eigenvalues() {
        // p = 0.4: eigenvalue (1-p) + p/8 = 0.65 on |G_0>, p/8 = 0.05
        // sevenfold.
        let rho = depolarized_carrier(0.4).unwrap();
        let mut eigs = hermitian_eigenvalues(rho.entries());
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for e in &eigs[..7] {
            assert_abs_diff_eq!(*e, 0.05, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(eigs[7], 0.65, epsilon = 1e-12);
    }

    #[test]
    fn noisy_carriers_are_valid_density_matrices() {
        for p in [0.0, 0.1, 0.25, 0.5, 0.75, 1.0] {
            dephased_carrier(p).unwrap().validate().unwrap();
            depolarized_carrier(p).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn kick_point_masses() {
        let at_zero = KickSamples::uniform(vec![[0.0, 0.0, 0.0]]).unwrap();
        let est = p_from_kicks(&at_zero);
        assert_abs_diff_eq!(est.p, 0.0, epsilon = 1e-15);
        assert!(!est.asymmetry_detected);

        // Point mass at (pi/2, 0, 0): p = (1 - cos pi)/2 = 1.
        let at_half_pi = KickSamples::uniform(vec![[std::f64::consts::FRAC_PI_2, 0.0, 0.0]])
            .unwrap();
        let est = p_from_kicks(&at_half_pi);
        assert_abs_diff_eq!(est.p, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(est.std_error, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kick_mirror_symmetry_is_exact() {
        let samples = KickSamples::weighted(
            vec![[0.3, -0.1, 0.2], [-0.4, 0.25, 0.05], [0.9, 0.0, -0.6]],
            vec![0.5, 0.25, 0.25],
        )
        .unwrap();
        let direct = p_from_kicks(&samples);
        let mirrored = p_from_kicks(&samples.mirrored());
        assert_eq!(direct.p, mirrored.p);
        assert_eq!(direct.imaginary_residue, -mirrored.imaginary_residue);
    }

    #[test]
    fn kick_asymmetry_is_flagged_not_dropped() {
        // Point mass at pi/4: sin(pi/2) = 1 stays visible as the imaginary
        // residue.
        let skewed = KickSamples::uniform(vec![[std::f64::consts::FRAC_PI_4, 0.0, 0.0]]).unwrap();
        let est = p_from_kicks(&skewed);
        assert_abs_diff_eq!(est.p, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(est.imaginary_residue, 1.0, epsilon = 1e-14);
        assert!(est.asymmetry_detected);
    }

    #[test]
    fn kick_weights_are_validated() {
        assert!(matches!(
            KickSamples::weighted(vec![[0.0; 3]], vec![0.5]),
            Err(Error::InvalidKickWeights { .. })
        ));
        assert!(matches!(
            KickSamples::weighted(vec![[0.0; 3], [0.1; 3]], vec![1.5, -0.5]),
            Err(Error::InvalidKickWeights { .. })
        ));
        assert!(matches!(
            KickSamples::uniform(vec![]),
            Err(Error::EmptyKickSet)
        ));
    }

    #[test]
    fn kick_table_parsing() {
        let table = "theta1 theta2 theta3\n0.1 0.2 0.3\n-0.1 -0.2 -0.3\n";
        let samples = KickSamples::from_str_table(table).unwrap();
        assert_eq!(samples.len(), 2);
        assert_abs_diff_eq!(samples.weight(0), 0.5, epsilon = 1e-15);

        let weighted = "t1 t2 t3 w\n0.0 0.0 0.0 0.75\n1.0 0.0 0.0 0.25\n";
        let samples = KickSamples::from_str_table(weighted).unwrap();
        assert_abs_diff_eq!(samples.weight(1), 0.25, epsilon = 1e-15);

        assert!(matches!(
            KickSamples::from_str_table("0.1 0.2 0.3\n"),
            Err(Error::KickFile { .. })
        ));
        assert!(matches!(
            KickSamples::from_str_table("h\n0.1 0.2\n"),
            Err(Error::KickFile { .. })
        ));
        assert!(matches!(
            KickSamples::from_str_table("h\n0.1 0.2 0.3\n0.1 0.2 0.3 1.0\n"),
            Err(Error::KickFile { .. })
        ));
    }

    #[test]
    fn gaussian_kicks_match_closed_form() {
        // Independent N(0, sigma) kicks give p = (1 - exp(-6 sigma^2))/2.
        // Oracle: Monte Carlo mean of cos 2(t1+t2+t3), checked within three
        // standard errors.
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for sigma in [0.1, 0.3] {
            let normal = Normal::new(0.0, sigma).unwrap();
            let angles: Vec<[f64; 3]> = (0..200_000)
                .map(|_| {
                    [
                        normal.sample(&mut rng),
                        normal.sample(&mut rng),
                        normal.sample(&mut rng),
                    ]
                })
                .collect();
            let samples = KickSamples::uniform(angles).unwrap();
            let est = p_from_kicks(&samples);
            let expected = 0.5 * (1.0 - (-6.0 * sigma * sigma).exp());
            assert!(
                (est.p - expected).abs() < 3.0 * est.std_error,
                "sigma={sigma}: got {} expected {expected} (se {})",
                est.p,
                est.std_error
            );
            assert!(!est.asymmetry_detected);
        }
    }

    #[test]
    fn dephasing_mixture_words() {
        let mixture = as_pauli_mixture(&NoiseSpec::Dephasing { p: 0.2 }).unwrap();
        assert_eq!(mixture.terms().len(), 2);
        let (identity, w0) = &mixture.terms()[0];
        assert!(identity.is_identity_operator());
        assert_abs_diff_eq!(*w0, 0.8, epsilon = 1e-15);
        let (z_word, w1) = &mixture.terms()[1];
        assert_eq!(z_word.z_mask(), 1);
        assert_eq!(z_word.x_mask(), 0);
        assert_abs_diff_eq!(*w1, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn trivial_mixture_at_p_zero() {
        for spec in [
            NoiseSpec::Dephasing { p: 0.0 },
            NoiseSpec::Depolarizing { p: 0.0 },
            NoiseSpec::None,
        ] {
            let mixture = as_pauli_mixture(&spec).unwrap();
            assert_eq!(mixture.terms().len(), 1);
            assert!(mixture.terms()[0].0.is_identity_operator());
            assert_abs_diff_eq!(mixture.terms()[0].1, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn depolarizing_mixture_structure() {
        let p = 0.4;
        let mixture = as_pauli_mixture(&NoiseSpec::Depolarizing { p }).unwrap();
        assert_eq!(mixture.terms().len(), 8);
        // Identity absorbs the |G_0> share: (1 - p) + p/8.
        assert!(mixture.terms()[0].0.is_identity_operator());
        assert_abs_diff_eq!(mixture.terms()[0].1, 1.0 - 7.0 * p / 8.0, epsilon = 1e-15);
        for (_, w) in &mixture.terms()[1..] {
            assert_abs_diff_eq!(*w, p / 8.0, epsilon = 1e-15);
        }
        // Canonical words: X on the labeled site (A, B, C) and Z on site A
        // for the primed states.
        let masks: Vec<(u64, u64)> = mixture
            .terms()
            .iter()
            .map(|(w, _)| (w.x_mask(), w.z_mask()))
            .collect();
        for expected in [
            (0, 0),
            (0, 1), // Z_A realizes G'_0
            (0b001, 0),
            (0b010, 0),
            (0b100, 0),
            (0b001, 1),
            (0b010, 1),
            (0b100, 1),
        ] {
            assert!(masks.contains(&expected), "missing word {expected:?}");
        }
    }

    #[test]
    fn mixtures_reconstruct_the_noisy_carriers() {
        let reference = ghz_state(3, Sign::Plus).unwrap().to_density();
        for p in [0.0, 0.1, 0.25, 0.5, 1.0] {
            let spec = NoiseSpec::Dephasing { p };
            let rebuilt = as_pauli_mixture(&spec)
                .unwrap()
                .reconstruct_on(&reference)
                .unwrap();
            let direct = dephased_carrier(p).unwrap();
            let dev = (rebuilt.entries() - direct.entries())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12, "dephasing p={p}: {dev}");

            let spec = NoiseSpec::Depolarizing { p };
            let rebuilt = as_pauli_mixture(&spec)
                .unwrap()
                .reconstruct_on(&reference)
                .unwrap();
            let direct = depolarized_carrier(p).unwrap();
            let dev = (rebuilt.entries() - direct.entries())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12, "depolarizing p={p}: {dev}");
        }
    }

    #[test]
    fn kicks_have_no_direct_mixture() {
        let samples = KickSamples::uniform(vec![[0.1, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            as_pauli_mixture(&NoiseSpec::Kicks { samples }),
            Err(Error::KicksNotDirectlySupported)
        ));
    }
}
