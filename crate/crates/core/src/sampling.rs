//! Born-rule outcome tables, reproducible shot sampling and postselection.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::qstate::{self, Gate1, PauliAxis, PureState, INPUT_TOL, UNITARITY_TOL};
use crate::rng;
use crate::{Error, Result};

/// Symbolic label of one qubit's measurement outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// System found in the postselected state `φf`.
    F,
    /// System found in `φf⊥`.
    FPerp,
    Zero,
    One,
    Plus,
    Minus,
}

impl Label {
    fn for_meter(axis: PauliAxis, bit: usize) -> Self {
        match (axis, bit) {
            (PauliAxis::Z, 0) => Label::Zero,
            (PauliAxis::Z, _) => Label::One,
            (PauliAxis::X, 0) => Label::Plus,
            (PauliAxis::X, _) => Label::Minus,
        }
    }

    /// `+1` for `0` / `+`, `−1` for `1` / `−`, `0` for system labels.
    pub fn sign(self) -> i8 {
        match self {
            Label::Zero | Label::Plus => 1,
            Label::One | Label::Minus => -1,
            Label::F | Label::FPerp => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::F => "f",
            Label::FPerp => "f⊥",
            Label::Zero => "0",
            Label::One => "1",
            Label::Plus => "+",
            Label::Minus => "-",
        }
    }
}

/// Joint outcome over all qubits of a measured state; slot 0 is the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Outcome {
    labels: [Label; qstate::MAX_QUBITS],
    len: u8,
}

impl Outcome {
    pub fn new(labels: &[Label]) -> Self {
        assert!(!labels.is_empty() && labels.len() <= qstate::MAX_QUBITS);
        let mut out = [Label::F; qstate::MAX_QUBITS];
        out[..labels.len()].copy_from_slice(labels);
        Self {
            labels: out,
            len: labels.len() as u8,
        }
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels[..self.len as usize]
    }

    pub fn system(&self) -> Label {
        self.labels[0]
    }

    /// Label of qubit `slot` (1 or 2 for meters).
    pub fn slot(&self, slot: usize) -> Option<Label> {
        self.labels().get(slot).copied()
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, l) in self.labels().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(l.as_str())?;
        }
        f.write_str(")")
    }
}

/// The unique state orthogonal to a one-qubit `phi`, phased so its first
/// nonzero amplitude is real and positive.
pub fn orthogonal_complement(phi: &PureState) -> Result<PureState> {
    if phi.n_qubits() != 1 {
        return Err(Error::DimensionMismatch {
            left: phi.n_qubits(),
            right: 1,
        });
    }
    let (a, b) = (phi.amplitude(0), phi.amplitude(1));
    let mut perp = [-b.conj(), a.conj()];
    let lead = if perp[0].norm() > UNITARITY_TOL {
        perp[0]
    } else {
        perp[1]
    };
    let phase = lead.conj() / lead.norm();
    for p in perp.iter_mut() {
        *p *= phase;
    }
    if perp[0].norm() <= UNITARITY_TOL {
        perp[0] = Complex64::new(0.0, 0.0);
    }
    PureState::from_amplitudes(&perp)?
        .renormalized()
        .map(|(s, _)| s)
}

/// Per-qubit measurement bases: `{φf, φf⊥}` for the system followed by one
/// Pauli basis per meter or probe.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementLayout {
    final_state: PureState,
    final_perp: PureState,
    meters: Vec<PauliAxis>,
}

impl MeasurementLayout {
    pub fn new(final_state: &PureState, meters: &[PauliAxis]) -> Result<Self> {
        if final_state.n_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                left: final_state.n_qubits(),
                right: 1,
            });
        }
        let norm_sqr = final_state.norm_sqr();
        if libm::fabs(norm_sqr - 1.0) > INPUT_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        if meters.len() + 1 > qstate::MAX_QUBITS {
            return Err(Error::TooManyQubits {
                requested: meters.len() + 1,
            });
        }
        let (final_state, _) = final_state.renormalized()?;
        Ok(Self {
            final_perp: orthogonal_complement(&final_state)?,
            final_state,
            meters: meters.to_vec(),
        })
    }

    /// Computational-basis system measurement, so `f ≡ 0` and `f⊥ ≡ 1`.
    pub fn computational(meters: &[PauliAxis]) -> Result<Self> {
        Self::new(&PureState::basis(1, 0)?, meters)
    }

    pub fn n_qubits(&self) -> usize {
        1 + self.meters.len()
    }

    pub fn final_state(&self) -> &PureState {
        &self.final_state
    }

    pub fn final_perp(&self) -> &PureState {
        &self.final_perp
    }

    pub fn meters(&self) -> &[PauliAxis] {
        &self.meters
    }

    /// Axis of qubit `slot` (1-based over meters).
    pub fn meter_axis(&self, slot: usize) -> Option<PauliAxis> {
        slot.checked_sub(1)
            .and_then(|i| self.meters.get(i))
            .copied()
    }

    /// Outcome whose bits, most significant first, are `index`.
    pub fn outcome(&self, index: usize) -> Outcome {
        let n = self.n_qubits();
        let bit = |q: usize| (index >> (n - 1 - q)) & 1;
        let mut labels = [Label::F; qstate::MAX_QUBITS];
        labels[0] = if bit(0) == 0 { Label::F } else { Label::FPerp };
        for (k, axis) in self.meters.iter().enumerate() {
            labels[k + 1] = Label::for_meter(*axis, bit(k + 1));
        }
        Outcome::new(&labels[..n])
    }

    /// All outcomes in index order.
    pub fn outcomes(&self) -> impl Iterator<Item = Outcome> + '_ {
        (0..1usize << self.n_qubits()).map(|i| self.outcome(i))
    }

    // Rows are the conjugated basis vectors, so applying it maps amplitudes to
    // overlaps with the measurement basis.
    fn projector(&self, qubit: usize) -> Gate1 {
        let (b0, b1) = if qubit == 0 {
            (
                [self.final_state.amplitude(0), self.final_state.amplitude(1)],
                [self.final_perp.amplitude(0), self.final_perp.amplitude(1)],
            )
        } else {
            let axis = self.meters[qubit - 1];
            (axis.eigenvector(0), axis.eigenvector(1))
        };
        [[b0[0].conj(), b0[1].conj()], [b1[0].conj(), b1[1].conj()]]
    }
}

/// Exact joint-outcome probabilities of a state under a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    layout: MeasurementLayout,
    probabilities: Vec<f64>,
    norm_sqr: f64,
}

impl OutcomeDistribution {
    pub fn layout(&self) -> &MeasurementLayout {
        &self.layout
    }

    /// Norm² of the state before the Born rule renormalized it.
    pub fn pre_normalization_norm_sqr(&self) -> f64 {
        self.norm_sqr
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn iter(&self) -> impl Iterator<Item = (Outcome, f64)> + '_ {
        self.layout
            .outcomes()
            .zip(self.probabilities.iter().copied())
    }

    pub fn probability(&self, outcome: &Outcome) -> f64 {
        self.iter()
            .find(|(o, _)| o == outcome)
            .map_or(0.0, |(_, p)| p)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Probability that the system is found in `φf`.
    pub fn success_probability(&self) -> f64 {
        self.iter()
            .filter(|(o, _)| o.system() == Label::F)
            .map(|(_, p)| p)
            .sum()
    }

    /// `(P(+1), P(−1))` of meter `slot`, optionally restricted to the `f` branch.
    pub fn meter_tally(&self, slot: usize, postselected: bool) -> Result<(f64, f64)> {
        tally(&self.layout, slot, postselected, self.iter())
    }

    /// Largest entrywise difference to another distribution over the same outcomes.
    pub fn max_abs_difference(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(self
            .probabilities
            .iter()
            .zip(&other.probabilities)
            .fold(0.0, |m, (a, b)| f64::max(m, libm::fabs(a - b))))
    }
}

fn tally<T, I>(
    layout: &MeasurementLayout,
    slot: usize,
    postselected: bool,
    entries: I,
) -> Result<(T, T)>
where
    T: Copy + Default + core::ops::AddAssign,
    I: Iterator<Item = (Outcome, T)>,
{
    if layout.meter_axis(slot).is_none() {
        return Err(Error::IndexOutOfRange {
            index: slot,
            n_qubits: layout.n_qubits(),
        });
    }
    let (mut plus, mut minus) = (T::default(), T::default());
    for (o, w) in entries {
        if postselected && o.system() != Label::F {
            continue;
        }
        match o.slot(slot).map(Label::sign) {
            Some(1) => plus += w,
            Some(-1) => minus += w,
            _ => {}
        }
    }
    Ok((plus, minus))
}

/// Born-rule probabilities of every joint outcome. Unnormalized states are
/// renormalized and their norm² is kept on the result.
pub fn born_distribution(
    state: &PureState,
    layout: &MeasurementLayout,
) -> Result<OutcomeDistribution> {
    if state.n_qubits() != layout.n_qubits() {
        return Err(Error::DimensionMismatch {
            left: state.n_qubits(),
            right: layout.n_qubits(),
        });
    }
    let (mut rotated, norm_sqr) = state.renormalized()?;
    for q in 0..layout.n_qubits() {
        rotated = qstate::apply_single_qubit(&rotated, q, &layout.projector(q))?;
    }
    let probabilities = rotated.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    Ok(OutcomeDistribution {
        layout: layout.clone(),
        probabilities,
        norm_sqr,
    })
}

/// Number of shots and the master seed they are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotPlan {
    n_shots: u64,
    master_seed: u64,
}

impl ShotPlan {
    pub fn new(n_shots: u64, master_seed: u64) -> Result<Self> {
        if n_shots == 0 {
            return Err(Error::InvalidSpec {
                field: "n_shots",
                constraint: "must be at least 1",
            });
        }
        Ok(Self {
            n_shots,
            master_seed,
        })
    }

    pub fn n_shots(&self) -> u64 {
        self.n_shots
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn n_blocks(&self) -> u64 {
        self.n_shots.div_ceil(rng::BLOCK_SHOTS)
    }

    /// Same shot count, independent seed for sub-run `stream`.
    pub fn child(&self, stream: u64) -> Self {
        Self {
            n_shots: self.n_shots,
            master_seed: rng::derive_seed(self.master_seed, stream),
        }
    }
}

/// Sampled shot tallies over a layout's outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeCounts {
    layout: MeasurementLayout,
    counts: Vec<u64>,
    n_total: u64,
}

impl OutcomeCounts {
    /// Builds counts from explicit tallies in layout index order.
    pub fn from_counts(layout: &MeasurementLayout, counts: Vec<u64>) -> Result<Self> {
        let expected = 1usize << layout.n_qubits();
        if counts.len() != expected {
            return Err(Error::DimensionMismatch {
                left: counts.len(),
                right: expected,
            });
        }
        Ok(Self {
            n_total: counts.iter().sum(),
            layout: layout.clone(),
            counts,
        })
    }

    pub fn layout(&self) -> &MeasurementLayout {
        &self.layout
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn iter(&self) -> impl Iterator<Item = (Outcome, u64)> + '_ {
        self.layout.outcomes().zip(self.counts.iter().copied())
    }

    pub fn count(&self, outcome: &Outcome) -> u64 {
        self.iter()
            .find(|(o, _)| o == outcome)
            .map_or(0, |(_, n)| n)
    }

    /// `(N₊, N₋)` of meter `slot`: `N₀, N₁` for Z meters, `N₊, N₋` for X meters.
    pub fn meter_tally(&self, slot: usize) -> Result<(u64, u64)> {
        tally(&self.layout, slot, false, self.iter())
    }
}

/// Draws one shot block. `sample_counts` is the ordered sum over all blocks,
/// which lets callers spread blocks over threads and merge in any order.
pub fn sample_block(dist: &OutcomeDistribution, plan: &ShotPlan, block: u64) -> Result<Vec<u64>> {
    let cdf = cumulative(dist)?;
    let mut counts = alloc::vec![0u64; cdf.len()];
    let start = block * rng::BLOCK_SHOTS;
    let end = u64::min(start + rng::BLOCK_SHOTS, plan.n_shots);
    let key = rng::block_key(plan.master_seed, block);
    let last = cdf.len() - 1;
    for shot in 0..end.saturating_sub(start) {
        let u = rng::counter_f64(key, shot);
        let k = cdf.iter().position(|&c| u < c).unwrap_or(last);
        counts[k] += 1;
    }
    Ok(counts)
}

fn cumulative(dist: &OutcomeDistribution) -> Result<Vec<f64>> {
    let total = dist.total();
    if dist.is_empty() || !(total > 0.0) {
        return Err(Error::EmptyDistribution);
    }
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = dist
        .probabilities
        .iter()
        .map(|p| {
            acc += p / total;
            acc
        })
        .collect();
    // Outcomes past the last one with mass must never be hit by rounding.
    let last_nonzero = dist.probabilities.iter().rposition(|&p| p > 0.0).unwrap();
    for c in cdf[last_nonzero..].iter_mut() {
        *c = f64::INFINITY;
    }
    Ok(cdf)
}

/// Multinomial draw of `plan.n_shots()` outcomes from the exact distribution.
pub fn sample_counts(dist: &OutcomeDistribution, plan: &ShotPlan) -> Result<OutcomeCounts> {
    let mut counts = alloc::vec![0u64; dist.len()];
    for block in 0..plan.n_blocks() {
        for (acc, n) in counts.iter_mut().zip(sample_block(dist, plan, block)?) {
            *acc += n;
        }
    }
    OutcomeCounts::from_counts(&dist.layout, counts)
}

/// Counts restricted to runs where the system was found in `φf`.
#[derive(Clone, Debug, PartialEq)]
pub struct Postselected {
    kept: OutcomeCounts,
    n_shots: u64,
}

impl Postselected {
    /// The kept tallies; entries with system label `f⊥` are zero.
    pub fn counts(&self) -> &OutcomeCounts {
        &self.kept
    }

    /// `N_f`.
    pub fn success_count(&self) -> u64 {
        self.kept.n_total
    }

    /// `N`, the number of shots before postselection.
    pub fn n_shots(&self) -> u64 {
        self.n_shots
    }

    pub fn success_fraction(&self) -> f64 {
        if self.n_shots == 0 {
            return 0.0;
        }
        self.kept.n_total as f64 / self.n_shots as f64
    }

    pub fn is_empty(&self) -> bool {
        self.kept.n_total == 0
    }
}

pub fn postselect(counts: &OutcomeCounts) -> Postselected {
    let kept: Vec<u64> = counts
        .iter()
        .map(|(o, n)| if o.system() == Label::F { n } else { 0 })
        .collect();
    Postselected {
        n_shots: counts.n_total,
        kept: OutcomeCounts {
            n_total: kept.iter().sum(),
            layout: counts.layout.clone(),
            counts: kept,
        },
    }
}
