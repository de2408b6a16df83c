//! Estimators, error bars, weak values and the first-order probability
//! expressions used as analytic oracles.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::qstate::{self, PauliAxis, PureState};
use crate::sampling::{Label, Outcome, OutcomeCounts, OutcomeDistribution, Postselected};
use crate::{Error, Result};

/// `|⟨φf|φi⟩|` below this makes the weak value undefined.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// A point estimate with the two standard-error formulas side by side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// `(1/r)·√(2(1+m)/N)` with `r` the rescaling factor and `m` the raw meter mean.
    pub stderr_paper: f64,
    /// `(1/r)·√((1−m²)/N)`, the binomial standard error.
    pub stderr_exact: f64,
    pub n_used: u64,
}

/// Divisor applied to a postselected meter asymmetry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Rescale {
    /// Leading-order factor `ε`.
    #[default]
    Epsilon,
    /// `sin ε = cos θ`.
    SinEpsilon,
}

impl Rescale {
    pub fn factor(self, epsilon: f64) -> f64 {
        match self {
            Rescale::Epsilon => epsilon,
            Rescale::SinEpsilon => libm::sin(epsilon),
        }
    }
}

/// Complex ratio `⟨φf|σ|φi⟩ / ⟨φf|φi⟩`; `re` is the weak value proper, the
/// whole number is the effective field a weakly coupled probe feels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakValue {
    pub re: f64,
    pub im: f64,
}

impl WeakValue {
    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn norm(&self) -> f64 {
        libm::hypot(self.re, self.im)
    }
}

/// `(N₊ − N₋)/(N₊ + N₋)`.
pub fn asymmetry(plus: f64, minus: f64) -> Option<f64> {
    let total = plus + minus;
    (total > 0.0).then(|| (plus - minus) / total)
}

fn estimate_from_tally(plus: u64, minus: u64, factor: f64) -> Result<Estimate> {
    let n = plus + minus;
    if n == 0 {
        return Err(Error::EmptyCounts);
    }
    let mean = (plus as f64 - minus as f64) / n as f64;
    Ok(Estimate {
        value: mean / factor,
        stderr_paper: stderr_paper_formula(mean, n, factor)?,
        stderr_exact: libm::sqrt(f64::max(1.0 - mean * mean, 0.0) / n as f64) / factor,
        n_used: n,
    })
}

fn check_theta(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::NonFinite { what: "theta" });
    }
    if theta == FRAC_PI_2 {
        return Err(Error::DegenerateStrength);
    }
    if !(0.0..FRAC_PI_2).contains(&theta) {
        return Err(Error::InvalidStrength { theta });
    }
    Ok(libm::cos(theta))
}

/// Ancilla mean rescaled by `1/cos θ`, over all shots.
pub fn rescaled_estimate(counts: &OutcomeCounts, slot: usize, theta: f64) -> Result<Estimate> {
    let cos = check_theta(theta)?;
    let (plus, minus) = counts.meter_tally(slot)?;
    estimate_from_tally(plus, minus, cos)
}

/// `(1/r)·√(2(1+m)/n)` where `r` is the rescaling factor (`cos θ` in general,
/// `ε` in the weak limit) and `m = r·⟨σz⟩` is the raw ancilla mean.
pub fn stderr_paper_formula(raw_mean: f64, n: u64, factor: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptyCounts);
    }
    if factor == 0.0 {
        return Err(Error::DegenerateStrength);
    }
    Ok(libm::sqrt(2.0 * (1.0 + raw_mean) / n as f64) / factor)
}

/// [`stderr_paper_formula`] with the factor given as the meter angle.
pub fn stderr_paper_for_theta(raw_mean: f64, n: u64, theta: f64) -> Result<f64> {
    stderr_paper_formula(raw_mean, n, check_theta(theta)?)
}

/// Weak-limit form `(1/ε)·√(2/n)`.
pub fn stderr_weak_limit(n: u64, epsilon: f64) -> Result<f64> {
    stderr_paper_formula(0.0, n, epsilon)
}

/// `⟨φf|σ|φi⟩/⟨φf|φi⟩` for one-qubit states.
pub fn weak_value(phi_i: &PureState, phi_f: &PureState, axis: PauliAxis) -> Result<WeakValue> {
    for s in [phi_i, phi_f] {
        if s.n_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                left: s.n_qubits(),
                right: 1,
            });
        }
    }
    let overlap = qstate::inner_product(phi_f, phi_i)?;
    if overlap.norm() < ORTHOGONALITY_TOL {
        return Err(Error::OrthogonalPrePost {
            overlap: overlap.norm(),
        });
    }
    let sigma_i = qstate::apply_pauli(phi_i, 0, axis)?;
    let ratio = qstate::inner_product(phi_f, &sigma_i)? / overlap;
    Ok(WeakValue {
        re: ratio.re,
        im: ratio.im,
    })
}

/// Postselected meter asymmetry divided by the rescaling factor of `epsilon`.
/// Error bars reuse the unpostselected formulas with `N_f` in place of `N`.
pub fn postselected_estimate(
    ps: &Postselected,
    slot: usize,
    epsilon: f64,
    rescale: Rescale,
) -> Result<Estimate> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidSpec {
            field: "epsilon",
            constraint: "must be positive",
        });
    }
    if ps.is_empty() {
        return Err(Error::EmptyPostselection);
    }
    let (plus, minus) = ps.counts().meter_tally(slot)?;
    estimate_from_tally(plus, minus, rescale.factor(epsilon)).map_err(|e| match e {
        Error::EmptyCounts => Error::EmptyPostselection,
        e => e,
    })
}

/// Infinite-shot limit of [`postselected_estimate`]: the exact `f`-branch
/// meter asymmetry divided by the rescaling factor.
pub fn exact_postselected_value(
    dist: &OutcomeDistribution,
    slot: usize,
    epsilon: f64,
    rescale: Rescale,
) -> Result<f64> {
    let (plus, minus) = dist.meter_tally(slot, true)?;
    asymmetry(plus, minus)
        .map(|a| a / rescale.factor(epsilon))
        .ok_or(Error::EmptyPostselection)
}

/// Infinite-shot limit of [`rescaled_estimate`].
pub fn exact_rescaled_value(dist: &OutcomeDistribution, slot: usize, theta: f64) -> Result<f64> {
    let cos = check_theta(theta)?;
    let (plus, minus) = dist.meter_tally(slot, false)?;
    asymmetry(plus, minus)
        .map(|a| a / cos)
        .ok_or(Error::EmptyDistribution)
}

/// Which circuit a first-order probability table describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FirstOrderConfig {
    /// System plus one Z meter.
    TwoQubitZ,
    /// Two Z meters on the same system.
    ThreeQubitZZ,
    /// Z meter on qubit 1, X meter on qubit 2.
    ThreeQubitZX,
}

/// Leading-order probabilities of the postselected (`f`) outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrderProbs {
    entries: Vec<(Outcome, f64)>,
}

impl FirstOrderProbs {
    pub fn entries(&self) -> &[(Outcome, f64)] {
        &self.entries
    }

    pub fn probability(&self, outcome: &Outcome) -> Option<f64> {
        self.entries
            .iter()
            .find(|(o, _)| o == outcome)
            .map(|&(_, p)| p)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// Largest `|exact − first order|` over the `f` outcomes of `dist`.
    pub fn max_discrepancy(&self, dist: &OutcomeDistribution) -> f64 {
        self.entries
            .iter()
            .map(|(o, p)| libm::fabs(dist.probability(o) - p))
            .fold(0.0, f64::max)
    }
}

/// `Re[⟨φf|σ|φi⟩⟨φi|φf⟩]`.
fn interference(phi_i: &PureState, phi_f: &PureState, axis: PauliAxis) -> Result<f64> {
    let sigma_i = qstate::apply_pauli(phi_i, 0, axis)?;
    let a = qstate::inner_product(phi_f, &sigma_i)?;
    let b = qstate::inner_product(phi_i, phi_f)?;
    Ok((a * b).re)
}

/// The first-order expansions of the postselected joint probabilities,
/// e.g. `p_f0 = (|⟨φf|φi⟩|² + ε·Re[⟨φf|σz|φi⟩⟨φi|φf⟩])/2`.
///
/// `eps2` is required for the three-qubit configurations and ignored otherwise.
pub fn first_order_probs(
    phi_i: &PureState,
    phi_f: &PureState,
    config: FirstOrderConfig,
    eps1: f64,
    eps2: Option<f64>,
) -> Result<FirstOrderProbs> {
    let eps2 = match config {
        FirstOrderConfig::TwoQubitZ => 0.0,
        _ => eps2.ok_or(Error::MissingField { field: "epsilon2" })?,
    };
    for e in [eps1, eps2] {
        if !(libm::fabs(e) < 1.0) {
            return Err(Error::InvalidSpec {
                field: "epsilon",
                constraint: "|ε| < 1",
            });
        }
    }
    let overlap = qstate::inner_product(phi_f, phi_i)?;
    if overlap.norm() < ORTHOGONALITY_TOL {
        return Err(Error::OrthogonalPrePost {
            overlap: overlap.norm(),
        });
    }
    let base = overlap.norm_sqr();
    let rz = interference(phi_i, phi_f, PauliAxis::Z)?;
    let o = |l: &[Label]| Outcome::new(l);
    use Label::*;
    let entries = match config {
        FirstOrderConfig::TwoQubitZ => alloc::vec![
            (o(&[F, Zero]), (base + eps1 * rz) / 2.0),
            (o(&[F, One]), (base - eps1 * rz) / 2.0),
        ],
        FirstOrderConfig::ThreeQubitZZ => alloc::vec![
            (o(&[F, Zero, Zero]), (base + (eps1 + eps2) * rz) / 4.0),
            (o(&[F, Zero, One]), (base + (eps1 - eps2) * rz) / 4.0),
            (o(&[F, One, Zero]), (base - (eps1 - eps2) * rz) / 4.0),
            (o(&[F, One, One]), (base - (eps1 + eps2) * rz) / 4.0),
        ],
        FirstOrderConfig::ThreeQubitZX => {
            let rx = interference(phi_i, phi_f, PauliAxis::X)?;
            alloc::vec![
                (o(&[F, Zero, Plus]), (base + eps1 * rz + eps2 * rx) / 4.0),
                (o(&[F, Zero, Minus]), (base + eps1 * rz - eps2 * rx) / 4.0),
                (o(&[F, One, Plus]), (base - eps1 * rz + eps2 * rx) / 4.0),
                (o(&[F, One, Minus]), (base - eps1 * rz - eps2 * rx) / 4.0),
            ]
        }
    };
    Ok(FirstOrderProbs { entries })
}

/// Pre- and postselected pair with weak value `z` for `σz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnomalyPair {
    pub z: f64,
    pub phi_i: PureState,
    pub phi_f: PureState,
}

impl AnomalyPair {
    /// `⟨φf|φi⟩ = 1/√(z²+1)`.
    pub fn overlap(&self) -> Complex64 {
        qstate::inner_product(&self.phi_f, &self.phi_i).expect("one-qubit pair")
    }

    /// `1/(z²+1)`, the postselection rate in the weak limit.
    pub fn success_probability(&self) -> f64 {
        1.0 / (self.z * self.z + 1.0)
    }
}

/// `φi = |+⟩`, `φf = ((z+1)|0⟩ − (z−1)|1⟩)/√(2(z²+1))`.
pub fn anomaly_pair(z: f64) -> Result<AnomalyPair> {
    if !z.is_finite() {
        return Err(Error::NonFinite { what: "z" });
    }
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let n = libm::sqrt(2.0 * (z * z + 1.0));
    let phi_i = PureState::from_amplitudes(&[Complex64::new(h, 0.0), Complex64::new(h, 0.0)])?;
    let phi_f = PureState::from_amplitudes(&[
        Complex64::new((z + 1.0) / n, 0.0),
        Complex64::new(-(z - 1.0) / n, 0.0),
    ])?;
    Ok(AnomalyPair { z, phi_i, phi_f })
}

/// `⌈(z²+1)/Δw²⌉` runs to resolve the weak value `z` to precision `Δw`.
pub fn required_runs(z: f64, delta_w: f64) -> Result<u64> {
    if !(delta_w > 0.0) || !delta_w.is_finite() {
        return Err(Error::NonPositivePrecision { delta_w });
    }
    if !z.is_finite() {
        return Err(Error::NonFinite { what: "z" });
    }
    Ok(libm::ceil((z * z + 1.0) / (delta_w * delta_w)) as u64)
}

/// Runs needed to see on the order of one conditional probe flip:
/// `⌈1/(p_success · rate)⌉`, i.e. `(z²+1)/(δt·z)²` for the anomaly pair.
pub fn dynamical_required_runs(success_probability: f64, flip_rate: f64) -> Option<u64> {
    let per_run = success_probability * flip_rate;
    (per_run > 0.0 && per_run.is_finite()).then(|| libm::ceil(1.0 / per_run) as u64)
}

/// Result of checking `|ε z| < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Validity {
    pub product: f64,
    pub valid: bool,
}

pub fn validity_check(epsilon: f64, z: f64) -> Validity {
    let product = libm::fabs(epsilon * z);
    Validity {
        product,
        valid: product < 1.0,
    }
}
