//! End-to-end weak-measurement protocols.
//!
//! Each runner builds the circuit, computes the exact outcome distribution,
//! samples shots from it, postselects where the protocol requires, and
//! collects sampled estimates next to their infinite-shot values and the
//! analytic predictions.
//!
//! In the simultaneity protocols the Z meter's marginal is
//! `p_f0* = p_f0+ + p_f0−` and `p_f1* = p_f1+ + p_f1−`; the meter on qubit 2
//! always reports `±` outcomes.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::analysis::{
    self, Estimate, FirstOrderConfig, FirstOrderProbs, Rescale, Validity, WeakValue,
};
use crate::qstate::{self, CouplingMode, MeterPrep, Normalization, PauliAxis, PureState};
use crate::sampling::{
    self, MeasurementLayout, OutcomeCounts, OutcomeDistribution, Postselected, ShotPlan,
};
use crate::{Error, Result};

/// `δt·|mean field|` at or above this raises [`Flags::strong_coupling`]; there
/// the first-order rate `(δt·|F|)²` is off from the exact one by ≳ 6%.
pub const WEAK_COUPLING_LIMIT: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    WeakNoPostselect,
    WeakPostselect,
    ConsistencyZZ,
    SimultaneityZX,
    SimultaneityXZ,
    DynamicalProbe,
    ConvergenceSweep,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::WeakNoPostselect,
        Variant::WeakPostselect,
        Variant::ConsistencyZZ,
        Variant::SimultaneityZX,
        Variant::SimultaneityXZ,
        Variant::DynamicalProbe,
        Variant::ConvergenceSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::WeakNoPostselect => "WeakNoPostselect",
            Variant::WeakPostselect => "WeakPostselect",
            Variant::ConsistencyZZ => "ConsistencyZZ",
            Variant::SimultaneityZX => "SimultaneityZX",
            Variant::SimultaneityXZ => "SimultaneityXZ",
            Variant::DynamicalProbe => "DynamicalProbe",
            Variant::ConvergenceSweep => "ConvergenceSweep",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    fn needs_final_state(self) -> bool {
        self != Variant::WeakNoPostselect
    }

    fn meter_count(self) -> usize {
        match self {
            Variant::DynamicalProbe | Variant::ConvergenceSweep => 0,
            Variant::ConsistencyZZ | Variant::SimultaneityZX | Variant::SimultaneityXZ => 2,
            _ => 1,
        }
    }
}

/// How the system's pre- (and post-) selected states are given.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SystemSpec {
    /// The one-parameter family with weak value `z`.
    Anomaly { z: f64 },
    /// Explicit `(α, β)` amplitudes; `final_state` is needed for postselection.
    Explicit {
        initial: [Complex64; 2],
        final_state: Option<[Complex64; 2]>,
    },
}

/// Meter strength given either as the preparation angle or as the weakness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Strength {
    Theta(f64),
    Epsilon(f64),
}

impl Strength {
    pub fn epsilon(self) -> f64 {
        match self {
            Strength::Theta(t) => FRAC_PI_2 - t,
            Strength::Epsilon(e) => e,
        }
    }

    pub fn prep(self, axis: PauliAxis) -> Result<MeterPrep> {
        match self {
            Strength::Theta(t) => MeterPrep::new(t, axis),
            Strength::Epsilon(e) => MeterPrep::weak(e, axis),
        }
    }
}

/// Which meter interacts with the system first in two-meter circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InteractionOrder {
    FirstMeterFirst,
    SecondMeterFirst,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub variant: Variant,
    pub system: SystemSpec,
    pub meter1: Option<Strength>,
    pub meter2: Option<Strength>,
    pub delta_t: Option<f64>,
    pub coupling: CouplingMode,
    pub plan: ShotPlan,
    /// Strictly decreasing `ε` values for [`Variant::ConvergenceSweep`].
    pub sweep_epsilons: Vec<f64>,
    pub rescale: Rescale,
}

impl ExperimentSpec {
    pub fn new(variant: Variant, system: SystemSpec, plan: ShotPlan) -> Self {
        Self {
            variant,
            system,
            meter1: None,
            meter2: None,
            delta_t: None,
            coupling: CouplingMode::Exact,
            plan,
            sweep_epsilons: Vec::new(),
            rescale: Rescale::Epsilon,
        }
    }

    pub fn with_epsilons(mut self, eps1: f64, eps2: Option<f64>) -> Self {
        self.meter1 = Some(Strength::Epsilon(eps1));
        self.meter2 = eps2.map(Strength::Epsilon);
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.meter1 = Some(Strength::Theta(theta));
        self
    }

    pub fn with_delta_t(mut self, delta_t: f64, coupling: CouplingMode) -> Self {
        self.delta_t = Some(delta_t);
        self.coupling = coupling;
        self
    }

    pub fn with_sweep(mut self, epsilons: &[f64]) -> Self {
        self.sweep_epsilons = epsilons.to_vec();
        self
    }

    /// Checks that the fields the variant needs are present and in range.
    pub fn validate(&self) -> Result<()> {
        self.resolve_system()?;
        let v = self.variant;
        let meters = [("epsilon1", self.meter1), ("epsilon2", self.meter2)];
        for (field, m) in meters.iter().take(v.meter_count()) {
            let m = m.ok_or(Error::MissingField { field })?;
            check_strength(v, field, m)?;
        }
        if v == Variant::DynamicalProbe {
            let dt = self
                .delta_t
                .ok_or(Error::MissingField { field: "delta_t" })?;
            if !dt.is_finite() || dt < 0.0 {
                return Err(Error::InvalidSpec {
                    field: "delta_t",
                    constraint: "δt ≥ 0",
                });
            }
        }
        if v == Variant::ConvergenceSweep {
            for (i, &e) in self.sweep_epsilons.iter().enumerate() {
                check_strength(v, "epsilons", Strength::Epsilon(e))?;
                if i > 0 && e >= self.sweep_epsilons[i - 1] {
                    return Err(Error::InvalidSpec {
                        field: "epsilons",
                        constraint: "values must be strictly decreasing",
                    });
                }
            }
        }
        Ok(())
    }

    fn resolve_system(&self) -> Result<ResolvedSystem> {
        match self.system {
            SystemSpec::Anomaly { z } => {
                let pair = analysis::anomaly_pair(z)?;
                Ok(ResolvedSystem {
                    phi_i: pair.phi_i,
                    phi_f: Some(pair.phi_f),
                    z: Some(z),
                })
            }
            SystemSpec::Explicit {
                initial,
                final_state,
            } => {
                let phi_i = qstate::prepare_system(initial[0], initial[1], Normalization::Strict)?;
                let phi_f = final_state
                    .map(|f| qstate::prepare_system(f[0], f[1], Normalization::Strict))
                    .transpose()?;
                if phi_f.is_none() && self.variant.needs_final_state() {
                    return Err(Error::MissingField {
                        field: "final_state",
                    });
                }
                Ok(ResolvedSystem {
                    phi_i,
                    phi_f,
                    z: None,
                })
            }
        }
    }
}

fn check_strength(variant: Variant, field: &'static str, m: Strength) -> Result<()> {
    match (variant, m) {
        (Variant::WeakNoPostselect, Strength::Theta(t)) => {
            if !(0.0..FRAC_PI_2).contains(&t) {
                return Err(Error::InvalidSpec {
                    field,
                    constraint: "θ ∈ [0, π/2)",
                });
            }
        }
        (Variant::WeakNoPostselect, Strength::Epsilon(e)) => {
            if !(e > 0.0 && e <= FRAC_PI_2) {
                return Err(Error::InvalidSpec {
                    field,
                    constraint: "ε ∈ (0, π/2]",
                });
            }
        }
        (_, m) => {
            let e = m.epsilon();
            if !(e > 0.0 && e < FRAC_PI_2) {
                return Err(Error::InvalidSpec {
                    field,
                    constraint: "ε ∈ (0, π/2)",
                });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
struct ResolvedSystem {
    phi_i: PureState,
    phi_f: Option<PureState>,
    z: Option<f64>,
}

impl ResolvedSystem {
    fn phi_f(&self) -> Result<&PureState> {
        self.phi_f.as_ref().ok_or(Error::MissingField {
            field: "final_state",
        })
    }
}

/// `φi ⊗ meter` followed by the CNOT matching the meter axis.
pub fn weak_measurement_circuit(phi_i: &PureState, meter: MeterPrep) -> Result<PureState> {
    let psi = qstate::tensor(phi_i, &qstate::prepare_meter(meter))?;
    qstate::apply_cnot(&psi, 0, 1, meter.axis())
}

/// `φi ⊗ meter1 ⊗ meter2` with one CNOT (of each meter's axis) from the
/// system to each meter, applied in `order`.
pub fn two_meter_circuit(
    phi_i: &PureState,
    meter1: MeterPrep,
    meter2: MeterPrep,
    order: InteractionOrder,
) -> Result<PureState> {
    let psi = qstate::tensor(phi_i, &qstate::prepare_meter(meter1))?;
    let psi = qstate::tensor(&psi, &qstate::prepare_meter(meter2))?;
    let first = |s: &PureState| qstate::apply_cnot(s, 0, 1, meter1.axis());
    let second = |s: &PureState| qstate::apply_cnot(s, 0, 2, meter2.axis());
    match order {
        InteractionOrder::FirstMeterFirst => second(&first(&psi)?),
        InteractionOrder::SecondMeterFirst => first(&second(&psi)?),
    }
}

/// `φi ⊗ |0⟩` after the `σz ⊗ σx` coupling for `delta_t`.
pub fn probe_circuit(phi_i: &PureState, delta_t: f64, mode: CouplingMode) -> Result<PureState> {
    let psi = qstate::tensor(phi_i, &PureState::basis(1, 0)?)?;
    qstate::apply_weak_coupling(&psi, 0, 1, delta_t, mode)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeterReport {
    pub slot: usize,
    pub prep: MeterPrep,
    /// Sampled estimate; `None` when there were no usable shots.
    pub sampled: Option<Estimate>,
    /// Infinite-shot value of the same estimator.
    pub exact: Option<f64>,
    /// `⟨σ⟩` of `φi` without postselection, the weak value with it.
    pub theory: Option<f64>,
    /// Exact meter asymmetry before rescaling.
    pub exact_raw_asymmetry: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuccessReport {
    pub success_count: u64,
    pub measured: f64,
    /// Exact probability of the `f` branch.
    pub exact: f64,
    /// `|⟨φf|φi⟩|²`, equal to `1/(z²+1)` for the anomaly pair.
    pub theory: f64,
    /// Binomial standard error of `measured` around `exact`.
    pub stderr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeReport {
    pub mode: CouplingMode,
    pub delta_t: f64,
    /// Complex effective field `⟨φf|σz|φi⟩/⟨φf|φi⟩`.
    pub mean_field: WeakValue,
    /// `P(probe = 1 | f)` from the exact distribution.
    pub exact_rate: f64,
    /// Closed form of the same rate for the chosen coupling mode.
    pub closed_form_rate: f64,
    /// `(δt·|field|)²`.
    pub first_order_rate: f64,
    pub sampled_rate: Option<f64>,
    pub sampled_stderr: Option<f64>,
    /// `P(probe = 1)` with no postselection.
    pub unpostselected_rate: f64,
    /// `(δt·⟨σz⟩)²`, the mean-field prediction without postselection.
    pub unpostselected_mean_field_rate: f64,
    /// `‖(⟨φf| ⊗ 1)ψ‖² / |⟨φf|φi⟩|² − 1` before renormalization.
    pub branch_norm_excess: f64,
    /// Runs needed to resolve the field with weak measurements at `Δw = 1`.
    pub weak_measurement_runs: Option<u64>,
    /// Runs needed to observe the enhanced flip rate dynamically.
    pub dynamical_runs: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    /// Exact postselected asymmetry divided by the rescaling factor.
    pub ratio: f64,
    pub deviation: f64,
    /// `deviation / previous deviation`.
    pub successive_ratio: Option<f64>,
    /// `log(dev_prev/dev) / log(ε_prev/ε)`.
    pub fitted_order: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Flags {
    pub validity: Option<Validity>,
    pub empty_postselection: bool,
    pub orthogonal: bool,
    pub strong_coupling: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Discrepancy {
    /// `max |exact − first order|` over the `f` outcomes.
    pub first_order: Option<f64>,
    /// `max |sampled − exact|` over the meter estimates.
    pub sampled_vs_exact: Option<f64>,
    /// `max |exact − theory|` over the meter estimates.
    pub exact_vs_theory: Option<f64>,
    /// Entrywise difference between the two interaction orders.
    pub order_swap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub n_shots: u64,
    pub z: Option<f64>,
    pub epsilon1: Option<f64>,
    pub epsilon2: Option<f64>,
    pub delta_t: Option<f64>,
    /// `⟨φi|σz|φi⟩`.
    pub expectation_z: f64,
    pub exact: OutcomeDistribution,
    pub counts: OutcomeCounts,
    pub success: Option<SuccessReport>,
    pub meters: Vec<MeterReport>,
    pub weak_z: Option<WeakValue>,
    pub weak_x: Option<WeakValue>,
    pub first_order: Option<FirstOrderProbs>,
    pub swapped_exact: Option<OutcomeDistribution>,
    pub probe: Option<ProbeReport>,
    pub sweep: Option<SweepPoint>,
    pub flags: Flags,
    pub discrepancy: Discrepancy,
}

impl RunResult {
    pub fn meter(&self, slot: usize) -> Option<&MeterReport> {
        self.meters.iter().find(|m| m.slot == slot)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub results: Vec<RunResult>,
}

impl ExperimentReport {
    pub fn any_empty_postselection(&self) -> bool {
        self.results.iter().any(|r| r.flags.empty_postselection)
    }
}

/// Dispatches on `spec.variant`.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    match spec.variant {
        Variant::WeakNoPostselect => run_weak_measurement(spec),
        Variant::WeakPostselect => run_postselected(spec),
        Variant::ConsistencyZZ => run_consistency(spec),
        Variant::SimultaneityZX | Variant::SimultaneityXZ => run_simultaneity(spec),
        Variant::DynamicalProbe => run_dynamical(spec),
        Variant::ConvergenceSweep => run_convergence_sweep(spec),
    }
}

fn expect_variant(spec: &ExperimentSpec, allowed: &[Variant]) -> Result<ResolvedSystem> {
    if !allowed.contains(&spec.variant) {
        return Err(Error::InvalidSpec {
            field: "experiment",
            constraint: "variant does not match the requested protocol",
        });
    }
    spec.validate()?;
    spec.resolve_system()
}

fn base_result(
    plan: &ShotPlan,
    sys: &ResolvedSystem,
    exact: OutcomeDistribution,
    counts: OutcomeCounts,
) -> Result<RunResult> {
    Ok(RunResult {
        seed: plan.master_seed(),
        n_shots: plan.n_shots(),
        z: sys.z,
        epsilon1: None,
        epsilon2: None,
        delta_t: None,
        expectation_z: qstate::pauli_expectation(&sys.phi_i, 0, PauliAxis::Z)?,
        exact,
        counts,
        success: None,
        meters: Vec::new(),
        weak_z: None,
        weak_x: None,
        first_order: None,
        swapped_exact: None,
        probe: None,
        sweep: None,
        flags: Flags::default(),
        discrepancy: Discrepancy::default(),
    })
}

fn weak_or_flag(
    sys: &ResolvedSystem,
    axis: PauliAxis,
    flags: &mut Flags,
) -> Result<Option<WeakValue>> {
    match analysis::weak_value(&sys.phi_i, sys.phi_f()?, axis) {
        Ok(w) => Ok(Some(w)),
        Err(Error::OrthogonalPrePost { .. }) => {
            flags.orthogonal = true;
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn success_report(
    exact: &OutcomeDistribution,
    ps: &Postselected,
    sys: &ResolvedSystem,
) -> Result<SuccessReport> {
    let p = exact.success_probability();
    let overlap = qstate::inner_product(sys.phi_f()?, &sys.phi_i)?;
    Ok(SuccessReport {
        success_count: ps.success_count(),
        measured: ps.success_fraction(),
        exact: p,
        theory: overlap.norm_sqr(),
        stderr: libm::sqrt(p * (1.0 - p) / ps.n_shots() as f64),
    })
}

fn postselected_meter(
    exact: &OutcomeDistribution,
    ps: &Postselected,
    slot: usize,
    prep: MeterPrep,
    theory: Option<f64>,
    rescale: Rescale,
    flags: &mut Flags,
) -> Result<MeterReport> {
    let eps = prep.epsilon();
    let sampled = match analysis::postselected_estimate(ps, slot, eps, rescale) {
        Ok(e) => Some(e),
        Err(Error::EmptyPostselection) => {
            flags.empty_postselection = true;
            None
        }
        Err(e) => return Err(e),
    };
    let exact_value = match analysis::exact_postselected_value(exact, slot, eps, rescale) {
        Ok(v) => Some(v),
        Err(Error::EmptyPostselection) => None,
        Err(e) => return Err(e),
    };
    Ok(MeterReport {
        slot,
        prep,
        sampled,
        exact: exact_value,
        theory,
        exact_raw_asymmetry: exact_value.map(|v| v * rescale.factor(eps)),
    })
}

fn summarize(result: &mut RunResult) {
    let diffs = |f: &dyn Fn(&MeterReport) -> Option<f64>| {
        result.meters.iter().filter_map(f).reduce(f64::max)
    };
    result.discrepancy.sampled_vs_exact = diffs(&|m| Some(libm::fabs(m.sampled?.value - m.exact?)));
    result.discrepancy.exact_vs_theory = diffs(&|m| Some(libm::fabs(m.exact? - m.theory?)));
    if let Some(fo) = &result.first_order {
        result.discrepancy.first_order = Some(fo.max_discrepancy(&result.exact));
    }
}

fn measure(
    state: &PureState,
    layout: &MeasurementLayout,
    plan: &ShotPlan,
) -> Result<(OutcomeDistribution, OutcomeCounts, Postselected)> {
    let exact = sampling::born_distribution(state, layout)?;
    let counts = sampling::sample_counts(&exact, plan)?;
    let ps = sampling::postselect(&counts);
    Ok((exact, counts, ps))
}

/// Indirect measurement of `σz` without postselection, rescaled by `1/cos θ`.
///
/// The system slot is recorded in the computational basis and ignored by the
/// estimator.
pub fn run_weak_measurement(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let sys = expect_variant(spec, &[Variant::WeakNoPostselect])?;
    let prep = spec.meter1.expect("validated").prep(PauliAxis::Z)?;
    let state = weak_measurement_circuit(&sys.phi_i, prep)?;
    let layout = MeasurementLayout::computational(&[PauliAxis::Z])?;
    let (exact, counts, _) = measure(&state, &layout, &spec.plan)?;

    let sampled = analysis::rescaled_estimate(&counts, 1, prep.theta())?;
    let exact_value = analysis::exact_rescaled_value(&exact, 1, prep.theta())?;
    let mut result = base_result(&spec.plan, &sys, exact, counts)?;
    result.epsilon1 = Some(prep.epsilon());
    result.meters.push(MeterReport {
        slot: 1,
        prep,
        sampled: Some(sampled),
        exact: Some(exact_value),
        theory: Some(result.expectation_z),
        exact_raw_asymmetry: Some(exact_value * libm::cos(prep.theta())),
    });
    summarize(&mut result);
    Ok(ExperimentReport {
        spec: spec.clone(),
        results: alloc::vec![result],
    })
}

fn postselected_point(
    spec: &ExperimentSpec,
    sys: &ResolvedSystem,
    prep: MeterPrep,
    plan: &ShotPlan,
) -> Result<RunResult> {
    let phi_f = sys.phi_f()?;
    let state = weak_measurement_circuit(&sys.phi_i, prep)?;
    let layout = MeasurementLayout::new(phi_f, &[PauliAxis::Z])?;
    let (exact, counts, ps) = measure(&state, &layout, plan)?;
    let mut result = base_result(plan, sys, exact, counts)?;
    result.epsilon1 = Some(prep.epsilon());
    let mut flags = Flags::default();
    result.weak_z = weak_or_flag(sys, PauliAxis::Z, &mut flags)?;
    result.weak_x = weak_or_flag(sys, PauliAxis::X, &mut flags)?;
    let wz = result.weak_z.map(|w| w.re);
    flags.validity = Some(analysis::validity_check(
        prep.epsilon(),
        sys.z.or(wz).unwrap_or(f64::INFINITY),
    ));
    result.success = Some(success_report(&result.exact, &ps, sys)?);
    let meter = postselected_meter(&result.exact, &ps, 1, prep, wz, spec.rescale, &mut flags)?;
    result.meters.push(meter);
    if !flags.orthogonal {
        result.first_order = Some(analysis::first_order_probs(
            &sys.phi_i,
            phi_f,
            FirstOrderConfig::TwoQubitZ,
            prep.epsilon(),
            None,
        )?);
    }
    result.flags = flags;
    summarize(&mut result);
    Ok(result)
}

/// Two-qubit weak measurement postselected on `φf`; the rescaled asymmetry
/// estimates the weak value of `σz`.
pub fn run_postselected(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let sys = expect_variant(spec, &[Variant::WeakPostselect])?;
    let prep = spec.meter1.expect("validated").prep(PauliAxis::Z)?;
    let result = postselected_point(spec, &sys, prep, &spec.plan)?;
    Ok(ExperimentReport {
        spec: spec.clone(),
        results: alloc::vec![result],
    })
}

fn two_meter_run(
    spec: &ExperimentSpec,
    sys: &ResolvedSystem,
    axes: [PauliAxis; 2],
    order: InteractionOrder,
    config: FirstOrderConfig,
) -> Result<RunResult> {
    let phi_f = sys.phi_f()?;
    let p1 = spec.meter1.expect("validated").prep(axes[0])?;
    let p2 = spec.meter2.expect("validated").prep(axes[1])?;
    let layout = MeasurementLayout::new(phi_f, &axes)?;
    let state = two_meter_circuit(&sys.phi_i, p1, p2, order)?;
    let (exact, counts, ps) = measure(&state, &layout, &spec.plan)?;

    let mut result = base_result(&spec.plan, sys, exact, counts)?;
    result.epsilon1 = Some(p1.epsilon());
    result.epsilon2 = Some(p2.epsilon());
    let mut flags = Flags::default();
    result.weak_z = weak_or_flag(sys, PauliAxis::Z, &mut flags)?;
    result.weak_x = weak_or_flag(sys, PauliAxis::X, &mut flags)?;
    let theory = |axis| match axis {
        PauliAxis::Z => result.weak_z.map(|w| w.re),
        PauliAxis::X => result.weak_x.map(|w| w.re),
    };
    let (t1, t2) = (theory(axes[0]), theory(axes[1]));
    let wz = sys
        .z
        .or(result.weak_z.map(|w| w.re))
        .unwrap_or(f64::INFINITY);
    let worst = f64::max(p1.epsilon(), p2.epsilon());
    flags.validity = Some(analysis::validity_check(worst, wz));
    result.success = Some(success_report(&result.exact, &ps, sys)?);
    let m1 = postselected_meter(&result.exact, &ps, 1, p1, t1, spec.rescale, &mut flags)?;
    let m2 = postselected_meter(&result.exact, &ps, 2, p2, t2, spec.rescale, &mut flags)?;
    result.meters.extend([m1, m2]);
    if !flags.orthogonal {
        result.first_order = Some(analysis::first_order_probs(
            &sys.phi_i,
            phi_f,
            config,
            p1.epsilon(),
            Some(p2.epsilon()),
        )?);
    }
    result.flags = flags;
    Ok(result)
}

/// Two Z meters on the same system; both postselected marginals should
/// return the same weak value.
pub fn run_consistency(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let sys = expect_variant(spec, &[Variant::ConsistencyZZ])?;
    let mut result = two_meter_run(
        spec,
        &sys,
        [PauliAxis::Z, PauliAxis::Z],
        InteractionOrder::FirstMeterFirst,
        FirstOrderConfig::ThreeQubitZZ,
    )?;
    summarize(&mut result);
    Ok(ExperimentReport {
        spec: spec.clone(),
        results: alloc::vec![result],
    })
}

/// Z meter on qubit 1 and X meter on qubit 2. `SimultaneityZX` couples the Z
/// meter first, `SimultaneityXZ` the X meter first; the exact distribution of
/// the other order is reported alongside.
pub fn run_simultaneity(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let sys = expect_variant(spec, &[Variant::SimultaneityZX, Variant::SimultaneityXZ])?;
    let (order, other) = match spec.variant {
        Variant::SimultaneityZX => (
            InteractionOrder::FirstMeterFirst,
            InteractionOrder::SecondMeterFirst,
        ),
        _ => (
            InteractionOrder::SecondMeterFirst,
            InteractionOrder::FirstMeterFirst,
        ),
    };
    let axes = [PauliAxis::Z, PauliAxis::X];
    let mut result = two_meter_run(spec, &sys, axes, order, FirstOrderConfig::ThreeQubitZX)?;
    let p1 = spec.meter1.expect("validated").prep(axes[0])?;
    let p2 = spec.meter2.expect("validated").prep(axes[1])?;
    let swapped = sampling::born_distribution(
        &two_meter_circuit(&sys.phi_i, p1, p2, other)?,
        result.exact.layout(),
    )?;
    result.discrepancy.order_swap = Some(result.exact.max_abs_difference(&swapped)?);
    result.swapped_exact = Some(swapped);
    summarize(&mut result);
    Ok(ExperimentReport {
        spec: spec.clone(),
        results: alloc::vec![result],
    })
}

/// `P(probe = 1 | f)` for the coupling mode, from the complex field `F`:
/// `sin²δt|F|²/(cos²δt + sin²δt|F|²)` exactly, `δt²|F|²/(1 + δt²|F|²)` at first order.
pub fn conditional_flip_rate(field: WeakValue, delta_t: f64, mode: CouplingMode) -> f64 {
    let f2 = field.norm() * field.norm();
    let (keep, mix) = match mode {
        CouplingMode::Exact => (libm::cos(delta_t), libm::sin(delta_t)),
        CouplingMode::FirstOrder => (1.0, delta_t),
    };
    let flip = mix * mix * f2;
    flip / (keep * keep + flip)
}

/// Probe qubit coupled through `σz ⊗ σx` between pre- and postselection; the
/// conditional flip rate of the probe reveals the postselected mean field.
pub fn run_dynamical(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let sys = expect_variant(spec, &[Variant::DynamicalProbe])?;
    let phi_f = *sys.phi_f()?;
    let delta_t = spec.delta_t.expect("validated");
    let state = probe_circuit(&sys.phi_i, delta_t, spec.coupling)?;
    let layout = MeasurementLayout::new(&phi_f, &[PauliAxis::Z])?;
    let (exact, counts, ps) = measure(&state, &layout, &spec.plan)?;

    let mut result = base_result(&spec.plan, &sys, exact, counts)?;
    result.delta_t = Some(delta_t);
    let mut flags = Flags::default();
    result.weak_z = weak_or_flag(&sys, PauliAxis::Z, &mut flags)?;
    result.weak_x = weak_or_flag(&sys, PauliAxis::X, &mut flags)?;
    let success = success_report(&result.exact, &ps, &sys)?;
    result.success = Some(success);
    if ps.is_empty() {
        flags.empty_postselection = true;
    }

    if let Some(field) = result.weak_z {
        flags.strong_coupling = delta_t * field.norm() >= WEAK_COUPLING_LIMIT;
        let (f0, f1) = result.exact.meter_tally(1, true)?;
        let exact_rate = f1 / (f0 + f1);
        let (n0, n1) = ps.counts().meter_tally(1)?;
        let sampled_rate = (n0 + n1 > 0).then(|| n1 as f64 / (n0 + n1) as f64);
        // Rate variance given N_f, averaged over a binomial N_f.
        let expected_nf = spec.plan.n_shots() as f64 * success.exact;
        let sampled_stderr = sampled_rate.map(|_| {
            libm::sqrt(
                exact_rate * (1.0 - exact_rate) / expected_nf
                    * (1.0 + (1.0 - success.exact) / expected_nf),
            )
        });

        let (u0, u1) = result.exact.meter_tally(1, false)?;
        let overlap_sqr = success.theory;
        let branch = result.exact.success_probability() * result.exact.pre_normalization_norm_sqr();
        let first_order_rate = (delta_t * field.norm()) * (delta_t * field.norm());
        let mean_field = delta_t * result.expectation_z;
        result.probe = Some(ProbeReport {
            mode: spec.coupling,
            delta_t,
            mean_field: field,
            exact_rate,
            closed_form_rate: conditional_flip_rate(field, delta_t, spec.coupling),
            first_order_rate,
            sampled_rate,
            sampled_stderr,
            unpostselected_rate: u1 / (u0 + u1),
            unpostselected_mean_field_rate: mean_field * mean_field,
            branch_norm_excess: branch / overlap_sqr - 1.0,
            weak_measurement_runs: analysis::required_runs(field.re, 1.0).ok(),
            dynamical_runs: analysis::dynamical_required_runs(overlap_sqr, first_order_rate),
        });
    }
    result.flags = flags;
    summarize(&mut result);
    Ok(ExperimentReport {
        spec: spec.clone(),
        results: alloc::vec![result],
    })
}

/// Exact postselected ratio and its deviation from the weak value for each `ε`.
pub fn convergence_table(
    phi_i: &PureState,
    phi_f: &PureState,
    epsilons: &[f64],
    rescale: Rescale,
) -> Result<Vec<SweepPoint>> {
    let target = analysis::weak_value(phi_i, phi_f, PauliAxis::Z)?.re;
    let layout = MeasurementLayout::new(phi_f, &[PauliAxis::Z])?;
    let mut rows: Vec<SweepPoint> = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let prep = MeterPrep::weak(eps, PauliAxis::Z)?;
        let dist = sampling::born_distribution(&weak_measurement_circuit(phi_i, prep)?, &layout)?;
        let ratio = analysis::exact_postselected_value(&dist, 1, eps, rescale)?;
        let deviation = libm::fabs(ratio - target);
        let (successive_ratio, fitted_order) = match rows.last() {
            Some(prev) if prev.deviation > 0.0 && deviation > 0.0 => (
                Some(deviation / prev.deviation),
                Some(libm::log(prev.deviation / deviation) / libm::log(prev.epsilon / eps)),
            ),
            _ => (None, None),
        };
        rows.push(SweepPoint {
            epsilon: eps,
            ratio,
            deviation,
            successive_ratio,
            fitted_order,
        });
    }
    Ok(rows)
}

/// One postselected run per `ε` in `spec.sweep_epsilons`, each sampled with
/// an independent child seed, plus the exact convergence table.
pub fn run_convergence_sweep(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let sys = expect_variant(spec, &[Variant::ConvergenceSweep])?;
    let table = match analysis::weak_value(&sys.phi_i, sys.phi_f()?, PauliAxis::Z) {
        Ok(_) => Some(convergence_table(
            &sys.phi_i,
            sys.phi_f()?,
            &spec.sweep_epsilons,
            spec.rescale,
        )?),
        Err(Error::OrthogonalPrePost { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut results = Vec::with_capacity(spec.sweep_epsilons.len());
    for (k, &eps) in spec.sweep_epsilons.iter().enumerate() {
        let prep = MeterPrep::weak(eps, PauliAxis::Z)?;
        let mut r = postselected_point(spec, &sys, prep, &spec.plan.child(k as u64))?;
        r.sweep = table.as_ref().map(|t| t[k]);
        results.push(r);
    }
    Ok(ExperimentReport {
        spec: spec.clone(),
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{Label, Outcome};

    fn plan(n: u64) -> ShotPlan {
        ShotPlan::new(n, 42).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(Variant::from_name(v.name()), Some(v));
        }
        assert_eq!(Variant::from_name("nope"), None);
    }

    #[test]
    fn deterministic_direct_measurement() {
        let spec = ExperimentSpec::new(
            Variant::WeakNoPostselect,
            SystemSpec::Explicit {
                initial: [c(1.0, 0.0), c(0.0, 0.0)],
                final_state: None,
            },
            plan(1000),
        )
        .with_theta(0.0);
        let r = &run(&spec).unwrap().results[0];
        let est = r.meter(1).unwrap().sampled.unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.stderr_exact, 0.0);
    }

    #[test]
    fn symmetric_state_has_zero_exact_estimate() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        for theta in [0.0, 0.5, 1.2, FRAC_PI_2 - 0.01] {
            let spec = ExperimentSpec::new(
                Variant::WeakNoPostselect,
                SystemSpec::Explicit {
                    initial: [c(h, 0.0), c(h, 0.0)],
                    final_state: None,
                },
                plan(100),
            )
            .with_theta(theta);
            let r = &run(&spec).unwrap().results[0];
            assert!(r.meter(1).unwrap().exact.unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn weak_measurement_sampled_within_band() {
        let spec = ExperimentSpec::new(
            Variant::WeakNoPostselect,
            SystemSpec::Explicit {
                initial: [c(0.6, 0.0), c(0.8, 0.0)],
                final_state: None,
            },
            plan(1_000_000),
        )
        .with_theta(FRAC_PI_2 - 0.1);
        let r = &run(&spec).unwrap().results[0];
        let m = r.meter(1).unwrap();
        let est = m.sampled.unwrap();
        assert!(
            (est.value + 0.28).abs() <= 4.0 * est.stderr_exact,
            "{est:?}"
        );
        assert!((m.exact.unwrap() + 0.28).abs() < 1e-12);
    }

    #[test]
    fn postselected_zero_z_is_ordinary_expectation() {
        let spec = ExperimentSpec::new(
            Variant::WeakPostselect,
            SystemSpec::Anomaly { z: 0.0 },
            plan(10_000),
        )
        .with_epsilons(0.05, None);
        let r = &run(&spec).unwrap().results[0];
        assert!(r.meter(1).unwrap().exact.unwrap().abs() < 1e-12);
    }

    #[test]
    fn postselected_anomaly_z5() {
        let spec = ExperimentSpec::new(
            Variant::WeakPostselect,
            SystemSpec::Anomaly { z: 5.0 },
            plan(1_000_000),
        )
        .with_epsilons(0.02, None);
        let r = &run(&spec).unwrap().results[0];
        let m = r.meter(1).unwrap();
        // Exact-distribution value, frozen from an independent dense oracle.
        assert!((m.exact.unwrap() - 4.987_696_600_502_478).abs() < 1e-9);
        let est = m.sampled.unwrap();
        assert!((est.value - 5.0).abs() <= 4.0 * est.stderr_exact, "{est:?}");
        let s = r.success.unwrap();
        assert!((s.measured - 1.0 / 26.0).abs() <= 4.0 * s.stderr + 2.0 * 0.02 * 0.02);
        assert!(r.flags.validity.unwrap().valid);
    }

    #[test]
    fn invalid_expansion_is_flagged_and_biased() {
        let spec = ExperimentSpec::new(
            Variant::WeakPostselect,
            SystemSpec::Anomaly { z: 5.0 },
            plan(100_000),
        )
        .with_epsilons(0.5, None);
        let r = &run(&spec).unwrap().results[0];
        let v = r.flags.validity.unwrap();
        assert!(!v.valid && (v.product - 2.5).abs() < 1e-12);
        assert!((r.meter(1).unwrap().exact.unwrap() - 5.0).abs() > 1.0);
    }

    #[test]
    fn orthogonal_pair_is_flagged() {
        let spec = ExperimentSpec::new(
            Variant::WeakPostselect,
            SystemSpec::Explicit {
                initial: [c(1.0, 0.0), c(0.0, 0.0)],
                final_state: Some([c(0.0, 0.0), c(1.0, 0.0)]),
            },
            plan(1000),
        )
        .with_epsilons(0.05, None);
        let r = &run(&spec).unwrap().results[0];
        assert!(r.flags.orthogonal);
        assert!(r.weak_z.is_none() && r.first_order.is_none());
    }

    #[test]
    fn consistency_equal_strengths_agree() {
        let spec = ExperimentSpec::new(
            Variant::ConsistencyZZ,
            SystemSpec::Explicit {
                initial: [c(0.6, 0.0), c(0.0, 0.8)],
                final_state: Some([c(0.8, 0.0), c(-0.6, 0.0)]),
            },
            plan(1000),
        )
        .with_epsilons(0.03, Some(0.03));
        let r = &run(&spec).unwrap().results[0];
        let a1 = r.meter(1).unwrap().exact_raw_asymmetry.unwrap();
        let a2 = r.meter(2).unwrap().exact_raw_asymmetry.unwrap();
        assert!((a1 - a2).abs() <= 3.0 * (0.06f64).powi(2));
    }

    #[test]
    fn consistency_ratio_of_asymmetries() {
        let spec = ExperimentSpec::new(
            Variant::ConsistencyZZ,
            SystemSpec::Anomaly { z: 2.0 },
            plan(1000),
        )
        .with_epsilons(0.04, Some(0.02));
        let r = &run(&spec).unwrap().results[0];
        let (m1, m2) = (r.meter(1).unwrap(), r.meter(2).unwrap());
        for m in [m1, m2] {
            assert!((m.exact.unwrap() - 2.0).abs() < 8.0 * 0.04f64.powi(2) * 8.0);
        }
        let ratio = m1.exact_raw_asymmetry.unwrap() / m2.exact_raw_asymmetry.unwrap();
        assert!((ratio - 2.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn second_meter_without_information_reduces_to_two_qubits() {
        let pair = analysis::anomaly_pair(3.0).unwrap();
        let m1 = MeterPrep::weak(0.05, PauliAxis::Z).unwrap();
        let m2 = MeterPrep::new(FRAC_PI_2, PauliAxis::Z).unwrap();
        let three = sampling::born_distribution(
            &two_meter_circuit(&pair.phi_i, m1, m2, InteractionOrder::FirstMeterFirst).unwrap(),
            &MeasurementLayout::new(&pair.phi_f, &[PauliAxis::Z, PauliAxis::Z]).unwrap(),
        )
        .unwrap();
        let two = sampling::born_distribution(
            &weak_measurement_circuit(&pair.phi_i, m1).unwrap(),
            &MeasurementLayout::new(&pair.phi_f, &[PauliAxis::Z]).unwrap(),
        )
        .unwrap();
        for (o, p) in two.iter() {
            let l = o.labels();
            let marg: f64 = [Label::Zero, Label::One]
                .iter()
                .map(|&b| three.probability(&Outcome::new(&[l[0], l[1], b])))
                .sum();
            assert!((marg - p).abs() < 1e-15, "{o}: {marg} vs {p}");
        }
    }

    #[test]
    fn simultaneity_plus_plus() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let spec = ExperimentSpec::new(
            Variant::SimultaneityZX,
            SystemSpec::Explicit {
                initial: [c(h, 0.0), c(h, 0.0)],
                final_state: Some([c(h, 0.0), c(h, 0.0)]),
            },
            plan(1000),
        )
        .with_epsilons(0.05, Some(0.05));
        let r = &run(&spec).unwrap().results[0];
        assert!((r.weak_x.unwrap().re - 1.0).abs() < 1e-15);
        assert!(r.weak_z.unwrap().re.abs() < 1e-15);
        let az = r.meter(1).unwrap().exact_raw_asymmetry.unwrap();
        let ax = r.meter(2).unwrap().exact_raw_asymmetry.unwrap();
        assert!(az.abs() < 1e-12);
        assert!((ax - 0.05).abs() < 3.0 * 0.05 * 0.05, "{ax}");
    }

    #[test]
    fn simultaneity_orders_agree_to_first_order() {
        for variant in [Variant::SimultaneityZX, Variant::SimultaneityXZ] {
            let spec = ExperimentSpec::new(variant, SystemSpec::Anomaly { z: 3.0 }, plan(1000))
                .with_epsilons(0.05, Some(0.05));
            let r = &run(&spec).unwrap().results[0];
            assert!(r.discrepancy.order_swap.unwrap() <= 3.0 * 0.05 * 0.05);
            assert!((r.meter(1).unwrap().exact.unwrap() - 3.0).abs() < 0.1);
            assert!((r.meter(2).unwrap().exact.unwrap() - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn dynamical_zero_time() {
        let spec = ExperimentSpec::new(
            Variant::DynamicalProbe,
            SystemSpec::Anomaly { z: 100.0 },
            plan(1000),
        )
        .with_delta_t(0.0, CouplingMode::Exact);
        let p = run(&spec).unwrap().results[0].probe.unwrap();
        assert_eq!(p.exact_rate, 0.0);
        assert_eq!(p.closed_form_rate, 0.0);
    }

    #[test]
    fn dynamical_first_order_norm_excess() {
        for (z, dt) in [(100.0, 1e-3), (3.0, 0.01), (-2.0, 0.05)] {
            let spec = ExperimentSpec::new(
                Variant::DynamicalProbe,
                SystemSpec::Anomaly { z },
                plan(1000),
            )
            .with_delta_t(dt, CouplingMode::FirstOrder);
            let r = &run(&spec).unwrap().results[0];
            let p = r.probe.unwrap();
            let f = r.weak_z.unwrap().norm();
            assert!((p.branch_norm_excess - dt * dt * f * f).abs() < 1e-10);
            assert!((p.exact_rate - p.closed_form_rate).abs() < 1e-12);
        }
    }

    #[test]
    fn dynamical_missing_delta_t() {
        let spec = ExperimentSpec::new(
            Variant::DynamicalProbe,
            SystemSpec::Anomaly { z: 100.0 },
            plan(1000),
        );
        assert_eq!(
            run(&spec).unwrap_err(),
            Error::MissingField { field: "delta_t" }
        );
    }

    #[test]
    fn sweep_edge_cases() {
        let spec = ExperimentSpec::new(
            Variant::ConvergenceSweep,
            SystemSpec::Anomaly { z: 0.0 },
            plan(1000),
        )
        .with_sweep(&[0.1, 0.05, 0.025]);
        let rep = run(&spec).unwrap();
        assert_eq!(rep.results.len(), 3);
        for r in &rep.results {
            assert!(r.sweep.unwrap().deviation < 1e-12);
        }

        let spec = ExperimentSpec::new(
            Variant::ConvergenceSweep,
            SystemSpec::Anomaly { z: 3.0 },
            plan(1000),
        )
        .with_sweep(&[0.05]);
        let rep = run(&spec).unwrap();
        assert_eq!(rep.results.len(), 1);
        assert!(rep.results[0].sweep.unwrap().successive_ratio.is_none());

        let bad = spec.clone().with_sweep(&[0.05, 0.1]);
        assert!(matches!(run(&bad), Err(Error::InvalidSpec { .. })));
    }

    #[test]
    fn convergence_is_quadratic_in_epsilon() {
        // The exact ratio is even in ε, so the deviation falls by four per halving.
        let pair = analysis::anomaly_pair(3.0).unwrap();
        let t = convergence_table(
            &pair.phi_i,
            &pair.phi_f,
            &[0.1, 0.05, 0.025],
            Rescale::Epsilon,
        )
        .unwrap();
        let frozen = [
            0.063_675_076_623_953_33,
            0.016_165_906_326_147_45,
            0.004_057_223_660_641_096,
        ];
        for (row, want) in t.iter().zip(frozen) {
            assert!((row.deviation - want).abs() < 1e-12, "{row:?}");
        }
        for row in &t[1..] {
            assert!((row.fitted_order.unwrap() - 2.0).abs() < 0.05);
        }
        // Linear bound with C taken at the largest ε holds at all smaller ε.
        let c_lin = t[0].deviation / t[0].epsilon;
        for row in &t {
            assert!(row.deviation <= c_lin * row.epsilon);
        }
    }

    #[test]
    fn spec_validation() {
        let spec = ExperimentSpec::new(
            Variant::WeakPostselect,
            SystemSpec::Anomaly { z: 3.0 },
            plan(10),
        )
        .with_epsilons(2.0, None);
        assert!(matches!(
            spec.validate(),
            Err(Error::InvalidSpec {
                field: "epsilon1",
                ..
            })
        ));

        let spec = ExperimentSpec::new(
            Variant::ConsistencyZZ,
            SystemSpec::Anomaly { z: 3.0 },
            plan(10),
        )
        .with_epsilons(0.1, None);
        assert_eq!(
            spec.validate(),
            Err(Error::MissingField { field: "epsilon2" })
        );

        let spec = ExperimentSpec::new(
            Variant::WeakPostselect,
            SystemSpec::Explicit {
                initial: [c(1.0, 0.0), c(0.0, 0.0)],
                final_state: None,
            },
            plan(10),
        )
        .with_epsilons(0.1, None);
        assert_eq!(
            spec.validate(),
            Err(Error::MissingField {
                field: "final_state"
            })
        );

        let spec = ExperimentSpec::new(
            Variant::WeakPostselect,
            SystemSpec::Anomaly { z: 3.0 },
            plan(10),
        )
        .with_epsilons(0.1, None);
        assert!(matches!(
            run_consistency(&spec),
            Err(Error::InvalidSpec { .. })
        ));
    }

    #[test]
    fn reports_are_deterministic() {
        let spec = ExperimentSpec::new(
            Variant::SimultaneityXZ,
            SystemSpec::Anomaly { z: 3.0 },
            plan(200_000),
        )
        .with_epsilons(0.05, Some(0.05));
        assert_eq!(run(&spec).unwrap(), run(&spec).unwrap());
    }
}
