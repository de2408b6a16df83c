//! Pure states of one to three qubits and the handful of gates the weak
//! measurement protocols need.
//!
//! Qubit 0 is always the system; qubits 1 and 2 are meters or probes. Qubit 0
//! is the most significant bit of the amplitude index, so for three qubits the
//! amplitude of `|i j k⟩` lives at `4i + 2j + k`.
//!
//! Every operation takes its input by reference and returns a fresh state.

use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex64;

use crate::{Error, Result};

pub const MAX_QUBITS: usize = 3;
pub const MAX_DIM: usize = 1 << MAX_QUBITS;

/// Norm tolerance for states produced by unitary evolution.
pub const UNITARITY_TOL: f64 = 1e-12;
/// Norm tolerance for user-supplied amplitudes.
pub const INPUT_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A 2×2 complex matrix in row-major order.
pub type Gate1 = [[Complex64; 2]; 2];

/// Single-qubit Pauli axis used for meters, measurement bases and the probe dipole.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliAxis {
    Z,
    X,
}

impl PauliAxis {
    /// Eigenvector for bit value `bit`: `|0⟩, |1⟩` for Z and `|+⟩, |−⟩` for X.
    pub fn eigenvector(self, bit: usize) -> [Complex64; 2] {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match (self, bit & 1) {
            (PauliAxis::Z, 0) => [ONE, ZERO],
            (PauliAxis::Z, _) => [ZERO, ONE],
            (PauliAxis::X, 0) => [h, h],
            (PauliAxis::X, _) => [h, -h],
        }
    }

    pub fn matrix(self) -> Gate1 {
        match self {
            PauliAxis::Z => [[ONE, ZERO], [ZERO, -ONE]],
            PauliAxis::X => [[ZERO, ONE], [ONE, ZERO]],
        }
    }
}

pub fn hadamard() -> Gate1 {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

/// Preparation of a meter qubit at angle `θ`; `ε = π/2 − θ` is the weakness.
///
/// Both angles are stored so a meter built from `ε` divides by exactly that `ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeterPrep {
    theta: f64,
    epsilon: f64,
    axis: PauliAxis,
}

impl MeterPrep {
    pub fn new(theta: f64, axis: PauliAxis) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NonFinite { what: "theta" });
        }
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(Error::InvalidStrength { theta });
        }
        Ok(Self {
            theta,
            epsilon: FRAC_PI_2 - theta,
            axis,
        })
    }

    /// Meter at `θ = π/2 − epsilon`.
    pub fn weak(epsilon: f64, axis: PauliAxis) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(Error::NonFinite { what: "epsilon" });
        }
        if !(0.0..=FRAC_PI_2).contains(&epsilon) {
            return Err(Error::InvalidStrength {
                theta: FRAC_PI_2 - epsilon,
            });
        }
        Ok(Self {
            theta: FRAC_PI_2 - epsilon,
            epsilon,
            axis,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn axis(&self) -> PauliAxis {
        self.axis
    }
}

/// Whether the first-order weak coupling may be exercised or the unitary one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CouplingMode {
    /// `exp(−i δt σz ⊗ σx)`.
    #[default]
    Exact,
    /// `1 − i δt σz ⊗ σx`, not norm preserving.
    FirstOrder,
}

/// Whether `prepare_system` may rescale its inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalization {
    #[default]
    Strict,
    Renormalize,
}

/// Amplitude vector over 1–3 qubits. Unnormalized states are allowed but
/// carry a cleared `normalized` flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PureState {
    n_qubits: u8,
    amps: [Complex64; MAX_DIM],
    normalized: bool,
}

impl PureState {
    /// Wraps a raw amplitude slice of length 2, 4 or 8. The normalized flag is
    /// set when `Σ|a|²` is within [`UNITARITY_TOL`] of one.
    pub fn from_amplitudes(amplitudes: &[Complex64]) -> Result<Self> {
        let n_qubits = match amplitudes.len() {
            2 => 1,
            4 => 2,
            8 => 3,
            len => return Err(Error::InvalidDimension { len }),
        };
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::NonFinite { what: "amplitude" });
        }
        let mut amps = [ZERO; MAX_DIM];
        amps[..amplitudes.len()].copy_from_slice(amplitudes);
        let mut state = Self {
            n_qubits,
            amps,
            normalized: false,
        };
        state.normalized = libm::fabs(state.norm_sqr() - 1.0) <= UNITARITY_TOL;
        Ok(state)
    }

    /// Computational basis state `|index⟩` on `n_qubits` qubits.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits {
                requested: n_qubits,
            });
        }
        if index >= 1 << n_qubits {
            return Err(Error::IndexOutOfRange { index, n_qubits });
        }
        let mut amps = [ZERO; MAX_DIM];
        amps[index] = ONE;
        Ok(Self {
            n_qubits: n_qubits as u8,
            amps,
            normalized: true,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits as usize
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps[..self.dim()]
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes()[index]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes().iter().map(|a| a.norm_sqr()).sum()
    }

    /// Returns the renormalized state together with the norm² it had before.
    pub fn renormalized(&self) -> Result<(Self, f64)> {
        let norm_sqr = self.norm_sqr();
        if norm_sqr == 0.0 {
            return Err(Error::NonNormalizable);
        }
        let scale = 1.0 / libm::sqrt(norm_sqr);
        let mut out = *self;
        for a in out.amps[..self.dim()].iter_mut() {
            *a *= scale;
        }
        out.normalized = true;
        Ok((out, norm_sqr))
    }

    /// Bit value of `qubit` inside amplitude index `index`.
    #[inline]
    pub fn bit(&self, index: usize, qubit: usize) -> usize {
        (index >> (self.n_qubits() - 1 - qubit)) & 1
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits() {
            return Err(Error::IndexOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits(),
            });
        }
        Ok(())
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits() - 1 - qubit)
    }

    /// Euclidean distance between amplitude vectors of equal dimension.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.n_qubits(),
                right: other.n_qubits(),
            });
        }
        let d: f64 = self
            .amplitudes()
            .iter()
            .zip(other.amplitudes())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok(libm::sqrt(d))
    }
}

/// Single-qubit state `alpha|0⟩ + beta|1⟩`.
pub fn prepare_system(
    alpha: Complex64,
    beta: Complex64,
    normalization: Normalization,
) -> Result<PureState> {
    let state = PureState::from_amplitudes(&[alpha, beta])?;
    let norm_sqr = state.norm_sqr();
    if norm_sqr == 0.0 {
        return Err(Error::NonNormalizable);
    }
    if libm::fabs(norm_sqr - 1.0) <= INPUT_TOL {
        // Accepted inputs are brought to full precision.
        return Ok(state.renormalized()?.0);
    }
    match normalization {
        Normalization::Strict => Err(Error::NotNormalized { norm_sqr }),
        Normalization::Renormalize => Ok(state.renormalized()?.0),
    }
}

/// `cos(θ/2)|b0⟩ + sin(θ/2)|b1⟩` in the eigenbasis of the meter axis.
pub fn prepare_meter(prep: MeterPrep) -> PureState {
    let c = libm::cos(prep.theta / 2.0);
    let s = libm::sin(prep.theta / 2.0);
    let amps = match prep.axis {
        PauliAxis::Z => [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
        PauliAxis::X => [
            Complex64::new((c + s) * FRAC_1_SQRT_2, 0.0),
            Complex64::new((c - s) * FRAC_1_SQRT_2, 0.0),
        ],
    };
    let mut state = PureState::from_amplitudes(&amps).expect("two finite amplitudes");
    state.normalized = true;
    state
}

/// Kronecker product; qubits of `a` come first.
pub fn tensor(a: &PureState, b: &PureState) -> Result<PureState> {
    let n = a.n_qubits() + b.n_qubits();
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits { requested: n });
    }
    let mut amps = [ZERO; MAX_DIM];
    let db = b.dim();
    for (i, ai) in a.amplitudes().iter().enumerate() {
        for (j, bj) in b.amplitudes().iter().enumerate() {
            amps[i * db + j] = ai * bj;
        }
    }
    Ok(PureState {
        n_qubits: n as u8,
        amps,
        normalized: a.normalized && b.normalized,
    })
}

/// Applies a 2×2 matrix to one qubit.
pub fn apply_single_qubit(state: &PureState, qubit: usize, gate: &Gate1) -> Result<PureState> {
    state.check_qubit(qubit)?;
    let mask = state.mask(qubit);
    let mut out = *state;
    for i0 in (0..state.dim()).filter(|i| i & mask == 0) {
        let i1 = i0 | mask;
        let (a0, a1) = (state.amps[i0], state.amps[i1]);
        out.amps[i0] = gate[0][0] * a0 + gate[0][1] * a1;
        out.amps[i1] = gate[1][0] * a0 + gate[1][1] * a1;
    }
    Ok(out)
}

pub fn apply_pauli(state: &PureState, qubit: usize, axis: PauliAxis) -> Result<PureState> {
    apply_single_qubit(state, qubit, &axis.matrix())
}

fn check_pair(state: &PureState, a: usize, b: usize) -> Result<()> {
    state.check_qubit(a)?;
    state.check_qubit(b)?;
    if a == b {
        return Err(Error::ControlEqualsTarget { index: a });
    }
    Ok(())
}

fn cnot_z(state: &PureState, control: usize, target: usize) -> PureState {
    let (cm, tm) = (state.mask(control), state.mask(target));
    let mut out = *state;
    for i in (0..state.dim()).filter(|i| i & cm != 0 && i & tm == 0) {
        out.amps.swap(i, i | tm);
    }
    out
}

/// Controlled-NOT. With [`PauliAxis::X`] both control and target act in the
/// `|±⟩` basis, i.e. `(H⊗H)·CNOT·(H⊗H)`, which coincides with the ordinary
/// CNOT with control and target interchanged (see [`apply_cnot_x_swapped`]).
pub fn apply_cnot(
    state: &PureState,
    control: usize,
    target: usize,
    axis: PauliAxis,
) -> Result<PureState> {
    check_pair(state, control, target)?;
    match axis {
        PauliAxis::Z => Ok(cnot_z(state, control, target)),
        PauliAxis::X => {
            let h = hadamard();
            let s = apply_single_qubit(state, control, &h)?;
            let s = apply_single_qubit(&s, target, &h)?;
            let s = cnot_z(&s, control, target);
            let s = apply_single_qubit(&s, control, &h)?;
            apply_single_qubit(&s, target, &h)
        }
    }
}

/// CNOT^x through its second characterization: a Z-basis CNOT with the roles
/// of control and target swapped.
pub fn apply_cnot_x_swapped(state: &PureState, control: usize, target: usize) -> Result<PureState> {
    check_pair(state, control, target)?;
    Ok(cnot_z(state, target, control))
}

/// The probe interaction `σz(system) ⊗ σx(probe)` for a duration `delta_t`.
///
/// In [`CouplingMode::Exact`] this is `cos δt − i sin δt σz⊗σx`, using
/// `(σz⊗σx)² = 1`. [`CouplingMode::FirstOrder`] keeps only `1 − i δt σz⊗σx` and
/// returns an unnormalized state.
pub fn apply_weak_coupling(
    state: &PureState,
    system: usize,
    probe: usize,
    delta_t: f64,
    mode: CouplingMode,
) -> Result<PureState> {
    check_pair(state, system, probe)?;
    if !delta_t.is_finite() {
        return Err(Error::NonFinite { what: "delta_t" });
    }
    if delta_t < 0.0 {
        return Err(Error::NegativeDuration { delta_t });
    }
    let (keep, mix) = match mode {
        CouplingMode::Exact => (libm::cos(delta_t), libm::sin(delta_t)),
        CouplingMode::FirstOrder => (1.0, delta_t),
    };
    let (sm, pm) = (state.mask(system), state.mask(probe));
    let mut out = *state;
    for i in 0..state.dim() {
        // (σz ⊗ σx)|i⟩ = ±|i ^ probe⟩, sign from the system bit.
        let sign = if i & sm == 0 { 1.0 } else { -1.0 };
        let coupled = state.amps[i ^ pm] * sign;
        out.amps[i] = state.amps[i] * keep + Complex64::new(0.0, -mix) * coupled;
    }
    out.normalized = match mode {
        CouplingMode::Exact => state.normalized,
        CouplingMode::FirstOrder => delta_t == 0.0 && state.normalized,
    };
    Ok(out)
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn inner_product(a: &PureState, b: &PureState) -> Result<Complex64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::DimensionMismatch {
            left: a.n_qubits(),
            right: b.n_qubits(),
        });
    }
    Ok(a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// `⟨σ⟩` of one qubit, divided by the state's norm² so unnormalized inputs are
/// treated as their renormalized counterparts.
pub fn pauli_expectation(state: &PureState, qubit: usize, axis: PauliAxis) -> Result<f64> {
    let flipped = apply_pauli(state, qubit, axis)?;
    let norm_sqr = state.norm_sqr();
    if norm_sqr == 0.0 {
        return Err(Error::NonNormalizable);
    }
    Ok(inner_product(state, &flipped)?.re / norm_sqr)
}
