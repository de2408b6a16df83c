use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the simulator and estimators can report.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Both amplitudes of a requested state are zero.
    NonNormalizable,
    /// Input amplitudes are not normalized and renormalization was not requested.
    NotNormalized {
        norm_sqr: f64,
    },
    /// An amplitude or parameter is NaN or infinite.
    NonFinite {
        what: &'static str,
    },
    TooManyQubits {
        requested: usize,
    },
    InvalidDimension {
        len: usize,
    },
    IndexOutOfRange {
        index: usize,
        n_qubits: usize,
    },
    ControlEqualsTarget {
        index: usize,
    },
    DimensionMismatch {
        left: usize,
        right: usize,
    },
    /// Meter angle outside `[0, π/2]`.
    InvalidStrength {
        theta: f64,
    },
    NegativeDuration {
        delta_t: f64,
    },
    EmptyDistribution,
    /// Rescaling by `1/cos θ` with `θ = π/2`.
    DegenerateStrength,
    EmptyCounts,
    EmptyPostselection,
    /// `|⟨φf|φi⟩|` below the orthogonality tolerance; the weak value is undefined.
    OrthogonalPrePost {
        overlap: f64,
    },
    NonPositivePrecision {
        delta_w: f64,
    },
    MissingField {
        field: &'static str,
    },
    InvalidSpec {
        field: &'static str,
        constraint: &'static str,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonNormalizable => write!(f, "state has zero norm and cannot be normalized"),
            Error::NotNormalized { norm_sqr } => {
                write!(f, "state is not normalized (norm² = {norm_sqr})")
            }
            Error::NonFinite { what } => write!(f, "{what} is not finite"),
            Error::TooManyQubits { requested } => {
                write!(f, "{requested} qubits requested, at most 3 are supported")
            }
            Error::InvalidDimension { len } => {
                write!(f, "{len} amplitudes do not describe 1 to 3 qubits")
            }
            Error::IndexOutOfRange { index, n_qubits } => {
                write!(f, "qubit index {index} out of range for {n_qubits} qubits")
            }
            Error::ControlEqualsTarget { index } => {
                write!(f, "control and target are both qubit {index}")
            }
            Error::DimensionMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            Error::InvalidStrength { theta } => {
                write!(f, "meter angle {theta} outside [0, π/2]")
            }
            Error::NegativeDuration { delta_t } => write!(f, "negative interaction time {delta_t}"),
            Error::EmptyDistribution => write!(f, "distribution has no probability mass"),
            Error::DegenerateStrength => {
                write!(f, "meter angle π/2 carries no information (cos θ = 0)")
            }
            Error::EmptyCounts => write!(f, "no counts recorded for the requested meter"),
            Error::EmptyPostselection => write!(f, "postselected ensemble is empty"),
            Error::OrthogonalPrePost { overlap } => write!(
                f,
                "pre- and postselected states are orthogonal (|overlap| = {overlap:e}); weak value undefined"
            ),
            Error::NonPositivePrecision { delta_w } => {
                write!(f, "target precision must be positive, got {delta_w}")
            }
            Error::MissingField { field } => write!(f, "missing required field `{field}`"),
            Error::InvalidSpec { field, constraint } => {
                write!(f, "field `{field}` violates constraint: {constraint}")
            }
        }
    }
}

impl core::error::Error for Error {}
