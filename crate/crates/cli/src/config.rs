//! TOML run configuration.
//!
//! A document holds flat experiment parameters, an optional `[output]` table
//! and an optional `[sweep]` table of parameter lists:
//!
//! ```toml
//! experiment = "WeakPostselect"
//! z = 3.0
//! epsilon1 = 0.05
//! n_shots = 100000
//! seed = 42
//!
//! [output]
//! path = "weak.csv"
//! format = "csv"
//! ```
//!
//! Unknown keys are rejected. Every key has a command-line override; see
//! [`Overrides`].

use serde::{Deserialize, Serialize};
use weakval_core::analysis::Rescale;
use weakval_core::experiments::{ExperimentSpec, Strength, SystemSpec, Variant};
use weakval_core::qstate::{CouplingMode, INPUT_TOL};
use weakval_core::rng;
use weakval_core::sampling::ShotPlan;
use weakval_core::Complex64;

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SHOTS: u64 = 100_000;
pub const SEED_ENV: &str = "WEAKVAL_SEED";

/// Two complex amplitudes as `[[re, im], [re, im]]`.
pub type Amplitudes = [[f64; 2]; 2];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CouplingName {
    #[default]
    Exact,
    FirstOrder,
}

impl From<CouplingName> for CouplingMode {
    fn from(c: CouplingName) -> Self {
        match c {
            CouplingName::Exact => CouplingMode::Exact,
            CouplingName::FirstOrder => CouplingMode::FirstOrder,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RescaleName {
    #[default]
    Epsilon,
    SinEpsilon,
}

impl From<RescaleName> for Rescale {
    fn from(r: RescaleName) -> Self {
        match r {
            RescaleName::Epsilon => Rescale::Epsilon,
            RescaleName::SinEpsilon => Rescale::SinEpsilon,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Parameter lists whose cartesian product the `sweep` subcommand runs.
/// Grid points are ordered with the last listed key varying fastest, in the
/// field order below.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon1: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon2: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta1: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_shots: Option<Vec<u64>>,
    /// Explicit per-point seeds; without it point `k` uses a seed derived
    /// from the base seed and `k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<Vec<u64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    /// Anomaly-pair weak value; exclusive with `initial`/`final`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Amplitudes>,
    #[serde(rename = "final", skip_serializing_if = "Option::is_none")]
    pub final_state: Option<Amplitudes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon2: Option<f64>,
    /// Meter angle for the first meter; exclusive with `epsilon1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_mode: Option<CouplingName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rescale: Option<RescaleName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Strictly decreasing list for `ConvergenceSweep`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// Command-line values that take precedence over the config document.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub variant: Option<String>,
    pub z: Option<f64>,
    pub initial: Option<Amplitudes>,
    pub final_state: Option<Amplitudes>,
    pub epsilon1: Option<f64>,
    pub epsilon2: Option<f64>,
    pub theta1: Option<f64>,
    pub delta_t: Option<f64>,
    pub coupling_mode: Option<CouplingName>,
    pub rescale: Option<RescaleName>,
    pub n_shots: Option<u64>,
    pub seed: Option<u64>,
    pub epsilons: Option<Vec<f64>>,
    pub out: Option<String>,
    pub format: Option<Format>,
}

/// Parses a TOML document, reporting syntax errors and unknown keys with a
/// 1-based line and column.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        let (line, column) = line_column(text, offset);
        CliError::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses `WEAKVAL_SEED`, if set.
pub fn env_seed(value: Option<&str>) -> Result<Option<u64>, CliError> {
    value
        .map(|v| {
            v.trim().parse::<u64>().map_err(|e| CliError::Argument {
                source_name: SEED_ENV.to_string(),
                message: format!("{v:?} is not an unsigned 64-bit integer ({e})"),
            })
        })
        .transpose()
}

/// Splits four comma-separated numbers `re0,im0,re1,im1` into amplitudes.
pub fn amplitudes_from_list(values: &[f64]) -> Option<Amplitudes> {
    match values {
        &[a, b, c, d] => Some([[a, b], [c, d]]),
        _ => None,
    }
}

impl RunConfig {
    /// Applies flags over file values.
    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
        set(&mut self.experiment, &o.variant);
        set(&mut self.z, &o.z);
        set(&mut self.initial, &o.initial);
        set(&mut self.final_state, &o.final_state);
        set(&mut self.epsilon1, &o.epsilon1);
        set(&mut self.epsilon2, &o.epsilon2);
        set(&mut self.theta1, &o.theta1);
        set(&mut self.delta_t, &o.delta_t);
        set(&mut self.coupling_mode, &o.coupling_mode);
        set(&mut self.rescale, &o.rescale);
        set(&mut self.n_shots, &o.n_shots);
        set(&mut self.seed, &o.seed);
        set(&mut self.epsilons, &o.epsilons);
        if o.out.is_some() || o.format.is_some() {
            let out = self.output.get_or_insert_with(Default::default);
            set(&mut out.path, &o.out);
            set(&mut out.format, &o.format);
        }
        // A value set by flag replaces the one it excludes from the file.
        if o.z.is_some() {
            self.initial = None;
            self.final_state = None;
        } else if o.initial.is_some() {
            self.z = None;
        }
        if o.epsilon1.is_some() {
            self.theta1 = None;
        } else if o.theta1.is_some() {
            self.epsilon1 = None;
        }
    }

    /// Fills defaults: seed from the environment then [`DEFAULT_SEED`],
    /// [`DEFAULT_SHOTS`], exact coupling, `ε` rescaling and CSV output.
    pub fn finalize(&mut self, env_seed: Option<u64>) {
        self.seed = self.seed.or(env_seed).or(Some(DEFAULT_SEED));
        self.n_shots.get_or_insert(DEFAULT_SHOTS);
        self.coupling_mode.get_or_insert_with(Default::default);
        self.rescale.get_or_insert_with(Default::default);
        self.output
            .get_or_insert_with(Default::default)
            .format
            .get_or_insert_with(Default::default);
    }

    pub fn format(&self) -> Format {
        self.output
            .as_ref()
            .and_then(|o| o.format)
            .unwrap_or_default()
    }

    pub fn output_path(&self) -> Option<&str> {
        self.output.as_ref().and_then(|o| o.path.as_deref())
    }

    pub fn variant(&self) -> Result<Variant, CliError> {
        let name = self
            .experiment
            .as_deref()
            .ok_or_else(|| CliError::validation("experiment", "required"))?;
        Variant::from_name(name).ok_or_else(|| {
            let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
            CliError::validation(
                "experiment",
                format!(
                    "unknown variant {name:?}; expected one of {}",
                    names.join(", ")
                ),
            )
        })
    }

    /// The configuration as echoed into output headers: everything that
    /// determines the results, without the output path or sweep block.
    pub fn echo(&self) -> serde_json::Value {
        let mut shown = self.clone();
        shown.sweep = None;
        if let Some(o) = shown.output.as_mut() {
            o.path = None;
        }
        serde_json::to_value(&shown).expect("config serializes to JSON")
    }

    /// Converts to a validated experiment specification.
    pub fn to_spec(&self) -> Result<ExperimentSpec, CliError> {
        let variant = self.variant()?;
        let system = self.system()?;
        let n_shots = self.n_shots.unwrap_or(DEFAULT_SHOTS);
        let plan = ShotPlan::new(n_shots, self.seed.unwrap_or(DEFAULT_SEED))?;
        let mut spec = ExperimentSpec::new(variant, system, plan);
        spec.meter1 = match (self.epsilon1, self.theta1) {
            (Some(_), Some(_)) => {
                return Err(CliError::validation(
                    "theta1",
                    "epsilon1 and theta1 are mutually exclusive",
                ))
            }
            (Some(e), None) => Some(Strength::Epsilon(e)),
            (None, Some(t)) => Some(Strength::Theta(t)),
            (None, None) => None,
        };
        spec.meter2 = self.epsilon2.map(Strength::Epsilon);
        spec.delta_t = self.delta_t;
        spec.coupling = self.coupling_mode.unwrap_or_default().into();
        spec.rescale = self.rescale.unwrap_or_default().into();
        if variant == Variant::ConvergenceSweep {
            spec.sweep_epsilons = self
                .epsilons
                .clone()
                .ok_or_else(|| CliError::validation("epsilons", "required for this experiment"))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn system(&self) -> Result<SystemSpec, CliError> {
        match (self.z, self.initial) {
            (Some(_), Some(_)) => Err(CliError::validation(
                "initial",
                "z and initial are mutually exclusive",
            )),
            (Some(z), None) => {
                if self.final_state.is_some() {
                    return Err(CliError::validation(
                        "final",
                        "z and final are mutually exclusive",
                    ));
                }
                if !z.is_finite() {
                    return Err(CliError::validation("z", "must be finite"));
                }
                Ok(SystemSpec::Anomaly { z })
            }
            (None, Some(initial)) => Ok(SystemSpec::Explicit {
                initial: amplitudes("initial", initial)?,
                final_state: self
                    .final_state
                    .map(|f| amplitudes("final", f))
                    .transpose()?,
            }),
            (None, None) => Err(CliError::validation("z", "z or initial is required")),
        }
    }

    /// One configuration per grid point of the `[sweep]` block.
    pub fn sweep_points(&self) -> Result<Vec<RunConfig>, CliError> {
        let sweep = self.sweep.as_ref().ok_or_else(|| {
            CliError::validation("sweep", "the sweep subcommand needs a [sweep] table")
        })?;
        let base_seed = self.seed.unwrap_or(DEFAULT_SEED);
        let mut base = self.clone();
        base.sweep = None;
        let mut points = vec![base];
        let floats: [(&Option<Vec<f64>>, Assign<f64>); 5] = [
            (&sweep.z, |c, v| {
                c.z = Some(v);
                c.initial = None;
                c.final_state = None;
            }),
            (&sweep.epsilon1, |c, v| {
                c.epsilon1 = Some(v);
                c.theta1 = None;
            }),
            (&sweep.epsilon2, |c, v| c.epsilon2 = Some(v)),
            (&sweep.theta1, |c, v| {
                c.theta1 = Some(v);
                c.epsilon1 = None;
            }),
            (&sweep.delta_t, |c, v| c.delta_t = Some(v)),
        ];
        for (values, assign) in floats {
            if let Some(values) = values {
                points = expand(&points, values, assign);
            }
        }
        if let Some(values) = &sweep.n_shots {
            points = expand(&points, values, |c, v| c.n_shots = Some(v));
        }
        match &sweep.seed {
            Some(values) => points = expand(&points, values, |c, v| c.seed = Some(v)),
            None => {
                for (k, p) in points.iter_mut().enumerate() {
                    p.seed = Some(rng::derive_seed(base_seed, k as u64));
                }
            }
        }
        Ok(points)
    }
}

/// Sets one swept parameter on a grid point.
type Assign<T> = fn(&mut RunConfig, T);

fn expand<T: Copy>(points: &[RunConfig], values: &[T], assign: Assign<T>) -> Vec<RunConfig> {
    let mut out = Vec::with_capacity(points.len() * values.len());
    for p in points {
        for &v in values {
            let mut q = p.clone();
            assign(&mut q, v);
            out.push(q);
        }
    }
    out
}

fn amplitudes(field: &str, a: Amplitudes) -> Result<[Complex64; 2], CliError> {
    if a.iter().flatten().any(|x| !x.is_finite()) {
        return Err(CliError::validation(field, "amplitudes must be finite"));
    }
    let amps = [
        Complex64::new(a[0][0], a[0][1]),
        Complex64::new(a[1][0], a[1][1]),
    ];
    let norm = amps[0].norm_sqr() + amps[1].norm_sqr();
    if (norm - 1.0).abs() > INPUT_TOL {
        return Err(CliError::validation(
            field,
            format!("|α|²+|β|² = {norm}, must equal 1 within {INPUT_TOL:e}"),
        ));
    }
    Ok(amps)
}
