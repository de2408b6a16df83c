//! Flat result records, one per sub-result of a report.

use weakval_core::analysis::Estimate;
use weakval_core::experiments::{MeterReport, RunResult, Variant};
use weakval_core::qstate::{CouplingMode, PauliAxis};

/// A cell value. [`Value::Absent`] marks quantities that are undefined for
/// the row; emitters write it as an empty field or `null`, never as zero.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Text(String),
    UInt(u64),
    Float(f64),
    Bool(bool),
    Absent,
}

impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        v.filter(|x| x.is_finite())
            .map_or(Value::Absent, Value::Float)
    }
}

impl From<Option<u64>> for Value {
    fn from(v: Option<u64>) -> Self {
        v.map_or(Value::Absent, Value::UInt)
    }
}

/// Column order of every emitted row. The first block is the core record;
/// the rest are per-variant diagnostics.
pub const COLUMNS: &[&str] = &[
    "experiment",
    "seed",
    "n_shots",
    "epsilon1",
    "epsilon2",
    "z",
    "delta_t",
    "success_fraction",
    "estimate_z",
    "stderr_z_paper",
    "stderr_z_exact",
    "estimate_x",
    "theory_weak_z",
    "theory_weak_x",
    "exact_estimate_z",
    "max_first_order_discrepancy",
    "validity_flag",
    // Postselection and theory detail.
    "success_count",
    "success_fraction_exact",
    "success_fraction_theory",
    "success_fraction_stderr",
    "empty_postselection",
    "validity_product",
    "theory_expectation_z",
    "theory_weak_z_im",
    "theory_weak_x_im",
    // Second Z meter (ConsistencyZZ) and X meter error bars.
    "estimate_z2",
    "stderr_z2_paper",
    "stderr_z2_exact",
    "exact_estimate_z2",
    "stderr_x_paper",
    "stderr_x_exact",
    "exact_estimate_x",
    "order_swap_max_diff",
    // DynamicalProbe.
    "coupling_mode",
    "conditional_rate_theory",
    "conditional_rate_exact",
    "conditional_rate_first_order",
    "conditional_rate_sampled",
    "conditional_rate_stderr",
    "unpostselected_rate_exact",
    "unpostselected_rate_mean_field",
    "branch_norm_excess",
    "required_runs_weak",
    "required_runs_dynamical",
    // ConvergenceSweep.
    "sweep_ratio",
    "sweep_deviation",
    "sweep_successive_ratio",
    "sweep_fitted_order",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    values: Vec<Value>,
}

impl Default for ResultRow {
    fn default() -> Self {
        Self {
            values: vec![Value::Absent; COLUMNS.len()],
        }
    }
}

impl ResultRow {
    pub fn get(&self, column: &str) -> Option<&Value> {
        COLUMNS
            .iter()
            .position(|c| *c == column)
            .map(|i| &self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Value)> {
        COLUMNS.iter().copied().zip(&self.values)
    }

    fn set(&mut self, column: &str, value: impl Into<Value>) {
        let i = COLUMNS
            .iter()
            .position(|c| *c == column)
            .unwrap_or_else(|| panic!("unknown column {column}"));
        self.values[i] = value.into();
    }

    fn set_estimate(&mut self, prefix: &str, m: &MeterReport) {
        let est: Option<&Estimate> = m.sampled.as_ref();
        self.set(&format!("estimate_{prefix}"), est.map(|e| e.value));
        self.set(
            &format!("stderr_{prefix}_paper"),
            est.map(|e| e.stderr_paper),
        );
        self.set(
            &format!("stderr_{prefix}_exact"),
            est.map(|e| e.stderr_exact),
        );
        self.set(&format!("exact_estimate_{prefix}"), m.exact);
    }

    pub fn from_result(variant: Variant, r: &RunResult) -> Self {
        let mut row = Self::default();
        row.set("experiment", Value::Text(variant.name().to_string()));
        row.set("seed", Value::UInt(r.seed));
        row.set("n_shots", Value::UInt(r.n_shots));
        row.set("epsilon1", r.epsilon1);
        row.set("epsilon2", r.epsilon2);
        row.set("z", r.z);
        row.set("delta_t", r.delta_t);

        if let Some(s) = &r.success {
            row.set("success_fraction", Some(s.measured));
            row.set("success_count", Some(s.success_count));
            row.set("success_fraction_exact", Some(s.exact));
            row.set("success_fraction_theory", Some(s.theory));
            row.set("success_fraction_stderr", Some(s.stderr));
            row.set(
                "empty_postselection",
                Value::Bool(r.flags.empty_postselection),
            );
        }
        row.set("theory_expectation_z", Some(r.expectation_z));
        row.set("theory_weak_z", r.weak_z.map(|w| w.re));
        row.set("theory_weak_z_im", r.weak_z.map(|w| w.im));
        row.set("theory_weak_x", r.weak_x.map(|w| w.re));
        row.set("theory_weak_x_im", r.weak_x.map(|w| w.im));

        // Estimates are meaningless without a defined weak value.
        if !r.flags.orthogonal {
            let mut z_meters = r.meters.iter().filter(|m| m.prep.axis() == PauliAxis::Z);
            if let Some(m) = z_meters.next() {
                row.set_estimate("z", m);
            }
            if let Some(m) = z_meters.next() {
                row.set_estimate("z2", m);
            }
            if let Some(m) = r.meters.iter().find(|m| m.prep.axis() == PauliAxis::X) {
                row.set_estimate("x", m);
            }
            row.set("max_first_order_discrepancy", r.discrepancy.first_order);
        }
        row.set("order_swap_max_diff", r.discrepancy.order_swap);
        row.set("validity_product", r.flags.validity.map(|v| v.product));
        row.set("validity_flag", validity_flag(r));

        if let Some(p) = &r.probe {
            let mode = match p.mode {
                CouplingMode::Exact => "exact",
                CouplingMode::FirstOrder => "first_order",
            };
            row.set("coupling_mode", Value::Text(mode.to_string()));
            row.set("conditional_rate_theory", Some(p.closed_form_rate));
            row.set("conditional_rate_exact", Some(p.exact_rate));
            row.set("conditional_rate_first_order", Some(p.first_order_rate));
            row.set("conditional_rate_sampled", p.sampled_rate);
            row.set("conditional_rate_stderr", p.sampled_stderr);
            row.set("unpostselected_rate_exact", Some(p.unpostselected_rate));
            row.set(
                "unpostselected_rate_mean_field",
                Some(p.unpostselected_mean_field_rate),
            );
            row.set("branch_norm_excess", Some(p.branch_norm_excess));
            row.set("required_runs_weak", p.weak_measurement_runs);
            row.set("required_runs_dynamical", p.dynamical_runs);
        }
        if let Some(s) = &r.sweep {
            row.set("sweep_ratio", Some(s.ratio));
            row.set("sweep_deviation", Some(s.deviation));
            row.set("sweep_successive_ratio", s.successive_ratio);
            row.set("sweep_fitted_order", s.fitted_order);
        }
        row
    }
}

/// `orthogonal`, `strong_coupling`, `invalid` (`ε·|z| ≥ 1`) or `valid`;
/// absent when no validity criterion applies.
fn validity_flag(r: &RunResult) -> Value {
    let flag = if r.flags.orthogonal {
        "orthogonal"
    } else if r.flags.strong_coupling {
        "strong_coupling"
    } else if let Some(v) = r.flags.validity {
        if v.valid {
            "valid"
        } else {
            "invalid"
        }
    } else if r.probe.is_some() {
        "valid"
    } else {
        return Value::Absent;
    };
    Value::Text(flag.to_string())
}
