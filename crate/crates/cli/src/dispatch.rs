//! Runs configurations and collects their rows.

use std::fmt::Write as _;

use weakval_core::experiments::{self, ExperimentReport, WEAK_COUPLING_LIMIT};

use crate::config::RunConfig;
use crate::emit;
use crate::error::CliError;
use crate::row::ResultRow;

/// Everything produced by one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct Execution {
    pub config: RunConfig,
    pub reports: Vec<ExperimentReport>,
    pub rows: Vec<ResultRow>,
    pub warnings: Vec<String>,
}

impl Execution {
    pub fn empty_postselection(&self) -> bool {
        self.reports.iter().any(|r| r.any_empty_postselection())
    }

    /// The output document in the configured format.
    pub fn render(&self) -> Vec<u8> {
        emit::render(self.config.format(), &self.config.echo(), &self.rows)
    }

    /// [`CliError::EmptyPostselection`] if any run kept no shots. Callers
    /// write the output first, so the rows with empty estimates survive.
    pub fn status(&self) -> Result<(), CliError> {
        if self.empty_postselection() {
            Err(CliError::EmptyPostselection)
        } else {
            Ok(())
        }
    }

    /// Human-readable digest, one line per row.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (i, report) in self.reports.iter().enumerate() {
            for r in &report.results {
                let _ = write!(
                    out,
                    "[{i}] {} seed={} N={}",
                    report.spec.variant.name(),
                    r.seed,
                    r.n_shots
                );
                if let Some(s) = &r.success {
                    let _ = write!(out, " success={:.6}", s.measured);
                }
                for m in &r.meters {
                    if let Some(e) = &m.sampled {
                        let _ = write!(out, " m{}={:.6}±{:.6}", m.slot, e.value, e.stderr_exact);
                    }
                    if let Some(t) = m.theory {
                        let _ = write!(out, " (theory {t:.6})");
                    }
                }
                if let Some(p) = &r.probe {
                    let _ = write!(
                        out,
                        " flip_rate={:.10} (theory {:.10})",
                        p.exact_rate, p.closed_form_rate
                    );
                    if let Some(n) = p.dynamical_runs {
                        let _ = write!(out, " runs≈{n}");
                    }
                }
                if let Some(s) = &r.sweep {
                    let _ = write!(out, " ε={} deviation={:.6e}", s.epsilon, s.deviation);
                    if let Some(k) = s.fitted_order {
                        let _ = write!(out, " order={k:.3}");
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

fn warnings(report: &ExperimentReport) -> Vec<String> {
    let mut out = Vec::new();
    for r in &report.results {
        let f = &r.flags;
        if f.orthogonal {
            out.push(
                "pre- and postselected states are orthogonal; weak value undefined".to_string(),
            );
        }
        if let Some(v) = f.validity.filter(|v| !v.valid) {
            out.push(format!(
                "ε·|z| = {} ≥ 1: the first-order expansion does not hold",
                v.product
            ));
        }
        if f.strong_coupling {
            out.push(format!(
                "δt·|F| ≥ {WEAK_COUPLING_LIMIT}: coupling is not weak, first-order rate unreliable"
            ));
        }
        if f.empty_postselection {
            out.push(format!("seed {}: postselection kept no shots", r.seed));
        }
    }
    out
}

fn run_point(config: &RunConfig) -> Result<(ExperimentReport, Vec<ResultRow>), CliError> {
    let spec = config.to_spec()?;
    let report = experiments::run(&spec)?;
    let rows = report
        .results
        .iter()
        .map(|r| ResultRow::from_result(spec.variant, r))
        .collect();
    Ok((report, rows))
}

/// Runs a single configuration. `config` should already be finalized.
pub fn execute(config: &RunConfig) -> Result<Execution, CliError> {
    let (report, rows) = run_point(config)?;
    Ok(Execution {
        config: config.clone(),
        warnings: warnings(&report),
        reports: vec![report],
        rows,
    })
}

/// Runs every grid point of the `[sweep]` block, concatenating rows.
pub fn execute_sweep(config: &RunConfig) -> Result<Execution, CliError> {
    let points = config.sweep_points()?;
    for p in &points {
        p.to_spec()?;
    }
    let mut exec = Execution {
        config: config.clone(),
        reports: Vec::with_capacity(points.len()),
        rows: Vec::new(),
        warnings: Vec::new(),
    };
    for p in &points {
        let (report, rows) = run_point(p)?;
        exec.warnings.extend(warnings(&report));
        exec.reports.push(report);
        exec.rows.extend(rows);
    }
    Ok(exec)
}
