//! Executes scenarios and writes their outputs.
//!
//! A run directory holds `scenario.json` (the fully defaulted scenario),
//! `trajectory.csv`, `summary.json`, and optionally `fidelity.svg`,
//! `spectrum.svg` and `states.csv`. A sweep writes one such directory per
//! value plus `comparison.csv` and `sweep.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{diagnose, gap_exceed_fraction, local_minima, DiagnosticsRow};
use crate::error::Error;
use crate::propagate::{propagate, Trajectory};
use crate::scenario::{Scenario, ScenarioError};
use crate::svg::{Chart, Series};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    Validation(#[from] ScenarioError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io { .. } => 1,
        }
    }
}

/// Total-gap local minimum and the coefficients there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntiCrossing {
    pub t: f64,
    pub gap: f64,
    pub nonlinear: f64,
    pub tunneling: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub samples: usize,
    pub min_fidelity: f64,
    pub mean_fidelity: f64,
    pub final_fidelity: f64,
    /// Minimum gap of the total Hamiltonian over the recorded samples.
    pub min_gap: f64,
    pub regularized_fraction: f64,
    pub clamped_fraction: f64,
    /// Fraction of samples where the total gap exceeds the gap of `H0`.
    pub gap_enlarged_fraction: f64,
    pub max_norm_drift: f64,
    pub renormalizations: usize,
    pub anticrossings: Vec<AntiCrossing>,
    pub wall_time_s: f64,
}

pub struct RunOutput {
    pub scenario: Scenario,
    pub trajectory: Trajectory,
    pub rows: Vec<DiagnosticsRow>,
    pub report: RunReport,
}

/// Integrates a scenario and derives its diagnostics. Sweeps are ignored.
pub fn run(s: &Scenario) -> Result<RunOutput, RunError> {
    let start = Instant::now();
    let prepared = s.prepare()?;
    let trajectory = propagate(&prepared.model, &prepared.scheme, &prepared.psi0, &prepared.integrator)?;
    let rows = diagnose(&trajectory, s.output.level)?;
    let mut report = summarize(&rows, &trajectory);
    report.name = s.name.clone();
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(RunOutput {
        scenario: s.clone(),
        trajectory,
        rows,
        report,
    })
}

fn summarize(rows: &[DiagnosticsRow], traj: &Trajectory) -> RunReport {
    let n = rows.len().max(1) as f64;
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let anticrossings = local_minima(&gaps)
        .into_iter()
        .map(|i| {
            let r = &rows[i];
            AntiCrossing {
                t: r.t,
                gap: r.gap,
                nonlinear: r.nonlinear_coeff,
                tunneling: r.tunneling_coeff,
                ratio: r.nonlinear_coeff / r.tunneling_coeff,
            }
        })
        .collect();
    RunReport {
        name: None,
        samples: rows.len(),
        min_fidelity: rows.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min),
        mean_fidelity: rows.iter().map(|r| r.fidelity).sum::<f64>() / n,
        final_fidelity: rows.last().map_or(f64::NAN, |r| r.fidelity),
        min_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        regularized_fraction: rows.iter().filter(|r| r.regularized).count() as f64 / n,
        clamped_fraction: rows.iter().filter(|r| r.clamped).count() as f64 / n,
        gap_enlarged_fraction: gap_exceed_fraction(rows),
        max_norm_drift: traj.max_norm_drift,
        renormalizations: traj.renormalizations,
        anticrossings,
        wall_time_s: 0.0,
    }
}

fn e12(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn csv_header(dim: usize, n_fields: usize) -> String {
    let mut cols = vec!["t".to_string(), "fidelity".into(), "V".into(), "gap".into()];
    cols.extend((0..dim).map(|k| format!("E_tot_{k}")));
    cols.extend((0..n_fields).map(|k| format!("f_{k}")));
    cols.extend(["nonlinear", "tunneling", "regularized", "clamped"].map(String::from));
    cols.join(",")
}

pub fn trajectory_csv(out: &RunOutput) -> String {
    let dim = out.trajectory.model.dim();
    let n_fields = out.trajectory.scheme.controls().len();
    let mut s = csv_header(dim, n_fields);
    s.push('\n');
    for r in &out.rows {
        let mut cols = vec![e12(r.t), e12(r.fidelity), e12(r.lyapunov), e12(r.gap)];
        cols.extend(r.total_energies.iter().map(|&e| e12(e)));
        cols.extend(r.fields.iter().map(|&f| e12(f)));
        cols.push(e12(r.nonlinear_coeff));
        cols.push(e12(r.tunneling_coeff));
        cols.push(u8::from(r.regularized).to_string());
        cols.push(u8::from(r.clamped).to_string());
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    s
}

/// Full-precision amplitudes, `t,re_0,im_0,re_1,im_1,...`.
pub fn states_csv(traj: &Trajectory) -> String {
    let mut s = String::from("t");
    for k in 0..traj.model.dim() {
        let _ = write!(s, ",re_{k},im_{k}");
    }
    s.push('\n');
    for (t, psi) in traj.times.iter().zip(&traj.states) {
        let _ = write!(s, "{t:e}");
        for a in psi.amplitudes() {
            let _ = write!(s, ",{:e},{:e}", a.re, a.im);
        }
        s.push('\n');
    }
    s
}

fn fidelity_svg(out: &RunOutput) -> String {
    let fidelity: Vec<f64> = out.rows.iter().map(|r| r.fidelity).collect();
    let title = out.scenario.name.as_deref().unwrap_or("fidelity");
    Chart {
        title,
        x_label: "t",
        y_label: "F(t)",
        xs: &out.trajectory.times,
        series: vec![Series {
            label: "F".into(),
            values: &fidelity,
        }],
        y_range: Some((0.0, 1.0)),
    }
    .render()
}

fn spectrum_svg(out: &RunOutput) -> String {
    let dim = out.trajectory.model.dim();
    let levels: Vec<Vec<f64>> = (0..dim)
        .map(|k| out.rows.iter().map(|r| r.total_energies[k]).collect())
        .collect();
    Chart {
        title: "eigenvalues of H",
        x_label: "t",
        y_label: "E",
        xs: &out.trajectory.times,
        series: levels
            .iter()
            .enumerate()
            .map(|(k, v)| Series {
                label: format!("E_{k}"),
                values: v,
            })
            .collect(),
        y_range: None,
    }
    .render()
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn emit(out: &RunOutput, dir: &Path) -> Result<(), RunError> {
    create_dir(dir)?;
    write(&dir.join("scenario.json"), &(out.scenario.to_json_pretty() + "\n"))?;
    write(&dir.join("trajectory.csv"), &trajectory_csv(out))?;
    let summary = serde_json::to_string_pretty(&out.report).expect("report serializes");
    write(&dir.join("summary.json"), &(summary + "\n"))?;
    if out.scenario.output.fidelity_svg {
        write(&dir.join("fidelity.svg"), &fidelity_svg(out))?;
    }
    if out.scenario.output.spectrum_svg {
        write(&dir.join("spectrum.svg"), &spectrum_svg(out))?;
    }
    if out.scenario.output.dump_states {
        write(&dir.join("states.csv"), &states_csv(&out.trajectory))?;
    }
    Ok(())
}

pub fn run_to_dir(s: &Scenario, dir: &Path) -> Result<RunReport, RunError> {
    let out = run(s)?;
    emit(&out, dir)?;
    Ok(out.report)
}

/// One sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    pub directory: String,
    pub report: RunReport,
}

pub fn sweep_dir_name(parameter: &str, value: f64) -> String {
    format!("{parameter}_{value}")
}

/// Runs every sweep value in parallel, sorted by value. Each point gets its
/// own subdirectory of `dir` when one is given.
pub fn sweep(s: &Scenario, dir: Option<&Path>) -> Result<Vec<SweepEntry>, RunError> {
    let spec = s
        .sweep
        .as_ref()
        .ok_or_else(|| ScenarioError {
            path: "sweep".into(),
            message: "scenario has no sweep".into(),
        })?;
    s.prepare()?;
    let mut values = spec.values.clone();
    values.sort_by(f64::total_cmp);
    let parameter = spec.parameter;
    let entries: Vec<Result<SweepEntry, RunError>> = values
        .par_iter()
        .map(|&value| {
            let point = s.with_sweep_value(parameter, value).map_err(|message| ScenarioError {
                path: "sweep.values".into(),
                message,
            })?;
            let name = sweep_dir_name(parameter.name(), value);
            let out = run(&point)?;
            if let Some(dir) = dir {
                emit(&out, &dir.join(&name))?;
            }
            Ok(SweepEntry {
                value,
                directory: name,
                report: out.report,
            })
        })
        .collect();
    let entries = entries.into_iter().collect::<Result<Vec<_>, _>>()?;
    if let Some(dir) = dir {
        create_dir(dir)?;
        write(&dir.join("scenario.json"), &(s.to_json_pretty() + "\n"))?;
        write(&dir.join("comparison.csv"), &comparison_csv(&entries))?;
        let summary = serde_json::to_string_pretty(&entries).expect("entries serialize");
        write(&dir.join("sweep.json"), &(summary + "\n"))?;
    }
    Ok(entries)
}

pub fn comparison_csv(entries: &[SweepEntry]) -> String {
    let mut s = String::from("value,min_fidelity,mean_fidelity,final_fidelity\n");
    for e in entries {
        let r = &e.report;
        let _ = writeln!(s, "{},{},{},{}", e12(e.value), e12(r.min_fidelity), e12(r.mean_fidelity), e12(r.final_fidelity));
    }
    s
}
