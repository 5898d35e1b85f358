//! CSV traces of a run: goal trajectory, estimator against true error, basis
//! sizes, and a one-row summary.

use std::path::Path;

use crate::driver::RunReport;
use crate::error::Result;

pub const GOAL_HEADER: [&str; 3] = ["t", "goal_fom", "goal_rom"];
pub const ERROR_HEADER: [&str; 4] = ["t", "eta_rel", "true_error_rel", "tol"];
pub const BASIS_HEADER: [&str; 3] = ["t", "primal_size", "dual_size"];
pub const SUMMARY_HEADER: [&str; 16] = [
    "tol",
    "goal_fom",
    "goal_rom",
    "relative_error",
    "eta_total",
    "effectivity",
    "speedup",
    "wall_rom",
    "wall_fom",
    "fom_solves",
    "primal_size",
    "dual_size",
    "case_1",
    "case_2",
    "case_3",
    "case_4",
];

/// Scientific notation with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Writes `goal.csv`, `error.csv`, `basis.csv` and `summary.csv` into `dir`.
pub fn write_traces(report: &RunReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;

    let mut goal = csv::Writer::from_path(dir.join("goal.csv"))?;
    goal.write_record(GOAL_HEADER)?;
    let mut error = csv::Writer::from_path(dir.join("error.csv"))?;
    error.write_record(ERROR_HEADER)?;
    let mut basis = csv::Writer::from_path(dir.join("basis.csv"))?;
    basis.write_record(BASIS_HEADER)?;
    for s in &report.slabs {
        let t = fmt_float(s.midpoint);
        goal.write_record([t.clone(), fmt_opt(s.goal_fom), fmt_float(s.goal_rom)])?;
        error.write_record([t.clone(), fmt_float(s.eta_rel), fmt_opt(s.true_error_rel), fmt_float(report.tol)])?;
        basis.write_record([t, s.primal_size.to_string(), s.dual_size.to_string()])?;
    }
    goal.flush()?;
    error.flush()?;
    basis.flush()?;

    let mut summary = csv::Writer::from_path(dir.join("summary.csv"))?;
    summary.write_record(SUMMARY_HEADER)?;
    let cases: Vec<String> = match report.confusion {
        Some(c) => c.iter().map(usize::to_string).collect(),
        None => vec![String::new(); 4],
    };
    let mut row = vec![
        fmt_float(report.tol),
        fmt_opt(report.goal_fom),
        fmt_float(report.goal_rom),
        fmt_opt(report.relative_error),
        fmt_float(report.eta_total),
        fmt_opt(report.effectivity),
        fmt_opt(report.speedup),
        fmt_float(report.wall_rom),
        fmt_opt(report.wall_fom),
        report.fom_solves.to_string(),
        report.primal_size.to_string(),
        report.dual_size.to_string(),
    ];
    row.extend(cases);
    summary.write_record(&row)?;
    summary.flush()?;
    Ok(())
}
