//! Writing reports, logs, margin tables and graphs to disk.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisReport, Timings};
use crate::error::{CliError, Result};

/// One row of a margin sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub d_p: usize,
    pub d1: usize,
    pub d2: usize,
    pub margin: Option<f64>,
    pub trials: usize,
}

pub fn margin_table_csv(rows: &[MarginRow]) -> String {
    let mut out = String::from("d_p,d1,d2,margin,trials\n");
    for r in rows {
        let m = r.margin.map_or_else(|| "none".to_string(), |v| format!("{v:e}"));
        let _ = writeln!(out, "{},{},{},{},{}", r.d_p, r.d1, r.d2, m, r.trials);
    }
    out
}

pub fn solver_log_csv(report: &AnalysisReport) -> String {
    let mut out = String::from("iteration,mu,gap,t_p,t_d,phi,psi,primal_residual,dual_residual\n");
    for r in &report.log {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.iteration,
            r.mu,
            r.gap,
            r.t_primal,
            r.t_dual,
            r.primal_cost,
            r.dual_cost,
            r.primal_residual,
            r.dual_residual
        );
    }
    out
}

fn timings_json(t: &Timings) -> String {
    format!(
        "{{\n  \"setup_secs\": {},\n  \"solve_secs\": {},\n  \"oracle_secs\": {},\n  \"total_secs\": {}\n}}\n",
        t.setup_secs, t.solve_secs, t.oracle_secs, t.total_secs
    )
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// What [`emit_report`] writes besides the report itself.
#[derive(Default)]
pub struct Artifacts<'a> {
    pub margin_table: &'a [MarginRow],
    /// `(file stem, DOT source)` pairs.
    pub graphs: &'a [(String, String)],
}

/// Writes `report.json`, `solver_log.csv`, `timings.json`, and when given,
/// `margin_table.csv` and one `.dot` file per graph. Returns the paths
/// written.
pub fn emit_report(report: &AnalysisReport, extra: &Artifacts<'_>, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = vec![
        write(dir.join("report.json"), &report.to_json()?)?,
        write(dir.join("solver_log.csv"), &solver_log_csv(report))?,
        write(dir.join("timings.json"), &timings_json(&report.timings))?,
    ];
    if !extra.margin_table.is_empty() {
        written.push(write(
            dir.join("margin_table.csv"),
            &margin_table_csv(extra.margin_table),
        )?);
    }
    for (name, dot) in extra.graphs {
        written.push(write(dir.join(format!("{name}.dot")), dot)?);
    }
    Ok(written)
}
