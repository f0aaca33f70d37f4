//! Command-line front end: system files, feasibility analysis, margin
//! bisection, a sampled soundness check and report output.

pub mod analysis;
pub mod error;
pub mod models;
pub mod oracle;
pub mod report;
pub mod spec;

pub use analysis::{analyze, analyze_full, find_margin, AnalysisReport, MarginObjective, Verdict};
pub use error::{CliError, Result};
pub use oracle::{grid_oracle, OracleSummary};
pub use report::{emit_report, Artifacts, MarginRow};
pub use spec::{AffineSimplexMap, AnalysisOptions, MonomialSpec, SystemSpec};
