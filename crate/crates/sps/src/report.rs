//! Run reports: the JSON-serializable summary of one sampler execution.
//!
//! Reports are fully deterministic given (seed, config, data): field order
//! is fixed by the struct definitions and no timestamps or environment
//! details are embedded. Wall-clock metadata belongs in the separate
//! envelope the CLI writes around the report.

use serde::{Deserialize, Serialize};

use crate::diagnostics::MomentReport;
use crate::engine::RunConfig;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Marginal-likelihood block of a report.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LogMlSummary {
    /// Cumulative log marginal likelihood.
    pub value: f64,
    /// Numerical standard error from the per-group cumulative values.
    pub nse: f64,
    /// Per-cycle pooled terms; they sum to `value`.
    pub cycle_terms: Vec<f64>,
}

/// Compact view of the cycle schedule a run used or learned.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScheduleSummary {
    pub cycles: usize,
    /// `[0, t_1, …, t_L]`.
    pub breakpoints: Vec<usize>,
    /// Mutation steps per cycle, `R_ℓ`.
    pub m_steps: Vec<usize>,
    /// Step-size scaling factor at the last executed mutation step.
    pub final_h: f64,
}

/// Per-cycle trace entry (the raw material for cycle-breakpoint charts).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CycleTrace {
    pub breakpoint: usize,
    pub m_steps: usize,
    /// `ESS/(J·N)` at the moment the correction phase stopped.
    pub ess_fraction: f64,
    /// This cycle's contribution to the log marginal likelihood.
    pub log_ml_term: f64,
    /// Step-size scaling factor used at the last mutation step.
    pub h_last: f64,
    /// Smallest monitor RNE at mutation exit; `None` when every monitor had
    /// zero between-group variance (criterion met by convention) or when
    /// replaying a schedule (no RNE is consulted).
    pub exit_min_rne: Option<f64>,
    /// Metropolis acceptance rate at the last mutation step, if any.
    pub last_acceptance: Option<f64>,
}

/// Complete result summary of one run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub schema_version: u32,
    /// `"adaptive"` or `"nonadaptive"`.
    pub algorithm: String,
    pub config: RunConfig,
    /// Posterior moment approximations, one per monitor function.
    pub functions: Vec<MomentReport>,
    pub log_ml: LogMlSummary,
    pub schedule_summary: ScheduleSummary,
    pub cycle_trace: Vec<CycleTrace>,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// Canonical JSON bytes of the report (no envelope, no timestamps).
    pub fn to_json(&self) -> crate::error::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> crate::error::Result<Self> {
        let report: RunReport = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(crate::error::Error::Schedule(format!(
                "unsupported report schema version {} (expected {REPORT_SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// Total mutation steps across the run.
    pub fn total_m_steps(&self) -> usize {
        self.schedule_summary.m_steps.iter().sum()
    }

    /// Smallest defined RNE across the reported functions.
    pub fn min_function_rne(&self) -> Option<f64> {
        self.functions
            .iter()
            .filter_map(|f| f.rne)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.min(r))))
    }
}
