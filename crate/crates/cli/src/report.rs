use std::collections::BTreeMap;

use serde::Serialize;
use weingarten::monitor::MonitorRecord;
use weingarten::problem::{AssumptionReport, ProblemSummary};
use weingarten::solver::{ContinuationState, ContinuationStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    Breakdown,
    AssumptionFail,
    Error,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Converged => 0,
            RunStatus::Error => 1,
            RunStatus::AssumptionFail => 3,
            RunStatus::Breakdown => 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryEntry {
    pub state: ContinuationState,
    pub monitor: MonitorRecord,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub assumptions_s: f64,
    pub solve_s: f64,
    pub output_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub config: BTreeMap<String, String>,
    pub problem: ProblemSummary,
    pub forced: bool,
    pub assumptions: AssumptionReport,
    pub continuation: Option<ContinuationStatus>,
    pub history: Vec<HistoryEntry>,
    pub total_newton_iterations: usize,
    /// Accepted states with passing assumptions that left `(r1, r2)`.
    pub barrier_violations: usize,
    pub final_t: Option<f64>,
    pub final_residual: Option<f64>,
    pub files: BTreeMap<String, String>,
    pub timings: Timings,
    pub error: Option<String>,
}

impl RunReport {
    pub fn monitor_records(&self) -> Vec<MonitorRecord> {
        self.history.iter().map(|h| h.monitor.clone()).collect()
    }
}
