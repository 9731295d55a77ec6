use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::integrate::McEstimate;

pub const TRACE_HEADER: &str = "t,objective,objective_stderr,gamma,gap,gap_stderr,lmo_value,active_atoms,wallclock_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub objective: McEstimate,
    /// Weight given to the new atom; absent for the initial row.
    pub gamma: Option<f64>,
    pub gap: Option<McEstimate>,
    pub lmo_value: Option<f64>,
    pub active_atoms: usize,
    pub weights: Vec<f64>,
    pub wallclock_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Non-positive gap: the line search took γ = 0.
    Stall,
    /// The QP did not converge; the iteration used the line-search step.
    QpFallback,
    /// The fully-corrective inner solver hit its iteration budget.
    InnerBudget,
    /// The corrective step did not descend and was shortened.
    Safeguard,
    /// An active atom was replaced by its refined version.
    AtomCorrected,
    /// Gap within noise of zero for the configured number of iterations.
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: usize,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    /// "kl" or "neg_elbo".
    pub objective_label: String,
    pub records: Vec<IterationRecord>,
    pub events: Vec<TraceEvent>,
    pub converged: bool,
}

impl ConvergenceTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective.value).collect()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// CSV with the fixed header. Wall-clock times are written as 0 unless
    /// `with_timing`, so traces of identical runs are byte-identical.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                r.objective.value,
                r.objective.stderr,
                opt(r.gamma),
                opt(r.gap.map(|g| g.value)),
                opt(r.gap.map(|g| g.stderr)),
                opt(r.lmo_value),
                r.active_atoms,
                if with_timing { r.wallclock_ms } else { 0.0 },
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_leaves_initial_step_fields_empty() {
        let trace = ConvergenceTrace {
            objective_label: "kl".into(),
            records: vec![IterationRecord {
                t: 0,
                objective: McEstimate::exact(0.5),
                gamma: None,
                gap: None,
                lmo_value: None,
                active_atoms: 1,
                weights: vec![1.0],
                wallclock_ms: 3.5,
            }],
            events: vec![],
            converged: false,
        };
        let csv = trace.to_csv(false);
        assert_eq!(csv, format!("{TRACE_HEADER}\n0,0.5,0,,,,,1,0\n"));
        assert!(trace.to_csv(true).ends_with(",1,3.5\n"));
    }
}
