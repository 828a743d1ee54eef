//! Per-invocation records and run summaries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::cluster::SimError;

/// One scheduling invocation: a greedy attempt for one pod or one batch
/// solve.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Event {
    pub time_ms: u64,
    pub batch: usize,
    /// Pods that arrived since the previous invocation.
    pub arrived: usize,
    /// Pods the invocation tried to place.
    pub pods: usize,
    pub placed: usize,
    pub failed: usize,
    pub evicted: usize,
    pub status: String,
    pub escalated: bool,
    /// Decision variables in the model; 0 for greedy attempts.
    pub vars: usize,
    /// All model variables, auxiliaries included.
    pub model_vars: usize,
    pub constraints: usize,
    pub search_nodes: u64,
    /// Pods placed cluster-wide after the invocation.
    pub placed_total: usize,
    /// `priority:count` pairs of placed pods after the invocation.
    pub placed_by_priority: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ScheduleTrace {
    pub scheduler: String,
    pub events: Vec<Event>,
    pub pods: usize,
    pub placed: usize,
    pub evictions: usize,
    pub placed_by_priority: BTreeMap<i64, usize>,
    pub pods_by_priority: BTreeMap<i64, usize>,
    /// Hard-policy violations found by the checker, summed over every
    /// verification performed during the run.
    pub violations: usize,
    pub checks: usize,
}

impl ScheduleTrace {
    pub fn placed_fraction(&self) -> f64 {
        if self.pods == 0 {
            1.0
        } else {
            self.placed as f64 / self.pods as f64
        }
    }

    pub fn model_sizes(&self) -> Vec<usize> {
        self.events.iter().filter(|e| e.vars > 0).map(|e| e.vars).collect()
    }

    pub fn metrics(&self) -> serde_json::Value {
        serde_json::json!({
            "scheduler": self.scheduler,
            "pods": self.pods,
            "placed": self.placed,
            "placed_fraction": self.placed_fraction(),
            "evictions": self.evictions,
            "placed_by_priority": self.placed_by_priority,
            "pods_by_priority": self.pods_by_priority,
            "model_sizes": self.model_sizes(),
            "invocations": self.events.len(),
            "violations": self.violations,
            "checks": self.checks,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.events {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn priority_summary(m: &BTreeMap<i64, usize>) -> String {
    m.iter().map(|(p, c)| format!("{p}:{c}")).collect::<Vec<_>>().join(";")
}

/// Least-squares slope of `y` against `x`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
