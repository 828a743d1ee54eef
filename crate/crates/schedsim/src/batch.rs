//! Batch scheduling through the engine: arrivals are grouped into batches
//! of up to `b` pods, or fewer once the window has passed without a new
//! arrival, and each batch is placed jointly with every still-pending pod.

use weave_core::compiler::Scope;
use weave_core::solver::Budget;

use crate::cluster::{Cluster, SimError};
use crate::greedy::finish;
use crate::policies;
use crate::trace::{priority_summary, Event, ScheduleTrace};
use crate::workload::{ClusterSpec, PodSpec};

#[derive(Clone, Debug)]
pub struct BatchOptions {
    pub b: usize,
    pub window_ms: u64,
    pub budget: Budget,
    /// Fall back to the eviction model when a batch cannot be placed.
    pub escalate: bool,
    pub verify_each: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            b: 50,
            window_ms: 200,
            budget: Budget {
                nodes: Some(20_000),
                time: Some(std::time::Duration::from_secs(5)),
            },
            escalate: true,
            verify_each: false,
        }
    }
}

pub fn batch_schedule(spec: &ClusterSpec, arrivals: &[PodSpec], opts: &BatchOptions) -> Result<ScheduleTrace, SimError> {
    let mut c = Cluster::new(spec, policies::DEFAULT)?;
    batch_on(&mut c, arrivals, opts)
}

pub fn batch_on(c: &mut Cluster, arrivals: &[PodSpec], opts: &BatchOptions) -> Result<ScheduleTrace, SimError> {
    if opts.b == 0 {
        return Err(SimError::Invalid("batch size must be at least 1".into()));
    }
    let mut trace = ScheduleTrace {
        scheduler: format!("batch-{}", opts.b),
        ..ScheduleTrace::default()
    };
    let mut size = 0;
    let mut last = 0;
    for p in arrivals {
        if size > 0 && p.arrival_ms > last + opts.window_ms {
            flush(c, &mut trace, size, last + opts.window_ms, opts)?;
            size = 0;
        }
        c.add_pod(p)?;
        size += 1;
        last = p.arrival_ms;
        if size == opts.b {
            flush(c, &mut trace, size, last, opts)?;
            size = 0;
        }
    }
    if size > 0 {
        flush(c, &mut trace, size, last + opts.window_ms, opts)?;
    }
    finish(c, &mut trace)?;
    Ok(trace)
}

/// Solves for every pending pod and applies the result.
fn flush(c: &mut Cluster, trace: &mut ScheduleTrace, size: usize, now: u64, opts: &BatchOptions) -> Result<(), SimError> {
    let pending = c.pending().len();
    let report = if opts.escalate {
        c.engine.solve_or_escalate(Scope::Pending, opts.budget)?
    } else {
        c.engine.solve_once(Scope::Pending, opts.budget)?
    };
    let (placed, evicted) = if report.is_solution() { c.apply(&report)? } else { (Vec::new(), Vec::new()) };
    trace.evictions += evicted.len();
    if opts.verify_each && report.is_solution() {
        trace.checks += 1;
        trace.violations += c.check()?.violations.len();
    }
    trace.events.push(Event {
        time_ms: now,
        batch: trace.events.len(),
        arrived: size,
        pods: pending,
        placed: placed.len(),
        failed: pending - placed.len(),
        evicted: evicted.len(),
        status: report.status().into(),
        escalated: report.escalated,
        vars: report.model.decision_vars,
        model_vars: report.model.vars,
        constraints: report.model.constraints,
        search_nodes: report.stats.nodes,
        placed_total: c.placed(),
        placed_by_priority: priority_summary(&c.placed_by_priority()),
    });
    Ok(())
}
