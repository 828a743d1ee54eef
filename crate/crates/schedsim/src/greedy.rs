//! One-pod-at-a-time baseline: filter nodes by the hard policies, rank the
//! survivors by spare capacity, bind to the best. The preempting variant
//! evicts lower-priority pods from a single node and retries failures with
//! exponential backoff.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::cluster::{Cluster, SimError};
use crate::policies;
use crate::trace::{priority_summary, Event, ScheduleTrace};
use crate::workload::{ClusterSpec, PodSpec};

#[derive(Clone, Debug)]
pub struct GreedyOptions {
    pub preempt: bool,
    /// First retry delay of the preempting variant; doubles per attempt.
    pub backoff_ms: u64,
    pub max_backoff_ms: u64,
    /// Events after this virtual time are dropped; by default one minute
    /// after the last arrival.
    pub horizon_ms: Option<u64>,
    /// Run the checker after every placement.
    pub verify_each: bool,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        GreedyOptions {
            preempt: false,
            backoff_ms: 1_000,
            max_backoff_ms: 16_000,
            horizon_ms: None,
            verify_each: false,
        }
    }
}

pub fn greedy_schedule(spec: &ClusterSpec, arrivals: &[PodSpec], opts: &GreedyOptions) -> Result<ScheduleTrace, SimError> {
    let mut c = Cluster::new(spec, policies::DEFAULT)?;
    greedy_on(&mut c, arrivals, opts)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Job {
    Arrive(usize),
    Retry { pod: usize, attempt: u32 },
}

/// Runs the greedy scheduler on an existing cluster.
pub fn greedy_on(c: &mut Cluster, arrivals: &[PodSpec], opts: &GreedyOptions) -> Result<ScheduleTrace, SimError> {
    let mut trace = ScheduleTrace {
        scheduler: if opts.preempt { "greedy-preempt" } else { "greedy" }.into(),
        ..ScheduleTrace::default()
    };
    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    for (i, p) in arrivals.iter().enumerate() {
        queue.push(Reverse((p.arrival_ms, seq, Job::Arrive(i))));
        seq += 1;
    }
    let backoff = |attempt: u32| opts.backoff_ms.saturating_mul(1 << attempt.min(20)).min(opts.max_backoff_ms);
    let horizon = opts
        .horizon_ms
        .unwrap_or_else(|| arrivals.iter().map(|p| p.arrival_ms).max().unwrap_or(0).saturating_add(60_000));
    while let Some(Reverse((now, _, job))) = queue.pop() {
        if now > horizon {
            break;
        }
        let (pod, attempt) = match job {
            Job::Arrive(i) => (c.add_pod(&arrivals[i])?, 0),
            Job::Retry { pod, attempt } => (pod, attempt),
        };
        if c.placement[pod].is_some() {
            continue;
        }
        let mut ev = Event {
            time_ms: now,
            batch: trace.events.len(),
            arrived: matches!(job, Job::Arrive(_)) as usize,
            pods: 1,
            status: "placed".into(),
            ..Event::default()
        };
        let feasible = c.feasible_nodes(pod)?;
        if let Some(&best) = feasible.iter().max_by_key(|&&n| (c.score(pod, n), Reverse(n))) {
            c.set(pod, Some(best))?;
            ev.placed = 1;
        } else if let Some((node, victims)) = opts.preempt.then(|| preemption_plan(c, pod)).transpose()?.flatten() {
            for &v in &victims {
                c.set(v, None)?;
                queue.push(Reverse((now + backoff(0), seq, Job::Retry { pod: v, attempt: 0 })));
                seq += 1;
            }
            c.set(pod, Some(node))?;
            ev.placed = 1;
            ev.evicted = victims.len();
            ev.status = "preempted".into();
            trace.evictions += victims.len();
        } else {
            ev.failed = 1;
            ev.status = "failed".into();
            if opts.preempt {
                queue.push(Reverse((now + backoff(attempt + 1), seq, Job::Retry { pod, attempt: attempt + 1 })));
                seq += 1;
            }
        }
        if opts.verify_each && ev.placed > 0 {
            trace.checks += 1;
            trace.violations += c.check()?.violations.len();
        }
        ev.placed_total = c.placed();
        ev.placed_by_priority = priority_summary(&c.placed_by_priority());
        trace.events.push(ev);
    }
    finish(c, &mut trace)?;
    Ok(trace)
}

/// Final counts plus one last check of the whole placement.
pub(crate) fn finish(c: &Cluster, trace: &mut ScheduleTrace) -> Result<(), SimError> {
    trace.pods = c.pods.len();
    trace.placed = c.placed();
    trace.placed_by_priority = c.placed_by_priority();
    trace.pods_by_priority = c.pods.iter().fold(Default::default(), |mut m, p| {
        *m.entry(p.priority).or_insert(0) += 1;
        m
    });
    trace.checks += 1;
    trace.violations += c.check()?.violations.len();
    Ok(())
}

/// Picks a node where evicting lower-priority pods lets the pod fit. All
/// candidates on a node are removed, then reprieved highest priority first
/// while the pod still fits. Nodes are ranked by the highest victim
/// priority, then the number of victims, then node order.
fn preemption_plan(c: &mut Cluster, pod: usize) -> Result<Option<(usize, Vec<usize>)>, SimError> {
    let prio = c.pods[pod].priority;
    let mut best: Option<((i64, usize, usize), Vec<usize>)> = None;
    for node in 0..c.nodes.len() {
        let mut cands: Vec<usize> = c.pods_on(node).into_iter().filter(|&v| c.pods[v].priority < prio).collect();
        if cands.is_empty() {
            continue;
        }
        cands.sort_by_key(|&v| (c.pods[v].priority, c.pods[v].name.clone()));
        for &v in &cands {
            c.set(v, None)?;
        }
        let plan = if c.feasible_among(pod, &[node])?.is_empty() {
            None
        } else {
            let mut victims = Vec::new();
            for &v in cands.iter().rev() {
                c.set(v, Some(node))?;
                if c.feasible_among(pod, &[node])?.is_empty() {
                    c.set(v, None)?;
                    victims.push(v);
                }
            }
            Some(victims)
        };
        for &v in &cands {
            if c.placement[v].is_none() {
                c.set(v, Some(node))?;
            }
        }
        if let Some(victims) = plan {
            let top = victims.iter().map(|&v| c.pods[v].priority).max().unwrap_or(i64::MIN);
            let key = (top, victims.len(), node);
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, victims));
            }
        }
    }
    Ok(best.map(|((_, _, node), victims)| (node, victims)))
}
