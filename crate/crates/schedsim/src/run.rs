//! Runs a named scenario end to end and writes its outputs to a directory.

use std::fs;
use std::path::Path;
use std::time::Duration;

use serde_json::json;
use weave_core::solver::Budget;

use crate::batch::{batch_schedule, BatchOptions};
use crate::cluster::SimError;
use crate::greedy::{greedy_schedule, GreedyOptions};
use crate::scenarios::{self, VmInstance};
use crate::trace::{slope, ScheduleTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Affinity,
    Hetero,
    Preempt,
    Rebalance,
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "affinity" => Ok(Scenario::Affinity),
            "hetero" => Ok(Scenario::Hetero),
            "preempt" => Ok(Scenario::Preempt),
            "rebalance" => Ok(Scenario::Rebalance),
            other => Err(format!("unknown scenario {other}; expected affinity, hetero, preempt or rebalance")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimParams {
    pub scenario: Scenario,
    /// Nodes, or hosts for rebalancing.
    pub nodes: usize,
    pub apps: usize,
    pub b: usize,
    pub seed: u64,
    /// VMs in the rebalancing instance.
    pub vms: usize,
    /// Migration budget for rebalancing.
    pub k: u64,
}

/// Runs the scenario, writes its files under `out` and returns the
/// metrics that went into `metrics.json`.
pub fn run_scenario(p: &SimParams, out: &Path) -> Result<serde_json::Value, SimError> {
    fs::create_dir_all(out)?;
    let metrics = match p.scenario {
        Scenario::Rebalance => rebalance(p, out)?,
        s => {
            let (cluster, pods) = match s {
                Scenario::Affinity => scenarios::affinity_workload(p.nodes, p.apps, p.seed)?,
                Scenario::Hetero => scenarios::hetero_workload(p.nodes, p.apps, p.seed)?,
                _ => scenarios::preemption_waves(p.nodes, 4, p.seed),
            };
            let preempt = s == Scenario::Preempt;
            let batch = batch_schedule(
                &cluster,
                &pods,
                &BatchOptions {
                    b: p.b,
                    ..BatchOptions::default()
                },
            )?;
            let greedy = greedy_schedule(
                &cluster,
                &pods,
                &GreedyOptions {
                    preempt,
                    ..GreedyOptions::default()
                },
            )?;
            batch.write_csv(&out.join("trace.csv"))?;
            greedy.write_csv(&out.join("greedy_trace.csv"))?;
            json!({
                "scenario": format!("{s:?}").to_lowercase(),
                "nodes": p.nodes,
                "seed": p.seed,
                "b": p.b,
                "batch": batch.metrics(),
                "greedy": greedy.metrics(),
                "vars_per_placed_pod_slope": size_slope(&batch),
            })
        }
    };
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
    Ok(metrics)
}

/// Regression slope of decision variables per invocation against pods
/// placed before it.
pub fn size_slope(t: &ScheduleTrace) -> f64 {
    let mut before = 0;
    let mut points = Vec::new();
    for e in &t.events {
        if e.vars > 0 {
            points.push((before as f64, e.vars as f64));
        }
        before = e.placed_total;
    }
    slope(&points)
}

fn rebalance(p: &SimParams, out: &Path) -> Result<serde_json::Value, SimError> {
    let inst = scenarios::imbalanced_vms(p.nodes, p.vms, p.seed);
    let budget = Budget {
        nodes: Some(200_000),
        time: Some(Duration::from_secs(20)),
    };
    let r = scenarios::rebalance(&inst, p.k, budget)?;
    write_loads(&inst, &r.before, &out.join("loads_before.csv"))?;
    write_loads(&inst, &r.after, &out.join("loads_after.csv"))?;
    let mut w = csv::Writer::from_path(out.join("trace.csv"))?;
    w.write_record(["vm", "from", "to"])?;
    for (vm, from, to) in &r.moves {
        w.write_record([vm, from, to])?;
    }
    w.flush()?;
    Ok(json!({
        "scenario": "rebalance",
        "hosts": p.nodes,
        "vms": p.vms,
        "k": p.k,
        "seed": p.seed,
        "status": r.status,
        "migrations": r.moves.len(),
        "spread_before": inst.spread(&r.before),
        "spread_after": inst.spread(&r.after),
        "greedy_spread_after": inst.spread(&r.greedy),
    }))
}

fn write_loads(inst: &VmInstance, assignment: &[usize], path: &Path) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["host", "used", "capacity", "utilisation"])?;
    let loads = inst.loads(assignment);
    for (i, (name, cap)) in inst.hosts.iter().enumerate() {
        w.write_record([name.clone(), loads[i].to_string(), cap.to_string(), format!("{:.1}", inst.utilisation(assignment)[i])])?;
    }
    w.flush()?;
    Ok(())
}
