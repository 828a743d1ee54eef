//! Cluster state held in the engine's store, plus a mirror of the current
//! placement for quick bookkeeping.

use std::collections::{BTreeMap, HashMap};

use weave_core::check::CheckReport;
use weave_core::compiler::{BindOptions, Mode, Scope};
use weave_core::runtime::{Engine, EngineError, SolveReport};
use weave_core::solver::{search_with, Budget, Domain, SearchOptions, SolveOutcome};
use weave_core::{Delta, StoreError, Value};

use crate::policies;
use crate::workload::{ClusterSpec, NodeSpec, PodSpec, WorkloadError};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

pub struct Cluster {
    pub engine: Engine,
    pub nodes: Vec<NodeSpec>,
    pub pods: Vec<PodSpec>,
    /// Node index of every arrived pod.
    pub placement: Vec<Option<usize>>,
    pod_index: HashMap<String, usize>,
    node_index: HashMap<String, usize>,
    /// cpu, mem and pod count per node.
    used: Vec<(i64, i64, i64)>,
}

impl Cluster {
    /// A cluster running the named policy files.
    pub fn new(spec: &ClusterSpec, policy_names: &[&str]) -> Result<Cluster, SimError> {
        spec.validate()?;
        let (primary, reconfig) = policies::schemas(policy_names);
        let engine = Engine::compile(&primary, Some(&reconfig))?;
        let mut c = Cluster {
            engine,
            nodes: spec.nodes.clone(),
            pods: Vec::new(),
            placement: Vec::new(),
            pod_index: HashMap::new(),
            node_index: spec.nodes.iter().enumerate().map(|(i, n)| (n.name.clone(), i)).collect(),
            used: vec![(0, 0, 0); spec.nodes.len()],
        };
        let rows = spec
            .nodes
            .iter()
            .map(|n| {
                vec![
                    Value::text(&n.name),
                    Value::Int(n.cpu),
                    Value::Int(n.mem),
                    Value::Int(n.max_pods),
                    Value::Bool(n.unschedulable),
                    Value::Bool(false),
                    Value::Bool(false),
                    Value::Bool(true),
                    Value::text(&n.zone),
                ]
            })
            .collect();
        c.engine.store_mut().insert_rows("node", rows)?;
        Ok(c)
    }

    /// Inserts the pod as pending, with its affinity rows.
    pub fn add_pod(&mut self, p: &PodSpec) -> Result<usize, SimError> {
        if self.pod_index.contains_key(&p.name) {
            return Err(SimError::Invalid(format!("pod {} arrived twice", p.name)));
        }
        let store = self.engine.store_mut();
        store.insert_rows(
            "pod",
            vec![vec![
                Value::text(&p.name),
                Value::text(&p.app),
                Value::text(&p.grp),
                Value::Int(p.cpu),
                Value::Int(p.mem),
                Value::Int(p.priority),
                Value::text(p.requested_node.as_deref().unwrap_or("")),
                Value::Bool(p.node_affinity.is_some()),
                Value::Unset,
            ]],
        )?;
        let pairs = |items: &[String]| items.iter().map(|g| vec![Value::text(&p.name), Value::text(g)]).collect::<Vec<_>>();
        if let Some(nodes) = &p.node_affinity {
            store.insert_rows("node_affinity", pairs(nodes))?;
        }
        store.insert_rows("node_anti_affinity", pairs(&p.node_anti_affinity))?;
        store.insert_rows("pod_affinity", pairs(&p.affinity))?;
        store.insert_rows("pod_anti_affinity", pairs(&p.anti_affinity))?;
        store.insert_rows("zone_anti_affinity", pairs(&p.zone_anti_affinity))?;
        self.pod_index.insert(p.name.clone(), self.pods.len());
        self.pods.push(p.clone());
        self.placement.push(None);
        Ok(self.pods.len() - 1)
    }

    pub fn pod(&self, name: &str) -> Option<usize> {
        self.pod_index.get(name).copied()
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.node_index.get(name).copied()
    }

    /// Moves a pod to a node, or back to pending.
    pub fn set(&mut self, pod: usize, node: Option<usize>) -> Result<(), SimError> {
        let name = self.pods[pod].name.clone();
        let value = node.map(|n| Value::text(&self.nodes[n].name)).unwrap_or(Value::Unset);
        self.engine.store_mut().apply_deltas(&[Delta {
            table: "pod".into(),
            row_key: Value::text(&name),
            column: "node_name".into(),
            new_value: value,
        }])?;
        self.record(pod, node)
    }

    fn record(&mut self, pod: usize, node: Option<usize>) -> Result<(), SimError> {
        let old = self.placement[pod];
        if old == node {
            return Ok(());
        }
        let (cpu, mem) = (self.pods[pod].cpu, self.pods[pod].mem);
        let name = Value::text(&self.pods[pod].name);
        let store = self.engine.store_mut();
        if let Some(o) = old {
            let u = &mut self.used[o];
            *u = (u.0 - cpu, u.1 - mem, u.2 - 1);
            store.delete_rows("binding", std::slice::from_ref(&name))?;
        }
        if let Some(n) = node {
            let u = &mut self.used[n];
            *u = (u.0 + cpu, u.1 + mem, u.2 + 1);
            store.insert_rows("binding", vec![vec![name, Value::text(&self.nodes[n].name)]])?;
        }
        self.placement[pod] = node;
        Ok(())
    }

    /// Writes a solve's deltas and returns the pods that became placed and
    /// the pods that lost their node.
    pub fn apply(&mut self, report: &SolveReport) -> Result<(Vec<usize>, Vec<usize>), SimError> {
        self.engine.apply(report)?;
        let (mut placed, mut evicted) = (Vec::new(), Vec::new());
        for d in &report.deltas {
            if d.table != "pod" {
                continue;
            }
            let Some(pod) = d.row_key.as_text().and_then(|k| self.pod(k)) else {
                return Err(SimError::Invalid(format!("delta for unknown pod {}", d.row_key)));
            };
            let node = match &d.new_value {
                Value::Unset => None,
                v => Some(
                    v.as_text()
                        .and_then(|n| self.node(n))
                        .ok_or_else(|| SimError::Invalid(format!("delta to unknown node {v}")))?,
                ),
            };
            match (self.placement[pod], node) {
                (None, Some(_)) => placed.push(pod),
                (Some(_), None) => evicted.push(pod),
                _ => {}
            }
            self.record(pod, node)?;
        }
        Ok((placed, evicted))
    }

    pub fn used(&self, node: usize) -> (i64, i64, i64) {
        self.used[node]
    }

    /// Least-requested score of a node after adding the pod: spare cpu and
    /// memory as thousandths of capacity, summed.
    pub fn score(&self, pod: usize, node: usize) -> i64 {
        let (p, n, u) = (&self.pods[pod], &self.nodes[node], self.used[node]);
        (n.cpu - u.0 - p.cpu) * 1000 / n.cpu + (n.mem - u.1 - p.mem) * 1000 / n.mem
    }

    pub fn pods_on(&self, node: usize) -> Vec<usize> {
        (0..self.pods.len()).filter(|&p| self.placement[p] == Some(node)).collect()
    }

    pub fn pending(&self) -> Vec<usize> {
        (0..self.pods.len()).filter(|&p| self.placement[p].is_none()).collect()
    }

    pub fn placed(&self) -> usize {
        self.placement.iter().filter(|p| p.is_some()).count()
    }

    pub fn placed_by_priority(&self) -> BTreeMap<i64, usize> {
        let mut m = BTreeMap::new();
        for (p, spec) in self.pods.iter().enumerate() {
            let e = m.entry(spec.priority).or_insert(0);
            if self.placement[p].is_some() {
                *e += 1;
            }
        }
        m
    }

    /// Nodes on which the pod alone could be placed now, with every other
    /// pod where it is, in node order. Each candidate is decided by a
    /// search over the pod's single-row model with its value fixed.
    pub fn feasible_nodes(&self, pod: usize) -> Result<Vec<usize>, SimError> {
        let all: Vec<usize> = (0..self.nodes.len()).collect();
        self.feasible_among(pod, &all)
    }

    /// The subset of `candidates` on which the pod could be placed now.
    pub fn feasible_among(&self, pod: usize, candidates: &[usize]) -> Result<Vec<usize>, SimError> {
        let opts = BindOptions {
            rewrites: true,
            scope: Scope::Rows(vec![("pod".into(), Value::text(&self.pods[pod].name))]),
            mode: Mode::Standard,
        };
        let g = self.engine.ground(&self.engine.template, &opts)?;
        let Some(cell) = g.cells.first() else {
            return Ok(Vec::new());
        };
        let x = cell.var;
        let search = SearchOptions {
            satisfy_only: true,
            ..SearchOptions::default()
        };
        let mut out = Vec::new();
        for &i in candidates {
            let n = &self.nodes[i];
            let Some(v) = g.interner.get(&n.name) else { continue };
            if !g.model.vars[x].domain.contains(v) {
                continue;
            }
            let mut m = g.model.clone();
            m.vars[x].domain = Domain::singleton(v);
            m.objective = None;
            match search_with(&m, Budget::nodes(100_000), &search).0 {
                SolveOutcome::Optimal { .. } | SolveOutcome::Feasible { .. } => out.push(i),
                SolveOutcome::Unsat { .. } => {}
                SolveOutcome::Unknown { .. } => {
                    return Err(SimError::Invalid(format!("could not decide {} on {}", self.pods[pod].name, n.name)))
                }
            }
        }
        Ok(out)
    }

    /// Re-evaluates every hard policy on the current store.
    pub fn check(&self) -> Result<CheckReport, SimError> {
        Ok(self.engine.check()?)
    }
}
