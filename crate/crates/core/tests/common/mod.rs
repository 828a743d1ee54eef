#![allow(dead_code)]

use std::collections::BTreeSet;

use weave_core::check::check;
use weave_core::compiler::{GroundModel, ModelTemplate};
use weave_core::solver::{search_with, Budget, Domain, SearchOptions, SolveOutcome, VarKind};
use weave_core::Store;

pub const POLICIES: &str = r#"
-- @variable_columns (node_name)
create table pod (
  name varchar(100) primary key,
  app varchar(100),
  cpu integer,
  priority integer,
  has_affinity boolean,
  node_name varchar(100)
);
create table node (
  name varchar(100) primary key,
  cpu_capacity integer,
  max_pods integer,
  unschedulable boolean,
  zone varchar(100)
);
create table node_affinity (pod_name varchar(100), node_name varchar(100));
create table node_anti_affinity (pod_name varchar(100), node_name varchar(100));
create table spread_app (app varchar(100) primary key);
create table zone_app (app varchar(100) primary key);
create table pod_affinity (pod_name varchar(100), other varchar(100));
create table pod_anti_affinity (pod_name varchar(100), other varchar(100));

-- @hard_constraint
create view node_predicates as
select * from pod join node on pod.node_name = node.name
where node.unschedulable = false;

-- @hard_constraint
create view node_affinity_rule as
select * from pod
where pod.has_affinity = false
   or pod.node_name in (select a.node_name from node_affinity a where a.pod_name = pod.name);

-- @hard_constraint
create view node_anti_affinity_rule as
select * from pod
where pod.node_name not in (select a.node_name from node_anti_affinity a where a.pod_name = pod.name);

-- @hard_constraint
create view capacity as
select node.name from node join pod on pod.node_name = node.name
group by node.name, node.cpu_capacity
having sum(pod.cpu) <= node.cpu_capacity;

-- @hard_constraint
create view pods_per_node as
select node.name from node join pod on pod.node_name = node.name
group by node.name, node.max_pods
having count(*) <= node.max_pods;

-- @hard_constraint
create view spread as
select pod.app, all_different(pod.node_name) as distinct_nodes
from pod join spread_app s on pod.app = s.app
group by pod.app;

-- @hard_constraint
create view same_zone as
select * from pod p1
join pod p2 on p1.app = p2.app
join node n1 on p1.node_name = n1.name
join node n2 on p2.node_name = n2.name
join zone_app z on p1.app = z.app
where p1.name < p2.name and n1.zone = n2.zone;

-- @hard_constraint
create view pod_affinity_rule as
select * from pod_affinity r
join pod p on p.name = r.pod_name
join pod q on q.name = r.other
where p.node_name = q.node_name;

-- @hard_constraint
create view zone_anti_affinity as
select * from pod_anti_affinity r
join pod p on p.name = r.pod_name
join pod q on q.name = r.other
join node np on p.node_name = np.name
join node nq on q.node_name = nq.name
where np.zone != nq.zone;

create view spare_capacity as
select node.name, node.cpu_capacity - sum(pod.cpu) as spare
from node join pod on pod.node_name = node.name
group by node.name, node.cpu_capacity;

-- @soft_constraint
create view least_loaded as
select min(spare) from spare_capacity;
"#;

pub const POD_HEADER: &str = "name,app,cpu,priority,has_affinity,node_name";
pub const NODE_HEADER: &str = "name,cpu_capacity,max_pods,unschedulable,zone";

pub fn csv(header: &str, rows: &[String]) -> String {
    let mut s = header.to_string();
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

pub fn decision_vars(g: &GroundModel) -> Vec<usize> {
    (0..g.model.vars.len()).filter(|&i| g.model.vars[i].kind == VarKind::Decision).collect()
}

/// Every combination of values for the decision variables.
pub fn candidates(g: &GroundModel) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for x in decision_vars(g) {
        let vals: Vec<i64> = g.model.vars[x].domain.values().collect();
        out = out
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Decision assignments the model accepts, each checked by a fresh search
/// with the decision variables fixed.
pub fn model_solutions(g: &GroundModel) -> BTreeSet<Vec<i64>> {
    let xs = decision_vars(g);
    let mut out = BTreeSet::new();
    for cand in candidates(g) {
        let mut m = g.model.clone();
        for (&x, &v) in xs.iter().zip(&cand) {
            m.vars[x].domain = Domain::singleton(v);
        }
        m.objective = None;
        let opts = SearchOptions {
            satisfy_only: true,
            ..SearchOptions::default()
        };
        match search_with(&m, Budget::nodes(100_000), &opts).0 {
            SolveOutcome::Optimal { .. } | SolveOutcome::Feasible { .. } => {
                out.insert(cand);
            }
            SolveOutcome::Unsat { .. } => {}
            SolveOutcome::Unknown { .. } => panic!("budget exhausted on a fixed assignment"),
        }
    }
    out
}

/// Store after writing a decision assignment into the cells.
pub fn apply(g: &GroundModel, store: &Store, cand: &[i64]) -> Store {
    let mut full = vec![0; g.model.vars.len()];
    for (&x, &v) in decision_vars(g).iter().zip(cand) {
        full[x] = v;
    }
    let mut s = store.clone();
    s.apply_deltas(&g.deltas(&full)).unwrap();
    s
}

/// Decision assignments whose resulting store passes the checker, with the
/// soft objective of each.
pub fn semantic_solutions(g: &GroundModel, template: &ModelTemplate, store: &Store) -> Vec<(Vec<i64>, i64)> {
    let mut out = Vec::new();
    for cand in candidates(g) {
        let s = apply(g, store, &cand);
        let r = check(template, &s).unwrap();
        if r.ok() {
            out.push((cand, r.objective()));
        }
    }
    out
}
