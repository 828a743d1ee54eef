mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use weave_core::compiler::{bind, parse_schema, synthesize, BindOptions, GroundModel, Mode, ModelTemplate, Scope};
use weave_core::runtime::solve_ground;
use weave_core::solver::{presolve, Budget, Constraint, PresolveOptions, SolveOutcome, VarKind};
use weave_core::{Store, Value};

fn template(src: &str) -> ModelTemplate {
    synthesize(&parse_schema(src).unwrap()).unwrap()
}

fn store(t: &ModelTemplate, tables: &[(&str, String)]) -> Store {
    let mut s = Store::for_schema(&t.schema).unwrap();
    for (name, text) in tables {
        s.load_csv(name, text).unwrap();
    }
    s
}

fn opts(rewrites: bool, mode: Mode) -> BindOptions {
    BindOptions {
        rewrites,
        scope: Scope::Pending,
        mode,
    }
}

#[derive(Debug, Clone)]
struct Instance {
    nodes: Vec<String>,
    pods: Vec<String>,
    affinity: Vec<String>,
    anti: Vec<String>,
    spread: bool,
    zone: bool,
}

fn instance() -> impl Strategy<Value = Instance> {
    (2usize..=3, 2usize..=4).prop_flat_map(|(n, p)| {
        let node = (3i64..=10, 1i64..=3, prop::bool::weighted(0.2), 0usize..2);
        let pod = (0usize..2, 1i64..=5, 0i64..=2, prop::bool::weighted(0.3), prop::option::weighted(0.3, 0..n));
        (
            prop::collection::vec(node, n),
            prop::collection::vec(pod, p),
            prop::collection::vec((0..p, 0..n), 0..4),
            prop::collection::vec((0..p, 0..n), 0..3),
            any::<bool>(),
            any::<bool>(),
        )
            .prop_map(|(nodes, pods, aff, anti, spread, zone)| Instance {
                nodes: nodes
                    .iter()
                    .enumerate()
                    .map(|(i, (cap, maxp, u, z))| format!("n{i},{cap},{maxp},{u},z{z}"))
                    .collect(),
                pods: pods
                    .iter()
                    .enumerate()
                    .map(|(i, (app, cpu, prio, has, placed))| {
                        let node = placed.map(|k| format!("n{k}")).unwrap_or_else(|| "?".into());
                        format!("p{i},a{app},{cpu},{prio},{has},{node}")
                    })
                    .collect(),
                affinity: aff.iter().map(|(p, n)| format!("p{p},n{n}")).collect(),
                anti: anti.iter().map(|(p, n)| format!("p{p},n{n}")).collect(),
                spread,
                zone,
            })
    })
}

fn instance_store(t: &ModelTemplate, i: &Instance) -> Store {
    let mut tables = vec![
        ("node", csv(NODE_HEADER, &i.nodes)),
        ("pod", csv(POD_HEADER, &i.pods)),
        ("node_affinity", csv("pod_name,node_name", &i.affinity)),
        ("node_anti_affinity", csv("pod_name,node_name", &i.anti)),
    ];
    if i.spread {
        tables.push(("spread_app", "app\na0\n".to_string()));
    }
    if i.zone {
        tables.push(("zone_app", "app\na1\n".to_string()));
    }
    store(t, &tables)
}

/// Objective of each candidate under the eviction costs.
fn evict_objective(g: &GroundModel, cand: &[i64]) -> i64 {
    g.costs
        .weights
        .iter()
        .filter(|&&(i, _)| g.cells[i].unset_value == Some(cand[i]))
        .map(|&(_, w)| -w)
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 60, .. ProptestConfig::default() })]

    #[test]
    fn rewrites_preserve_solutions(i in instance()) {
        let t = template(POLICIES);
        let s = instance_store(&t, &i);
        let fast = bind(&t, &s, &opts(true, Mode::Standard)).unwrap();
        let slow = bind(&t, &s, &opts(false, Mode::Standard)).unwrap();
        prop_assert_eq!(fast.stats().decision_vars, slow.stats().decision_vars);
        let a = model_solutions(&fast);
        let b = model_solutions(&slow);
        let sem = semantic_solutions(&fast, &t, &s);
        let c: BTreeSet<Vec<i64>> = sem.iter().map(|(x, _)| x.clone()).collect();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &c);

        let best = sem.iter().map(|(_, o)| *o).max();
        for g in [&fast, &slow] {
            let r = solve_ground(g, Budget::unlimited());
            match (&r.outcome, best) {
                (SolveOutcome::Optimal { objective, .. }, Some(b)) => prop_assert_eq!(*objective, Some(b)),
                (SolveOutcome::Unsat { .. }, None) => {}
                (o, b) => prop_assert!(false, "outcome {:?} but best {:?}", o, b),
            }
        }
    }

    #[test]
    fn eviction_models_match_semantics(i in instance()) {
        let t = template(POLICIES);
        let s = instance_store(&t, &i);
        let mode = Mode::Evict { priority: "priority".into() };
        let fast = bind(&t, &s, &opts(true, mode.clone())).unwrap();
        let slow = bind(&t, &s, &opts(false, mode)).unwrap();
        let a = model_solutions(&fast);
        let b = model_solutions(&slow);
        let sem = semantic_solutions(&fast, &t, &s);
        let c: BTreeSet<Vec<i64>> = sem.iter().map(|(x, _)| x.clone()).collect();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &c);
        let best = sem.iter().map(|(x, _)| evict_objective(&fast, x)).max();
        let r = solve_ground(&fast, Budget::unlimited());
        match (&r.outcome, best) {
            (SolveOutcome::Optimal { objective, .. }, Some(b)) => prop_assert_eq!(*objective, Some(b)),
            (SolveOutcome::Unsat { .. }, None) => {}
            (o, b) => prop_assert!(false, "outcome {:?} but best {:?}", o, b),
        }
    }
}

const PREDICATES: &str = r#"
-- @variable_columns (node_name)
create table pod (name varchar(100) primary key, cpu integer, node_name varchar(100));
create table node (name varchar(100) primary key, cpu_capacity integer, unschedulable boolean, ready boolean);

-- @hard_constraint
create view node_predicates as
select * from pod join node on pod.node_name = node.name
where node.unschedulable = false and node.ready = true;
"#;

#[test]
fn node_predicates_become_one_membership_per_pod() {
    let t = template(PREDICATES);
    let s = store(&t, &[
        ("node", "name,cpu_capacity,unschedulable,ready\nn1,10,false,true\nn2,10,true,true\nn3,10,false,false\nn4,10,false,true\n".into()),
        ("pod", "name,cpu,node_name\np1,1,?\np2,1,?\np3,1,?\n".into()),
    ]);
    let g = bind(&t, &s, &BindOptions::default()).unwrap();
    assert_eq!(g.stats().decision_vars, 3);
    assert_eq!(g.model.constraints.len(), 3);
    let n1 = g.interner.get("n1").unwrap();
    let n4 = g.interner.get("n4").unwrap();
    for c in &g.model.constraints {
        match c {
            Constraint::Membership { set, negated: false, .. } => {
                assert_eq!(set.values().collect::<Vec<_>>(), vec![n1, n4]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
    let naive = bind(&t, &s, &opts(false, Mode::Standard)).unwrap();
    assert!(naive.model.constraints.len() > 3);
    assert_eq!(model_solutions(&g), model_solutions(&naive));
}

const AFFINITY: &str = r#"
-- @variable_columns (node_name)
create table pod (name varchar(100) primary key, has_affinity boolean, node_name varchar(100));
create table node (name varchar(100) primary key);
create table node_affinity (pod_name varchar(100), node_name varchar(100));
create table avoid (pod_name varchar(100), node_name varchar(100));

-- @hard_constraint
create view on_known_node as select * from pod where pod.node_name in (select node.name from node);

-- @hard_constraint
create view affinity as
select * from pod
where pod.has_affinity = false
   or pod.node_name in (select a.node_name from node_affinity a where a.pod_name = pod.name);

-- @hard_constraint
create view anti as
select * from pod
where pod.node_name not in (select a.node_name from avoid a where a.pod_name = pod.name);
"#;

#[test]
fn in_and_not_in_restrict_domains() {
    let t = template(AFFINITY);
    let s = store(&t, &[
        ("node", "name\nn1\nn2\nn3\n".into()),
        ("pod", "name,has_affinity,node_name\np1,true,?\np2,false,?\np3,true,?\n".into()),
        ("node_affinity", "pod_name,node_name\np1,n1\np1,n3\n".into()),
        ("avoid", "pod_name,node_name\np2,n2\n".into()),
    ]);
    let g = bind(&t, &s, &BindOptions::default()).unwrap();
    let id = |n: &str| g.interner.get(n).unwrap();
    let x = |p: &str| g.cells.iter().find(|c| c.row_key == Value::text(p)).unwrap().var;
    let mut seen = Vec::new();
    for (c, o) in g.model.constraints.iter().zip(&g.model.origins) {
        let group = g.model.groups[o.group.unwrap()].to_string();
        match c {
            Constraint::Membership { x: v, set, negated: false } => seen.push((group, *v, set.values().collect::<Vec<_>>())),
            Constraint::Clause(l) if l.is_empty() => seen.push((group, usize::MAX, vec![])),
            other => panic!("unexpected {other:?}"),
        }
    }
    seen.sort();
    let mut want = vec![
        ("affinity[p1]".to_string(), x("p1"), vec![id("n1"), id("n3")]),
        ("affinity[p3]".to_string(), usize::MAX, vec![]),
        ("anti[p2]".to_string(), x("p2"), vec![id("n1"), id("n3")]),
    ];
    want.sort();
    assert_eq!(seen, want);
    let r = solve_ground(&g, Budget::unlimited());
    assert!(matches!(r.outcome, SolveOutcome::Unsat { .. }));
}

const SPREAD: &str = r#"
-- @variable_columns (node_name)
create table pod (name varchar(100) primary key, app varchar(100), node_name varchar(100));
create table node (name varchar(100) primary key);

-- @hard_constraint
create view on_known_node as select * from pod where pod.node_name in (select node.name from node);

-- @hard_constraint
create view spread as
select pod.app, all_different(pod.node_name) as distinct_nodes from pod group by pod.app;
"#;

fn spread_store(t: &ModelTemplate, pods: usize, nodes: usize) -> Store {
    let nodes: Vec<String> = (0..nodes).map(|i| format!("n{i}")).collect();
    let pods: Vec<String> = (0..pods).map(|i| format!("p{i},a,?")).collect();
    store(t, &[("node", csv("name", &nodes)), ("pod", csv("name,app,node_name", &pods))])
}

#[test]
fn all_different_aggregate_counts() {
    let t = template(SPREAD);
    let s = spread_store(&t, 100, 100);
    let fast = bind(&t, &s, &BindOptions::default()).unwrap();
    let slow = bind(&t, &s, &opts(false, Mode::Standard)).unwrap();
    assert_eq!(fast.stats().count("all_different"), 1);
    assert_eq!(fast.model.constraints.len(), 1);
    assert_eq!(slow.stats().count("linear"), 4950);
    assert_eq!(slow.model.constraints.len(), 4950);

    let s = spread_store(&t, 4, 5);
    let fast = bind(&t, &s, &BindOptions::default()).unwrap();
    let slow = bind(&t, &s, &opts(false, Mode::Standard)).unwrap();
    let a = model_solutions(&fast);
    assert_eq!(a.len(), 5 * 4 * 3 * 2);
    assert_eq!(a, model_solutions(&slow));
}

const ANTI_PAIRS: &str = r#"
-- @variable_columns (node_name)
create table pod (name varchar(100) primary key, node_name varchar(100));
create table node (name varchar(100) primary key);
create table conflict (a varchar(100), b varchar(100));

-- @hard_constraint
create view on_known_node as select * from pod where pod.node_name in (select node.name from node);

-- @hard_constraint
create view apart as
select * from conflict c join pod p on p.name = c.a join pod q on q.name = c.b
where p.node_name != q.node_name;
"#;

#[test]
fn disequality_cliques_are_found_by_presolve() {
    let t = template(ANTI_PAIRS);
    let s = store(&t, &[
        ("node", "name\nn1\nn2\nn3\n".into()),
        ("pod", "name,node_name\na,?\nb,?\nc,?\nd,?\ne,?\n".into()),
        ("conflict", "a,b\na,b\nb,c\na,c\nd,e\n".into()),
    ]);
    let g = bind(&t, &s, &BindOptions::default()).unwrap();
    assert_eq!(g.stats().count("linear"), 4);
    let (m, log) = presolve(&g.model, PresolveOptions::default());
    let kinds: Vec<&str> = m.constraints.iter().map(|c| c.kind_name()).collect();
    assert_eq!(kinds.iter().filter(|k| **k == "all_different").count(), 1);
    assert_eq!(kinds.iter().filter(|k| **k == "linear").count(), 1);
    assert!(log.count() >= 1);
}

const LOAD: &str = r#"
-- @variable_columns (node_name)
create table pod (name varchar(100) primary key, cpu integer, node_name varchar(100));
create table node (name varchar(100) primary key, cpu_capacity integer);

-- @hard_constraint
create view capacity as
select node.name from node join pod on pod.node_name = node.name
group by node.name, node.cpu_capacity
having sum(pod.cpu) <= node.cpu_capacity;

create view spare_capacity_per_node as
select node.name, node.cpu_capacity - sum(pod.cpu) as cpu_spare
from node join pod on pod.node_name = node.name
group by node.name, node.cpu_capacity;

-- @soft_constraint
create view balance as select min(cpu_spare) from spare_capacity_per_node;
"#;

fn load_store(t: &ModelTemplate, pods: &[i64], caps: &[i64]) -> Store {
    let nodes: Vec<String> = caps.iter().enumerate().map(|(i, c)| format!("n{i},{c}")).collect();
    let pods: Vec<String> = pods.iter().enumerate().map(|(i, c)| format!("p{i},{c},?")).collect();
    store(t, &[("node", csv("name,cpu_capacity", &nodes)), ("pod", csv("name,cpu,node_name", &pods))])
}

#[test]
fn sum_of_predicate_needs_no_option_variables() {
    let t = template(LOAD);
    let pods: Vec<i64> = (0..100).map(|i| 1 + i % 7).collect();
    let caps = vec![40; 50];
    let s = load_store(&t, &pods, &caps);
    let fast = bind(&t, &s, &BindOptions::default()).unwrap();
    let slow = bind(&t, &s, &opts(false, Mode::Standard)).unwrap();
    assert_eq!(fast.stats().aux_vars, 0);
    assert_eq!(fast.model.count_kind(VarKind::Option), 0);
    assert!(slow.stats().aux_vars >= 5000, "{}", slow.stats().aux_vars);
    assert_eq!(fast.stats().reified_vars, 5000);
    assert_eq!(fast.stats().count("min_of"), 1);

    let s = load_store(&t, &[3, 7, 3, 7, 2, 5], &[10, 10, 9]);
    let fast = bind(&t, &s, &BindOptions::default()).unwrap();
    let slow = bind(&t, &s, &opts(false, Mode::Standard)).unwrap();
    assert_eq!(model_solutions(&fast), model_solutions(&slow));
}

#[test]
fn balance_objective_packs_pairs() {
    let t = template(LOAD);
    let s = load_store(&t, &[3, 7, 3, 7], &[10, 10]);
    let g = bind(&t, &s, &BindOptions::default()).unwrap();
    let r = solve_ground(&g, Budget::unlimited());
    match r.outcome {
        SolveOutcome::Optimal { objective, .. } => assert_eq!(objective, Some(0)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn scope_limits_variables_to_pending_rows() {
    let t = template(LOAD);
    let mut nodes = Vec::new();
    for i in 0..50 {
        nodes.push(format!("n{i},1000"));
    }
    let mut pods = Vec::new();
    for i in 0..2400 {
        pods.push(format!("placed{i},1,n{}", i % 50));
    }
    for i in 0..50 {
        pods.push(format!("pending{i},1,?"));
    }
    let s = store(&t, &[("node", csv("name,cpu_capacity", &nodes)), ("pod", csv("name,cpu,node_name", &pods))]);
    let g = bind(&t, &s, &BindOptions::default()).unwrap();
    assert_eq!(g.stats().decision_vars, 50);
    assert_eq!(g.cells.len(), 50);
    let all = bind(&t, &s, &BindOptions { scope: Scope::All, ..BindOptions::default() }).unwrap();
    assert_eq!(all.stats().decision_vars, 2450);
    let rows = Scope::Rows(vec![("pod".into(), Value::text("placed7")), ("pod".into(), Value::text("pending3"))]);
    let some = bind(&t, &s, &BindOptions { scope: rows, ..BindOptions::default() }).unwrap();
    assert_eq!(some.stats().decision_vars, 2);
}

#[test]
fn provenance_is_total() {
    let t = template(POLICIES);
    let s = store(&t, &[
        ("node", csv(NODE_HEADER, &["n0,10,2,false,z0".into(), "n1,10,2,false,z1".into(), "n2,4,1,true,z0".into()])),
        ("pod", csv(POD_HEADER, &[
            "p0,a0,3,1,true,?".into(),
            "p1,a0,4,1,false,?".into(),
            "p2,a1,2,0,false,n1".into(),
            "p3,a1,2,2,false,?".into(),
        ])),
        ("node_affinity", "pod_name,node_name\np0,n0\np0,n1\n".into()),
        ("spread_app", "app\na0\n".into()),
        ("zone_app", "app\na1\n".into()),
    ]);
    for rewrites in [true, false] {
        let g = bind(&t, &s, &opts(rewrites, Mode::Standard)).unwrap();
        let names: Vec<&str> = t.views.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(g.model.constraints.len(), g.model.origins.len());
        for (c, o) in g.model.constraints.iter().zip(&g.model.origins) {
            assert!(names.contains(&o.view.as_str()) || o.view == "objective", "{}", o.view);
            if let Some(gid) = o.group {
                assert_eq!(g.model.groups[gid].view, o.view);
            }
            let vars = match c {
                Constraint::Linear(l) => l.terms.iter().map(|t| t.1).collect(),
                Constraint::Clause(ls) => ls.iter().map(|l| l.var).collect(),
                Constraint::AllDifferent(xs) => xs.clone(),
                Constraint::Membership { x, .. } => vec![*x],
                Constraint::Reified { b, atom } => {
                    let mut v = atom.vars();
                    v.push(*b);
                    v
                }
                Constraint::MinOf { y, xs } | Constraint::MaxOf { y, xs } => {
                    let mut v = xs.clone();
                    v.push(*y);
                    v
                }
            };
            assert!(vars.iter().all(|&x| x < g.model.vars.len()));
        }
        assert_eq!(g.dump(), bind(&t, &s, &opts(rewrites, Mode::Standard)).unwrap().dump());
    }
}

#[test]
fn empty_universe_is_unsatisfiable_with_provenance() {
    let t = template(PREDICATES);
    let s = store(&t, &[("pod", "name,cpu,node_name\np1,1,?\n".into())]);
    let g = bind(&t, &s, &BindOptions::default()).unwrap();
    let r = solve_ground(&g, Budget::unlimited());
    assert!(matches!(r.outcome, SolveOutcome::Unsat { .. }));
    assert!(g.model.groups.iter().any(|gr| gr.view == "empty domain"));
}

#[test]
fn tables_without_variables_give_an_empty_model() {
    let src = r#"
create table node (name varchar(100) primary key, cpu integer);
create view big as select * from node where node.cpu > 4;
"#;
    let t = template(src);
    let s = store(&t, &[("node", "name,cpu\nn1,5\n".into())]);
    let g = bind(&t, &s, &BindOptions::default()).unwrap();
    assert_eq!(g.model.vars.len(), 0);
    let r = solve_ground(&g, Budget::unlimited());
    assert!(matches!(r.outcome, SolveOutcome::Optimal { .. }));
    assert!(r.deltas.is_empty());
}

#[test]
fn empty_pending_set_gives_no_variables() {
    let t = template(LOAD);
    let s = store(&t, &[("node", "name,cpu_capacity\nn1,5\n".into()), ("pod", "name,cpu,node_name\np1,1,n1\n".into())]);
    let g = bind(&t, &s, &BindOptions::default()).unwrap();
    assert_eq!(g.stats().decision_vars, 0);
    let r = solve_ground(&g, Budget::unlimited());
    assert!(r.is_solution());
    assert!(r.deltas.is_empty());
}

#[test]
fn overflow_fails_loudly() {
    let t = template(LOAD);
    let s = load_store(&t, &[i64::MAX / 2, i64::MAX / 2, i64::MAX / 2], &[10]);
    assert!(bind(&t, &s, &BindOptions::default()).is_err());
}

#[test]
fn unsupported_shapes_are_rejected() {
    let bad = [
        // grouping by the decision column
        r#"
-- @variable_columns (node_name)
create table pod (name varchar(100) primary key, cpu integer, node_name varchar(100));
create table node (name varchar(100) primary key);
-- @hard_constraint
create view u as select * from pod where pod.node_name in (select node.name from node);
-- @hard_constraint
create view c as select pod.node_name from pod group by pod.node_name having count(*) <= 2;
"#,
        // no way to tell which values the column may take
        r#"
-- @variable_columns (node_name)
create table pod (name varchar(100) primary key, node_name varchar(100));
-- @hard_constraint
create view c as select * from pod where pod.node_name != 'x';
"#,
    ];
    for src in bad {
        let schema = parse_schema(src).unwrap();
        assert!(synthesize(&schema).is_err(), "{src}");
    }
}
