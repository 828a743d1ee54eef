use proptest::prelude::*;
use weave_core::compiler::parse_schema;
use weave_core::sqlfront::ast::Statement;
use weave_core::sqlfront::parser::parse_statements;
use weave_core::sqlfront::{parse_program, SqlError};
use weave_core::{CompileError, ViewClass};

const POD_SCHEMA: &str = r#"
-- @variable_columns (controllable__node_name)
create table pods_to_assign (
  pod_name varchar(100) primary key,
  cpu_request integer,
  has_requested_node_affinity boolean,
  controllable__node_name varchar(100)
);
create table node (
  name varchar(100) primary key,
  unschedulable boolean,
  memory_pressure boolean,
  disk_pressure boolean,
  ready boolean,
  cpu_allocatable integer
);
create table node_labels (node_name varchar(100), label varchar(100));
create table pod_labels (pod_name varchar(100), label varchar(100));
"#;

const NODE_PREDICATES: &str = r#"
-- @hard_constraint
create view constraint_node_predicates as
select * from pods_to_assign
join node on pods_to_assign.controllable__node_name = node.name
where node.unschedulable = false
  and node.memory_pressure = false
  and node.disk_pressure = false
  and node.ready = true;
"#;

const LOAD_BALANCE: &str = r#"
create view spare_capacity_per_node as
select node.name as name, node.cpu_allocatable - sum(pods_to_assign.cpu_request) as cpu_spare
from node
join pods_to_assign on pods_to_assign.controllable__node_name = node.name
group by node.name, node.cpu_allocatable;

-- @soft_constraint
create view constraint_load_balance_cpu as
select min(cpu_spare) from spare_capacity_per_node;
"#;

const CANDIDATES: &str = r#"
create view candidate_nodes_for_pods as
select pod_labels.pod_name as pod_name, node_labels.node_name as node_name
from pod_labels join node_labels on pod_labels.label = node_labels.label;

-- @hard_constraint
create view constraint_node_affinity as
select * from pods_to_assign
where pods_to_assign.has_requested_node_affinity = false
   or pods_to_assign.controllable__node_name in
      (select candidate_nodes_for_pods.node_name from candidate_nodes_for_pods
       where candidate_nodes_for_pods.pod_name = pods_to_assign.pod_name);
"#;

fn program(parts: &[&str]) -> String {
    parts.concat()
}

fn syntax_error(src: &str) -> SqlError {
    match parse_program(src) {
        Err(e) => e,
        Ok(_) => panic!("accepted: {src}"),
    }
}

#[test]
fn node_predicate_view_parses_as_hard_constraint() {
    let (tables, views) = parse_program(&program(&[POD_SCHEMA, NODE_PREDICATES])).unwrap();
    assert_eq!(tables.len(), 4);
    assert!(tables[0].columns[3].is_variable);
    let v = &views[0];
    assert_eq!(v.name, "constraint_node_predicates");
    assert_eq!(v.annotated, Some(ViewClass::Hard));
    assert_eq!(v.query.joins.len(), 1);
    assert_eq!(v.query.selection.as_ref().unwrap().conjuncts().len(), 4);
}

#[test]
fn load_balance_views_classify_as_auxiliary_and_soft() {
    let s = parse_schema(&program(&[POD_SCHEMA, LOAD_BALANCE])).unwrap();
    assert_eq!(s.view("spare_capacity_per_node").unwrap().class, ViewClass::Auxiliary);
    assert_eq!(s.view("constraint_load_balance_cpu").unwrap().class, ViewClass::Soft);
}

#[test]
fn label_only_views_are_input_views() {
    let s = parse_schema(&program(&[POD_SCHEMA, CANDIDATES])).unwrap();
    let v = s.view("candidate_nodes_for_pods").unwrap();
    assert_eq!(v.class, ViewClass::Input);
    assert!(!v.variable_dependent);
    assert_eq!(s.view("constraint_node_affinity").unwrap().class, ViewClass::Hard);
}

#[test]
fn syntax_errors_carry_positions() {
    let e = syntax_error("create table t (a integer);\ncreate view v as select * from t limit 5;");
    assert_eq!(e.line, 2);
    assert!(e.col > 1);
    let e = syntax_error("create table t (a integer,\n  b intger);");
    assert_eq!(e.line, 2);
    let e = syntax_error("-- @hard_constrain\ncreate view v as select * from t;");
    assert!(e.msg.contains("unknown annotation"), "{}", e.msg);
    let e = syntax_error("-- @hard_constraint\ncreate table t (a integer);");
    assert!(e.msg.contains("not allowed on a table"), "{}", e.msg);
    let e = syntax_error("-- @variable_columns (a)\ncreate view v as select * from t;");
    assert!(e.msg.contains("only allowed on a table"), "{}", e.msg);
    assert!(parse_program("create table t ();").is_err());
    assert!(parse_program("create table t (a integer, a integer);").is_err());
    assert!(parse_program("-- @variable_columns (b)\ncreate table t (a integer primary key);").is_err());
    assert!(parse_program("-- @variable_columns (b)\ncreate table t (a integer primary key, b boolean);").is_err());
}

#[test]
fn rendered_errors_name_file_and_position() {
    let err = parse_schema("create view v as select from t;").unwrap_err();
    let text = err.render("policy.sql");
    assert!(text.starts_with("policy.sql:1:"), "{text}");
}

fn schema_err(src: &str) -> String {
    match parse_schema(src) {
        Err(e) => e.to_string(),
        Ok(_) => panic!("accepted: {src}"),
    }
}

#[test]
fn classification_errors() {
    let base = "-- @variable_columns (n)\ncreate table p (k integer primary key, n varchar(100), c integer);\ncreate table m (n varchar(100) primary key);\n";
    let e = schema_err(&format!("{base}create view a as select * from b;\ncreate view b as select * from a;"));
    assert!(e.contains("cycle"), "{e}");
    let e = schema_err(&format!("{base}create view a as select * from p join m on p.n = m.n;"));
    assert!(e.contains("no constraint view uses it"), "{e}");
    let e = schema_err(&format!("{base}-- @soft_constraint\ncreate view s as select p.c from p;"));
    assert!(e.contains("exactly one"), "{e}");
    let e = schema_err(&format!(
        "{base}-- @soft_constraint\ncreate view s as select sum(p.c) from p;\n-- @soft_constraint\ncreate view t as select min(s.sum) from s;"
    ));
    assert!(e.contains("constraint view"), "{e}");
    let e = schema_err(&format!("{base}-- @hard_constraint\ncreate view h as select * from m where m.n = 'x';"));
    assert!(e.contains("does not depend"), "{e}");
    let e = schema_err(&format!("{base}-- @hard_constraint\ncreate view h as select * from p join m on p.n = m.n where n = 'x';"));
    assert!(e.contains("ambiguous"), "{e}");
    let e = schema_err(&format!("{base}-- @hard_constraint\ncreate view h as select * from p where p.missing = 1;"));
    assert!(e.contains("no column"), "{e}");
    let e = schema_err(&format!("{base}create view a as select * from p, m;"));
    assert!(!e.is_empty());
}

#[test]
fn input_views_cannot_be_evaluated_if_they_touch_variables() {
    let src = program(&[POD_SCHEMA, LOAD_BALANCE, CANDIDATES]);
    let s = parse_schema(&src).unwrap();
    let store = weave_core::Store::for_schema(&s).unwrap();
    assert!(store.eval_input_view(&s, "candidate_nodes_for_pods").is_ok());
    assert!(store.eval_input_view(&s, "spare_capacity_per_node").is_err());
}

#[test]
fn classification_ignores_view_order() {
    let views = [NODE_PREDICATES, LOAD_BALANCE, CANDIDATES];
    let orders = [[0, 1, 2], [2, 1, 0], [1, 2, 0], [2, 0, 1]];
    let mut seen = Vec::new();
    for o in orders {
        let src: String = std::iter::once(POD_SCHEMA).chain(o.iter().map(|&i| views[i])).collect();
        let s = parse_schema(&src).unwrap();
        let mut classes: Vec<(String, ViewClass)> = s.views.iter().map(|v| (v.name.clone(), v.class)).collect();
        classes.sort_by(|a, b| a.0.cmp(&b.0));
        seen.push(classes);
        let pos = |n: &str| s.views.iter().position(|v| v.name == n).unwrap();
        assert!(pos("spare_capacity_per_node") < pos("constraint_load_balance_cpu"));
        assert!(pos("candidate_nodes_for_pods") < pos("constraint_node_affinity"));
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn keywords_are_case_insensitive() {
    let src = POD_SCHEMA.to_string() + "-- @hard_constraint\nCREATE VIEW v AS SELECT * FROM pods_to_assign JOIN node ON pods_to_assign.controllable__node_name = node.name WHERE node.ready = TRUE;";
    assert!(parse_schema(&src).is_ok());
    let bad = POD_SCHEMA.to_string() + "create view v as select * from NODE;";
    assert!(matches!(parse_schema(&bad), Err(CompileError::View { .. })));
}

fn expr(depth: u32) -> BoxedStrategy<String> {
    let leaf = prop_oneof![
        Just("t.a".to_string()),
        Just("t.b".to_string()),
        Just("u.c".to_string()),
        Just("a".to_string()),
        (-50i64..50).prop_map(|v| v.to_string()),
        "[a-z ']{0,6}".prop_map(|s| format!("'{}'", s.replace('\'', "''"))),
        Just("true".to_string()),
        Just("false".to_string()),
    ];
    if depth == 0 {
        return leaf.boxed();
    }
    let sub = expr(depth - 1);
    prop_oneof![
        3 => leaf,
        3 => (sub.clone(), prop::sample::select(vec!["and", "or", "=", "!=", "<", "<=", ">", ">=", "+", "-", "*"]), sub.clone())
            .prop_map(|(l, op, r)| format!("({l} {op} {r})")),
        1 => sub.clone().prop_map(|e| format!("(not {e})")),
        1 => sub.clone().prop_map(|e| format!("-({e})")),
        1 => (sub.clone(), any::<bool>(), sub.clone()).prop_map(|(e, neg, w)| {
            format!("({e} {} (select v.a from v where v.b = {w}))", if neg { "not in" } else { "in" })
        }),
        1 => sub.clone().prop_map(|w| format!("(select max(v.a) from v where {w})")),
    ]
    .boxed()
}

fn query() -> impl Strategy<Value = String> {
    (
        prop::collection::vec((expr(2), prop::option::of("[a-z]{1,4}")), 1..3),
        any::<bool>(),
        prop::option::of(expr(3)),
        prop::option::of(expr(2)),
        any::<bool>(),
    )
        .prop_map(|(proj, join, selection, having, agg)| {
            let mut items: Vec<String> = proj
                .iter()
                .map(|(e, a)| match a {
                    Some(a) => format!("{e} as x{a}"),
                    None => e.clone(),
                })
                .collect();
            if agg {
                items.push("count(*)".into());
                items.push("sum(t.a)".into());
            }
            let mut q = format!("select {} from t", items.join(", "));
            if join {
                q.push_str(" join u as w on t.a = w.c");
            }
            if let Some(w) = selection {
                q.push_str(&format!(" where {w}"));
            }
            if agg {
                q.push_str(" group by t.a, t.b");
                if let Some(h) = having {
                    q.push_str(&format!(" having {h}"));
                }
            }
            format!("create view q as {q};")
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, .. ProptestConfig::default() })]

    #[test]
    fn printing_then_parsing_is_a_fixpoint(src in query()) {
        let first = parse_statements(&src).unwrap();
        let printed: String = first.iter().map(|s| format!("{s}\n")).collect();
        let second = parse_statements(&printed).unwrap();
        let (Statement::View(a), Statement::View(b)) = (&first[0], &second[0]) else { panic!() };
        prop_assert_eq!(&a.query, &b.query);
        let reprinted: String = second.iter().map(|s| format!("{s}\n")).collect();
        prop_assert_eq!(printed, reprinted);
    }
}
