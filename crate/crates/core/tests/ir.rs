use proptest::prelude::*;
use weave_core::compiler::parse_schema;
use weave_core::ir::eval::ConcreteEval;
use weave_core::ir::{anchors, lower_view, split_qualifiers, IrExpr};
use weave_core::{Schema, Store, Value};

const SCHEMA: &str = r#"
-- @variable_columns (node)
create table pod (name varchar(10) primary key, cpu integer, tier integer, node varchar(10));
create table node (name varchar(10) primary key, cap integer, zone integer);
create table tag (pod varchar(10), node varchar(10));

create view tagged as select tag.pod as pod, tag.node as node from tag;
create view zone_load as select node.zone as zone, count(*) as n from node group by node.zone;

-- @hard_constraint
create view on_tagged as
select * from pod
where pod.node in (select tagged.node from tagged where tagged.pod = pod.name);

-- @hard_constraint
create view not_tagged as
select * from pod
where pod.node not in (select tag.node from tag where tag.pod = pod.name) or pod.tier > 1;

-- @hard_constraint
create view fits as
select * from pod join node on pod.node = node.name
where pod.cpu <= node.cap and node.zone <= (select max(zone_load.n) from zone_load where zone_load.zone = pod.tier);

-- @hard_constraint
create view counted as
select * from pod
where pod.tier < (select count(*) from tag where tag.pod = pod.name) + 2;

-- @hard_constraint
create view capacity as
select node.name, sum(pod.cpu) from pod join node on pod.node = node.name
group by node.name, node.cap
having sum(pod.cpu) <= node.cap;

-- @hard_constraint
create view tiers as
select pod.tier, all_different(pod.node) from pod group by pod.tier;
"#;

const NODES: [&str; 3] = ["n0", "n1", "n2"];

fn ground_store(schema: &Schema, pods: &[(i64, i64, usize)], caps: &[(i64, i64)], tags: &[(usize, usize)]) -> Store {
    let mut s = Store::for_schema(schema).unwrap();
    let t = |x: String| Value::Text(x);
    s.insert_rows(
        "node",
        caps.iter().enumerate().map(|(i, &(c, z))| vec![t(NODES[i].into()), Value::Int(c), Value::Int(z)]).collect(),
    )
    .unwrap();
    s.insert_rows(
        "pod",
        pods.iter()
            .enumerate()
            .map(|(i, &(cpu, tier, n))| vec![t(format!("p{i}")), Value::Int(cpu), Value::Int(tier), t(NODES[n].into())])
            .collect(),
    )
    .unwrap();
    s.insert_rows("tag", tags.iter().map(|&(p, n)| vec![t(format!("p{p}")), t(NODES[n].into())]).collect())
        .unwrap();
    s
}

fn instance() -> impl Strategy<Value = (Vec<(i64, i64, usize)>, Vec<(i64, i64)>, Vec<(usize, usize)>)> {
    (
        prop::collection::vec((0i64..4, 0i64..3, 0usize..3), 0..7),
        prop::collection::vec((0i64..6, 0i64..3), 3),
        prop::collection::vec((0usize..7, 0usize..3), 0..8),
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, .. ProptestConfig::default() })]

    /// On a store without unset cells the unnested comprehension computes
    /// what the direct SQL evaluation computes.
    #[test]
    fn unnesting_preserves_view_contents((pods, caps, tags) in instance()) {
        let schema = parse_schema(SCHEMA).unwrap();
        let s = ground_store(&schema, &pods, &caps, &tags);
        let ir = ConcreteEval::new(&schema, &s);
        for v in &schema.views {
            let c = lower_view(&schema, v).unwrap();
            let mut got = ir.eval(&c).unwrap();
            got.sort();
            let mut want = s.eval_view(&schema, &v.name).unwrap().rows;
            want.sort();
            prop_assert_eq!(got, want, "view {}", v.name);
        }
    }
}

#[test]
fn split_partitions_the_qualifiers() {
    let schema = parse_schema(SCHEMA).unwrap();
    for v in &schema.views {
        let c = lower_view(&schema, v).unwrap();
        let split = split_qualifiers(&c);
        let mut all: Vec<usize> = split.static_part.iter().chain(&split.dynamic_part).copied().collect();
        all.sort();
        assert_eq!(all, (0..c.qualifiers.len()).collect::<Vec<_>>(), "{}", v.name);
        for &q in &split.static_part {
            let mut reads_var = false;
            c.qualifiers[q].expr.for_each_col(&mut |g, col| reads_var |= c.generators[g].columns[col].variable);
            assert!(!reads_var, "{}: static qualifier reads a variable", v.name);
        }
    }
}

#[test]
fn join_on_a_variable_column_binds_the_joined_table() {
    let schema = parse_schema(SCHEMA).unwrap();
    let c = lower_view(&schema, schema.view("fits").unwrap()).unwrap();
    let split = split_qualifiers(&c);
    assert_eq!(split.decision_bound, vec![false, true]);
    assert_eq!(split.static_part.len(), 0);
    assert_eq!(anchors(&c, &split), vec![0]);
}

#[test]
fn subqueries_become_keyed_lookups() {
    let schema = parse_schema(SCHEMA).unwrap();
    let c = lower_view(&schema, schema.view("on_tagged").unwrap()).unwrap();
    assert_eq!(c.lookups.len(), 1);
    assert_eq!(c.lookups[0].key_len, 1);
    assert!(matches!(c.qualifiers[0].expr, IrExpr::Member { negated: false, .. }));
    assert_eq!(c.to_string(), "[pod.name, pod.cpu, pod.tier, pod.node | pod ← pod; pod.node ∈ S0(pod.name)]\n  where S0 = [tagged.pod, tagged.node | tagged ← tagged]");

    let c = lower_view(&schema, schema.view("capacity").unwrap()).unwrap();
    assert!(c.aggregate);
    assert_eq!(c.group_key.len(), 2);
    assert!(c.having.is_some());
    assert_eq!(c.generators.len(), 2);
    assert_eq!(c.qualifiers.len(), 1);
}

#[test]
fn correlated_scalar_subqueries_use_the_empty_default() {
    let schema = parse_schema(SCHEMA).unwrap();
    let s = ground_store(&schema, &[(1, 1, 0)], &[(4, 0), (4, 0), (4, 0)], &[]);
    let c = lower_view(&schema, schema.view("counted").unwrap()).unwrap();
    let rows = ConcreteEval::new(&schema, &s).eval(&c).unwrap();
    assert_eq!(rows.len(), 1);
}

#[test]
fn non_equality_correlation_is_rejected() {
    let src = SCHEMA.to_string()
        + "-- @hard_constraint\ncreate view ranged as select * from pod where pod.cpu <= (select max(node.cap) from node where node.zone >= pod.tier);\n";
    let err = parse_schema(&src).and_then(|s| lower_view(&s, s.view("ranged").unwrap())).unwrap_err();
    assert!(err.to_string().contains("must be an equality"), "{err}");
}
