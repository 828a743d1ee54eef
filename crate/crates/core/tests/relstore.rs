use proptest::prelude::*;
use weave_core::compiler::parse_schema;
use weave_core::schema::{ColumnDef, TableDef};
use weave_core::{DataType, Delta, Store, StoreError, Value};

fn table(name: &str, cols: &[(&str, DataType, bool)], pk: Option<usize>) -> TableDef {
    TableDef {
        name: name.into(),
        columns: cols
            .iter()
            .map(|&(n, t, v)| ColumnDef {
                name: n.into(),
                dtype: t,
                is_variable: v,
            })
            .collect(),
        primary_key: pk,
    }
}

fn pods() -> Store {
    let mut s = Store::new();
    s.create_table(table(
        "pod",
        &[("name", DataType::Text, false), ("cpu", DataType::Integer, false), ("node", DataType::Text, true)],
        Some(0),
    ))
    .unwrap();
    s
}

fn text(s: &str) -> Value {
    Value::Text(s.into())
}

fn delta(key: &str, col: &str, v: Value) -> Delta {
    Delta {
        table: "pod".into(),
        row_key: text(key),
        column: col.into(),
        new_value: v,
    }
}

#[test]
fn table_creation_errors() {
    let mut s = pods();
    let again = table("pod", &[("a", DataType::Integer, false)], None);
    assert_eq!(s.create_table(again), Err(StoreError::DuplicateTable("pod".into())));
    assert_eq!(s.create_table(table("empty", &[], None)), Err(StoreError::NoColumns("empty".into())));
}

#[test]
fn inserts_are_checked_and_atomic() {
    let mut s = pods();
    let err = s.insert_rows("pod", vec![vec![text("a"), Value::Int(1)]]).unwrap_err();
    assert!(matches!(err, StoreError::Arity { expected: 3, found: 2, .. }));
    let err = s.insert_rows("pod", vec![vec![text("a"), text("x"), Value::Unset]]).unwrap_err();
    assert!(matches!(err, StoreError::Type { .. }));
    let err = s.insert_rows("pod", vec![vec![text("a"), Value::Unset, Value::Unset]]).unwrap_err();
    assert!(matches!(err, StoreError::UnsetInput { .. }));
    let rows = vec![vec![text("a"), Value::Int(1), Value::Unset], vec![text("a"), Value::Int(2), Value::Unset]];
    assert!(matches!(s.insert_rows("pod", rows), Err(StoreError::DuplicateKey { .. })));
    assert!(s.relation("pod").unwrap().is_empty());
    assert!(matches!(s.insert_rows("nope", vec![]), Err(StoreError::UnknownTable(_))));
}

#[test]
fn csv_round_trip_keeps_unset_cells() {
    let mut s = pods();
    let src = "name,cpu,node\na,1,?\nb,2,n1\n\"c, d\",3,?\n";
    assert_eq!(s.load_csv("pod", src).unwrap(), 3);
    let rel = s.relation("pod").unwrap();
    assert!(rel.row_by_key(&text("a")).unwrap()[2].is_unset());
    assert_eq!(rel.row_by_key(&text("b")).unwrap()[2], text("n1"));
    let out = s.export_csv("pod").unwrap();
    let mut t = pods();
    t.load_csv("pod", &out).unwrap();
    assert_eq!(s.relation("pod").unwrap().rows(), t.relation("pod").unwrap().rows());
    assert_eq!(t.export_csv("pod").unwrap(), out);
}

#[test]
fn csv_columns_may_come_in_any_order() {
    let mut s = pods();
    s.load_csv("pod", "node,name,cpu\n?,a,4\n").unwrap();
    assert_eq!(s.relation("pod").unwrap().rows()[0], vec![text("a"), Value::Int(4), Value::Unset]);
}

#[test]
fn csv_errors() {
    let mut s = pods();
    assert!(matches!(s.load_csv("pod", "name,cpu\na,1\n"), Err(StoreError::Header { .. })));
    assert!(matches!(s.load_csv("pod", "name,cpu,node,extra\na,1,?,x\n"), Err(StoreError::Header { .. })));
    match s.load_csv("pod", "name,cpu,node\na,1,?\nb,two,?\n") {
        Err(StoreError::Csv { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(s.load_csv("pod", "name,cpu,node\na,?,?\n").is_err());
    assert!(s.relation("pod").unwrap().is_empty());
}

#[test]
fn deltas_apply_atomically() {
    let mut s = pods();
    s.load_csv("pod", "name,cpu,node\na,1,?\nb,2,?\n").unwrap();
    let before = s.export_csv("pod").unwrap();
    s.apply_deltas(&[]).unwrap();
    assert_eq!(s.export_csv("pod").unwrap(), before);

    let bad_col = [delta("a", "node", text("n1")), delta("b", "cpu", Value::Int(3))];
    assert!(matches!(s.apply_deltas(&bad_col), Err(StoreError::NotVariable { .. })));
    let bad_row = [delta("a", "node", text("n1")), delta("zz", "node", text("n1"))];
    assert!(matches!(s.apply_deltas(&bad_row), Err(StoreError::UnknownRow { .. })));
    let bad_type = [delta("a", "node", Value::Int(1))];
    assert!(matches!(s.apply_deltas(&bad_type), Err(StoreError::Type { .. })));
    assert_eq!(s.export_csv("pod").unwrap(), before);

    let good = [delta("a", "node", text("n1")), delta("b", "node", text("n2"))];
    s.apply_deltas(&good).unwrap();
    let once = s.export_csv("pod").unwrap();
    s.apply_deltas(&good).unwrap();
    assert_eq!(s.export_csv("pod").unwrap(), once);
    assert_eq!(once, "name,cpu,node\na,1,n1\nb,2,n2\n");
}

#[test]
fn deleting_rows_updates_the_key_index() {
    let mut s = pods();
    s.load_csv("pod", "name,cpu,node\na,1,?\nb,2,?\nc,3,?\n").unwrap();
    assert_eq!(s.delete_rows("pod", &[text("a")]).unwrap(), 1);
    assert!(s.delete_rows("pod", &[text("a")]).is_err());
    let rel = s.relation("pod").unwrap();
    assert_eq!(rel.len(), 2);
    assert_eq!(rel.row_by_key(&text("c")).unwrap()[1], Value::Int(3));
}

const VIEWS: &str = r#"
create table a (k integer primary key, x integer, y integer, s varchar(10));
create table b (x integer, z integer);
-- @variable_columns (v)
create table w (k integer primary key, v integer);
create view joined as select a.x, b.z from a join b on a.x = b.x where a.y < b.z;
create view grouped as select a.s, count(*), sum(a.y), min(a.y) from a group by a.s;
create view nested as select a.k from a where a.y in (select b.z from b where b.x = a.x);
create view excluded as select a.k from a where a.y not in (select b.z from b);
create view having_view as select b.x, max(b.z) from b group by b.x having count(*) > 1;
create view touches_w as select w.k from w join a on w.v = a.k;
-- @hard_constraint
create view h as select * from touches_w where touches_w.k > 0;
"#;

type ARow = (i64, i64, i64, String);

fn store_with(a: &[ARow], b: &[(i64, i64)]) -> (weave_core::Schema, Store) {
    let schema = parse_schema(VIEWS).unwrap();
    let mut s = Store::for_schema(&schema).unwrap();
    s.insert_rows(
        "a",
        a.iter().map(|(k, x, y, t)| vec![Value::Int(*k), Value::Int(*x), Value::Int(*y), text(t)]).collect(),
    )
    .unwrap();
    s.insert_rows("b", b.iter().map(|(x, z)| vec![Value::Int(*x), Value::Int(*z)]).collect()).unwrap();
    (schema, s)
}

fn ints(rows: Vec<Vec<i64>>) -> Vec<Vec<Value>> {
    let mut out: Vec<Vec<Value>> = rows.into_iter().map(|r| r.into_iter().map(Value::Int).collect()).collect();
    out.sort();
    out
}

fn rows_of(s: &Store, schema: &weave_core::Schema, view: &str) -> Vec<Vec<Value>> {
    let mut r = s.eval_input_view(schema, view).unwrap().rows;
    r.sort();
    r
}

fn a_rows() -> impl Strategy<Value = Vec<ARow>> {
    prop::collection::vec((0i64..5, -3i64..4, prop::sample::select(vec!["p", "q", "r"])), 0..12).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(k, (x, y, s))| (k as i64, x, y, s.to_string()))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, .. ProptestConfig::default() })]

    #[test]
    fn input_views_match_nested_loops(a in a_rows(), b in prop::collection::vec((0i64..5, -3i64..4), 0..12)) {
        let (schema, s) = store_with(&a, &b);

        let mut want = Vec::new();
        for ra in &a {
            for rb in &b {
                if ra.1 == rb.0 && ra.2 < rb.1 {
                    want.push(vec![ra.1, rb.1]);
                }
            }
        }
        prop_assert_eq!(rows_of(&s, &schema, "joined"), ints(want));

        let mut want = Vec::new();
        for key in ["p", "q", "r"] {
            let ys: Vec<i64> = a.iter().filter(|r| r.3 == key).map(|r| r.2).collect();
            if !ys.is_empty() {
                want.push(vec![text(key), Value::Int(ys.len() as i64), Value::Int(ys.iter().sum()), Value::Int(*ys.iter().min().unwrap())]);
            }
        }
        want.sort();
        prop_assert_eq!(rows_of(&s, &schema, "grouped"), want);

        let want: Vec<Vec<i64>> = a.iter().filter(|ra| b.iter().any(|rb| rb.0 == ra.1 && rb.1 == ra.2)).map(|ra| vec![ra.0]).collect();
        prop_assert_eq!(rows_of(&s, &schema, "nested"), ints(want));

        let want: Vec<Vec<i64>> = a.iter().filter(|ra| b.iter().all(|rb| rb.1 != ra.2)).map(|ra| vec![ra.0]).collect();
        prop_assert_eq!(rows_of(&s, &schema, "excluded"), ints(want));

        let mut want = Vec::new();
        for x in 0..5 {
            let zs: Vec<i64> = b.iter().filter(|r| r.0 == x).map(|r| r.1).collect();
            if zs.len() > 1 {
                want.push(vec![x, *zs.iter().max().unwrap()]);
            }
        }
        prop_assert_eq!(rows_of(&s, &schema, "having_view"), ints(want));
    }
}

#[test]
fn views_over_variable_columns_are_refused() {
    let (schema, s) = store_with(&[], &[]);
    assert!(matches!(s.eval_input_view(&schema, "touches_w"), Err(StoreError::VariableView(_))));
    assert!(matches!(s.eval_input_view(&schema, "h"), Err(StoreError::VariableView(_))));
    assert!(matches!(s.eval_input_view(&schema, "missing"), Err(StoreError::UnknownView(_))));
}

#[test]
fn full_evaluation_treats_unset_as_matching_nothing() {
    let (schema, mut s) = store_with(&[(1, 0, 0, "p".into()), (2, 0, 0, "p".into())], &[]);
    s.insert_rows("w", vec![vec![Value::Int(10), Value::Int(2)], vec![Value::Int(11), Value::Unset]]).unwrap();
    assert_eq!(s.eval_view(&schema, "touches_w").unwrap().rows, vec![vec![Value::Int(10)]]);
}
