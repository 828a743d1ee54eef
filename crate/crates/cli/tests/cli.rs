use std::fs;
use std::path::Path;
use std::process::Command;

const SCHEMA: &str = r#"
-- @variable_columns (node_name)
create table pod (name varchar(100) primary key, cpu integer, node_name varchar(100));
create table node (name varchar(100) primary key, cpu_capacity integer);

-- @hard_constraint
create view on_node as select * from pod where pod.node_name in (select node.name from node);

-- @hard_constraint
create view capacity as
select node.name from node join pod on pod.node_name = node.name
group by node.name, node.cpu_capacity
having sum(pod.cpu) <= node.cpu_capacity;
"#;

fn weave(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_weave")).args(args).output().unwrap()
}

fn setup(dir: &Path, pods: &str) {
    fs::write(dir.join("schema.sql"), SCHEMA).unwrap();
    fs::write(dir.join("node.csv"), "name,cpu_capacity\nn1,10\nn2,10\n").unwrap();
    fs::write(dir.join("pod.csv"), pods).unwrap();
}

#[test]
fn solve_writes_deltas_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), "name,cpu,node_name\np1,7,n1\np2,7,?\np3,3,?\n");
    let d = dir.path().to_str().unwrap();
    let schema = format!("{d}/schema.sql");
    let stats = format!("{d}/stats.json");
    let out = weave(&["solve", "--schema", &schema, "--data", d, "--nodes", "10000", "--stats", &stats]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let deltas = fs::read_to_string(dir.path().join("pod.delta.csv")).unwrap();
    assert!(deltas.contains("p2,node_name,n2"), "{deltas}");
    assert!(deltas.contains("p3,node_name,n1"), "{deltas}");
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(stats["decision_vars"], 2);
}

#[test]
fn unsat_exits_with_two_and_names_the_core() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), "name,cpu,node_name\np1,11,?\n");
    let d = dir.path().to_str().unwrap();
    let schema = format!("{d}/schema.sql");
    let out = weave(&["solve", "--schema", &schema, "--data", d]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("capacity[n1"), "{err}");
    assert!(err.contains("capacity[n2"), "{err}");
}

#[test]
fn compile_errors_point_at_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.sql");
    fs::write(&path, "create table t (a integer);\ncreate view v as select b from t;\n").unwrap();
    let out = weave(&["compile", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.sql:2:"), "{err}");
}

#[test]
fn compile_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), "name,cpu,node_name\np1,7,?\np2,7,?\n");
    let d = dir.path().to_str().unwrap();
    let schema = format!("{d}/schema.sql");
    let out = weave(&["compile", &schema, "--data", d, "--stats"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["decision_vars"], 2);
}
