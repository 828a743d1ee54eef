//! Bundled policy files and the clause/predicate line metric.

pub struct PolicyFile {
    pub name: &'static str,
    pub sql: &'static str,
}

/// DDL for the cluster-state tables every policy reads.
pub const TABLES: &str = include_str!("../policies/tables.sql");

/// Self-contained schema for VM migration experiments.
pub const VM_REBALANCE: &str = include_str!("../policies/vm_rebalance.sql");

macro_rules! pack {
    ($($name:literal),* $(,)?) => {
        &[$(PolicyFile { name: $name, sql: include_str!(concat!("../policies/", $name, ".sql")) }),*]
    };
}

pub const PACK: &[PolicyFile] = pack![
    "node_health",
    "capacity",
    "requested_node",
    "no_reassign",
    "node_affinity",
    "node_anti_affinity",
    "pod_affinity",
    "pod_anti_affinity",
    "zone_anti_affinity",
    "service_zone",
    "pods_per_node",
    "even_spread",
    "spread",
    "load_balance",
];

/// Hard rules plus load balancing; what the scenarios run with.
pub const DEFAULT: &[&str] = &[
    "node_health",
    "capacity",
    "requested_node",
    "no_reassign",
    "node_affinity",
    "node_anti_affinity",
    "pod_affinity",
    "pod_anti_affinity",
    "zone_anti_affinity",
    "service_zone",
    "pods_per_node",
    "even_spread",
    "load_balance",
];

pub fn policy(name: &str) -> Option<&'static PolicyFile> {
    PACK.iter().find(|p| p.name == name)
}

/// The tables followed by the named policy files.
///
/// Panics on an unknown name.
pub fn schema(names: &[&str]) -> String {
    let mut s = TABLES.to_string();
    for n in names {
        let p = policy(n).unwrap_or_else(|| panic!("unknown policy {n}"));
        s.push('\n');
        s.push_str(p.sql);
    }
    s
}

/// Primary schema and the reconfiguration schema used when a solve
/// escalates. The latter drops `no_reassign` so that placed pods may be
/// evicted.
pub fn schemas(names: &[&str]) -> (String, String) {
    let reconfig: Vec<&str> = names.iter().copied().filter(|n| *n != "no_reassign").collect();
    (schema(names), schema(&reconfig))
}

const CLAUSES: &[&str] = &["create", "select", "from", "join", "where", "group", "having"];

/// Lines of SQL when every clause and every predicate joined by and/or
/// starts a new line. Comments and string literals are ignored.
pub fn sql_lines(src: &str) -> usize {
    let mut count = 0;
    for line in src.lines() {
        let code = line.split("--").next().unwrap_or("");
        let mut in_str = false;
        let mut word = String::new();
        let mut flush = |w: &mut String| {
            let lw = w.to_ascii_lowercase();
            if CLAUSES.contains(&lw.as_str()) || lw == "and" || lw == "or" {
                count += 1;
            }
            w.clear();
        };
        for ch in code.chars() {
            if ch == '\'' {
                in_str = !in_str;
                flush(&mut word);
                continue;
            }
            if in_str {
                continue;
            }
            if ch.is_ascii_alphanumeric() || ch == '_' {
                word.push(ch);
            } else {
                flush(&mut word);
            }
        }
        flush(&mut word);
    }
    count
}
