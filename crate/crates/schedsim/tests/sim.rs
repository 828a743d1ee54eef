use std::collections::{BTreeMap, HashMap};

use weave_core::compiler::Scope;
use weave_core::solver::Budget;
use weave_core::Value;
use weave_sim::batch::batch_on;
use weave_sim::run::{run_scenario, Scenario, SimParams};
use weave_sim::scenarios::{greedy_rebalance, imbalanced_vms, packing_instance, preemption_waves};
use weave_sim::*;

fn app_spec(apps: usize, cache: usize, web: usize) -> AppSpec {
    AppSpec {
        apps,
        cache,
        web,
        cpu: Demand::Exponential { mean: 300.0 },
        mem: Demand::Fixed(200),
        priority: 1,
        gap_ms: 10,
    }
}

#[test]
fn workload_shape_and_edges() {
    let cluster = ClusterSpec::uniform(10, 4_000, 4_000, 2);
    let pods = generate_workload(&cluster, &app_spec(8, 1, 9), 7).unwrap();
    assert_eq!(pods.len(), 80);
    let affinity: usize = pods.iter().map(|p| p.affinity.len()).sum();
    let anti: usize = pods.iter().map(|p| p.anti_affinity.len()).sum();
    assert_eq!(affinity, 72);
    assert_eq!(anti, 80);
    assert!(pods.iter().all(|p| p.cpu >= 1 && p.cpu <= 4_000 && p.mem == 200));
    assert!(pods.windows(2).all(|w| w[0].arrival_ms < w[1].arrival_ms));
    let web = pods.iter().find(|p| p.name == "app-03-web-00").unwrap();
    assert_eq!(web.affinity, vec!["app-03-cache".to_string()]);
}

#[test]
fn workload_is_seeded() {
    let cluster = ClusterSpec::uniform(10, 4_000, 4_000, 2);
    let a = generate_workload(&cluster, &app_spec(4, 2, 3), 11).unwrap();
    let b = generate_workload(&cluster, &app_spec(4, 2, 3), 11).unwrap();
    let c = generate_workload(&cluster, &app_spec(4, 2, 3), 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn workload_errors() {
    let cluster = ClusterSpec::uniform(4, 100, 100, 1);
    let mut spec = app_spec(1, 1, 1);
    spec.cpu = Demand::Exponential { mean: 0.0 };
    assert!(matches!(generate_workload(&cluster, &spec, 0), Err(WorkloadError::Demand(_))));
    assert!(generate_workload(&cluster, &app_spec(1, 0, 2), 0).is_err());
    assert!(generate_workload(&ClusterSpec::uniform(0, 100, 100, 1), &app_spec(1, 1, 1), 0).is_err());
    assert!(generate_workload(&ClusterSpec::uniform(2, 0, 100, 1), &app_spec(1, 1, 1), 0).is_err());
}

#[test]
fn greedy_strands_the_last_pod_and_a_batch_does_not() {
    let (cluster, pods) = packing_instance();
    let g = greedy_schedule(&cluster, &pods, &GreedyOptions::default()).unwrap();
    assert_eq!((g.placed, g.pods), (3, 4));
    assert_eq!(g.violations, 0);
    let one = batch_schedule(&cluster, &pods, &BatchOptions { b: 1, ..BatchOptions::default() }).unwrap();
    assert_eq!(one.placed, g.placed);
    let four = batch_schedule(&cluster, &pods, &BatchOptions { b: 4, ..BatchOptions::default() }).unwrap();
    assert_eq!((four.placed, four.events.len()), (4, 1));
    assert_eq!(four.violations, 0);
}

#[test]
fn empty_arrivals_give_an_empty_trace() {
    let cluster = ClusterSpec::uniform(3, 100, 100, 1);
    let t = batch_schedule(&cluster, &[], &BatchOptions::default()).unwrap();
    assert!(t.events.is_empty());
    assert_eq!((t.pods, t.placed), (0, 0));
    assert_eq!(t.placed_fraction(), 1.0);
    let g = greedy_schedule(&cluster, &[], &GreedyOptions::default()).unwrap();
    assert!(g.events.is_empty());
}

#[test]
fn batches_close_on_size_or_window() {
    let cluster = ClusterSpec::uniform(4, 1_000, 1_000, 1);
    let mut pods: Vec<PodSpec> = (0..7).map(|i| PodSpec::new(&format!("p{i}"), 10, 10, 1)).collect();
    for (i, p) in pods.iter_mut().enumerate() {
        p.arrival_ms = if i < 5 { 10 * i as u64 } else { 5_000 + 10 * i as u64 };
    }
    let t = batch_schedule(&cluster, &pods, &BatchOptions { b: 3, ..BatchOptions::default() }).unwrap();
    let sizes: Vec<usize> = t.events.iter().map(|e| e.arrived).collect();
    assert_eq!(sizes, vec![3, 2, 2]);
    assert_eq!(t.placed, 7);
}

fn placement_counts(c: &Cluster, app: &str) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for (p, spec) in c.pods.iter().enumerate() {
        if spec.app == app {
            if let Some(n) = c.placement[p] {
                *m.entry(n).or_insert(0) += 1;
            }
        }
    }
    m
}

fn app_pods(app: &str, n: usize) -> Vec<PodSpec> {
    (0..n)
        .map(|i| {
            let mut p = PodSpec::new(&format!("{app}-{i:03}"), 100, 100, 1);
            p.app = app.into();
            p.grp = app.into();
            p.arrival_ms = i as u64;
            p
        })
        .collect()
}

#[test]
fn pods_per_node_cap() {
    let spec = ClusterSpec::uniform(50, 1_000, 1_000, 2);
    let mut c = Cluster::new(&spec, &["node_health", "capacity", "pods_per_node"]).unwrap();
    c.engine
        .store_mut()
        .insert_rows("spread_limit", vec![vec![Value::text("web"), Value::Int(2)]])
        .unwrap();
    let pods = app_pods("web", 100);
    let t = batch_on(&mut c, &pods, &BatchOptions { b: 100, ..BatchOptions::default() }).unwrap();
    assert_eq!(t.placed, 100);
    assert_eq!(t.violations, 0);
    assert!(placement_counts(&c, "web").values().all(|&n| n <= 2));
}

#[test]
fn even_spread_uses_the_ceiling() {
    let spec = ClusterSpec::uniform(4, 10_000, 10_000, 1);
    let mut c = Cluster::new(&spec, &["node_health", "capacity", "even_spread"]).unwrap();
    c.engine
        .store_mut()
        .insert_rows("even_spread", vec![vec![Value::text("web")]])
        .unwrap();
    let pods = app_pods("web", 10);
    let t = batch_on(&mut c, &pods, &BatchOptions { b: 10, ..BatchOptions::default() }).unwrap();
    assert_eq!(t.placed, 10);
    let counts = placement_counts(&c, "web");
    assert!(counts.values().all(|&n| n <= 3), "{counts:?}");
    assert_eq!(t.violations, 0);
}

#[test]
fn service_zone_keeps_an_app_in_one_zone() {
    let spec = ClusterSpec::uniform(6, 250, 250, 2);
    let mut c = Cluster::new(&spec, &["node_health", "capacity", "service_zone"]).unwrap();
    c.engine
        .store_mut()
        .insert_rows("service_zone", vec![vec![Value::text("db")]])
        .unwrap();
    let pods = app_pods("db", 5);
    let t = batch_on(&mut c, &pods, &BatchOptions::default()).unwrap();
    assert_eq!(t.placed, 5);
    let zones: std::collections::BTreeSet<&str> = (0..5).map(|p| c.nodes[c.placement[p].unwrap()].zone.as_str()).collect();
    assert_eq!(zones.len(), 1);
    assert_eq!(t.violations, 0);
}

#[test]
fn placed_pods_stay_put_under_a_full_solve() {
    let spec = ClusterSpec::uniform(3, 1_000, 1_000, 1);
    let mut c = Cluster::new(&spec, policies::DEFAULT).unwrap();
    for p in app_pods("a", 3) {
        let i = c.add_pod(&p).unwrap();
        c.set(i, Some(0)).unwrap();
    }
    let r = c.engine.solve_once(Scope::All, Budget::nodes(10_000)).unwrap();
    assert!(r.is_solution());
    c.apply(&r).unwrap();
    assert!(c.placement.iter().all(|&n| n == Some(0)));
}

#[test]
fn greedy_filter_matches_the_checker() {
    let spec = ClusterSpec::uniform(4, 300, 300, 2);
    let mut c = Cluster::new(&spec, policies::DEFAULT).unwrap();
    let mut a = PodSpec::new("a", 200, 200, 1);
    a.anti_affinity = vec!["g".into()];
    a.grp = "g".into();
    let mut b = a.clone();
    b.name = "b".into();
    b.node_anti_affinity = vec![node_name(2)];
    let ia = c.add_pod(&a).unwrap();
    c.set(ia, Some(1)).unwrap();
    let ib = c.add_pod(&b).unwrap();
    let feasible = c.feasible_nodes(ib).unwrap();
    assert_eq!(feasible, vec![0, 3]);
    for n in 0..4 {
        c.set(ib, Some(n)).unwrap();
        assert_eq!(c.check().unwrap().ok(), feasible.contains(&n), "node {n}");
    }
}

#[test]
fn all_waves_fitting_means_no_evictions() {
    let (mut cluster, pods) = preemption_waves(4, 2, 3);
    for n in &mut cluster.nodes {
        n.cpu *= 3;
        n.mem *= 3;
    }
    let t = batch_schedule(&cluster, &pods, &BatchOptions::default()).unwrap();
    assert_eq!(t.placed, pods.len());
    assert_eq!(t.evictions, 0);
    let g = greedy_schedule(&cluster, &pods, &GreedyOptions { preempt: true, ..GreedyOptions::default() }).unwrap();
    assert_eq!(g.evictions, 0);
}

#[test]
fn rebalance_edge_cases() {
    let inst = imbalanced_vms(4, 12, 5);
    let budget = Budget::nodes(50_000);
    let none = scenarios::rebalance(&inst, 0, budget).unwrap();
    assert!(none.moves.is_empty());
    assert_eq!(none.after, none.before);
    let balanced = scenarios::VmInstance {
        hosts: (0..3).map(|i| (format!("h{i}"), 100)).collect(),
        vms: (0..6).map(|i| (format!("v{i}"), 30, i % 3)).collect(),
    };
    let r = scenarios::rebalance(&balanced, 3, budget).unwrap();
    assert!(r.moves.is_empty());
    assert_eq!(greedy_rebalance(&balanced, 3), balanced.initial());
}

#[test]
fn slope_of_a_line() {
    let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
    assert!((trace::slope(&pts) - 2.0).abs() < 1e-9);
    assert_eq!(trace::slope(&[(1.0, 5.0)]), 0.0);
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let base = SimParams {
        scenario: Scenario::Hetero,
        nodes: 4,
        apps: 2,
        b: 50,
        seed: 1,
        vms: 12,
        k: 2,
    };
    let m = run_scenario(&base, dir.path()).unwrap();
    assert!(m["batch"]["placed_fraction"].as_f64().unwrap() >= m["greedy"]["placed_fraction"].as_f64().unwrap());
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("time_ms,batch,arrived,pods,placed"));
    assert!(dir.path().join("metrics.json").exists());

    let vm_dir = tempfile::tempdir().unwrap();
    let m = run_scenario(&SimParams { scenario: Scenario::Rebalance, ..base }, vm_dir.path()).unwrap();
    assert!(m["migrations"].as_u64().unwrap() <= 2);
    let before = std::fs::read_to_string(vm_dir.path().join("loads_before.csv")).unwrap();
    assert_eq!(before.lines().count(), 5);
    assert!(vm_dir.path().join("loads_after.csv").exists());
    assert!("bogus".parse::<Scenario>().is_err());
}

#[test]
fn policy_pack_compiles_in_every_combination_used() {
    let names: Vec<&str> = policies::PACK.iter().map(|p| p.name).collect();
    let all = Cluster::new(&ClusterSpec::uniform(2, 10, 10, 1), &names);
    assert!(all.is_ok());
    let counts: HashMap<&str, usize> = policies::PACK.iter().map(|p| (p.name, policies::sql_lines(p.sql))).collect();
    assert!(counts.values().all(|&n| n > 0));
}

#[test]
fn larger_batches_never_place_fewer() {
    let mut instances = vec![packing_instance()];
    for seed in 0..4 {
        instances.push(scenarios::hetero_workload(4, 3, seed).unwrap());
    }
    for (i, (cluster, pods)) in instances.iter().enumerate() {
        let placed: Vec<usize> = [1, 2, 5, 10, 50]
            .iter()
            .map(|&b| batch_schedule(cluster, pods, &BatchOptions { b, ..BatchOptions::default() }).unwrap().placed)
            .collect();
        assert!(placed.windows(2).all(|w| w[0] <= w[1]), "instance {i}: {placed:?}");
    }
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

    #[test]
    fn generated_workloads_respect_their_bounds(
        seed in 0u64..1000,
        nodes in 1usize..6,
        apps in 1usize..4,
        cache in 1usize..4,
        web in 1usize..4,
        mean in 1.0f64..5000.0,
    ) {
        let cluster = ClusterSpec::uniform(nodes, 3_000, 2_000, 2);
        let spec = AppSpec {
            apps,
            cache,
            web,
            cpu: Demand::Exponential { mean },
            mem: Demand::Exponential { mean },
            priority: 1,
            gap_ms: 7,
        };
        let pods = generate_workload(&cluster, &spec, seed).unwrap();
        proptest::prop_assert_eq!(pods.len(), apps * (cache + web));
        for (i, p) in pods.iter().enumerate() {
            proptest::prop_assert!((1..=3_000).contains(&p.cpu));
            proptest::prop_assert!((1..=2_000).contains(&p.mem));
            proptest::prop_assert_eq!(p.arrival_ms, 7 * i as u64);
            proptest::prop_assert_eq!(&p.anti_affinity, &vec![p.grp.clone()]);
            proptest::prop_assert_eq!(p.affinity.is_empty(), p.grp.ends_with("-cache"));
        }
    }
}
