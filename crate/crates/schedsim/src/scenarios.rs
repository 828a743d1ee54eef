//! Instances used by the experiments: small hand-built clusters, generated
//! workloads and the VM rebalancing setup.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weave_core::compiler::Scope;
use weave_core::runtime::Engine;
use weave_core::solver::Budget;
use weave_core::Value;

use crate::cluster::{Cluster, SimError};
use crate::policies;
use crate::workload::{generate_workload, AppSpec, ClusterSpec, Demand, PodSpec};

/// Two nodes of 10 cpu; pods of 3, 7, 3 and 7 cpu arrive in that order.
/// One pod at a time, most-spare-first strands the last pod; placed
/// together, {3, 7} fits on each node.
pub fn packing_instance() -> (ClusterSpec, Vec<PodSpec>) {
    let mut cluster = ClusterSpec::uniform(2, 10, 10, 1);
    cluster.nodes[0].name = "node-a".into();
    cluster.nodes[1].name = "node-b".into();
    let pods = [3, 7, 3, 7]
        .iter()
        .enumerate()
        .map(|(i, &cpu)| {
            let mut p = PodSpec::new(&format!("pod-{}", i + 1), cpu, 1, 1);
            p.arrival_ms = 10 * i as u64;
            p
        })
        .collect();
    (cluster, pods)
}

/// Pod 2 (low priority) runs on node 2; pod 1 may only use node 1, which
/// shares a zone with node 2, and must not share a zone with pod 2.
/// Returns the cluster with pod 2 placed, and pod 1 as the next arrival.
pub fn cross_node_instance() -> Result<(Cluster, PodSpec), SimError> {
    let mut spec = ClusterSpec::uniform(3, 10, 10, 1);
    for (i, n) in spec.nodes.iter_mut().enumerate() {
        n.name = format!("node-{}", i + 1);
    }
    spec.nodes[2].zone = "zone-1".into();
    let mut c = Cluster::new(&spec, policies::DEFAULT)?;
    let mut pod2 = PodSpec::new("pod-2", 2, 2, 1);
    pod2.zone_anti_affinity = vec!["pod-1".into()];
    let p = c.add_pod(&pod2)?;
    c.set(p, c.node("node-2"))?;
    let mut pod1 = PodSpec::new("pod-1", 2, 2, 2);
    pod1.node_affinity = Some(vec!["node-1".into()]);
    pod1.zone_anti_affinity = vec!["pod-2".into()];
    pod1.arrival_ms = 1_000;
    Ok((c, pod1))
}

/// Cache and web pods with node-level anti-affinity and web-to-cache
/// affinity, small fixed demands. Each app has `4/5` of the node count in
/// each tier.
pub fn affinity_workload(nodes: usize, apps: usize, seed: u64) -> Result<(ClusterSpec, Vec<PodSpec>), SimError> {
    let cluster = ClusterSpec::uniform(nodes, 4_000, 4_000, 2);
    let tier = (nodes * 4 / 5).max(1);
    let spec = AppSpec {
        apps,
        cache: tier,
        web: tier,
        cpu: Demand::Fixed(100),
        mem: Demand::Fixed(100),
        priority: 1,
        gap_ms: 10,
    };
    let pods = generate_workload(&cluster, &spec, seed)?;
    Ok((cluster, pods))
}

/// Five cache and five web pods per app with exponential cpu and memory
/// demands whose means put the expected total at 85% of the cluster.
pub fn hetero_workload(nodes: usize, apps: usize, seed: u64) -> Result<(ClusterSpec, Vec<PodSpec>), SimError> {
    let cluster = ClusterSpec::uniform(nodes, 4_000, 4_000, 2);
    let pods = (apps * 10).max(1) as f64;
    let mean = 0.85 * (nodes as f64 * 4_000.0) / pods;
    let spec = AppSpec {
        apps,
        cache: 5,
        web: 5,
        cpu: Demand::Exponential { mean },
        mem: Demand::Exponential { mean },
        priority: 1,
        gap_ms: 20,
    };
    let pods = generate_workload(&cluster, &spec, seed)?;
    Ok((cluster, pods))
}

/// Three waves of equal pods with priorities 1, 2 and 3. Each wave alone
/// fills the cluster, so only the last one can be fully placed. The seed
/// shuffles arrivals within a wave.
pub fn preemption_waves(nodes: usize, per_node: usize, seed: u64) -> (ClusterSpec, Vec<PodSpec>) {
    let cluster = ClusterSpec::uniform(nodes, 4_000, 4_000, 2);
    let size = 4_000 / per_node.max(1) as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pods = Vec::new();
    for (w, label) in ["low", "mid", "high"].iter().enumerate() {
        let mut wave: Vec<PodSpec> = (0..nodes * per_node)
            .map(|i| {
                let mut p = PodSpec::new(&format!("{label}-{i:03}"), size, size, w as i64 + 1);
                p.app = (*label).into();
                p.grp = (*label).into();
                p
            })
            .collect();
        wave.shuffle(&mut rng);
        for (i, p) in wave.iter_mut().enumerate() {
            p.arrival_ms = w as u64 * 10_000 + 50 * i as u64;
        }
        pods.extend(wave);
    }
    (cluster, pods)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VmInstance {
    /// Name and memory capacity.
    pub hosts: Vec<(String, i64)>,
    /// Name, memory and host index.
    pub vms: Vec<(String, i64, usize)>,
}

impl VmInstance {
    pub fn loads(&self, assignment: &[usize]) -> Vec<i64> {
        let mut l = vec![0; self.hosts.len()];
        for (vm, &h) in self.vms.iter().zip(assignment) {
            l[h] += vm.1;
        }
        l
    }

    pub fn initial(&self) -> Vec<usize> {
        self.vms.iter().map(|v| v.2).collect()
    }

    /// Utilisation in percent of capacity, per host.
    pub fn utilisation(&self, assignment: &[usize]) -> Vec<f64> {
        self.loads(assignment)
            .iter()
            .zip(&self.hosts)
            .map(|(&l, h)| 100.0 * l as f64 / h.1 as f64)
            .collect()
    }

    /// Most minus least utilised host, in percentage points.
    pub fn spread(&self, assignment: &[usize]) -> f64 {
        let u = self.utilisation(assignment);
        let max = u.iter().cloned().fold(f64::MIN, f64::max);
        let min = u.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    fn fits(&self, assignment: &[usize]) -> bool {
        self.loads(assignment).iter().zip(&self.hosts).all(|(&l, h)| l <= h.1)
    }
}

/// Hosts of equal capacity and VMs packed so that utilisation falls
/// linearly from the first host to the last.
pub fn imbalanced_vms(hosts: usize, vms: usize, seed: u64) -> VmInstance {
    let cap = 1_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes: Vec<i64> = (0..vms).map(|_| rng.random_range(40..=200)).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let total: i64 = sizes.iter().sum();
    let weights: Vec<f64> = (0..hosts)
        .map(|i| 1.6 - 1.2 * i as f64 / (hosts.max(2) - 1) as f64)
        .collect();
    let wsum: f64 = weights.iter().sum();
    let targets: Vec<i64> = weights.iter().map(|w| (total as f64 * w / wsum) as i64).collect();
    let mut load = vec![0i64; hosts];
    let mut out = Vec::new();
    for (i, s) in sizes.into_iter().enumerate() {
        let h = (0..hosts)
            .filter(|&h| load[h] + s <= cap)
            .max_by_key(|&h| (targets[h] - load[h], std::cmp::Reverse(h)))
            .unwrap_or(hosts - 1);
        load[h] += s;
        out.push((format!("vm-{i:02}"), s, h));
    }
    VmInstance {
        hosts: (0..hosts).map(|i| (format!("host-{i}"), cap)).collect(),
        vms: out,
    }
}

/// Up to `k` single-VM moves, each the one that most reduces the spread;
/// stops when no move helps.
pub fn greedy_rebalance(inst: &VmInstance, k: usize) -> Vec<usize> {
    let mut a = inst.initial();
    for _ in 0..k {
        let now = inst.spread(&a);
        let mut best: Option<(f64, usize, usize)> = None;
        for v in 0..a.len() {
            let from = a[v];
            for h in 0..inst.hosts.len() {
                if h == from {
                    continue;
                }
                a[v] = h;
                if inst.fits(&a) {
                    let s = inst.spread(&a);
                    if s < now && best.is_none_or(|b| s < b.0) {
                        best = Some((s, v, h));
                    }
                }
                a[v] = from;
            }
        }
        match best {
            Some((_, v, h)) => a[v] = h,
            None => break,
        }
    }
    a
}

#[derive(Clone, Debug)]
pub struct RebalanceOutcome {
    pub before: Vec<usize>,
    pub after: Vec<usize>,
    pub greedy: Vec<usize>,
    /// (vm, from host, to host)
    pub moves: Vec<(String, String, String)>,
    pub status: String,
}

/// Solves the migration model: every VM may move, at most `k` do, and the
/// gap between the most and least used host is minimised.
pub fn rebalance(inst: &VmInstance, k: u64, budget: Budget) -> Result<RebalanceOutcome, SimError> {
    let mut engine = Engine::compile(policies::VM_REBALANCE, None)?;
    let store = engine.store_mut();
    store.insert_rows(
        "host",
        inst.hosts.iter().map(|(n, c)| vec![Value::text(n), Value::Int(*c)]).collect(),
    )?;
    store.insert_rows(
        "vm",
        inst.vms
            .iter()
            .map(|(n, m, h)| vec![Value::text(n), Value::Int(*m), Value::text(&inst.hosts[*h].0)])
            .collect(),
    )?;
    let report = engine.rebalance(Scope::All, k, budget)?;
    let before = inst.initial();
    let mut after = before.clone();
    if report.is_solution() {
        engine.apply(&report)?;
        for d in &report.deltas {
            let v = inst.vms.iter().position(|x| Some(x.0.as_str()) == d.row_key.as_text());
            let h = inst.hosts.iter().position(|x| Some(x.0.as_str()) == d.new_value.as_text());
            match (v, h) {
                (Some(v), Some(h)) => after[v] = h,
                _ => return Err(SimError::Invalid(format!("unexpected delta {d:?}"))),
            }
        }
        let check = engine.check()?;
        if !check.ok() {
            return Err(SimError::Invalid(format!("rebalanced placement violates {}", check.violations[0])));
        }
    }
    let moves = (0..before.len())
        .filter(|&v| before[v] != after[v])
        .map(|v| (inst.vms[v].0.clone(), inst.hosts[before[v]].0.clone(), inst.hosts[after[v]].0.clone()))
        .collect();
    Ok(RebalanceOutcome {
        greedy: greedy_rebalance(inst, k as usize),
        before,
        after,
        moves,
        status: report.status().into(),
    })
}

/// Six pods from two apps (two cache, one web each) on three nodes, with
/// exponential demands around 85% of the cluster. Small enough to decide
/// feasibility by enumeration.
pub fn hetero_shrink(seed: u64) -> Result<(ClusterSpec, Vec<PodSpec>), SimError> {
    let cluster = ClusterSpec::uniform(3, 4_000, 4_000, 2);
    let mean = 0.85 * 3.0 * 4_000.0 / 6.0;
    let spec = AppSpec {
        apps: 2,
        cache: 2,
        web: 1,
        cpu: Demand::Exponential { mean },
        mem: Demand::Exponential { mean },
        priority: 1,
        gap_ms: 20,
    };
    let pods = generate_workload(&cluster, &spec, seed)?;
    Ok((cluster, pods))
}

/// Two nodes; three low-priority pods arrive first, three pods of
/// priority 2 or 3 arrive a minute later. Demands are multiples of 500 so
/// the second wave usually needs evictions.
pub fn preemption_shrink(seed: u64) -> (ClusterSpec, Vec<PodSpec>) {
    let cluster = ClusterSpec::uniform(2, 3_000, 3_000, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pods = Vec::new();
    for i in 0..6 {
        let size = 500 * rng.random_range(2..=4);
        let priority = if i < 3 { 1 } else { rng.random_range(2..=3) };
        let mut p = PodSpec::new(&format!("pod-{i}"), size, size, priority);
        p.arrival_ms = if i < 3 { 50 * i as u64 } else { 60_000 + 50 * i as u64 };
        pods.push(p);
    }
    (cluster, pods)
}
