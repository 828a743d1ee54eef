//! Synthetic clusters and pod arrival sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorkloadError {
    #[error("invalid demand distribution: {0}")]
    Demand(String),
    #[error("application groups need at least one pod each")]
    GroupSize,
    #[error("cluster has no nodes")]
    NoNodes,
    #[error("node {0} has a zero capacity")]
    Capacity(String),
    #[error("node {0} has no zone")]
    Zone(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub cpu: i64,
    pub mem: i64,
    pub max_pods: i64,
    pub zone: String,
    pub unschedulable: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSpec {
    pub nodes: Vec<NodeSpec>,
}

impl ClusterSpec {
    /// `n` identical nodes spread round-robin over `zones` zones.
    pub fn uniform(n: usize, cpu: i64, mem: i64, zones: usize) -> ClusterSpec {
        let zones = zones.max(1);
        ClusterSpec {
            nodes: (0..n)
                .map(|i| NodeSpec {
                    name: node_name(i),
                    cpu,
                    mem,
                    max_pods: 110,
                    zone: format!("zone-{}", i % zones),
                    unschedulable: false,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.nodes.is_empty() {
            return Err(WorkloadError::NoNodes);
        }
        for n in &self.nodes {
            if n.cpu <= 0 || n.mem <= 0 || n.max_pods <= 0 {
                return Err(WorkloadError::Capacity(n.name.clone()));
            }
            if n.zone.is_empty() {
                return Err(WorkloadError::Zone(n.name.clone()));
            }
        }
        Ok(())
    }

    pub fn max_cpu(&self) -> i64 {
        self.nodes.iter().map(|n| n.cpu).max().unwrap_or(0)
    }

    pub fn max_mem(&self) -> i64 {
        self.nodes.iter().map(|n| n.mem).max().unwrap_or(0)
    }
}

/// Zero-padded so that lexical and numeric node order agree.
pub fn node_name(i: usize) -> String {
    format!("node-{i:03}")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Demand {
    Fixed(i64),
    /// Rounded up to whole milli-units and capped at the largest node.
    Exponential { mean: f64 },
}

impl Demand {
    fn validate(&self) -> Result<(), WorkloadError> {
        match *self {
            Demand::Fixed(v) if v < 1 => Err(WorkloadError::Demand(format!("fixed demand {v} is below 1"))),
            Demand::Exponential { mean } if !(mean.is_finite() && mean > 0.0) => {
                Err(WorkloadError::Demand(format!("exponential mean {mean} is not positive")))
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, cap: i64) -> i64 {
        match *self {
            Demand::Fixed(v) => v,
            Demand::Exponential { mean } => {
                let x: f64 = Exp::new(1.0 / mean).expect("validated mean").sample(rng);
                (x.ceil() as i64).clamp(1, cap.max(1))
            }
        }
    }
}

/// Applications made of cache pods, mutually anti-affine, and web pods,
/// anti-affine among themselves and affine to the cache pods of their app.
#[derive(Clone, Debug, PartialEq)]
pub struct AppSpec {
    pub apps: usize,
    pub cache: usize,
    pub web: usize,
    pub cpu: Demand,
    pub mem: Demand,
    pub priority: i64,
    /// Virtual time between consecutive arrivals.
    pub gap_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PodSpec {
    pub name: String,
    pub app: String,
    pub grp: String,
    pub cpu: i64,
    pub mem: i64,
    pub priority: i64,
    pub arrival_ms: u64,
    pub requested_node: Option<String>,
    /// Allowed nodes; `None` means any.
    pub node_affinity: Option<Vec<String>>,
    pub node_anti_affinity: Vec<String>,
    /// Groups this pod must share a node with.
    pub affinity: Vec<String>,
    /// Groups this pod must not share a node with.
    pub anti_affinity: Vec<String>,
    /// Groups this pod must not share a zone with.
    pub zone_anti_affinity: Vec<String>,
}

impl PodSpec {
    pub fn new(name: &str, cpu: i64, mem: i64, priority: i64) -> PodSpec {
        PodSpec {
            name: name.into(),
            app: name.into(),
            grp: name.into(),
            cpu,
            mem,
            priority,
            ..PodSpec::default()
        }
    }
}

/// Apps arrive one after another, cache pods first. Deterministic for a
/// fixed seed.
pub fn generate_workload(cluster: &ClusterSpec, apps: &AppSpec, seed: u64) -> Result<Vec<PodSpec>, WorkloadError> {
    cluster.validate()?;
    apps.cpu.validate()?;
    apps.mem.validate()?;
    if apps.cache == 0 || apps.web == 0 {
        return Err(WorkloadError::GroupSize);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cpu_cap, mem_cap) = (cluster.max_cpu(), cluster.max_mem());
    let mut out = Vec::with_capacity(apps.apps * (apps.cache + apps.web));
    for a in 0..apps.apps {
        let app = format!("app-{a:02}");
        let cache = format!("{app}-cache");
        let web = format!("{app}-web");
        for i in 0..apps.cache + apps.web {
            let is_cache = i < apps.cache;
            let (grp, name) = if is_cache {
                (cache.clone(), format!("{cache}-{i:02}"))
            } else {
                (web.clone(), format!("{web}-{:02}", i - apps.cache))
            };
            let cpu = apps.cpu.draw(&mut rng, cpu_cap);
            let mem = apps.mem.draw(&mut rng, mem_cap);
            out.push(PodSpec {
                name,
                app: app.clone(),
                grp: grp.clone(),
                cpu,
                mem,
                priority: apps.priority,
                arrival_ms: out.len() as u64 * apps.gap_ms,
                affinity: if is_cache { Vec::new() } else { vec![cache.clone()] },
                anti_affinity: vec![grp],
                ..PodSpec::default()
            });
        }
    }
    Ok(out)
}
