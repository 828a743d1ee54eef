//! Cluster scheduling simulator built on the weave engine: workload
//! generation, a one-pod-at-a-time baseline, batched solving and the
//! experiment scenarios.

pub mod batch;
pub mod cluster;
pub mod greedy;
pub mod policies;
pub mod run;
pub mod scenarios;
pub mod trace;
pub mod workload;

pub use batch::{batch_schedule, BatchOptions};
pub use cluster::{Cluster, SimError};
pub use greedy::{greedy_schedule, GreedyOptions};
pub use trace::{Event, ScheduleTrace};
pub use workload::{generate_workload, node_name, AppSpec, ClusterSpec, Demand, NodeSpec, PodSpec, WorkloadError};
