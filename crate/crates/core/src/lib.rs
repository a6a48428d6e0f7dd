//! Deterministic discrete-event simulator and scheduling library for chunked
//! hierarchical collective communication (All-Reduce / Reduce-Scatter /
//! All-Gather) on multi-dimensional training fabrics.
//!
//! The library models a fabric as an ordered product of network dimensions,
//! splits each collective into chunks pipelined through per-dimension
//! topology-aware algorithms, and compares the static baseline schedule
//! against a dynamic greedy scheduler that balances predicted communication
//! load across dimensions. An exhaustive oracle, an analytic ideal bound, a
//! workload playback layer and a bandwidth-provisioning analyzer round out
//! the toolkit.
//!
//! Everything is generic over the scalar type via [`scalar::Scalar`]
//! (`f32` or `f64`); the `*64` aliases below fix `f64`, which the CLI and
//! tests use throughout.

pub mod collective;
pub mod engine;
pub mod latency;
pub mod oracle;
pub mod provisioning;
pub mod scalar;
pub mod schedule;
pub mod topology;
pub mod workload;

pub use collective::{CollectiveKind, Phase};
pub use engine::{EnginePolicy, IntraDimPolicy, RunMetrics};
pub use scalar::Scalar;
pub use schedule::{ChunkSchedule, SchedulerConfig};
pub use topology::{DimKind, NetworkDim, Topology};
pub use workload::RunMode;

/// `f64`-precision aliases for the main entry types.
pub type Topology64 = topology::Topology<f64>;
pub type NetworkDim64 = topology::NetworkDim<f64>;
pub type ChunkSchedule64 = schedule::ChunkSchedule<f64>;
pub type SchedulerConfig64 = schedule::SchedulerConfig<f64>;
pub type RunMetrics64 = engine::RunMetrics<f64>;
pub type Workload64 = workload::Workload<f64>;
pub type IterationReport64 = workload::IterationReport<f64>;
pub type OracleResult64 = oracle::OracleResult<f64>;
pub type ProvisioningVerdict64 = provisioning::ProvisioningVerdict<f64>;
