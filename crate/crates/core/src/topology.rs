//! Multi-dimensional network topologies.
//!
//! A training fabric is an ordered product of network dimensions
//! `P_1 x P_2 x ... x P_D`; every NPU has `P_k` peers on dimension `k`. Each
//! dimension carries its own link bandwidth, link count and per-step latency.
//! All bandwidths are uni-directional, and a dimension's aggregate bandwidth
//! is treated as one shared pipe per NPU: the latency model never looks at
//! individual links.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Bytes/second per decimal Gb/s (10^9 bits).
pub const BYTES_PER_SEC_PER_GBPS: f64 = 1e9 / 8.0;

/// Seconds per nanosecond.
pub const SECONDS_PER_NS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("topology config: {0}")]
    Parse(String),
    #[error("dimension {index}: {reason}")]
    InvalidDim { index: usize, reason: String },
    #[error("topology must have at least one dimension")]
    Empty,
    #[error("dimension index {k} out of range 1..={d}")]
    DimOutOfRange { k: usize, d: usize },
    #[error("unknown topology preset '{0}'")]
    UnknownPreset(String),
}

/// Physical shape of one network dimension. Each shape has exactly one
/// contention-free collective algorithm: ring on rings, direct exchange on
/// fully-connected groups, halving-doubling on switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimKind {
    Ring,
    FullyConnected,
    Switch,
}

impl DimKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DimKind::Ring => "ring",
            DimKind::FullyConnected => "fully_connected",
            DimKind::Switch => "switch",
        }
    }
}

impl std::fmt::Display for DimKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One dimension of the fabric.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDim<S> {
    /// 1-based position in the topology (1..=D).
    pub index: usize,
    /// Peer NPUs on this dimension (P_k).
    pub size: usize,
    pub kind: DimKind,
    /// Uni-directional bandwidth per link, bytes/second.
    pub bw_per_link: S,
    pub links_per_npu: usize,
    /// NPU-to-NPU latency for a minimum-size message, seconds. Treated as
    /// the complete per-step delay; switch traversal is not multiplied per hop.
    pub step_latency: S,
}

impl<S: Scalar> NetworkDim<S> {
    /// Aggregate uni-directional bandwidth per NPU on this dimension,
    /// bytes/second: `bw_per_link * links_per_npu`.
    pub fn aggregate_bw(&self) -> S {
        self.bw_per_link * S::from_count(self.links_per_npu)
    }

    fn validate(&self) -> Result<(), TopologyError> {
        let fail = |reason: String| TopologyError::InvalidDim {
            index: self.index,
            reason,
        };
        if self.size < 2 {
            return Err(fail(format!("size must be >= 2, got {}", self.size)));
        }
        if self.kind == DimKind::Switch && !self.size.is_power_of_two() {
            return Err(fail(format!(
                "switch dimension size must be a power of two (halving-doubling), got {}",
                self.size
            )));
        }
        if self.links_per_npu < 1 {
            return Err(fail("links_per_npu must be >= 1".into()));
        }
        if self.bw_per_link <= S::zero() || !self.bw_per_link.is_finite() {
            return Err(fail(format!(
                "bw_per_link must be positive, got {}",
                self.bw_per_link
            )));
        }
        if self.step_latency < S::zero() || !self.step_latency.is_finite() {
            return Err(fail(format!(
                "step_latency must be >= 0, got {}",
                self.step_latency
            )));
        }
        Ok(())
    }
}

/// Ordered list of network dimensions, indices 1..=D. Immutable after
/// construction; share read-only across threads freely.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology<S> {
    dims: Vec<NetworkDim<S>>,
}

impl<S: Scalar> Topology<S> {
    pub fn new(dims: Vec<NetworkDim<S>>) -> Result<Self, TopologyError> {
        if dims.is_empty() {
            return Err(TopologyError::Empty);
        }
        for (i, dim) in dims.iter().enumerate() {
            if dim.index != i + 1 {
                return Err(TopologyError::InvalidDim {
                    index: dim.index,
                    reason: format!("expected contiguous index {}, got {}", i + 1, dim.index),
                });
            }
            dim.validate()?;
        }
        Ok(Topology { dims })
    }

    /// Build from `(size, kind, bw_bytes_per_sec, links, step_latency_s)`
    /// tuples in dimension order.
    pub fn from_dims(specs: &[(usize, DimKind, S, usize, S)]) -> Result<Self, TopologyError> {
        let dims = specs
            .iter()
            .enumerate()
            .map(|(i, &(size, kind, bw, links, lat))| NetworkDim {
                index: i + 1,
                size,
                kind,
                bw_per_link: bw,
                links_per_npu: links,
                step_latency: lat,
            })
            .collect();
        Topology::new(dims)
    }

    pub fn dims(&self) -> &[NetworkDim<S>] {
        &self.dims
    }

    /// Number of dimensions D.
    pub fn num_dims(&self) -> usize {
        self.dims.len()
    }

    /// Dimension by 1-based index.
    pub fn dim(&self, k: usize) -> Result<&NetworkDim<S>, TopologyError> {
        if k < 1 || k > self.dims.len() {
            return Err(TopologyError::DimOutOfRange {
                k,
                d: self.dims.len(),
            });
        }
        Ok(&self.dims[k - 1])
    }

    /// Total NPU count, the product of all dimension sizes.
    pub fn total_npus(&self) -> usize {
        self.dims.iter().map(|d| d.size).product()
    }

    /// Sum of aggregate per-NPU bandwidth over all dimensions.
    pub fn total_aggregate_bw(&self) -> S {
        self.dims
            .iter()
            .fold(S::zero(), |acc, d| acc + d.aggregate_bw())
    }

    /// Aggregate bandwidth dimension `k` would need for baseline scheduling
    /// to be stage-balanced, given dim1's bandwidth:
    /// `BW(dim1) / prod_{i<k} P_i`.
    pub fn required_balanced_bw(&self, k: usize) -> Result<S, TopologyError> {
        self.dim(k)?;
        let shrink: usize = self.dims[..k - 1].iter().map(|d| d.size).product();
        Ok(self.dims[0].aggregate_bw() / S::from_count(shrink))
    }

    /// Sub-topology restricted to 1-based dimensions `lo..=hi`, re-indexed
    /// from 1. Collectives spanning a dimension range run against this.
    pub fn subtopology(&self, lo: usize, hi: usize) -> Result<Topology<S>, TopologyError> {
        self.dim(lo)?;
        self.dim(hi)?;
        if lo > hi {
            return Err(TopologyError::DimOutOfRange { k: lo, d: hi });
        }
        let dims = self.dims[lo - 1..hi]
            .iter()
            .enumerate()
            .map(|(i, d)| NetworkDim {
                index: i + 1,
                ..d.clone()
            })
            .collect();
        Topology::new(dims)
    }
}

// ---------------------------------------------------------------------------
// Config file format
// ---------------------------------------------------------------------------

/// One dimension record as it appears in a config file. Bandwidth is decimal
/// Gb/s and latency is nanoseconds there; the in-memory model is bytes/second
/// and seconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimConfig {
    pub size: usize,
    pub kind: DimKind,
    pub bw_per_link_gbps: f64,
    pub links_per_npu: usize,
    pub step_latency_ns: f64,
}

/// Parse a topology from config text: a JSON array of per-dimension records,
/// ordered dim1 first. Also accepts `{"dims": [...]}`.
pub fn load_topology<S: Scalar>(config_text: &str) -> Result<Topology<S>, TopologyError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum ConfigFile {
        Bare(Vec<DimConfig>),
        Wrapped { dims: Vec<DimConfig> },
    }
    let parsed: ConfigFile = serde_json::from_str(config_text).map_err(|e| {
        TopologyError::Parse(format!("{e} (line {}, column {})", e.line(), e.column()))
    })?;
    let records = match parsed {
        ConfigFile::Bare(v) => v,
        ConfigFile::Wrapped { dims } => dims,
    };
    from_configs(&records)
}

fn from_configs<S: Scalar>(records: &[DimConfig]) -> Result<Topology<S>, TopologyError> {
    let dims = records
        .iter()
        .enumerate()
        .map(|(i, r)| NetworkDim {
            index: i + 1,
            size: r.size,
            kind: r.kind,
            bw_per_link: S::from_config(r.bw_per_link_gbps * BYTES_PER_SEC_PER_GBPS),
            links_per_npu: r.links_per_npu,
            step_latency: S::from_config(r.step_latency_ns * SECONDS_PER_NS),
        })
        .collect();
    Topology::new(dims)
}

/// Config-unit value whose load-side conversion `value * factor` lands
/// exactly on `target`. The naive quotient can be one unit in the last
/// place off after the round trip; nudge it until multiplying back is exact.
fn exact_config_value(target: f64, factor: f64) -> f64 {
    if target == 0.0 {
        return 0.0;
    }
    let mut value = target / factor;
    for _ in 0..4 {
        let back = value * factor;
        if back == target {
            return value;
        }
        value = if back < target {
            f64::from_bits(value.to_bits() + 1)
        } else {
            f64::from_bits(value.to_bits() - 1)
        };
    }
    value
}

/// Serialize back to the config format (Gb/s, ns). `load_topology` of the
/// result reproduces the topology exactly.
pub fn serialize_topology<S: Scalar>(topology: &Topology<S>) -> String {
    let records: Vec<DimConfig> = topology
        .dims()
        .iter()
        .map(|d| DimConfig {
            size: d.size,
            kind: d.kind,
            bw_per_link_gbps: exact_config_value(
                d.bw_per_link.to_f64().unwrap(),
                BYTES_PER_SEC_PER_GBPS,
            ),
            links_per_npu: d.links_per_npu,
            step_latency_ns: exact_config_value(d.step_latency.to_f64().unwrap(), SECONDS_PER_NS),
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("topology serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Built-in presets
// ---------------------------------------------------------------------------

/// Names of the built-in 1024-NPU topology presets.
pub const PRESET_NAMES: [&str; 6] = [
    "2d_sw_sw",
    "3d_sw_sw_sw_homo",
    "3d_sw_sw_sw_hetero",
    "3d_fc_ring_sw",
    "4d_ring_sw_sw_sw",
    "4d_ring_fc_ring_sw",
];

/// Built-in topology by preset name. Each preset is a 1024-NPU fabric;
/// the name lists the per-dimension shapes in order.
pub fn preset<S: Scalar>(name: &str) -> Result<Topology<S>, TopologyError> {
    use DimKind::*;
    let records: Vec<(usize, DimKind, f64, usize, f64)> = match name {
        // sizes, kind, bw/link Gb/s, links/NPU, step latency ns
        "2d_sw_sw" => vec![
            (16, Switch, 200.0, 6, 700.0),
            (64, Switch, 800.0, 1, 1700.0),
        ],
        "3d_sw_sw_sw_homo" => vec![
            (16, Switch, 200.0, 4, 700.0),
            (8, Switch, 200.0, 4, 700.0),
            (8, Switch, 800.0, 1, 1700.0),
        ],
        "3d_sw_sw_sw_hetero" => vec![
            (16, Switch, 200.0, 8, 700.0),
            (8, Switch, 200.0, 4, 700.0),
            (8, Switch, 400.0, 1, 1700.0),
        ],
        "3d_fc_ring_sw" => vec![
            (8, FullyConnected, 200.0, 7, 700.0),
            (16, Ring, 200.0, 4, 700.0),
            (8, Switch, 400.0, 1, 1700.0),
        ],
        "4d_ring_sw_sw_sw" => vec![
            (4, Ring, 1000.0, 2, 20.0),
            (4, Switch, 200.0, 8, 700.0),
            (8, Switch, 200.0, 4, 700.0),
            (8, Switch, 400.0, 1, 1700.0),
        ],
        "4d_ring_fc_ring_sw" => vec![
            (4, Ring, 1500.0, 2, 20.0),
            (8, FullyConnected, 200.0, 7, 700.0),
            (4, Ring, 200.0, 6, 700.0),
            (8, Switch, 800.0, 1, 1700.0),
        ],
        other => return Err(TopologyError::UnknownPreset(other.to_string())),
    };
    let configs: Vec<DimConfig> = records
        .into_iter()
        .map(|(size, kind, gbps, links, ns)| DimConfig {
            size,
            kind,
            bw_per_link_gbps: gbps,
            links_per_npu: links,
            step_latency_ns: ns,
        })
        .collect();
    from_configs(&configs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gbps(v: f64) -> f64 {
        v * BYTES_PER_SEC_PER_GBPS
    }

    #[test]
    fn homo_preset_matches_published_row() {
        let t: Topology<f64> = preset("3d_sw_sw_sw_homo").unwrap();
        assert_eq!(t.num_dims(), 3);
        assert_eq!(t.total_npus(), 16 * 8 * 8);
        for dim in t.dims() {
            // 800 Gb/s aggregate per NPU on every dimension
            assert_eq!(dim.aggregate_bw(), gbps(800.0));
        }
        assert_eq!(t.dims()[0].size, 16);
        assert_eq!(t.dims()[1].size, 8);
        assert_eq!(t.dims()[2].size, 8);
    }

    #[test]
    fn single_dimension_ring_is_valid() {
        let t: Topology<f64> =
            Topology::from_dims(&[(4, DimKind::Ring, gbps(100.0), 1, 0.0)]).unwrap();
        assert_eq!(t.total_npus(), 4);
        assert_eq!(t.dims()[0].aggregate_bw(), gbps(100.0));
    }

    #[test]
    fn switch_size_must_be_power_of_two() {
        let err =
            Topology::<f64>::from_dims(&[(6, DimKind::Switch, gbps(100.0), 1, 0.0)]).unwrap_err();
        match err {
            TopologyError::InvalidDim { index: 1, .. } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn aggregate_bw_examples() {
        let d = NetworkDim {
            index: 1,
            size: 16,
            kind: DimKind::Switch,
            bw_per_link: gbps(200.0),
            links_per_npu: 6,
            step_latency: 0.0,
        };
        assert_eq!(d.aggregate_bw(), gbps(1200.0));
        let d2 = NetworkDim {
            bw_per_link: gbps(1000.0),
            links_per_npu: 2,
            ..d
        };
        assert_eq!(d2.aggregate_bw(), gbps(2000.0));
        let d3 = NetworkDim {
            bw_per_link: gbps(37.5),
            links_per_npu: 1,
            ..d
        };
        assert_eq!(d3.aggregate_bw(), gbps(37.5));
    }

    #[test]
    fn required_balanced_bw_divides_by_prefix_product() {
        // 4x4 with BW(dim1) = B: balanced dim2 bandwidth is B/4.
        let b = gbps(400.0);
        let t: Topology<f64> =
            Topology::from_dims(&[(4, DimKind::Ring, b, 1, 0.0), (4, DimKind::Ring, b, 1, 0.0)])
                .unwrap();
        assert_eq!(t.required_balanced_bw(1).unwrap(), b);
        assert_eq!(t.required_balanced_bw(2).unwrap(), b / 4.0);

        // 16x8x8 at 800 Gb/s: 50 Gb/s and 6.25 Gb/s.
        let t: Topology<f64> = preset("3d_sw_sw_sw_homo").unwrap();
        assert_eq!(t.required_balanced_bw(2).unwrap(), gbps(50.0));
        assert_eq!(t.required_balanced_bw(3).unwrap(), gbps(6.25));
        assert!(t.required_balanced_bw(4).is_err());
    }

    #[test]
    fn balanced_bw_strictly_decreasing_in_k() {
        for name in PRESET_NAMES {
            let t: Topology<f64> = preset(name).unwrap();
            for k in 2..=t.num_dims() {
                assert!(
                    t.required_balanced_bw(k).unwrap() < t.required_balanced_bw(k - 1).unwrap(),
                    "{name} k={k}"
                );
            }
        }
    }

    #[test]
    fn config_round_trip_is_exact_for_presets() {
        for name in PRESET_NAMES {
            let t: Topology<f64> = preset(name).unwrap();
            let text = serialize_topology(&t);
            let back: Topology<f64> = load_topology(&text).unwrap();
            assert_eq!(t, back, "{name}");
        }
    }

    #[test]
    fn round_trip_handles_awkward_latencies() {
        // 3830 ns does not survive a naive ns -> s -> ns -> s conversion
        // chain at the ULP level; the serializer must compensate.
        let t: Topology<f64> =
            Topology::from_dims(&[(2, DimKind::Ring, 1.25e8, 1, 3830.0 * SECONDS_PER_NS)]).unwrap();
        let back: Topology<f64> = load_topology(&serialize_topology(&t)).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn load_rejects_malformed_text_with_context() {
        let err = load_topology::<f64>("[{\"size\": 4,").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn load_table_row_from_json() {
        let text = r#"[
            {"size": 16, "kind": "switch", "bw_per_link_gbps": 200, "links_per_npu": 4, "step_latency_ns": 700},
            {"size": 8, "kind": "switch", "bw_per_link_gbps": 200, "links_per_npu": 4, "step_latency_ns": 700},
            {"size": 8, "kind": "switch", "bw_per_link_gbps": 800, "links_per_npu": 1, "step_latency_ns": 1700}
        ]"#;
        let t: Topology<f64> = load_topology(text).unwrap();
        assert_eq!(t, preset("3d_sw_sw_sw_homo").unwrap());
    }

    #[test]
    fn subtopology_reindexes() {
        let t: Topology<f64> = preset("4d_ring_fc_ring_sw").unwrap();
        let sub = t.subtopology(2, 3).unwrap();
        assert_eq!(sub.num_dims(), 2);
        assert_eq!(sub.dims()[0].size, 8);
        assert_eq!(sub.dims()[0].index, 1);
        assert_eq!(sub.dims()[1].size, 4);
        assert_eq!(sub.dims()[1].index, 2);
    }
}
