//! Chunk scheduling: the static baseline order and the dynamic
//! load-balancing scheduler.
//!
//! The baseline runs every chunk's Reduce-Scatter pass dim1 -> dimD and the
//! All-Gather pass dimD -> dim1. The dynamic scheduler instead picks a
//! per-chunk dimension order greedily: it tracks the predicted byte-time
//! already placed on each dimension and routes the next chunk so that more
//! load lands on the currently least-loaded dimensions. A threshold guards
//! against oversubscribing low-bandwidth dimensions when loads are nearly
//! even: below it, the chunk falls back to the baseline order.
//!
//! Scheduling a collective is a sequential fold over its chunks (the greedy
//! is order-dependent by design); distinct collectives can be scheduled
//! concurrently against separate trackers.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::collective::{stages_for_chunk, CollectiveKind, Phase};
use crate::engine::{simulate_full, EngineError, EnginePolicy};
use crate::latency::{chunk_load, DimLatencyParams};
use crate::scalar::{cmp_scalar, is_positive_finite, Scalar};
use crate::topology::Topology;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("chunks_per_collective must be >= 1")]
    NoChunks,
    #[error("threshold_divisor must be positive")]
    BadDivisor,
    #[error("collective size must be positive")]
    BadSize,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Per-chunk traversal orders. Both orders are permutations of 1..=D;
/// for an All-Reduce every Reduce-Scatter stage of the chunk precedes every
/// All-Gather stage. Reduce-Scatter-only collectives leave `ag_order` empty
/// and vice versa.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkSchedule<S> {
    pub chunk_id: usize,
    pub rs_order: Vec<usize>,
    pub ag_order: Vec<usize>,
    /// Chunk bytes per NPU before the first stage.
    pub initial_bytes: S,
}

/// Accumulated predicted communication time per dimension during one
/// collective's scheduling pass. Loads never decrease within a pass; the
/// tracker is reset between collectives, seeding each dimension with the
/// fixed delays of the phases the collective will run.
#[derive(Debug, Clone)]
pub struct DimLoadTracker<S> {
    loads: Vec<S>,
}

impl<S: Scalar> DimLoadTracker<S> {
    pub fn reset(kind: CollectiveKind, topology: &Topology<S>) -> Self {
        let loads = topology
            .dims()
            .iter()
            .map(|dim| {
                let p = DimLatencyParams::for_dim(dim);
                match kind {
                    CollectiveKind::ReduceScatter => p.a_rs,
                    CollectiveKind::AllGather => p.a_ag,
                    CollectiveKind::AllReduce => p.a_rs + p.a_ag,
                }
            })
            .collect();
        DimLoadTracker { loads }
    }

    pub fn loads(&self) -> &[S] {
        &self.loads
    }

    pub fn add(&mut self, dim_index: usize, load: S) {
        self.loads[dim_index - 1] = self.loads[dim_index - 1] + load;
    }

    /// 1-based index of the least-loaded dimension, ties to the lowest index.
    pub fn min_load_dim(&self) -> usize {
        let mut best = 0;
        for i in 1..self.loads.len() {
            if cmp_scalar(self.loads[i], self.loads[best]).is_lt() {
                best = i;
            }
        }
        best + 1
    }

    fn gap(&self) -> S {
        let mut lo = self.loads[0];
        let mut hi = self.loads[0];
        for &l in &self.loads[1..] {
            if cmp_scalar(l, lo).is_lt() {
                lo = l;
            }
            if cmp_scalar(l, hi).is_gt() {
                hi = l;
            }
        }
        hi - lo
    }

    /// Dimension indices sorted by current load; ties break toward the
    /// lower index so identical inputs always give identical schedules.
    fn sorted_dims(&self, ascending: bool) -> Vec<usize> {
        let mut idx: Vec<usize> = (1..=self.loads.len()).collect();
        idx.sort_by(|&a, &b| {
            let ord = cmp_scalar(self.loads[a - 1], self.loads[b - 1]);
            let ord = if ascending { ord } else { ord.reverse() };
            ord.then(a.cmp(&b))
        });
        idx
    }
}

/// Knobs of the dynamic scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerConfig<S> {
    /// Chunks the collective payload is split into (equal sizes).
    pub chunks_per_collective: usize,
    /// The threshold is the predicted byte-time of a chunk shrunk by this
    /// divisor on the currently least-loaded dimension.
    pub threshold_divisor: S,
}

impl<S: Scalar> Default for SchedulerConfig<S> {
    fn default() -> Self {
        SchedulerConfig {
            chunks_per_collective: 64,
            threshold_divisor: S::from_config(16.0),
        }
    }
}

impl<S: Scalar> SchedulerConfig<S> {
    pub fn new(chunks_per_collective: usize, threshold_divisor: S) -> Self {
        SchedulerConfig {
            chunks_per_collective,
            threshold_divisor,
        }
    }

    /// Degenerate config with a zero threshold: the greedy path is always
    /// taken.
    pub fn pure_greedy(chunks_per_collective: usize) -> Self {
        SchedulerConfig {
            chunks_per_collective,
            threshold_divisor: S::infinity(),
        }
    }

    fn validate(&self) -> Result<(), ScheduleError> {
        if self.chunks_per_collective < 1 {
            return Err(ScheduleError::NoChunks);
        }
        if !is_positive_finite(self.threshold_divisor) && self.threshold_divisor != S::infinity() {
            return Err(ScheduleError::BadDivisor);
        }
        Ok(())
    }
}

fn orders_for(kind: CollectiveKind, rs: Vec<usize>, ag: Vec<usize>) -> (Vec<usize>, Vec<usize>) {
    match kind {
        CollectiveKind::ReduceScatter => (rs, Vec::new()),
        CollectiveKind::AllGather => (Vec::new(), ag),
        CollectiveKind::AllReduce => (rs, ag),
    }
}

fn baseline_orders(kind: CollectiveKind, d: usize) -> (Vec<usize>, Vec<usize>) {
    let asc: Vec<usize> = (1..=d).collect();
    let desc: Vec<usize> = (1..=d).rev().collect();
    orders_for(kind, asc, desc)
}

/// The static schedule: every chunk traverses dim1..dimD for Reduce-Scatter
/// and dimD..dim1 for All-Gather.
pub fn baseline_schedule<S: Scalar>(
    kind: CollectiveKind,
    total_bytes: S,
    chunks_per_collective: usize,
    topology: &Topology<S>,
) -> Result<Vec<ChunkSchedule<S>>, ScheduleError> {
    if chunks_per_collective < 1 {
        return Err(ScheduleError::NoChunks);
    }
    if !is_positive_finite(total_bytes) {
        return Err(ScheduleError::BadSize);
    }
    let chunk_bytes = total_bytes / S::from_count(chunks_per_collective);
    let (rs, ag) = baseline_orders(kind, topology.num_dims());
    Ok((0..chunks_per_collective)
        .map(|chunk_id| ChunkSchedule {
            chunk_id,
            rs_order: rs.clone(),
            ag_order: ag.clone(),
            initial_bytes: chunk_bytes,
        })
        .collect())
}

/// Threshold for the baseline fallback: the predicted byte-time of a
/// `chunk_bytes / divisor` pass on the least-loaded dimension.
pub fn threshold<S: Scalar>(
    config: &SchedulerConfig<S>,
    tracker: &DimLoadTracker<S>,
    chunk_bytes: S,
    phase: Phase,
    topology: &Topology<S>,
) -> S {
    let dim = &topology.dims()[tracker.min_load_dim() - 1];
    chunk_load(dim, phase, chunk_bytes / config.threshold_divisor)
}

/// The dynamic load-balancing schedule.
///
/// Splits the payload into equal chunks and schedules them in sequence: read
/// the tracker, fall back to the baseline order when the max-min load gap is
/// under the threshold, otherwise sort dimensions by ascending load for
/// Reduce-Scatter (descending for a standalone All-Gather). For an
/// All-Reduce the All-Gather order is the reverse of the chosen
/// Reduce-Scatter order. The chosen pass is then walked with sizes applied
/// per stage and every stage's predicted byte-time is added to the tracker;
/// an All-Reduce tracks its Reduce-Scatter pass, whose per-dimension loads
/// the mirrored All-Gather pass repeats.
pub fn dynamic_schedule<S: Scalar>(
    kind: CollectiveKind,
    total_bytes: S,
    config: &SchedulerConfig<S>,
    topology: &Topology<S>,
) -> Result<Vec<ChunkSchedule<S>>, ScheduleError> {
    config.validate()?;
    if !is_positive_finite(total_bytes) {
        return Err(ScheduleError::BadSize);
    }
    let cpc = config.chunks_per_collective;
    let chunk_bytes = total_bytes / S::from_count(cpc);
    let d = topology.num_dims();
    let dim_sizes: Vec<usize> = topology.dims().iter().map(|dim| dim.size).collect();

    let probe_phase = match kind {
        CollectiveKind::AllGather => Phase::AllGather,
        // The first pass scheduled; also used for All-Reduce.
        _ => Phase::ReduceScatter,
    };

    let mut tracker = DimLoadTracker::reset(kind, topology);
    let mut schedules = Vec::with_capacity(cpc);
    for chunk_id in 0..cpc {
        let thr = threshold(config, &tracker, chunk_bytes, probe_phase, topology);
        let (rs_order, ag_order) = if cmp_scalar(tracker.gap(), thr).is_lt() {
            baseline_orders(kind, d)
        } else {
            match kind {
                CollectiveKind::ReduceScatter => {
                    orders_for(kind, tracker.sorted_dims(true), vec![])
                }
                CollectiveKind::AllGather => orders_for(kind, vec![], tracker.sorted_dims(false)),
                CollectiveKind::AllReduce => {
                    let rs = tracker.sorted_dims(true);
                    let ag: Vec<usize> = rs.iter().rev().copied().collect();
                    (rs, ag)
                }
            }
        };
        // Track the scheduled pass: the Reduce-Scatter walk for an
        // All-Reduce (its reversed All-Gather mirrors those loads), the
        // collective's own single pass otherwise.
        let tracked = match kind {
            CollectiveKind::AllGather => stages_for_chunk(&[], &ag_order, chunk_bytes, &dim_sizes),
            _ => stages_for_chunk(&rs_order, &[], chunk_bytes, &dim_sizes),
        };
        for stage in tracked {
            let dim = &topology.dims()[stage.dim_index - 1];
            tracker.add(
                stage.dim_index,
                chunk_load(dim, stage.phase, stage.bytes_before),
            );
        }
        schedules.push(ChunkSchedule {
            chunk_id,
            rs_order,
            ag_order,
            initial_bytes: chunk_bytes,
        });
    }
    Ok(schedules)
}

// ---------------------------------------------------------------------------
// Intra-dimension execution order
// ---------------------------------------------------------------------------

/// Per-dimension order in which stage executions begin, recorded from a
/// deterministic pre-simulation. This is the consistency contract every NPU
/// enforces at runtime: a dimension never runs a stage ahead of its recorded
/// turn, so all NPUs execute identical per-dimension sequences even under
/// runtime timing variation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntraDimOrder {
    /// `per_dim[k-1]` lists (chunk_id, phase) in start order for dimension k.
    pub per_dim: Vec<Vec<(usize, Phase)>>,
}

/// Run the engine once in fast mode and export the per-dimension start
/// order of every stage.
pub fn intra_dim_order<S: Scalar>(
    schedules: &[ChunkSchedule<S>],
    topology: &Topology<S>,
    policy: &EnginePolicy,
) -> Result<IntraDimOrder, ScheduleError> {
    let run = simulate_full(topology, schedules, policy, None)?;
    Ok(run.start_order)
}

// ---------------------------------------------------------------------------
// Schedule cache
// ---------------------------------------------------------------------------

/// Schedules are pure functions of (collective, size, chunk count, topology),
/// so one scheduling pass per distinct collective suffices; later training
/// iterations reuse the cached result.
#[derive(Debug, Default)]
pub struct ScheduleCache<S> {
    entries: CacheMap<S>,
}

type CacheMap<S> = HashMap<(CollectiveKind, u64, usize), Arc<Vec<ChunkSchedule<S>>>>;

impl<S: Scalar> ScheduleCache<S> {
    pub fn new() -> Self {
        ScheduleCache {
            entries: HashMap::new(),
        }
    }

    pub fn get_or_insert_with<F>(
        &mut self,
        kind: CollectiveKind,
        total_bytes: S,
        cpc: usize,
        build: F,
    ) -> Result<Arc<Vec<ChunkSchedule<S>>>, ScheduleError>
    where
        F: FnOnce() -> Result<Vec<ChunkSchedule<S>>, ScheduleError>,
    {
        let key = (kind, total_bytes.to_f64().unwrap().to_bits(), cpc);
        if let Some(hit) = self.entries.get(&key) {
            return Ok(Arc::clone(hit));
        }
        let built = Arc::new(build()?);
        self.entries.insert(key, Arc::clone(&built));
        Ok(built)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

fn fmt_order(order: &[usize]) -> String {
    if order.is_empty() {
        return "-".to_string();
    }
    order
        .iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// One line per chunk: `chunk_id, rs_order, ag_order, bytes`.
pub fn export_schedules_csv<S: Scalar>(schedules: &[ChunkSchedule<S>]) -> String {
    let mut out = String::from("chunk_id,rs_order,ag_order,bytes\n");
    for s in schedules {
        writeln!(
            out,
            "{},{},{},{}",
            s.chunk_id,
            fmt_order(&s.rs_order),
            fmt_order(&s.ag_order),
            s.initial_bytes
        )
        .unwrap();
    }
    out
}

/// Per dimension, the ordered (chunk_id, phase) pairs of the execution
/// contract.
pub fn export_intra_dim_order_csv(order: &IntraDimOrder) -> String {
    let mut out = String::from("dim,seq,chunk_id,phase\n");
    for (i, entries) in order.per_dim.iter().enumerate() {
        for (seq, (chunk_id, phase)) in entries.iter().enumerate() {
            writeln!(out, "{},{},{},{}", i + 1, seq, chunk_id, phase).unwrap();
        }
    }
    out
}
