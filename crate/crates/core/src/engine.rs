//! Deterministic discrete-event execution of chunk stage pipelines.
//!
//! The fabric's topology-aware per-dimension algorithms are contention-free
//! and all NPUs act in lockstep, so the whole system reduces to one pipeline
//! of dimension resources. Each dimension admits up to `max_concurrency`
//! ready stages at once. An admitted stage first spends its fixed delay
//! (step latency), during which it holds no bandwidth; fixed phases of
//! co-resident stages overlap freely. Wire transmissions then serialize
//! through the dimension's pipe at full aggregate bandwidth, in policy
//! order. A stage becomes ready when its predecessor in the chunk's
//! traversal completes.
//!
//! The simulation is logically sequential (one event clock). Identical
//! inputs yield bit-identical metrics; every tie is broken by explicit total
//! orders, never by container iteration order.

use thiserror::Error;

use crate::collective::{bytes_sent_per_npu, stages_for_chunk, Phase};
use crate::latency::fixed_delay;
use crate::scalar::{cmp_scalar, is_positive_finite, max_scalar, Scalar};
use crate::schedule::{ChunkSchedule, IntraDimOrder};
use crate::topology::Topology;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("max_concurrency must be >= 1")]
    BadConcurrency,
    #[error("deadlock: no runnable stage but {remaining} unfinished; {detail}")]
    Deadlock { remaining: usize, detail: String },
    #[error("enforced order mismatch: {0}")]
    OrderMismatch(String),
    #[error("metrics have zero makespan")]
    ZeroMakespan,
    #[error("chunk {chunk}: dimension index {dim} outside topology")]
    BadDim { chunk: usize, dim: usize },
}

/// Service order among the ready stages of one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntraDimPolicy {
    /// Ready-time order, ties by chunk id.
    #[default]
    Fifo,
    /// Smallest stage first, measured by the bytes it puts on the wire
    /// (shortest service time); ties by chunk id. Smaller stages finish
    /// sooner and feed the next dimension faster, cutting starvation.
    Scf,
}

impl IntraDimPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntraDimPolicy::Fifo => "fifo",
            IntraDimPolicy::Scf => "scf",
        }
    }
}

impl std::fmt::Display for IntraDimPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnginePolicy {
    pub intra_dim: IntraDimPolicy,
    /// Stages a dimension may hold in flight at once (waiting out their
    /// fixed delay or using the pipe). One chunk saturates the pipe whenever
    /// byte time dominates, so 1 is the default; raise it when small stages
    /// leave the pipe latency-bound, letting their fixed delays overlap.
    pub max_concurrency: usize,
}

impl Default for EnginePolicy {
    fn default() -> Self {
        EnginePolicy {
            intra_dim: IntraDimPolicy::Fifo,
            max_concurrency: 1,
        }
    }
}

impl EnginePolicy {
    pub fn new(intra_dim: IntraDimPolicy, max_concurrency: usize) -> Self {
        EnginePolicy {
            intra_dim,
            max_concurrency,
        }
    }

    /// Unbounded in-flight stages per dimension: every fixed delay overlaps,
    /// transmissions still serialize.
    pub fn unbounded(intra_dim: IntraDimPolicy) -> Self {
        EnginePolicy {
            intra_dim,
            max_concurrency: usize::MAX,
        }
    }
}

/// One (chunk, dimension, phase) stage instance with its predicted duration
/// components.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkOp<S> {
    pub chunk_id: usize,
    pub dim_index: usize,
    pub phase: Phase,
    pub bytes_before: S,
    /// Fixed delay component (steps x step latency).
    pub fixed: S,
    /// Bytes this stage puts on the wire per NPU.
    pub wire_bytes: S,
    /// Wire bytes over aggregate bandwidth at share 1.
    pub byte_time: S,
}

/// Executed interval of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct OpRecord<S> {
    pub chunk_id: usize,
    pub dim_index: usize,
    pub phase: Phase,
    pub bytes_before: S,
    pub wire_bytes: S,
    pub start: S,
    pub end: S,
}

/// Per-dimension tallies of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct DimMetrics<S> {
    /// Time at least one stage was in service.
    pub busy: S,
    /// Idle time while the dimension still had unfinished stages (`idle_K`).
    pub idle_while_pending: S,
    /// Total wire bytes injected (`N_K`).
    pub bytes: S,
    /// Busy intervals, ascending and disjoint.
    pub intervals: Vec<(S, S)>,
}

/// Result of one simulated run. Immutable once returned.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics<S> {
    pub makespan: S,
    pub per_dim: Vec<DimMetrics<S>>,
    /// Bandwidth-weighted mean of per-dimension busy fractions.
    pub weighted_utilization: S,
}

/// Metrics plus the execution trace: per-dimension start order (the
/// consistency contract) and the full op log.
#[derive(Debug, Clone)]
pub struct SimRun<S> {
    pub metrics: RunMetrics<S>,
    pub start_order: IntraDimOrder,
    pub op_log: Vec<OpRecord<S>>,
}

/// Bandwidth-weighted average of per-dimension busy fractions:
/// `sum_k bw_k * (busy_k / makespan) / sum_k bw_k`.
pub fn weighted_utilization<S: Scalar>(
    metrics: &RunMetrics<S>,
    topology: &Topology<S>,
) -> Result<S, EngineError> {
    if !is_positive_finite(metrics.makespan) {
        return Err(EngineError::ZeroMakespan);
    }
    let mut num = S::zero();
    let mut den = S::zero();
    for (dim, m) in topology.dims().iter().zip(&metrics.per_dim) {
        let bw = dim.aggregate_bw();
        num = num + bw * (m.busy / metrics.makespan);
        den = den + bw;
    }
    Ok(num / den)
}

/// Busy fraction of each dimension per time window of the given width, from
/// t = 0 to the makespan. The final window is truncated at the makespan and
/// its fraction uses the truncated width.
pub fn activity_rate<S: Scalar>(metrics: &RunMetrics<S>, window: S) -> Vec<Vec<S>> {
    assert!(window > S::zero(), "window must be positive");
    let makespan = metrics.makespan;
    metrics
        .per_dim
        .iter()
        .map(|m| {
            let mut series = Vec::new();
            let mut lo = S::zero();
            while cmp_scalar(lo, makespan).is_lt() {
                let hi = match cmp_scalar(lo + window, makespan) {
                    std::cmp::Ordering::Greater => makespan,
                    _ => lo + window,
                };
                let covered = m.intervals.iter().fold(S::zero(), |acc, &(s, e)| {
                    let a = max_scalar(s, lo);
                    let b = if cmp_scalar(e, hi).is_gt() { hi } else { e };
                    if cmp_scalar(a, b).is_lt() {
                        acc + (b - a)
                    } else {
                        acc
                    }
                });
                series.push(covered / (hi - lo));
                lo = hi;
            }
            series
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Simulation internals
// ---------------------------------------------------------------------------

struct DimState<S> {
    ready: Vec<usize>,
    /// Admitted stages waiting out their fixed delay; (op, done_at).
    waiting_fixed: Vec<(usize, S)>,
    /// Stages whose fixed delay elapsed, queued for the pipe.
    pipe_queue: Vec<usize>,
    /// The stage currently on the wire; (op, done_at).
    transmitting: Option<(usize, S)>,
    /// Cursor into the enforced order, if any.
    enforced_pos: usize,
    busy_since: Option<S>,
    intervals: Vec<(S, S)>,
    bytes: S,
    last_completion: S,
    started: Vec<(usize, Phase)>,
}

impl<S: Scalar> DimState<S> {
    fn in_flight(&self) -> usize {
        self.waiting_fixed.len() + self.pipe_queue.len() + usize::from(self.transmitting.is_some())
    }

    fn is_busy(&self) -> bool {
        self.transmitting.is_some() || !self.waiting_fixed.is_empty()
    }

    fn note_busy_transition(&mut self, was_busy: bool, t: S) {
        if !was_busy && self.is_busy() {
            match self.intervals.last() {
                Some(&(s, e)) if e == t => {
                    self.intervals.pop();
                    self.busy_since = Some(s);
                }
                _ => self.busy_since = Some(t),
            }
        } else if was_busy && !self.is_busy() {
            if let Some(since) = self.busy_since.take() {
                self.intervals.push((since, t));
            }
        }
    }
}

/// All stage instances plus, per chunk, the op indices in traversal order.
type OpsAndChains<S> = (Vec<ChunkOp<S>>, Vec<Vec<usize>>);

fn build_ops<S: Scalar>(
    topology: &Topology<S>,
    schedules: &[ChunkSchedule<S>],
) -> Result<OpsAndChains<S>, EngineError> {
    let dim_sizes: Vec<usize> = topology.dims().iter().map(|d| d.size).collect();
    let mut ops = Vec::new();
    let mut chains = Vec::with_capacity(schedules.len());
    for sched in schedules {
        for &k in sched.rs_order.iter().chain(&sched.ag_order) {
            if k < 1 || k > dim_sizes.len() {
                return Err(EngineError::BadDim {
                    chunk: sched.chunk_id,
                    dim: k,
                });
            }
        }
        let mut chain = Vec::new();
        for stage in stages_for_chunk(
            &sched.rs_order,
            &sched.ag_order,
            sched.initial_bytes,
            &dim_sizes,
        ) {
            let dim = &topology.dims()[stage.dim_index - 1];
            let wire = bytes_sent_per_npu(stage.phase, stage.p, stage.bytes_before);
            chain.push(ops.len());
            ops.push(ChunkOp {
                chunk_id: sched.chunk_id,
                dim_index: stage.dim_index,
                phase: stage.phase,
                bytes_before: stage.bytes_before,
                fixed: fixed_delay(dim, stage.phase),
                wire_bytes: wire,
                byte_time: wire / dim.aggregate_bw(),
            });
        }
        chains.push(chain);
    }
    Ok((ops, chains))
}

fn check_enforced<S: Scalar>(
    ops: &[ChunkOp<S>],
    enforced: &IntraDimOrder,
    num_dims: usize,
) -> Result<(), EngineError> {
    if enforced.per_dim.len() != num_dims {
        return Err(EngineError::OrderMismatch(format!(
            "order covers {} dimensions, topology has {num_dims}",
            enforced.per_dim.len()
        )));
    }
    for k in 1..=num_dims {
        let mut expected: Vec<(usize, Phase)> = ops
            .iter()
            .filter(|o| o.dim_index == k)
            .map(|o| (o.chunk_id, o.phase))
            .collect();
        let mut given = enforced.per_dim[k - 1].clone();
        expected.sort_by_key(|&(c, p)| (c, p == Phase::AllGather));
        given.sort_by_key(|&(c, p)| (c, p == Phase::AllGather));
        if expected != given {
            return Err(EngineError::OrderMismatch(format!(
                "dimension {k}: enforced ops do not match the schedule"
            )));
        }
    }
    Ok(())
}

/// Simulate the schedules and return the metrics.
pub fn simulate<S: Scalar>(
    topology: &Topology<S>,
    schedules: &[ChunkSchedule<S>],
    policy: &EnginePolicy,
    enforced_order: Option<&IntraDimOrder>,
) -> Result<RunMetrics<S>, EngineError> {
    Ok(simulate_full(topology, schedules, policy, enforced_order)?.metrics)
}

/// Simulate and also return the execution trace.
pub fn simulate_full<S: Scalar>(
    topology: &Topology<S>,
    schedules: &[ChunkSchedule<S>],
    policy: &EnginePolicy,
    enforced_order: Option<&IntraDimOrder>,
) -> Result<SimRun<S>, EngineError> {
    if policy.max_concurrency < 1 {
        return Err(EngineError::BadConcurrency);
    }
    let num_dims = topology.num_dims();
    let (ops, chains) = build_ops(topology, schedules)?;
    if let Some(order) = enforced_order {
        check_enforced(&ops, order, num_dims)?;
    }

    let bw: Vec<S> = topology.dims().iter().map(|d| d.aggregate_bw()).collect();
    let mut dims: Vec<DimState<S>> = (0..num_dims)
        .map(|_| DimState {
            ready: Vec::new(),
            waiting_fixed: Vec::new(),
            pipe_queue: Vec::new(),
            transmitting: None,
            enforced_pos: 0,
            busy_since: None,
            intervals: Vec::new(),
            bytes: S::zero(),
            last_completion: S::zero(),
            started: Vec::new(),
        })
        .collect();

    let mut ready_time = vec![S::zero(); ops.len()];
    let mut starts = vec![S::zero(); ops.len()];
    let mut ends = vec![S::zero(); ops.len()];
    for chain in &chains {
        if let Some(&first) = chain.first() {
            dims[ops[first].dim_index - 1].ready.push(first);
        }
    }
    let mut next_in_chain = vec![0usize; ops.len()];
    for chain in &chains {
        for w in chain.windows(2) {
            next_in_chain[w[0]] = w[1] + 1; // +1 so 0 means "none"
        }
    }

    let policy_key = |a: usize, b: usize, ready_time: &[S]| {
        let (oa, ob) = (&ops[a], &ops[b]);
        match policy.intra_dim {
            IntraDimPolicy::Fifo => {
                cmp_scalar(ready_time[a], ready_time[b]).then(oa.chunk_id.cmp(&ob.chunk_id))
            }
            IntraDimPolicy::Scf => {
                cmp_scalar(oa.wire_bytes, ob.wire_bytes).then(oa.chunk_id.cmp(&ob.chunk_id))
            }
        }
    };

    let mut remaining_ops = ops.len();
    let mut t = S::zero();

    loop {
        for ki in 0..num_dims {
            let was_busy = dims[ki].is_busy();

            // Admissions: pull ready stages while in-flight slots remain.
            // A stage with no fixed delay goes straight to the pipe queue.
            while dims[ki].in_flight() < policy.max_concurrency && !dims[ki].ready.is_empty() {
                let dim = &mut dims[ki];
                let pick = match enforced_order {
                    Some(order) => match order.per_dim[ki].get(dim.enforced_pos) {
                        None => None,
                        Some(&(chunk, phase)) => dim
                            .ready
                            .iter()
                            .position(|&op| ops[op].chunk_id == chunk && ops[op].phase == phase),
                    },
                    None => dim
                        .ready
                        .iter()
                        .enumerate()
                        .min_by(|&(_, &a), &(_, &b)| policy_key(a, b, &ready_time))
                        .map(|(pos, _)| pos),
                };
                let Some(pos) = pick else { break };
                let op = dim.ready.swap_remove(pos);
                dim.enforced_pos += 1;
                starts[op] = t;
                dim.started.push((ops[op].chunk_id, ops[op].phase));
                if ops[op].fixed > S::zero() {
                    dim.waiting_fixed.push((op, t + ops[op].fixed));
                } else {
                    dim.pipe_queue.push(op);
                }
            }

            // Pipe pull: start the next transmission if the wire is free.
            if dims[ki].transmitting.is_none() && !dims[ki].pipe_queue.is_empty() {
                let dim = &mut dims[ki];
                let pos = dim
                    .pipe_queue
                    .iter()
                    .enumerate()
                    .min_by(|&(_, &a), &(_, &b)| policy_key(a, b, &ready_time))
                    .map(|(pos, _)| pos)
                    .expect("queue not empty");
                let op = dim.pipe_queue.swap_remove(pos);
                dim.transmitting = Some((op, t + ops[op].wire_bytes / bw[ki]));
            }

            dims[ki].note_busy_transition(was_busy, t);
        }

        if remaining_ops == 0 {
            break;
        }

        // Next event: earliest fixed-delay expiry or transmit completion.
        let mut t_next: Option<S> = None;
        for dim in &dims {
            for &(_, at) in &dim.waiting_fixed {
                t_next = Some(match t_next {
                    None => at,
                    Some(prev) if cmp_scalar(at, prev).is_lt() => at,
                    Some(prev) => prev,
                });
            }
            if let Some((_, at)) = dim.transmitting {
                t_next = Some(match t_next {
                    None => at,
                    Some(prev) if cmp_scalar(at, prev).is_lt() => at,
                    Some(prev) => prev,
                });
            }
        }
        let Some(t_next) = t_next else {
            let detail = deadlock_detail(&dims, &ops, enforced_order);
            return Err(EngineError::Deadlock {
                remaining: remaining_ops,
                detail,
            });
        };

        // Fixed-delay expiries join the pipe queue; due transmissions
        // complete and release their chunk's next stage.
        for ki in 0..num_dims {
            let was_busy = dims[ki].is_busy();
            let mut expired: Vec<usize> = Vec::new();
            dims[ki].waiting_fixed.retain(|&(op, at)| {
                if at == t_next {
                    expired.push(op);
                    false
                } else {
                    true
                }
            });
            expired.sort_unstable();
            dims[ki].pipe_queue.extend(expired);

            if let Some((op, at)) = dims[ki].transmitting {
                if at == t_next {
                    dims[ki].transmitting = None;
                    ends[op] = t_next;
                    dims[ki].bytes = dims[ki].bytes + ops[op].wire_bytes;
                    dims[ki].last_completion = t_next;
                    remaining_ops -= 1;
                    let next = next_in_chain[op];
                    if next != 0 {
                        let succ = next - 1;
                        ready_time[succ] = t_next;
                        dims[ops[succ].dim_index - 1].ready.push(succ);
                    }
                }
            }
            dims[ki].note_busy_transition(was_busy, t_next);
        }
        t = t_next;
    }

    let makespan = dims
        .iter()
        .fold(S::zero(), |acc, d| max_scalar(acc, d.last_completion));
    let per_dim: Vec<DimMetrics<S>> = dims
        .iter()
        .map(|d| {
            let busy = d
                .intervals
                .iter()
                .fold(S::zero(), |acc, &(s, e)| acc + (e - s));
            DimMetrics {
                busy,
                idle_while_pending: d.last_completion - busy,
                bytes: d.bytes,
                intervals: d.intervals.clone(),
            }
        })
        .collect();
    let mut metrics = RunMetrics {
        makespan,
        per_dim,
        weighted_utilization: S::zero(),
    };
    if makespan > S::zero() {
        metrics.weighted_utilization = weighted_utilization(&metrics, topology)?;
    }

    let start_order = IntraDimOrder {
        per_dim: dims.iter().map(|d| d.started.clone()).collect(),
    };
    let mut op_log: Vec<OpRecord<S>> = ops
        .iter()
        .enumerate()
        .map(|(i, o)| OpRecord {
            chunk_id: o.chunk_id,
            dim_index: o.dim_index,
            phase: o.phase,
            bytes_before: o.bytes_before,
            wire_bytes: o.wire_bytes,
            start: starts[i],
            end: ends[i],
        })
        .collect();
    op_log.sort_by(|a, b| cmp_scalar(a.start, b.start).then(a.chunk_id.cmp(&b.chunk_id)));
    Ok(SimRun {
        metrics,
        start_order,
        op_log,
    })
}

fn deadlock_detail<S: Scalar>(
    dims: &[DimState<S>],
    ops: &[ChunkOp<S>],
    enforced: Option<&IntraDimOrder>,
) -> String {
    let mut parts = Vec::new();
    for (ki, dim) in dims.iter().enumerate() {
        if dim.ready.is_empty() {
            continue;
        }
        let ready: Vec<String> = dim
            .ready
            .iter()
            .map(|&op| format!("c{}.{}", ops[op].chunk_id, ops[op].phase))
            .collect();
        let waiting = enforced
            .and_then(|o| o.per_dim[ki].get(dim.enforced_pos))
            .map(|(c, p)| format!(" waiting on c{c}.{p}"))
            .unwrap_or_default();
        parts.push(format!(
            "dim{} ready [{}]{}",
            ki + 1,
            ready.join(" "),
            waiting
        ));
    }
    if parts.is_empty() {
        "no stage is ready on any dimension".to_string()
    } else {
        parts.join("; ")
    }
}

// ---------------------------------------------------------------------------
// CSV exports
// ---------------------------------------------------------------------------

/// One row per dimension plus a trailing summary row.
pub fn export_metrics_csv<S: Scalar>(metrics: &RunMetrics<S>, topology: &Topology<S>) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("dim,busy_s,idle_pending_s,bytes,utilization\n");
    for (dim, m) in topology.dims().iter().zip(&metrics.per_dim) {
        let util = if metrics.makespan > S::zero() {
            m.busy / metrics.makespan
        } else {
            S::zero()
        };
        writeln!(
            out,
            "{},{},{},{},{}",
            dim.index, m.busy, m.idle_while_pending, m.bytes, util
        )
        .unwrap();
    }
    writeln!(
        out,
        "summary,{},,,{}",
        metrics.makespan, metrics.weighted_utilization
    )
    .unwrap();
    out
}

/// One row per window with per-dimension busy fractions.
pub fn export_activity_csv<S: Scalar>(metrics: &RunMetrics<S>, window: S) -> String {
    use std::fmt::Write as _;
    let series = activity_rate(metrics, window);
    let dims = series.len();
    let windows = series.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut out = String::from("window,start_s");
    for k in 1..=dims {
        out.push_str(&format!(",dim{k}"));
    }
    out.push('\n');
    for w in 0..windows {
        write!(out, "{},{}", w, S::from_count(w) * window).unwrap();
        for dim_series in &series {
            match dim_series.get(w) {
                Some(v) => write!(out, ",{v}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}
