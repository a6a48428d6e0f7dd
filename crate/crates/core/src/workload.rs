//! Training-workload playback.
//!
//! A workload is an ordered list of layers with forward/backward compute
//! times and optional communication per pass. An iteration runs the forward
//! pass in layer order and the backward pass in reverse; blocking
//! communication is fully exposed, overlapped communication is exposed only
//! for whatever exceeds the compute remaining in its pass. Every collective
//! is scheduled by the selected mode and timed by the engine (or the
//! analytic ideal), against the sub-topology its dimension range names.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::collective::CollectiveKind;
use crate::engine::{simulate, EngineError, EnginePolicy, IntraDimPolicy};
use crate::oracle::ideal_latency;
use crate::scalar::{max_scalar, Scalar};
use crate::schedule::{
    baseline_schedule, dynamic_schedule, ScheduleCache, ScheduleError, SchedulerConfig,
};
use crate::topology::{Topology, TopologyError};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("trace line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trace has no layers")]
    Empty,
    #[error("layer '{layer}': {reason}")]
    Layer { layer: String, reason: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Scheduling/timing configuration under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunMode {
    /// Static dim1..dimD schedule, FIFO service.
    Baseline,
    /// Dynamic load-balancing schedule, FIFO service.
    DynamicFifo,
    /// Dynamic load-balancing schedule, smallest-first service.
    DynamicScf,
    /// Analytic 100%-utilization bound: size over total bandwidth.
    Ideal,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Baseline => "baseline",
            RunMode::DynamicFifo => "dynamic-fifo",
            RunMode::DynamicScf => "dynamic-scf",
            RunMode::Ideal => "ideal",
        }
    }

    pub fn parse(s: &str) -> Option<RunMode> {
        match s {
            "baseline" => Some(RunMode::Baseline),
            "dynamic-fifo" => Some(RunMode::DynamicFifo),
            "dynamic-scf" => Some(RunMode::DynamicScf),
            "ideal" => Some(RunMode::Ideal),
            _ => None,
        }
    }

    pub fn all() -> [RunMode; 4] {
        [
            RunMode::Baseline,
            RunMode::DynamicFifo,
            RunMode::DynamicScf,
            RunMode::Ideal,
        ]
    }
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Communication pattern a layer issues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommKind {
    Collective(CollectiveKind),
    /// Modeled as a single-stage volume transfer over its dimension group,
    /// not a schedulable multi-stage pipeline.
    AllToAll,
}

impl CommKind {
    fn parse(s: &str) -> Option<CommKind> {
        match s {
            "all_reduce" => Some(CommKind::Collective(CollectiveKind::AllReduce)),
            "reduce_scatter" => Some(CommKind::Collective(CollectiveKind::ReduceScatter)),
            "all_gather" => Some(CommKind::Collective(CollectiveKind::AllGather)),
            "all_to_all" => Some(CommKind::AllToAll),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CommKind::Collective(k) => k.as_str(),
            CommKind::AllToAll => "all_to_all",
        }
    }
}

/// Dimension range a collective spans, resolved against a topology. Must be
/// a contiguous prefix or suffix of 1..=D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DimRange {
    All,
    /// Dimensions 1..=k.
    First(usize),
    /// The last k dimensions.
    Last(usize),
    /// All dimensions but the last.
    Prefix,
    /// Explicit 1-based inclusive range.
    Span(usize, usize),
}

impl DimRange {
    fn parse(s: &str) -> Option<DimRange> {
        if s == "all" {
            return Some(DimRange::All);
        }
        if s == "prefix" {
            return Some(DimRange::Prefix);
        }
        if let Some(k) = s.strip_prefix("first:") {
            return k.parse().ok().map(DimRange::First);
        }
        if let Some(k) = s.strip_prefix("last:") {
            return k.parse().ok().map(DimRange::Last);
        }
        if let Some((lo, hi)) = s.split_once('-') {
            return match (lo.parse().ok(), hi.parse().ok()) {
                (Some(lo), Some(hi)) => Some(DimRange::Span(lo, hi)),
                _ => None,
            };
        }
        s.parse().ok().map(|k| DimRange::Span(k, k))
    }

    pub fn as_token(&self) -> String {
        match self {
            DimRange::All => "all".into(),
            DimRange::First(k) => format!("first:{k}"),
            DimRange::Last(k) => format!("last:{k}"),
            DimRange::Prefix => "prefix".into(),
            DimRange::Span(lo, hi) => format!("{lo}-{hi}"),
        }
    }

    /// Resolve to concrete 1-based bounds for a D-dimensional topology.
    pub fn resolve(&self, d: usize) -> Result<(usize, usize), String> {
        let (lo, hi) = match *self {
            DimRange::All => (1, d),
            DimRange::First(k) => (1, k),
            DimRange::Last(k) => (d.checked_sub(k).map(|x| x + 1).unwrap_or(0), d),
            DimRange::Prefix => (1, d.saturating_sub(1)),
            DimRange::Span(lo, hi) => (lo, hi),
        };
        if lo < 1 || hi > d || lo > hi {
            return Err(format!(
                "dimension range {}..{} invalid for {d} dimensions",
                lo, hi
            ));
        }
        if lo != 1 && hi != d {
            return Err(format!(
                "dimension range {lo}..{hi} must be a prefix or suffix of 1..{d}"
            ));
        }
        Ok((lo, hi))
    }
}

/// One communication operation attached to a layer pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommSpec<S> {
    pub kind: CommKind,
    pub bytes: S,
    pub dims: DimRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapTag {
    Blocking,
    Overlapped,
}

/// One layer of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec<S> {
    pub name: String,
    pub fwd_compute: S,
    pub bwd_ig_compute: S,
    pub bwd_wg_compute: S,
    pub fwd_comm: Option<CommSpec<S>>,
    pub bwd_comm: Option<CommSpec<S>>,
    pub overlap: OverlapTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Data,
    Model,
    Hybrid,
}

impl Parallelism {
    pub fn as_str(&self) -> &'static str {
        match self {
            Parallelism::Data => "data",
            Parallelism::Model => "model",
            Parallelism::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload<S> {
    pub layers: Vec<LayerSpec<S>>,
    pub parallelism: Parallelism,
}

/// Which budget a collective's exposure counts against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommClass {
    DataParallel,
    ModelParallel,
}

/// Timing of one communication operation within an iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CommRecord<S> {
    pub layer: String,
    pub forward: bool,
    pub kind: CommKind,
    pub bytes: S,
    pub dims: (usize, usize),
    pub class: CommClass,
    /// Engine (or ideal) time of the operation.
    pub time: S,
    /// Portion counted against the iteration, after overlap.
    pub exposed: S,
}

/// Per-iteration time decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport<S> {
    pub fwd_compute: S,
    pub bwd_compute: S,
    pub exposed_dp_comm: S,
    pub exposed_mp_comm: S,
    pub total: S,
    pub comms: Vec<CommRecord<S>>,
}

// ---------------------------------------------------------------------------
// Trace parsing
// ---------------------------------------------------------------------------

/// Parse a workload trace: one layer per line,
/// `name, fwd_us, bwd_ig_us, bwd_wg_us, fwd_comm_kind, fwd_comm_bytes,
/// fwd_dims, bwd_comm_kind, bwd_comm_bytes, bwd_dims, overlap_tag`,
/// with `none` placeholders for absent fields. Lines starting with `#` and
/// blank lines are skipped.
pub fn load_workload<S: Scalar>(text: &str) -> Result<Workload<S>, WorkloadError> {
    let mut layers = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let fail = |reason: String| WorkloadError::Parse {
            line: lineno + 1,
            reason,
        };
        if fields.len() != 11 {
            return Err(fail(format!("expected 11 fields, got {}", fields.len())));
        }
        let name = fields[0].to_string();
        let us = |idx: usize| -> Result<S, WorkloadError> {
            let v: f64 = fields[idx].parse().map_err(|_| WorkloadError::Parse {
                line: lineno + 1,
                reason: format!("'{}' is not a number (field {})", fields[idx], idx + 1),
            })?;
            if v < 0.0 {
                return Err(WorkloadError::Parse {
                    line: lineno + 1,
                    reason: format!("compute time must be >= 0, got {v}"),
                });
            }
            Ok(S::from_config(v * 1e-6))
        };
        let comm = |kidx: usize| -> Result<Option<CommSpec<S>>, WorkloadError> {
            let err = |reason: String| WorkloadError::Parse {
                line: lineno + 1,
                reason,
            };
            if fields[kidx] == "none" {
                return Ok(None);
            }
            let kind = CommKind::parse(fields[kidx])
                .ok_or_else(|| err(format!("unknown collective '{}'", fields[kidx])))?;
            let bytes: f64 = fields[kidx + 1]
                .parse()
                .map_err(|_| err(format!("bad byte count '{}'", fields[kidx + 1])))?;
            if bytes <= 0.0 {
                return Err(err(format!("byte count must be positive, got {bytes}")));
            }
            let dims = DimRange::parse(fields[kidx + 2])
                .ok_or_else(|| err(format!("bad dimension range '{}'", fields[kidx + 2])))?;
            Ok(Some(CommSpec {
                kind,
                bytes: S::from_config(bytes),
                dims,
            }))
        };
        let overlap = match fields[10] {
            "blocking" => OverlapTag::Blocking,
            "overlapped" => OverlapTag::Overlapped,
            other => return Err(fail(format!("unknown overlap tag '{other}'"))),
        };
        layers.push(LayerSpec {
            name,
            fwd_compute: us(1)?,
            bwd_ig_compute: us(2)?,
            bwd_wg_compute: us(3)?,
            fwd_comm: comm(4)?,
            bwd_comm: comm(7)?,
            overlap,
        });
    }
    if layers.is_empty() {
        return Err(WorkloadError::Empty);
    }
    let parallelism = infer_parallelism(&layers);
    Ok(Workload {
        layers,
        parallelism,
    })
}

fn is_model_parallel<S: Scalar>(comm: &CommSpec<S>, forward: bool) -> bool {
    match comm.kind {
        CommKind::AllToAll => true,
        CommKind::Collective(_) => {
            forward
                || matches!(comm.dims, DimRange::Prefix)
                || matches!(comm.dims, DimRange::First(_))
        }
    }
}

fn infer_parallelism<S: Scalar>(layers: &[LayerSpec<S>]) -> Parallelism {
    let mut mp = false;
    let mut dp = false;
    for layer in layers {
        if let Some(c) = &layer.fwd_comm {
            if is_model_parallel(c, true) {
                mp = true;
            } else {
                dp = true;
            }
        }
        if let Some(c) = &layer.bwd_comm {
            if is_model_parallel(c, false) {
                mp = true;
            } else {
                dp = true;
            }
        }
    }
    match (mp, dp) {
        (true, true) => Parallelism::Hybrid,
        (true, false) => Parallelism::Model,
        _ => Parallelism::Data,
    }
}

// ---------------------------------------------------------------------------
// Iteration execution
// ---------------------------------------------------------------------------

struct CommTimer<'a, S> {
    topology: &'a Topology<S>,
    scheduler: SchedulerConfig<S>,
    max_concurrency: usize,
    mode: RunMode,
    subtopologies: HashMap<(usize, usize), Topology<S>>,
    /// One schedule cache per sub-topology scope; entries are reused across
    /// layers and iterations that issue the same collective.
    schedule_caches: HashMap<(usize, usize), ScheduleCache<S>>,
    times: HashMap<(usize, usize, CommKind, u64), S>,
}

impl<'a, S: Scalar> CommTimer<'a, S> {
    fn new(
        topology: &'a Topology<S>,
        scheduler: SchedulerConfig<S>,
        max_concurrency: usize,
        mode: RunMode,
    ) -> Self {
        CommTimer {
            topology,
            scheduler,
            max_concurrency,
            mode,
            subtopologies: HashMap::new(),
            schedule_caches: HashMap::new(),
            times: HashMap::new(),
        }
    }

    fn policy(&self) -> EnginePolicy {
        let intra_dim = match self.mode {
            RunMode::DynamicScf => IntraDimPolicy::Scf,
            _ => IntraDimPolicy::Fifo,
        };
        EnginePolicy {
            intra_dim,
            max_concurrency: self.max_concurrency,
        }
    }

    fn time(&mut self, comm: &CommSpec<S>) -> Result<(S, (usize, usize)), WorkloadError> {
        let d = self.topology.num_dims();
        let (lo, hi) = comm
            .dims
            .resolve(d)
            .map_err(|reason| WorkloadError::Layer {
                layer: comm.kind.as_str().into(),
                reason,
            })?;
        let key = (lo, hi, comm.kind, comm.bytes.to_f64().unwrap().to_bits());
        if let Some(&t) = self.times.get(&key) {
            return Ok((t, (lo, hi)));
        }
        let topology = self.topology;
        let sub = self
            .subtopologies
            .entry((lo, hi))
            .or_insert_with(|| topology.subtopology(lo, hi).expect("range validated"))
            .clone();
        let t = match (self.mode, comm.kind) {
            (RunMode::Ideal, _) => ideal_latency(comm.bytes, &sub),
            (_, CommKind::AllToAll) => all_to_all_time(comm.bytes, &sub),
            (mode, CommKind::Collective(kind)) => {
                let cpc = self.scheduler.chunks_per_collective;
                let scheduler = self.scheduler;
                let schedules = self
                    .schedule_caches
                    .entry((lo, hi))
                    .or_default()
                    .get_or_insert_with(kind, comm.bytes, cpc, || match mode {
                        RunMode::Baseline => baseline_schedule(kind, comm.bytes, cpc, &sub),
                        _ => dynamic_schedule(kind, comm.bytes, &scheduler, &sub),
                    })?;
                simulate(&sub, &schedules, &self.policy(), None)?.makespan
            }
        };
        self.times.insert(key, t);
        Ok((t, (lo, hi)))
    }
}

/// Single-stage volume transfer: each NPU moves `(p-1)/p` of the payload
/// across the group's combined pipe, after one fixed delay.
fn all_to_all_time<S: Scalar>(bytes: S, group: &Topology<S>) -> S {
    let p = S::from_count(group.total_npus());
    let wire = (p - S::one()) / p * bytes;
    let latency = group
        .dims()
        .iter()
        .fold(S::zero(), |acc, d| max_scalar(acc, d.step_latency));
    latency + wire / group.total_aggregate_bw()
}

/// Execute one training iteration and decompose its time.
///
/// The forward pass walks layers in order, the backward pass in reverse.
/// Blocking communication is exposed in full; overlapped communication is
/// exposed only past its overlap window, the compute remaining in the same
/// pass. The engine policy argument contributes its concurrency cap; the
/// intra-dimension service discipline follows the mode.
pub fn run_iteration<S: Scalar>(
    workload: &Workload<S>,
    topology: &Topology<S>,
    scheduler: &SchedulerConfig<S>,
    engine_policy: &EnginePolicy,
    mode: RunMode,
) -> Result<IterationReport<S>, WorkloadError> {
    let mut timer = CommTimer::new(topology, *scheduler, engine_policy.max_concurrency, mode);
    let layers = &workload.layers;

    let fwd_compute = layers.iter().fold(S::zero(), |acc, l| acc + l.fwd_compute);
    let bwd_compute = layers.iter().fold(S::zero(), |acc, l| {
        acc + l.bwd_ig_compute + l.bwd_wg_compute
    });

    let mut exposed_dp = S::zero();
    let mut exposed_mp = S::zero();
    let mut comms = Vec::new();
    let mut expose = |record: CommRecord<S>| {
        match record.class {
            CommClass::DataParallel => exposed_dp = exposed_dp + record.exposed,
            CommClass::ModelParallel => exposed_mp = exposed_mp + record.exposed,
        }
        comms.push(record);
    };

    // Forward pass.
    let mut compute_after = fwd_compute;
    for layer in layers {
        compute_after = compute_after - layer.fwd_compute;
        if let Some(comm) = &layer.fwd_comm {
            let (time, dims) = timer.time(comm)?;
            let exposed = match layer.overlap {
                OverlapTag::Blocking => time,
                OverlapTag::Overlapped => max_scalar(time - compute_after, S::zero()),
            };
            let class = if is_model_parallel(comm, true) {
                CommClass::ModelParallel
            } else {
                CommClass::DataParallel
            };
            expose(CommRecord {
                layer: layer.name.clone(),
                forward: true,
                kind: comm.kind,
                bytes: comm.bytes,
                dims,
                class,
                time,
                exposed,
            });
        }
    }

    // Backward pass, reverse layer order.
    let mut compute_after = bwd_compute;
    for layer in layers.iter().rev() {
        compute_after = compute_after - layer.bwd_ig_compute - layer.bwd_wg_compute;
        if let Some(comm) = &layer.bwd_comm {
            let (time, dims) = timer.time(comm)?;
            let exposed = match layer.overlap {
                OverlapTag::Blocking => time,
                OverlapTag::Overlapped => max_scalar(time - compute_after, S::zero()),
            };
            let class = if is_model_parallel(comm, false) {
                CommClass::ModelParallel
            } else {
                CommClass::DataParallel
            };
            expose(CommRecord {
                layer: layer.name.clone(),
                forward: false,
                kind: comm.kind,
                bytes: comm.bytes,
                dims,
                class,
                time,
                exposed,
            });
        }
    }

    let total = fwd_compute + bwd_compute + exposed_dp + exposed_mp;
    Ok(IterationReport {
        fwd_compute,
        bwd_compute,
        exposed_dp_comm: exposed_dp,
        exposed_mp_comm: exposed_mp,
        total,
        comms,
    })
}

/// Compute time from a FLOP count at a fixed roofline rate.
pub fn roofline_compute<S: Scalar>(flops: S, peak_flops_per_sec: S) -> S {
    flops / peak_flops_per_sec
}

/// CSV mirroring the stacked iteration decomposition: one row per mode.
pub fn export_iteration_csv<S: Scalar>(rows: &[(RunMode, IterationReport<S>)]) -> String {
    let mut out =
        String::from("mode,fwd_compute_s,bwd_compute_s,exposed_dp_s,exposed_mp_s,total_s\n");
    for (mode, r) in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            mode, r.fwd_compute, r.bwd_compute, r.exposed_dp_comm, r.exposed_mp_comm, r.total
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::DimKind;

    fn two_to_one_4x4() -> Topology<f64> {
        Topology::from_dims(&[
            (4, DimKind::Ring, f64::powi(2.0, 31), 1, 0.0),
            (4, DimKind::Ring, f64::powi(2.0, 30), 1, 0.0),
        ])
        .unwrap()
    }

    const TRACE: &str = "\
# two comm-heavy layers
stem, 100, 120, 80, none, none, none, all_reduce, 134217728, all, blocking
head, 50, 60, 40, none, none, none, all_reduce, 134217728, all, blocking
";

    #[test]
    fn parse_basic_trace() {
        let w: Workload<f64> = load_workload(TRACE).unwrap();
        assert_eq!(w.layers.len(), 2);
        assert_eq!(w.parallelism, Parallelism::Data);
        assert_eq!(w.layers[0].name, "stem");
        assert!((w.layers[0].fwd_compute - 100e-6).abs() < 1e-15);
        let comm = w.layers[0].bwd_comm.unwrap();
        assert_eq!(comm.kind, CommKind::Collective(CollectiveKind::AllReduce));
        assert_eq!(comm.bytes, 134217728.0);
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(matches!(
            load_workload::<f64>("# nothing\n"),
            Err(WorkloadError::Empty)
        ));
        assert!(matches!(
            load_workload::<f64>(""),
            Err(WorkloadError::Empty)
        ));
    }

    #[test]
    fn malformed_lines_name_the_line() {
        let err = load_workload::<f64>("a, 1, 2\n").unwrap_err();
        match err {
            WorkloadError::Parse { line: 1, .. } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_comm_iteration_is_pure_compute() {
        let trace = "l0, 100, 100, 50, none, none, none, none, none, none, blocking\n\
                     l1, 200, 100, 50, none, none, none, none, none, none, blocking\n";
        let w: Workload<f64> = load_workload(trace).unwrap();
        let t = two_to_one_4x4();
        let report = run_iteration(
            &w,
            &t,
            &SchedulerConfig::default(),
            &EnginePolicy::default(),
            RunMode::Baseline,
        )
        .unwrap();
        assert!((report.fwd_compute - 300e-6).abs() < 1e-12);
        assert!((report.bwd_compute - 300e-6).abs() < 1e-12);
        assert_eq!(report.exposed_dp_comm, 0.0);
        assert_eq!(report.exposed_mp_comm, 0.0);
        assert!((report.total - 600e-6).abs() < 1e-12);
    }

    #[test]
    fn ideal_mode_single_blocking_all_reduce() {
        let trace = "l0, 0, 0, 0, none, none, none, all_reduce, 268435456, all, blocking\n";
        let w: Workload<f64> = load_workload(trace).unwrap();
        let t = two_to_one_4x4();
        let report = run_iteration(
            &w,
            &t,
            &SchedulerConfig::default(),
            &EnginePolicy::default(),
            RunMode::Ideal,
        )
        .unwrap();
        let expect = 268435456.0 / t.total_aggregate_bw();
        assert!((report.exposed_dp_comm - expect).abs() < 1e-15);
        assert_eq!(report.total, report.exposed_dp_comm);
    }

    #[test]
    fn dynamic_beats_baseline_on_comm_dominated_trace() {
        let w: Workload<f64> = load_workload(TRACE).unwrap();
        let t = two_to_one_4x4();
        let cfg = SchedulerConfig::new(4, 16.0);
        let policy = EnginePolicy::default();
        let base = run_iteration(&w, &t, &cfg, &policy, RunMode::Baseline).unwrap();
        let scf = run_iteration(&w, &t, &cfg, &policy, RunMode::DynamicScf).unwrap();
        let ideal = run_iteration(&w, &t, &cfg, &policy, RunMode::Ideal).unwrap();
        assert!(scf.exposed_dp_comm < base.exposed_dp_comm);
        assert!(ideal.exposed_dp_comm <= scf.exposed_dp_comm);
        assert_eq!(base.fwd_compute, scf.fwd_compute);
        assert_eq!(base.bwd_compute, scf.bwd_compute);
    }

    #[test]
    fn overlapped_comm_exposes_only_the_excess() {
        // Overlapped forward all-to-all with 150us of later forward compute:
        // only the part of the transfer beyond 150us is exposed.
        let trace = "\
emb, 10, 10, 10, all_to_all, 100000000, all, none, none, none, overlapped
mlp0, 100, 100, 100, none, none, none, none, none, none, blocking
mlp1, 50, 50, 50, none, none, none, none, none, none, blocking
";
        let w: Workload<f64> = load_workload(trace).unwrap();
        assert_eq!(w.parallelism, Parallelism::Model);
        let t = two_to_one_4x4();
        let report = run_iteration(
            &w,
            &t,
            &SchedulerConfig::default(),
            &EnginePolicy::default(),
            RunMode::Baseline,
        )
        .unwrap();
        let a2a = &report.comms[0];
        assert_eq!(a2a.class, CommClass::ModelParallel);
        let window = 150e-6;
        let expect = (a2a.time - window).max(0.0);
        assert!((a2a.exposed - expect).abs() < 1e-12);
        assert_eq!(report.exposed_mp_comm, a2a.exposed);
    }

    #[test]
    fn single_dim_collective_same_under_all_schedulers() {
        let trace = "l0, 10, 10, 10, none, none, none, all_reduce, 50000000, last:1, blocking\n";
        let w: Workload<f64> = load_workload(trace).unwrap();
        let t = two_to_one_4x4();
        let cfg = SchedulerConfig::default();
        let policy = EnginePolicy::default();
        let base = run_iteration(&w, &t, &cfg, &policy, RunMode::Baseline).unwrap();
        let fifo = run_iteration(&w, &t, &cfg, &policy, RunMode::DynamicFifo).unwrap();
        let scf = run_iteration(&w, &t, &cfg, &policy, RunMode::DynamicScf).unwrap();
        assert_eq!(base.exposed_dp_comm, fifo.exposed_dp_comm);
        assert_eq!(base.exposed_dp_comm, scf.exposed_dp_comm);
    }

    #[test]
    fn roofline_converts_flops_to_seconds() {
        // 312 TFLOPS peak: 624 GFLOP of work takes 2 ms.
        assert_eq!(roofline_compute(6.24e11, 3.12e14), 2e-3);
    }

    #[test]
    fn dim_range_tokens_resolve() {
        assert_eq!(DimRange::parse("all").unwrap().resolve(3).unwrap(), (1, 3));
        assert_eq!(
            DimRange::parse("prefix").unwrap().resolve(3).unwrap(),
            (1, 2)
        );
        assert_eq!(
            DimRange::parse("first:2").unwrap().resolve(4).unwrap(),
            (1, 2)
        );
        assert_eq!(
            DimRange::parse("last:1").unwrap().resolve(4).unwrap(),
            (4, 4)
        );
        assert_eq!(DimRange::parse("2-4").unwrap().resolve(4).unwrap(), (2, 4));
        assert_eq!(DimRange::parse("3").unwrap().resolve(3).unwrap(), (3, 3));
        // Mid-span neither prefix nor suffix.
        assert!(DimRange::parse("2-3").unwrap().resolve(4).is_err());
        assert!(DimRange::parse("first:5").unwrap().resolve(3).is_err());
    }
}
