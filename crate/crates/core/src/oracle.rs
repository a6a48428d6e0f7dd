//! Ground-truth references for desk-scale verification.
//!
//! The exhaustive oracle enumerates every per-chunk dimension-order
//! assignment, simulates each through the engine, and keeps the minimum
//! makespan. An All-Reduce chunk admits `D! x D!` orderings (`D!` for
//! Reduce-Scatter or All-Gather alone), so a collective of C chunks spans
//! `(D! x D!)^C` assignments; the default enumeration restricts All-Gather
//! to the reversed Reduce-Scatter order, matching the dynamic scheduler,
//! and the full space is opt-in.

use itertools::Itertools;
use thiserror::Error;

use crate::collective::CollectiveKind;
use crate::engine::{simulate, EngineError, EnginePolicy};
use crate::scalar::{cmp_scalar, Scalar};
use crate::schedule::{ChunkSchedule, ScheduleError};
use crate::topology::Topology;

/// Assignments the oracle will enumerate by default.
pub const DEFAULT_SPACE_CAP: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("search space of {space} assignments exceeds the cap of {cap}")]
    SpaceTooLarge { space: u128, cap: u128 },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Debug, Clone)]
pub struct OracleResult<S> {
    pub best_makespan: S,
    pub best_schedules: Vec<ChunkSchedule<S>>,
    /// Number of assignments enumerated.
    pub space_size: u128,
    /// Position of the optimum in the enumeration order (lexicographic over
    /// per-chunk permutation indices; first optimum wins ties).
    pub best_index: u128,
}

/// Every candidate evaluated, for report export.
#[derive(Debug, Clone)]
pub struct OracleCandidate<S> {
    pub index: u128,
    pub encoding: String,
    pub makespan: S,
}

fn perms(d: usize) -> Vec<Vec<usize>> {
    (1..=d).permutations(d).collect()
}

fn encode<S: Scalar>(schedules: &[ChunkSchedule<S>]) -> String {
    schedules
        .iter()
        .map(|s| {
            let rs = s.rs_order.iter().map(|k| k.to_string()).join("-");
            let ag = s.ag_order.iter().map(|k| k.to_string()).join("-");
            match (rs.is_empty(), ag.is_empty()) {
                (false, false) => format!("{rs}>{ag}"),
                (false, true) => rs,
                (true, false) => ag,
                (true, true) => String::from("-"),
            }
        })
        .join(";")
}

/// Enumerate all chunk-order assignments, simulate each, and return the
/// minimum-makespan assignment. Ties resolve to the earliest assignment in
/// lexicographic encoding order, so the result is deterministic.
pub fn exhaustive_best<S: Scalar>(
    topology: &Topology<S>,
    kind: CollectiveKind,
    total_bytes: S,
    chunks_per_collective: usize,
    policy: &EnginePolicy,
    full_space: bool,
    cap: u128,
) -> Result<OracleResult<S>, OracleError> {
    Ok(exhaustive_search(
        topology,
        kind,
        total_bytes,
        chunks_per_collective,
        policy,
        full_space,
        cap,
        false,
    )?
    .0)
}

/// As [`exhaustive_best`], also returning every evaluated candidate.
pub fn exhaustive_report<S: Scalar>(
    topology: &Topology<S>,
    kind: CollectiveKind,
    total_bytes: S,
    chunks_per_collective: usize,
    policy: &EnginePolicy,
    full_space: bool,
    cap: u128,
) -> Result<(OracleResult<S>, Vec<OracleCandidate<S>>), OracleError> {
    exhaustive_search(
        topology,
        kind,
        total_bytes,
        chunks_per_collective,
        policy,
        full_space,
        cap,
        true,
    )
}

#[allow(clippy::too_many_arguments)]
fn exhaustive_search<S: Scalar>(
    topology: &Topology<S>,
    kind: CollectiveKind,
    total_bytes: S,
    cpc: usize,
    policy: &EnginePolicy,
    full_space: bool,
    cap: u128,
    keep_candidates: bool,
) -> Result<(OracleResult<S>, Vec<OracleCandidate<S>>), OracleError> {
    assert!(cpc >= 1, "need at least one chunk");
    assert!(total_bytes > S::zero(), "collective size must be positive");
    let d = topology.num_dims();
    let all_perms = perms(d);
    let fact = all_perms.len() as u128;

    // Options per chunk: one permutation (RS or AG alone), the reversed-AG
    // pairing, or an independent pair when the full space is requested.
    let per_chunk: u128 = match kind {
        CollectiveKind::AllReduce if full_space => fact * fact,
        _ => fact,
    };
    let space = per_chunk
        .checked_pow(cpc as u32)
        .filter(|&s| s <= cap)
        .ok_or(OracleError::SpaceTooLarge {
            space: per_chunk.saturating_pow(cpc as u32),
            cap,
        })?;

    let chunk_bytes = total_bytes / S::from_count(cpc);
    let option_orders: Vec<(Vec<usize>, Vec<usize>)> = match kind {
        CollectiveKind::ReduceScatter => {
            all_perms.iter().map(|p| (p.clone(), Vec::new())).collect()
        }
        CollectiveKind::AllGather => all_perms.iter().map(|p| (Vec::new(), p.clone())).collect(),
        CollectiveKind::AllReduce if full_space => all_perms
            .iter()
            .cartesian_product(all_perms.iter())
            .map(|(rs, ag)| (rs.clone(), ag.clone()))
            .collect(),
        CollectiveKind::AllReduce => all_perms
            .iter()
            .map(|p| (p.clone(), p.iter().rev().copied().collect()))
            .collect(),
    };

    let mut counter = vec![0usize; cpc];
    let mut best: Option<(S, Vec<ChunkSchedule<S>>, u128)> = None;
    let mut candidates = Vec::new();
    for index in 0..space {
        let schedules: Vec<ChunkSchedule<S>> = counter
            .iter()
            .enumerate()
            .map(|(chunk_id, &opt)| {
                let (rs, ag) = &option_orders[opt];
                ChunkSchedule {
                    chunk_id,
                    rs_order: rs.clone(),
                    ag_order: ag.clone(),
                    initial_bytes: chunk_bytes,
                }
            })
            .collect();
        let makespan = simulate(topology, &schedules, policy, None)?.makespan;
        if keep_candidates {
            candidates.push(OracleCandidate {
                index,
                encoding: encode(&schedules),
                makespan,
            });
        }
        let better = match &best {
            None => true,
            Some((cur, _, _)) => cmp_scalar(makespan, *cur).is_lt(),
        };
        if better {
            best = Some((makespan, schedules, index));
        }
        // Mixed-radix increment, last chunk fastest: enumeration order is
        // lexicographic over per-chunk option indices.
        for pos in (0..cpc).rev() {
            counter[pos] += 1;
            if counter[pos] < option_orders.len() {
                break;
            }
            counter[pos] = 0;
        }
    }
    let (best_makespan, best_schedules, best_index) = best.expect("space is non-empty");
    Ok((
        OracleResult {
            best_makespan,
            best_schedules,
            space_size: space,
            best_index,
        },
        candidates,
    ))
}

/// Analytic lower-bound latency at 100% bandwidth utilization:
/// `total_bytes / sum_k aggregate_bw(k)`.
pub fn ideal_latency<S: Scalar>(total_bytes: S, topology: &Topology<S>) -> S {
    total_bytes / topology.total_aggregate_bw()
}

/// CSV report: one row per candidate plus a summary row.
pub fn export_oracle_csv<S: Scalar>(
    result: &OracleResult<S>,
    candidates: &[OracleCandidate<S>],
) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("candidate,schedule,makespan_s\n");
    for c in candidates {
        writeln!(out, "{},{},{}", c.index, c.encoding, c.makespan).unwrap();
    }
    writeln!(
        out,
        "best,{},{}",
        encode(&result.best_schedules),
        result.best_makespan
    )
    .unwrap();
    out
}
