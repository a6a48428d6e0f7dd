//! Per-dimension collective algorithm models.
//!
//! Every dimension runs the contention-free algorithm matching its shape
//! (ring, direct exchange, halving-doubling). The three algorithms move the
//! same per-NPU byte volume for a given phase; they differ only in step
//! count, which feeds the fixed-delay term of the latency model.
//!
//! An All-Reduce is always decomposed into a Reduce-Scatter pass followed by
//! an All-Gather pass before anything reaches the engine. Chunk size in a
//! stage means the chunk data resident per NPU before the stage begins:
//! Reduce-Scatter over `p` peers shrinks it by `p`, All-Gather grows it by
//! `p`.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::topology::DimKind;

#[derive(Debug, Error)]
pub enum CollectiveError {
    #[error("dimension size must be >= 2, got {0}")]
    SizeTooSmall(usize),
    #[error("halving-doubling requires a power-of-two size, got {0}")]
    NotPowerOfTwo(usize),
}

/// Collective pattern requested by a workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollectiveKind {
    ReduceScatter,
    AllGather,
    AllReduce,
}

impl CollectiveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CollectiveKind::ReduceScatter => "reduce_scatter",
            CollectiveKind::AllGather => "all_gather",
            CollectiveKind::AllReduce => "all_reduce",
        }
    }
}

impl std::fmt::Display for CollectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the two passes of the stage pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    ReduceScatter,
    AllGather,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::ReduceScatter => "rs",
            Phase::AllGather => "ag",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One (phase, dimension) stage of a chunk's traversal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSpec<S> {
    pub phase: Phase,
    /// 1-based dimension index.
    pub dim_index: usize,
    /// Dimension size P_k.
    pub p: usize,
    /// Chunk bytes resident per NPU before this stage begins.
    pub bytes_before: S,
}

fn check_p(kind: DimKind, p: usize) -> Result<(), CollectiveError> {
    if p < 2 {
        return Err(CollectiveError::SizeTooSmall(p));
    }
    if kind == DimKind::Switch && !p.is_power_of_two() {
        return Err(CollectiveError::NotPowerOfTwo(p));
    }
    Ok(())
}

/// Number of communication steps for one phase on a dimension of size `p`:
/// ring takes `p - 1`, direct exchange takes 1, halving-doubling takes
/// `log2(p)`. A full All-Reduce on a ring is the familiar `2p - 2`.
pub fn num_steps(_phase: Phase, kind: DimKind, p: usize) -> Result<u32, CollectiveError> {
    check_p(kind, p)?;
    Ok(match kind {
        DimKind::Ring => (p - 1) as u32,
        DimKind::FullyConnected => 1,
        DimKind::Switch => p.trailing_zeros(),
    })
}

/// Bytes each NPU sends on the wire for one stage. Reduce-Scatter of `S`
/// bytes over `p` peers sends `(p-1)/p * S`; All-Gather of an `S`-byte shard
/// sends `(p-1) * S`, i.e. `(p-1)/p` of the gathered result. The volume is
/// algorithm-independent.
pub fn bytes_sent_per_npu<S: Scalar>(phase: Phase, p: usize, bytes_before: S) -> S {
    let p_s = S::from_count(p);
    let pm1 = S::from_count(p - 1);
    match phase {
        Phase::ReduceScatter => pm1 / p_s * bytes_before,
        Phase::AllGather => pm1 * bytes_before,
    }
}

/// Per-NPU resident bytes after the stage: `S/p` for Reduce-Scatter,
/// `S*p` for All-Gather.
pub fn size_after<S: Scalar>(phase: Phase, p: usize, bytes_before: S) -> S {
    let p_s = S::from_count(p);
    match phase {
        Phase::ReduceScatter => bytes_before / p_s,
        Phase::AllGather => bytes_before * p_s,
    }
}

/// Expand a chunk's traversal into its stage list with resident sizes
/// applied along the way: every Reduce-Scatter stage first (in `rs_order`),
/// then every All-Gather stage (in `ag_order`).
pub fn stages_for_chunk<S: Scalar>(
    rs_order: &[usize],
    ag_order: &[usize],
    initial_bytes: S,
    dim_sizes: &[usize],
) -> Vec<StageSpec<S>> {
    let mut stages = Vec::with_capacity(rs_order.len() + ag_order.len());
    let mut bytes = initial_bytes;
    for &k in rs_order {
        let p = dim_sizes[k - 1];
        stages.push(StageSpec {
            phase: Phase::ReduceScatter,
            dim_index: k,
            p,
            bytes_before: bytes,
        });
        bytes = size_after(Phase::ReduceScatter, p, bytes);
    }
    for &k in ag_order {
        let p = dim_sizes[k - 1];
        stages.push(StageSpec {
            phase: Phase::AllGather,
            dim_index: k,
            p,
            bytes_before: bytes,
        });
        bytes = size_after(Phase::AllGather, p, bytes);
    }
    stages
}

#[cfg(test)]
mod tests {
    use super::*;

    const MB: f64 = 1e6;

    /// Independent oracle for the halving-doubling step count: simulate the
    /// recursive-halving reduce-scatter exchange segment by segment and count
    /// the rounds needed until every NPU holds a distinct, fully reduced 1/p
    /// shard.
    fn halving_doubling_rounds(p: usize) -> u32 {
        assert!(p.is_power_of_two());
        // contributions[npu][segment] = set of ranks reduced into that segment
        let mut contributions: Vec<Vec<u64>> = (0..p).map(|i| vec![1u64 << i; p]).collect();
        // working[npu] = (lo, hi) segment range this NPU is still reducing
        let mut working: Vec<(usize, usize)> = vec![(0, p); p];
        let mut rounds = 0;
        let mut dist = p / 2;
        while dist >= 1 {
            let snapshot = contributions.clone();
            for i in 0..p {
                let partner = i ^ dist;
                let (lo, hi) = working[i];
                let mid = (lo + hi) / 2;
                // Keep the half containing our own index, absorb the
                // partner's copy of it.
                let keep = if i & dist == 0 { (lo, mid) } else { (mid, hi) };
                for seg in keep.0..keep.1 {
                    contributions[i][seg] |= snapshot[partner][seg];
                }
                working[i] = keep;
            }
            rounds += 1;
            dist /= 2;
        }
        let full = (1u128 << p) - 1;
        for (i, w) in working.iter().enumerate() {
            assert_eq!(w.1 - w.0, 1, "NPU {i} must end with one segment");
            assert_eq!(
                u128::from(contributions[i][w.0]),
                full,
                "segment fully reduced"
            );
        }
        rounds
    }

    #[test]
    fn step_counts_per_kind() {
        assert_eq!(
            num_steps(Phase::ReduceScatter, DimKind::Ring, 4).unwrap(),
            3
        );
        assert_eq!(
            num_steps(Phase::AllGather, DimKind::FullyConnected, 8).unwrap(),
            1
        );
        // Derived by enumerating the recursive halving schedule for p = 8.
        assert_eq!(halving_doubling_rounds(8), 3);
        assert_eq!(
            num_steps(Phase::ReduceScatter, DimKind::Switch, 8).unwrap(),
            3
        );
        for p in [2usize, 4, 16, 64] {
            assert_eq!(
                num_steps(Phase::ReduceScatter, DimKind::Switch, p).unwrap(),
                halving_doubling_rounds(p)
            );
        }
    }

    #[test]
    fn direct_is_single_step_for_any_size() {
        for p in 2..40 {
            assert_eq!(
                num_steps(Phase::AllGather, DimKind::FullyConnected, p).unwrap(),
                1
            );
        }
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(num_steps(Phase::ReduceScatter, DimKind::Ring, 1).is_err());
        assert!(num_steps(Phase::ReduceScatter, DimKind::Switch, 12).is_err());
    }

    #[test]
    fn wire_volume_examples() {
        assert_eq!(
            bytes_sent_per_npu(Phase::ReduceScatter, 4, 4.0 * MB),
            3.0 * MB
        );
        // 16 MB All-Gather moves the same wire volume as a 64 MB Reduce-Scatter.
        assert_eq!(
            bytes_sent_per_npu(Phase::AllGather, 4, 16.0 * MB),
            48.0 * MB
        );
        assert_eq!(
            bytes_sent_per_npu(Phase::ReduceScatter, 4, 64.0 * MB),
            48.0 * MB
        );
        assert_eq!(bytes_sent_per_npu(Phase::ReduceScatter, 2, 10.0), 5.0);
    }

    #[test]
    fn size_transitions() {
        assert_eq!(size_after(Phase::ReduceScatter, 4, 64.0 * MB), 16.0 * MB);
        assert_eq!(size_after(Phase::AllGather, 4, 16.0 * MB), 64.0 * MB);
        let s = 12.5 * MB;
        assert_eq!(
            size_after(Phase::AllGather, 8, size_after(Phase::ReduceScatter, 8, s)),
            s
        );
    }

    #[test]
    fn volume_conservation_rs_ag_duality() {
        for p in [2usize, 3, 4, 8, 16] {
            let s = 64.0 * MB;
            let rs = bytes_sent_per_npu(Phase::ReduceScatter, p, s);
            let ag =
                bytes_sent_per_npu(Phase::AllGather, p, size_after(Phase::ReduceScatter, p, s));
            assert!((rs - ag).abs() < 1e-6, "p={p}: {rs} vs {ag}");
        }
    }

    #[test]
    fn full_traversal_shrinks_then_restores() {
        let sizes = [4usize, 2, 8];
        let total_p: usize = sizes.iter().product();
        // Any dimension ordering leaves S / prod(P) after the RS pass and
        // restores S after the AG pass.
        use itertools::Itertools;
        for perm in (1..=3usize).permutations(3) {
            let rev: Vec<usize> = perm.iter().rev().copied().collect();
            let stages = stages_for_chunk(&perm, &rev, 64.0 * MB, &sizes);
            assert_eq!(stages.len(), 6);
            let after_rs = size_after(stages[2].phase, stages[2].p, stages[2].bytes_before);
            assert!((after_rs - 64.0 * MB / total_p as f64).abs() < 1e-9);
            let last = stages.last().unwrap();
            let final_size = size_after(last.phase, last.p, last.bytes_before);
            assert!((final_size - 64.0 * MB).abs() < 1e-9);
        }
    }
}
