//! Per-stage latency model.
//!
//! The total latency a dimension contributes decomposes as
//! `A_K + N_K * B_K + idle_K`: a fixed delay per stage (steps times step
//! latency), a per-byte term (wire bytes over aggregate bandwidth), and idle
//! time measured post-hoc by the engine. The scheduler's predictive view uses
//! only the byte term per chunk, with the fixed delays seeded once per phase;
//! the engine's executed view charges both per stage.

use crate::collective::{bytes_sent_per_npu, num_steps, Phase};
use crate::scalar::Scalar;
use crate::topology::NetworkDim;

/// Per-dimension latency parameters: fixed delays per phase and the
/// per-byte latency `b = 1 / aggregate_bw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimLatencyParams<S> {
    pub a_rs: S,
    pub a_ag: S,
    pub b: S,
}

impl<S: Scalar> DimLatencyParams<S> {
    pub fn for_dim(dim: &NetworkDim<S>) -> Self {
        DimLatencyParams {
            a_rs: fixed_delay(dim, Phase::ReduceScatter),
            a_ag: fixed_delay(dim, Phase::AllGather),
            b: S::one() / dim.aggregate_bw(),
        }
    }
}

/// Fixed delay of one stage on `dim`: `number_of_steps * step_latency`.
pub fn fixed_delay<S: Scalar>(dim: &NetworkDim<S>, phase: Phase) -> S {
    let steps =
        num_steps(phase, dim.kind, dim.size).expect("dimension validated at topology construction");
    S::from_count(steps as usize) * dim.step_latency
}

/// Predicted byte-time of one stage: wire bytes over aggregate bandwidth.
/// Deliberately excludes the fixed delay; this is the increment the
/// scheduler's load tracker accumulates per chunk.
pub fn chunk_load<S: Scalar>(dim: &NetworkDim<S>, phase: Phase, bytes_before: S) -> S {
    bytes_sent_per_npu(phase, dim.size, bytes_before) / dim.aggregate_bw()
}

/// Executed duration of one stage when `share` stages occupy the dimension's
/// pipe concurrently: the byte term stretches by the share, the fixed delay
/// does not.
pub fn stage_duration<S: Scalar>(
    dim: &NetworkDim<S>,
    phase: Phase,
    bytes_before: S,
    share: usize,
) -> S {
    debug_assert!(share >= 1);
    fixed_delay(dim, phase) + chunk_load(dim, phase, bytes_before) * S::from_count(share)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::DimKind;

    fn dim(size: usize, kind: DimKind, bw: f64, latency: f64) -> NetworkDim<f64> {
        NetworkDim {
            index: 1,
            size,
            kind,
            bw_per_link: bw,
            links_per_npu: 1,
            step_latency: latency,
        }
    }

    #[test]
    fn fixed_delay_examples() {
        let ring = dim(4, DimKind::Ring, 1e9, 20e-9);
        assert_eq!(fixed_delay(&ring, Phase::ReduceScatter), 3.0 * 20e-9);
        let fc = dim(13, DimKind::FullyConnected, 1e9, 700e-9);
        assert_eq!(fixed_delay(&fc, Phase::AllGather), 700e-9);
        // 3 halving-doubling steps at 1700 ns
        let sw = dim(8, DimKind::Switch, 1e9, 1700e-9);
        assert_eq!(fixed_delay(&sw, Phase::ReduceScatter), 5100e-9);
    }

    #[test]
    fn chunk_load_is_wire_bytes_over_bandwidth() {
        let x = 4e9;
        let d = dim(4, DimKind::Ring, x, 0.0);
        // 64 MB reduce-scatter puts 48 MB on the wire.
        assert_eq!(chunk_load(&d, Phase::ReduceScatter, 64e6), 48e6 / x);
        // The 16 MB all-gather is the same wire volume.
        assert_eq!(chunk_load(&d, Phase::AllGather, 16e6), 48e6 / x);
        assert!(chunk_load(&d, Phase::ReduceScatter, 1e-12) < 1e-18);
    }

    #[test]
    fn rs_ag_duality_for_any_dim() {
        let d = dim(8, DimKind::Switch, 2.5e10, 1e-6);
        let s = 12.5e6;
        assert!(
            (chunk_load(&d, Phase::ReduceScatter, s) - chunk_load(&d, Phase::AllGather, s / 8.0))
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn share_scales_only_the_byte_term() {
        let d = dim(4, DimKind::Ring, 1e9, 1e-6);
        let one = stage_duration(&d, Phase::ReduceScatter, 8e6, 1);
        let two = stage_duration(&d, Phase::ReduceScatter, 8e6, 2);
        let fixed = fixed_delay(&d, Phase::ReduceScatter);
        let byte = chunk_load(&d, Phase::ReduceScatter, 8e6);
        assert_eq!(one, fixed + byte);
        assert_eq!(two, fixed + 2.0 * byte);

        let zero_lat = dim(4, DimKind::Ring, 1e9, 0.0);
        assert_eq!(
            stage_duration(&zero_lat, Phase::ReduceScatter, 8e6, 3),
            3.0 * chunk_load(&zero_lat, Phase::ReduceScatter, 8e6)
        );
    }

    #[test]
    fn monotone_in_share_and_bytes() {
        let d = dim(4, DimKind::Ring, 1e9, 1e-6);
        let mut prev = 0.0;
        for share in 1..5 {
            let t = stage_duration(&d, Phase::ReduceScatter, 8e6, share);
            assert!(t > prev);
            prev = t;
        }
        assert!(
            chunk_load(&d, Phase::ReduceScatter, 16e6) > chunk_load(&d, Phase::ReduceScatter, 8e6)
        );
    }
}
