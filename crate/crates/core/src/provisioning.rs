//! Bandwidth-provisioning analysis between dimension pairs.
//!
//! For dimensions k < l the baseline pipeline is stage-balanced exactly when
//! `BW(dimK) = P_k * P_{k+1} * ... * P_{l-1} * BW(dimL)`. Less dimK
//! bandwidth than that means dimL has spare capacity only a dynamic schedule
//! can drive (over-provisioned dimL); more means no schedule at all can keep
//! both dimensions saturated (under-provisioned dimL). Classification uses
//! aggregate per-NPU bandwidth, consistent with the latency model.

use std::fmt::Write as _;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::topology::{Topology, TopologyError};

#[derive(Debug, Error)]
pub enum ProvisioningError {
    #[error("dimension pair must satisfy 1 <= k < l <= D, got k={k}, l={l}")]
    BadPair { k: usize, l: usize },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    JustEnough,
    OverProvisioned,
    UnderProvisioned,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::JustEnough => "just_enough",
            Scenario::OverProvisioned => "over_provisioned",
            Scenario::UnderProvisioned => "under_provisioned",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verdict for one dimension pair: `ratio = BW(dimK) / (prod P_i * BW(dimL))`
/// over `k <= i < l`. Ratio 1 within tolerance is just-enough, below is
/// over-provisioned, above is under-provisioned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProvisioningVerdict<S> {
    pub k: usize,
    pub l: usize,
    pub scenario: Scenario,
    pub ratio: S,
}

/// Default relative tolerance: real configs rarely hit exact equality.
pub fn default_tolerance<S: Scalar>() -> S {
    S::from_config(0.01)
}

pub fn classify<S: Scalar>(
    topology: &Topology<S>,
    k: usize,
    l: usize,
    tolerance: S,
) -> Result<ProvisioningVerdict<S>, ProvisioningError> {
    if k >= l {
        return Err(ProvisioningError::BadPair { k, l });
    }
    let bw_k = topology.dim(k)?.aggregate_bw();
    let bw_l = topology.dim(l)?.aggregate_bw();
    let shrink: usize = topology.dims()[k - 1..l - 1]
        .iter()
        .map(|d| d.size)
        .product();
    let ratio = bw_k / (S::from_count(shrink) * bw_l);
    let one = S::one();
    let scenario = if (ratio - one).abs() <= tolerance {
        Scenario::JustEnough
    } else if ratio < one {
        Scenario::OverProvisioned
    } else {
        Scenario::UnderProvisioned
    };
    Ok(ProvisioningVerdict {
        k,
        l,
        scenario,
        ratio,
    })
}

/// Balanced aggregate bandwidth for every dimension given dim1's: the
/// distribution at which baseline scheduling alone keeps all stages equal.
pub fn recommend<S: Scalar>(topology: &Topology<S>) -> Vec<S> {
    (1..=topology.num_dims())
        .map(|k| topology.required_balanced_bw(k).expect("k in range"))
        .collect()
}

/// One verdict row per dimension pair, CSV.
pub fn export_provisioning_csv<S: Scalar>(
    topology: &Topology<S>,
    tolerance: S,
) -> Result<String, ProvisioningError> {
    let mut out = String::from("k,l,ratio,scenario\n");
    let d = topology.num_dims();
    for k in 1..d {
        for l in (k + 1)..=d {
            let v = classify(topology, k, l, tolerance)?;
            writeln!(out, "{},{},{},{}", v.k, v.l, v.ratio, v.scenario).unwrap();
        }
    }
    Ok(out)
}
