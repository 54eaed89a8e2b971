//! Latency and energy prediction for a candidate split, and the rate fit that
//! feeds it.
//!
//! Node time is linear in the node's share of compute weight (`t = σ·w`),
//! node energy is linear in node time (`E = ρ·t`, with a fixed power for the
//! edge), and each hop costs `ω + B/β`. The whole pipeline is serial.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::LinkModel;
use crate::profile::ModelProfile;

/// Fixed edge power convention, watts.
pub const DEFAULT_EDGE_POWER: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Edge,
    Fog,
    Cloud,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Edge, Tier::Fog, Tier::Cloud];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Edge => "edge",
            Tier::Fog => "fog",
            Tier::Cloud => "cloud",
        }
    }

    pub fn parse(s: &str) -> Option<Tier> {
        Tier::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One value per tier.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerTier<T> {
    pub edge: T,
    pub fog: T,
    pub cloud: T,
}

impl<T> PerTier<T> {
    pub fn new(edge: T, fog: T, cloud: T) -> Self {
        Self { edge, fog, cloud }
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> PerTier<U> {
        PerTier {
            edge: f(self.edge),
            fog: f(self.fog),
            cloud: f(self.cloud),
        }
    }
}

impl PerTier<f64> {
    pub fn sum(&self) -> f64 {
        self.edge + self.fog + self.cloud
    }
}

impl<T> Index<Tier> for PerTier<T> {
    type Output = T;
    fn index(&self, tier: Tier) -> &T {
        match tier {
            Tier::Edge => &self.edge,
            Tier::Fog => &self.fog,
            Tier::Cloud => &self.cloud,
        }
    }
}

impl<T> IndexMut<Tier> for PerTier<T> {
    fn index_mut(&mut self, tier: Tier) -> &mut T {
        match tier {
            Tier::Edge => &mut self.edge,
            Tier::Fog => &mut self.fog,
            Tier::Cloud => &mut self.cloud,
        }
    }
}

/// Cut pair: feature layers `0..=last_edge` on the edge, `last_edge+1..=last_fog`
/// on the fog, the rest plus the head on the cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Split {
    pub last_edge: usize,
    pub last_fog: usize,
}

impl Split {
    pub const fn new(last_edge: usize, last_fog: usize) -> Self {
        Self {
            last_edge,
            last_fog,
        }
    }

    /// `min_edge_layers - 1 <= last_edge < last_fog < n_features`.
    pub fn is_valid(&self, n_features: usize, min_edge_layers: usize) -> bool {
        self.last_edge + 1 >= min_edge_layers.max(1)
            && self.last_edge < self.last_fog
            && self.last_fog < n_features
    }

    pub fn check(&self, n_features: usize) -> Result<()> {
        if self.is_valid(n_features, 1) {
            Ok(())
        } else {
            Err(Error::InvalidSplit {
                last_edge: self.last_edge,
                last_fog: self.last_fog,
                n_features,
            })
        }
    }

    /// Compute-weight shares per tier. The head always lands on the cloud.
    pub fn weight_shares(&self, profile: &ModelProfile) -> PerTier<f64> {
        let w = profile.compute_weights();
        PerTier {
            edge: w[..=self.last_edge].iter().sum(),
            fog: w[self.last_edge + 1..=self.last_fog].iter().sum(),
            cloud: w[self.last_fog + 1..].iter().sum(),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.last_edge, self.last_fog)
    }
}

/// Where a sample's work ran: a three-way split, or the whole model on one tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    Split(Split),
    Single(Tier),
}

impl Placement {
    pub fn weight_shares(&self, profile: &ModelProfile) -> PerTier<f64> {
        match self {
            Placement::Split(s) => s.weight_shares(profile),
            Placement::Single(tier) => {
                let mut shares = PerTier::default();
                shares[*tier] = 1.0;
                shares
            }
        }
    }

    pub fn split(&self) -> Option<Split> {
        match self {
            Placement::Split(s) => Some(*s),
            Placement::Single(_) => None,
        }
    }
}

/// Per-node execution rates (seconds per unit weight) and energy rates (watts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRates {
    pub sigma: PerTier<f64>,
    pub rho_fog: f64,
    pub rho_cloud: f64,
    pub p_edge: f64,
}

impl NodeRates {
    pub fn validate(&self) -> Result<()> {
        for tier in Tier::ALL {
            let s = self.sigma[tier];
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config(format!("sigma.{tier}"), format!("must be > 0, got {s}")));
            }
        }
        if !(self.rho_fog >= 0.0 && self.rho_cloud >= 0.0) {
            return Err(Error::config("rho", "energy rates must be >= 0"));
        }
        if !(self.p_edge > 0.0) {
            return Err(Error::config("p_edge", "must be > 0"));
        }
        Ok(())
    }
}

/// Both hops of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Links {
    pub edge_fog: LinkModel,
    pub fog_cloud: LinkModel,
}

impl Links {
    pub fn unfitted() -> Self {
        Self {
            edge_fog: LinkModel::unfitted(),
            fog_cloud: LinkModel::unfitted(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitEstimate {
    pub latency: f64,
    pub energy: PerTier<f64>,
    pub energy_total: f64,
    pub compute_time: PerTier<f64>,
    pub transfer_edge_fog: f64,
    pub transfer_fog_cloud: f64,
}

impl SplitEstimate {
    pub fn energy_edge(&self) -> f64 {
        self.energy.edge
    }
}

/// One inference, as measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InferenceSample {
    pub placement: Placement,
    pub compute_time: PerTier<f64>,
    pub energy: PerTier<f64>,
    pub transfer_edge_fog: f64,
    pub transfer_fog_cloud: f64,
    pub latency: f64,
    /// Virtual start time.
    pub timestamp: f64,
}

impl InferenceSample {
    pub fn energy_total(&self) -> f64 {
        self.energy.sum()
    }
}

pub fn estimate_split(
    split: Split,
    profile: &ModelProfile,
    rates: &NodeRates,
    links: &Links,
) -> Result<SplitEstimate> {
    split.check(profile.n_features())?;
    let shares = split.weight_shares(profile);
    let compute_time = PerTier {
        edge: rates.sigma.edge * shares.edge,
        fog: rates.sigma.fog * shares.fog,
        cloud: rates.sigma.cloud * shares.cloud,
    };
    let bytes = profile.activation_bytes();
    let transfer_edge_fog = links.edge_fog.transfer_time(bytes[split.last_edge]);
    let transfer_fog_cloud = links.fog_cloud.transfer_time(bytes[split.last_fog]);
    let latency = compute_time.edge
        + compute_time.fog
        + compute_time.cloud
        + transfer_edge_fog
        + transfer_fog_cloud;
    let energy = PerTier {
        edge: rates.p_edge * compute_time.edge,
        fog: rates.rho_fog * compute_time.fog,
        cloud: rates.rho_cloud * compute_time.cloud,
    };
    Ok(SplitEstimate {
        latency,
        energy,
        energy_total: energy.sum(),
        compute_time,
        transfer_edge_fog,
        transfer_fog_cloud,
    })
}

/// Fits node rates from measured samples.
///
/// `σ` is the least-squares slope through the origin of compute time against
/// weight share; `ρ` (fog, cloud) is total measured energy over total compute
/// time. The edge power is a convention and is passed through unchanged.
pub fn fit_rates(
    samples: &[InferenceSample],
    profile: &ModelProfile,
    edge_power: f64,
) -> Result<NodeRates> {
    let mut tw = PerTier::<f64>::default();
    let mut ww = PerTier::<f64>::default();
    let mut energy = PerTier::<f64>::default();
    let mut time = PerTier::<f64>::default();
    for sample in samples {
        let shares = sample.placement.weight_shares(profile);
        for tier in Tier::ALL {
            let t = sample.compute_time[tier];
            tw[tier] += t * shares[tier];
            ww[tier] += shares[tier] * shares[tier];
            if t > 0.0 {
                energy[tier] += sample.energy[tier];
                time[tier] += t;
            }
        }
    }
    let mut sigma = PerTier::<f64>::default();
    for tier in Tier::ALL {
        if !(ww[tier] > 0.0) || !(tw[tier] > 0.0) {
            return Err(Error::RateFitCoverage(tier));
        }
        sigma[tier] = tw[tier] / ww[tier];
    }
    for tier in [Tier::Fog, Tier::Cloud] {
        if !(time[tier] > 0.0) {
            return Err(Error::RateFitCoverage(tier));
        }
    }
    Ok(NodeRates {
        sigma,
        rho_fog: energy.fog / time.fog,
        rho_cloud: energy.cloud / time.cloud,
        p_edge: edge_power,
    })
}
