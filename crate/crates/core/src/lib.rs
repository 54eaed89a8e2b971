//! Adaptive three-tier split selection for layered DNN inference.
//!
//! A model is cut at two feature layers `(i, j)`: the edge runs `0..=i`, the
//! fog `i+1..=j` and the cloud the rest plus the classifier head. The crate
//! profiles models into weight tables, probes links, estimates latency and
//! energy per split, searches for the best split under a weighted objective
//! and re-decides periodically at run time. A seeded simulator stands in for
//! the three nodes, and a harness runs scenarios and writes reports.

pub mod error;
pub mod estimator;
pub mod fixtures;
pub mod harness;
pub mod link;
pub mod profile;
pub mod scheduler;
pub mod search;
pub mod simenv;

pub use error::{Error, Result};
pub use estimator::{
    estimate_split, fit_rates, InferenceSample, Links, NodeRates, PerTier, Placement, Split,
    SplitEstimate, Tier,
};
pub use link::{fit_link_model, predict_transfer_time, probe_link, LinkModel, ProbeConfig};
pub use profile::{preset_profile, profile_model, ModelDescriptor, ModelProfile};
pub use scheduler::{decide_switch, probe_splits, Decision, SchedulerConfig};
pub use search::{enumerate_candidates, find_best, score, ObjectiveSpec, ObjectiveWeights};
pub use simenv::{Environment, Hop, HopSpec, NodeSpec, NoiseSpec, SimEnv};
