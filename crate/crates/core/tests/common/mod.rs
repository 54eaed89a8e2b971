#![allow(dead_code)]

use edgesplit::estimator::{Links, NodeRates, PerTier, Split};
use edgesplit::link::LinkModel;
use edgesplit::profile::ModelProfile;
use edgesplit::simenv::{HopSpec, NodeSpec, NoiseSpec, SimEnv};
use rand::Rng;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) || a == b
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Profile with `n` feature layers, positive weights and activations up to 4 MiB.
pub fn random_profile<R: Rng>(rng: &mut R, n: usize) -> ModelProfile {
    let raw: Vec<f64> = (0..=n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let bytes = (0..n).map(|_| rng.random_range(1..=4 * 1024 * 1024)).collect();
    ModelProfile::new(format!("random-{n}"), bytes, weights).unwrap()
}

pub fn random_nodes<R: Rng>(rng: &mut R) -> PerTier<NodeSpec> {
    PerTier::new(
        NodeSpec::new(rng.random_range(0.05..1.0), 12.0),
        NodeSpec::new(rng.random_range(0.01..0.3), rng.random_range(5.0..30.0)),
        NodeSpec::new(rng.random_range(0.001..0.05), rng.random_range(10.0..60.0)),
    )
}

pub fn random_hop<R: Rng>(rng: &mut R) -> HopSpec {
    HopSpec::new(rng.random_range(1e-4..1e-2), rng.random_range(1e6..1e8))
}

pub fn random_env<R: Rng>(rng: &mut R, noise: f64, seed: u64) -> SimEnv {
    let nodes = random_nodes(rng);
    let ef = random_hop(rng);
    let fc = random_hop(rng);
    SimEnv::new(nodes, ef, fc, NoiseSpec { sigma: noise, seed }).unwrap()
}

pub fn random_rates<R: Rng>(rng: &mut R) -> NodeRates {
    NodeRates {
        sigma: PerTier::new(
            rng.random_range(0.05..1.0),
            rng.random_range(0.01..0.3),
            rng.random_range(0.001..0.05),
        ),
        rho_fog: rng.random_range(5.0..30.0),
        rho_cloud: rng.random_range(10.0..60.0),
        p_edge: 12.0,
    }
}

pub fn random_links<R: Rng>(rng: &mut R) -> Links {
    Links {
        edge_fog: LinkModel::new(rng.random_range(1e-4..1e-2), rng.random_range(1e6..1e8)).unwrap(),
        fog_cloud: LinkModel::new(rng.random_range(1e-4..1e-2), rng.random_range(1e6..1e8)).unwrap(),
    }
}

/// Every valid split with at least `m` edge layers, lexicographic.
pub fn all_splits(n: usize, m: usize) -> Vec<Split> {
    let lo = m.max(1) - 1;
    let mut out = Vec::new();
    for i in lo..n.saturating_sub(1) {
        for j in i + 1..n {
            out.push(Split::new(i, j));
        }
    }
    out
}
