//! Deterministic three-tier environment on a virtual clock.
//!
//! Ground truth is linear: a node spends `σ·multiplier·share` seconds on its
//! share of the model, a hop spends `ω + B/(β·multiplier)`. Multipliers come
//! from piecewise-constant traces keyed on virtual time. Every duration is
//! scaled by an independent lognormal factor drawn from one seeded stream in
//! the order edge compute, edge→fog transfer, fog compute, fog→cloud transfer,
//! cloud compute.

pub mod wire;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    InferenceSample, PerTier, Placement, Split, Tier, DEFAULT_EDGE_POWER,
};
use crate::link::RttTransport;
use crate::profile::ModelProfile;
use wire::LoopbackClient;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hop {
    #[serde(rename = "edge-fog")]
    EdgeFog,
    #[serde(rename = "fog-cloud")]
    FogCloud,
}

impl Hop {
    pub const ALL: [Hop; 2] = [Hop::EdgeFog, Hop::FogCloud];

    pub fn as_str(self) -> &'static str {
        match self {
            Hop::EdgeFog => "edge-fog",
            Hop::FogCloud => "fog-cloud",
        }
    }
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Hop {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Hop::ALL
            .into_iter()
            .find(|h| h.as_str() == s)
            .ok_or_else(|| Error::UnknownHop(s.to_string()))
    }
}

/// `(effective_from, multiplier)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent(pub f64, pub f64);

/// Piecewise-constant multiplier over virtual time; 1.0 before the first event.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace(Vec<TraceEvent>);

impl Trace {
    pub fn new(events: Vec<TraceEvent>) -> Result<Self> {
        let trace = Trace(events);
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, TraceEvent(at, m)) in self.0.iter().enumerate() {
            if !at.is_finite() {
                return Err(Error::config(format!("trace[{k}]"), "timestamp must be finite"));
            }
            if !(*m > 0.0 && m.is_finite()) {
                return Err(Error::config(format!("trace[{k}]"), "multiplier must be > 0"));
            }
            if k > 0 && !(self.0[k - 1].0 < *at) {
                return Err(Error::config(
                    format!("trace[{k}]"),
                    "timestamps must be strictly increasing",
                ));
            }
        }
        Ok(())
    }

    /// Multiplier in force at `t`; an event applies from its own timestamp on.
    pub fn multiplier_at(&self, t: f64) -> f64 {
        match self.0.partition_point(|e| e.0 <= t) {
            0 => 1.0,
            k => self.0[k - 1].1,
        }
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.0
    }

    pub fn push(&mut self, at: f64, multiplier: f64) -> Result<()> {
        self.0.push(TraceEvent(at, multiplier));
        if let Err(e) = self.validate() {
            self.0.pop();
            return Err(e);
        }
        Ok(())
    }

    fn next_after(&self, t: f64) -> Option<f64> {
        self.0.iter().map(|e| e.0).find(|&at| at > t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    /// Seconds for the whole model at multiplier 1.
    pub sigma: f64,
    /// Watts drawn while computing.
    pub power: f64,
    #[serde(default)]
    pub trace: Trace,
}

impl NodeSpec {
    pub fn new(sigma: f64, power: f64) -> Self {
        Self {
            sigma,
            power,
            trace: Trace::default(),
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(format!("{field}.sigma"), "must be > 0"));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::config(format!("{field}.power"), "must be > 0"));
        }
        self.trace
            .validate()
            .map_err(|e| prefix_field(e, &format!("{field}.")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopSpec {
    pub omega: f64,
    pub beta: f64,
    #[serde(default)]
    pub trace: Trace,
}

impl HopSpec {
    pub fn new(omega: f64, beta: f64) -> Self {
        Self {
            omega,
            beta,
            trace: Trace::default(),
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::config(format!("{field}.omega"), "must be >= 0"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config(format!("{field}.beta"), "must be > 0"));
        }
        self.trace
            .validate()
            .map_err(|e| prefix_field(e, &format!("{field}.")))
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::InvalidConfig { field, reason } => Error::InvalidConfig {
            field: format!("{prefix}{field}"),
            reason,
        },
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of the log of the multiplicative factor; 0 is exact.
    pub sigma: f64,
    pub seed: u64,
}

/// Anything the scheduler can run inferences and round trips against.
pub trait Environment {
    fn run_inference(&mut self, split: Split, profile: &ModelProfile) -> Result<InferenceSample>;
    fn rtt(&mut self, hop: Hop, payload: u64) -> Result<f64>;
}

/// Borrows an environment as the transport for one hop.
pub struct HopTransport<'a, E: Environment + ?Sized> {
    pub env: &'a mut E,
    pub hop: Hop,
}

impl<E: Environment + ?Sized> RttTransport for HopTransport<'_, E> {
    fn hop_id(&self) -> String {
        self.hop.to_string()
    }

    fn rtt(&mut self, payload: u64) -> Result<f64> {
        self.env.rtt(self.hop, payload)
    }
}

pub struct SimEnv {
    nodes: PerTier<NodeSpec>,
    hops: [HopSpec; 2],
    noise: NoiseSpec,
    lognormal: Option<LogNormal<f64>>,
    rng: ChaCha8Rng,
    now: f64,
    edge_power: f64,
    loopback: [Option<LoopbackClient>; 2],
}

impl fmt::Debug for SimEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimEnv")
            .field("nodes", &self.nodes)
            .field("hops", &self.hops)
            .field("noise", &self.noise)
            .field("now", &self.now)
            .finish_non_exhaustive()
    }
}

impl SimEnv {
    pub fn new(
        nodes: PerTier<NodeSpec>,
        edge_fog: HopSpec,
        fog_cloud: HopSpec,
        noise: NoiseSpec,
    ) -> Result<Self> {
        for tier in Tier::ALL {
            nodes[tier].validate(&format!("nodes.{tier}"))?;
        }
        edge_fog.validate("hops.edge_fog")?;
        fog_cloud.validate("hops.fog_cloud")?;
        if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
            return Err(Error::config("noise.sigma", "must be finite and >= 0"));
        }
        let lognormal = if noise.sigma > 0.0 {
            Some(LogNormal::new(0.0, noise.sigma).map_err(|e| Error::config("noise.sigma", e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            nodes,
            hops: [edge_fog, fog_cloud],
            noise,
            lognormal,
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
            now: 0.0,
            edge_power: DEFAULT_EDGE_POWER,
            loopback: [None, None],
        })
    }

    /// Current virtual time, seconds.
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn node(&self, tier: Tier) -> &NodeSpec {
        &self.nodes[tier]
    }

    pub fn hop(&self, hop: Hop) -> &HopSpec {
        &self.hops[hop as usize]
    }

    /// Throughput in force on `hop` at the current virtual time.
    pub fn current_beta(&self, hop: Hop) -> f64 {
        let spec = self.hop(hop);
        spec.beta * spec.trace.multiplier_at(self.now)
    }

    pub fn current_sigma(&self, tier: Tier) -> f64 {
        let spec = &self.nodes[tier];
        spec.sigma * spec.trace.multiplier_at(self.now)
    }

    /// Moves the clock forward to `t`; never backwards.
    pub fn advance_to(&mut self, t: f64) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Earliest trace event strictly after the current time, across all traces.
    pub fn next_event_time(&self) -> Option<f64> {
        Tier::ALL
            .iter()
            .filter_map(|&t| self.nodes[t].trace.next_after(self.now))
            .chain(self.hops.iter().filter_map(|h| h.trace.next_after(self.now)))
            .min_by(f64::total_cmp)
    }

    /// Jumps the clock to the next trace event, if any, and returns its time.
    pub fn advance_to_event(&mut self) -> Option<f64> {
        let t = self.next_event_time()?;
        self.advance_to(t);
        Some(t)
    }

    pub fn push_hop_event(&mut self, hop: Hop, at: f64, multiplier: f64) -> Result<()> {
        self.hops[hop as usize].trace.push(at, multiplier)
    }

    pub fn push_node_event(&mut self, tier: Tier, at: f64, multiplier: f64) -> Result<()> {
        self.nodes[tier].trace.push(at, multiplier)
    }

    /// Routes a hop's round trips and activation transfers over a real
    /// connection; durations become wall-clock measurements.
    pub fn attach_loopback(&mut self, hop: Hop, client: LoopbackClient) {
        self.loopback[hop as usize] = Some(client);
    }

    fn noise_factor(&mut self) -> f64 {
        match &self.lognormal {
            Some(d) => d.sample(&mut self.rng),
            None => 1.0,
        }
    }

    fn compute(&mut self, tier: Tier, share: f64, at: f64) -> f64 {
        let spec = &self.nodes[tier];
        let base = spec.sigma * spec.trace.multiplier_at(at) * share;
        base * self.noise_factor()
    }

    fn transfer(&mut self, hop: Hop, payload: u64, at: f64, stage: u8, layer: usize) -> Result<f64> {
        if let Some(client) = self.loopback[hop as usize].as_mut() {
            return client.send_activation(stage, layer as u32, payload);
        }
        let spec = self.hop(hop);
        let base = spec.omega + payload as f64 / (spec.beta * spec.trace.multiplier_at(at));
        Ok(base * self.noise_factor())
    }

    fn energy(&self, tier: Tier, duration: f64) -> f64 {
        match tier {
            Tier::Edge => self.edge_power * duration,
            _ => self.nodes[tier].power * duration,
        }
    }

    /// Runs the whole model on one tier; no transfers.
    pub fn run_single_device(&mut self, tier: Tier) -> InferenceSample {
        let start = self.now;
        let duration = self.compute(tier, 1.0, start);
        self.now = start + duration;
        let mut compute_time = PerTier::default();
        compute_time[tier] = duration;
        let mut energy = PerTier::default();
        energy[tier] = self.energy(tier, duration);
        InferenceSample {
            placement: Placement::Single(tier),
            compute_time,
            energy,
            transfer_edge_fog: 0.0,
            transfer_fog_cloud: 0.0,
            latency: duration,
            timestamp: start,
        }
    }

    pub fn rtt_named(&mut self, hop: &str, payload: u64) -> Result<f64> {
        let hop: Hop = hop.parse()?;
        self.rtt(hop, payload)
    }
}

impl Environment for SimEnv {
    fn run_inference(&mut self, split: Split, profile: &ModelProfile) -> Result<InferenceSample> {
        split.check(profile.n_features())?;
        let w = profile.compute_weights();
        let share_edge: f64 = w[..=split.last_edge].iter().sum();
        let share_fog: f64 = w[split.last_edge + 1..=split.last_fog].iter().sum();
        let share_cloud: f64 = w[split.last_fog + 1..].iter().sum();
        let bytes = profile.activation_bytes();

        let start = self.now;
        let mut t = start;
        let edge = self.compute(Tier::Edge, share_edge, t);
        t += edge;
        let hop1 = self.transfer(Hop::EdgeFog, bytes[split.last_edge], t, 1, split.last_edge)?;
        t += hop1;
        let fog = self.compute(Tier::Fog, share_fog, t);
        t += fog;
        let hop2 = self.transfer(Hop::FogCloud, bytes[split.last_fog], t, 2, split.last_fog)?;
        t += hop2;
        let cloud = self.compute(Tier::Cloud, share_cloud, t);
        t += cloud;
        self.now = t;

        let compute_time = PerTier::new(edge, fog, cloud);
        Ok(InferenceSample {
            placement: Placement::Split(split),
            compute_time,
            energy: PerTier::new(
                self.energy(Tier::Edge, edge),
                self.energy(Tier::Fog, fog),
                self.energy(Tier::Cloud, cloud),
            ),
            transfer_edge_fog: hop1,
            transfer_fog_cloud: hop2,
            latency: edge + hop1 + fog + hop2 + cloud,
            timestamp: start,
        })
    }

    fn rtt(&mut self, hop: Hop, payload: u64) -> Result<f64> {
        let d = if let Some(client) = self.loopback[hop as usize].as_mut() {
            client.probe(payload)?
        } else {
            let spec = self.hop(hop);
            let base =
                spec.omega + payload as f64 / (spec.beta * spec.trace.multiplier_at(self.now));
            base * self.noise_factor()
        };
        self.now += d;
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{probe_link, LinkModel, ProbeConfig};

    fn env(noise: f64, seed: u64) -> SimEnv {
        SimEnv::new(
            PerTier::new(
                NodeSpec::new(1.0, 5.0),
                NodeSpec::new(0.5, 15.0),
                NodeSpec::new(0.1, 30.0),
            ),
            HopSpec::new(0.005, 1e7),
            HopSpec::new(0.005, 1e7),
            NoiseSpec { sigma: noise, seed },
        )
        .unwrap()
    }

    fn example_profile() -> ModelProfile {
        ModelProfile::new("ex", vec![1_000_000, 100_000], vec![0.5, 0.3, 0.2]).unwrap()
    }

    #[test]
    fn noiseless_sample_matches_hand_computation() {
        let mut e = env(0.0, 1);
        let s = e.run_inference(Split::new(0, 1), &example_profile()).unwrap();
        assert!((s.latency - 0.79).abs() < 1e-12);
        assert!((s.energy.edge - 6.0).abs() < 1e-12);
        assert!((s.energy.fog - 2.25).abs() < 1e-12);
        assert!((s.energy.cloud - 0.6).abs() < 1e-12);
        assert_eq!(s.energy_total(), s.energy.edge + s.energy.fog + s.energy.cloud);
        assert!((e.now() - 0.79).abs() < 1e-12);
    }

    #[test]
    fn noiseless_repeats_differ_only_in_timestamp() {
        let mut e = env(0.0, 1);
        let p = example_profile();
        let a = e.run_inference(Split::new(0, 1), &p).unwrap();
        let b = e.run_inference(Split::new(0, 1), &p).unwrap();
        assert_eq!(InferenceSample { timestamp: 0.0, ..a }, InferenceSample { timestamp: 0.0, ..b });
        assert!(b.timestamp > a.timestamp);
    }

    #[test]
    fn seeded_noise_mean_is_close_to_noiseless() {
        let mut e = env(0.01, 42);
        let p = example_profile();
        let mean: f64 = (0..1000)
            .map(|_| e.run_inference(Split::new(0, 1), &p).unwrap().latency)
            .sum::<f64>()
            / 1000.0;
        assert!((mean - 0.79).abs() / 0.79 < 0.01, "{mean}");
    }

    #[test]
    fn same_seed_same_stream() {
        let p = example_profile();
        let run = |seed| {
            let mut e = env(0.05, seed);
            (0..50)
                .map(|_| e.run_inference(Split::new(0, 1), &p).unwrap().latency.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn rtt_is_affine_and_advances_clock() {
        let mut e = env(0.0, 1);
        assert!((e.rtt(Hop::EdgeFog, 1_000_000).unwrap() - 0.105).abs() < 1e-15);
        assert_eq!(e.rtt(Hop::FogCloud, 0).unwrap(), 0.005);
        assert!((e.now() - 0.110).abs() < 1e-12);
        assert!(matches!(e.rtt_named("edge-cloud", 10), Err(Error::UnknownHop(_))));
    }

    #[test]
    fn trace_boundary_is_inclusive() {
        let trace = Trace::new(vec![TraceEvent(0.0, 1.0), TraceEvent(10.0, 0.1)]).unwrap();
        assert_eq!(trace.multiplier_at(9.99), 1.0);
        assert_eq!(trace.multiplier_at(10.0), 0.1);
        assert_eq!(Trace::default().multiplier_at(1e9), 1.0);
        assert!(Trace::new(vec![TraceEvent(5.0, 1.0), TraceEvent(5.0, 2.0)]).is_err());
    }

    #[test]
    fn halved_throughput_halves_fitted_beta() {
        let mut e = env(0.0, 1);
        let cfg = ProbeConfig::default();
        let before = probe_link(
            &mut HopTransport { env: &mut e, hop: Hop::EdgeFog },
            &cfg,
            &LinkModel::unfitted(),
        )
        .unwrap();
        let at = e.now();
        e.push_hop_event(Hop::EdgeFog, at, 0.5).unwrap();
        let after = probe_link(
            &mut HopTransport { env: &mut e, hop: Hop::EdgeFog },
            &cfg,
            &before,
        )
        .unwrap();
        assert!((after.beta / before.beta - 0.5).abs() < 1e-9);
        assert!((before.beta - 1e7).abs() / 1e7 < 1e-9);
    }

    #[test]
    fn advance_to_event_walks_the_traces() {
        let mut e = env(0.0, 1);
        e.push_hop_event(Hop::FogCloud, 7.0, 0.5).unwrap();
        e.push_node_event(Tier::Fog, 5.0, 2.0).unwrap();
        assert_eq!(e.advance_to_event(), Some(5.0));
        assert_eq!(e.current_sigma(Tier::Fog), 1.0);
        assert_eq!(e.advance_to_event(), Some(7.0));
        assert_eq!(e.current_beta(Hop::FogCloud), 5e6);
        assert_eq!(e.advance_to_event(), None);
        e.advance_to(1.0);
        assert_eq!(e.now(), 7.0);
    }

    #[test]
    fn single_device_uses_whole_model() {
        let mut e = env(0.0, 1);
        let s = e.run_single_device(Tier::Edge);
        assert_eq!(s.latency, 1.0);
        assert_eq!(s.energy.edge, 12.0);
        let s = e.run_single_device(Tier::Cloud);
        assert_eq!(s.energy.cloud, 3.0);
    }

    #[test]
    fn loopback_backed_rtt_is_measured() {
        let server = wire::LoopbackServer::spawn().unwrap();
        let mut e = env(0.0, 1);
        e.attach_loopback(
            Hop::EdgeFog,
            LoopbackClient::connect("edge-fog", server.addr()).unwrap(),
        );
        let d = e.rtt(Hop::EdgeFog, 4096).unwrap();
        assert!(d > 0.0);
        assert_eq!(e.now(), d);
        let s = e.run_inference(Split::new(0, 1), &example_profile()).unwrap();
        assert!(s.transfer_edge_fog > 0.0);
    }
}
