//! Reference scenarios built from published single-device, static and
//! adaptive measurements of three CNNs.
//!
//! Node rates are the single-device latencies (a node's σ is its whole-model
//! time), fog and cloud powers are single-device energy over latency, and the
//! edge uses the fixed 12 W convention. Link parameters were never published;
//! each scenario solves for a throughput that makes the noiseless static
//! pipeline hit the reported static latency. See `fixtures/derive.py`.

use crate::error::{Error, Result};
use crate::estimator::{PerTier, Tier};
use crate::harness::experiment::{ExperimentOutcome, Strategy};
use crate::harness::scenario::{load_scenario, ScenarioConfig};

pub const MODELS: [&str; 3] = ["vgg16", "alexnet", "mobilenetv2"];

/// Latency in milliseconds and energy in joules, per inference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub latency_ms: f64,
    pub energy_j: f64,
}

const fn m(latency_ms: f64, energy_j: f64) -> Measurement {
    Measurement {
        latency_ms,
        energy_j,
    }
}

/// Per-node energies plus pipeline latency for a partitioned run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionedMeasurement {
    pub latency_ms: f64,
    pub energy_j: PerTier<f64>,
    pub total_energy_j: f64,
}

const fn pm(latency_ms: f64, edge: f64, fog: f64, cloud: f64, total: f64) -> PartitionedMeasurement {
    PartitionedMeasurement {
        latency_ms,
        energy_j: PerTier { edge, fog, cloud },
        total_energy_j: total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelReference {
    pub model: &'static str,
    pub single_device: PerTier<Measurement>,
    pub static_split: (usize, usize),
    pub static_run: PartitionedMeasurement,
    pub adaptive_run: PartitionedMeasurement,
    /// Published reductions in percent: (latency, energy).
    pub reductions_pct: (f64, f64),
}

pub const REFERENCES: [ModelReference; 3] = [
    ModelReference {
        model: "vgg16",
        single_device: PerTier {
            edge: m(666.870, 8.002),
            fog: m(169.908, 2.549),
            cloud: m(1.164, 0.037),
        },
        static_split: (10, 30),
        static_run: pm(525.142, 2.297, 2.491, 0.905, 5.693),
        adaptive_run: pm(491.855, 1.489, 1.235, 0.930, 3.654),
        reductions_pct: (6.34, 35.82),
    },
    ModelReference {
        model: "alexnet",
        single_device: PerTier {
            edge: m(132.400, 1.589),
            fog: m(20.988, 0.315),
            cloud: m(0.830, 0.024),
        },
        static_split: (9, 13),
        static_run: pm(78.148, 0.237, 0.082, 0.356, 0.675),
        adaptive_run: pm(60.233, 0.078, 0.097, 0.259, 0.434),
        reductions_pct: (22.92, 35.70),
    },
    ModelReference {
        model: "mobilenetv2",
        single_device: PerTier {
            edge: m(71.900, 0.863),
            fog: m(15.954, 0.239),
            cloud: m(4.175, 0.092),
        },
        static_split: (9, 18),
        static_run: pm(98.457, 0.624, 0.268, 0.027, 0.919),
        adaptive_run: pm(84.479, 0.494, 0.078, 0.099, 0.670),
        reductions_pct: (14.20, 27.09),
    },
];

pub fn reference(model: &str) -> Result<&'static ModelReference> {
    REFERENCES
        .iter()
        .find(|r| r.model == model)
        .ok_or_else(|| unknown(model))
}

fn unknown(model: &str) -> Error {
    Error::UnknownFixture {
        name: model.to_string(),
        known: MODELS.join(", "),
    }
}

/// Allowed relative gap between a simulated single-device energy and the
/// published one, which is rounded to three decimals.
pub const SINGLE_DEVICE_ENERGY_TOLERANCE: f64 = 1e-3;
/// Adaptive latency may exceed static latency by at most this fraction.
pub const LATENCY_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedDirection {
    /// Each single-device run matches the published latency and energy.
    /// Only applies to noiseless outcomes.
    SingleDeviceMatchesReference,
    /// Adaptive total energy strictly below static.
    AdaptiveEnergyBelowStatic,
    /// Adaptive latency no more than `LATENCY_SLACK` above static.
    AdaptiveLatencyWithinSlack,
}

impl ExpectedDirection {
    pub const ALL: [ExpectedDirection; 3] = [
        ExpectedDirection::SingleDeviceMatchesReference,
        ExpectedDirection::AdaptiveEnergyBelowStatic,
        ExpectedDirection::AdaptiveLatencyWithinSlack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExpectedDirection::SingleDeviceMatchesReference => "single-device-matches-reference",
            ExpectedDirection::AdaptiveEnergyBelowStatic => "adaptive-energy-below-static",
            ExpectedDirection::AdaptiveLatencyWithinSlack => "adaptive-latency-within-slack",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub check: ExpectedDirection,
    /// `None` when the outcome lacks the strategies the check needs.
    pub passed: Option<bool>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioFixture {
    pub model: &'static str,
    pub reference: &'static ModelReference,
    pub config: ScenarioConfig,
    pub checks: Vec<ExpectedDirection>,
}

impl ScenarioFixture {
    /// Evaluates every expected direction against an experiment outcome.
    pub fn evaluate(&self, outcome: &ExperimentOutcome) -> Vec<CheckOutcome> {
        self.checks
            .iter()
            .map(|&check| evaluate_check(self.reference, check, outcome))
            .collect()
    }
}

fn evaluate_check(
    reference: &ModelReference,
    check: ExpectedDirection,
    outcome: &ExperimentOutcome,
) -> CheckOutcome {
    let pair = || {
        Some((
            outcome.summary(Strategy::Static)?.mean,
            outcome.summary(Strategy::Adaptive)?.mean,
        ))
    };
    let (passed, detail) = match check {
        ExpectedDirection::SingleDeviceMatchesReference if outcome.noise_sigma > 0.0 => {
            (None, "not applicable under noise".into())
        }
        ExpectedDirection::SingleDeviceMatchesReference => {
            let mut all = Some(true);
            let mut detail = Vec::new();
            for tier in Tier::ALL {
                let Some(s) = outcome.summary(Strategy::SingleDevice(tier)) else {
                    all = None;
                    continue;
                };
                let want = reference.single_device[tier];
                let lat_ok = (s.mean.latency * 1e3 - want.latency_ms).abs()
                    <= 1e-9 * want.latency_ms;
                let e_gap = (s.mean.energy_total - want.energy_j).abs() / want.energy_j;
                let ok = lat_ok && e_gap <= SINGLE_DEVICE_ENERGY_TOLERANCE;
                all = all.map(|a| a && ok);
                detail.push(format!(
                    "{tier}: {:.3} ms / {:.4} J",
                    s.mean.latency * 1e3,
                    s.mean.energy_total
                ));
            }
            (all, detail.join("; "))
        }
        ExpectedDirection::AdaptiveEnergyBelowStatic => match pair() {
            Some((st, ad)) => (
                Some(ad.energy_total < st.energy_total),
                format!("static {:.4} J, adaptive {:.4} J", st.energy_total, ad.energy_total),
            ),
            None => (None, "needs static and adaptive runs".into()),
        },
        ExpectedDirection::AdaptiveLatencyWithinSlack => match pair() {
            Some((st, ad)) => (
                Some(ad.latency <= (1.0 + LATENCY_SLACK) * st.latency),
                format!(
                    "static {:.3} ms, adaptive {:.3} ms",
                    st.latency * 1e3,
                    ad.latency * 1e3
                ),
            ),
            None => (None, "needs static and adaptive runs".into()),
        },
    };
    CheckOutcome {
        check,
        passed,
        detail,
    }
}

/// Raw scenario document shipped for `model`.
pub fn scenario_document(model: &str) -> Result<&'static str> {
    match model {
        "vgg16" => Ok(include_str!("../scenarios/vgg16.json")),
        "alexnet" => Ok(include_str!("../scenarios/alexnet.json")),
        "mobilenetv2" => Ok(include_str!("../scenarios/mobilenetv2.json")),
        other => Err(unknown(other)),
    }
}

pub fn paper_scenario(model: &str) -> Result<ScenarioFixture> {
    let reference = reference(model)?;
    let config = load_scenario(scenario_document(model)?, None)?;
    Ok(ScenarioFixture {
        model: reference.model,
        reference,
        config,
        checks: ExpectedDirection::ALL.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vgg16_rates_come_from_single_device_latency() {
        let f = paper_scenario("vgg16").unwrap();
        let nodes = &f.config.nodes;
        assert_eq!(nodes.edge.sigma, 0.66687);
        assert_eq!(nodes.fog.sigma, 0.169908);
        assert_eq!(nodes.cloud.sigma, 0.001164);
        assert_eq!(nodes.edge.power, 12.0);
        assert!((nodes.fog.power - 2.549 / 0.169908).abs() < 1e-12);
        assert!((nodes.cloud.power - 0.037 / 0.001164).abs() < 1e-12);
        assert_eq!(f.config.scheduler.initial_split.last_edge, 10);
        assert_eq!(f.config.scheduler.initial_split.last_fog, 30);
        assert_eq!(f.config.profile.n_features(), 31);
    }

    #[test]
    fn alexnet_cloud_power_is_energy_over_latency() {
        let f = paper_scenario("alexnet").unwrap();
        assert_eq!(f.config.nodes.cloud.sigma, 0.00083);
        let p = f.config.nodes.cloud.power;
        assert!((p - 0.024 / 0.00083).abs() < 1e-12);
        assert!((p - 28.9).abs() < 0.05);
    }

    #[test]
    fn fixtures_match_reference_split_and_size() {
        for (model, n) in [("vgg16", 31), ("alexnet", 14), ("mobilenetv2", 19)] {
            let f = paper_scenario(model).unwrap();
            let c0 = f.config.scheduler.initial_split;
            assert_eq!((c0.last_edge, c0.last_fog), f.reference.static_split);
            assert_eq!(f.config.profile.n_features(), n);
        }
    }

    #[test]
    fn unknown_model_is_rejected() {
        assert!(matches!(
            paper_scenario("resnet50"),
            Err(Error::UnknownFixture { .. })
        ));
    }

    #[test]
    fn reference_totals_are_consistent() {
        for r in &REFERENCES {
            for run in [r.static_run, r.adaptive_run] {
                assert!((run.energy_j.sum() - run.total_energy_j).abs() < 1.5e-3, "{}", r.model);
            }
        }
    }
}
