//! Runs the strategies a scenario asks for, repetition by repetition, and
//! averages the results.

use serde::Serialize;

use crate::error::Result;
use crate::estimator::{InferenceSample, Split, Tier};
use crate::harness::scenario::{Mode, ScenarioConfig};
use crate::scheduler::{self, SampleMeans, WindowReport};
use crate::simenv::{Environment, SimEnv};

/// Offset separating the adaptive strategy's noise streams from the static one's.
pub const ADAPTIVE_SEED_OFFSET: u64 = 1_000_000;
/// Offset for single-device streams.
pub const SINGLE_DEVICE_SEED_OFFSET: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    SingleDevice(Tier),
    Static,
    Adaptive,
}

impl Strategy {
    pub fn label(self) -> String {
        match self {
            Strategy::SingleDevice(t) => format!("single-device:{t}"),
            Strategy::Static => "static".into(),
            Strategy::Adaptive => "adaptive".into(),
        }
    }

    pub fn seed(self, base: u64, repetition: usize) -> u64 {
        let offset = match self {
            Strategy::Static => 0,
            Strategy::Adaptive => ADAPTIVE_SEED_OFFSET,
            Strategy::SingleDevice(t) => SINGLE_DEVICE_SEED_OFFSET + 1_000 * t as u64,
        };
        base.wrapping_add(offset).wrapping_add(repetition as u64)
    }
}

/// Arithmetic mean over repetitions of each repetition's per-inference means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    /// Fixed split, when the strategy has one.
    pub split: Option<Split>,
    pub repetitions: Vec<SampleMeans>,
    pub mean: SampleMeans,
}

impl StrategySummary {
    fn from_repetitions(strategy: Strategy, split: Option<Split>, reps: Vec<SampleMeans>) -> Self {
        let n = reps.len() as f64;
        let mut mean = SampleMeans::default();
        for r in &reps {
            mean.count += r.count;
            mean.latency += r.latency / n;
            mean.energy.edge += r.energy.edge / n;
            mean.energy.fog += r.energy.fog / n;
            mean.energy.cloud += r.energy.cloud / n;
        }
        mean.energy_total = mean.energy.sum();
        Self {
            strategy,
            split,
            repetitions: reps,
            mean,
        }
    }
}

/// Static-versus-adaptive reductions, computed from the two strategies' means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub static_latency: f64,
    pub static_energy: f64,
    pub adaptive_latency: f64,
    pub adaptive_energy: f64,
    /// Fractions, `(static - adaptive) / static`.
    pub latency_reduction: f64,
    pub energy_reduction: f64,
}

impl ComparisonReport {
    pub fn new(
        static_latency: f64,
        static_energy: f64,
        adaptive_latency: f64,
        adaptive_energy: f64,
    ) -> Self {
        Self {
            static_latency,
            static_energy,
            adaptive_latency,
            adaptive_energy,
            latency_reduction: (static_latency - adaptive_latency) / static_latency,
            energy_reduction: (static_energy - adaptive_energy) / static_energy,
        }
    }

    pub fn from_means(static_means: &SampleMeans, adaptive_means: &SampleMeans) -> Self {
        Self::new(
            static_means.latency,
            static_means.energy_total,
            adaptive_means.latency,
            adaptive_means.energy_total,
        )
    }

    pub fn latency_reduction_pct(&self) -> f64 {
        100.0 * self.latency_reduction
    }

    pub fn energy_reduction_pct(&self) -> f64 {
        100.0 * self.energy_reduction
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub scenario: String,
    pub profile_name: String,
    pub n_features: usize,
    pub mode: Mode,
    pub budget: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub summaries: Vec<StrategySummary>,
    /// Steady-state windows of the first adaptive repetition.
    pub windows: Vec<WindowReport>,
    pub comparison: Option<ComparisonReport>,
}

impl ExperimentOutcome {
    pub fn summary(&self, strategy: Strategy) -> Option<&StrategySummary> {
        self.summaries.iter().find(|s| s.strategy == strategy)
    }
}

fn environment(config: &ScenarioConfig, seed: u64) -> Result<SimEnv> {
    SimEnv::new(
        config.nodes.clone(),
        config.edge_fog.clone(),
        config.fog_cloud.clone(),
        config.noise(seed),
    )
}

fn run_fixed(
    config: &ScenarioConfig,
    env: &mut SimEnv,
    strategy: Strategy,
) -> Result<SampleMeans> {
    let warmup = config.scheduler.warmup;
    let mut kept: Vec<InferenceSample> = Vec::with_capacity(config.experiment.budget);
    for r in 1..=config.experiment.budget {
        let sample = match strategy {
            Strategy::SingleDevice(tier) => env.run_single_device(tier),
            _ => env.run_inference(config.scheduler.initial_split, &config.profile)?,
        };
        if r > warmup {
            kept.push(sample);
        }
    }
    Ok(SampleMeans::of(&kept))
}

/// Runs every strategy the mode calls for. Repetition `k` of a strategy uses
/// seed `base + strategy offset + k`.
pub fn run_experiment(config: &ScenarioConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let exp = config.experiment;
    let strategies: Vec<Strategy> = match exp.mode {
        Mode::SingleDevice(t) => vec![Strategy::SingleDevice(t)],
        Mode::Static => vec![Strategy::Static],
        Mode::Adaptive => vec![Strategy::Adaptive],
        Mode::Compare => Tier::ALL
            .iter()
            .map(|&t| Strategy::SingleDevice(t))
            .chain([Strategy::Static, Strategy::Adaptive])
            .collect(),
    };

    let mut summaries = Vec::with_capacity(strategies.len());
    let mut windows = Vec::new();
    for strategy in strategies {
        let mut reps = Vec::with_capacity(exp.repetitions);
        for k in 0..exp.repetitions {
            let mut env = environment(config, strategy.seed(exp.seed, k))?;
            let means = match strategy {
                Strategy::Adaptive => {
                    let report = scheduler::run(&config.scheduler, &config.profile, &mut env)?;
                    if k == 0 {
                        windows = report.state.windows.clone();
                    }
                    report.steady_means
                }
                _ => run_fixed(config, &mut env, strategy)?,
            };
            reps.push(means);
        }
        let split = (strategy == Strategy::Static).then_some(config.scheduler.initial_split);
        summaries.push(StrategySummary::from_repetitions(strategy, split, reps));
    }

    let comparison = match (
        summaries.iter().find(|s| s.strategy == Strategy::Static),
        summaries.iter().find(|s| s.strategy == Strategy::Adaptive),
    ) {
        (Some(st), Some(ad)) => Some(ComparisonReport::from_means(&st.mean, &ad.mean)),
        _ => None,
    };

    Ok(ExperimentOutcome {
        scenario: config.name.clone(),
        profile_name: config.profile.name().to_string(),
        n_features: config.profile.n_features(),
        mode: exp.mode,
        budget: exp.budget,
        seed: exp.seed,
        noise_sigma: config.noise_sigma,
        summaries,
        windows,
        comparison,
    })
}
