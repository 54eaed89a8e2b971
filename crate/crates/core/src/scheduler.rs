//! Two-phase adaptive scheduling loop.
//!
//! Phase 1 measures a baseline at the static split, runs three probe splits to
//! spread the weight shares, fits node rates, probes both hops and picks a
//! starting split. Phase 2 runs fixed-size windows at the current split and,
//! after each, refits, re-probes and re-searches before deciding whether to
//! switch. The baseline score and the normalization anchors are frozen at the
//! end of phase 1.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    estimate_split, fit_rates, InferenceSample, Links, NodeRates, PerTier, Split,
    DEFAULT_EDGE_POWER,
};
use crate::link::{probe_link, ProbeConfig};
use crate::profile::ModelProfile;
use crate::search::{find_best, score, Anchors, ObjectiveSpec, ObjectiveWeights};
use crate::simenv::{Environment, Hop, HopTransport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub initial_split: Split,
    pub weights: ObjectiveWeights,
    /// Seconds; 0 disables the deadline.
    pub deadline: f64,
    pub r_profile: usize,
    pub r_probe: usize,
    pub r_steady: usize,
    pub warmup: usize,
    pub switch_threshold: f64,
    pub min_edge_layers: usize,
    pub total_budget: usize,
    pub probe: ProbeConfig,
    pub edge_power: f64,
}

impl SchedulerConfig {
    pub fn new(initial_split: Split) -> Self {
        Self {
            initial_split,
            weights: ObjectiveWeights::default(),
            deadline: 0.0,
            r_profile: 50,
            r_probe: 15,
            r_steady: 100,
            warmup: 5,
            switch_threshold: 0.03,
            min_edge_layers: 1,
            total_budget: 500,
            probe: ProbeConfig::default(),
            edge_power: DEFAULT_EDGE_POWER,
        }
    }

    /// Smallest budget that covers phase 1 and one steady window.
    pub fn minimum_budget(&self) -> usize {
        self.r_profile + 3 * self.r_probe + self.r_steady
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        let c0 = self.initial_split;
        if !c0.is_valid(n_features, self.min_edge_layers) {
            return Err(Error::config(
                "scheduler.initial_split",
                format!(
                    "{c0} is not a valid split: need {} <= i < j < {n_features}",
                    self.min_edge_layers.max(1) - 1
                ),
            ));
        }
        self.weights.validate().map_err(|e| match e {
            Error::InvalidConfig { field, reason } => {
                Error::config(format!("scheduler.{field}"), reason)
            }
            other => other,
        })?;
        if !(self.deadline >= 0.0 && self.deadline.is_finite()) {
            return Err(Error::config("scheduler.deadline_s", "must be finite and >= 0"));
        }
        for (name, r) in [
            ("r_profile", self.r_profile),
            ("r_probe", self.r_probe),
            ("r_steady", self.r_steady),
        ] {
            if r <= self.warmup {
                return Err(Error::config(
                    format!("scheduler.{name}"),
                    format!("must exceed warmup ({}), got {r}", self.warmup),
                ));
            }
        }
        if !(self.switch_threshold >= 0.0 && self.switch_threshold.is_finite()) {
            return Err(Error::config("scheduler.switch_threshold", "must be >= 0"));
        }
        if self.min_edge_layers < 1 {
            return Err(Error::config("scheduler.min_edge_layers", "must be >= 1"));
        }
        if !(self.edge_power > 0.0) {
            return Err(Error::config("scheduler.edge_power_w", "must be > 0"));
        }
        self.probe.validate().map_err(|e| match e {
            Error::InvalidConfig { field, reason } => {
                Error::config(format!("scheduler.{field}"), reason)
            }
            other => other,
        })?;
        if self.total_budget == 0 {
            return Err(Error::config("experiment.budget", "must be > 0"));
        }
        Ok(())
    }
}

/// Per-inference means over a batch of samples.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SampleMeans {
    pub count: usize,
    pub latency: f64,
    pub energy: PerTier<f64>,
    /// Always `energy.sum()`.
    pub energy_total: f64,
}

impl SampleMeans {
    pub fn of<'a>(samples: impl IntoIterator<Item = &'a InferenceSample>) -> Self {
        let mut count = 0usize;
        let mut latency = 0.0;
        let mut energy = PerTier::<f64>::default();
        for s in samples {
            count += 1;
            latency += s.latency;
            energy.edge += s.energy.edge;
            energy.fog += s.energy.fog;
            energy.cloud += s.energy.cloud;
        }
        if count == 0 {
            return Self::default();
        }
        let n = count as f64;
        let energy = energy.map(|e| e / n);
        Self {
            count,
            latency: latency / n,
            energy,
            energy_total: energy.sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Stay,
    NormalSwitch,
    ForcedSwitch,
    Fallback,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Stay => "stay",
            Decision::NormalSwitch => "normal-switch",
            Decision::ForcedSwitch => "forced-switch",
            Decision::Fallback => "fallback",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// End-of-window switching rule, evaluated top to bottom:
/// deadline hit with a different candidate forces the switch; otherwise a
/// different candidate improving by at least `theta` is a normal switch;
/// otherwise a deadline hit away from the baseline falls back to it;
/// otherwise stay.
pub fn decide_switch(
    current: Split,
    baseline: Split,
    candidate: Option<Split>,
    delta: Option<f64>,
    deadline_hit: bool,
    theta: f64,
) -> (Decision, Split) {
    match candidate {
        Some(c) if c != current && deadline_hit => (Decision::ForcedSwitch, c),
        Some(c) if c != current && delta.is_some_and(|d| d >= theta) => (Decision::NormalSwitch, c),
        _ if deadline_hit && current != baseline => (Decision::Fallback, baseline),
        _ => (Decision::Stay, current),
    }
}

/// Edge-heavy, balanced and cloud-heavy probe splits at fifths of the
/// feature range, clamped into the valid region. A clamped pair that
/// collides with an earlier one moves to the nearest unused valid pair
/// (Manhattan distance, then lexicographic order).
pub fn probe_splits(n_features: usize, min_edge_layers: usize) -> Result<[Split; 3]> {
    let n = n_features;
    let lo = min_edge_layers.max(1) - 1;
    let err = || Error::ProbeSpace {
        n_features,
        min_edge_layers,
    };
    if n < 2 || lo + 2 > n {
        return Err(err());
    }
    let valid: Vec<Split> = (lo..n - 1)
        .flat_map(|i| (i + 1..n).map(move |j| Split::new(i, j)))
        .collect();
    if valid.len() < 3 {
        return Err(err());
    }
    let raw = [
        (3 * n / 5, 4 * n / 5),
        (2 * n / 5, 3 * n / 5),
        (n / 5, 2 * n / 5),
    ];
    let mut chosen: Vec<Split> = Vec::with_capacity(3);
    for (i, j) in raw {
        let i = i.clamp(lo, n - 2);
        let j = j.clamp(i + 1, n - 1);
        let mut split = Split::new(i, j);
        if chosen.contains(&split) {
            let dist = |s: &Split| s.last_edge.abs_diff(i) + s.last_fog.abs_diff(j);
            split = valid
                .iter()
                .filter(|s| !chosen.contains(s))
                .min_by_key(|s| (dist(s), **s))
                .copied()
                .ok_or_else(err)?;
        }
        chosen.push(split);
    }
    Ok([chosen[0], chosen[1], chosen[2]])
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub window_index: usize,
    /// Split the window ran at.
    pub split: Split,
    pub inferences: usize,
    /// Samples after warmup was discarded.
    pub samples: Vec<InferenceSample>,
    pub means: SampleMeans,
    pub candidate: Option<Split>,
    pub score_current: f64,
    pub score_candidate: Option<f64>,
    pub delta: Option<f64>,
    pub deadline_hit: bool,
    pub decision: Decision,
    /// Split in force after the decision.
    pub next_split: Split,
    pub rates: NodeRates,
    pub links: Links,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    pub current: Split,
    pub baseline_split: Split,
    pub baseline_means: SampleMeans,
    pub objective: ObjectiveSpec,
    pub base_samples: Vec<InferenceSample>,
    pub probe_samples: Vec<InferenceSample>,
    /// Probe splits actually run (those equal to the baseline are skipped).
    pub probes_run: Vec<Split>,
    pub rates: NodeRates,
    pub links: Links,
    pub initial_choice: Option<Split>,
    pub windows: Vec<WindowReport>,
    /// Inferences consumed so far, warmup included.
    pub inferences: usize,
}

impl SchedulerState {
    pub fn baseline_score(&self) -> f64 {
        self.objective.baseline_score
    }

    pub fn anchors(&self) -> Anchors {
        self.objective.anchors
    }

    fn phase1_samples(&self) -> impl Iterator<Item = &InferenceSample> {
        self.base_samples.iter().chain(&self.probe_samples)
    }
}

/// Receives each window report as it completes.
pub trait WindowSink {
    fn record(&mut self, report: &WindowReport) -> Result<()>;
}

impl WindowSink for Vec<WindowReport> {
    fn record(&mut self, report: &WindowReport) -> Result<()> {
        self.push(report.clone());
        Ok(())
    }
}

struct Discard;

impl WindowSink for Discard {
    fn record(&mut self, _: &WindowReport) -> Result<()> {
        Ok(())
    }
}

fn run_batch<E: Environment + ?Sized>(
    env: &mut E,
    split: Split,
    profile: &ModelProfile,
    runs: usize,
    warmup: usize,
) -> Result<Vec<InferenceSample>> {
    let mut kept = Vec::with_capacity(runs.saturating_sub(warmup));
    for r in 1..=runs {
        let sample = env.run_inference(split, profile)?;
        if r > warmup {
            kept.push(sample);
        }
    }
    Ok(kept)
}

fn probe_both<E: Environment + ?Sized>(
    env: &mut E,
    cfg: &ProbeConfig,
    previous: &Links,
) -> Result<Links> {
    let edge_fog = probe_link(
        &mut HopTransport { env: &mut *env, hop: Hop::EdgeFog },
        cfg,
        &previous.edge_fog,
    )?;
    let fog_cloud = probe_link(
        &mut HopTransport { env: &mut *env, hop: Hop::FogCloud },
        cfg,
        &previous.fog_cloud,
    )?;
    Ok(Links {
        edge_fog,
        fog_cloud,
    })
}

fn objective_score(means: &SampleMeans, weights: &ObjectiveWeights, anchors: &Anchors) -> f64 {
    weights.edge * (means.energy.edge / anchors.edge_energy)
        + weights.total * (means.energy_total / anchors.total_energy)
        + weights.latency * (means.latency / anchors.latency)
}

/// Phase 1: baseline, probe splits, rate fit, link probe, starting split.
pub fn initialize<E: Environment + ?Sized>(
    config: &SchedulerConfig,
    profile: &ModelProfile,
    env: &mut E,
) -> Result<SchedulerState> {
    config.validate(profile.n_features())?;
    let phase = |phase: &'static str| move |e: Error| Error::Initialization {
        phase,
        source: Box::new(e),
    };
    let c0 = config.initial_split;

    let base_samples = run_batch(env, c0, profile, config.r_profile, config.warmup)
        .map_err(phase("1a"))?;
    let mut inferences = config.r_profile;
    let baseline_means = SampleMeans::of(&base_samples);

    let probes = probe_splits(profile.n_features(), config.min_edge_layers)?;
    let mut probe_samples = Vec::new();
    let mut probes_run = Vec::new();
    for p in probes.into_iter().filter(|p| *p != c0) {
        probe_samples.extend(
            run_batch(env, p, profile, config.r_probe, config.warmup).map_err(phase("1b"))?,
        );
        inferences += config.r_probe;
        probes_run.push(p);
    }

    let probe_means = SampleMeans::of(&probe_samples);
    let anchors = Anchors {
        edge_energy: probe_means.energy.edge,
        total_energy: probe_means.energy_total,
        latency: probe_means.latency,
    };
    let objective = ObjectiveSpec {
        weights: config.weights,
        anchors,
        baseline_score: objective_score(&baseline_means, &config.weights, &anchors),
        deadline: config.deadline,
        min_edge_layers: config.min_edge_layers,
    };
    objective.validate().map_err(phase("1c"))?;

    let phase1: Vec<InferenceSample> =
        base_samples.iter().chain(&probe_samples).copied().collect();
    let rates = fit_rates(&phase1, profile, config.edge_power)?;
    let links = probe_both(env, &config.probe, &Links::unfitted()).map_err(phase("1c"))?;
    let initial_choice = find_best(profile, &rates, &links, &objective, None)?.map(|c| c.split);

    Ok(SchedulerState {
        current: initial_choice.unwrap_or(c0),
        baseline_split: c0,
        baseline_means,
        objective,
        base_samples,
        probe_samples,
        probes_run,
        rates,
        links,
        initial_choice,
        windows: Vec::new(),
        inferences,
    })
}

/// One steady-state window of `config.r_steady` inferences.
pub fn steady_window<E: Environment + ?Sized>(
    state: &mut SchedulerState,
    config: &SchedulerConfig,
    profile: &ModelProfile,
    env: &mut E,
) -> Result<WindowReport> {
    run_window(state, config, profile, env, config.r_steady)
}

fn run_window<E: Environment + ?Sized>(
    state: &mut SchedulerState,
    config: &SchedulerConfig,
    profile: &ModelProfile,
    env: &mut E,
    runs: usize,
) -> Result<WindowReport> {
    let window_index = state.windows.len();
    let aborted = |e: Error| Error::WindowAborted {
        window: window_index,
        source: Box::new(e),
    };
    let current = state.current;

    let samples = run_batch(env, current, profile, runs, config.warmup).map_err(aborted)?;
    let means = SampleMeans::of(&samples);

    let fit_set: Vec<InferenceSample> =
        state.phase1_samples().chain(&samples).copied().collect();
    let rates = fit_rates(&fit_set, profile, config.edge_power).map_err(aborted)?;
    let links = probe_both(env, &config.probe, &state.links).map_err(aborted)?;

    let best = find_best(profile, &rates, &links, &state.objective, Some(current))
        .map_err(aborted)?;
    let score_current = score(
        &estimate_split(current, profile, &rates, &links).map_err(aborted)?,
        &state.objective,
    );
    let score_candidate = best.map(|c| c.score);
    let delta = score_candidate.map(|s| (score_current - s) / score_current);
    let deadline_hit = state.objective.deadline_enabled() && means.latency > state.objective.deadline;

    let (decision, next_split) = decide_switch(
        current,
        state.baseline_split,
        best.map(|c| c.split),
        delta,
        deadline_hit,
        config.switch_threshold,
    );

    let report = WindowReport {
        window_index,
        split: current,
        inferences: runs,
        samples,
        means,
        candidate: best.map(|c| c.split),
        score_current,
        score_candidate,
        delta,
        deadline_hit,
        decision,
        next_split,
        rates,
        links,
    };
    state.rates = rates;
    state.links = links;
    state.current = next_split;
    state.inferences += runs;
    state.windows.push(report.clone());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub state: SchedulerState,
    pub phase1_inferences: usize,
    pub steady_inferences: usize,
    /// Means over retained steady-state samples only.
    pub steady_means: SampleMeans,
}

impl ExperimentReport {
    pub fn windows(&self) -> &[WindowReport] {
        &self.state.windows
    }
}

pub fn run<E: Environment + ?Sized>(
    config: &SchedulerConfig,
    profile: &ModelProfile,
    env: &mut E,
) -> Result<ExperimentReport> {
    run_with_sink(config, profile, env, &mut Discard)
}

/// Phase 1, then windows until the budget is spent. The last window absorbs
/// any remainder smaller than a full window.
pub fn run_with_sink<E: Environment + ?Sized>(
    config: &SchedulerConfig,
    profile: &ModelProfile,
    env: &mut E,
    sink: &mut dyn WindowSink,
) -> Result<ExperimentReport> {
    config.validate(profile.n_features())?;
    if config.total_budget < config.minimum_budget() {
        return Err(Error::BudgetTooSmall {
            budget: config.total_budget,
            minimum: config.minimum_budget(),
        });
    }
    let mut state = initialize(config, profile, env)?;
    let phase1_inferences = state.inferences;
    let remaining = config.total_budget - phase1_inferences;
    let n_windows = remaining / config.r_steady;
    let tail = remaining % config.r_steady;
    for k in 0..n_windows {
        let runs = config.r_steady + if k + 1 == n_windows { tail } else { 0 };
        let report = run_window(&mut state, config, profile, env, runs)?;
        sink.record(&report)?;
    }
    let steady_means = SampleMeans::of(state.windows.iter().flat_map(|w| &w.samples));
    Ok(ExperimentReport {
        steady_inferences: remaining,
        phase1_inferences,
        steady_means,
        state,
    })
}
