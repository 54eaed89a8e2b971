use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use edgesplit::harness::report::{comparison_table, emit_reports};
use edgesplit::harness::scenario::{load_profile_ref, load_scenario_file, Mode, ProfileRef};
use edgesplit::harness::{run_experiment, ScenarioConfig};
use edgesplit::profile::{
    preset_profile, profile_model, ModelDescriptor, ModelProfile, SyntheticExecutor,
    DEFAULT_WARMUP_ROUNDS, PRESET_NAMES,
};
use edgesplit::{Error, Result};

#[derive(Parser)]
#[command(name = "edgesplit", version, about = "Three-tier DNN split scheduling on a simulated edge/fog/cloud testbed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario in the mode its document declares.
    Run(RunArgs),
    /// Run a scenario in compare mode.
    Compare(RunArgs),
    /// Print a profile's layer count, weight-sum check and activation table.
    ProbeModel {
        /// Preset name, profile JSON, model descriptor JSON or scenario JSON.
        profile: String,
    },
    /// Load and validate a scenario without running it.
    Validate { scenario: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Output directory for windows.csv, summary.csv and comparison.txt.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
}

fn load_with_overrides(args: &RunArgs, force_compare: bool) -> Result<ScenarioConfig> {
    let mut config = load_scenario_file(&args.scenario)?;
    if let Some(seed) = args.seed {
        config.experiment.seed = seed;
    }
    if let Some(budget) = args.budget {
        config.set_budget(budget);
    }
    if let Some(reps) = args.reps {
        config.experiment.repetitions = reps;
    }
    if force_compare {
        config.experiment.mode = Mode::Compare;
    }
    config.validate()?;
    Ok(config)
}

fn run(args: &RunArgs, force_compare: bool) -> Result<()> {
    let config = load_with_overrides(args, force_compare)?;
    let outcome = run_experiment(&config)?;
    let written = emit_reports(&outcome, &args.out)?;
    print!("{}", comparison_table(&outcome));
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_value(text: &str, what: &str) -> Result<serde_json::Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: what.to_string(),
        message: e.to_string(),
    })
}

fn deserialize<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

/// Accepts a preset name or a JSON file holding a profile, a model descriptor
/// (profiled with a noiseless executor) or a scenario.
fn resolve_profile(arg: &str) -> Result<ModelProfile> {
    if PRESET_NAMES.contains(&arg) {
        return preset_profile(arg);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(Error::UnknownFixture {
            name: arg.to_string(),
            known: format!("{} or a JSON file path", PRESET_NAMES.join(", ")),
        });
    }
    let value = parse_value(&read(path)?, arg)?;
    if value.get("feature_layers").is_some() {
        let descriptor: ModelDescriptor = deserialize(value)?;
        descriptor.validate()?;
        let mut executor = SyntheticExecutor::new(&descriptor, 1e-3);
        profile_model(&descriptor.name, &mut executor, DEFAULT_WARMUP_ROUNDS)
    } else if let Some(profile) = value.get("profile") {
        let reference: ProfileRef = deserialize(profile.clone())?;
        load_profile_ref(&reference, path.parent())
    } else {
        ModelProfile::from_json(&value.to_string())
    }
}

fn probe_model(arg: &str) -> Result<()> {
    let profile = resolve_profile(arg)?;
    let sum: f64 = profile.compute_weights().iter().sum();
    println!("profile {}", profile.name());
    println!("N={}", profile.n_features());
    println!("sum(W)={sum:.12} (|1 - sum| = {:.3e}, ok)", (1.0 - sum).abs());
    println!("{:>5} {:>14} {:>14}", "layer", "B_bytes", "W");
    for (k, (&b, &w)) in profile
        .activation_bytes()
        .iter()
        .zip(profile.compute_weights())
        .enumerate()
    {
        println!("{k:>5} {b:>14} {w:>14.9}");
    }
    println!("{:>5} {:>14} {:>14.9}", "head", "-", profile.head_weight());
    Ok(())
}

fn validate(path: &Path) -> Result<()> {
    let config = load_scenario_file(path)?;
    println!(
        "ok: {} (profile {}, N={}, c0={}, mode {}, budget {}, repetitions {})",
        config.name,
        config.profile.name(),
        config.profile.n_features(),
        config.scheduler.initial_split,
        config.experiment.mode,
        config.experiment.budget,
        config.experiment.repetitions
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args, false),
        Command::Compare(args) => run(args, true),
        Command::ProbeModel { profile } => probe_model(profile),
        Command::Validate { scenario } => validate(scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
