//! CSV and plain-text report emission.
//!
//! Floats are written with six significant digits in `%g` style: fixed
//! notation for decimal exponents in `[-4, 6)`, scientific otherwise, trailing
//! zeros removed. Fields are separated by `,`, lines end with `\n`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::experiment::{ComparisonReport, ExperimentOutcome, StrategySummary};
use crate::scheduler::WindowReport;

pub const WINDOWS_HEADER: &str = "window_index,split_i,split_j,mean_latency_ms,edge_energy_j,fog_energy_j,cloud_energy_j,total_energy_j,score,decision";
pub const SUMMARY_HEADER: &str =
    "strategy,split_i,split_j,mean_latency_ms,edge_energy_j,fog_energy_j,cloud_energy_j,total_energy_j";

pub const WINDOWS_FILE: &str = "windows.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const COMPARISON_FILE: &str = "comparison.txt";

pub const DIRECTION_NOTE: &str = "Note: absolute reductions depend on the fixture's link and hardware \
parameters; only the direction (adaptive at or below static) is expected to carry over.";

/// Formats `x` with six significant digits, `%g` style.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // round first so the exponent reflects carries like 999999.5 -> 1e6
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn ms(seconds: f64) -> String {
    fmt_sig6(seconds * 1e3)
}

pub fn windows_csv(windows: &[WindowReport]) -> String {
    let mut out = String::new();
    out.push_str(WINDOWS_HEADER);
    out.push('\n');
    for w in windows {
        let m = &w.means;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            w.window_index,
            w.split.last_edge,
            w.split.last_fog,
            ms(m.latency),
            fmt_sig6(m.energy.edge),
            fmt_sig6(m.energy.fog),
            fmt_sig6(m.energy.cloud),
            fmt_sig6(m.energy_total),
            fmt_sig6(w.score_current),
            w.decision.as_str(),
        );
    }
    out
}

fn split_cells(s: &StrategySummary) -> (String, String) {
    match s.split {
        Some(split) => (split.last_edge.to_string(), split.last_fog.to_string()),
        None => (String::new(), String::new()),
    }
}

pub fn summary_csv(summaries: &[StrategySummary]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        let (i, j) = split_cells(s);
        let m = &s.mean;
        let _ = writeln!(
            out,
            "{},{i},{j},{},{},{},{},{}",
            s.strategy.label(),
            ms(m.latency),
            fmt_sig6(m.energy.edge),
            fmt_sig6(m.energy.fog),
            fmt_sig6(m.energy.cloud),
            fmt_sig6(m.energy_total),
        );
    }
    out
}

pub fn comparison_rows(c: &ComparisonReport) -> [(String, String); 2] {
    [
        (
            "latency_reduction".into(),
            format!("{:.2}%", c.latency_reduction_pct()),
        ),
        (
            "energy_reduction".into(),
            format!("{:.2}%", c.energy_reduction_pct()),
        ),
    ]
}

/// Fixed-width table of every strategy's means, followed by the reduction
/// rows when both static and adaptive ran.
pub fn comparison_table(outcome: &ExperimentOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario {} | profile {} (N={}) | mode {} | budget {} | seed {}",
        outcome.scenario,
        outcome.profile_name,
        outcome.n_features,
        outcome.mode,
        outcome.budget,
        outcome.seed
    );
    let _ = writeln!(
        out,
        "{:<20} {:>9} {:>12} {:>10} {:>10} {:>10} {:>10}",
        "strategy", "split", "latency_ms", "edge_J", "fog_J", "cloud_J", "total_J"
    );
    for s in &outcome.summaries {
        let split = s.split.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
        let m = &s.mean;
        let _ = writeln!(
            out,
            "{:<20} {:>9} {:>12} {:>10} {:>10} {:>10} {:>10}",
            s.strategy.label(),
            split,
            ms(m.latency),
            fmt_sig6(m.energy.edge),
            fmt_sig6(m.energy.fog),
            fmt_sig6(m.energy.cloud),
            fmt_sig6(m.energy_total),
        );
    }
    if let Some(c) = &outcome.comparison {
        out.push('\n');
        for (name, value) in comparison_rows(c) {
            let _ = writeln!(out, "{name:<20} {value:>9}");
        }
        out.push('\n');
        out.push_str(DIRECTION_NOTE);
        out.push('\n');
    }
    out
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes `windows.csv` (first adaptive repetition), `summary.csv` and
/// `comparison.txt` into `dir`, creating it if needed.
pub fn emit_reports(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(vec![
        write(dir.join(WINDOWS_FILE), &windows_csv(&outcome.windows))?,
        write(dir.join(SUMMARY_FILE), &summary_csv(&outcome.summaries))?,
        write(dir.join(COMPARISON_FILE), &comparison_table(outcome))?,
    ])
}
