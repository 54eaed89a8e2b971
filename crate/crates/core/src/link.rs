//! Affine link model `rtt(s) = overhead + s / throughput`, fitted from a
//! two-point probe.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed overhead (seconds) plus effective throughput (bytes/second) for one hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub omega: f64,
    pub beta: f64,
    /// False until a probe has produced this model.
    #[serde(default)]
    pub fitted: bool,
}

impl LinkModel {
    pub fn new(omega: f64, beta: f64) -> Result<Self> {
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::config("omega", format!("must be finite and >= 0, got {omega}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::config("beta", format!("must be finite and > 0, got {beta}")));
        }
        Ok(Self {
            omega,
            beta,
            fitted: true,
        })
    }

    /// Pessimistic stand-in used before the first successful probe: no
    /// overhead, 1 MiB/s.
    pub fn unfitted() -> Self {
        Self {
            omega: 0.0,
            beta: 1024.0 * 1024.0,
            fitted: false,
        }
    }

    pub fn transfer_time(&self, payload: u64) -> f64 {
        predict_transfer_time(self, payload as f64)
    }
}

impl fmt::Display for LinkModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "omega={:.6}s beta={:.4e}B/s{}",
            self.omega,
            self.beta,
            if self.fitted { "" } else { " (unfitted)" }
        )
    }
}

/// Probe payload sizes and repeat count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub size_small: u64,
    pub size_large: u64,
    pub repeats: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            size_small: 1024,
            size_large: 1024 * 1024,
            repeats: 5,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size_small == 0 || self.size_small >= self.size_large {
            return Err(Error::config(
                "probe.size_small",
                format!(
                    "need 0 < size_small < size_large, got {} and {}",
                    self.size_small, self.size_large
                ),
            ));
        }
        if self.repeats == 0 {
            return Err(Error::config("probe.repeats", "must be >= 1"));
        }
        Ok(())
    }
}

pub fn predict_transfer_time(link: &LinkModel, payload: f64) -> f64 {
    link.omega + payload / link.beta
}

/// Two-point fit. A probe whose large payload was not slower than the small
/// one is malformed and the previous model is kept.
pub fn fit_link_model(
    tau_small: f64,
    tau_large: f64,
    cfg: &ProbeConfig,
    previous: &LinkModel,
) -> LinkModel {
    if !(tau_large > tau_small) || !tau_small.is_finite() || !tau_large.is_finite() {
        return *previous;
    }
    let beta = (cfg.size_large - cfg.size_small) as f64 / (tau_large - tau_small);
    if !(beta > 0.0 && beta.is_finite()) {
        return *previous;
    }
    let omega = (tau_small - cfg.size_small as f64 / beta).max(0.0);
    LinkModel {
        omega,
        beta,
        fitted: true,
    }
}

/// A hop that can echo a payload of a given size and report the round trip.
pub trait RttTransport {
    fn hop_id(&self) -> String;
    fn rtt(&mut self, payload: u64) -> Result<f64>;
}

/// Averages `repeats` round trips at each probe size and fits a link model.
/// Failed repeats are dropped; a size where every repeat failed is an error.
pub fn probe_link<T: RttTransport + ?Sized>(
    hop: &mut T,
    cfg: &ProbeConfig,
    previous: &LinkModel,
) -> Result<LinkModel> {
    let mut mean_rtt = |size: u64| -> Result<f64> {
        let mut sum = 0.0;
        let mut ok = 0usize;
        let mut last_err = None;
        for _ in 0..cfg.repeats {
            match hop.rtt(size) {
                Ok(t) => {
                    sum += t;
                    ok += 1;
                }
                Err(e) => last_err = Some(e),
            }
        }
        if ok == 0 {
            return Err(Error::LinkProbeTransport {
                hop: hop.hop_id(),
                size,
                last: last_err.map(|e| e.to_string()).unwrap_or_default(),
            });
        }
        Ok(sum / ok as f64)
    };
    let tau_small = mean_rtt(cfg.size_small)?;
    let tau_large = mean_rtt(cfg.size_large)?;
    Ok(fit_link_model(tau_small, tau_large, cfg, previous))
}
