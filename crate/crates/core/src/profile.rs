//! Layer tables for a partitionable model.
//!
//! A model is reduced to two tables: the byte size of the activation emitted
//! after every feature layer, and each stage's normalized share of total
//! inference work (the classifier head is the last entry). Both come from a
//! single timed pass over an executor, after a few untimed warmup passes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ W = 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Default number of untimed full passes before profiling.
pub const DEFAULT_WARMUP_ROUNDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub output_activation_bytes: u64,
    pub compute_cost: f64,
}

/// Abstract description of a layered network: ordered feature layers plus a head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescriptor {
    pub name: String,
    pub feature_layers: Vec<LayerSpec>,
    pub head_compute_cost: f64,
}

impl ModelDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.feature_layers.is_empty() {
            return Err(Error::InvalidModel(format!("`{}` has no feature layers", self.name)));
        }
        if self.feature_layers.len() < 3 {
            return Err(Error::InvalidModel(format!(
                "`{}` has {} feature layers; at least 3 are needed to give every node one layer",
                self.name,
                self.feature_layers.len()
            )));
        }
        for (k, layer) in self.feature_layers.iter().enumerate() {
            if layer.output_activation_bytes == 0 {
                return Err(Error::InvalidModel(format!(
                    "feature_layers[{k}].output_activation_bytes must be > 0"
                )));
            }
            if !(layer.compute_cost >= 0.0 && layer.compute_cost.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "feature_layers[{k}].compute_cost must be finite and >= 0"
                )));
            }
        }
        if !(self.head_compute_cost > 0.0 && self.head_compute_cost.is_finite()) {
            return Err(Error::InvalidModel("head_compute_cost must be finite and > 0".into()));
        }
        Ok(())
    }
}

/// Something that can run a model one stage at a time and time it.
pub trait LayerExecutor {
    fn n_features(&self) -> usize;

    /// Runs feature layer `index`, returning `(elapsed seconds, output bytes)`.
    fn run_feature(&mut self, index: usize) -> Result<(f64, u64)>;

    /// Runs the classifier head, returning elapsed seconds.
    fn run_head(&mut self) -> Result<f64>;
}

/// Noiseless executor whose stage time is `compute_cost × seconds_per_unit`.
#[derive(Debug, Clone)]
pub struct SyntheticExecutor<'a> {
    model: &'a ModelDescriptor,
    seconds_per_unit: f64,
    calls: usize,
}

impl<'a> SyntheticExecutor<'a> {
    pub fn new(model: &'a ModelDescriptor, seconds_per_unit: f64) -> Self {
        Self {
            model,
            seconds_per_unit,
            calls: 0,
        }
    }

    /// Stage invocations so far, warmup included.
    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl LayerExecutor for SyntheticExecutor<'_> {
    fn n_features(&self) -> usize {
        self.model.feature_layers.len()
    }

    fn run_feature(&mut self, index: usize) -> Result<(f64, u64)> {
        self.calls += 1;
        let layer = self.model.feature_layers.get(index).ok_or_else(|| {
            Error::InvalidModel(format!("feature layer {index} out of range"))
        })?;
        Ok((
            layer.compute_cost * self.seconds_per_unit,
            layer.output_activation_bytes,
        ))
    }

    fn run_head(&mut self) -> Result<f64> {
        self.calls += 1;
        Ok(self.model.head_compute_cost * self.seconds_per_unit)
    }
}

/// Activation sizes `B` (length N) and compute weights `W` (length N + 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelProfile {
    name: String,
    activation_bytes: Vec<u64>,
    compute_weights: Vec<f64>,
}

impl ModelProfile {
    pub fn new(
        name: impl Into<String>,
        activation_bytes: Vec<u64>,
        compute_weights: Vec<f64>,
    ) -> Result<Self> {
        let bad = |field: String, reason: String| Error::InvalidProfile { field, reason };
        if activation_bytes.len() < 2 {
            return Err(bad(
                "activation_bytes".into(),
                format!("need at least 2 feature layers, got {}", activation_bytes.len()),
            ));
        }
        if compute_weights.len() != activation_bytes.len() + 1 {
            return Err(bad(
                "compute_weights".into(),
                format!(
                    "expected {} entries (one per feature layer plus the head), got {}",
                    activation_bytes.len() + 1,
                    compute_weights.len()
                ),
            ));
        }
        if let Some(k) = activation_bytes.iter().position(|&b| b < 1) {
            return Err(bad(format!("activation_bytes[{k}]"), "must be >= 1".into()));
        }
        if let Some(k) = compute_weights
            .iter()
            .position(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(bad(
                format!("compute_weights[{k}]"),
                "must be finite and >= 0".into(),
            ));
        }
        let sum: f64 = compute_weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(bad(
                "compute_weights".into(),
                format!("must sum to 1 within {WEIGHT_SUM_TOLERANCE:e}, sum is {sum}"),
            ));
        }
        Ok(Self {
            name: name.into(),
            activation_bytes,
            compute_weights,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of feature layers N.
    pub fn n_features(&self) -> usize {
        self.activation_bytes.len()
    }

    pub fn activation_bytes(&self) -> &[u64] {
        &self.activation_bytes
    }

    pub fn compute_weights(&self) -> &[f64] {
        &self.compute_weights
    }

    pub fn head_weight(&self) -> f64 {
        self.compute_weights[self.n_features()]
    }

    /// Parses the profile document format, reporting line/column on syntax
    /// errors and the offending field on invariant violations.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ProfileDocument = serde_path_to_error::deserialize(de).map_err(|e| {
            Error::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            }
        })?;
        doc.into_profile()
    }

    pub fn to_document(&self) -> ProfileDocument {
        ProfileDocument {
            name: self.name.clone(),
            activation_bytes: self.activation_bytes.clone(),
            compute_weights: self.compute_weights.clone(),
        }
    }
}

/// On-disk profile schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    pub name: String,
    pub activation_bytes: Vec<u64>,
    pub compute_weights: Vec<f64>,
}

impl ProfileDocument {
    pub fn into_profile(self) -> Result<ModelProfile> {
        ModelProfile::new(self.name, self.activation_bytes, self.compute_weights)
    }
}

/// Profiles a model: `warmup_rounds` untimed full passes, then one timed pass
/// recording each stage's time and output size. Weights are each stage's share
/// of the summed time.
pub fn profile_model<E: LayerExecutor + ?Sized>(
    name: &str,
    executor: &mut E,
    warmup_rounds: usize,
) -> Result<ModelProfile> {
    let n = executor.n_features();
    if n == 0 {
        return Err(Error::InvalidModel(format!("`{name}` has no feature layers")));
    }
    for _ in 0..warmup_rounds {
        for k in 0..n {
            executor.run_feature(k)?;
        }
        executor.run_head()?;
    }

    let mut timings = Vec::with_capacity(n + 1);
    let mut activation_bytes = Vec::with_capacity(n);
    for k in 0..n {
        let (elapsed, bytes) = executor.run_feature(k)?;
        timings.push(elapsed.max(0.0));
        activation_bytes.push(bytes);
    }
    timings.push(executor.run_head()?.max(0.0));

    let total: f64 = timings.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::ProfileDegenerate);
    }
    let weights = timings.iter().map(|t| t / total).collect();
    ModelProfile::new(name, activation_bytes, weights)
}

pub const PRESET_NAMES: [&str; 3] = ["vgg16-like", "alexnet-like", "mobilenetv2-like"];

/// Loads one of the committed fixture profiles.
pub fn preset_profile(name: &str) -> Result<ModelProfile> {
    let text = match name {
        "vgg16-like" => include_str!("../fixtures/profiles/vgg16-like.json"),
        "alexnet-like" => include_str!("../fixtures/profiles/alexnet-like.json"),
        "mobilenetv2-like" => include_str!("../fixtures/profiles/mobilenetv2-like.json"),
        _ => {
            return Err(Error::UnknownFixture {
                name: name.to_string(),
                known: PRESET_NAMES.join(", "),
            })
        }
    };
    ModelProfile::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct TableExecutor {
        timings: Vec<f64>,
    }

    impl LayerExecutor for TableExecutor {
        fn n_features(&self) -> usize {
            self.timings.len() - 1
        }
        fn run_feature(&mut self, index: usize) -> Result<(f64, u64)> {
            Ok((self.timings[index], 100 + index as u64))
        }
        fn run_head(&mut self) -> Result<f64> {
            Ok(*self.timings.last().unwrap())
        }
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn normalizes_raw_timings() {
        let mut ex = TableExecutor {
            timings: vec![2.0, 1.0, 1.0, 4.0],
        };
        let p = profile_model("t", &mut ex, 3).unwrap();
        assert!(close(p.compute_weights(), &[0.25, 0.125, 0.125, 0.5]));
        assert_eq!(p.activation_bytes(), &[100, 101, 102]);
    }

    #[test]
    fn equal_timings_give_uniform_weights() {
        let mut ex = TableExecutor {
            timings: vec![0.3; 6],
        };
        let p = profile_model("t", &mut ex, 0).unwrap();
        assert!(p.compute_weights().iter().all(|w| (w - 1.0 / 6.0).abs() < 1e-12));
    }

    #[test]
    fn synthetic_descriptor_profile() {
        let model = ModelDescriptor {
            name: "syn".into(),
            feature_layers: vec![
                LayerSpec { output_activation_bytes: 4000, compute_cost: 5.0 },
                LayerSpec { output_activation_bytes: 2000, compute_cost: 3.0 },
                LayerSpec { output_activation_bytes: 500, compute_cost: 2.0 },
            ],
            head_compute_cost: 10.0,
        };
        model.validate().unwrap();
        let mut ex = SyntheticExecutor::new(&model, 1e-3);
        let p = profile_model(&model.name, &mut ex, DEFAULT_WARMUP_ROUNDS).unwrap();
        assert!(close(p.compute_weights(), &[0.25, 0.15, 0.10, 0.50]));
        assert_eq!(p.activation_bytes(), &[4000, 2000, 500]);
        // three warmup passes plus the timed pass, four stages each
        assert_eq!(ex.calls(), 16);
    }

    #[test]
    fn zero_total_time_is_degenerate() {
        let mut ex = TableExecutor {
            timings: vec![0.0; 4],
        };
        assert!(matches!(
            profile_model("z", &mut ex, 0),
            Err(Error::ProfileDegenerate)
        ));
    }

    #[test]
    fn empty_model_is_rejected() {
        let model = ModelDescriptor {
            name: "empty".into(),
            feature_layers: vec![],
            head_compute_cost: 1.0,
        };
        assert!(matches!(model.validate(), Err(Error::InvalidModel(_))));
        let mut ex = SyntheticExecutor::new(&model, 1.0);
        assert!(matches!(
            profile_model("empty", &mut ex, 3),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn presets_have_expected_depths() {
        assert_eq!(preset_profile("vgg16-like").unwrap().n_features(), 31);
        assert_eq!(preset_profile("alexnet-like").unwrap().n_features(), 14);
        assert_eq!(preset_profile("mobilenetv2-like").unwrap().n_features(), 19);
        for name in PRESET_NAMES {
            let p = preset_profile(name).unwrap();
            let sum: f64 = p.compute_weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(
            preset_profile("resnet50-like"),
            Err(Error::UnknownFixture { .. })
        ));
    }

    #[test]
    fn loader_names_the_bad_field() {
        let err = ModelProfile::from_json(
            r#"{"name":"x","activation_bytes":[10,0,5],"compute_weights":[0.25,0.25,0.25,0.25]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("activation_bytes[1]"), "{err}");

        let err = ModelProfile::from_json(
            r#"{"name":"x","activation_bytes":[10,3,5],"compute_weights":[0.25,0.25,0.25,0.5]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("sum"), "{err}");

        let err = ModelProfile::from_json("{\"name\":\"x\",\n\"activation_bytes\": [1,2,\"a\"]}")
            .unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
