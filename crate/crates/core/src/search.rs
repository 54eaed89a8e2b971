//! Weighted objective and exhaustive best-split search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_split, Links, NodeRates, Split, SplitEstimate};
use crate::profile::ModelProfile;

/// Scores closer than this are treated as equal; the lexicographically
/// smallest split wins the tie.
pub const SCORE_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub edge: f64,
    pub total: f64,
    pub latency: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            edge: 0.7,
            total: 0.2,
            latency: 0.1,
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("edge", self.edge), ("total", self.total), ("latency", self.latency)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::config(format!("weights.{name}"), "must be finite and >= 0"));
            }
        }
        if !(self.edge + self.total + self.latency > 0.0) {
            return Err(Error::config("weights", "at least one weight must be positive"));
        }
        Ok(())
    }
}

/// Normalization constants making each objective term dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub edge_energy: f64,
    pub total_energy: f64,
    pub latency: f64,
}

impl Anchors {
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            edge_energy: self.edge_energy * c,
            total_energy: self.total_energy * c,
            latency: self.latency * c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub weights: ObjectiveWeights,
    pub anchors: Anchors,
    /// Score of the static baseline; candidates scoring above it are dropped.
    pub baseline_score: f64,
    /// Latency deadline in seconds; 0 disables it.
    pub deadline: f64,
    pub min_edge_layers: usize,
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        let a = &self.anchors;
        if !(a.edge_energy > 0.0 && a.total_energy > 0.0 && a.latency > 0.0) {
            return Err(Error::config("anchors", "all anchors must be > 0"));
        }
        if self.min_edge_layers < 1 {
            return Err(Error::config("min_edge_layers", "must be >= 1"));
        }
        if !(self.deadline >= 0.0) {
            return Err(Error::config("deadline", "must be >= 0"));
        }
        Ok(())
    }

    pub fn deadline_enabled(&self) -> bool {
        self.deadline > 0.0
    }
}

/// Weighted sum of normalized edge energy, total energy and latency.
pub fn score(est: &SplitEstimate, spec: &ObjectiveSpec) -> f64 {
    let (w, n) = (&spec.weights, &spec.anchors);
    w.edge * (est.energy.edge / n.edge_energy)
        + w.total * (est.energy_total / n.total_energy)
        + w.latency * (est.latency / n.latency)
}

/// All valid splits in lexicographic order, minus `current`.
pub fn enumerate_candidates(
    n_features: usize,
    min_edge_layers: usize,
    current: Option<Split>,
) -> Result<Vec<Split>> {
    let first_edge = min_edge_layers.max(1) - 1;
    if n_features < 2 || first_edge + 2 > n_features {
        return Err(Error::EmptyCandidateSpace {
            n_features,
            min_edge_layers,
        });
    }
    let mut out = Vec::new();
    for last_edge in first_edge..n_features - 1 {
        for last_fog in last_edge + 1..n_features {
            let split = Split::new(last_edge, last_fog);
            if Some(split) != current {
                out.push(split);
            }
        }
    }
    Ok(out)
}

/// A surviving candidate with its estimate and score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub split: Split,
    pub estimate: SplitEstimate,
    pub score: f64,
}

/// Exhaustive search: drop candidates over the deadline or scoring above the
/// baseline, return the lowest score (ties to the smallest split).
pub fn find_best(
    profile: &ModelProfile,
    rates: &NodeRates,
    links: &Links,
    spec: &ObjectiveSpec,
    current: Option<Split>,
) -> Result<Option<Candidate>> {
    let mut survivors = Vec::new();
    for split in enumerate_candidates(profile.n_features(), spec.min_edge_layers, current)? {
        let estimate = estimate_split(split, profile, rates, links)?;
        if spec.deadline_enabled() && estimate.latency > spec.deadline {
            continue;
        }
        let s = score(&estimate, spec);
        if s > spec.baseline_score || s.is_nan() {
            continue;
        }
        survivors.push(Candidate {
            split,
            estimate,
            score: s,
        });
    }
    let Some(min) = survivors.iter().map(|c| c.score).min_by(f64::total_cmp) else {
        return Ok(None);
    };
    // survivors are in lexicographic order, so the first within tolerance wins
    Ok(survivors
        .into_iter()
        .find(|c| c.score <= min + SCORE_TIE_TOLERANCE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::PerTier;
    use crate::link::LinkModel;

    fn estimate(edge: f64, total: f64, latency: f64) -> SplitEstimate {
        SplitEstimate {
            latency,
            energy: PerTier::new(edge, total - edge, 0.0),
            energy_total: total,
            compute_time: PerTier::default(),
            transfer_edge_fog: 0.0,
            transfer_fog_cloud: 0.0,
        }
    }

    fn spec(weights: (f64, f64, f64), anchors: (f64, f64, f64)) -> ObjectiveSpec {
        ObjectiveSpec {
            weights: ObjectiveWeights {
                edge: weights.0,
                total: weights.1,
                latency: weights.2,
            },
            anchors: Anchors {
                edge_energy: anchors.0,
                total_energy: anchors.1,
                latency: anchors.2,
            },
            baseline_score: f64::INFINITY,
            deadline: 0.0,
            min_edge_layers: 1,
        }
    }

    #[test]
    fn single_term_objective() {
        let s = score(&estimate(1.0, 5.0, 3.0), &spec((1.0, 0.0, 0.0), (2.0, 1.0, 1.0)));
        assert!((s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn anchors_are_a_fixed_point() {
        let s = score(&estimate(4.0, 7.0, 0.3), &spec((0.7, 0.2, 0.1), (4.0, 7.0, 0.3)));
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_score() {
        let sp = spec((0.6, 0.3, 0.1), (6.0, 8.85, 0.79));
        let s = score(&estimate(6.0, 8.85, 0.79), &sp);
        assert!((s - 1.0).abs() < 1e-12);
        let halved = SplitEstimate {
            energy: PerTier::new(3.0, 2.85, 0.0),
            ..estimate(6.0, 8.85, 0.79)
        };
        assert!((score(&halved, &sp) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn enumerates_tiny_space() {
        assert_eq!(
            enumerate_candidates(3, 1, None).unwrap(),
            vec![Split::new(0, 1), Split::new(0, 2), Split::new(1, 2)]
        );
        assert_eq!(
            enumerate_candidates(3, 1, Some(Split::new(0, 2))).unwrap(),
            vec![Split::new(0, 1), Split::new(1, 2)]
        );
        assert_eq!(enumerate_candidates(31, 1, None).unwrap().len(), 465);
        assert_eq!(enumerate_candidates(31, 3, None).unwrap().len(), 29 * 28 / 2);
    }

    #[test]
    fn empty_candidate_space() {
        assert!(matches!(
            enumerate_candidates(3, 3, None),
            Err(Error::EmptyCandidateSpace { .. })
        ));
        assert!(matches!(
            enumerate_candidates(1, 1, None),
            Err(Error::EmptyCandidateSpace { .. })
        ));
    }

    fn setup() -> (ModelProfile, NodeRates, Links) {
        let profile = ModelProfile::new(
            "p",
            vec![4_000_000, 1_000_000, 200_000, 50_000],
            vec![0.3, 0.3, 0.2, 0.1, 0.1],
        )
        .unwrap();
        let rates = NodeRates {
            sigma: PerTier::new(1.0, 0.25, 0.01),
            rho_fog: 15.0,
            rho_cloud: 30.0,
            p_edge: 12.0,
        };
        let l = LinkModel::new(0.002, 2e7).unwrap();
        (
            profile,
            rates,
            Links {
                edge_fog: l,
                fog_cloud: l,
            },
        )
    }

    #[test]
    fn deadline_can_filter_everything() {
        let (p, r, l) = setup();
        let mut sp = spec((0.7, 0.2, 0.1), (1.0, 1.0, 1.0));
        sp.deadline = 1e-6;
        assert!(find_best(&p, &r, &l, &sp, None).unwrap().is_none());
    }

    #[test]
    fn baseline_equal_score_survives() {
        let (p, r, l) = setup();
        let mut sp = spec((0.7, 0.2, 0.1), (1.0, 1.0, 1.0));
        let best = find_best(&p, &r, &l, &sp, None).unwrap().unwrap();
        sp.baseline_score = best.score;
        let again = find_best(&p, &r, &l, &sp, None).unwrap().unwrap();
        assert_eq!(again.split, best.split);
        sp.baseline_score = best.score - 1e-9;
        let rest = find_best(&p, &r, &l, &sp, None).unwrap();
        assert!(rest.is_none() || rest.unwrap().score <= sp.baseline_score);
    }

    #[test]
    fn never_returns_current() {
        let (p, r, l) = setup();
        let sp = spec((0.7, 0.2, 0.1), (1.0, 1.0, 1.0));
        let best = find_best(&p, &r, &l, &sp, None).unwrap().unwrap();
        let other = find_best(&p, &r, &l, &sp, Some(best.split)).unwrap().unwrap();
        assert_ne!(other.split, best.split);
        assert!(other.score >= best.score);
    }

    #[test]
    fn ties_go_to_smallest_split() {
        // only latency counts, and free links with identical node speeds make every split equal
        let profile = ModelProfile::new("p", vec![1, 1, 1], vec![0.25; 4]).unwrap();
        let rates = NodeRates {
            sigma: PerTier::new(1.0, 1.0, 1.0),
            rho_fog: 1.0,
            rho_cloud: 1.0,
            p_edge: 1.0,
        };
        let free = LinkModel::new(0.0, 1e18).unwrap();
        let links = Links {
            edge_fog: free,
            fog_cloud: free,
        };
        let sp = spec((0.0, 0.0, 1.0), (1.0, 1.0, 1.0));
        let best = find_best(&profile, &rates, &links, &sp, None).unwrap().unwrap();
        assert_eq!(best.split, Split::new(0, 1));
    }
}
