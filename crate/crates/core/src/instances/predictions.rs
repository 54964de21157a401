use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BipartiteInstance, GraphInstance, SecretaryInstance};
use crate::error::{Error, Result};
use crate::oracles::{secretary_opt, Matching};
use crate::rng::trial_rng;

/// Predicted values `p*` together with their true error against the
/// instance they were generated for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionVector {
    pub values: Vec<f64>,
    pub declared_eta: f64,
}

impl PredictionVector {
    /// Recomputes `max_i |p*_i - target_i|`.
    pub fn error_against(&self, targets: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(targets)
            .map(|(p, t)| (p - t).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Exact,
    /// Every prediction is `target + magnitude`.
    ConstantShift,
    /// Independent `U(-magnitude, magnitude)` noise per target.
    UniformNoise,
    /// Each prediction is off by exactly `magnitude`, with a random sign.
    AdversarialSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub kind: ErrorKind,
    pub magnitude: f64,
    pub seed: u64,
}

impl ErrorModel {
    pub fn exact() -> Self {
        ErrorModel {
            kind: ErrorKind::Exact,
            magnitude: 0.0,
            seed: 0,
        }
    }

    pub fn new(kind: ErrorKind, magnitude: f64, seed: u64) -> Self {
        ErrorModel {
            kind,
            magnitude,
            seed,
        }
    }

    /// Perturbs `targets`. Values that would turn negative are clamped at 0
    /// and the declared error is measured after clamping.
    pub fn apply(&self, targets: &[f64]) -> Result<PredictionVector> {
        if !self.magnitude.is_finite() || self.magnitude < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "error magnitude {} must be finite and nonnegative",
                self.magnitude
            )));
        }
        let eta = self.magnitude;
        let mut rng = trial_rng(self.seed, 0x7072_6564, 0);
        let values: Vec<f64> = targets
            .iter()
            .map(|&t| match self.kind {
                ErrorKind::Exact => t,
                ErrorKind::ConstantShift => t + eta,
                ErrorKind::UniformNoise => {
                    let noise = if eta > 0.0 { rng.random_range(-eta..=eta) } else { 0.0 };
                    (t + noise).max(0.0)
                }
                ErrorKind::AdversarialSign => {
                    // A downward shift below zero is flipped so the error stays exactly eta.
                    if rng.random::<bool>() && t - eta >= 0.0 {
                        t - eta
                    } else {
                        t + eta
                    }
                }
            })
            .collect();
        let mut prediction = PredictionVector {
            values,
            declared_eta: 0.0,
        };
        prediction.declared_eta = prediction.error_against(targets);
        Ok(prediction)
    }
}

/// What a prediction vector predicts.
#[derive(Debug, Clone, Copy)]
pub enum PredictionTarget<'a> {
    /// The single value `max_i v_i`.
    Secretary(&'a SecretaryInstance),
    /// `w(psi_r)` per original right node for the given optimal matching `psi`.
    Bipartite(&'a BipartiteInstance, &'a Matching),
    /// `w_max(v)` per vertex.
    Graphic(&'a GraphInstance),
}

impl PredictionTarget<'_> {
    pub fn targets(&self) -> Vec<f64> {
        match self {
            PredictionTarget::Secretary(inst) => vec![secretary_opt(inst).0],
            PredictionTarget::Bipartite(inst, psi) => bipartite_targets(inst, psi),
            PredictionTarget::Graphic(graph) => graphic_targets(graph),
        }
    }
}

/// Edge weight at each original right node in `psi` (0 when unmatched).
pub fn bipartite_targets(instance: &BipartiteInstance, psi: &Matching) -> Vec<f64> {
    let mut targets = vec![0.0; instance.original_right_count()];
    for &(l, r) in &psi.pairs {
        if !instance.is_dummy(r) {
            targets[r] = instance.weight(l, r).unwrap_or(0.0);
        }
    }
    targets
}

pub fn graphic_targets(graph: &GraphInstance) -> Vec<f64> {
    graph.max_incident_weights()
}

/// Predictions for `target` under `model`. For bipartite instances the
/// declared error is measured against the supplied optimal matching, which
/// upper-bounds the minimum over all optimal matchings.
pub fn make_predictions(target: PredictionTarget<'_>, model: &ErrorModel) -> Result<PredictionVector> {
    model.apply(&target.targets())
}
