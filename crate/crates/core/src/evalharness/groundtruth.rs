use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::longtail::{Contributor, Sample};
use crate::ntk::{self, MlpSpec, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Fraction of test points with |f(x) − y| < 0.5.
    #[default]
    Accuracy,
    /// 1 − mean (f(x) − y)²/2.
    OneMinusLoss,
}

fn default_lr_scale() -> f64 {
    0.1
}
fn default_lr_cap() -> f64 {
    0.5
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_epochs() -> usize {
    5000
}
fn default_probe_cap() -> usize {
    256
}

/// Full-batch gradient descent settings for retraining.
///
/// Without an explicit `learning_rate` the step is
/// `min(lr_scale · m / λ_max(Θ₀), lr_cap)`, with `λ_max` estimated on at
/// most `probe_cap` evenly spaced training points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default = "default_lr_scale")]
    pub lr_scale: f64,
    #[serde(default = "default_lr_cap")]
    pub lr_cap: f64,
    /// Stop once the training loss changes by less than this between epochs.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_probe_cap")]
    pub probe_cap: usize,
    #[serde(default)]
    pub metric: Metric,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: None,
            lr_scale: default_lr_scale(),
            lr_cap: default_lr_cap(),
            tol: default_tol(),
            max_epochs: default_max_epochs(),
            probe_cap: default_probe_cap(),
            metric: Metric::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if let Some(lr) = self.learning_rate {
            if !positive(lr) {
                return Err(Error::domain("learning_rate must be positive and finite"));
            }
        }
        if !positive(self.lr_scale) || !positive(self.lr_cap) {
            return Err(Error::domain("lr_scale and lr_cap must be positive and finite"));
        }
        if !(self.tol >= 0.0) || self.max_epochs < 1 || self.probe_cap < 1 {
            return Err(Error::domain("need tol ≥ 0, max_epochs ≥ 1 and probe_cap ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub contributor_id: String,
    /// Test metric in [0, 1]; NaN when training diverged.
    pub test_metric: f64,
    pub train_loss: f64,
    pub epochs: usize,
    pub converged: bool,
    pub diverged: bool,
    pub learning_rate: f64,
    /// SHA-256 of the model and training configuration.
    pub config_digest: String,
}

fn config_digest(spec: &MlpSpec, hyper: &TrainingConfig) -> String {
    let json = serde_json::to_vec(&(spec, hyper)).expect("configs serialise");
    hex::encode(Sha256::digest(&json))
}

fn loss_and_gradient(model: &Model, data: &[&Sample]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; model.params.len()];
    let mut loss = 0.0;
    for s in data {
        let (f, g) = model.forward_with_gradient(&s.features)?;
        let r = f - s.label;
        loss += 0.5 * r * r;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += r * gi;
        }
    }
    let m = data.len() as f64;
    grad.iter_mut().for_each(|g| *g /= m);
    Ok((loss / m, grad))
}

fn learning_rate(model: &Model, data: &[&Sample], hyper: &TrainingConfig) -> Result<f64> {
    if let Some(lr) = hyper.learning_rate {
        return Ok(lr);
    }
    let m = data.len();
    let take = m.min(hyper.probe_cap);
    let probe: Vec<&[f64]> = (0..take).map(|i| data[i * m / take].features.as_slice()).collect();
    let lambda = ntk::ntk_gram(model, &probe)?.max_eigenvalue();
    if !(lambda > 0.0) {
        return Ok(hyper.lr_cap);
    }
    Ok((hyper.lr_scale * take as f64 / lambda).min(hyper.lr_cap))
}

fn test_metric(model: &Model, test: &[Sample], metric: Metric) -> Result<f64> {
    let mut acc = 0.0;
    for s in test {
        let r = model.forward(&s.features)? - s.label;
        acc += match metric {
            Metric::Accuracy => f64::from(u8::from(r.abs() < 0.5)),
            Metric::OneMinusLoss => 0.5 * r * r,
        };
    }
    let mean = acc / test.len() as f64;
    Ok(match metric {
        Metric::Accuracy => mean,
        Metric::OneMinusLoss => (1.0 - mean).clamp(0.0, 1.0),
    })
}

/// Retrains a fresh copy of the initial network on one contributor.
pub fn train_one(
    contributor: &Contributor,
    spec: &MlpSpec,
    hyper: &TrainingConfig,
    test: &[Sample],
) -> Result<GroundTruth> {
    hyper.validate()?;
    if test.is_empty() {
        return Err(Error::domain("test set is empty"));
    }
    let run = || -> Result<GroundTruth> {
        if contributor.is_empty() {
            return Err(Error::domain("contributor has no samples"));
        }
        let data: Vec<&Sample> = contributor.samples().collect();
        let mut model = Model::initialized(spec.clone())?;
        let lr = learning_rate(&model, &data, hyper)?;
        let mut prev: Option<f64> = None;
        let mut epochs = 0;
        let mut converged = false;
        let mut diverged = false;
        let mut loss = f64::NAN;
        while epochs < hyper.max_epochs {
            let (l, grad) = loss_and_gradient(&model, &data)?;
            loss = l;
            if !l.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                diverged = true;
                break;
            }
            if prev.is_some_and(|p| (p - l).abs() < hyper.tol) {
                converged = true;
                break;
            }
            prev = Some(l);
            for (p, g) in model.params.values.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
            epochs += 1;
        }
        let test_metric = if diverged {
            f64::NAN
        } else {
            test_metric(&model, test, hyper.metric)?
        };
        if !diverged && !test_metric.is_finite() {
            diverged = true;
        }
        Ok(GroundTruth {
            contributor_id: contributor.id.clone(),
            test_metric,
            train_loss: loss,
            epochs,
            converged,
            diverged,
            learning_rate: lr,
            config_digest: config_digest(spec, hyper),
        })
    };
    run().map_err(|e| e.for_contributor(&contributor.id))
}

/// Retrains one model per contributor, in parallel. Every run starts from the
/// same seeded initialisation, so results are deterministic.
pub fn train_ground_truth(
    contributors: &[Contributor],
    spec: &MlpSpec,
    hyper: &TrainingConfig,
    test: &[Sample],
) -> Result<Vec<GroundTruth>> {
    if contributors.is_empty() {
        return Err(Error::domain("no contributors"));
    }
    spec.validate()?;
    hyper.validate()?;
    contributors
        .par_iter()
        .map(|c| train_one(c, spec, hyper, test))
        .collect()
}
