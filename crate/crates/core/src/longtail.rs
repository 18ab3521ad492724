//! Long-tail knowledge distributions and synthetic contributor datasets.
//!
//! Knowledge indices are 1-based. The real distribution is a power law
//! `p_i ∝ i^(−β)` truncated at `support_max` and renormalised; the synthetic
//! distribution follows the same law up to a cutoff `k` and is zero beyond
//! it. Training data is drawn from the mixture `q_i = π·p_i + (1−π)·p′_i`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::csum;
use crate::rng;

pub const DEFAULT_SUPPORT_MAX: usize = 10_000;

/// Real-data power law `p_i ∝ i^(−β)` on `1..=support_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLawSpec {
    pub beta: f64,
    #[serde(default = "default_support_max")]
    pub support_max: usize,
}

/// Synthetic-data power law, identical to the real one up to `cutoff` and
/// zero afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedPowerLawSpec {
    pub beta: f64,
    pub cutoff: usize,
    #[serde(default = "default_support_max")]
    pub support_max: usize,
}

/// The π-mixture of a real and a synthetic distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub pi: f64,
    pub real_dist: PowerLawSpec,
    pub synth_dist: TruncatedPowerLawSpec,
}

fn default_support_max() -> usize {
    DEFAULT_SUPPORT_MAX
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 1.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("power-law exponent must be > 1, got {beta}")))
    }
}

/// Σ_{i=1}^{n} i^(−β), summed from the smallest term.
fn power_sum(beta: f64, n: usize) -> f64 {
    csum((1..=n).rev().map(|i| (i as f64).powf(-beta)))
}

impl PowerLawSpec {
    pub fn new(beta: f64, support_max: usize) -> Result<Self> {
        let spec = Self { beta, support_max };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if self.support_max < 1 {
            return Err(Error::domain("support_max must be ≥ 1"));
        }
        Ok(())
    }
}

impl TruncatedPowerLawSpec {
    pub fn new(beta: f64, cutoff: usize, support_max: usize) -> Result<Self> {
        let spec = Self {
            beta,
            cutoff,
            support_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if self.cutoff < 1 {
            return Err(Error::domain("cutoff must be ≥ 1"));
        }
        if self.support_max < self.cutoff {
            return Err(Error::domain(format!(
                "support_max ({}) must be ≥ cutoff ({})",
                self.support_max, self.cutoff
            )));
        }
        Ok(())
    }
}

impl MixtureSpec {
    /// Mixture with shared exponent and support. `cutoff` is clamped to the
    /// support.
    pub fn new(pi: f64, beta: f64, cutoff: usize, support_max: usize) -> Result<Self> {
        let spec = Self {
            pi,
            real_dist: PowerLawSpec::new(beta, support_max)?,
            synth_dist: TruncatedPowerLawSpec::new(beta, cutoff.min(support_max), support_max)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(Error::domain(format!(
                "mixing proportion must lie in [0, 1], got {}",
                self.pi
            )));
        }
        self.real_dist.validate()?;
        self.synth_dist.validate()?;
        if self.real_dist.beta != self.synth_dist.beta {
            return Err(Error::domain("real and synthetic exponents must match"));
        }
        if self.real_dist.support_max != self.synth_dist.support_max {
            return Err(Error::domain("real and synthetic supports must match"));
        }
        Ok(())
    }
}

/// A distribution over knowledge indices `1..=support_max`.
pub trait KnowledgeDistribution {
    fn support_max(&self) -> usize;

    /// Probability vector; entry `j` is the mass of index `j + 1`.
    fn pmf_vec(&self) -> Vec<f64>;

    fn pmf(&self, i: usize) -> Result<f64> {
        if i < 1 || i > self.support_max() {
            return Err(Error::domain(format!(
                "knowledge index {i} outside support 1..={}",
                self.support_max()
            )));
        }
        Ok(self.pmf_vec()[i - 1])
    }
}

impl KnowledgeDistribution for PowerLawSpec {
    fn support_max(&self) -> usize {
        self.support_max
    }

    fn pmf_vec(&self) -> Vec<f64> {
        let z = power_sum(self.beta, self.support_max);
        (1..=self.support_max)
            .map(|i| (i as f64).powf(-self.beta) / z)
            .collect()
    }

    fn pmf(&self, i: usize) -> Result<f64> {
        if i < 1 || i > self.support_max {
            return Err(Error::domain(format!(
                "knowledge index {i} outside support 1..={}",
                self.support_max
            )));
        }
        Ok((i as f64).powf(-self.beta) / power_sum(self.beta, self.support_max))
    }
}

impl KnowledgeDistribution for TruncatedPowerLawSpec {
    fn support_max(&self) -> usize {
        self.support_max
    }

    fn pmf_vec(&self) -> Vec<f64> {
        let z = power_sum(self.beta, self.cutoff);
        (1..=self.support_max)
            .map(|i| {
                if i <= self.cutoff {
                    (i as f64).powf(-self.beta) / z
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn pmf(&self, i: usize) -> Result<f64> {
        if i < 1 || i > self.support_max {
            return Err(Error::domain(format!(
                "knowledge index {i} outside support 1..={}",
                self.support_max
            )));
        }
        if i > self.cutoff {
            return Ok(0.0);
        }
        Ok((i as f64).powf(-self.beta) / power_sum(self.beta, self.cutoff))
    }
}

impl KnowledgeDistribution for MixtureSpec {
    fn support_max(&self) -> usize {
        self.real_dist.support_max
    }

    fn pmf_vec(&self) -> Vec<f64> {
        let p = self.real_dist.pmf_vec();
        let pp = self.synth_dist.pmf_vec();
        p.iter()
            .zip(&pp)
            .map(|(a, b)| self.pi * a + (1.0 - self.pi) * b)
            .collect()
    }
}

/// Inverse-CDF sampler over a precomputed cumulative table.
#[derive(Debug, Clone)]
pub struct IndexSampler {
    cdf: Vec<f64>,
}

impl IndexSampler {
    pub fn new<D: KnowledgeDistribution + ?Sized>(dist: &D) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = dist
            .pmf_vec()
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // Pin the last non-empty bin to exactly 1 so every u < 1 lands in
        // the support.
        if let Some(last) = cdf.iter().rposition(|&c| c > 0.0) {
            let total = cdf[last];
            for c in cdf.iter_mut() {
                *c = (*c / total).min(1.0);
            }
            for c in cdf.iter_mut().skip(last) {
                *c = 1.0;
            }
        }
        Self { cdf }
    }

    /// One draw, returned as a 1-based knowledge index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u) + 1
    }
}

/// `n` i.i.d. knowledge indices from the mixture.
pub fn sample_knowledge(mix: &MixtureSpec, n: usize, seed: u64) -> Result<Vec<usize>> {
    mix.validate()?;
    if n < 1 {
        return Err(Error::domain("sample count must be ≥ 1"));
    }
    let sampler = IndexSampler::new(mix);
    let mut rng = rng::named(seed, "knowledge");
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}

/// One labelled example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Knowledge index that generated the sample, when known.
    pub knowledge: Option<usize>,
    pub features: Vec<f64>,
    pub label: f64,
}

/// A contributor's dataset: real samples `S₁` and synthetic samples `S₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Contributor {
    pub id: String,
    pub real_samples: Vec<Sample>,
    pub synth_samples: Vec<Sample>,
}

impl Contributor {
    pub fn new(id: impl Into<String>, real_samples: Vec<Sample>, synth_samples: Vec<Sample>) -> Result<Self> {
        let c = Self {
            id: id.into(),
            real_samples,
            synth_samples,
        };
        if c.is_empty() {
            return Err(Error::domain(format!("contributor `{}` has no samples", c.id)));
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.real_samples.len() + self.synth_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Proportion of real samples.
    pub fn pi(&self) -> f64 {
        self.real_samples.len() as f64 / self.len() as f64
    }

    /// All samples, real first.
    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.real_samples.iter().chain(self.synth_samples.iter())
    }

    /// Pools several contributors into one dataset (a coalition).
    pub fn pooled<'a, I>(id: impl Into<String>, parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Contributor>,
    {
        let mut real = Vec::new();
        let mut synth = Vec::new();
        for c in parts {
            real.extend(c.real_samples.iter().cloned());
            synth.extend(c.synth_samples.iter().cloned());
        }
        Contributor::new(id, real, synth)
    }
}

/// How features and labels are attached to knowledge indices.
///
/// Each index `i` owns a unit-norm prototype `μ_i`; a sample is
/// `normalize(μ_i + σ·z)` with `z` standard normal. Labels are a fixed bit per
/// index. Prototypes and labels depend only on `seed`, so contributors and
/// test sets generated from the same space share them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpace {
    pub dim: usize,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    pub seed: u64,
}

fn default_noise_sigma() -> f64 {
    0.1
}

/// Optional corruption applied to synthetic samples only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticShift {
    /// Magnitude of a fixed offset added before normalisation.
    #[serde(default)]
    pub feature_shift: f64,
    /// Probability of flipping a synthetic label.
    #[serde(default)]
    pub label_flip: f64,
}

impl SyntheticShift {
    pub fn validate(&self) -> Result<()> {
        if !self.feature_shift.is_finite() || self.feature_shift < 0.0 {
            return Err(Error::domain("feature_shift must be finite and ≥ 0"));
        }
        if !(0.0..=1.0).contains(&self.label_flip) {
            return Err(Error::domain("label_flip must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

impl FeatureSpace {
    pub fn new(dim: usize, noise_sigma: f64, seed: u64) -> Result<Self> {
        let s = Self { dim, noise_sigma, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::domain("feature dimension must be ≥ 1"));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::domain("noise_sigma must be finite and ≥ 0"));
        }
        Ok(())
    }

    /// Unit-norm prototype of knowledge index `i`.
    pub fn prototype(&self, i: usize) -> Vec<f64> {
        let mut rng = rng::stream(rng::child_seed(self.seed, "prototype", 0), i as u64);
        loop {
            let mut v = standard_normal_vec(&mut rng, self.dim);
            if v.iter().any(|&x| x != 0.0) {
                normalize(&mut v);
                return v;
            }
        }
    }

    /// Label bit of knowledge index `i`.
    pub fn label(&self, i: usize) -> f64 {
        let mut rng = rng::stream(rng::child_seed(self.seed, "label", 0), i as u64);
        if rng.random::<bool>() {
            1.0
        } else {
            0.0
        }
    }

    fn shift_direction(&self) -> Vec<f64> {
        let mut rng = rng::named(self.seed, "shift-direction");
        let mut v = standard_normal_vec(&mut rng, self.dim);
        normalize(&mut v);
        v
    }

    /// Draws one sample of knowledge `i`, optionally corrupted by `shift`.
    pub fn draw(&self, i: usize, shift: Option<&SyntheticShift>, rng: &mut ChaCha8Rng) -> Sample {
        let mut x = self.prototype(i);
        for v in x.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += self.noise_sigma * z;
        }
        let mut label = self.label(i);
        if let Some(shift) = shift {
            if shift.feature_shift > 0.0 {
                for (v, d) in x.iter_mut().zip(self.shift_direction()) {
                    *v += shift.feature_shift * d;
                }
            }
            if shift.label_flip > 0.0 && rng.random::<f64>() < shift.label_flip {
                label = 1.0 - label;
            }
        }
        normalize(&mut x);
        Sample {
            knowledge: Some(i),
            features: x,
            label,
        }
    }
}

/// Builds one contributor per `(real_count, synth_count)` entry of `plan`.
///
/// Real samples follow the mixture's real distribution, synthetic samples
/// its truncated one. Contributor `j` (0-based) is named `S{j+1:02}` and
/// draws from its own seed stream.
pub fn make_contributors(
    plan: &[(usize, usize)],
    mix: &MixtureSpec,
    space: &FeatureSpace,
    shift: &SyntheticShift,
    seed: u64,
) -> Result<Vec<Contributor>> {
    if plan.is_empty() {
        return Err(Error::domain("contributor plan is empty"));
    }
    mix.validate()?;
    space.validate()?;
    shift.validate()?;
    let real = IndexSampler::new(&mix.real_dist);
    let synth = IndexSampler::new(&mix.synth_dist);
    plan.iter()
        .enumerate()
        .map(|(j, &(n_real, n_synth))| {
            let id = format!("S{:02}", j + 1);
            let mut rng = rng::stream(rng::child_seed(seed, "contributor", j as u64), 0);
            let real_samples = (0..n_real)
                .map(|_| {
                    let i = real.sample(&mut rng);
                    space.draw(i, None, &mut rng)
                })
                .collect();
            let synth_samples = (0..n_synth)
                .map(|_| {
                    let i = synth.sample(&mut rng);
                    space.draw(i, Some(shift), &mut rng)
                })
                .collect();
            Contributor::new(id, real_samples, synth_samples)
        })
        .collect()
}

/// `n` clean samples from the real distribution.
pub fn make_test_set(real: &PowerLawSpec, n: usize, space: &FeatureSpace, seed: u64) -> Result<Vec<Sample>> {
    real.validate()?;
    space.validate()?;
    if n < 1 {
        return Err(Error::domain("test set size must be ≥ 1"));
    }
    let sampler = IndexSampler::new(real);
    let mut rng = rng::named(seed, "test-set");
    Ok((0..n)
        .map(|_| {
            let i = sampler.sample(&mut rng);
            space.draw(i, None, &mut rng)
        })
        .collect())
}
