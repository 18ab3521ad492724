//! Retraining-free valuation of data contributors.
//!
//! A dataset `S = S₁ ∪ S₂` (real and synthetic parts, real share π) is scored
//! against a test set `T` as
//!
//! ```text
//! v(S) = w₁ [π L_{S₁}(f) + (1−π) L_{S₂}(f)]
//!      + w₂ [π Dist(T, S₁) + (1−π) Dist(T, S₂)]
//!      + w₃ sqrt(ŷᵀ Θ₀⁻¹ ŷ / |S|)
//!      + w₄ sqrt(max(π, 1−π) / |S|)
//! ```
//!
//! with `f` and `Θ₀` the model and its empirical NTK at initialisation,
//! `ŷ = y − f(x; θ₀)` on `S`, and `Dist` the multi-kernel MMD.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::longtail::{Contributor, Sample};
use crate::mmd::{self, Estimator, MultiKernelSpec, DEFAULT_BANDWIDTH_MULTIPLIERS};
use crate::ntk::{self, Model};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
}

impl ValuationWeights {
    pub fn new(w1: f64, w2: f64, w3: f64, w4: f64) -> Result<Self> {
        let w = Self { w1, w2, w3, w4 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().all(|w| w.is_finite()) {
            Ok(())
        } else {
            Err(Error::domain("valuation weights must be finite"))
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w1, self.w2, self.w3, self.w4]
    }

    pub fn from_array(w: [f64; 4]) -> Self {
        Self {
            w1: w[0],
            w2: w[1],
            w3: w[2],
            w4: w[3],
        }
    }

    /// Empirical loss only.
    pub fn loss_only() -> Self {
        Self::from_array([1.0, 0.0, 0.0, 0.0])
    }
}

impl Default for ValuationWeights {
    fn default() -> Self {
        Self::from_array([1.0; 4])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationScore {
    pub contributor_id: String,
    pub loss_term: f64,
    pub discrepancy_term: f64,
    pub ntk_term: f64,
    pub composition_term: f64,
    pub total: f64,
    /// Largest per-example gradient norm B seen by the NTK term. Reported for
    /// diagnostics; it does not enter the score.
    pub gradient_norm_bound: f64,
    pub sample_count: usize,
    pub pi: f64,
}

impl ValuationScore {
    pub fn terms(&self) -> [f64; 4] {
        [
            self.loss_term,
            self.discrepancy_term,
            self.ntk_term,
            self.composition_term,
        ]
    }

    /// Rescores the same terms under other weights.
    pub fn reweighted(&self, weights: &ValuationWeights) -> Self {
        Self {
            total: combine(&self.terms(), weights),
            ..self.clone()
        }
    }
}

fn combine(terms: &[f64; 4], w: &ValuationWeights) -> f64 {
    terms.iter().zip(w.as_array()).map(|(t, w)| t * w).sum()
}

/// Where the kernel bank comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelBank {
    /// Bandwidths `m · median` over the test set for each multiplier.
    Median {
        multipliers: Vec<f64>,
    },
    Fixed(MultiKernelSpec),
}

impl Default for KernelBank {
    fn default() -> Self {
        KernelBank::Median {
            multipliers: DEFAULT_BANDWIDTH_MULTIPLIERS.to_vec(),
        }
    }
}

/// Representation the discrepancy is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureView {
    #[default]
    Raw,
    Penultimate,
}

fn default_ntk_cap() -> usize {
    512
}

fn default_median_cap() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationConfig {
    #[serde(default)]
    pub weights: ValuationWeights,
    #[serde(default)]
    pub kernel_bank: KernelBank,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub feature_view: FeatureView,
    /// Largest subsample the NTK Gram is built on.
    #[serde(default = "default_ntk_cap")]
    pub ntk_cap: usize,
    /// Cap on each contributor part entering the MMD; `None` keeps all.
    #[serde(default)]
    pub mmd_cap: Option<usize>,
    /// Cap on the test set entering the MMD; `None` keeps all.
    #[serde(default)]
    pub test_cap: Option<usize>,
    /// Points used for the median heuristic.
    #[serde(default = "default_median_cap")]
    pub median_cap: usize,
    /// Absolute ridge for the NTK solve; `None` uses 1e-6·trace/n.
    #[serde(default)]
    pub ridge: Option<f64>,
    pub seed: u64,
}

impl ValuationConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            weights: ValuationWeights::default(),
            kernel_bank: KernelBank::default(),
            estimator: Estimator::Biased,
            feature_view: FeatureView::Raw,
            ntk_cap: default_ntk_cap(),
            mmd_cap: None,
            test_cap: None,
            median_cap: default_median_cap(),
            ridge: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.ntk_cap < 1 || self.median_cap < 2 {
            return Err(Error::domain("ntk_cap must be ≥ 1 and median_cap ≥ 2"));
        }
        if self.mmd_cap == Some(0) || self.test_cap == Some(0) {
            return Err(Error::domain("sample caps must be ≥ 1"));
        }
        if let Some(r) = self.ridge {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::domain("ridge must be finite and ≥ 0"));
            }
        }
        if let KernelBank::Fixed(spec) = &self.kernel_bank {
            spec.validate()?;
        }
        Ok(())
    }
}

/// Mean of `(f(x) − y)²/2`.
pub fn empirical_loss<'a, I>(model: &Model, samples: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a Sample>,
{
    let mut total = 0.0;
    let mut count = 0usize;
    for s in samples {
        let f = model.forward(&s.features)?;
        total += 0.5 * (f - s.label) * (f - s.label);
        count += 1;
    }
    if count == 0 {
        return Err(Error::domain("empirical loss of an empty dataset"));
    }
    Ok(total / count as f64)
}

/// Keeps at most `cap` items, chosen uniformly without replacement and
/// returned in their original order.
fn subsample<T>(items: &[T], cap: Option<usize>, seed: u64) -> Vec<&T> {
    match cap {
        Some(cap) if items.len() > cap => {
            let mut rng = rng::stream(seed, 0);
            let mut picked = index::sample(&mut rng, items.len(), cap).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| &items[i]).collect()
        }
        _ => items.iter().collect(),
    }
}

/// Scores datasets against a fixed test set and model.
///
/// The kernel bank and the (capped) test representation are computed once so
/// that every contributor is measured with the same yardstick.
pub struct Valuator<'a> {
    model: &'a Model,
    config: ValuationConfig,
    bank: MultiKernelSpec,
    test_view: Vec<Vec<f64>>,
}

impl<'a> Valuator<'a> {
    pub fn new(model: &'a Model, test: &[Sample], config: ValuationConfig) -> Result<Self> {
        config.validate()?;
        if test.is_empty() {
            return Err(Error::domain("test set is empty"));
        }
        let test_sub = subsample(test, config.test_cap, rng::child_seed(config.seed, "test-subsample", 0));
        let test_view = test_sub
            .iter()
            .map(|s| view(model, config.feature_view, s))
            .collect::<Result<Vec<_>>>()?;
        let bank = match &config.kernel_bank {
            KernelBank::Fixed(spec) => spec.clone(),
            KernelBank::Median { multipliers } => {
                let pts = subsample(
                    &test_view,
                    Some(config.median_cap),
                    rng::child_seed(config.seed, "median", 0),
                );
                let pts: Vec<&[f64]> = pts.iter().map(|v| v.as_slice()).collect();
                let median = mmd::median_heuristic(&pts, &[])?;
                MultiKernelSpec::scaled_bank(median, multipliers)?
            }
        };
        Ok(Self {
            model,
            config,
            bank,
            test_view,
        })
    }

    pub fn kernel_bank(&self) -> &MultiKernelSpec {
        &self.bank
    }

    pub fn config(&self) -> &ValuationConfig {
        &self.config
    }

    fn discrepancy(&self, part: &[Sample], seed: u64) -> Result<f64> {
        let sub = subsample(part, self.config.mmd_cap, seed);
        let xs = sub
            .iter()
            .map(|s| view(self.model, self.config.feature_view, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(mmd::mmd(&self.test_view, &xs, &self.bank, self.config.estimator)?.value)
    }

    /// Scores one dataset with the configured weights.
    pub fn score(&self, contributor: &Contributor) -> Result<ValuationScore> {
        self.score_inner(contributor)
            .map_err(|e| e.for_contributor(&contributor.id))
    }

    fn score_inner(&self, c: &Contributor) -> Result<ValuationScore> {
        if c.is_empty() {
            return Err(Error::domain("contributor has no samples"));
        }
        let pi = c.pi();
        let seed = |name: &str| rng::child_seed(self.config.seed, &format!("{name}:{}", c.id), 0);

        let mut loss_term = 0.0;
        let mut discrepancy_term = 0.0;
        if !c.real_samples.is_empty() {
            loss_term += pi * empirical_loss(self.model, &c.real_samples)?;
            discrepancy_term += pi * self.discrepancy(&c.real_samples, seed("mmd-real"))?;
        }
        if !c.synth_samples.is_empty() {
            loss_term += (1.0 - pi) * empirical_loss(self.model, &c.synth_samples)?;
            discrepancy_term += (1.0 - pi) * self.discrepancy(&c.synth_samples, seed("mmd-synth"))?;
        }

        let all: Vec<&Sample> = c.samples().collect();
        let ntk_sub = subsample(&all, Some(self.config.ntk_cap), seed("ntk"));
        let xs: Vec<&[f64]> = ntk_sub.iter().map(|s| s.features.as_slice()).collect();
        let residuals = ntk_sub
            .iter()
            .map(|s| Ok(s.label - self.model.forward(&s.features)?))
            .collect::<Result<Vec<f64>>>()?;
        let gram = ntk::ntk_gram(self.model, &xs)?;
        let ridge = self.config.ridge.unwrap_or_else(|| gram.default_ridge());
        let ntk_term = ntk::bound_term(&gram, &residuals, ridge)?;

        let composition_term = (pi.max(1.0 - pi) / c.len() as f64).sqrt();
        let terms = [loss_term, discrepancy_term, ntk_term, composition_term];
        Ok(ValuationScore {
            contributor_id: c.id.clone(),
            loss_term,
            discrepancy_term,
            ntk_term,
            composition_term,
            total: combine(&terms, &self.config.weights),
            gradient_norm_bound: gram.gradient_norm_bound,
            sample_count: c.len(),
            pi,
        })
    }

    /// Scores every contributor independently; one failure does not stop the
    /// others.
    pub fn score_all(&self, contributors: &[Contributor]) -> Vec<Result<ValuationScore>> {
        contributors.par_iter().map(|c| self.score(c)).collect()
    }

    /// v of the pooled data of a coalition; v(∅) = 0.
    pub fn coalition_value(&self, contributors: &[Contributor], members: &[usize]) -> Result<f64> {
        if members.is_empty() {
            return Ok(0.0);
        }
        let id = members
            .iter()
            .map(|&i| contributors[i].id.as_str())
            .collect::<Vec<_>>()
            .join("+");
        let pooled = Contributor::pooled(id, members.iter().map(|&i| &contributors[i]))?;
        Ok(self.score(&pooled)?.total)
    }
}

fn view(model: &Model, v: FeatureView, s: &Sample) -> Result<Vec<f64>> {
    match v {
        FeatureView::Raw => Ok(s.features.clone()),
        FeatureView::Penultimate => model.penultimate(&s.features),
    }
}

/// Scores one contributor.
pub fn score(
    contributor: &Contributor,
    test: &[Sample],
    model: &Model,
    config: &ValuationConfig,
) -> Result<ValuationScore> {
    Valuator::new(model, test, config.clone())?.score(contributor)
}

/// Scores every contributor (one pass of the valuation loop).
pub fn score_all(
    contributors: &[Contributor],
    test: &[Sample],
    model: &Model,
    config: &ValuationConfig,
) -> Result<Vec<Result<ValuationScore>>> {
    if contributors.is_empty() {
        return Err(Error::domain("no contributors to score"));
    }
    Ok(Valuator::new(model, test, config.clone())?.score_all(contributors))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightFit {
    pub weights: ValuationWeights,
    pub residual_norm: f64,
    /// The term matrix was rank deficient; only the ridge kept the solve
    /// well-posed.
    pub rank_deficient: bool,
}

pub const DEFAULT_FIT_RIDGE: f64 = 1e-8;

/// Least-squares weights for `terms · w ≈ targets` with a small ridge.
pub fn fit_weights(terms: &[[f64; 4]], targets: &[f64], ridge: f64) -> Result<WeightFit> {
    let k = terms.len();
    if k < 2 {
        return Err(Error::domain("weight fitting needs at least two contributors"));
    }
    if targets.len() != k {
        return Err(Error::domain("term matrix and targets differ in length"));
    }
    if terms.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::domain("terms and targets must be finite"));
    }
    if !(ridge >= 0.0) {
        return Err(Error::domain("ridge must be ≥ 0"));
    }
    let a = DMatrix::from_fn(k, 4, |i, j| terms[i][j]);
    let t = DVector::from_column_slice(targets);
    let mut normal = a.transpose() * &a;
    let ev = SymmetricEigen::new(normal.clone()).eigenvalues;
    let rank_deficient = k < 4 || ev.min() <= 1e-12 * ev.max().max(f64::MIN_POSITIVE);
    for i in 0..4 {
        normal[(i, i)] += ridge;
    }
    let rhs = a.transpose() * &t;
    let w = Cholesky::new(normal)
        .ok_or_else(|| Error::numerical("weight normal equations are singular; increase the ridge"))?
        .solve(&rhs);
    let residual_norm = (&a * &w - &t).norm();
    Ok(WeightFit {
        weights: ValuationWeights::from_array([w[0], w[1], w[2], w[3]]),
        residual_norm,
        rank_deficient,
    })
}

/// Default fitting target: the mean of the loss and discrepancy terms.
pub fn loss_discrepancy_target(scores: &[ValuationScore]) -> Vec<f64> {
    scores
        .iter()
        .map(|s| 0.5 * (s.loss_term + s.discrepancy_term))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CoalitionWeighting {
    /// Shapley weights. `permutations: None` enumerates all coalitions
    /// (K ≤ 12); otherwise that many random permutations are sampled.
    Shapley { permutations: Option<usize> },
    /// Leave-one-out: only the grand coalition minus `i` has weight.
    Loo,
}

pub const MAX_EXACT_SHAPLEY: usize = 12;
const DEFAULT_PERMUTATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalReport {
    pub values: Vec<f64>,
    /// Standard errors of sampled Shapley estimates.
    pub std_errors: Option<Vec<f64>>,
    pub grand_value: f64,
    pub empty_value: f64,
}

type Coalition = u64;

fn members(mask: Coalition, k: usize) -> Vec<usize> {
    (0..k).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Evaluates `value` once per distinct coalition, in parallel.
fn evaluate_coalitions<F>(masks: BTreeSet<Coalition>, k: usize, value: &F) -> Result<HashMap<Coalition, f64>>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    let masks: Vec<Coalition> = masks.into_iter().collect();
    let vals = masks
        .par_iter()
        .map(|&m| if m == 0 { Ok(0.0) } else { value(&members(m, k)) })
        .collect::<Result<Vec<f64>>>()?;
    Ok(masks.into_iter().zip(vals).collect())
}

fn log_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Exact Shapley values of a `k`-player game with v(∅) = 0.
pub fn shapley_exact<F>(k: usize, value: F) -> Result<MarginalReport>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if !(1..=MAX_EXACT_SHAPLEY).contains(&k) {
        return Err(Error::domain(format!(
            "exact Shapley needs 1 ≤ K ≤ {MAX_EXACT_SHAPLEY}, got {k}"
        )));
    }
    let all: Coalition = (1 << k) - 1;
    let v = evaluate_coalitions((0..=all).collect(), k, &value)?;
    let lf_k = log_factorial(k);
    let values = (0..k)
        .map(|i| {
            let bit = 1 << i;
            (0..=all)
                .filter(|m| m & bit == 0)
                .map(|m| {
                    let size = (m as Coalition).count_ones() as usize;
                    let w = (log_factorial(size) + log_factorial(k - size - 1) - lf_k).exp();
                    w * (v[&(m | bit)] - v[&m])
                })
                .sum()
        })
        .collect();
    Ok(MarginalReport {
        values,
        std_errors: None,
        grand_value: v[&all],
        empty_value: 0.0,
    })
}

/// Permutation-sampled Shapley values with per-player standard errors.
pub fn shapley_sampled<F>(k: usize, permutations: usize, seed: u64, value: F) -> Result<MarginalReport>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if !(1..=63).contains(&k) {
        return Err(Error::domain(format!("sampled Shapley supports 1 ≤ K ≤ 63, got {k}")));
    }
    if permutations < 1 {
        return Err(Error::domain("at least one permutation is required"));
    }
    let orders: Vec<Vec<usize>> = (0..permutations)
        .map(|p| {
            let mut order: Vec<usize> = (0..k).collect();
            order.shuffle(&mut rng::stream(rng::child_seed(seed, "permutation", p as u64), 0));
            order
        })
        .collect();
    let mut needed = BTreeSet::new();
    for order in &orders {
        let mut m: Coalition = 0;
        needed.insert(m);
        for &i in order {
            m |= 1 << i;
            needed.insert(m);
        }
    }
    let all: Coalition = (1 << k) - 1;
    let v = evaluate_coalitions(needed, k, &value)?;
    let mut sums = vec![0.0; k];
    let mut sq = vec![0.0; k];
    for order in &orders {
        let mut m: Coalition = 0;
        for &i in order {
            let next = m | 1 << i;
            let d = v[&next] - v[&m];
            sums[i] += d;
            sq[i] += d * d;
            m = next;
        }
    }
    let n = permutations as f64;
    let values: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let std_errors = sums
        .iter()
        .zip(&sq)
        .map(|(s, q)| {
            if permutations < 2 {
                f64::NAN
            } else {
                let mean = s / n;
                let var = ((q - n * mean * mean) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            }
        })
        .collect();
    Ok(MarginalReport {
        values,
        std_errors: Some(std_errors),
        grand_value: v[&all],
        empty_value: 0.0,
    })
}

/// Leave-one-out values `v(all) − v(all \ {i})`.
pub fn leave_one_out<F>(k: usize, value: F) -> Result<MarginalReport>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if !(1..=63).contains(&k) {
        return Err(Error::domain(format!("leave-one-out supports 1 ≤ K ≤ 63, got {k}")));
    }
    let all: Coalition = (1 << k) - 1;
    let masks: BTreeSet<Coalition> = std::iter::once(all).chain((0..k).map(|i| all & !(1 << i))).collect();
    let v = evaluate_coalitions(masks, k, &value)?;
    Ok(MarginalReport {
        values: (0..k).map(|i| v[&all] - v[&(all & !(1 << i))]).collect(),
        std_errors: None,
        grand_value: v[&all],
        empty_value: 0.0,
    })
}

/// Marginal-contribution values of each contributor under `weighting`, with
/// the coalition value computed on pooled data.
pub fn marginal_values(
    contributors: &[Contributor],
    weighting: CoalitionWeighting,
    valuator: &Valuator<'_>,
) -> Result<MarginalReport> {
    let k = contributors.len();
    if k < 1 {
        return Err(Error::domain("no contributors"));
    }
    let value = |m: &[usize]| valuator.coalition_value(contributors, m);
    match weighting {
        CoalitionWeighting::Loo => leave_one_out(k, value),
        CoalitionWeighting::Shapley { permutations: None } if k <= MAX_EXACT_SHAPLEY => shapley_exact(k, value),
        CoalitionWeighting::Shapley { permutations } => shapley_sampled(
            k,
            permutations.unwrap_or(DEFAULT_PERMUTATIONS),
            rng::child_seed(valuator.config.seed, "shapley", 0),
            value,
        ),
    }
}
