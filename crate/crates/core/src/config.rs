//! JSON run configurations for the command-line subcommands.
//!
//! Unknown keys are rejected everywhere. Subcommands that draw random numbers
//! require an explicit `seed`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalharness::{TimingOptions, TrainingConfig};
use crate::longtail::{FeatureSpace, MixtureSpec, SyntheticShift, DEFAULT_SUPPORT_MAX};
use crate::mmd::Estimator;
use crate::ntk::MlpSpec;
use crate::scaling::{BreakpointOptions, PhaseConstants, ScalingParams};
use crate::valuation::{CoalitionWeighting, KernelBank, ValuationConfig, DEFAULT_FIT_RIDGE};

/// Implemented by every configuration type: checks that cannot be expressed
/// in the schema.
pub trait Validate {
    fn validate(&self) -> Result<()>;
}

/// Parses and validates a configuration. Syntax and schema errors are parse
/// errors; out-of-domain values are domain errors.
pub fn parse<T: DeserializeOwned + Validate>(bytes: &[u8]) -> Result<T> {
    let cfg: T = serde_json::from_slice(bytes)?;
    cfg.validate()?;
    Ok(cfg)
}

fn d_one() -> f64 {
    1.0
}
fn d_alpha() -> f64 {
    0.5
}
fn d_beta() -> f64 {
    1.5
}
fn d_k() -> usize {
    100
}
fn d_support() -> usize {
    DEFAULT_SUPPORT_MAX
}
fn d_pis() -> Vec<f64> {
    vec![0.1, 0.25, 0.5]
}
fn d_n_min() -> u64 {
    100
}
fn d_n_max() -> u64 {
    1_000_000
}
fn d_ppd() -> usize {
    20
}

/// `simulate`: exact expected-error curves over a grid of sample sizes, one
/// per real-data proportion π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "d_one")]
    pub a: f64,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_one")]
    pub b: f64,
    #[serde(default = "d_one")]
    pub lambda: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default = "d_support")]
    pub support_max: usize,
    #[serde(default = "d_pis")]
    pub pis: Vec<f64>,
    #[serde(default = "d_n_min")]
    pub n_min: u64,
    #[serde(default = "d_n_max")]
    pub n_max: u64,
    #[serde(default = "d_ppd")]
    pub points_per_decade: usize,
    #[serde(default)]
    pub phase_constants: PhaseConstants,
    #[serde(default)]
    pub breakpoints: BreakpointOptions,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl SimulateConfig {
    pub fn params(&self, pi: f64) -> ScalingParams {
        ScalingParams {
            a: self.a,
            alpha: self.alpha,
            b: self.b,
            lambda: self.lambda,
            beta: self.beta,
            k: self.k,
            pi,
            support_max: self.support_max,
        }
    }
}

impl Validate for SimulateConfig {
    fn validate(&self) -> Result<()> {
        if self.pis.is_empty() {
            return Err(Error::domain("`pis` must list at least one proportion"));
        }
        for &pi in &self.pis {
            self.params(pi).validate()?;
        }
        if self.n_min < 1 || self.n_max < self.n_min {
            return Err(Error::domain("need 1 ≤ n_min ≤ n_max"));
        }
        if self.points_per_decade < 1 {
            return Err(Error::domain("points_per_decade must be ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub real: usize,
    pub synth: usize,
}

fn d_noise() -> f64 {
    0.1
}

/// `generate`: synthetic contributor directory and test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub seed: u64,
    /// Seed of the prototypes and labels; defaults to one derived from
    /// `seed`. Sharing it across configs keeps the task fixed while the
    /// contributor draws change.
    #[serde(default)]
    pub feature_seed: Option<u64>,
    #[serde(default = "d_beta")]
    pub beta: f64,
    /// Synthetic cutoff k.
    #[serde(default = "d_k")]
    pub cutoff: usize,
    #[serde(default = "d_support")]
    pub support_max: usize,
    pub dim: usize,
    #[serde(default = "d_noise")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub shift: SyntheticShift,
    pub plan: Vec<PlanEntry>,
    pub test_size: usize,
}

impl GenerateConfig {
    /// Mixture used for sampling; π only labels the spec, each contributor's
    /// real/synthetic counts come from the plan.
    pub fn mixture(&self) -> Result<MixtureSpec> {
        MixtureSpec::new(1.0, self.beta, self.cutoff, self.support_max)
    }

    pub fn feature_space(&self) -> Result<FeatureSpace> {
        let seed = self
            .feature_seed
            .unwrap_or_else(|| crate::rng::child_seed(self.seed, "feature-space", 0));
        FeatureSpace::new(self.dim, self.noise_sigma, seed)
    }

    pub fn plan_pairs(&self) -> Vec<(usize, usize)> {
        self.plan.iter().map(|p| (p.real, p.synth)).collect()
    }
}

impl Validate for GenerateConfig {
    fn validate(&self) -> Result<()> {
        self.mixture()?;
        self.feature_space()?;
        self.shift.validate()?;
        if self.plan.is_empty() {
            return Err(Error::domain("`plan` must list at least one contributor"));
        }
        if self.plan.iter().any(|p| p.real + p.synth == 0) {
            return Err(Error::domain("every plan entry needs at least one sample"));
        }
        if self.test_size < 1 {
            return Err(Error::domain("test_size must be ≥ 1"));
        }
        Ok(())
    }
}

/// `discrepancy`: MK-MMD between two sample files. A median bank uses the
/// pooled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DiscrepancyConfig {
    #[serde(default)]
    pub kernel_bank: KernelBank,
    #[serde(default)]
    pub estimator: Estimator,
}

impl Validate for DiscrepancyConfig {
    fn validate(&self) -> Result<()> {
        match &self.kernel_bank {
            KernelBank::Fixed(spec) => spec.validate(),
            KernelBank::Median { multipliers } => {
                crate::mmd::MultiKernelSpec::scaled_bank(1.0, multipliers).map(|_| ())
            }
        }
    }
}

/// `gram`: empirical NTK at initialisation on a sample file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramConfig {
    pub model: MlpSpec,
    /// Ridge for the bound term; `None` uses 1e-6·trace/n.
    #[serde(default)]
    pub ridge: Option<f64>,
}

impl Validate for GramConfig {
    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if let Some(r) = self.ridge {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::domain("ridge must be finite and ≥ 0"));
            }
        }
        Ok(())
    }
}

fn d_fit_ridge() -> f64 {
    DEFAULT_FIT_RIDGE
}

/// Weight fitting after scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "d_fit_ridge")]
    pub ridge: f64,
}

/// `value`: per-contributor scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueConfig {
    pub model: MlpSpec,
    pub valuation: ValuationConfig,
    /// Refit w₁..w₄ by least squares and rescore. The target is the mean of
    /// the loss and discrepancy terms, or the ground-truth metric when one is
    /// supplied on the command line.
    #[serde(default)]
    pub fit: Option<FitConfig>,
}

impl Validate for ValueConfig {
    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.valuation.validate()?;
        if let Some(f) = self.fit {
            if !(f.ridge >= 0.0) || !f.ridge.is_finite() {
                return Err(Error::domain("fit ridge must be finite and ≥ 0"));
            }
        }
        Ok(())
    }
}

/// `marginal`: Shapley or leave-one-out values on pooled coalitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalConfig {
    pub model: MlpSpec,
    pub valuation: ValuationConfig,
    /// Exact Shapley unless set; the command line can override it.
    #[serde(default = "d_weighting")]
    pub weighting: CoalitionWeighting,
}

fn d_weighting() -> CoalitionWeighting {
    CoalitionWeighting::Shapley { permutations: None }
}

impl Validate for MarginalConfig {
    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.valuation.validate()?;
        if let CoalitionWeighting::Shapley { permutations: Some(0) } = self.weighting {
            return Err(Error::domain("permutations must be ≥ 1"));
        }
        Ok(())
    }
}

/// `groundtruth`: retrain one model per contributor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthConfig {
    pub model: MlpSpec,
    #[serde(default)]
    pub training: TrainingConfig,
}

impl Validate for GroundTruthConfig {
    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.training.validate()
    }
}

/// `bench`: valuation versus retraining wall-clock time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub model: MlpSpec,
    pub valuation: ValuationConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub timing: TimingOptions,
}

impl Validate for BenchConfig {
    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.valuation.validate()?;
        self.training.validate()?;
        if self.timing.timed_runs < 1 {
            return Err(Error::domain("timed_runs must be ≥ 1"));
        }
        Ok(())
    }
}
