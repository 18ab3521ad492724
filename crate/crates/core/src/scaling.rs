//! Expected test error of a model trained on a real/synthetic mixture, as a
//! function of the training-set size.
//!
//! The exact value is the finite sum
//!
//! ```text
//! E(n) = Σ_i p_i [ (1 − u_i)(1 − ρ(i)) + u_i (1 − γ(i)) ],   u_i = (1 − q_i)^n
//! ```
//!
//! where `ρ(i) = a·i^(−α)` is the accuracy on knowledge seen in training and
//! `γ(i) = b·i^(−λ)` the accuracy on unseen knowledge. The curve has two
//! breakpoints, at `k^β` (head knowledge saturates) and `k^β/π` (tail
//! knowledge starts to appear through the real share of the data).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::longtail::{KnowledgeDistribution, MixtureSpec, DEFAULT_SUPPORT_MAX};
use crate::numeric::{csum, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingParams {
    pub a: f64,
    pub alpha: f64,
    pub b: f64,
    pub lambda: f64,
    pub beta: f64,
    pub k: usize,
    pub pi: f64,
    #[serde(default = "default_support")]
    pub support_max: usize,
}

fn default_support() -> usize {
    DEFAULT_SUPPORT_MAX
}

/// Absolute constants placing the phase boundaries at `c1·k^β` and
/// `c2·k^β/π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConstants {
    pub c1: f64,
    pub c2: f64,
}

impl Default for PhaseConstants {
    fn default() -> Self {
        Self { c1: 1.0, c2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    RapidLearning,
    Plateau,
    TailLearning,
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::RapidLearning => "rapid",
            Phase::Plateau => "plateau",
            Phase::TailLearning => "tail",
        }
    }
}

impl ScalingParams {
    /// Parameters of the mixture-ratio simulation: β = 1.5, k = 100,
    /// ρ(i) = i^(−0.5), γ(i) = i^(−1).
    pub fn reference(pi: f64) -> Self {
        Self {
            a: 1.0,
            alpha: 0.5,
            b: 1.0,
            lambda: 1.0,
            beta: 1.5,
            k: 100,
            pi,
            support_max: DEFAULT_SUPPORT_MAX,
        }
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.a * (i as f64).powf(-self.alpha)
    }

    pub fn gamma(&self, i: usize) -> f64 {
        self.b * (i as f64).powf(-self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.alpha, self.b, self.lambda, self.beta, self.pi]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain("scaling parameters must be finite"));
        }
        if !(self.a > 0.0) {
            return Err(Error::domain("a must be > 0"));
        }
        if self.alpha < 0.0 || self.b < 0.0 || self.lambda < 0.0 {
            return Err(Error::domain("alpha, b and lambda must be ≥ 0"));
        }
        if !(self.beta > 1.0) {
            return Err(Error::domain("beta must be > 1"));
        }
        if self.k < 1 || self.support_max < 1 {
            return Err(Error::domain("k and support_max must be ≥ 1"));
        }
        if !(self.pi > 0.0 && self.pi <= 1.0) {
            return Err(Error::domain(format!("pi must lie in (0, 1], got {}", self.pi)));
        }
        // ρ and γ are non-increasing in i, so the range check is at i = 1.
        if self.a > 1.0 || self.b > 1.0 {
            return Err(Error::domain("ρ(i) and γ(i) must stay within [0, 1]"));
        }
        if let Some(i) = (1..=self.support_max).find(|&i| self.gamma(i) > self.rho(i)) {
            return Err(Error::domain(format!(
                "γ({i}) exceeds ρ({i}); unseen knowledge cannot beat seen knowledge"
            )));
        }
        Ok(())
    }

    /// The knowledge mixture these parameters describe. A cutoff beyond the
    /// support is clamped to it.
    pub fn mixture(&self) -> Result<MixtureSpec> {
        MixtureSpec::new(self.pi, self.beta, self.k, self.support_max)
    }

    pub fn predicted_first(&self) -> f64 {
        (self.k as f64).powf(self.beta)
    }

    pub fn predicted_second(&self) -> f64 {
        self.predicted_first() / self.pi
    }

    pub fn phase(&self, n: f64, consts: &PhaseConstants) -> Phase {
        if n <= consts.c1 * self.predicted_first() {
            Phase::RapidLearning
        } else if n >= consts.c2 * self.predicted_second() {
            Phase::TailLearning
        } else {
            Phase::Plateau
        }
    }

    /// Exponent `(1 − α − β)/β` of the seen-knowledge term.
    pub fn rho_exponent(&self) -> f64 {
        (1.0 - self.alpha - self.beta) / self.beta
    }

    /// Exponent `(1 − λ − β)/β` of the unseen-knowledge term.
    pub fn gamma_exponent(&self) -> f64 {
        (1.0 - self.lambda - self.beta) / self.beta
    }

    /// `lim_{n→∞} E(n) = Σ_i p_i (1 − ρ(i))`.
    pub fn irreducible_error(&self) -> Result<f64> {
        Ok(ErrorModel::new(self)?.irreducible)
    }
}

/// The exact error split into its n-independent part and the two
/// unseen-knowledge masses that decay with n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBreakdown {
    /// `Σ p_i (1 − ρ(i))`.
    pub irreducible: f64,
    /// `Σ p_i ρ(i) u_i`.
    pub unseen_rho: f64,
    /// `Σ p_i γ(i) u_i`.
    pub unseen_gamma: f64,
}

impl ErrorBreakdown {
    pub fn total(&self) -> f64 {
        self.irreducible + self.unseen_rho - self.unseen_gamma
    }

    /// Error above the `n → ∞` limit.
    pub fn reducible(&self) -> f64 {
        self.unseen_rho - self.unseen_gamma
    }
}

/// Precomputed per-index tables for repeated evaluation.
#[derive(Debug, Clone)]
pub struct ErrorModel {
    p: Vec<f64>,
    log1m_q: Vec<f64>,
    p_rho: Vec<f64>,
    p_gamma: Vec<f64>,
    irreducible: f64,
}

impl ErrorModel {
    pub fn new(params: &ScalingParams) -> Result<Self> {
        params.validate()?;
        let mix = params.mixture()?;
        let p = mix.real_dist.pmf_vec();
        let q = mix.pmf_vec();
        let log1m_q = q.iter().map(|&qi| (-qi).ln_1p()).collect();
        let p_rho: Vec<f64> = p.iter().enumerate().map(|(j, pi)| pi * params.rho(j + 1)).collect();
        let p_gamma = p.iter().enumerate().map(|(j, pi)| pi * params.gamma(j + 1)).collect();
        let irreducible = csum(p.iter().zip(&p_rho).map(|(pi, pr)| pi - pr));
        Ok(Self {
            p,
            log1m_q,
            p_rho,
            p_gamma,
            irreducible,
        })
    }

    pub fn breakdown(&self, n: u64) -> ErrorBreakdown {
        let mut rho = CompensatedSum::new();
        let mut gamma = CompensatedSum::new();
        let nf = n as f64;
        // Smallest terms first.
        for j in (0..self.p.len()).rev() {
            let u = unseen_probability(self.log1m_q[j], n, nf);
            if u == 0.0 {
                continue;
            }
            rho.add(self.p_rho[j] * u);
            gamma.add(self.p_gamma[j] * u);
        }
        ErrorBreakdown {
            irreducible: self.irreducible,
            unseen_rho: rho.value(),
            unseen_gamma: gamma.value(),
        }
    }

    pub fn error(&self, n: u64) -> f64 {
        self.breakdown(n).total()
    }
}

/// `(1 − q)^n` evaluated as `exp(n·log1p(−q))`.
fn unseen_probability(log1m_q: f64, n: u64, nf: f64) -> f64 {
    if n == 0 {
        1.0
    } else if log1m_q == f64::NEG_INFINITY {
        0.0
    } else {
        (nf * log1m_q).exp()
    }
}

/// Exact expected test error after `n` training samples.
pub fn expected_test_error_exact(params: &ScalingParams, n: u64) -> Result<f64> {
    Ok(ErrorModel::new(params)?.error(n))
}

/// A closed-form phase expression, split into its n-dependent and constant
/// parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseValue {
    pub varying: f64,
    pub constant: f64,
}

impl PhaseValue {
    pub fn value(&self) -> f64 {
        self.varying + self.constant
    }
}

/// Asymptotic expression of the rapid-learning (1) or tail-learning (3)
/// phase. The plateau has no closed form.
pub fn phase_closed_form(params: &ScalingParams, n: u64, phase: Phase, consts: &PhaseConstants) -> Result<PhaseValue> {
    params.validate()?;
    if n < 1 {
        return Err(Error::domain("closed forms need n ≥ 1"));
    }
    let nf = n as f64;
    let k = params.k as f64;
    let (ea, eb) = (params.rho_exponent(), params.gamma_exponent());
    let tail_floor = k.powf(1.0 - params.beta);
    match phase {
        Phase::RapidLearning => {
            if nf > consts.c1 * params.predicted_first() {
                return Err(Error::domain(format!(
                    "n = {n} is past the rapid-learning regime (n ≤ {})",
                    consts.c1 * params.predicted_first()
                )));
            }
            Ok(PhaseValue {
                varying: params.a * nf.powf(ea) - params.b * nf.powf(eb),
                constant: params.a * k.powf(1.0 - params.alpha - params.beta)
                    - params.b * k.powf(1.0 - params.lambda - params.beta)
                    + tail_floor,
            })
        }
        Phase::TailLearning => {
            if nf < consts.c2 * params.predicted_second() {
                return Err(Error::domain(format!(
                    "n = {n} is before the tail-learning regime (n ≥ {})",
                    consts.c2 * params.predicted_second()
                )));
            }
            let m = params.pi * nf;
            Ok(PhaseValue {
                varying: params.a * m.powf(ea) - params.b * m.powf(eb),
                constant: tail_floor,
            })
        }
        Phase::Plateau => Err(Error::domain("the plateau phase has no closed form")),
    }
}

/// Error as a function of training-set size.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCurve {
    pub sample_sizes: Vec<u64>,
    pub errors: Vec<f64>,
    pub params: ScalingParams,
}

impl PhaseCurve {
    pub fn new(sample_sizes: Vec<u64>, errors: Vec<f64>, params: ScalingParams) -> Result<Self> {
        if sample_sizes.len() != errors.len() {
            return Err(Error::domain("sample sizes and errors differ in length"));
        }
        if sample_sizes.is_empty() {
            return Err(Error::domain("curve is empty"));
        }
        if sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("sample sizes must be strictly increasing"));
        }
        Ok(Self {
            sample_sizes,
            errors,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.sample_sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_sizes.is_empty()
    }

    pub fn phases(&self, consts: &PhaseConstants) -> Vec<Phase> {
        self.sample_sizes
            .iter()
            .map(|&n| self.params.phase(n as f64, consts))
            .collect()
    }

    /// `(ln n, ln(E(n) − E(∞)))` for the prefix where the reducible error is
    /// still positive.
    fn log_reducible(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let floor = self.params.irreducible_error()?;
        Ok(self
            .sample_sizes
            .iter()
            .zip(&self.errors)
            .map(|(&n, &e)| ((n as f64).ln(), e - floor))
            .take_while(|&(_, r)| r > f64::MIN_POSITIVE && r.is_finite())
            .map(|(x, r)| (x, r.ln()))
            .unzip())
    }

    /// Mean |d ln R / d ln n| of the reducible error over `lo < n < hi`,
    /// from central differences at interior grid points.
    pub fn mean_abs_log_slope(&self, lo: f64, hi: f64) -> Result<f64> {
        let (x, y) = self.log_reducible()?;
        let slopes = central_slopes(&x, &y);
        let picked: Vec<f64> = (1..x.len().saturating_sub(1))
            .filter(|&j| {
                let n = x[j].exp();
                n > lo && n < hi
            })
            .map(|j| slopes[j].abs())
            .collect();
        if picked.is_empty() {
            return Err(Error::domain(format!("no interior grid points in ({lo}, {hi})")));
        }
        Ok(picked.iter().sum::<f64>() / picked.len() as f64)
    }

    /// Compares the mean log-slope inside the plateau interval
    /// `(k^β, k^β/π)` with the decade before and the decade after it.
    pub fn plateau_report(&self) -> Result<PlateauReport> {
        let first = self.params.predicted_first();
        let second = self.params.predicted_second();
        let before = self.mean_abs_log_slope(first / 10.0, first)?;
        let inside = self.mean_abs_log_slope(first, second)?;
        let after = self.mean_abs_log_slope(second, second * 10.0)?;
        Ok(PlateauReport { before, inside, after })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateauReport {
    pub before: f64,
    pub inside: f64,
    pub after: f64,
}

impl PlateauReport {
    pub fn holds(&self) -> bool {
        self.inside < self.before && self.inside < self.after
    }
}

/// Exact error at every grid point.
pub fn sweep(params: &ScalingParams, n_grid: &[u64]) -> Result<PhaseCurve> {
    if n_grid.is_empty() {
        return Err(Error::domain("sample-size grid is empty"));
    }
    let model = ErrorModel::new(params)?;
    let errors = n_grid.par_iter().map(|&n| model.error(n)).collect();
    PhaseCurve::new(n_grid.to_vec(), errors, *params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakpointReport {
    pub predicted_first: f64,
    pub predicted_second: f64,
    pub detected_first: Option<f64>,
    pub detected_second: Option<f64>,
}

impl BreakpointReport {
    /// Ratio max(d/p, p/d) of a detection to its prediction.
    pub fn first_ratio(&self) -> Option<f64> {
        self.detected_first.map(|d| ratio(d, self.predicted_first))
    }

    pub fn second_ratio(&self) -> Option<f64> {
        self.detected_second.map(|d| ratio(d, self.predicted_second))
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    (a / b).max(b / a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreakpointOptions {
    /// Points per least-squares window (odd; even values round down).
    pub window: usize,
    /// Minimum |second derivative| for an extremum to count.
    pub curvature_threshold: f64,
    pub min_points_per_decade: f64,
}

impl Default for BreakpointOptions {
    fn default() -> Self {
        Self {
            window: 5,
            curvature_threshold: 0.05,
            min_points_per_decade: 8.0,
        }
    }
}

fn central_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|j| {
            if n < 2 {
                0.0
            } else if j == 0 {
                (y[1] - y[0]) / (x[1] - x[0])
            } else if j == n - 1 {
                (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2])
            } else {
                (y[j + 1] - y[j - 1]) / (x[j + 1] - x[j - 1])
            }
        })
        .collect()
}

/// Least-squares slope of `y` on `x` over the centred window `j−h..=j+h`;
/// `None` where the window does not fit. Unlike repeated central
/// differences this tolerates the uneven spacing of a rounded integer grid.
fn windowed_slopes(x: &[f64], y: &[Option<f64>], h: usize) -> Vec<Option<f64>> {
    (0..y.len())
        .map(|j| {
            if j < h || j + h >= y.len() {
                return None;
            }
            let ys: Vec<f64> = y[j - h..=j + h].iter().copied().collect::<Option<_>>()?;
            let xs = &x[j - h..=j + h];
            let m = xs.len() as f64;
            let xm = xs.iter().sum::<f64>() / m;
            let ym = ys.iter().sum::<f64>() / m;
            let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - xm) * (b - ym)).sum();
            let sxx: f64 = xs.iter().map(|a| (a - xm) * (a - xm)).sum();
            Some(sxy / sxx)
        })
        .collect()
}

/// Locates the two breakpoints of a curve from the curvature of its
/// log-log reducible error.
///
/// The log-log slope and curvature of the reducible error `E(n) − E(∞)` are
/// taken as windowed least-squares slopes, and the curvature is scanned for
/// local extrema. The first breakpoint is the
/// first curvature maximum (the slope flattens into the plateau); the second
/// is the first curvature minimum after it (the slope steepens again).
/// Points within reach of the grid edges are ignored.
pub fn detect_breakpoints(curve: &PhaseCurve, opts: &BreakpointOptions) -> Result<BreakpointReport> {
    let mut report = BreakpointReport {
        predicted_first: curve.params.predicted_first(),
        predicted_second: curve.params.predicted_second(),
        detected_first: None,
        detected_second: None,
    };
    let first_n = *curve.sample_sizes.first().expect("curves are nonempty") as f64;
    let last_n = *curve.sample_sizes.last().expect("curves are nonempty") as f64;
    let decades = (last_n / first_n.max(1.0)).log10();
    let density = if decades > 0.0 {
        (curve.len() - 1) as f64 / decades
    } else {
        0.0
    };
    if density < opts.min_points_per_decade {
        return Err(Error::domain(format!(
            "grid too coarse for breakpoint detection: {density:.1} points per decade, need {}",
            opts.min_points_per_decade
        )));
    }
    let (x, y) = curve.log_reducible()?;
    let h = (opts.window / 2).max(1);
    let y: Vec<Option<f64>> = y.into_iter().map(Some).collect();
    let slope = windowed_slopes(&x, &y, h);
    let curvature = windowed_slopes(&x, &slope, h);

    let value = |j: usize| curvature.get(j).copied().flatten();
    let extremum = |j: usize, sign: f64| -> bool {
        match (j.checked_sub(1).and_then(value), value(j), value(j + 1)) {
            (Some(prev), Some(c), Some(next)) => {
                sign * c > sign * prev && sign * c >= sign * next && sign * c > opts.curvature_threshold
            }
            _ => false,
        }
    };
    let first = (0..x.len()).find(|&j| extremum(j, 1.0));
    let start = first.map_or(0, |j| j + 1);
    let second = (start..x.len()).find(|&j| extremum(j, -1.0));

    report.detected_first = first.map(|j| curve.sample_sizes[j] as f64);
    report.detected_second = second.map(|j| curve.sample_sizes[j] as f64);
    Ok(report)
}
