//! Multiple-kernel maximum mean discrepancy between sample sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{squared_distance, CompensatedSum};

/// Gaussian kernel `exp(−‖x−y‖² / (2h²))` with length scale `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::domain(format!(
                "kernel bandwidth must be finite and > 0, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    fn eval_sq(&self, d2: f64) -> f64 {
        (-d2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

/// Convex combination of Gaussian kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiKernelSpec {
    pub kernels: Vec<KernelSpec>,
    pub weights: Vec<f64>,
}

/// Bandwidth multipliers of the default bank, applied to the median
/// heuristic.
pub const DEFAULT_BANDWIDTH_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

impl MultiKernelSpec {
    pub fn new(kernels: Vec<KernelSpec>, weights: Vec<f64>) -> Result<Self> {
        let spec = Self { kernels, weights };
        spec.validate()?;
        Ok(spec)
    }

    pub fn single(bandwidth: f64) -> Result<Self> {
        Self::new(vec![KernelSpec::new(bandwidth)?], vec![1.0])
    }

    /// Uniformly weighted bank with bandwidths `m·base` for each multiplier.
    pub fn scaled_bank(base: f64, multipliers: &[f64]) -> Result<Self> {
        let kernels = multipliers
            .iter()
            .map(|m| KernelSpec::new(m * base))
            .collect::<Result<Vec<_>>>()?;
        let w = 1.0 / multipliers.len() as f64;
        Self::new(kernels, vec![w; multipliers.len()])
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() {
            return Err(Error::domain("kernel bank is empty"));
        }
        if self.kernels.len() != self.weights.len() {
            return Err(Error::domain("kernel and weight counts differ"));
        }
        for k in &self.kernels {
            KernelSpec::new(k.bandwidth)?;
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::domain("kernel weights must be finite and ≥ 0"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("kernel weights must sum to 1, got {total}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Biased,
    Unbiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyEstimate {
    /// `sqrt(max(0, squared))`.
    pub value: f64,
    /// Weighted squared MMD, before clamping. May be slightly negative for
    /// the unbiased estimator.
    pub squared: f64,
    pub estimator: Estimator,
}

pub fn gaussian_kernel(x: &[f64], y: &[f64], spec: &KernelSpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::domain(format!("dimension mismatch: {} vs {}", x.len(), y.len())));
    }
    Ok(spec.eval_sq(squared_distance(x, y)))
}

fn check_dims<X: AsRef<[f64]>>(sets: &[&[X]]) -> Result<usize> {
    let dim = sets
        .iter()
        .flat_map(|s| s.iter())
        .map(|v| v.as_ref().len())
        .next()
        .ok_or_else(|| Error::domain("sample sets are empty"))?;
    for s in sets {
        if s.iter().any(|v| v.as_ref().len() != dim) {
            return Err(Error::domain("sample vectors have inconsistent dimensions"));
        }
    }
    Ok(dim)
}

/// Per-kernel sums of k(a_i, b_j) over all pairs, optionally skipping
/// `i == j`. Rows are reduced in index order so the result does not depend on
/// the thread schedule.
fn kernel_sums<X: AsRef<[f64]> + Sync>(a: &[X], b: &[X], spec: &MultiKernelSpec, skip_diagonal: bool) -> Vec<f64> {
    let nk = spec.kernels.len();
    let rows: Vec<Vec<f64>> = a
        .par_iter()
        .enumerate()
        .map(|(i, ai)| {
            let mut acc = vec![CompensatedSum::new(); nk];
            for (j, bj) in b.iter().enumerate() {
                if skip_diagonal && i == j {
                    continue;
                }
                let d2 = squared_distance(ai.as_ref(), bj.as_ref());
                for (s, k) in acc.iter_mut().zip(&spec.kernels) {
                    s.add(k.eval_sq(d2));
                }
            }
            acc.iter().map(|s| s.value()).collect()
        })
        .collect();
    (0..nk)
        .map(|t| {
            let mut s = CompensatedSum::new();
            for r in &rows {
                s.add(r[t]);
            }
            s.value()
        })
        .collect()
}

/// Multi-kernel MMD between `x` and `y`.
///
/// For each kernel the squared MMD is estimated (biased: V-statistic over all
/// pairs; unbiased: U-statistic without the diagonals), the estimates are
/// combined with the bank weights, and the square root is taken after
/// clamping at zero.
pub fn mmd<X: AsRef<[f64]> + Sync>(
    x: &[X],
    y: &[X],
    spec: &MultiKernelSpec,
    estimator: Estimator,
) -> Result<DiscrepancyEstimate> {
    spec.validate()?;
    let min = match estimator {
        Estimator::Biased => 1,
        Estimator::Unbiased => 2,
    };
    if x.len() < min || y.len() < min {
        return Err(Error::domain(format!(
            "{estimator:?} MMD needs at least {min} samples per set, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    check_dims(&[x, y])?;
    let skip = estimator == Estimator::Unbiased;
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (dx, dy) = if skip {
        (nx * (nx - 1.0), ny * (ny - 1.0))
    } else {
        (nx * nx, ny * ny)
    };
    let kxx = kernel_sums(x, x, spec, skip);
    let kyy = kernel_sums(y, y, spec, skip);
    let kxy = kernel_sums(x, y, spec, false);
    let mut total = CompensatedSum::new();
    for t in 0..spec.kernels.len() {
        let per_kernel = kxx[t] / dx + kyy[t] / dy - 2.0 * kxy[t] / (nx * ny);
        total.add(spec.weights[t] * per_kernel);
    }
    let squared = total.value();
    Ok(DiscrepancyEstimate {
        value: squared.max(0.0).sqrt(),
        squared,
        estimator,
    })
}

/// Median pairwise Euclidean distance of the pooled set; a zero median is
/// replaced by the smallest positive distance.
pub fn median_heuristic<X: AsRef<[f64]>>(x: &[X], y: &[X]) -> Result<f64> {
    let pooled: Vec<&[f64]> = x.iter().chain(y.iter()).map(|v| v.as_ref()).collect();
    if pooled.len() < 2 {
        return Err(Error::domain("median heuristic needs at least two points"));
    }
    let dim = pooled[0].len();
    if pooled.iter().any(|v| v.len() != dim) {
        return Err(Error::domain("sample vectors have inconsistent dimensions"));
    }
    let mut dists = Vec::with_capacity(pooled.len() * (pooled.len() - 1) / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            dists.push(squared_distance(pooled[i], pooled[j]).sqrt());
        }
    }
    let m = dists.len();
    let mid = m / 2;
    let (_, upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if m % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if median > 0.0 {
        return Ok(median);
    }
    dists
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::degenerate("all points are identical"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn kernel_basics() {
        let k = KernelSpec::new(1.0).unwrap();
        assert_eq!(gaussian_kernel(&[0.3, 0.1], &[0.3, 0.1], &k).unwrap(), 1.0);
        let a = gaussian_kernel(&[0.0], &[1.0], &k).unwrap();
        assert!((a - (-0.5f64).exp()).abs() < 1e-15);
        assert!((a - 0.606_53).abs() < 1e-5);
        assert_eq!(
            gaussian_kernel(&[1.0, 2.0], &[0.5, -1.0], &k).unwrap(),
            gaussian_kernel(&[0.5, -1.0], &[1.0, 2.0], &k).unwrap()
        );
        assert!(gaussian_kernel(&[1.0], &[1.0, 2.0], &k).is_err());
        assert!(KernelSpec::new(0.0).is_err());
    }

    #[test]
    fn median_small_cases() {
        assert_eq!(median_heuristic(&pts(&[0.0]), &pts(&[2.0])).unwrap(), 2.0);
        assert_eq!(median_heuristic(&pts(&[0.0, 1.0, 3.0]), &pts(&[])).unwrap(), 2.0);
        // pairs {0,0,0,5,5,5}: even count, mean of the middle two
        assert_eq!(median_heuristic(&pts(&[0.0, 0.0, 0.0, 5.0]), &pts(&[])).unwrap(), 2.5);
        // six of ten pairs are zero: falls back to the smallest positive gap
        assert_eq!(
            median_heuristic(&pts(&[0.0, 0.0, 0.0, 0.0, 5.0]), &pts(&[])).unwrap(),
            5.0
        );
        assert!(matches!(
            median_heuristic(&pts(&[1.0, 1.0]), &pts(&[1.0])),
            Err(Error::Degenerate(_))
        ));
        assert!(median_heuristic(&pts(&[1.0]), &pts(&[])).is_err());
    }

    #[test]
    fn median_is_scale_equivariant() {
        let x = pts(&[0.0, 0.7, 2.5, 3.1]);
        let y = pts(&[-1.0, 4.2]);
        let base = median_heuristic(&x, &y).unwrap();
        let c = 3.5;
        let xs: Vec<Vec<f64>> = x.iter().map(|v| vec![v[0] * c]).collect();
        let ys: Vec<Vec<f64>> = y.iter().map(|v| vec![v[0] * c]).collect();
        assert!((median_heuristic(&xs, &ys).unwrap() - c * base).abs() < 1e-12);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let k = vec![KernelSpec::new(1.0).unwrap(), KernelSpec::new(2.0).unwrap()];
        assert!(MultiKernelSpec::new(k.clone(), vec![0.5, 0.6]).is_err());
        assert!(MultiKernelSpec::new(k.clone(), vec![1.0]).is_err());
        assert!(MultiKernelSpec::new(vec![], vec![]).is_err());
        assert!(MultiKernelSpec::new(k, vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn too_few_samples() {
        let spec = MultiKernelSpec::single(1.0).unwrap();
        let one = pts(&[0.0]);
        let two = pts(&[0.0, 1.0]);
        assert!(mmd(&one, &two, &spec, Estimator::Unbiased).is_err());
        assert!(mmd(&one, &two, &spec, Estimator::Biased).is_ok());
        let empty: Vec<Vec<f64>> = vec![];
        assert!(mmd(&empty, &two, &spec, Estimator::Biased).is_err());
    }
}
