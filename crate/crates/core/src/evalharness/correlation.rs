use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::GroundTruth;
use crate::error::{Error, Result};
use crate::numeric::csum;

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::domain(format!(
            "sequences differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::domain("correlation needs at least two pairs"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::domain("correlation inputs must be finite"));
    }
    Ok(())
}

fn undefined() -> Error {
    Error::degenerate("undefined correlation: constant input")
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let n = xs.len() as f64;
    let mx = csum(xs.iter().copied()) / n;
    let my = csum(ys.iter().copied()) / n;
    let sxy = csum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = csum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let syy = csum(ys.iter().map(|y| (y - my) * (y - my)));
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(undefined());
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their ranks.
pub(crate) fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Sum of t(t−1)/2 over runs of equal values in a sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Stable merge sort returning the number of inversions.
fn sort_counting_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_counting_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
pub fn kendall(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let n = xs.len() as u64;
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = n * (n - 1) / 2;
    let x_ties = tied_pairs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let joint_ties = tied_pairs(&pairs);
    let mut y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; y.len()];
    let swaps = sort_counting_swaps(&mut y, &mut buf);
    let y_ties = tied_pairs(&y);
    if x_ties == n0 || y_ties == n0 {
        return Err(undefined());
    }
    let numer = n0 as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * swaps as f64;
    let denom = ((n0 - x_ties) as f64 * (n0 - y_ties) as f64).sqrt();
    Ok((numer / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson: f64,
    pub spearman: f64,
    pub kendall: f64,
    pub n: usize,
}

impl CorrelationReport {
    fn negated(&self) -> Self {
        Self {
            pearson: -self.pearson,
            spearman: -self.spearman,
            kendall: -self.kendall,
            n: self.n,
        }
    }
}

/// All three correlations of two aligned sequences.
pub fn correlations(xs: &[f64], ys: &[f64]) -> Result<CorrelationReport> {
    Ok(CorrelationReport {
        pearson: pearson(xs, ys)?,
        spearman: spearman(xs, ys)?,
        kendall: kendall(xs, ys)?,
        n: xs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Higher score ↔ higher ground-truth metric.
    AsIs,
    /// Scores negated.
    Negated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodEvaluation {
    pub as_is: CorrelationReport,
    pub negated: CorrelationReport,
    /// Orientation with a non-negative Spearman correlation.
    pub best: Orientation,
    /// Contributors left out of the correlation (diverged training).
    pub excluded: Vec<String>,
}

impl MethodEvaluation {
    pub fn best_report(&self) -> &CorrelationReport {
        match self.best {
            Orientation::AsIs => &self.as_is,
            Orientation::Negated => &self.negated,
        }
    }
}

/// Correlates `(contributor_id, score)` pairs with ground truth, aligned by
/// id. Diverged ground-truth entries are excluded and listed.
pub fn evaluate_method(scores: &[(String, f64)], ground_truth: &[GroundTruth]) -> Result<MethodEvaluation> {
    let mut truth: HashMap<&str, &GroundTruth> = HashMap::with_capacity(ground_truth.len());
    for g in ground_truth {
        if truth.insert(g.contributor_id.as_str(), g).is_some() {
            return Err(Error::domain(format!(
                "duplicate ground-truth entry for `{}`",
                g.contributor_id
            )));
        }
    }
    let mut seen = std::collections::HashSet::with_capacity(scores.len());
    let mut xs = Vec::with_capacity(scores.len());
    let mut ys = Vec::with_capacity(scores.len());
    let mut excluded = Vec::new();
    for (id, s) in scores {
        if !seen.insert(id.as_str()) {
            return Err(Error::domain(format!("duplicate score for `{id}`")));
        }
        let g = truth
            .get(id.as_str())
            .ok_or_else(|| Error::domain(format!("no ground truth for contributor `{id}`")))?;
        if g.diverged {
            excluded.push(id.clone());
            continue;
        }
        xs.push(*s);
        ys.push(g.test_metric);
    }
    if let Some(g) = ground_truth.iter().find(|g| !seen.contains(g.contributor_id.as_str())) {
        return Err(Error::domain(format!(
            "no score for contributor `{}`",
            g.contributor_id
        )));
    }
    if xs.len() < 2 {
        return Err(Error::domain(format!(
            "{} aligned pairs; at least two are needed",
            xs.len()
        )));
    }
    let as_is = correlations(&xs, &ys)?;
    let best = if as_is.spearman >= 0.0 {
        Orientation::AsIs
    } else {
        Orientation::Negated
    };
    Ok(MethodEvaluation {
        as_is,
        negated: as_is.negated(),
        best,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_reversed() {
        let xs = [0.3, 1.2, -4.0, 2.5, 7.0];
        let r = correlations(&xs, &xs).unwrap();
        assert!((r.pearson - 1.0).abs() < 1e-15);
        assert_eq!(r.spearman, 1.0);
        assert_eq!(r.kendall, 1.0);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_eq!(spearman(&xs, &neg).unwrap(), -1.0);
        assert_eq!(kendall(&xs, &neg).unwrap(), -1.0);
    }

    #[test]
    fn kendall_hand_case() {
        let t = kendall(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((t - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_tau_b_with_ties() {
        // x ties: one pair; y ties: one pair; concordant 4, discordant 0
        // tau_b = 4 / sqrt(5 · 5)
        let t = kendall(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 3.0]).unwrap();
        assert!((t - 0.8).abs() < 1e-15);
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn constant_input_is_undefined() {
        let c = [2.0; 4];
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(pearson(&c, &x), Err(Error::Degenerate(_))));
        assert!(matches!(spearman(&x, &c), Err(Error::Degenerate(_))));
        assert!(matches!(kendall(&c, &x), Err(Error::Degenerate(_))));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }
}
