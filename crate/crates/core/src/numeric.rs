//! Small numeric helpers shared across modules.

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn csum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Log-spaced integer grid from `start` to `stop` (inclusive) with the given
/// density. Rounded values are deduplicated, so the grid is strictly
/// increasing.
pub fn log_grid(start: u64, stop: u64, points_per_decade: usize) -> Vec<u64> {
    assert!(start >= 1 && stop >= start && points_per_decade >= 1);
    let lo = (start as f64).log10();
    let hi = (stop as f64).log10();
    let steps = ((hi - lo) * points_per_decade as f64).round() as usize;
    let mut out: Vec<u64> = (0..=steps)
        .map(|j| {
            let t = if steps == 0 {
                lo
            } else {
                lo + (hi - lo) * j as f64 / steps as f64
            };
            10f64.powf(t).round() as u64
        })
        .collect();
    out.dedup();
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
