//! Gamma and upper incomplete gamma functions.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-17;
const TINY: f64 = 1e-300;

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        ln_gamma(x).exp()
    }
}

/// Upper incomplete gamma Γ(s, x) = ∫ₓ^∞ t^(s−1) e^(−t) dt.
///
/// Uses the power series of the lower function for `x < s + 1` and a
/// Lentz continued fraction otherwise.
pub fn upper_incomplete_gamma(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("Γ(s, x) requires s > 0, got s = {s}")));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!("Γ(s, x) requires x ≥ 0, got x = {x}")));
    }
    if x == 0.0 {
        return Ok(gamma(s));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        Ok(gamma(s) - lower_series(s, x)?)
    } else {
        upper_continued_fraction(s, x)
    }
}

/// Lower incomplete gamma γ(s, x) by its power series.
fn lower_series(s: f64, x: f64) -> Result<f64> {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut denom = s;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            return Ok(sum * (-x + s * x.ln()).exp());
        }
    }
    Err(Error::numerical(format!("γ({s}, {x}) series did not converge")))
}

fn upper_continued_fraction(s: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h * (-x + s * x.ln()).exp());
        }
    }
    Err(Error::numerical(format!(
        "Γ({s}, {x}) continued fraction did not converge"
    )))
}
