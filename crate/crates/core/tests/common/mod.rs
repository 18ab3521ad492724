//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code under test except for plain data types.
#![allow(dead_code)]

use mixval::scaling::ScalingParams;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod rule with its embedded 7-point Gauss estimate.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let d = h * XGK[j];
        let s = f(c - d) + f(c + d);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: (f64, f64), rel: f64, depth: u32) -> f64 {
    let (est, err) = whole;
    if err <= rel * est.abs() || err < 1e-300 || depth == 0 {
        return est;
    }
    let m = 0.5 * (a + b);
    let l = gk15(f, a, m);
    let r = gk15(f, m, b);
    adapt(f, a, m, l, rel, depth - 1) + adapt(f, m, b, r, rel, depth - 1)
}

/// Adaptive Gauss–Kronrod quadrature to a relative tolerance.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    let whole = gk15(&f, a, b);
    adapt(&f, a, b, whole, rel, 40)
}

/// Γ(s, x) = ∫ₓ^∞ t^(s−1) e^(−t) dt by quadrature. Below t = 1 the
/// substitution t = u^(1/s) removes the endpoint singularity.
pub fn upper_gamma_quadrature(s: f64, x: f64) -> f64 {
    let rel = 1e-14;
    let mut total = 0.0;
    let mut lo = x;
    if x < 1.0 {
        let g = |u: f64| (-u.powf(1.0 / s)).exp() / s;
        total += integrate(g, x.powf(s), 1.0, rel);
        lo = 1.0;
    }
    let f = |t: f64| (-t).exp() * t.powf(s - 1.0);
    // beyond lo + 200 the integrand is below e^-200 of its value at lo
    let mut a = lo;
    while a < lo + 200.0 {
        let b = a + 10.0;
        total += integrate(f, a, b, rel);
        a = b;
    }
    total
}

/// Upper chi-square quantile by the Wilson–Hilferty approximation, given
/// the standard normal quantile `z` of the same tail.
pub fn chi_square_quantile(dof: f64, z: f64) -> f64 {
    let c = 2.0 / (9.0 * dof);
    dof * (1.0 - c + z * c.sqrt()).powi(3)
}

/// Standard normal upper quantile for α = 0.001.
pub const Z_0_999: f64 = 3.090_232_306_167_813;

/// Kendall tau-b by counting all pairs.
pub fn kendall_brute(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    (c - d) as f64 / (((c + d + tx) as f64) * ((c + d + ty) as f64)).sqrt()
}

/// Pearson by textbook two-pass formula.
pub fn pearson_naive(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Ranks with ties averaged, by counting.
pub fn ranks_naive(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Real and truncated power-law pmfs recomputed from scratch.
pub fn pmfs(beta: f64, k: usize, support: usize) -> (Vec<f64>, Vec<f64>) {
    let w: Vec<f64> = (1..=support).map(|i| (i as f64).powf(-beta)).collect();
    let z: f64 = w.iter().sum();
    let zk: f64 = w[..k].iter().sum();
    let p = w.iter().map(|v| v / z).collect();
    let pp = w
        .iter()
        .enumerate()
        .map(|(i, v)| if i < k { v / zk } else { 0.0 })
        .collect();
    (p, pp)
}

/// The three components of the expected error, evaluated naively with
/// `powf` on (1 − q).
pub fn error_components(params: &ScalingParams, n: f64) -> (f64, f64, f64) {
    let (p, pp) = pmfs(params.beta, params.k.min(params.support_max), params.support_max);
    let (mut irr, mut ur, mut ug) = (0.0, 0.0, 0.0);
    for i in 0..params.support_max {
        let idx = (i + 1) as f64;
        let rho = params.a * idx.powf(-params.alpha);
        let gamma = params.b * idx.powf(-params.lambda);
        let q = params.pi * p[i] + (1.0 - params.pi) * pp[i];
        let u = (1.0 - q).powf(n);
        irr += p[i] * (1.0 - rho);
        ur += p[i] * rho * u;
        ug += p[i] * gamma * u;
    }
    (irr, ur, ug)
}

pub fn error_naive(params: &ScalingParams, n: f64) -> f64 {
    let (irr, ur, ug) = error_components(params, n);
    irr + ur - ug
}

/// Least-squares slope of ln y on ln x.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Geometric grid with `points` values from `lo` to `hi`.
pub fn geom(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|j| lo * (hi / lo).powf(j as f64 / (points - 1) as f64))
        .collect()
}
