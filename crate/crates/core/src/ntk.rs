//! A small scalar-output feedforward network, its per-example parameter
//! gradients, and the empirical neural tangent kernel at initialisation.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::dot;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Map applied to the final pre-activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputMap {
    /// Logistic squashing into (0, 1).
    #[default]
    Sigmoid,
    Identity,
}

impl OutputMap {
    fn apply(&self, z: f64) -> f64 {
        match self {
            OutputMap::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            OutputMap::Identity => z,
        }
    }

    fn derivative_from_output(&self, f: f64) -> f64 {
        match self {
            OutputMap::Sigmoid => f * (1.0 - f),
            OutputMap::Identity => 1.0,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    /// Input dimension, hidden widths, then the output width 1.
    pub layer_widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub output: OutputMap,
    #[serde(default = "default_true")]
    pub bias: bool,
    pub init_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub fan_out: usize,
    pub fan_in: usize,
    pub bias: bool,
}

impl LayerShape {
    fn len(&self) -> usize {
        self.fan_out * self.fan_in + if self.bias { self.fan_out } else { 0 }
    }
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation, init_seed: u64) -> Result<Self> {
        let spec = Self {
            layer_widths,
            activation,
            output: OutputMap::Sigmoid,
            bias: true,
            init_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::domain("an MLP needs an input and an output width"));
        }
        if self.layer_widths.iter().any(|&w| w < 1) {
            return Err(Error::domain("layer widths must be ≥ 1"));
        }
        if *self.layer_widths.last().expect("checked above") != 1 {
            return Err(Error::domain("the output width must be 1"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn shapes(&self) -> Vec<LayerShape> {
        self.layer_widths
            .windows(2)
            .map(|w| LayerShape {
                fan_out: w[1],
                fan_in: w[0],
                bias: self.bias,
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(LayerShape::len).sum()
    }
}

/// Flat parameter vector: per layer, the row-major weight matrix followed by
/// the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub shapes: Vec<LayerShape>,
}

impl ParamVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Weights i.i.d. N(0, 1/fan_in), biases zero.
pub fn init_params(spec: &MlpSpec) -> Result<ParamVector> {
    spec.validate()?;
    let shapes = spec.shapes();
    let mut rng = rng::named(spec.init_seed, "init");
    let mut values = Vec::with_capacity(spec.param_count());
    for s in &shapes {
        let normal = Normal::new(0.0, (1.0 / s.fan_in as f64).sqrt()).expect("positive std");
        values.extend((0..s.fan_out * s.fan_in).map(|_| normal.sample(&mut rng)));
        if s.bias {
            values.extend(std::iter::repeat_n(0.0, s.fan_out));
        }
    }
    Ok(ParamVector { values, shapes })
}

/// A network together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: MlpSpec,
    pub params: ParamVector,
}

struct Trace {
    /// Input of each layer (h_0 = x).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    output: f64,
}

impl Model {
    pub fn new(spec: MlpSpec, params: ParamVector) -> Result<Self> {
        spec.validate()?;
        if params.shapes != spec.shapes() || params.len() != spec.param_count() {
            return Err(Error::domain("parameter vector does not match the network shape"));
        }
        Ok(Self { spec, params })
    }

    /// Network at its seeded initialisation θ₀.
    pub fn initialized(spec: MlpSpec) -> Result<Self> {
        let params = init_params(&spec)?;
        Ok(Self { spec, params })
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_dim() {
            return Err(Error::domain(format!(
                "input has dimension {}, network expects {}",
                x.len(),
                self.spec.input_dim()
            )));
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut inputs = Vec::with_capacity(self.params.shapes.len());
        let mut pre = Vec::with_capacity(self.params.shapes.len());
        let mut h = x.to_vec();
        let mut offset = 0;
        let last = self.params.shapes.len() - 1;
        for (l, s) in self.params.shapes.iter().enumerate() {
            let w = &self.params.values[offset..offset + s.fan_out * s.fan_in];
            offset += s.fan_out * s.fan_in;
            let mut z: Vec<f64> = w.chunks_exact(s.fan_in).map(|row| dot(row, &h)).collect();
            if s.bias {
                for (zi, bi) in z.iter_mut().zip(&self.params.values[offset..offset + s.fan_out]) {
                    *zi += bi;
                }
                offset += s.fan_out;
            }
            let next = if l < last {
                z.iter().map(|&v| self.spec.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(z);
        }
        let output = self.spec.output.apply(pre[last][0]);
        Trace { inputs, pre, output }
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.trace(x).output)
    }

    /// Last hidden representation (the input itself for a one-layer net).
    pub fn penultimate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut t = self.trace(x);
        Ok(t.inputs.pop().expect("at least one layer"))
    }

    /// Output and ∇_θ f(x; θ) by reverse-mode differentiation.
    pub fn forward_with_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let t = self.trace(x);
        let mut grad = vec![0.0; self.params.len()];
        let shapes = &self.params.shapes;
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut off = 0;
        for s in shapes {
            offsets.push(off);
            off += s.len();
        }
        let mut delta = vec![self.spec.output.derivative_from_output(t.output)];
        for l in (0..shapes.len()).rev() {
            let s = shapes[l];
            let base = offsets[l];
            let h = &t.inputs[l];
            for (r, d) in delta.iter().enumerate() {
                let row = &mut grad[base + r * s.fan_in..base + (r + 1) * s.fan_in];
                for (g, hv) in row.iter_mut().zip(h) {
                    *g = d * hv;
                }
            }
            if s.bias {
                let b0 = base + s.fan_out * s.fan_in;
                grad[b0..b0 + s.fan_out].copy_from_slice(&delta);
            }
            if l > 0 {
                let w = &self.params.values[base..base + s.fan_out * s.fan_in];
                let mut prev = vec![0.0; s.fan_in];
                for (r, d) in delta.iter().enumerate() {
                    for (p, wv) in prev.iter_mut().zip(&w[r * s.fan_in..(r + 1) * s.fan_in]) {
                        *p += d * wv;
                    }
                }
                for (p, z) in prev.iter_mut().zip(&t.pre[l - 1]) {
                    *p *= self.spec.activation.derivative(*z);
                }
                delta = prev;
            }
        }
        Ok((t.output, grad))
    }

    pub fn per_example_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_with_gradient(x)?.1)
    }
}

/// Empirical NTK Gram matrix Θ₀ with the largest per-example gradient norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NtkGram {
    pub matrix: DMatrix<f64>,
    pub gradient_norm_bound: f64,
}

impl NtkGram {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.matrix.clone()).eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().max()
    }

    /// `1e-6 · trace / n`.
    pub fn default_ridge(&self) -> f64 {
        1e-6 * self.trace() / self.dim() as f64
    }
}

/// Per-example gradients stacked as rows of the Jacobian.
pub fn jacobian<X: AsRef<[f64]> + Sync>(model: &Model, xs: &[X]) -> Result<DMatrix<f64>> {
    let rows = xs
        .par_iter()
        .map(|x| model.per_example_gradient(x.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let p = model.params.len();
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

/// Θ₀[i][j] = ⟨∇_θ f(x_i), ∇_θ f(x_j)⟩.
pub fn ntk_gram<X: AsRef<[f64]> + Sync>(model: &Model, xs: &[X]) -> Result<NtkGram> {
    if xs.is_empty() {
        return Err(Error::domain("NTK Gram needs at least one sample"));
    }
    let j = jacobian(model, xs)?;
    let g = &j * j.transpose();
    let matrix = (&g + g.transpose()) * 0.5;
    let gradient_norm_bound = matrix.diagonal().iter().fold(0.0f64, |m, &d| m.max(d)).sqrt();
    Ok(NtkGram {
        matrix,
        gradient_norm_bound,
    })
}

/// `sqrt(ŷᵀ(Θ₀ + ridge·I)⁻¹ŷ / n)` via a Cholesky solve.
pub fn bound_term(gram: &NtkGram, residuals: &[f64], ridge: f64) -> Result<f64> {
    let n = gram.dim();
    if residuals.len() != n {
        return Err(Error::domain(format!(
            "{} residuals for a {n}×{n} Gram matrix",
            residuals.len()
        )));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::domain(format!("ridge must be finite and ≥ 0, got {ridge}")));
    }
    let mut a = gram.matrix.clone();
    for i in 0..n {
        a[(i, i)] += ridge;
    }
    let scale = a.diagonal().iter().fold(0.0f64, |m, &d| m.max(d.abs()));
    let chol = Cholesky::new(a.clone()).ok_or_else(|| {
        let ev = SymmetricEigen::new(a).eigenvalues;
        let (lo, hi) = (ev.min(), ev.max());
        Error::numerical(format!(
            "Gram + ridge·I is not positive definite (λ_min = {lo:.3e}, λ_max = {hi:.3e}, condition ≈ {:.3e})",
            hi.abs() / lo.abs().max(f64::MIN_POSITIVE)
        ))
    })?;
    // a pivot at rounding level means the factorisation only succeeded by
    // accident of rounding
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, &d| m.min(d * d));
    if min_pivot <= n as f64 * f64::EPSILON * scale {
        return Err(Error::numerical(format!(
            "Gram + ridge·I is numerically singular (smallest pivot {min_pivot:.3e}, scale {scale:.3e}); increase the ridge"
        )));
    }
    let y = DVector::from_column_slice(residuals);
    let alpha = chol.solve(&y);
    let quad = y.dot(&alpha);
    if !quad.is_finite() {
        return Err(Error::numerical("bound term is not finite"));
    }
    Ok((quad.max(0.0) / n as f64).sqrt())
}
