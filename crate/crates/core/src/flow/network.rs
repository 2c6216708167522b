use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which objective a field is trained with; also fixes its sampling prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Euclidean chord from a Gaussian prior.
    Linear,
    /// Slerp geodesic from the uniform sphere prior, tangent-projected loss.
    Slerp,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Linear => "linear",
            LossKind::Slerp => "slerp",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(LossKind::Linear),
            "slerp" => Ok(LossKind::Slerp),
            other => Err(Error::InvalidArgument(format!("unknown loss kind {other:?}"))),
        }
    }
}

/// Architecture of a [`VelocityField`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldShape {
    pub d: usize,
    pub hidden: Vec<usize>,
    /// Width of the fixed sinusoidal time embedding; must be even.
    pub time_dim: usize,
    pub n_classes: usize,
    /// Width of the learned condition embedding.
    pub cond_dim: usize,
}

impl FieldShape {
    /// Three affine layers with two hidden widths of `hidden`.
    pub fn mlp(d: usize, hidden: usize) -> Self {
        Self {
            d,
            hidden: vec![hidden, hidden],
            time_dim: 8,
            n_classes: 1,
            cond_dim: 4,
        }
    }

    pub fn input_width(&self) -> usize {
        self.d + self.time_dim + self.cond_dim
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_width()];
        w.extend(&self.hidden);
        w.push(self.d);
        w
    }

    pub fn n_params(&self) -> usize {
        let w = self.widths();
        self.n_classes * self.cond_dim + w.windows(2).map(|p| p[0] * p[1] + p[1]).sum::<usize>()
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n_classes == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidArgument(format!("degenerate field shape {self:?}")));
        }
        if !self.time_dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument("time embedding width must be even".into()));
        }
        Ok(())
    }
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Fixed sinusoidal features `[sin(f_k t), cos(f_k t)]` with `f_k = pi 2^k / 2`.
pub fn time_embedding(t: f64, width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(width);
    for k in 0..width / 2 {
        let f = PI * 2f64.powi(k as i32) / 2.0;
        out.push((f * t).sin());
        out.push((f * t).cos());
    }
    out
}

/// Feedforward velocity network `v(z, t, cond)`.
///
/// Parameters live in one flat vector: the condition embedding table first
/// (`n_classes x cond_dim`, row-major), then for each layer its weight matrix
/// (`out x in`, row-major) followed by its bias. Hidden layers use SiLU; the
/// output layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    shape: FieldShape,
    kind: LossKind,
    radius: f64,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    cond: usize,
    /// `inputs[l]` feeds layer `l`; the last entry is the output.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().unwrap()
    }
}

impl VelocityField {
    /// Random initialization: `N(0, 1/fan_in)` weights, zero biases, `N(0, 1)`
    /// condition embeddings.
    pub fn new<G: Rng + ?Sized>(shape: FieldShape, kind: LossKind, radius: f64, rng: &mut G) -> Result<Self> {
        shape.validate()?;
        let mut params = Vec::with_capacity(shape.n_params());
        for _ in 0..shape.n_classes * shape.cond_dim {
            params.push(rng.sample::<f64, _>(StandardNormal));
        }
        for pair in shape.widths().windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = (1.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(std * rng.sample::<f64, _>(StandardNormal));
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self::from_params(shape, kind, radius, params)
    }

    pub fn from_params(shape: FieldShape, kind: LossKind, radius: f64, params: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if params.len() != shape.n_params() {
            return Err(Error::DimensionMismatch {
                expected: shape.n_params(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        Ok(Self {
            shape,
            kind,
            radius,
            params,
        })
    }

    pub fn shape(&self) -> &FieldShape {
        &self.shape
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Offset of layer `l`'s weights in the flat parameter vector.
    fn layer_offset(&self, l: usize) -> usize {
        let w = self.shape.widths();
        self.shape.n_classes * self.shape.cond_dim
            + w.windows(2).take(l).map(|p| p[0] * p[1] + p[1]).sum::<usize>()
    }

    pub fn forward(&self, z: &[f64], t: f64, cond: usize) -> Result<Vec<f64>> {
        Ok(self.forward_cached(z, t, cond)?.inputs.pop().unwrap())
    }

    pub fn forward_cached(&self, z: &[f64], t: f64, cond: usize) -> Result<ForwardCache> {
        let s = &self.shape;
        if z.len() != s.d {
            return Err(Error::DimensionMismatch {
                expected: s.d,
                got: z.len(),
            });
        }
        if cond >= s.n_classes {
            return Err(Error::UnknownCondition {
                id: cond,
                classes: s.n_classes,
            });
        }
        let mut x = Vec::with_capacity(s.input_width());
        x.extend_from_slice(z);
        x.extend(time_embedding(t, s.time_dim));
        x.extend_from_slice(&self.params[cond * s.cond_dim..(cond + 1) * s.cond_dim]);

        let widths = s.widths();
        let n_layers = widths.len() - 1;
        let mut inputs = vec![x];
        let mut pre = Vec::with_capacity(n_layers - 1);
        for l in 0..n_layers {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let off = self.layer_offset(l);
            let weights = &self.params[off..off + fan_in * fan_out];
            let bias = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let a = &inputs[l];
            let y: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    bias[o] + row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>()
                })
                .collect();
            if l + 1 < n_layers {
                inputs.push(y.iter().map(|&v| silu(v)).collect());
                pre.push(y);
            } else {
                inputs.push(y);
            }
        }
        Ok(ForwardCache { cond, inputs, pre })
    }

    /// Accumulate `d(loss)/d(params)` into `grad`, given `d(loss)/d(output)`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let s = &self.shape;
        let widths = s.widths();
        let n_layers = widths.len() - 1;
        let mut delta = grad_out.to_vec();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            if l + 1 < n_layers {
                for (d, p) in delta.iter_mut().zip(&cache.pre[l]) {
                    *d *= silu_grad(*p);
                }
            }
            let off = self.layer_offset(l);
            let a = &cache.inputs[l];
            for o in 0..fan_out {
                let row = &mut grad[off + o * fan_in..off + (o + 1) * fan_in];
                for (g, x) in row.iter_mut().zip(a) {
                    *g += delta[o] * x;
                }
                grad[off + fan_in * fan_out + o] += delta[o];
            }
            let weights = &self.params[off..off + fan_in * fan_out];
            let mut next = vec![0.0; fan_in];
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += delta[o] * w;
                }
            }
            delta = next;
        }
        // Input slots after z and the time features belong to the embedding row.
        let start = s.d + s.time_dim;
        let row = cache.cond * s.cond_dim;
        for c in 0..s.cond_dim {
            grad[row + c] += delta[start + c];
        }
    }
}
