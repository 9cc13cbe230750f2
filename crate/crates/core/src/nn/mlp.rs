use ndarray::{Array1, Array2};
use rand::Rng;

use super::activation::Activation;
use super::batch::{Cotangents, EvalMode};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// Value, input gradient and Laplacian of a scalar field at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldEval<T> {
    pub value: T,
    pub gradient: Vec<T>,
    pub laplacian: T,
}

/// Weights applied to a [`FieldEval`] when differentiating in the parameters.
#[derive(Clone, Debug)]
pub struct Cotangent<T> {
    pub value: T,
    pub gradient: Vec<T>,
    pub laplacian: T,
}

impl<T: Real> Cotangent<T> {
    pub fn value_only(dim: usize) -> Self {
        Cotangent {
            value: T::one(),
            gradient: vec![T::zero(); dim],
            laplacian: T::zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    /// `n_out x n_in`.
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

/// Fully connected network `R^d -> R` with smooth hidden activations and a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    widths: Vec<usize>,
    activation: Activation,
    layers: Vec<Layer<T>>,
    param_bound: f64,
}

pub fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::InvalidWidths {
            index: widths.len(),
            value: 0,
            reason: "need at least an input and an output width",
        });
    }
    if let Some((index, &value)) = widths.iter().enumerate().find(|(_, &w)| w == 0) {
        return Err(Error::InvalidWidths {
            index,
            value,
            reason: "widths must be positive",
        });
    }
    let last = widths.len() - 1;
    if widths[last] != 1 {
        return Err(Error::InvalidWidths {
            index: last,
            value: widths[last],
            reason: "output width must be 1",
        });
    }
    Ok(())
}

/// Number of parameters of a network with the given widths.
pub fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl<T: Real> Mlp<T> {
    /// All-zero network.
    pub fn zeros(widths: &[usize], activation: Activation) -> Result<Self> {
        validate_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| Layer {
                weight: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Mlp {
            widths: widths.to_vec(),
            activation,
            layers,
            param_bound: 1.0,
        })
    }

    /// Glorot-uniform weights, zero biases, drawn from the seeded initialization stream.
    ///
    /// Weights are sampled in double precision and rounded, so `f32` and `f64` networks
    /// built from the same seed agree to single precision.
    pub fn xavier(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(widths, activation)?;
        let mut rng = rng::stream(seed, rng::streams::INIT);
        for layer in &mut net.layers {
            let (n_out, n_in) = layer.weight.dim();
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for w in layer.weight.iter_mut() {
                *w = T::lit(rng.random_range(-limit..limit));
            }
        }
        net.param_bound = net.max_abs_param().max(f64::MIN_POSITIVE);
        Ok(net)
    }

    pub fn from_params(widths: &[usize], activation: Activation, params: &[T]) -> Result<Self> {
        let mut net = Self::zeros(widths, activation)?;
        net.set_params(params)?;
        net.param_bound = net.max_abs_param();
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Number of affine layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn num_params(&self) -> usize {
        param_count(&self.widths)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Declared bound `R` on `|θ|∞`; metadata only, never enforced during training.
    pub fn param_bound(&self) -> f64 {
        self.param_bound
    }

    pub fn set_param_bound(&mut self, bound: f64) {
        self.param_bound = bound;
    }

    pub fn max_abs_param(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .fold(0.0f64, |m, v| m.max(v.abs().to_f64_lossy()))
    }

    /// Flattened parameters: layer by layer, row-major weights followed by the bias.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend(layer.weight.iter().copied());
            out.extend(layer.bias.iter().copied());
        }
        out
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.num_params(),
                found: params.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.weight.iter_mut() {
                *w = params[offset];
                offset += 1;
            }
            for b in layer.bias.iter_mut() {
                *b = params[offset];
                offset += 1;
            }
        }
        Ok(())
    }

    /// Multiplies the output layer (weights and bias) by `factor`.
    pub fn scale_output(&mut self, factor: T) {
        let last = self.layers.last_mut().expect("at least one layer");
        last.weight.mapv_inplace(|w| w * factor);
        last.bias.mapv_inplace(|b| b * factor);
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            widths: self.widths.clone(),
            activation: self.activation,
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: l.weight.mapv(|w| U::lit(w.to_f64_lossy())),
                    bias: l.bias.mapv(|b| U::lit(b.to_f64_lossy())),
                })
                .collect(),
            param_bound: self.param_bound,
        }
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "input point",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Value, gradient and Laplacian at a single point, by exact forward propagation.
    pub fn eval_field(&self, x: &[T]) -> Result<FieldEval<T>> {
        self.check_point(x)?;
        let points = Array2::from_shape_vec((x.len(), 1), x.to_vec()).expect("column");
        let (out, _) = self.forward(points.view(), EvalMode::Full);
        Ok(FieldEval {
            value: out.values[0],
            gradient: out.gradients.expect("full mode").column(0).to_vec(),
            laplacian: out.laplacians.expect("full mode")[0],
        })
    }

    /// Scalar network output only.
    pub fn eval_value(&self, x: &[T]) -> Result<T> {
        self.check_point(x)?;
        let points = Array2::from_shape_vec((x.len(), 1), x.to_vec()).expect("column");
        Ok(self.forward(points.view(), EvalMode::Value).0.values[0])
    }

    /// `∂/∂θ [w_v·value + w_g·gradient + w_Δ·laplacian]` at `x`.
    pub fn param_gradient(&self, x: &[T], cotangent: &Cotangent<T>) -> Result<Vec<T>> {
        self.check_point(x)?;
        if cotangent.gradient.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "gradient cotangent",
                expected: self.input_dim(),
                found: cotangent.gradient.len(),
            });
        }
        let points = Array2::from_shape_vec((x.len(), 1), x.to_vec()).expect("column");
        let (_, tape) = self.forward(points.view(), EvalMode::Full);
        let grad_cot = Array2::from_shape_vec((x.len(), 1), cotangent.gradient.clone())
            .expect("column");
        let mut out = vec![T::zero(); self.num_params()];
        self.backward(
            &tape,
            &Cotangents {
                value: &[cotangent.value],
                gradient: Some(grad_cot.view()),
                laplacian: Some(&[cotangent.laplacian]),
            },
            &mut out,
        );
        Ok(out)
    }
}
