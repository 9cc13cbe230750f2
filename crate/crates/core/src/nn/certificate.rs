//! Analytic a-priori bounds on network values and input derivatives in terms of depth,
//! widths and the parameter bound `R`.
//!
//! With `π_i = n_1 ⋯ n_i` (and `π_0 := n_0`), for every layer `ℓ` and coordinate `p`:
//!
//! * `|∂_p f^(ℓ)| ≤ π_{ℓ-1} R^ℓ`,
//! * `|∂²_p f^(ℓ)| ≤ ℓ π_{ℓ-1}² R^{2ℓ}`,
//! * `|∂²_p f_θ - ∂²_p f_θ̃| ≤ 2(L-1)L η sqrt(n_L) π_{L-1}³ R^{3L-3} ‖θ - θ̃‖₂`,
//!
//! where `n_L` counts nonzero parameters and `η` is the Lipschitz constant of `ρ''`.
//! Points are assumed to lie in `[-1, 1]^d` and hidden widths to satisfy `n_ℓ R ≥ 1`.

use super::{Activation, Mlp};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundCertificate {
    /// The `R` actually used: the declared bound, raised to `max |θ_i|` if that is larger.
    pub param_bound: f64,
    pub widths: Vec<usize>,
    /// `π_0 ..= π_{L-1}`.
    pub width_products: Vec<f64>,
    /// Per layer `ℓ = 1..=L`: bound on `|f^(ℓ)_q|`.
    pub value_bounds: Vec<f64>,
    /// Per layer `ℓ = 1..=L`: bound on `|∂_p f^(ℓ)_q|`.
    pub gradient_bounds: Vec<f64>,
    /// Per layer `ℓ = 1..=L`: bound on `|∂²_p f^(ℓ)_q|`.
    pub second_derivative_bounds: Vec<f64>,
    pub nonzero_params: usize,
    pub activation: Activation,
}

pub fn bound_certificate<T: Real>(net: &Mlp<T>) -> BoundCertificate {
    let r = net.param_bound().max(net.max_abs_param());
    let widths = net.widths().to_vec();
    let depth = widths.len() - 1;
    let mut width_products = vec![widths[0] as f64];
    for l in 1..depth {
        let prev = if l == 1 { 1.0 } else { width_products[l - 1] };
        width_products.push(prev * widths[l] as f64);
    }
    let mut value_bounds = vec![1.0; depth];
    // The output bias adds one more `R` to the final affine layer.
    value_bounds[depth - 1] = (widths[depth - 1] as f64 + 1.0) * r;
    let gradient_bounds = (1..=depth)
        .map(|l| width_products[l - 1] * r.powi(l as i32))
        .collect();
    let second_derivative_bounds = (1..=depth)
        .map(|l| l as f64 * width_products[l - 1].powi(2) * r.powi(2 * l as i32))
        .collect();
    let nonzero_params = net.params().iter().filter(|v| **v != T::zero()).count();
    BoundCertificate {
        param_bound: r,
        widths,
        width_products,
        value_bounds,
        gradient_bounds,
        second_derivative_bounds,
        nonzero_params,
        activation: net.activation(),
    }
}

impl BoundCertificate {
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    /// Coarse bound `d·L·n_L^{2L}·R^{2L}` on the Laplacian of the output.
    pub fn laplacian_bound(&self) -> f64 {
        let l = self.depth() as i32;
        self.widths[0] as f64
            * f64::from(l)
            * (self.nonzero_params as f64).powi(2 * l)
            * self.param_bound.powi(2 * l)
    }

    /// Lipschitz constant of `θ ↦ ∂²_p f_θ(x)` over parameters bounded by `R`.
    ///
    /// `nonzero_params` should be the larger count of the two networks compared.
    pub fn second_derivative_lipschitz(&self, nonzero_params: usize) -> f64 {
        let l = self.depth();
        let pi = self.width_products[l - 1];
        2.0 * (l as f64 - 1.0)
            * l as f64
            * self.activation.eta()
            * (nonzero_params as f64).sqrt()
            * pi.powi(3)
            * self.param_bound.powi(3 * l as i32 - 3)
    }
}

/// Per-layer values and per-coordinate first and second input derivatives at one point.
#[derive(Clone, Debug)]
pub struct LayerDerivatives {
    pub values: Vec<f64>,
    /// `gradients[p][q] = ∂_p f^(ℓ)_q`.
    pub gradients: Vec<Vec<f64>>,
    /// `second[p][q] = ∂²_p f^(ℓ)_q`.
    pub second: Vec<Vec<f64>>,
}

/// Reference evaluator running one second-directional-derivative pass per coordinate.
pub fn layerwise_derivatives<T: Real>(net: &Mlp<T>, x: &[f64]) -> Vec<LayerDerivatives> {
    let dim = x.len();
    let act = net.activation();
    let depth = net.depth();
    let mut h = x.to_vec();
    let mut g: Vec<Vec<f64>> = (0..dim)
        .map(|p| (0..dim).map(|j| if j == p { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut s: Vec<Vec<f64>> = vec![vec![0.0; dim]; dim];
    let mut out = Vec::with_capacity(depth);
    for (index, layer) in net.layers().iter().enumerate() {
        let (n_out, n_in) = layer.weight.dim();
        let w = |i: usize, j: usize| layer.weight[[i, j]].to_f64_lossy();
        let mut nh = vec![0.0; n_out];
        let mut ng = vec![vec![0.0; n_out]; dim];
        let mut ns = vec![vec![0.0; n_out]; dim];
        for i in 0..n_out {
            let z = layer.bias[i].to_f64_lossy() + (0..n_in).map(|j| w(i, j) * h[j]).sum::<f64>();
            let last = index + 1 == depth;
            let [r0, r1, r2, _] = if last {
                [z, 1.0, 0.0, 0.0]
            } else {
                act.derivatives(z)
            };
            nh[i] = r0;
            for p in 0..dim {
                let zg: f64 = (0..n_in).map(|j| w(i, j) * g[p][j]).sum();
                let zs: f64 = (0..n_in).map(|j| w(i, j) * s[p][j]).sum();
                ng[p][i] = r1 * zg;
                ns[p][i] = r2 * zg * zg + r1 * zs;
            }
        }
        h = nh;
        g = ng;
        s = ns;
        out.push(LayerDerivatives {
            values: h.clone(),
            gradients: g.clone(),
            second: s.clone(),
        });
    }
    out
}
