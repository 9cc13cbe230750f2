//! Batched propagation of values, input gradients and Laplacians through an [`Mlp`],
//! with the matching reverse pass in the parameters.
//!
//! Each layer carries a stacked matrix `n_l x (C·B)` whose column blocks are the value
//! channel, one block per input coordinate for the first derivatives, and one block for
//! the Laplacian. Since the Laplacian recursion is linear in the previous layer's summed
//! second derivatives,
//!
//! ```text
//! Δh' = ρ''(z) Σ_p (A ∂_p h)² + ρ'(z) (A Δh),
//! ```
//!
//! only the sum is propagated and every layer costs one GEMM over all channels.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis};

use super::mlp::Mlp;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Network output only.
    Value,
    /// Output, input gradient and Laplacian.
    Full,
}

impl EvalMode {
    fn channels(self, dim: usize) -> usize {
        match self {
            EvalMode::Value => 1,
            EvalMode::Full => dim + 2,
        }
    }
}

/// Outputs for a batch of `B` points.
#[derive(Clone, Debug)]
pub struct BatchEval<T> {
    pub values: Vec<T>,
    /// `d x B`, present in [`EvalMode::Full`].
    pub gradients: Option<Array2<T>>,
    pub laplacians: Option<Vec<T>>,
}

/// Intermediate quantities retained for the reverse pass.
pub struct Tape<T> {
    mode: EvalMode,
    batch: usize,
    dim: usize,
    /// Stacked input of each layer.
    inputs: Vec<Array2<T>>,
    /// Stacked pre-activations of hidden layers.
    pre: Vec<Array2<T>>,
    /// `ρ', ρ'', ρ'''` at the value-channel pre-activations of hidden layers.
    slopes: Vec<[Array2<T>; 3]>,
}

impl<T> Tape<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }
}

/// Output cotangents for a batch.
pub struct Cotangents<'a, T> {
    pub value: &'a [T],
    /// `d x B`.
    pub gradient: Option<ArrayView2<'a, T>>,
    pub laplacian: Option<&'a [T]>,
}

impl<T: Real> Mlp<T> {
    /// Forward pass over the columns of `points` (`d x B`).
    pub fn forward(&self, points: ArrayView2<'_, T>, mode: EvalMode) -> (BatchEval<T>, Tape<T>) {
        let dim = self.input_dim();
        assert_eq!(points.nrows(), dim, "points must be d x B");
        let batch = points.ncols();
        let channels = mode.channels(dim);
        let act = self.activation();

        let mut stack = Array2::<T>::zeros((dim, channels * batch));
        stack.slice_mut(s![.., 0..batch]).assign(&points);
        if mode == EvalMode::Full {
            for p in 0..dim {
                stack
                    .slice_mut(s![p, (1 + p) * batch..(2 + p) * batch])
                    .fill(T::one());
            }
        }

        let depth = self.depth();
        let mut inputs = Vec::with_capacity(depth);
        let mut pre = Vec::with_capacity(depth - 1);
        let mut slopes = Vec::with_capacity(depth - 1);

        for (index, layer) in self.layers().iter().enumerate() {
            let n_out = layer.weight.nrows();
            let mut z = Array2::<T>::zeros((n_out, channels * batch));
            general_mat_mul(T::one(), &layer.weight, &stack, T::zero(), &mut z);
            for (mut row, &b) in z
                .slice_mut(s![.., 0..batch])
                .axis_iter_mut(Axis(0))
                .zip(layer.bias.iter())
            {
                row.mapv_inplace(|v| v + b);
            }
            inputs.push(std::mem::replace(&mut stack, Array2::zeros((0, 0))));
            if index + 1 == depth {
                stack = z;
                break;
            }

            let mut out = Array2::<T>::zeros((n_out, channels * batch));
            let mut d1 = Array2::<T>::zeros((n_out, batch));
            let mut d2 = Array2::<T>::zeros((n_out, batch));
            let mut d3 = Array2::<T>::zeros((n_out, batch));
            let mut sq = vec![T::zero(); batch];
            for i in 0..n_out {
                let zrow = z.row(i);
                let zrow = zrow.as_slice().expect("standard layout");
                let orow = out.row_mut(i).into_slice().expect("standard layout");
                let d1r = d1.row_mut(i).into_slice().expect("standard layout");
                let d2r = d2.row_mut(i).into_slice().expect("standard layout");
                let d3r = d3.row_mut(i).into_slice().expect("standard layout");
                for ((((o, a), b), c), &zv) in orow[..batch]
                    .iter_mut()
                    .zip(d1r.iter_mut())
                    .zip(d2r.iter_mut())
                    .zip(d3r.iter_mut())
                    .zip(&zrow[..batch])
                {
                    let [r0, r1, r2, r3] = act.derivatives(zv);
                    *o = r0;
                    *a = r1;
                    *b = r2;
                    *c = r3;
                }
                if mode == EvalMode::Full {
                    sq.iter_mut().for_each(|v| *v = T::zero());
                    for p in 0..dim {
                        let block = (1 + p) * batch..(2 + p) * batch;
                        for (((o, acc), &zg), &r1) in orow[block.clone()]
                            .iter_mut()
                            .zip(sq.iter_mut())
                            .zip(&zrow[block])
                            .zip(d1r.iter())
                        {
                            *o = r1 * zg;
                            *acc += zg * zg;
                        }
                    }
                    let block = (1 + dim) * batch..(2 + dim) * batch;
                    for ((((o, &acc), &zl), &r1), &r2) in orow[block.clone()]
                        .iter_mut()
                        .zip(sq.iter())
                        .zip(&zrow[block])
                        .zip(d1r.iter())
                        .zip(d2r.iter())
                    {
                        *o = r2 * acc + r1 * zl;
                    }
                }
            }
            pre.push(z);
            slopes.push([d1, d2, d3]);
            stack = out;
        }

        let values = stack.slice(s![0, 0..batch]).to_vec();
        let (gradients, laplacians) = match mode {
            EvalMode::Value => (None, None),
            EvalMode::Full => {
                let mut g = Array2::<T>::zeros((dim, batch));
                for p in 0..dim {
                    g.row_mut(p)
                        .assign(&stack.slice(s![0, (1 + p) * batch..(2 + p) * batch]));
                }
                let lap = stack
                    .slice(s![0, (1 + dim) * batch..(2 + dim) * batch])
                    .to_vec();
                (Some(g), Some(lap))
            }
        };
        (
            BatchEval {
                values,
                gradients,
                laplacians,
            },
            Tape {
                mode,
                batch,
                dim,
                inputs,
                pre,
                slopes,
            },
        )
    }

    /// Accumulates `Σ_k ∂/∂θ [c_v,k·value_k + c_g,k·grad_k + c_Δ,k·lap_k]` into `grad`.
    pub fn backward(&self, tape: &Tape<T>, cot: &Cotangents<'_, T>, grad: &mut [T]) {
        assert_eq!(grad.len(), self.num_params());
        let batch = tape.batch;
        let dim = tape.dim;
        let channels = tape.mode.channels(dim);
        assert_eq!(cot.value.len(), batch);

        let mut zbar = Array2::<T>::zeros((1, channels * batch));
        zbar.slice_mut(s![0, 0..batch])
            .iter_mut()
            .zip(cot.value)
            .for_each(|(z, &c)| *z = c);
        if tape.mode == EvalMode::Full {
            if let Some(g) = cot.gradient {
                for p in 0..dim {
                    zbar.slice_mut(s![0, (1 + p) * batch..(2 + p) * batch])
                        .assign(&g.row(p));
                }
            }
            if let Some(l) = cot.laplacian {
                zbar.slice_mut(s![0, (1 + dim) * batch..(2 + dim) * batch])
                    .iter_mut()
                    .zip(l)
                    .for_each(|(z, &c)| *z = c);
            }
        }

        // Parameter offsets of every layer in the flat vector.
        let mut offsets = Vec::with_capacity(self.depth());
        let mut offset = 0;
        for layer in self.layers() {
            offsets.push(offset);
            offset += layer.weight.len() + layer.bias.len();
        }

        for index in (0..self.depth()).rev() {
            let layer = &self.layers()[index];
            let (n_out, n_in) = layer.weight.dim();
            let start = offsets[index];
            {
                let (gw, rest) = grad[start..].split_at_mut(n_out * n_in);
                let mut gw =
                    ndarray::ArrayViewMut2::from_shape((n_out, n_in), gw).expect("weight block");
                general_mat_mul(T::one(), &zbar, &tape.inputs[index].t(), T::one(), &mut gw);
                for (i, gb) in rest[..n_out].iter_mut().enumerate() {
                    let row = zbar.row(i);
                    *gb += crate::scalar::pairwise_sum(
                        &row.as_slice().expect("standard layout")[..batch],
                    );
                }
            }
            if index == 0 {
                break;
            }
            // Cotangent of the previous layer's stacked output.
            let mut ybar = Array2::<T>::zeros((n_in, channels * batch));
            general_mat_mul(T::one(), &layer.weight.t(), &zbar, T::zero(), &mut ybar);

            // Through the activation of hidden layer `index - 1`.
            let z = &tape.pre[index - 1];
            let [d1, d2, d3] = &tape.slopes[index - 1];
            let mut next = Array2::<T>::zeros((n_in, channels * batch));
            let two = T::lit(2.0);
            let mut sq = vec![T::zero(); batch];
            for i in 0..n_in {
                let zr = z.row(i);
                let zr = zr.as_slice().expect("standard layout");
                let yr = ybar.row(i);
                let yr = yr.as_slice().expect("standard layout");
                let d1r = d1.row(i);
                let d2r = d2.row(i);
                let d3r = d3.row(i);
                let (d1r, d2r, d3r) = (
                    d1r.as_slice().expect("standard layout"),
                    d2r.as_slice().expect("standard layout"),
                    d3r.as_slice().expect("standard layout"),
                );
                let nr = next.row_mut(i).into_slice().expect("standard layout");
                // Value channel: h̄ ρ'.
                for ((n, &y), &r1) in nr[..batch].iter_mut().zip(&yr[..batch]).zip(d1r) {
                    *n = y * r1;
                }
                if tape.mode == EvalMode::Value {
                    continue;
                }
                let lap = (1 + dim) * batch..(2 + dim) * batch;
                let sbar = &yr[lap.clone()];
                sq.iter_mut().for_each(|v| *v = T::zero());
                for p in 0..dim {
                    let block = (1 + p) * batch..(2 + p) * batch;
                    let (head, tail) = nr.split_at_mut((1 + p) * batch);
                    let zv = &mut head[..batch];
                    for (((((n, zb), acc), &zg), &gb), (&sb, (&r1, &r2))) in tail[..batch]
                        .iter_mut()
                        .zip(zv.iter_mut())
                        .zip(sq.iter_mut())
                        .zip(&zr[block.clone()])
                        .zip(&yr[block])
                        .zip(sbar.iter().zip(d1r.iter().zip(d2r)))
                    {
                        *acc += zg * zg;
                        *zb += gb * r2 * zg;
                        *n = gb * r1 + two * sb * r2 * zg;
                    }
                }
                let (head, tail) = nr.split_at_mut((1 + dim) * batch);
                let zv = &mut head[..batch];
                for (((((n, zb), &acc), &zl), &sb), (&r1, (&r2, &r3))) in tail
                    .iter_mut()
                    .zip(zv.iter_mut())
                    .zip(sq.iter())
                    .zip(&zr[lap])
                    .zip(sbar)
                    .zip(d1r.iter().zip(d2r.iter().zip(d3r)))
                {
                    *zb += sb * (r3 * acc + r2 * zl);
                    *n = sb * r1;
                }
            }
            zbar = next;
        }
    }
}
