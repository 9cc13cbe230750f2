//! Chunked evaluation of pointwise losses over a collocation set with a reduction whose
//! order depends only on the set size.

use std::ops::Range;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::geometry::SampleSet;
use crate::nn::{BatchEval, Cotangents, EvalMode, Mlp, Tape};
use crate::problems::AnalyticField;
use crate::scalar::{pairwise_sum, pairwise_sum_vectors, Real};

/// Points per propagation block.
pub const CHUNK: usize = 64;
/// Fixed number of accumulation groups, independent of the worker count.
const GROUPS: usize = 8;

/// A sample set converted to the working precision and split into `d x CHUNK` blocks.
#[derive(Clone, Debug)]
pub struct PointBlocks<T> {
    dim: usize,
    len: usize,
    measure: f64,
    weight: T,
    chunks: Vec<Array2<T>>,
    points: Array2<f64>,
}

impl<T: Real> PointBlocks<T> {
    pub fn new(set: &SampleSet) -> Self {
        let (len, dim) = set.points.dim();
        let chunks = (0..len.div_ceil(CHUNK))
            .map(|c| {
                let rows = c * CHUNK..((c + 1) * CHUNK).min(len);
                let block = set.points.slice(ndarray::s![rows, ..]);
                block.t().mapv(T::lit)
            })
            .collect();
        let weight = if len == 0 {
            T::zero()
        } else {
            T::lit(set.support_measure / len as f64)
        };
        Self {
            dim,
            len,
            measure: set.support_measure,
            weight,
            chunks,
            points: set.points.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Quadrature weight `measure / n`.
    pub fn weight(&self) -> T {
        self.weight
    }

    pub fn num_chunks(&self) -> usize {
        self.chunks.len()
    }

    pub fn chunk(&self, c: usize) -> ArrayView2<'_, T> {
        self.chunks[c].view()
    }

    pub fn chunk_range(&self, c: usize) -> Range<usize> {
        c * CHUNK..((c + 1) * CHUNK).min(self.len)
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let row = &self.points.as_slice().expect("standard layout")[i * self.dim..];
        &row[..self.dim]
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }
}

/// A scalar field the losses can consume.
#[derive(Clone, Copy)]
pub enum Field<'a, T> {
    Net(&'a Mlp<T>),
    Analytic(&'a AnalyticField),
    /// Frozen values, one per point of the set being evaluated.
    Values(&'a [T]),
}

impl<'a, T: Real> Field<'a, T> {
    pub fn net(&self) -> Option<&'a Mlp<T>> {
        match *self {
            Field::Net(n) => Some(n),
            _ => None,
        }
    }

    fn eval(
        &self,
        blocks: &PointBlocks<T>,
        c: usize,
        mode: EvalMode,
        keep_tape: bool,
    ) -> (BatchEval<T>, Option<Tape<T>>) {
        let range = blocks.chunk_range(c);
        match *self {
            Field::Net(net) => {
                let (e, t) = net.forward(blocks.chunk(c), mode);
                (e, keep_tape.then_some(t))
            }
            Field::Values(v) => {
                assert!(mode == EvalMode::Value, "frozen values carry no derivatives");
                assert_eq!(v.len(), blocks.len(), "frozen values do not match the set");
                let e = BatchEval {
                    values: v[range].to_vec(),
                    gradients: None,
                    laplacians: None,
                };
                (e, None)
            }
            Field::Analytic(f) => {
                let b = range.len();
                let d = blocks.dim();
                let mut values = Vec::with_capacity(b);
                let full = mode == EvalMode::Full;
                let mut gradients = Array2::zeros(if full { (d, b) } else { (0, 0) });
                let mut laplacians = Vec::new();
                for (k, i) in range.enumerate() {
                    let x = blocks.point(i);
                    if full {
                        let e = f.eval(x);
                        values.push(T::lit(e.value));
                        for p in 0..d {
                            gradients[[p, k]] = T::lit(e.gradient[p]);
                        }
                        laplacians.push(T::lit(e.laplacian));
                    } else {
                        values.push(T::lit(f.value(x)));
                    }
                }
                let e = BatchEval {
                    values,
                    gradients: full.then_some(gradients),
                    laplacians: full.then_some(laplacians),
                };
                (e, None)
            }
        }
    }
}

/// A field together with the channels a kernel reads and whether it is trained.
pub(crate) struct Slot<'a, T> {
    pub field: Field<'a, T>,
    pub mode: EvalMode,
    /// Offset of this field's parameters in the flat gradient, if trained.
    pub offset: Option<usize>,
}

/// Output cotangents a kernel writes for one slot.
pub(crate) struct SlotCot<T> {
    pub value: Vec<T>,
    /// Empty unless the slot is evaluated in [`EvalMode::Full`].
    pub laplacian: Vec<T>,
}

/// Evaluates `kernel` on every chunk and reduces its `K` per-chunk term sums; with
/// `want_grad` also returns the parameter gradient of `Σ_k` cotangent-weighted outputs.
pub(crate) fn accumulate<T, const K: usize, F>(
    blocks: &PointBlocks<T>,
    slots: &[Slot<'_, T>],
    n_params: usize,
    want_grad: bool,
    kernel: F,
) -> ([T; K], Vec<T>)
where
    T: Real,
    F: Fn(Range<usize>, &[BatchEval<T>], &mut [SlotCot<T>]) -> [T; K] + Sync,
{
    let n_chunks = blocks.num_chunks();
    let groups = GROUPS.min(n_chunks);
    if groups == 0 {
        let grad = if want_grad { vec![T::zero(); n_params] } else { Vec::new() };
        return ([T::zero(); K], grad);
    }
    let per = n_chunks.div_ceil(groups);
    let parts: Vec<(Vec<[T; K]>, Vec<T>)> = (0..groups)
        .into_par_iter()
        .map(|g| {
            let mut grad = if want_grad { vec![T::zero(); n_params] } else { Vec::new() };
            let mut terms = Vec::with_capacity(per);
            for c in g * per..((g + 1) * per).min(n_chunks) {
                let range = blocks.chunk_range(c);
                let b = range.len();
                let mut evals = Vec::with_capacity(slots.len());
                let mut tapes = Vec::with_capacity(slots.len());
                for slot in slots {
                    let keep = want_grad && slot.offset.is_some();
                    let (e, t) = slot.field.eval(blocks, c, slot.mode, keep);
                    evals.push(e);
                    tapes.push(t);
                }
                let mut cots: Vec<SlotCot<T>> = slots
                    .iter()
                    .map(|s| SlotCot {
                        value: vec![T::zero(); b],
                        laplacian: match s.mode {
                            EvalMode::Full => vec![T::zero(); b],
                            EvalMode::Value => Vec::new(),
                        },
                    })
                    .collect();
                terms.push(kernel(range, &evals, &mut cots));
                if !want_grad {
                    continue;
                }
                for ((slot, tape), cot) in slots.iter().zip(&tapes).zip(&cots) {
                    if let (Some(offset), Some(tape), Some(net)) = (slot.offset, tape, slot.field.net()) {
                        let cotangents = Cotangents {
                            value: &cot.value,
                            gradient: None,
                            laplacian: (slot.mode == EvalMode::Full).then_some(&cot.laplacian[..]),
                        };
                        net.backward(tape, &cotangents, &mut grad[offset..offset + net.num_params()]);
                    }
                }
            }
            (terms, grad)
        })
        .collect();

    let mut totals = [T::zero(); K];
    let all: Vec<&[T; K]> = parts.iter().flat_map(|(t, _)| t.iter()).collect();
    let mut column = vec![T::zero(); all.len()];
    for (k, total) in totals.iter_mut().enumerate() {
        for (slot, t) in column.iter_mut().zip(&all) {
            *slot = t[k];
        }
        *total = pairwise_sum(&column);
    }
    let grad = if want_grad {
        let grads: Vec<Vec<T>> = parts.into_iter().map(|(_, g)| g).collect();
        let mut out = vec![T::zero(); n_params];
        pairwise_sum_vectors(&grads, &mut out);
        out
    } else {
        Vec::new()
    };
    (totals, grad)
}

/// Assigns consecutive gradient offsets to the trained fields among `fields`.
pub(crate) fn layout<T: Real>(fields: &[Field<'_, T>]) -> (Vec<Option<usize>>, usize) {
    let mut offset = 0;
    let offsets = fields
        .iter()
        .map(|f| {
            f.net().map(|n| {
                let o = offset;
                offset += n.num_params();
                o
            })
        })
        .collect();
    (offsets, offset)
}

/// Values of `field` at every point of `blocks`.
pub fn field_values<T: Real>(blocks: &PointBlocks<T>, field: Field<'_, T>) -> Vec<T> {
    if let Field::Values(v) = field {
        return v.to_vec();
    }
    let mut out = Vec::with_capacity(blocks.len());
    for c in 0..blocks.num_chunks() {
        out.extend(field.eval(blocks, c, EvalMode::Value, false).0.values);
    }
    out
}
