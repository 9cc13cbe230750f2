//! Floating-point abstraction shared by the network engine, losses and optimizers.

use ndarray::NdFloat;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar used for network parameters and field evaluations: `f32` or `f64`.
pub trait Real: NdFloat + FromPrimitive + ToPrimitive + Default + Send + Sync + 'static {
    /// Short precision tag written into checkpoints and reports.
    const TAG: &'static str;

    /// Lossy conversion from a double-precision constant.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite constant")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const TAG: &'static str = "f32";
}

impl Real for f64 {
    const TAG: &'static str = "f64";
}

/// Pairwise (cascade) summation; the order of additions depends only on the length.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const BASE: usize = 32;
    if values.len() <= BASE {
        let mut acc = T::zero();
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise reduction of equally sized vectors into `out` (overwritten).
pub fn pairwise_sum_vectors<T: Real>(parts: &[Vec<T>], out: &mut [T]) {
    match parts.len() {
        0 => out.iter_mut().for_each(|o| *o = T::zero()),
        1 => out.copy_from_slice(&parts[0]),
        n => {
            let mid = n / 2;
            let mut right = vec![T::zero(); out.len()];
            pairwise_sum_vectors(&parts[..mid], out);
            pairwise_sum_vectors(&parts[mid..], &mut right);
            for (o, r) in out.iter_mut().zip(&right) {
                *o += *r;
            }
        }
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }

    #[test]
    fn pairwise_vectors() {
        let parts = vec![vec![1.0f32, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let mut out = vec![0.0; 2];
        pairwise_sum_vectors(&parts, &mut out);
        assert_eq!(out, vec![9.0, 12.0]);
    }
}
