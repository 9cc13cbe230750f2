use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// `tanh` through a single `exp`; absolute error stays at roundoff level.
#[inline]
fn fast_tanh<T: Real>(t: T) -> T {
    let one = T::one();
    let e = (T::lit(-2.0) * t.abs()).exp();
    ((one - e) / (one + e)).copysign(t)
}

/// Smooth activation applied in every hidden layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    /// Returns `[ρ(t), ρ'(t), ρ''(t), ρ'''(t)]`.
    ///
    /// Derivatives are written in terms of ρ itself; for the sigmoid the complement
    /// `1 - ρ` is computed as `ρ(-t)` so saturated inputs stay accurate and finite.
    #[inline]
    pub fn derivatives<T: Real>(self, t: T) -> [T; 4] {
        let one = T::one();
        let two = T::lit(2.0);
        let six = T::lit(6.0);
        match self {
            Activation::Tanh => {
                let r = fast_tanh(t);
                let d1 = one - r * r;
                [r, d1, -two * r * d1, (six * r * r - two) * d1]
            }
            Activation::Sigmoid => {
                let e = (-t.abs()).exp();
                let big = one / (one + e);
                let small = e / (one + e);
                let (s, c) = if t >= T::zero() { (big, small) } else { (small, big) };
                let d1 = s * c;
                [s, d1, d1 * (c - s), d1 * (one - six * d1)]
            }
        }
    }

    #[inline]
    pub fn value<T: Real>(self, t: T) -> T {
        match self {
            Activation::Tanh => fast_tanh(t),
            Activation::Sigmoid => {
                let one = T::one();
                if t >= T::zero() {
                    one / (one + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (one + e)
                }
            }
        }
    }

    /// Uniform bounds on `|ρ^(i)|`, i = 0..=3.
    pub fn derivative_bounds(self) -> [f64; 4] {
        match self {
            Activation::Tanh => [1.0, 1.0, 1.0, 2.0],
            Activation::Sigmoid => [1.0, 1.0, 1.0, 1.0],
        }
    }

    /// Lipschitz constant of ρ'' used by the second-derivative perturbation bound.
    pub fn eta(self) -> f64 {
        match self {
            Activation::Tanh => 2.0,
            Activation::Sigmoid => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_zero() {
        assert_eq!(Activation::Tanh.derivatives(0.0f64), [0.0, 1.0, 0.0, -2.0]);
        assert_eq!(
            Activation::Sigmoid.derivatives(0.0f64),
            [0.5, 0.25, 0.0, -0.125]
        );
    }

    #[test]
    fn tanh_saturates() {
        let [r, d1, d2, d3] = Activation::Tanh.derivatives(20.0f64);
        assert!((r - 1.0).abs() <= 1e-12);
        assert!(d1.abs() <= 1e-12 && d2.abs() <= 1e-12 && d3.abs() <= 1e-12);
    }

    #[test]
    fn extreme_inputs_stay_finite() {
        for act in [Activation::Tanh, Activation::Sigmoid] {
            for t in [-700.0f64, -300.0, 300.0, 700.0] {
                assert!(act.derivatives(t).iter().all(|v| v.is_finite()));
            }
            for t in [-700.0f32, 700.0] {
                assert!(act.derivatives(t).iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn central_differences_match_closed_forms() {
        let h = 1e-5;
        for act in [Activation::Tanh, Activation::Sigmoid] {
            for i in 0..=200 {
                let t = -10.0 + 0.1 * f64::from(i);
                let d = act.derivatives(t);
                let lo = act.derivatives(t - h);
                let hi = act.derivatives(t + h);
                for k in 0..3 {
                    let fd = (hi[k] - lo[k]) / (2.0 * h);
                    assert!((fd - d[k + 1]).abs() <= 1e-6, "{act:?} t={t} order {k}");
                }
            }
        }
    }

    #[test]
    fn derivative_bounds_hold_on_grid() {
        for act in [Activation::Tanh, Activation::Sigmoid] {
            let bounds = act.derivative_bounds();
            for i in 0..=4000 {
                let t = -20.0 + 0.01 * f64::from(i);
                let d = act.derivatives(t);
                for k in 0..4 {
                    assert!(d[k].abs() <= bounds[k] + 1e-15);
                }
            }
        }
    }
}
