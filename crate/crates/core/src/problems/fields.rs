//! Analytic scalar fields with gradients and Laplacians.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::nn::FieldEval;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(&[f64]) -> FieldEval<f64> + Send + Sync>;

/// Step for the finite-difference fallback.
pub const FD_STEP: f64 = 1e-4;

/// A twice differentiable closure. Fields built from a bare value closure carry
/// finite-difference derivatives and say so.
#[derive(Clone)]
pub struct AnalyticField {
    eval: FieldFn,
    exact_derivatives: bool,
}

impl fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticField")
            .field("exact_derivatives", &self.exact_derivatives)
            .finish_non_exhaustive()
    }
}

impl AnalyticField {
    pub fn new(eval: impl Fn(&[f64]) -> FieldEval<f64> + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            exact_derivatives: true,
        }
    }

    /// Gradient and Laplacian by central differences with step [`FD_STEP`].
    pub fn value_only(value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        let value: ScalarFn = Arc::new(value);
        Self {
            eval: Arc::new(move |x| finite_difference_eval(&*value, x, FD_STEP)),
            exact_derivatives: false,
        }
    }

    pub fn zero() -> Self {
        Self::new(|x| FieldEval {
            value: 0.0,
            gradient: vec![0.0; x.len()],
            laplacian: 0.0,
        })
    }

    pub fn has_exact_derivatives(&self) -> bool {
        self.exact_derivatives
    }

    pub fn eval(&self, x: &[f64]) -> FieldEval<f64> {
        (self.eval)(x)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x).value
    }

    /// `s * self`.
    pub fn scaled(&self, s: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            eval: Arc::new(move |x| {
                let mut e = inner(x);
                e.value *= s;
                e.gradient.iter_mut().for_each(|g| *g *= s);
                e.laplacian *= s;
                e
            }),
            exact_derivatives: self.exact_derivatives,
        }
    }

    pub fn as_fn(&self) -> ScalarFn {
        let inner = self.eval.clone();
        Arc::new(move |x| inner(x).value)
    }
}

pub fn finite_difference_eval(f: &(dyn Fn(&[f64]) -> f64 + Send + Sync), x: &[f64], h: f64) -> FieldEval<f64> {
    let f0 = f(x);
    let mut xs = x.to_vec();
    let mut gradient = Vec::with_capacity(x.len());
    let mut laplacian = 0.0;
    for i in 0..x.len() {
        xs[i] = x[i] + h;
        let fp = f(&xs);
        xs[i] = x[i] - h;
        let fm = f(&xs);
        xs[i] = x[i];
        gradient.push((fp - fm) / (2.0 * h));
        laplacian += (fp - 2.0 * f0 + fm) / (h * h);
    }
    FieldEval {
        value: f0,
        gradient,
        laplacian,
    }
}

/// Built-in closed-form fields, addressable from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldFamily {
    Zero,
    /// `|x|²`.
    RadialSquare,
    /// `∏ sin(π x_i)`.
    SineProduct,
    /// `e^{x1(1-x1)} sin(π x2) + e^{x2(1-x2)} sin(π x1)`, planar.
    ExpSineSum,
    /// `(r - r_inner)(r - r_outer) sin θ`, planar.
    AnnulusSine { r_inner: f64, r_outer: f64 },
    /// `x1 x2 (1 + cos π x1)(1 + cos π x2)`, planar.
    CosineBump,
}

impl FieldFamily {
    pub fn planar_only(&self) -> bool {
        matches!(
            self,
            FieldFamily::ExpSineSum | FieldFamily::AnnulusSine { .. } | FieldFamily::CosineBump
        )
    }

    pub fn field(&self) -> AnalyticField {
        match *self {
            FieldFamily::Zero => AnalyticField::zero(),
            FieldFamily::RadialSquare => AnalyticField::new(radial_square),
            FieldFamily::SineProduct => AnalyticField::new(sine_product),
            FieldFamily::ExpSineSum => AnalyticField::new(exp_sine_sum),
            FieldFamily::AnnulusSine { r_inner, r_outer } => {
                AnalyticField::new(move |x| annulus_sine(r_inner, r_outer, x))
            }
            FieldFamily::CosineBump => AnalyticField::new(cosine_bump),
        }
    }
}

fn radial_square(x: &[f64]) -> FieldEval<f64> {
    FieldEval {
        value: x.iter().map(|v| v * v).sum(),
        gradient: x.iter().map(|v| 2.0 * v).collect(),
        laplacian: 2.0 * x.len() as f64,
    }
}

fn sine_product(x: &[f64]) -> FieldEval<f64> {
    let s: Vec<f64> = x.iter().map(|v| (PI * v).sin()).collect();
    let value: f64 = s.iter().product();
    let gradient = (0..x.len())
        .map(|i| {
            let others: f64 = s
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v)
                .product();
            PI * (PI * x[i]).cos() * others
        })
        .collect();
    FieldEval {
        value,
        gradient,
        laplacian: -(x.len() as f64) * PI * PI * value,
    }
}

fn exp_sine_sum(x: &[f64]) -> FieldEval<f64> {
    let phi = |t: f64| {
        let e = (t * (1.0 - t)).exp();
        let a = 1.0 - 2.0 * t;
        (e, a * e, (a * a - 2.0) * e)
    };
    let (p1, dp1, ddp1) = phi(x[0]);
    let (p2, dp2, ddp2) = phi(x[1]);
    let (s1, c1) = (PI * x[0]).sin_cos();
    let (s2, c2) = (PI * x[1]).sin_cos();
    FieldEval {
        value: p1 * s2 + p2 * s1,
        gradient: vec![dp1 * s2 + p2 * PI * c1, p1 * PI * c2 + dp2 * s1],
        laplacian: (ddp1 - PI * PI * p1) * s2 + (ddp2 - PI * PI * p2) * s1,
    }
}

fn annulus_sine(a: f64, b: f64, x: &[f64]) -> FieldEval<f64> {
    // (r-a)(r-b) sinθ = x2 h(r) with h(r) = r - (a+b) + ab/r.
    let r = x[0].hypot(x[1]);
    let h = r - (a + b) + a * b / r;
    let dh = 1.0 - a * b / (r * r);
    let ddh = 2.0 * a * b / (r * r * r);
    FieldEval {
        value: x[1] * h,
        gradient: vec![x[1] * dh * x[0] / r, h + x[1] * dh * x[1] / r],
        laplacian: x[1] * (ddh + 3.0 * dh / r),
    }
}

fn cosine_bump(x: &[f64]) -> FieldEval<f64> {
    let c = |t: f64| {
        let (s, co) = (PI * t).sin_cos();
        (
            t * (1.0 + co),
            1.0 + co - PI * t * s,
            -2.0 * PI * s - PI * PI * t * co,
        )
    };
    let (c1, dc1, ddc1) = c(x[0]);
    let (c2, dc2, ddc2) = c(x[1]);
    FieldEval {
        value: c1 * c2,
        gradient: vec![dc1 * c2, c1 * dc2],
        laplacian: ddc1 * c2 + c1 * ddc2,
    }
}
