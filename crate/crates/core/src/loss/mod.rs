//! Residuals and empirical losses for the coupled system and for the baseline methods'
//! sub-problems.

mod engine;

use serde::{Deserialize, Serialize};

pub use engine::{field_values, Field, PointBlocks, CHUNK};

use crate::error::{Error, Result};
use crate::geometry::SampleSet;
use crate::nn::{EvalMode, FieldEval};
use crate::problems::{ControlBounds, ProblemSpec};
use crate::scalar::{pairwise_sum, Real};
use engine::{accumulate, layout, Slot, SlotCot};

/// `min(max(v, lower), upper)`.
pub fn project_control(v: f64, lower: f64, upper: f64) -> Result<f64> {
    Ok(ControlBounds::new(lower, upper)?.project(v))
}

/// Weights of the adjoint residual and of the two boundary terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub interior: f64,
    pub boundary_y: f64,
    pub boundary_p: f64,
}

impl LossWeights {
    /// `α_i = 1/λ`, `α_b_y = α_b`, `α_b_p = α_i α_b`.
    pub fn defaults(lambda: f64, alpha_b: f64) -> Self {
        let interior = 1.0 / lambda;
        Self {
            interior,
            boundary_y: alpha_b,
            boundary_p: interior * alpha_b,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown<T> {
    pub state_residual_term: T,
    pub adjoint_residual_term: T,
    pub boundary_y_term: T,
    pub boundary_p_term: T,
    pub total: T,
    /// Cost functional at the recovered control; not part of `total`.
    pub objective: T,
}

/// Problem data evaluated once on fixed interior and boundary sets.
#[derive(Clone, Debug)]
pub struct Collocation<T> {
    pub interior: PointBlocks<T>,
    pub boundary: PointBlocks<T>,
    pub f: Vec<T>,
    pub y_d: Vec<T>,
    /// Reaction coefficient `k(x)` at interior points.
    pub k: Vec<T>,
    pub g: Vec<T>,
    pub c0: T,
    pub lambda: T,
    pub bounds: Option<(T, T)>,
}

impl<T: Real> Collocation<T> {
    pub fn new(problem: &ProblemSpec, interior: &SampleSet, boundary: &SampleSet) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::EmptySampleSet("interior"));
        }
        if boundary.is_empty() {
            return Err(Error::EmptySampleSet("boundary"));
        }
        for set in [interior, boundary] {
            if set.dim() != problem.dim() {
                return Err(Error::DimensionMismatch {
                    what: "collocation points",
                    expected: problem.dim(),
                    found: set.dim(),
                });
            }
        }
        let at = |set: &SampleSet, h: &dyn Fn(&[f64]) -> f64| -> Vec<T> {
            set.iter().map(|x| T::lit(h(x))).collect()
        };
        Ok(Self {
            interior: PointBlocks::new(interior),
            boundary: PointBlocks::new(boundary),
            f: at(interior, &*problem.f),
            y_d: at(interior, &*problem.y_d),
            k: at(interior, &|x| problem.pde.k(x)),
            g: at(boundary, &*problem.g),
            c0: T::lit(problem.pde.c0),
            lambda: T::lit(problem.lambda),
            bounds: problem.bounds.map(|b| (T::lit(b.lower), T::lit(b.upper))),
        })
    }

    /// `(-p/λ` projected, `∂/∂p` of it`)`.
    #[inline]
    pub fn recover(&self, p: T) -> (T, T) {
        let u = -p / self.lambda;
        let slope = -T::one() / self.lambda;
        match self.bounds {
            Some((lo, _)) if u < lo => (lo, T::zero()),
            Some((_, hi)) if u > hi => (hi, T::zero()),
            _ => (u, slope),
        }
    }

    pub fn project(&self, u: T) -> T {
        match self.bounds {
            Some((lo, hi)) => u.max(lo).min(hi),
            None => u,
        }
    }

    /// Loss of the zero fields, the natural magnitude of the data.
    pub fn data_scale(&self, weights: &LossWeights) -> T {
        let w = self.interior.weight();
        let wb = self.boundary.weight();
        let sq = |v: &[T]| pairwise_sum(&v.iter().map(|&a| a * a).collect::<Vec<_>>());
        w * sq(&self.f) + T::lit(weights.interior) * w * sq(&self.y_d)
            + T::lit(weights.boundary_y) * wb * sq(&self.g)
    }
}

/// Pointwise `(r_state, r_adjoint)` of the coupled system at `x`.
pub fn cpinn_residuals(problem: &ProblemSpec, y: &FieldEval<f64>, p: &FieldEval<f64>, x: &[f64]) -> (f64, f64) {
    let pde = &problem.pde;
    let u = problem.recover_control(p.value);
    let r_state = y.laplacian - pde.c0 * y.value - pde.q(x, y.value) + (problem.f)(x) + u;
    let r_adjoint = p.laplacian - pde.c0 * p.value - pde.q_y(x, y.value) * p.value + y.value
        - (problem.y_d)(x);
    (r_state, r_adjoint)
}

/// Per-point scratch for one chunk, summed pairwise.
struct Sums<T, const K: usize>([[T; CHUNK]; K]);

impl<T: Real, const K: usize> Sums<T, K> {
    fn new() -> Self {
        Self([[T::zero(); CHUNK]; K])
    }

    fn finish(&self, len: usize) -> [T; K] {
        std::array::from_fn(|k| pairwise_sum(&self.0[k][..len]))
    }
}

fn lap<T: Real>(e: &crate::nn::BatchEval<T>) -> &[T] {
    e.laplacians.as_deref().expect("full evaluation")
}

/// Empirical coupled loss; the gradient covers the trained fields in the order `(y, p)`.
pub fn empirical_loss<T: Real>(
    col: &Collocation<T>,
    y: Field<'_, T>,
    p: Field<'_, T>,
    weights: &LossWeights,
    want_grad: bool,
) -> (LossBreakdown<T>, Vec<T>) {
    let (offsets, n_params) = layout(&[y, p]);
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let w = col.interior.weight();
    let ai = T::lit(weights.interior);
    let slots = [
        Slot { field: y, mode: EvalMode::Full, offset: offsets[0] },
        Slot { field: p, mode: EvalMode::Full, offset: offsets[1] },
    ];
    let ([state, adjoint, objective], grad_i) =
        accumulate(&col.interior, &slots, n_params, want_grad, |range, ev, cots| {
            let mut s = Sums::<T, 3>::new();
            let (ly, lp) = (lap(&ev[0]), lap(&ev[1]));
            let (cy, cp) = cots.split_at_mut(1);
            let (cy, cp): (&mut SlotCot<T>, &mut SlotCot<T>) = (&mut cy[0], &mut cp[0]);
            for (k, i) in range.clone().enumerate() {
                let (yv, pv) = (ev[0].values[k], ev[1].values[k]);
                let kk = col.k[i];
                let q = kk * yv * yv * yv;
                let qy = T::lit(3.0) * kk * yv * yv;
                let qyy = T::lit(6.0) * kk * yv;
                let (u, du) = col.recover(pv);
                let rs = ly[k] - col.c0 * yv - q + col.f[i] + u;
                let ra = lp[k] - col.c0 * pv - qy * pv + yv - col.y_d[i];
                let track = yv - col.y_d[i];
                s.0[0][k] = w * rs * rs;
                s.0[1][k] = w * ai * ra * ra;
                s.0[2][k] = w * half * (track * track + col.lambda * u * u);
                let gs = two * w * rs;
                let ga = two * w * ai * ra;
                cy.laplacian[k] = gs;
                cy.value[k] = gs * (-col.c0 - qy) + ga * (T::one() - qyy * pv);
                cp.laplacian[k] = ga;
                cp.value[k] = gs * du + ga * (-col.c0 - qy);
            }
            s.finish(range.len())
        });
    let wb = col.boundary.weight();
    let (aby, abp) = (T::lit(weights.boundary_y), T::lit(weights.boundary_p));
    let slots = [
        Slot { field: y, mode: EvalMode::Value, offset: offsets[0] },
        Slot { field: p, mode: EvalMode::Value, offset: offsets[1] },
    ];
    let ([by, bp], grad_b) = accumulate(&col.boundary, &slots, n_params, want_grad, |range, ev, cots| {
        let mut s = Sums::<T, 2>::new();
        for (k, i) in range.clone().enumerate() {
            let ry = ev[0].values[k] - col.g[i];
            let pv = ev[1].values[k];
            s.0[0][k] = wb * aby * ry * ry;
            s.0[1][k] = wb * abp * pv * pv;
            cots[0].value[k] = two * wb * aby * ry;
            cots[1].value[k] = two * wb * abp * pv;
        }
        s.finish(range.len())
    });
    let breakdown = LossBreakdown {
        state_residual_term: state,
        adjoint_residual_term: adjoint,
        boundary_y_term: by,
        boundary_p_term: bp,
        total: state + adjoint + by + bp,
        objective,
    };
    (breakdown, add(grad_i, grad_b))
}

fn add<T: Real>(mut a: Vec<T>, b: Vec<T>) -> Vec<T> {
    a.iter_mut().zip(&b).for_each(|(x, &y)| *x += y);
    a
}

/// Residual and boundary parts of a PINN sub-problem loss.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PinnTerms<T> {
    pub residual: T,
    pub boundary: T,
    pub total: T,
}

/// `(|Ω|/n_d) Σ F² + α (|∂Ω|/n_b) Σ (y - g)²` with `F = Δy - c0 y - q(x, y) + f + u`; the
/// gradient covers `y` and `u` when they are networks.
pub fn forward_pinn_loss<T: Real>(
    col: &Collocation<T>,
    y: Field<'_, T>,
    u: Field<'_, T>,
    alpha: f64,
    want_grad: bool,
) -> (PinnTerms<T>, Vec<T>) {
    let (offsets, n_params) = layout(&[y, u]);
    let two = T::lit(2.0);
    let w = col.interior.weight();
    let slots = [
        Slot { field: y, mode: EvalMode::Full, offset: offsets[0] },
        Slot { field: u, mode: EvalMode::Value, offset: offsets[1] },
    ];
    let ([residual], grad_i) = accumulate(&col.interior, &slots, n_params, want_grad, |range, ev, cots| {
        let mut s = Sums::<T, 1>::new();
        let ly = lap(&ev[0]);
        for (k, i) in range.clone().enumerate() {
            let yv = ev[0].values[k];
            let kk = col.k[i];
            let f = ly[k] - col.c0 * yv - kk * yv * yv * yv + col.f[i] + ev[1].values[k];
            s.0[0][k] = w * f * f;
            let gf = two * w * f;
            cots[0].laplacian[k] = gf;
            cots[0].value[k] = gf * (-col.c0 - T::lit(3.0) * kk * yv * yv);
            cots[1].value[k] = gf;
        }
        s.finish(range.len())
    });
    let (boundary, grad_b) = boundary_misfit(col, y, offsets[0], n_params, alpha, true, want_grad);
    (
        PinnTerms {
            residual,
            boundary,
            total: residual + boundary,
        },
        add(grad_i, grad_b),
    )
}

/// `α (|∂Ω|/n_b) Σ (v - g)²`, or `Σ v²` when `against_g` is false.
fn boundary_misfit<T: Real>(
    col: &Collocation<T>,
    v: Field<'_, T>,
    offset: Option<usize>,
    n_params: usize,
    alpha: f64,
    against_g: bool,
    want_grad: bool,
) -> (T, Vec<T>) {
    let wb = col.boundary.weight();
    let a = T::lit(alpha);
    let two = T::lit(2.0);
    let slots = [Slot { field: v, mode: EvalMode::Value, offset }];
    let ([b], grad) = accumulate(&col.boundary, &slots, n_params, want_grad, |range, ev, cots| {
        let mut s = Sums::<T, 1>::new();
        for (k, i) in range.clone().enumerate() {
            let r = if against_g { ev[0].values[k] - col.g[i] } else { ev[0].values[k] };
            s.0[0][k] = wb * a * r * r;
            cots[0].value[k] = two * wb * a * r;
        }
        s.finish(range.len())
    });
    (b, grad)
}

/// Adjoint sub-problem: `G = Δp - c0 p - ∂_y q(x, y) p + y - y_d` in the interior and
/// `p = 0` on the boundary. `y` is read through its values only.
pub fn adjoint_pinn_loss<T: Real>(
    col: &Collocation<T>,
    p: Field<'_, T>,
    y: Field<'_, T>,
    alpha: f64,
    want_grad: bool,
) -> (PinnTerms<T>, Vec<T>) {
    let (offsets, n_params) = layout(&[p]);
    let two = T::lit(2.0);
    let w = col.interior.weight();
    let slots = [
        Slot { field: p, mode: EvalMode::Full, offset: offsets[0] },
        Slot { field: y, mode: EvalMode::Value, offset: None },
    ];
    let ([residual], grad_i) = accumulate(&col.interior, &slots, n_params, want_grad, |range, ev, cots| {
        let mut s = Sums::<T, 1>::new();
        let lp = lap(&ev[0]);
        for (k, i) in range.clone().enumerate() {
            let (pv, yv) = (ev[0].values[k], ev[1].values[k]);
            let qy = T::lit(3.0) * col.k[i] * yv * yv;
            let g = lp[k] - col.c0 * pv - qy * pv + yv - col.y_d[i];
            s.0[0][k] = w * g * g;
            let gg = two * w * g;
            cots[0].laplacian[k] = gg;
            cots[0].value[k] = gg * (-col.c0 - qy);
        }
        s.finish(range.len())
    });
    let (boundary, grad_b) = boundary_misfit(col, p, offsets[0], n_params, alpha, false, want_grad);
    (
        PinnTerms {
            residual,
            boundary,
            total: residual + boundary,
        },
        add(grad_i, grad_b),
    )
}

/// `(|Ω|/n_d) Σ (u - target)²` over the interior set.
pub fn control_fit_loss<T: Real>(
    col: &Collocation<T>,
    u: Field<'_, T>,
    target: &[T],
    want_grad: bool,
) -> (T, Vec<T>) {
    assert_eq!(target.len(), col.interior.len());
    let (offsets, n_params) = layout(&[u]);
    let w = col.interior.weight();
    let two = T::lit(2.0);
    let slots = [Slot { field: u, mode: EvalMode::Value, offset: offsets[0] }];
    let ([fit], grad) = accumulate(&col.interior, &slots, n_params, want_grad, |range, ev, cots| {
        let mut s = Sums::<T, 1>::new();
        for (k, i) in range.clone().enumerate() {
            let r = ev[0].values[k] - target[i];
            s.0[0][k] = w * r * r;
            cots[0].value[k] = two * w * r;
        }
        s.finish(range.len())
    });
    (fit, grad)
}

/// Weights of the penalty and augmented-Lagrangian objectives.
#[derive(Clone, Copy, Debug)]
pub struct PenaltyParams<'a, T> {
    pub mu: f64,
    pub alpha: f64,
    /// Weight `μ'` of the box-violation term; zero disables it.
    pub mu_box: f64,
    pub eta_interior: Option<&'a [T]>,
    pub eta_boundary: Option<&'a [T]>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PenaltyTerms<T> {
    /// `½‖y - y_d‖² + (λ/2)‖u‖²`.
    pub objective: T,
    /// `½‖F‖²`.
    pub residual: T,
    /// `(α/2)‖y - g‖²` on the boundary.
    pub boundary: T,
    /// `½‖u - P_U(u)‖²`.
    pub box_violation: T,
    /// `(η_d, F) + (η_b, y - g)`.
    pub multiplier: T,
    pub total: T,
}

/// `J + μ (½‖F‖² + (α/2)‖y - g‖²) + (μ'/2)‖u - P_U u‖² + (η_d, F) + (η_b, y - g)`; the
/// gradient covers `(y, u)`.
pub fn penalty_loss<T: Real>(
    col: &Collocation<T>,
    y: Field<'_, T>,
    u: Field<'_, T>,
    params: &PenaltyParams<'_, T>,
    want_grad: bool,
) -> (PenaltyTerms<T>, Vec<T>) {
    let (offsets, n_params) = layout(&[y, u]);
    let half = T::lit(0.5);
    let w = col.interior.weight();
    let mu = T::lit(params.mu);
    let mu_box = T::lit(params.mu_box);
    if let Some(eta) = params.eta_interior {
        assert_eq!(eta.len(), col.interior.len());
    }
    let slots = [
        Slot { field: y, mode: EvalMode::Full, offset: offsets[0] },
        Slot { field: u, mode: EvalMode::Value, offset: offsets[1] },
    ];
    let ([objective, residual, box_violation, mult_d], grad_i) =
        accumulate(&col.interior, &slots, n_params, want_grad, |range, ev, cots| {
            let mut s = Sums::<T, 4>::new();
            let ly = lap(&ev[0]);
            for (k, i) in range.clone().enumerate() {
                let (yv, uv) = (ev[0].values[k], ev[1].values[k]);
                let kk = col.k[i];
                let f = ly[k] - col.c0 * yv - kk * yv * yv * yv + col.f[i] + uv;
                let track = yv - col.y_d[i];
                let viol = uv - col.project(uv);
                let eta = params.eta_interior.map_or(T::zero(), |e| e[i]);
                s.0[0][k] = w * half * (track * track + col.lambda * uv * uv);
                s.0[1][k] = w * half * f * f;
                s.0[2][k] = w * half * viol * viol;
                s.0[3][k] = w * eta * f;
                let gf = w * (mu * f + eta);
                cots[0].laplacian[k] = gf;
                cots[0].value[k] = w * track + gf * (-col.c0 - T::lit(3.0) * kk * yv * yv);
                cots[1].value[k] = w * col.lambda * uv + gf + mu_box * w * viol;
            }
            s.finish(range.len())
        });
    let wb = col.boundary.weight();
    let alpha = T::lit(params.alpha);
    if let Some(eta) = params.eta_boundary {
        assert_eq!(eta.len(), col.boundary.len());
    }
    let slots = [Slot { field: y, mode: EvalMode::Value, offset: offsets[0] }];
    let ([boundary, mult_b], grad_b) = accumulate(&col.boundary, &slots, n_params, want_grad, |range, ev, cots| {
        let mut s = Sums::<T, 2>::new();
        for (k, i) in range.clone().enumerate() {
            let r = ev[0].values[k] - col.g[i];
            let eta = params.eta_boundary.map_or(T::zero(), |e| e[i]);
            s.0[0][k] = wb * half * alpha * r * r;
            s.0[1][k] = wb * eta * r;
            cots[0].value[k] = wb * (mu * alpha * r + eta);
        }
        s.finish(range.len())
    });
    let multiplier = mult_d + mult_b;
    let terms = PenaltyTerms {
        objective,
        residual,
        boundary,
        box_violation,
        multiplier,
        total: objective + mu * (residual + boundary) + mu_box * box_violation + multiplier,
    };
    (terms, add(grad_i, grad_b))
}

/// Monte Carlo estimate of `½‖y - y_d‖² + (λ/2)‖u‖²`.
pub fn objective_j<T: Real>(col: &Collocation<T>, y: Field<'_, T>, u: Field<'_, T>) -> T {
    let yv = field_values(&col.interior, y);
    let uv = field_values(&col.interior, u);
    let half = T::lit(0.5);
    let terms: Vec<T> = (0..yv.len())
        .map(|i| {
            let t = yv[i] - col.y_d[i];
            half * (t * t + col.lambda * uv[i] * uv[i])
        })
        .collect();
    col.interior.weight() * pairwise_sum(&terms)
}

/// Pointwise state residual `F` and boundary misfit `y - g`, used by multiplier updates.
pub fn constraint_residuals<T: Real>(
    col: &Collocation<T>,
    y: Field<'_, T>,
    u: Field<'_, T>,
) -> (Vec<T>, Vec<T>) {
    let slots = [
        Slot { field: y, mode: EvalMode::Full, offset: None },
        Slot { field: u, mode: EvalMode::Value, offset: None },
    ];
    let out = std::sync::Mutex::new(vec![T::zero(); col.interior.len()]);
    accumulate::<T, 0, _>(&col.interior, &slots, 0, false, |range, ev, _| {
        let ly = lap(&ev[0]);
        let mut out = out.lock().expect("residual buffer");
        for (k, i) in range.enumerate() {
            let yv = ev[0].values[k];
            out[i] = ly[k] - col.c0 * yv - col.k[i] * yv * yv * yv + col.f[i] + ev[1].values[k];
        }
        []
    });
    let yb = field_values(&col.boundary, y);
    let misfit = yb.iter().zip(&col.g).map(|(&a, &g)| a - g).collect();
    (out.into_inner().expect("residual buffer"), misfit)
}
