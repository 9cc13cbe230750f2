use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbfgsConfig {
    /// Budget of accepted steps.
    pub max_iters: usize,
    pub history: usize,
    pub c1: f64,
    pub c2: f64,
    /// Loss evaluations allowed per line search.
    pub max_line_search: usize,
    pub grad_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            history: 10,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
            grad_tol: 1e-10,
        }
    }
}

/// One accepted step together with the line-search quantities that justify it.
#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsStep {
    /// One-based count of accepted steps.
    pub iteration: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub loss_before: f64,
    /// Directional derivatives at the start and end of the step.
    pub slope_before: f64,
    pub slope_after: f64,
    /// Cumulative loss evaluations.
    pub evaluations: usize,
    /// The direction was steepest descent after a failed line search.
    pub restarted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    MaxIterations,
    GradientTolerance,
    LineSearchFailure,
    Stopped,
}

#[derive(Clone, Debug)]
pub struct LbfgsResult<T> {
    pub theta: Vec<T>,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub trace: Vec<LbfgsStep>,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.to_f64_lossy() * y.to_f64_lossy()).sum()
}

/// Minimizer of the cubic matching `(x1, f1, g1)` and `(x2, f2, g2)`, clamped to `bounds`.
fn cubic_interpolate(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64, bounds: Option<(f64, f64)>) -> f64 {
    let (lo, hi) = bounds.unwrap_or(if x1 <= x2 { (x1, x2) } else { (x2, x1) });
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_square = d1 * d1 - g1 * g2;
    if d2_square >= 0.0 {
        let d2 = d2_square.sqrt();
        let min_pos = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if min_pos.is_finite() {
            return min_pos.max(lo).min(hi);
        }
    }
    (lo + hi) / 2.0
}

struct Point<T> {
    t: f64,
    f: f64,
    g: Vec<T>,
    gtd: f64,
}

struct Search<T> {
    point: Point<T>,
    evaluations: usize,
    wolfe: bool,
}

/// Strong-Wolfe line search along `d` from `x`: bracketing with cubic extrapolation,
/// then cubic zoom.
fn strong_wolfe<T: Real>(
    obj: &mut impl FnMut(&[T]) -> (T, Vec<T>),
    x: &[T],
    d: &[T],
    start: Point<T>,
    t0: f64,
    cfg: &LbfgsConfig,
) -> Search<T> {
    const TOLERANCE_CHANGE: f64 = 1e-9;
    let d_norm = d.iter().fold(0.0f64, |m, v| m.max(v.to_f64_lossy().abs()));
    let (f0, gtd0) = (start.f, start.gtd);
    let mut trial = vec![T::zero(); x.len()];
    let mut eval = |t: f64| -> Point<T> {
        let tt = T::lit(t);
        for ((y, &a), &b) in trial.iter_mut().zip(x).zip(d) {
            *y = a + tt * b;
        }
        let (f, g) = obj(&trial);
        let f = f.to_f64_lossy();
        let f = if f.is_finite() { f } else { f64::INFINITY };
        let gtd = dot(&g, d);
        Point { t, f, g, gtd }
    };

    let mut evaluations = 1;
    let mut new = eval(t0);
    let mut prev = start;
    let mut iters = 0;
    let mut bracket: Vec<Point<T>>;
    loop {
        if iters >= cfg.max_line_search {
            // Best known interval after exhausting the budget.
            bracket = vec![prev, new];
            break;
        }
        if new.f > f0 + cfg.c1 * new.t * gtd0 || (iters > 1 && new.f >= prev.f) {
            bracket = vec![prev, new];
            break;
        }
        if new.gtd.abs() <= -cfg.c2 * gtd0 {
            return Search {
                point: new,
                evaluations,
                wolfe: true,
            };
        }
        if new.gtd >= 0.0 {
            bracket = vec![prev, new];
            break;
        }
        let min_step = new.t + 0.01 * (new.t - prev.t);
        let max_step = new.t * 10.0;
        let t = cubic_interpolate(prev.t, prev.f, prev.gtd, new.t, new.f, new.gtd, Some((min_step, max_step)));
        prev = new;
        new = eval(t);
        evaluations += 1;
        iters += 1;
    }

    let mut insufficient_progress = false;
    let order = |b: &[Point<T>]| if b[0].f <= b[1].f { (0, 1) } else { (1, 0) };
    let (mut low, mut high) = order(&bracket);
    let mut wolfe = false;
    while iters < cfg.max_line_search {
        let (a, b) = (bracket[0].t, bracket[1].t);
        if (b - a).abs() * d_norm < TOLERANCE_CHANGE {
            break;
        }
        let mut t = cubic_interpolate(a, bracket[0].f, bracket[0].gtd, b, bracket[1].f, bracket[1].gtd, None);
        let (lo, hi) = (a.min(b), a.max(b));
        let eps = 0.1 * (hi - lo);
        if (hi - t).min(t - lo) < eps {
            if insufficient_progress || t >= hi || t <= lo {
                t = if (t - hi).abs() < (t - lo).abs() { hi - eps } else { lo + eps };
                insufficient_progress = false;
            } else {
                insufficient_progress = true;
            }
        } else {
            insufficient_progress = false;
        }
        let p = eval(t);
        evaluations += 1;
        iters += 1;
        if p.f > f0 + cfg.c1 * t * gtd0 || p.f >= bracket[low].f {
            bracket[high] = p;
            (low, high) = order(&bracket);
        } else {
            if p.gtd.abs() <= -cfg.c2 * gtd0 {
                wolfe = true;
            } else if p.gtd * (bracket[high].t - bracket[low].t) >= 0.0 {
                bracket.swap(high, low);
            }
            bracket[low] = p;
            if wolfe {
                break;
            }
        }
    }
    let point = bracket.swap_remove(low);
    Search {
        point,
        evaluations,
        wolfe,
    }
}

/// Limited-memory BFGS. `observer` sees every accepted step and the new iterate and
/// returns `false` to stop early.
pub fn lbfgs_minimize<T: Real>(
    mut obj: impl FnMut(&[T]) -> (T, Vec<T>),
    theta0: &[T],
    cfg: &LbfgsConfig,
    mut observer: impl FnMut(&LbfgsStep, &[T]) -> bool,
) -> Result<LbfgsResult<T>> {
    let mut x = theta0.to_vec();
    let (f, mut g) = obj(&x);
    let mut loss = f.to_f64_lossy();
    if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            iteration: 0,
            what: "initial loss",
        });
    }
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<T>, Vec<T>, f64)> = VecDeque::with_capacity(cfg.history);
    let mut h_diag = 1.0f64;
    let mut trace = Vec::new();
    let mut restarted = false;
    let mut first = true;
    let mut grad_norm = dot(&g, &g).sqrt();
    let mut termination = Termination::MaxIterations;
    let mut iteration = 0;

    while iteration < cfg.max_iters {
        if grad_norm <= cfg.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        // Two-loop recursion.
        let mut q: Vec<f64> = g.iter().map(|v| -v.to_f64_lossy()).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * s.iter().zip(&q).map(|(s, q)| s.to_f64_lossy() * q).sum::<f64>();
            q.iter_mut().zip(y).for_each(|(q, y)| *q -= a * y.to_f64_lossy());
            alphas.push(a);
        }
        q.iter_mut().for_each(|v| *v *= h_diag);
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * y.iter().zip(&q).map(|(y, q)| y.to_f64_lossy() * q).sum::<f64>();
            q.iter_mut().zip(s).for_each(|(q, s)| *q += (a - b) * s.to_f64_lossy());
        }
        let mut d: Vec<T> = q.into_iter().map(T::lit).collect();
        let mut gtd = dot(&g, &d);
        if !(gtd < 0.0) {
            history.clear();
            h_diag = 1.0;
            d = g.iter().map(|&v| -v).collect();
            gtd = dot(&g, &d);
        }
        let t0 = if first || history.is_empty() {
            let l1: f64 = g.iter().map(|v| v.to_f64_lossy().abs()).sum();
            (1.0f64).min(1.0 / l1)
        } else {
            1.0
        };
        let start = Point {
            t: 0.0,
            f: loss,
            g: g.clone(),
            gtd,
        };
        let search = strong_wolfe(&mut obj, &x, &d, start, t0, cfg);
        evaluations += search.evaluations;
        if !search.wolfe {
            if restarted || history.is_empty() {
                termination = Termination::LineSearchFailure;
                break;
            }
            log::debug!("line search failed at iteration {iteration}; restarting from steepest descent");
            history.clear();
            h_diag = 1.0;
            restarted = true;
            first = true;
            continue;
        }
        let p = search.point;
        let tt = T::lit(p.t);
        let s: Vec<T> = d.iter().map(|&v| tt * v).collect();
        x.iter_mut().zip(&s).for_each(|(x, &s)| *x += s);
        let y: Vec<T> = p.g.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let ys = dot(&y, &s);
        let (sn, yn) = (dot(&s, &s).sqrt(), dot(&y, &y).sqrt());
        if ys > 1e-10 * sn * yn {
            if history.len() == cfg.history {
                history.pop_front();
            }
            h_diag = ys / (yn * yn);
            history.push_back((s, y, 1.0 / ys));
        }
        iteration += 1;
        let step = LbfgsStep {
            iteration,
            loss: p.f,
            grad_norm: dot(&p.g, &p.g).sqrt(),
            step: p.t,
            loss_before: loss,
            slope_before: gtd,
            slope_after: p.gtd,
            evaluations,
            restarted,
        };
        loss = p.f;
        g = p.g;
        grad_norm = step.grad_norm;
        restarted = false;
        first = false;
        let go_on = observer(&step, &x);
        trace.push(step);
        if !go_on {
            termination = Termination::Stopped;
            break;
        }
    }
    if iteration >= cfg.max_iters && termination == Termination::MaxIterations && grad_norm <= cfg.grad_tol {
        termination = Termination::GradientTolerance;
    }
    Ok(LbfgsResult {
        theta: x,
        loss,
        grad_norm,
        iterations: iteration,
        evaluations,
        termination,
        trace,
    })
}
