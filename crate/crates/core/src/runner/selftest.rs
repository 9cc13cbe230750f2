//! Property suites for the network engine: derivatives against finite differences and
//! the a-priori bound certificate against observed derivatives.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::nn::certificate::layerwise_derivatives;
use crate::nn::{bound_certificate, Activation, Cotangent, Mlp};
use crate::rng;

const GRADIENT_FD_STEP: f64 = 4e-3;
const LAPLACIAN_FD_STEP: f64 = 1e-2;
const PARAM_FD_STEP: f64 = 1e-3;
/// Denominator floor of the relative errors.
const ERROR_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeReport {
    pub nets: usize,
    pub points: usize,
    pub max_gradient_error: f64,
    pub max_laplacian_error: f64,
    pub max_param_error: f64,
}

impl DerivativeReport {
    pub fn pass(&self, input_tol: f64, param_tol: f64) -> bool {
        self.max_gradient_error <= input_tol
            && self.max_laplacian_error <= input_tol
            && self.max_param_error <= param_tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub pairs: usize,
    pub checks: usize,
    pub violations: usize,
    /// Largest observed-to-bound ratio over all checks.
    pub worst_ratio: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(ERROR_FLOOR)
}

/// Richardson-extrapolated central first difference of `f` at 0.
fn first_difference(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Richardson-extrapolated central second difference of `f` at 0.
fn second_difference(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let f0 = f(0.0);
    let d = |h: f64| (f(h) - 2.0 * f0 + f(-h)) / (h * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn random_widths(rng: &mut ChaCha8Rng, min_width: usize) -> Vec<usize> {
    let dim = rng.random_range(1..=4);
    let hidden = rng.random_range(1..=2);
    let mut w = vec![dim];
    w.extend((0..hidden).map(|_| rng.random_range(min_width..=30)));
    w.push(1);
    w
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn activation(i: usize) -> Activation {
    if i.is_multiple_of(2) {
        Activation::Tanh
    } else {
        Activation::Sigmoid
    }
}

/// Compares `eval_field` and `param_gradient` with finite differences on `nets` random
/// networks of widths up to `[4, 30, 30, 1]`, alternating activations.
pub fn derivative_suite(nets: usize, points_per_net: usize, seed: u64) -> DerivativeReport {
    let mut rng = rng::stream(seed, rng::streams::SELFTEST);
    let mut report = DerivativeReport {
        nets,
        points: 0,
        max_gradient_error: 0.0,
        max_laplacian_error: 0.0,
        max_param_error: 0.0,
    };
    for i in 0..nets {
        let widths = random_widths(&mut rng, 1);
        let mut net = Mlp::<f64>::xavier(&widths, activation(i), rng.random()).expect("valid widths");
        let params: Vec<f64> = net
            .params()
            .iter()
            .map(|p| p + rng.random_range(-0.2..0.2))
            .collect();
        net.set_params(&params).expect("same shape");
        let dim = widths[0];
        for k in 0..points_per_net {
            let x = random_point(&mut rng, dim);
            let field = net.eval_field(&x).expect("dimension matches");
            let along = |p: usize| {
                let net = &net;
                let x = &x;
                move |t: f64| {
                    let mut y = x.clone();
                    y[p] += t;
                    net.eval_value(&y).expect("dimension matches")
                }
            };
            let mut lap = 0.0;
            for p in 0..dim {
                let g = first_difference(along(p), GRADIENT_FD_STEP);
                report.max_gradient_error = report.max_gradient_error.max(rel(field.gradient[p], g));
                lap += second_difference(along(p), LAPLACIAN_FD_STEP);
            }
            report.max_laplacian_error = report.max_laplacian_error.max(rel(field.laplacian, lap));
            report.points += 1;

            // Parameter gradients on the first point of each net.
            if k == 0 {
                let cot = Cotangent {
                    value: rng.random_range(-1.0..1.0),
                    gradient: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    laplacian: rng.random_range(-1.0..1.0),
                };
                let grad = net.param_gradient(&x, &cot).expect("dimension matches");
                let functional = |theta: &[f64]| {
                    let n = Mlp::from_params(&widths, net.activation(), theta).expect("same shape");
                    let f = n.eval_field(&x).expect("dimension matches");
                    cot.value * f.value
                        + cot.gradient.iter().zip(&f.gradient).map(|(c, g)| c * g).sum::<f64>()
                        + cot.laplacian * f.laplacian
                };
                for (j, gj) in grad.iter().enumerate() {
                    let d = first_difference(
                        |t| {
                            let mut th = params.clone();
                            th[j] += t;
                            functional(&th)
                        },
                        PARAM_FD_STEP,
                    );
                    report.max_param_error = report.max_param_error.max(rel(*gj, d));
                }
            }
        }
    }
    report
}

fn random_bounded_net(rng: &mut ChaCha8Rng, widths: &[usize], act: Activation, r: f64) -> Mlp<f64> {
    let n = crate::nn::param_count(widths);
    let theta: Vec<f64> = (0..n).map(|_| rng.random_range(-r..=r)).collect();
    let mut net = Mlp::from_params(widths, act, &theta).expect("valid widths");
    net.set_param_bound(r);
    net
}

/// Checks the layerwise value, gradient and second-derivative bounds and the
/// second-derivative Lipschitz bound on `pairs` random network pairs with
/// `|θ|∞ ≤ R ∈ {0.5, 1, 2}`.
pub fn bound_suite(pairs: usize, points_per_pair: usize, seed: u64) -> BoundReport {
    let mut rng = rng::stream(seed, rng::streams::SELFTEST);
    let mut report = BoundReport {
        pairs,
        checks: 0,
        violations: 0,
        worst_ratio: 0.0,
    };
    let check = |observed: f64, bound: f64, report: &mut BoundReport| {
        report.checks += 1;
        let ratio = if bound > 0.0 {
            observed / bound
        } else if observed == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        report.worst_ratio = report.worst_ratio.max(ratio);
        // Slack for the last bit of the observed value.
        if observed > bound * (1.0 + 1e-12) {
            report.violations += 1;
        }
    };
    for i in 0..pairs {
        let r = [0.5, 1.0, 2.0][i % 3];
        let widths = random_widths(&mut rng, 2);
        let act = activation(i / 3);
        let a = random_bounded_net(&mut rng, &widths, act, r);
        // Nearby pairs give a meaningful Lipschitz check; a few are independent draws.
        let b = if i % 5 == 4 {
            random_bounded_net(&mut rng, &widths, act, r)
        } else {
            let scale = r * 10f64.powf(rng.random_range(-4.0..0.0));
            let theta: Vec<f64> = a
                .params()
                .iter()
                .map(|t| (t + rng.random_range(-scale..=scale)).clamp(-r, r))
                .collect();
            let mut b = Mlp::from_params(&widths, act, &theta).expect("same shape");
            b.set_param_bound(r);
            b
        };
        let cert = bound_certificate(&a);
        let nonzero = cert.nonzero_params.max(bound_certificate(&b).nonzero_params);
        let lipschitz = cert.second_derivative_lipschitz(nonzero);
        let distance = a
            .params()
            .iter()
            .zip(b.params())
            .map(|(s, t)| (s - t) * (s - t))
            .sum::<f64>()
            .sqrt();
        for _ in 0..points_per_pair {
            let x = random_point(&mut rng, widths[0]);
            let la = layerwise_derivatives(&a, &x);
            for (l, layer) in la.iter().enumerate() {
                for q in 0..layer.values.len() {
                    check(layer.values[q].abs(), cert.value_bounds[l], &mut report);
                    for p in 0..widths[0] {
                        check(layer.gradients[p][q].abs(), cert.gradient_bounds[l], &mut report);
                        check(layer.second[p][q].abs(), cert.second_derivative_bounds[l], &mut report);
                    }
                }
            }
            let lb = layerwise_derivatives(&b, &x);
            let (sa, sb) = (&la.last().expect("depth ≥ 1").second, &lb.last().expect("depth ≥ 1").second);
            for p in 0..widths[0] {
                check((sa[p][0] - sb[p][0]).abs(), lipschitz * distance, &mut report);
            }
            let laplacian: f64 = sa.iter().map(|s| s[0]).sum();
            check(laplacian.abs(), cert.laplacian_bound(), &mut report);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_formulas_on_polynomials() {
        let d1 = first_difference(|t| (1.0 + t).powi(5), 1e-2);
        assert!((d1 - 5.0).abs() < 1e-8);
        let d2 = second_difference(|t| (1.0 + t).powi(5), 1e-2);
        assert!((d2 - 20.0).abs() < 1e-6);
    }

    #[test]
    fn small_suites_pass() {
        let d = derivative_suite(6, 3, 1);
        assert!(d.pass(1e-6, 1e-5), "{d:?}");
        let b = bound_suite(30, 3, 1);
        assert_eq!(b.violations, 0, "{b:?}");
        assert!(b.worst_ratio > 0.0);
    }
}
