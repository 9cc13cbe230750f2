//! Held-out error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_interior, SampleSet};
use crate::loss::{field_values, Field, PointBlocks};
use crate::nn::Mlp;
use crate::problems::ProblemSpec;
use crate::scalar::{pairwise_sum, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    Linf,
}

/// `‖approx - exact‖ / ‖exact‖` over sample values; the L² ratio is a ratio of root mean
/// squares.
pub fn relative_error(approx: &[f64], exact: &[f64], norm: Norm) -> Result<f64> {
    assert_eq!(approx.len(), exact.len());
    let (num, den) = match norm {
        Norm::L2 => {
            let d: Vec<f64> = approx.iter().zip(exact).map(|(a, e)| (a - e) * (a - e)).collect();
            let e: Vec<f64> = exact.iter().map(|e| e * e).collect();
            (pairwise_sum(&d).sqrt(), pairwise_sum(&e).sqrt())
        }
        Norm::Linf => (
            approx.iter().zip(exact).fold(0.0f64, |m, (a, e)| m.max((a - e).abs())),
            exact.iter().fold(0.0f64, |m, e| m.max(e.abs())),
        ),
    };
    if den == 0.0 || !den.is_finite() {
        return Err(Error::ZeroReference);
    }
    Ok(num / den)
}

/// One row of the results table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub e2_y: f64,
    pub einf_y: f64,
    pub e2_u: f64,
    pub einf_u: f64,
    #[serde(rename = "J")]
    pub objective: f64,
    pub time_s: f64,
}

/// Where a solver's control comes from.
#[derive(Clone, Copy)]
pub enum Control<'a, T> {
    /// `-p/λ`, projected when the problem is constrained.
    Recovered(&'a Mlp<T>),
    Net(&'a Mlp<T>),
}

/// Values of a solver's control at `blocks`; recovery and projection happen in `T`.
pub fn control_values<T: Real>(
    blocks: &PointBlocks<T>,
    control: Control<'_, T>,
    lambda: f64,
    bounds: Option<(f64, f64)>,
) -> Vec<f64> {
    match control {
        Control::Net(u) => net_values(blocks, u),
        Control::Recovered(p) => {
            let lambda = T::lit(lambda);
            let bounds = bounds.map(|(lo, hi)| (T::lit(lo), T::lit(hi)));
            field_values(blocks, Field::Net(p))
                .into_iter()
                .map(|p| {
                    let u = -p / lambda;
                    let u = match bounds {
                        Some((lo, hi)) => u.max(lo).min(hi),
                        None => u,
                    };
                    u.to_f64_lossy()
                })
                .collect()
        }
    }
}

pub fn net_values<T: Real>(blocks: &PointBlocks<T>, net: &Mlp<T>) -> Vec<f64> {
    field_values(blocks, Field::Net(net))
        .into_iter()
        .map(|v| v.to_f64_lossy())
        .collect()
}

/// Exact values on a fixed held-out interior set.
pub struct Evaluator<T> {
    blocks: PointBlocks<T>,
    y_exact: Vec<f64>,
    u_exact: Vec<f64>,
    y_d: Vec<f64>,
    lambda: f64,
    bounds: Option<(f64, f64)>,
    measure: f64,
}

impl<T: Real> Evaluator<T> {
    pub fn new(problem: &ProblemSpec, n: usize, seed: u64) -> Result<Self> {
        Self::from_samples(problem, &sample_interior(&problem.domain, n, seed))
    }

    pub fn from_samples(problem: &ProblemSpec, samples: &SampleSet) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySampleSet("evaluation"));
        }
        let exact = problem.exact()?;
        Ok(Self {
            blocks: PointBlocks::new(samples),
            y_exact: samples.iter().map(|x| exact.y.value(x)).collect(),
            u_exact: samples.iter().map(|x| (exact.u)(x)).collect(),
            y_d: samples.iter().map(|x| (problem.y_d)(x)).collect(),
            lambda: problem.lambda,
            bounds: problem.bounds.map(|b| (b.lower, b.upper)),
            measure: samples.support_measure,
        })
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &PointBlocks<T> {
        &self.blocks
    }

    pub fn state_values(&self, y: &Mlp<T>) -> Vec<f64> {
        net_values(&self.blocks, y)
    }

    /// Control values, recovered in the working precision.
    pub fn control_values(&self, control: Control<'_, T>) -> Vec<f64> {
        control_values(&self.blocks, control, self.lambda, self.bounds)
    }

    pub fn metrics(&self, y: &Mlp<T>, control: Control<'_, T>, time_s: f64) -> Result<Metrics> {
        let yv = self.state_values(y);
        let uv = self.control_values(control);
        let j: Vec<f64> = (0..yv.len())
            .map(|i| 0.5 * ((yv[i] - self.y_d[i]).powi(2) + self.lambda * uv[i] * uv[i]))
            .collect();
        Ok(Metrics {
            e2_y: relative_error(&yv, &self.y_exact, Norm::L2)?,
            einf_y: relative_error(&yv, &self.y_exact, Norm::Linf)?,
            e2_u: relative_error(&uv, &self.u_exact, Norm::L2)?,
            einf_u: relative_error(&uv, &self.u_exact, Norm::Linf)?,
            objective: self.measure * pairwise_sum(&j) / yv.len() as f64,
            time_s,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_examples() {
        let exact = [1.0, -2.0, 0.5];
        assert_eq!(relative_error(&exact, &exact, Norm::L2).unwrap(), 0.0);
        let twice: Vec<f64> = exact.iter().map(|v| 2.0 * v).collect();
        assert!((relative_error(&twice, &exact, Norm::L2).unwrap() - 1.0).abs() < 1e-15);
        assert!((relative_error(&twice, &exact, Norm::Linf).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(relative_error(&[1.0], &[0.0], Norm::L2), Err(Error::ZeroReference)));
    }
}
