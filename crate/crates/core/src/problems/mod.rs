//! Optimal-control instances, the manufactured-solution generator and its consistency
//! oracle.

mod fields;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use fields::{finite_difference_eval, AnalyticField, FieldFamily, FieldFn, ScalarFn, FD_STEP};

use crate::error::{Error, Result};
use crate::geometry::{in_subregion, sample_interior, Domain};

pub const BENCHMARKS: [&str; 4] = [
    "ex1_annulus",
    "ex2_annulus_box",
    "ex3_hypercube4",
    "ex4_semilinear",
];

/// Residual tolerance of [`verify_manufactured`] with analytic Laplacians.
pub const ANALYTIC_TOLERANCE: f64 = 1e-8;
/// Residual tolerance when any Laplacian comes from finite differences.
pub const FD_TOLERANCE: f64 = 1e-5;

const CHECK_SEED: u64 = 0x5eed_c0de;

/// Admissible control interval `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ControlBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::InvalidBounds { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    pub fn project(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// Nonlinear reaction term `q(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reaction {
    Linear,
    /// `k(x) y³` with `k = k_inside` on `[0.25, 0.75]²` and `k_outside` elsewhere.
    Cubic { k_inside: f64, k_outside: f64 },
}

/// `-Δy + c0 y + q(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeSpec {
    pub c0: f64,
    pub reaction: Reaction,
}

impl PdeSpec {
    pub fn laplace() -> Self {
        Self {
            c0: 0.0,
            reaction: Reaction::Linear,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.reaction, Reaction::Linear)
    }

    pub fn k(&self, x: &[f64]) -> f64 {
        match self.reaction {
            Reaction::Linear => 0.0,
            Reaction::Cubic { k_inside, k_outside } => {
                if in_subregion(x) {
                    k_inside
                } else {
                    k_outside
                }
            }
        }
    }

    pub fn q(&self, x: &[f64], y: f64) -> f64 {
        self.k(x) * y * y * y
    }

    pub fn q_y(&self, x: &[f64], y: f64) -> f64 {
        3.0 * self.k(x) * y * y
    }

    pub fn q_yy(&self, x: &[f64], y: f64) -> f64 {
        6.0 * self.k(x) * y
    }
}

/// Closed-form optimal triple; `w` is the control before projection.
#[derive(Clone)]
pub struct ExactSolution {
    pub y: AnalyticField,
    pub p: AnalyticField,
    pub w: AnalyticField,
    pub u: ScalarFn,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution").finish_non_exhaustive()
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: Domain,
    pub pde: PdeSpec,
    pub lambda: f64,
    pub bounds: Option<ControlBounds>,
    pub f: ScalarFn,
    pub y_d: ScalarFn,
    pub g: ScalarFn,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("pde", &self.pde)
            .field("lambda", &self.lambda)
            .field("bounds", &self.bounds)
            .field("has_exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `-p/λ`, projected when the problem has bounds.
    pub fn recover_control(&self, p: f64) -> f64 {
        let u = -p / self.lambda;
        match self.bounds {
            Some(b) => b.project(u),
            None => u,
        }
    }

    pub fn exact(&self) -> Result<&ExactSolution> {
        self.exact
            .as_ref()
            .ok_or_else(|| Error::Config(format!("problem {} has no exact solution", self.name)))
    }
}

/// Builds data `(f, y_d, g)` for which `(ȳ, P_U(w), -λw)` satisfies the optimality system
/// exactly.
pub fn manufacture_problem(
    name: &str,
    y_bar: AnalyticField,
    w: AnalyticField,
    lambda: f64,
    domain: Domain,
    pde: PdeSpec,
    bounds: Option<ControlBounds>,
    allow_finite_differences: bool,
) -> Result<ProblemSpec> {
    domain.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    if !allow_finite_differences {
        if !y_bar.has_exact_derivatives() {
            return Err(Error::MissingLaplacian("exact state"));
        }
        if !w.has_exact_derivatives() {
            return Err(Error::MissingLaplacian("exact control"));
        }
    }
    let p_bar = w.scaled(-lambda);
    let u_bar: ScalarFn = {
        let w = w.clone();
        Arc::new(move |x| {
            let v = w.value(x);
            bounds.map_or(v, |b| b.project(v))
        })
    };
    let f: ScalarFn = {
        let (y, u) = (y_bar.clone(), u_bar.clone());
        Arc::new(move |x| {
            let e = y.eval(x);
            -e.laplacian + pde.c0 * e.value + pde.q(x, e.value) - u(x)
        })
    };
    let y_d: ScalarFn = {
        let (y, p) = (y_bar.clone(), p_bar.clone());
        Arc::new(move |x| {
            let ye = y.eval(x);
            let pe = p.eval(x);
            ye.value + pe.laplacian - pde.c0 * pe.value - pde.q_y(x, ye.value) * pe.value
        })
    };
    Ok(ProblemSpec {
        name: name.to_string(),
        domain,
        pde,
        lambda,
        bounds,
        f,
        y_d,
        g: y_bar.as_fn(),
        exact: Some(ExactSolution {
            y: y_bar,
            p: p_bar,
            w,
            u: u_bar,
        }),
    })
}

/// Definition of a manufactured problem in terms of built-in field families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    #[serde(default = "custom_name")]
    pub name: String,
    pub domain: Domain,
    pub lambda: f64,
    #[serde(default)]
    pub c0: f64,
    #[serde(default = "linear")]
    pub reaction: Reaction,
    #[serde(default)]
    pub bounds: Option<[f64; 2]>,
    pub state: FieldFamily,
    #[serde(default = "one")]
    pub state_scale: f64,
    pub control: FieldFamily,
    #[serde(default = "one")]
    pub control_scale: f64,
}

fn custom_name() -> String {
    "custom".into()
}
fn linear() -> Reaction {
    Reaction::Linear
}
fn one() -> f64 {
    1.0
}

impl CustomProblem {
    pub fn build(&self) -> Result<ProblemSpec> {
        for fam in [&self.state, &self.control] {
            if fam.planar_only() && self.domain.dim() != 2 {
                return Err(Error::Config(format!(
                    "field family {fam:?} is only defined in two dimensions"
                )));
            }
        }
        let bounds = self
            .bounds
            .map(|[lo, hi]| ControlBounds::new(lo, hi))
            .transpose()?;
        manufacture_problem(
            &self.name,
            self.state.field().scaled(self.state_scale),
            self.control.field().scaled(self.control_scale),
            self.lambda,
            self.domain.clone(),
            PdeSpec {
                c0: self.c0,
                reaction: self.reaction,
            },
            bounds,
            false,
        )
    }
}

pub fn load_problem(name: &str) -> Result<ProblemSpec> {
    let annulus_sine = FieldFamily::AnnulusSine {
        r_inner: 1.0,
        r_outer: 3.0,
    };
    let custom = match name {
        "ex1_annulus" => CustomProblem {
            name: name.into(),
            domain: Domain::annulus(1.0, 3.0)?,
            lambda: 0.01,
            c0: 0.0,
            reaction: Reaction::Linear,
            bounds: None,
            state: FieldFamily::RadialSquare,
            state_scale: 1.0,
            control: annulus_sine,
            control_scale: 1.0,
        },
        "ex2_annulus_box" => CustomProblem {
            name: name.into(),
            domain: Domain::annulus(1.0, 3.0)?,
            lambda: 0.01,
            c0: 0.0,
            reaction: Reaction::Linear,
            bounds: Some([-0.5, 0.7]),
            state: FieldFamily::RadialSquare,
            state_scale: 1.0,
            control: annulus_sine,
            control_scale: -1.0,
        },
        "ex3_hypercube4" => CustomProblem {
            name: name.into(),
            domain: Domain::hypercube(4)?,
            lambda: 0.01,
            c0: 0.0,
            reaction: Reaction::Linear,
            bounds: None,
            state: FieldFamily::SineProduct,
            state_scale: 1.0,
            control: FieldFamily::SineProduct,
            control_scale: 4.0 * std::f64::consts::PI * std::f64::consts::PI,
        },
        "ex4_semilinear" => CustomProblem {
            name: name.into(),
            domain: Domain::UnitSquareWithSubregion,
            lambda: 0.01,
            c0: 1.0,
            reaction: Reaction::Cubic {
                k_inside: 1.0,
                k_outside: 3.0,
            },
            bounds: None,
            state: FieldFamily::ExpSineSum,
            state_scale: 1.0,
            control: FieldFamily::CosineBump,
            control_scale: -1.0 / 0.01,
        },
        _ => {
            return Err(Error::UnknownProblem {
                name: name.into(),
                available: BENCHMARKS.join(", "),
            })
        }
    };
    custom.build()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub max_state_residual: f64,
    pub max_adjoint_residual: f64,
    pub max_optimality_gap: f64,
    pub tolerance: f64,
    pub finite_differences: bool,
    pub points: usize,
    pub pass: bool,
}

/// Evaluates the optimality system on `grid_n` random interior points.
pub fn verify_manufactured(problem: &ProblemSpec, grid_n: usize) -> Result<ConsistencyReport> {
    let exact = problem.exact()?;
    let fd = !(exact.y.has_exact_derivatives() && exact.p.has_exact_derivatives());
    let tolerance = if fd { FD_TOLERANCE } else { ANALYTIC_TOLERANCE };
    let pts = sample_interior(&problem.domain, grid_n, CHECK_SEED);
    let pde = problem.pde;
    let (mut ms, mut ma, mut mo) = (0.0f64, 0.0f64, 0.0f64);
    for x in pts.iter() {
        let y = exact.y.eval(x);
        let p = exact.p.eval(x);
        let u = (exact.u)(x);
        let state = (problem.f)(x) + u - (-y.laplacian + pde.c0 * y.value + pde.q(x, y.value));
        let adjoint = -p.laplacian + pde.c0 * p.value + pde.q_y(x, y.value) * p.value
            - (y.value - (problem.y_d)(x));
        let gap = u - problem.recover_control(p.value);
        ms = ms.max(state.abs());
        ma = ma.max(adjoint.abs());
        mo = mo.max(gap.abs());
    }
    let pass = ms <= tolerance && ma <= tolerance && mo <= tolerance;
    Ok(ConsistencyReport {
        max_state_residual: ms,
        max_adjoint_residual: ma,
        max_optimality_gap: mo,
        tolerance,
        finite_differences: fd,
        points: pts.len(),
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn benchmarks_are_consistent() {
        for name in BENCHMARKS {
            let p = load_problem(name).unwrap();
            let r = verify_manufactured(&p, 500).unwrap();
            assert!(r.pass, "{name}: {r:?}");
            assert!(r.max_state_residual <= 1e-10 && r.max_adjoint_residual <= 1e-10, "{name}: {r:?}");
        }
    }

    #[test]
    fn unknown_name_lists_available() {
        let err = load_problem("ex9").unwrap_err().to_string();
        for name in BENCHMARKS {
            assert!(err.contains(name), "{err}");
        }
    }

    #[test]
    fn example_data_values() {
        let p = load_problem("ex1_annulus").unwrap();
        assert_eq!(p.lambda, 0.01);
        let e = p.exact().unwrap();
        let (r, t) = (1.7f64, 2.3f64);
        let x = [r * t.cos(), r * t.sin()];
        assert!((e.y.value(&x) - r * r).abs() < 1e-12);
        assert!(((e.u)(&x) - (r - 1.0) * (r - 3.0) * t.sin()).abs() < 1e-12);
        // Generator data for the regenerated problem.
        assert!(((p.f)(&x) - (-4.0 - (r - 1.0) * (r - 3.0) * t.sin())).abs() < 1e-12);
        let y_d = r * r - 3.0 * 0.01 * (1.0 - 1.0 / (r * r)) * t.sin();
        assert!(((p.y_d)(&x) - y_d).abs() < 1e-12);

        let p2 = load_problem("ex2_annulus_box").unwrap();
        assert_eq!(p2.bounds, Some(ControlBounds { lower: -0.5, upper: 0.7 }));
        // This instance matches the printed data of the constrained example.
        let printed_y_d = r * r + 3.0 * 0.01 * (1.0 - 1.0 / (r * r)) * t.sin();
        assert!(((p2.y_d)(&x) - printed_y_d).abs() < 1e-12);
        let pu = ControlBounds::new(-0.5, 0.7).unwrap().project((1.0 - r) * (r - 3.0) * t.sin());
        assert!(((p2.f)(&x) - (-4.0 - pu)).abs() < 1e-12);
    }

    #[test]
    fn hypercube_source_vanishes() {
        let p = load_problem("ex3_hypercube4").unwrap();
        let x = [0.13, 0.58, 0.77, 0.31];
        let y: f64 = x.iter().map(|v| (PI * v).sin()).product();
        assert!((p.f)(&x).abs() < 1e-12);
        let expected = (1.0 + 16.0 * 0.01 * PI.powi(4)) * y;
        assert!(((p.y_d)(&x) - expected).abs() < 1e-12);
    }

    #[test]
    fn semilinear_control_and_reaction() {
        let p = load_problem("ex4_semilinear").unwrap();
        let x = [0.3, 0.8];
        let h = |t: f64| t * (1.0 + (PI * t).cos());
        let e = p.exact().unwrap();
        assert!(((e.u)(&x) + 100.0 * h(x[0]) * h(x[1])).abs() < 1e-10);
        // The adjoint vanishes on the boundary of the square.
        for b in [[0.0, 0.4], [1.0, 0.4], [0.4, 0.0], [0.4, 1.0]] {
            assert!(e.p.value(&b).abs() < 1e-15);
        }
        assert_eq!(p.pde.k(&[0.25, 0.75]), 1.0);
        assert_eq!(p.pde.k(&[0.1, 0.5]), 3.0);
        let (xq, y, h) = ([0.1, 0.5], 0.8, 1e-6);
        let fd = (p.pde.q(&xq, y + h) - p.pde.q(&xq, y - h)) / (2.0 * h);
        assert!((fd - p.pde.q_y(&xq, y)).abs() < 1e-6);
        let fd2 = (p.pde.q_y(&xq, y + h) - p.pde.q_y(&xq, y - h)) / (2.0 * h);
        assert!((fd2 - p.pde.q_yy(&xq, y)).abs() < 1e-6);
    }

    #[test]
    fn zero_control_gives_tracking_state() {
        let p = manufacture_problem(
            "zero",
            FieldFamily::SineProduct.field(),
            AnalyticField::zero(),
            0.1,
            Domain::hypercube(2).unwrap(),
            PdeSpec::laplace(),
            None,
            false,
        )
        .unwrap();
        let x = [0.3, 0.6];
        assert_eq!(p.exact().unwrap().p.value(&x), 0.0);
        assert_eq!((p.y_d)(&x), p.exact().unwrap().y.value(&x));
    }

    #[test]
    fn constrained_control_is_feasible() {
        let p = load_problem("ex2_annulus_box").unwrap();
        let b = p.bounds.unwrap();
        let pts = sample_interior(&p.domain, 2000, 3);
        assert!(pts.iter().all(|x| b.contains((p.exact().unwrap().u)(x))));
    }

    #[test]
    fn printed_source_is_detected() {
        let mut p = load_problem("ex1_annulus").unwrap();
        p.f = Arc::new(|x: &[f64]| {
            let r = x[0].hypot(x[1]);
            (r - 1.0) * (r - 3.0) * (x[1] / r) - 4.0
        });
        let r = verify_manufactured(&p, 200).unwrap();
        assert!(!r.pass);
        // Residual 2(r-1)(r-3)sinθ peaks at |2·(-1)| = 2 at r = 2.
        assert!(r.max_state_residual > 1.0 && r.max_state_residual <= 2.0 + 1e-12);
    }

    #[test]
    fn missing_laplacian_requires_flag() {
        let y = AnalyticField::value_only(|x: &[f64]| x[0] * x[0] + x[1] * x[1]);
        let mk = |fd| {
            manufacture_problem(
                "fd",
                y.clone(),
                AnalyticField::zero(),
                0.01,
                Domain::annulus(1.0, 3.0).unwrap(),
                PdeSpec::laplace(),
                None,
                fd,
            )
        };
        assert!(matches!(mk(false), Err(Error::MissingLaplacian(_))));
        let r = verify_manufactured(&mk(true).unwrap(), 100).unwrap();
        assert!(r.finite_differences && r.pass && r.tolerance == FD_TOLERANCE);
    }

    #[test]
    fn custom_problem_from_toml() {
        let src = r#"
            lambda = 0.05
            bounds = [-1.0, 1.0]
            domain = { shape = "hypercube", dim = 3 }
            state = { family = "sine_product" }
            control = { family = "radial_square" }
        "#;
        let c: CustomProblem = toml::from_str(src).unwrap();
        let p = c.build().unwrap();
        assert!(verify_manufactured(&p, 200).unwrap().pass);
        let bad = "lambda = 1.0\ndomain = { shape = \"hypercube\", dim = 3 }\nstate = { family = \"cosine_bump\" }\ncontrol = { family = \"zero\" }\n";
        assert!(toml::from_str::<CustomProblem>(bad).unwrap().build().is_err());
    }
}
