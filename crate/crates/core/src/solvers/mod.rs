//! The coupled solver and the three baselines, sharing one report schema.

mod config;
mod eval;
mod methods;

use std::time::Instant;

pub use config::{AlmConfig, AonnConfig, Method, NetworkConfig, OptimizerKind, PmConfig, SolverConfig};
pub use eval::{control_values, net_values, relative_error, Control, Evaluator, Metrics, Norm};
pub use methods::{solve_alm, solve_aonn, solve_cpinn, solve_pm, update_multipliers};

use crate::error::{Error, Result};
use crate::geometry::{sample_boundary, sample_interior};
use crate::loss::Collocation;
use crate::nn::Mlp;
use crate::optim::{lbfgs_minimize, Adam, Termination};
use crate::problems::ProblemSpec;
use crate::scalar::Real;

/// One row of the training trace. Terms that a method does not have are `NaN`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// Sub-problem index (outer step, penalty stage or multiplier round).
    pub stage: usize,
    pub loss_total: f64,
    pub loss_state_res: f64,
    pub loss_adj_res: f64,
    pub loss_bdry_y: f64,
    pub loss_bdry_p: f64,
    #[doc(alias = "J")]
    pub objective: f64,
    pub e2_y: f64,
    pub e2_u: f64,
    pub wall_ms: f64,
}

/// Loss terms of a trace row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRow {
    pub total: f64,
    pub state_res: f64,
    pub adj_res: f64,
    pub bdry_y: f64,
    pub bdry_p: f64,
    pub objective: f64,
}

/// Named networks of a solver at one point of training.
pub struct Snapshot<'a, T> {
    pub iteration: usize,
    pub nets: Vec<(&'static str, &'a Mlp<T>)>,
}

/// Receives trace rows and checkpoints while a solver runs.
pub trait Monitor<T> {
    fn on_row(&mut self, _row: &TraceRow) -> Result<()> {
        Ok(())
    }

    fn on_checkpoint(&mut self, _snapshot: &Snapshot<'_, T>) -> Result<()> {
        Ok(())
    }
}

pub struct NoMonitor;

impl<T> Monitor<T> for NoMonitor {}

#[derive(Clone, Debug)]
pub struct SolveReport<T> {
    pub method: Method,
    pub problem: String,
    pub seed: u64,
    pub precision: &'static str,
    pub y_net: Mlp<T>,
    pub p_net: Option<Mlp<T>>,
    pub u_net: Option<Mlp<T>>,
    pub trace: Vec<TraceRow>,
    /// Held-out metrics of the final networks; `NaN` without an exact solution.
    pub metrics: Metrics,
    pub iterations: usize,
    pub wall_seconds: f64,
    pub config: SolverConfig,
    /// How each sub-problem's optimizer stopped.
    pub terminations: Vec<String>,
    /// RMS of `λu + p` at the start of every AONN control update.
    pub optimality_gaps: Vec<f64>,
    /// Final pointwise multipliers of the augmented Lagrangian method.
    pub multipliers: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Real> SolveReport<T> {
    pub fn control(&self) -> Control<'_, T> {
        match (&self.u_net, &self.p_net) {
            (Some(u), _) => Control::Net(u),
            (None, Some(p)) => Control::Recovered(p),
            (None, None) => unreachable!("every solver produces a control"),
        }
    }

    pub fn nets(&self) -> Vec<(&'static str, &Mlp<T>)> {
        let mut v = vec![("y", &self.y_net)];
        if let Some(p) = &self.p_net {
            v.push(("p", p));
        }
        if let Some(u) = &self.u_net {
            v.push(("u", u));
        }
        v
    }
}

/// Runs the configured method.
pub fn solve<T: Real>(problem: &ProblemSpec, cfg: &SolverConfig, monitor: &mut dyn Monitor<T>) -> Result<SolveReport<T>> {
    let ctx = Context::new(problem, cfg)?;
    match cfg.method {
        Method::Cpinn => methods::cpinn(&ctx, monitor),
        Method::Aonn => methods::aonn(&ctx, monitor),
        Method::Pm => methods::pm(&ctx, monitor),
        Method::Alm => methods::alm(&ctx, monitor),
    }
}

/// Fixed inputs of one run.
pub(crate) struct Context<'a, T> {
    pub problem: &'a ProblemSpec,
    pub cfg: &'a SolverConfig,
    pub col: Collocation<T>,
    pub eval: Option<Evaluator<T>>,
}

impl<'a, T: Real> Context<'a, T> {
    fn new(problem: &'a ProblemSpec, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let interior = sample_interior(&problem.domain, cfg.n_interior, cfg.seed);
        let boundary = sample_boundary(&problem.domain, cfg.n_boundary, cfg.seed);
        let col = Collocation::new(problem, &interior, &boundary)?;
        let eval = match problem.exact {
            Some(_) => Some(Evaluator::new(problem, cfg.eval_points, cfg.eval_seed)?),
            None => None,
        };
        Ok(Self { problem, cfg, col, eval })
    }

    /// Xavier network for field `index` (0 state, 1 adjoint, 2 control).
    pub fn init_net(&self, index: u64) -> Result<Mlp<T>> {
        let widths = self.cfg.network.widths(self.problem.dim());
        let seed = self
            .cfg
            .seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(index);
        Mlp::xavier(&widths, self.cfg.network.activation, seed)
    }

    pub fn metrics(&self, y: &Mlp<T>, control: Control<'_, T>, time_s: f64) -> Result<Metrics> {
        match &self.eval {
            Some(e) => e.metrics(y, control, time_s),
            None => Ok(Metrics {
                e2_y: f64::NAN,
                einf_y: f64::NAN,
                e2_u: f64::NAN,
                einf_u: f64::NAN,
                objective: f64::NAN,
                time_s,
            }),
        }
    }
}

/// Trace bookkeeping shared by all methods.
pub(crate) struct Tracker<'m, T> {
    start: Instant,
    pub rows: Vec<TraceRow>,
    monitor: &'m mut dyn Monitor<T>,
    trace_interval: usize,
    metrics_interval: usize,
    checkpoint_interval: usize,
    pub terminations: Vec<String>,
}

impl<'m, T: Real> Tracker<'m, T> {
    pub fn new(cfg: &SolverConfig, monitor: &'m mut dyn Monitor<T>) -> Self {
        Self {
            start: Instant::now(),
            rows: Vec::new(),
            monitor,
            trace_interval: cfg.trace_interval,
            metrics_interval: cfg.metrics_interval,
            checkpoint_interval: cfg.checkpoint_interval,
            terminations: Vec::new(),
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub fn row_due(&self, iter: usize) -> bool {
        iter.is_multiple_of(self.trace_interval)
    }

    pub fn checkpoint_due(&self, iter: usize) -> bool {
        self.checkpoint_interval > 0 && iter.is_multiple_of(self.checkpoint_interval)
    }

    /// Appends a row; held-out errors are computed on metrics intervals or when `force`d.
    pub fn record(
        &mut self,
        ctx: &Context<'_, T>,
        iter: usize,
        stage: usize,
        losses: LossRow,
        y: &Mlp<T>,
        control: Control<'_, T>,
        force: bool,
    ) -> Result<()> {
        let (e2_y, e2_u) = if force || iter.is_multiple_of(self.metrics_interval) {
            let m = ctx.metrics(y, control, 0.0)?;
            (m.e2_y, m.e2_u)
        } else {
            (f64::NAN, f64::NAN)
        };
        let row = TraceRow {
            iter,
            stage,
            loss_total: losses.total,
            loss_state_res: losses.state_res,
            loss_adj_res: losses.adj_res,
            loss_bdry_y: losses.bdry_y,
            loss_bdry_p: losses.bdry_p,
            objective: losses.objective,
            e2_y,
            e2_u,
            wall_ms: 1e3 * self.elapsed(),
        };
        self.monitor.on_row(&row)?;
        self.rows.push(row);
        Ok(())
    }

    pub fn checkpoint(&mut self, iteration: usize, nets: Vec<(&'static str, &Mlp<T>)>) -> Result<()> {
        self.monitor.on_checkpoint(&Snapshot { iteration, nets })
    }
}

/// Minimizes `obj` from `theta` for at most `iters` steps of the configured optimizer.
/// `on_step` receives the one-based step count and the new iterate and may stop the run.
pub(crate) fn run_optimizer<T: Real>(
    cfg: &SolverConfig,
    theta: &mut Vec<T>,
    iters: usize,
    mut obj: impl FnMut(&[T]) -> (T, Vec<T>),
    mut on_step: impl FnMut(usize, &[T]) -> Result<bool>,
) -> Result<(usize, String)> {
    if iters == 0 {
        return Ok((0, "no iterations".into()));
    }
    match cfg.optimizer {
        OptimizerKind::Lbfgs => {
            let lcfg = crate::optim::LbfgsConfig {
                max_iters: iters,
                ..cfg.lbfgs.clone()
            };
            let mut failure = None;
            let result = lbfgs_minimize(&mut obj, theta, &lcfg, |step, th| match on_step(step.iteration, th) {
                Ok(go) => go,
                Err(e) => {
                    failure = Some(e);
                    false
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            *theta = result.theta;
            let how = match result.termination {
                Termination::MaxIterations => "max iterations",
                Termination::GradientTolerance => "gradient tolerance",
                Termination::LineSearchFailure => "line search failure",
                Termination::Stopped => "stopped",
            };
            Ok((result.iterations, format!("{how} after {} steps", result.iterations)))
        }
        OptimizerKind::Adam => {
            let mut adam = Adam::new(theta.len(), cfg.adam.clone());
            for k in 1..=iters {
                let (f, g) = obj(theta);
                if !f.is_finite() {
                    return Err(Error::NonFinite {
                        iteration: k - 1,
                        what: "loss",
                    });
                }
                adam.step(theta, &g)?;
                if !on_step(k, theta)? {
                    return Ok((k, format!("stopped after {k} steps")));
                }
            }
            Ok((iters, format!("max iterations after {iters} steps")))
        }
    }
}

pub(crate) fn set<T: Real>(net: &mut Mlp<T>, theta: &[T]) {
    net.set_params(theta).expect("parameter count is fixed");
}
