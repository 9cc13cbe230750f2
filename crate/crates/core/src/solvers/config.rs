use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::nn::Activation;
use crate::optim::{AdamConfig, LbfgsConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cpinn,
    Aonn,
    Pm,
    Alm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cpinn, Method::Aonn, Method::Pm, Method::Alm];

    pub fn label(self) -> &'static str {
        match self {
            Method::Cpinn => "C-PINN",
            Method::Aonn => "AONN",
            Method::Pm => "PM",
            Method::Alm => "ALM",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Method::Cpinn => "cpinn",
            Method::Aonn => "aonn",
            Method::Pm => "pm",
            Method::Alm => "alm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Lbfgs,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: vec![30; 4],
            activation: Activation::Tanh,
        }
    }
}

impl NetworkConfig {
    pub fn widths(&self, dim: usize) -> Vec<usize> {
        let mut w = vec![dim];
        w.extend(&self.hidden);
        w.push(1);
        w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AonnConfig {
    /// Step size `s` of the control update.
    pub step: f64,
    pub outer: usize,
    /// Iterations of each state and adjoint solve.
    pub solve_iters: usize,
    /// Iterations of each control fit.
    pub fit_iters: usize,
}

impl Default for AonnConfig {
    fn default() -> Self {
        Self {
            step: 10.0,
            outer: 30,
            solve_iters: 1000,
            fit_iters: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PmConfig {
    pub mu0: f64,
    pub beta: f64,
    pub stages: usize,
    pub first_iters: usize,
    pub stage_iters: usize,
    /// Initial weight and growth factor of the box-violation penalty.
    pub box_mu0: f64,
    pub box_beta: f64,
}

impl Default for PmConfig {
    fn default() -> Self {
        Self {
            mu0: 0.1,
            beta: 2.0,
            stages: 8,
            first_iters: 6000,
            stage_iters: 3000,
            box_mu0: 1.0,
            box_beta: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlmConfig {
    pub mu: f64,
    pub rounds: usize,
    pub first_iters: usize,
    pub round_iters: usize,
    pub box_mu0: f64,
    pub box_beta: f64,
    /// Optional bound on `|η|` after each update.
    pub clip: Option<f64>,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            mu: 0.1,
            rounds: 8,
            first_iters: 6000,
            round_iters: 3000,
            box_mu0: 1.0,
            box_beta: 2.0,
            clip: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    pub network: NetworkConfig,
    pub n_interior: usize,
    pub n_boundary: usize,
    /// Boundary weight `α_b`.
    pub alpha_b: f64,
    /// Overrides the default coupled-loss weights.
    pub weights: Option<LossWeights>,
    pub optimizer: OptimizerKind,
    /// Budget of the coupled solver.
    pub iterations: usize,
    pub lbfgs: LbfgsConfig,
    pub adam: AdamConfig,
    pub aonn: AonnConfig,
    pub pm: PmConfig,
    pub alm: AlmConfig,
    pub seed: u64,
    /// Output-layer scale of the control-producing network on constrained problems.
    pub init_scale: f64,
    /// Set from the experiment's output and evaluation sections.
    #[serde(skip)]
    pub trace_interval: usize,
    #[serde(skip)]
    pub metrics_interval: usize,
    /// Zero disables periodic checkpoints.
    #[serde(skip)]
    pub checkpoint_interval: usize,
    #[serde(skip)]
    pub eval_points: usize,
    #[serde(skip)]
    pub eval_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Cpinn,
            network: NetworkConfig::default(),
            n_interior: 10_000,
            n_boundary: 3_000,
            alpha_b: 5.0,
            weights: None,
            optimizer: OptimizerKind::Lbfgs,
            iterations: 15_000,
            lbfgs: LbfgsConfig::default(),
            adam: AdamConfig::default(),
            aonn: AonnConfig::default(),
            pm: PmConfig::default(),
            alm: AlmConfig::default(),
            seed: 0,
            init_scale: 0.1,
            trace_interval: 10,
            metrics_interval: 100,
            checkpoint_interval: 0,
            eval_points: 100_000,
            eval_seed: 987_654_321,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_interior == 0 || self.n_boundary == 0 {
            return bad("collocation set sizes must be positive");
        }
        if self.network.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if !(self.alpha_b > 0.0) {
            return bad("alpha_b must be positive");
        }
        if !(self.aonn.step >= 0.0) {
            return bad("aonn.step must be nonnegative");
        }
        if !(self.pm.beta > 1.0) || !(self.pm.mu0 > 0.0) {
            return bad("pm requires mu0 > 0 and beta > 1");
        }
        if !(self.pm.box_beta >= 1.0) || !(self.alm.box_beta >= 1.0) {
            return bad("box penalty growth must be at least 1");
        }
        if !(self.alm.mu > 0.0) {
            return bad("alm.mu must be positive");
        }
        if self.trace_interval == 0 || self.metrics_interval == 0 {
            return bad("trace and metrics intervals must be positive");
        }
        if self.eval_points == 0 {
            return bad("eval_points must be positive");
        }
        Ok(())
    }

    /// Total optimizer iterations the configured method will spend.
    pub fn total_budget(&self) -> usize {
        match self.method {
            Method::Cpinn => self.iterations,
            Method::Aonn => self.aonn.outer * (2 * self.aonn.solve_iters + self.aonn.fit_iters),
            Method::Pm => self.pm.first_iters + self.pm.stages.saturating_sub(1) * self.pm.stage_iters,
            Method::Alm => {
                self.alm.first_iters + self.alm.rounds.saturating_sub(1) * self.alm.round_iters
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pm_schedule_and_budget() {
        let c = SolverConfig {
            method: Method::Pm,
            ..SolverConfig::default()
        };
        let last = c.pm.mu0 * c.pm.beta.powi(c.pm.stages as i32 - 1);
        assert!((last - 12.8).abs() < 1e-12);
        assert_eq!(c.total_budget(), 6000 + 7 * 3000);
        assert_eq!(NetworkConfig::default().widths(2), vec![2, 30, 30, 30, 30, 1]);
    }

    #[test]
    fn validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let mut c = SolverConfig::default();
        c.pm.beta = 1.0;
        assert!(c.validate().is_err());
        let c = SolverConfig {
            n_boundary: 0,
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
