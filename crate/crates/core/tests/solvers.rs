use std::collections::BTreeMap;
use std::sync::Arc;

use cpinn::geometry::{sample_boundary, sample_interior};
use cpinn::loss::{
    constraint_residuals, empirical_loss, objective_j, penalty_loss, Collocation, Field, LossWeights, PenaltyParams,
};
use cpinn::nn::Mlp;
use cpinn::problems::{load_problem, ProblemSpec};
use cpinn::solvers::{
    solve, update_multipliers, Control, Evaluator, Method, Monitor, NetworkConfig, Snapshot, SolverConfig, TraceRow,
};
use cpinn::{Error, Result};

fn small(method: Method, iterations: usize) -> SolverConfig {
    let mut cfg = SolverConfig {
        method,
        network: NetworkConfig {
            hidden: vec![12, 12],
            ..NetworkConfig::default()
        },
        n_interior: 300,
        n_boundary: 90,
        iterations,
        trace_interval: 5,
        metrics_interval: 5,
        eval_points: 2000,
        ..SolverConfig::default()
    };
    cfg.aonn.outer = 2;
    cfg.aonn.solve_iters = 10;
    cfg.aonn.fit_iters = 10;
    cfg.pm.stages = 3;
    cfg.pm.first_iters = 12;
    cfg.pm.stage_iters = 8;
    cfg.alm.rounds = 3;
    cfg.alm.first_iters = 12;
    cfg.alm.round_iters = 8;
    cfg
}

fn collocation(problem: &ProblemSpec, cfg: &SolverConfig) -> Collocation<f64> {
    let interior = sample_interior(&problem.domain, cfg.n_interior, cfg.seed);
    let boundary = sample_boundary(&problem.domain, cfg.n_boundary, cfg.seed);
    Collocation::new(problem, &interior, &boundary).unwrap()
}

#[derive(Default)]
struct Recorder {
    rows: Vec<TraceRow>,
    snapshots: BTreeMap<usize, BTreeMap<&'static str, Mlp<f64>>>,
}

impl Monitor<f64> for Recorder {
    fn on_row(&mut self, row: &TraceRow) -> Result<()> {
        self.rows.push(*row);
        Ok(())
    }

    fn on_checkpoint(&mut self, s: &Snapshot<'_, f64>) -> Result<()> {
        let entry = self.snapshots.entry(s.iteration).or_default();
        for (name, net) in &s.nets {
            entry.insert(*name, (*net).clone());
        }
        Ok(())
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn zero_budget_echoes_initial_networks() {
    let problem = load_problem("ex2_annulus_box").unwrap();
    let cfg = small(Method::Cpinn, 0);
    let mut rec = Recorder::default();
    let r = solve::<f64>(&problem, &cfg, &mut rec).unwrap();
    assert_eq!(r.iterations, 0);
    assert_eq!(r.trace.len(), 1);
    assert_eq!(r.trace[0].e2_u, r.metrics.e2_u);
    assert_eq!(r.trace[0].e2_y, r.metrics.e2_y);
    let eval = Evaluator::<f64>::new(&problem, cfg.eval_points, cfg.eval_seed).unwrap();
    let p = r.p_net.as_ref().unwrap();
    let m = eval.metrics(&r.y_net, Control::Recovered(p), 0.0).unwrap();
    assert_eq!(m.e2_u, r.metrics.e2_u);
    // The initial adjoint is scaled so the recovered control starts near zero.
    let u = eval.control_values(Control::Recovered(p));
    assert!(u.iter().all(|v| (-0.5..=0.7).contains(v)));
}

#[test]
fn every_method_reports_the_same_schema() {
    let problem = load_problem("ex1_annulus").unwrap();
    for method in Method::ALL {
        let r = solve::<f64>(&problem, &small(method, 10), &mut Recorder::default()).unwrap();
        assert_eq!(r.method, method);
        assert!(!r.trace.is_empty());
        assert!(r.metrics.e2_y.is_finite() && r.metrics.e2_u.is_finite());
        let last = r.trace.last().unwrap();
        assert_eq!(last.iter, r.iterations);
        assert_eq!(last.e2_u, r.metrics.e2_u);
        assert!(r.trace.windows(2).all(|w| w[0].iter <= w[1].iter));
        match method {
            Method::Cpinn => assert!(r.p_net.is_some() && r.u_net.is_none()),
            Method::Aonn => assert!(r.p_net.is_some() && r.u_net.is_some()),
            _ => assert!(r.p_net.is_none() && r.u_net.is_some()),
        }
    }
}

#[test]
fn trace_recomputes_from_checkpoints() {
    let problem = load_problem("ex1_annulus").unwrap();
    let cfg = SolverConfig {
        checkpoint_interval: 5,
        ..small(Method::Cpinn, 20)
    };
    let mut rec = Recorder::default();
    let r = solve::<f64>(&problem, &cfg, &mut rec).unwrap();
    let col = collocation(&problem, &cfg);
    let weights = LossWeights::defaults(problem.lambda, cfg.alpha_b);
    let mut checked = 0;
    for row in r.trace.iter().filter(|row| row.iter > 0) {
        let nets = &rec.snapshots[&row.iter];
        let (b, _) = empirical_loss(&col, Field::Net(&nets["y"]), Field::Net(&nets["p"]), &weights, false);
        for (traced, recomputed) in [
            (row.loss_total, b.total),
            (row.loss_state_res, b.state_residual_term),
            (row.loss_adj_res, b.adjoint_residual_term),
            (row.loss_bdry_y, b.boundary_y_term),
            (row.loss_bdry_p, b.boundary_p_term),
            (row.objective, b.objective),
        ] {
            assert!(close(traced, recomputed, 1e-12), "{traced} vs {recomputed}");
        }
        checked += 1;
    }
    assert_eq!(checked, 4);
    let last = &rec.snapshots[&r.iterations];
    let eval = Evaluator::<f64>::new(&problem, cfg.eval_points, cfg.eval_seed).unwrap();
    let m = eval.metrics(&last["y"], Control::Recovered(&last["p"]), 0.0).unwrap();
    assert_eq!((m.e2_y, m.einf_y, m.e2_u, m.einf_u, m.objective), {
        let f = r.metrics;
        (f.e2_y, f.einf_y, f.e2_u, f.einf_u, f.objective)
    });
}

#[test]
fn penalty_stages_warm_start_continuously() {
    let problem = load_problem("ex1_annulus").unwrap();
    let cfg = SolverConfig {
        checkpoint_interval: 1,
        ..small(Method::Pm, 0)
    };
    let mut rec = Recorder::default();
    let r = solve::<f64>(&problem, &cfg, &mut rec).unwrap();
    let col = collocation(&problem, &cfg);
    let loss_at = |stage: usize, iter: usize| {
        let nets = &rec.snapshots[&iter];
        let params = PenaltyParams {
            mu: cfg.pm.mu0 * cfg.pm.beta.powi(stage as i32),
            alpha: cfg.alpha_b,
            mu_box: 0.0,
            eta_interior: None,
            eta_boundary: None,
        };
        penalty_loss(&col, Field::Net(&nets["y"]), Field::Net(&nets["u"]), &params, false).0.total
    };
    let mut boundaries = 0;
    for w in r.trace.windows(2) {
        if w[1].stage == w[0].stage + 1 {
            assert_eq!(w[0].iter, w[1].iter);
            assert!(close(w[0].loss_total, loss_at(w[0].stage, w[0].iter), 1e-12));
            assert!(close(w[1].loss_total, loss_at(w[1].stage, w[1].iter), 1e-12));
            // Same networks, larger penalty weight.
            assert!(w[1].loss_total > w[0].loss_total);
            assert_eq!(w[0].objective, w[1].objective);
            boundaries += 1;
        }
    }
    assert_eq!(boundaries, cfg.pm.stages - 1);
}

#[test]
fn aonn_with_zero_step_keeps_the_control() {
    let problem = load_problem("ex1_annulus").unwrap();
    let mut cfg = small(Method::Aonn, 0);
    cfg.aonn.outer = 0;
    let initial = solve::<f64>(&problem, &cfg, &mut Recorder::default()).unwrap();
    assert_eq!(initial.iterations, 0);
    cfg.aonn.outer = 2;
    cfg.aonn.step = 0.0;
    let r = solve::<f64>(&problem, &cfg, &mut Recorder::default()).unwrap();
    assert_eq!(r.u_net.unwrap().params(), initial.u_net.unwrap().params());
    assert_ne!(r.y_net.params(), initial.y_net.params());
    assert_eq!(r.optimality_gaps.len(), 2);
}

#[test]
fn alm_multipliers_are_pointwise() {
    let problem = load_problem("ex1_annulus").unwrap();
    let cfg = small(Method::Alm, 0);
    let r = solve::<f64>(&problem, &cfg, &mut Recorder::default()).unwrap();
    let (eta_d, eta_b) = r.multipliers.unwrap();
    assert_eq!(eta_d.len(), cfg.n_interior);
    assert_eq!(eta_b.len(), cfg.n_boundary);
    assert!(eta_d.iter().any(|&e| e != 0.0));
    let pm = solve::<f64>(&problem, &small(Method::Pm, 0), &mut Recorder::default()).unwrap();
    assert!(pm.multipliers.is_none());
}

#[test]
fn multipliers_stay_put_on_feasible_pairs() {
    let problem = load_problem("ex4_semilinear").unwrap();
    let cfg = small(Method::Alm, 0);
    let col = collocation(&problem, &cfg);
    let exact = problem.exact().unwrap();
    let uf = exact.u.clone();
    let u = cpinn::problems::AnalyticField::value_only(move |x| uf(x));
    let (res, misfit) = constraint_residuals(&col, Field::Analytic(&exact.y), Field::Analytic(&u));
    let start: Vec<f64> = (0..res.len()).map(|i| i as f64 * 0.01 - 1.0).collect();
    let mut eta = start.clone();
    update_multipliers(&mut eta, &res, 0.1, None);
    for (a, b) in eta.iter().zip(&start) {
        assert!((a - b).abs() <= 1e-12);
    }
    let mut eta_b = vec![0.5; misfit.len()];
    update_multipliers(&mut eta_b, &misfit, 0.5, None);
    assert!(eta_b.iter().all(|&e| e == 0.5));
    update_multipliers(&mut eta_b, &vec![1e9; misfit.len()], 1.0, Some(1e6));
    assert!(eta_b.iter().all(|&e| e == 1e6));
}

#[test]
fn constrained_cpinn_control_is_feasible() {
    let problem = load_problem("ex2_annulus_box").unwrap();
    let r = solve::<f64>(&problem, &small(Method::Cpinn, 30), &mut Recorder::default()).unwrap();
    let eval = Evaluator::<f64>::new(&problem, 5000, 3).unwrap();
    let u = eval.control_values(r.control());
    assert!(u.iter().all(|v| (-0.5..=0.7).contains(v)));
    assert!(u.iter().any(|&v| v == -0.5 || v == 0.7) || r.metrics.einf_u < 1.0);
}

#[test]
fn non_finite_data_aborts_with_a_checkpoint() {
    let mut problem = load_problem("ex1_annulus").unwrap();
    problem.f = Arc::new(|x: &[f64]| if x[0] > 2.5 { f64::NAN } else { 0.0 });
    let mut rec = Recorder::default();
    let err = solve::<f64>(&problem, &small(Method::Cpinn, 10), &mut rec).unwrap_err();
    assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    assert!(rec.snapshots.contains_key(&0));
}

#[test]
fn single_precision_run() {
    let problem = load_problem("ex1_annulus").unwrap();
    let r = solve::<f32>(&problem, &small(Method::Cpinn, 20), &mut cpinn::solvers::NoMonitor).unwrap();
    assert_eq!(r.precision, "f32");
    assert!(r.metrics.e2_y.is_finite());
    assert!(r.trace.last().unwrap().loss_total < r.trace[0].loss_total);
}

#[test]
fn objective_of_trace_matches_recovered_control() {
    let problem = load_problem("ex1_annulus").unwrap();
    let cfg = small(Method::Cpinn, 0);
    let r = solve::<f64>(&problem, &cfg, &mut Recorder::default()).unwrap();
    let col = collocation(&problem, &cfg);
    let p = r.p_net.as_ref().unwrap();
    // Unconstrained recovery is linear: u = -p/λ as a scaled copy of the adjoint net.
    let mut u = p.clone();
    u.scale_output(-1.0 / problem.lambda);
    let j = objective_j(&col, Field::Net(&r.y_net), Field::Net(&u));
    assert!(close(j, r.trace[0].objective, 1e-12));
}
