use super::*;
use crate::loss::{
    adjoint_pinn_loss, constraint_residuals, control_fit_loss, empirical_loss, field_values,
    forward_pinn_loss, objective_j, penalty_loss, Field, LossWeights, PenaltyParams,
};

fn f<T: Real>(v: T) -> f64 {
    v.to_f64_lossy()
}

fn concat<T: Real>(a: &Mlp<T>, b: &Mlp<T>) -> Vec<T> {
    let mut v = a.params();
    v.extend(b.params());
    v
}

/// Saves the last good networks before passing an optimizer error on.
fn guard<T: Real, R>(tracker: &mut Tracker<'_, T>, iteration: usize, nets: Vec<(&'static str, &Mlp<T>)>, r: Result<R>) -> Result<R> {
    if r.is_err() {
        tracker.checkpoint(iteration, nets)?;
    }
    r
}

fn finish<T: Real>(
    ctx: &Context<'_, T>,
    tracker: Tracker<'_, T>,
    y: Mlp<T>,
    p: Option<Mlp<T>>,
    u: Option<Mlp<T>>,
    iterations: usize,
) -> Result<SolveReport<T>> {
    let wall_seconds = tracker.elapsed();
    let control = match (&u, &p) {
        (Some(u), _) => Control::Net(u),
        (None, Some(p)) => Control::Recovered(p),
        _ => unreachable!(),
    };
    let metrics = ctx.metrics(&y, control, wall_seconds)?;
    Ok(SolveReport {
        method: ctx.cfg.method,
        problem: ctx.problem.name.clone(),
        seed: ctx.cfg.seed,
        precision: T::TAG,
        y_net: y,
        p_net: p,
        u_net: u,
        trace: tracker.rows,
        metrics,
        iterations,
        wall_seconds,
        config: ctx.cfg.clone(),
        terminations: tracker.terminations,
        optimality_gaps: Vec::new(),
        multipliers: None,
    })
}

fn with_method(cfg: &SolverConfig, method: Method) -> SolverConfig {
    SolverConfig {
        method,
        ..cfg.clone()
    }
}

pub fn solve_cpinn<T: Real>(problem: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveReport<T>> {
    solve(problem, &with_method(cfg, Method::Cpinn), &mut NoMonitor)
}

pub fn solve_aonn<T: Real>(problem: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveReport<T>> {
    solve(problem, &with_method(cfg, Method::Aonn), &mut NoMonitor)
}

pub fn solve_pm<T: Real>(problem: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveReport<T>> {
    solve(problem, &with_method(cfg, Method::Pm), &mut NoMonitor)
}

pub fn solve_alm<T: Real>(problem: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveReport<T>> {
    solve(problem, &with_method(cfg, Method::Alm), &mut NoMonitor)
}

pub(super) fn cpinn<T: Real>(ctx: &Context<'_, T>, monitor: &mut dyn Monitor<T>) -> Result<SolveReport<T>> {
    let cfg = ctx.cfg;
    let weights = cfg
        .weights
        .unwrap_or_else(|| LossWeights::defaults(ctx.problem.lambda, cfg.alpha_b));
    let mut y = ctx.init_net(0)?;
    let mut p = ctx.init_net(1)?;
    if ctx.problem.bounds.is_some() {
        // The control is -p/λ, so the adjoint output carries the factor λ.
        p.scale_output(T::lit(cfg.init_scale * ctx.problem.lambda));
    }
    let ny = y.num_params();
    let mut tracker = Tracker::new(cfg, monitor);
    let losses = |y: &Mlp<T>, p: &Mlp<T>| {
        let (b, _) = empirical_loss(&ctx.col, Field::Net(y), Field::Net(p), &weights, false);
        LossRow {
            total: f(b.total),
            state_res: f(b.state_residual_term),
            adj_res: f(b.adjoint_residual_term),
            bdry_y: f(b.boundary_y_term),
            bdry_p: f(b.boundary_p_term),
            objective: f(b.objective),
        }
    };
    tracker.record(ctx, 0, 0, losses(&y, &p), &y, Control::Recovered(&p), true)?;
    let mut theta = concat(&y, &p);
    let (mut wy, mut wp) = (y.clone(), p.clone());
    let mut last = 0;
    let outcome = {
        let (y, p, tracker) = (&mut y, &mut p, &mut tracker);
        run_optimizer(
            cfg,
            &mut theta,
            cfg.iterations,
            |th| {
                set(&mut wy, &th[..ny]);
                set(&mut wp, &th[ny..]);
                let (b, g) = empirical_loss(&ctx.col, Field::Net(&wy), Field::Net(&wp), &weights, true);
                (b.total, g)
            },
            |k, th| {
                set(y, &th[..ny]);
                set(p, &th[ny..]);
                last = k;
                if tracker.row_due(k) && k < cfg.iterations {
                    tracker.record(ctx, k, 0, losses(y, p), y, Control::Recovered(p), false)?;
                }
                if tracker.checkpoint_due(k) {
                    tracker.checkpoint(k, vec![("y", &*y), ("p", &*p)])?;
                }
                Ok(true)
            },
        )
    };
    let (iters, how) = guard(&mut tracker, last, vec![("y", &y), ("p", &p)], outcome)?;
    set(&mut y, &theta[..ny]);
    set(&mut p, &theta[ny..]);
    tracker.terminations.push(how);
    if iters > 0 {
        tracker.record(ctx, iters, 0, losses(&y, &p), &y, Control::Recovered(&p), true)?;
    }
    tracker.checkpoint(iters, vec![("y", &y), ("p", &p)])?;
    finish(ctx, tracker, y, Some(p), None, iters)
}

pub(super) fn aonn<T: Real>(ctx: &Context<'_, T>, monitor: &mut dyn Monitor<T>) -> Result<SolveReport<T>> {
    let cfg = ctx.cfg;
    let a = &cfg.aonn;
    let alpha = cfg.alpha_b;
    let col = &ctx.col;
    let mut y = ctx.init_net(0)?;
    let mut p = ctx.init_net(1)?;
    let mut u = ctx.init_net(2)?;
    if ctx.problem.bounds.is_some() {
        u.scale_output(T::lit(cfg.init_scale));
    }
    let lambda = T::lit(ctx.problem.lambda);
    let step = T::lit(a.step);
    let mut tracker = Tracker::new(cfg, monitor);
    let losses = |y: &Mlp<T>, p: &Mlp<T>, u: &Mlp<T>| {
        let (s, _) = forward_pinn_loss(col, Field::Net(y), Field::Net(u), alpha, false);
        let (ad, _) = adjoint_pinn_loss(col, Field::Net(p), Field::Net(y), alpha, false);
        LossRow {
            total: f(s.total + ad.total),
            state_res: f(s.residual),
            adj_res: f(ad.residual),
            bdry_y: f(s.boundary),
            bdry_p: f(ad.boundary),
            objective: f(objective_j(col, Field::Net(y), Field::Net(u))),
        }
    };
    tracker.record(ctx, 0, 0, losses(&y, &p, &u), &y, Control::Net(&u), true)?;
    let mut global = 0usize;
    let mut gaps = Vec::with_capacity(a.outer);

    for k in 0..a.outer {
        // Each sub-problem trains one network; the others enter through frozen values.
        for phase in 0..3 {
            let u_vals = field_values(&col.interior, Field::Net(&u));
            let y_vals = field_values(&col.interior, Field::Net(&y));
            let target: Vec<T> = if phase == 2 {
                let p_vals = field_values(&col.interior, Field::Net(&p));
                let mut sq = Vec::with_capacity(p_vals.len());
                let t = u_vals
                    .iter()
                    .zip(&p_vals)
                    .map(|(&uv, &pv)| {
                        let d = lambda * uv + pv;
                        sq.push(f(d * d));
                        col.project(uv - step * d)
                    })
                    .collect();
                gaps.push((crate::scalar::pairwise_sum(&sq) / sq.len() as f64).sqrt());
                t
            } else {
                Vec::new()
            };
            let (net, iters): (&mut Mlp<T>, usize) = match phase {
                0 => (&mut y, a.solve_iters),
                1 => (&mut p, a.solve_iters),
                _ => (&mut u, a.fit_iters),
            };
            let mut theta = net.params();
            let mut work = net.clone();
            let mut seen = net.clone();
            let base = global;
            let outcome = {
                let tracker = &mut tracker;
                let (yr, pr, ur) = (&y, &p, &u);
                run_optimizer(
                    cfg,
                    &mut theta,
                    iters,
                    |th| {
                        set(&mut work, th);
                        let (l, g) = match phase {
                            0 => {
                                let (t, g) = forward_pinn_loss(col, Field::Net(&work), Field::Values(&u_vals), alpha, true);
                                (t.total, g)
                            }
                            1 => {
                                let (t, g) = adjoint_pinn_loss(col, Field::Net(&work), Field::Values(&y_vals), alpha, true);
                                (t.total, g)
                            }
                            _ => control_fit_loss(col, Field::Net(&work), &target, true),
                        };
                        (l, g)
                    },
                    |j, th| {
                        set(&mut seen, th);
                        let it = base + j;
                        if (tracker.row_due(it) && j < iters) || tracker.checkpoint_due(it) {
                            let (yy, pp, uu) = match phase {
                                0 => (&seen, pr, ur),
                                1 => (yr, &seen, ur),
                                _ => (yr, pr, &seen),
                            };
                            if tracker.row_due(it) && j < iters {
                                tracker.record(ctx, it, k, losses(yy, pp, uu), yy, Control::Net(uu), false)?;
                            }
                            if tracker.checkpoint_due(it) {
                                tracker.checkpoint(it, vec![("y", yy), ("p", pp), ("u", uu)])?;
                            }
                        }
                        Ok(true)
                    },
                )
            };
            let (done, how) = guard(&mut tracker, global, vec![("y", &y), ("p", &p), ("u", &u)], outcome)?;
            let net = match phase {
                0 => &mut y,
                1 => &mut p,
                _ => &mut u,
            };
            set(net, &theta);
            global += done;
            tracker.terminations.push(format!("outer {k} phase {phase}: {how}"));
        }
    }
    tracker.record(ctx, global, a.outer, losses(&y, &p, &u), &y, Control::Net(&u), true)?;
    tracker.checkpoint(global, vec![("y", &y), ("p", &p), ("u", &u)])?;
    let mut report = finish(ctx, tracker, y, Some(p), Some(u), global)?;
    report.optimality_gaps = gaps;
    Ok(report)
}

/// `η ← η + step·residual`, clipped to `|η| ≤ clip` when given.
pub fn update_multipliers<T: Real>(eta: &mut [T], residual: &[T], step: f64, clip: Option<f64>) {
    assert_eq!(eta.len(), residual.len());
    let step = T::lit(step);
    for (e, &r) in eta.iter_mut().zip(residual) {
        let v = *e + step * r;
        *e = match clip {
            Some(c) => v.max(T::lit(-c)).min(T::lit(c)),
            None => v,
        };
    }
}

/// Shared driver of the penalty and augmented-Lagrangian methods.
fn penalty_family<T: Real>(
    ctx: &Context<'_, T>,
    monitor: &mut dyn Monitor<T>,
    schedule: Vec<(f64, f64, usize)>,
    multipliers: Option<(f64, Option<f64>)>,
) -> Result<SolveReport<T>> {
    let cfg = ctx.cfg;
    let col = &ctx.col;
    let alpha = cfg.alpha_b;
    let mut y = ctx.init_net(0)?;
    let mut u = ctx.init_net(2)?;
    if ctx.problem.bounds.is_some() {
        u.scale_output(T::lit(cfg.init_scale));
    }
    let ny = y.num_params();
    let mut eta_d = vec![T::zero(); col.interior.len()];
    let mut eta_b = vec![T::zero(); col.boundary.len()];
    let use_eta = multipliers.is_some();
    let mut tracker = Tracker::new(cfg, monitor);
    let mut global = 0usize;

    for (stage, &(mu, mu_box, iters)) in schedule.iter().enumerate() {
        let params = PenaltyParams {
            mu,
            alpha,
            mu_box,
            eta_interior: use_eta.then_some(&eta_d[..]),
            eta_boundary: use_eta.then_some(&eta_b[..]),
        };
        let losses = |y: &Mlp<T>, u: &Mlp<T>| {
            let (t, _) = penalty_loss(col, Field::Net(y), Field::Net(u), &params, false);
            LossRow {
                total: f(t.total),
                state_res: f(t.residual),
                adj_res: f64::NAN,
                bdry_y: f(t.boundary),
                bdry_p: f64::NAN,
                objective: f(t.objective),
            }
        };
        // Start of every sub-problem, under its own weights.
        tracker.record(ctx, global, stage, losses(&y, &u), &y, Control::Net(&u), true)?;
        let mut theta = concat(&y, &u);
        let (mut wy, mut wu) = (y.clone(), u.clone());
        let base = global;
        let outcome = {
            let (y, u, tracker) = (&mut y, &mut u, &mut tracker);
            run_optimizer(
                cfg,
                &mut theta,
                iters,
                |th| {
                    set(&mut wy, &th[..ny]);
                    set(&mut wu, &th[ny..]);
                    let (t, g) = penalty_loss(col, Field::Net(&wy), Field::Net(&wu), &params, true);
                    (t.total, g)
                },
                |j, th| {
                    set(y, &th[..ny]);
                    set(u, &th[ny..]);
                    let it = base + j;
                    if tracker.row_due(it) && j < iters {
                        tracker.record(ctx, it, stage, losses(y, u), y, Control::Net(u), false)?;
                    }
                    if tracker.checkpoint_due(it) {
                        tracker.checkpoint(it, vec![("y", &*y), ("u", &*u)])?;
                    }
                    Ok(true)
                },
            )
        };
        let (done, how) = guard(&mut tracker, global, vec![("y", &y), ("u", &u)], outcome)?;
        set(&mut y, &theta[..ny]);
        set(&mut u, &theta[ny..]);
        global += done;
        tracker.terminations.push(format!("stage {stage} (mu = {mu}): {how}"));
        tracker.record(ctx, global, stage, losses(&y, &u), &y, Control::Net(&u), true)?;

        if let Some((mu_eta, clip)) = multipliers {
            let (res, misfit) = constraint_residuals(col, Field::Net(&y), Field::Net(&u));
            update_multipliers(&mut eta_d, &res, mu_eta, clip);
            update_multipliers(&mut eta_b, &misfit, mu_eta * alpha, clip);
        }
    }
    tracker.checkpoint(global, vec![("y", &y), ("u", &u)])?;
    let mut report = finish(ctx, tracker, y, None, Some(u), global)?;
    if use_eta {
        report.multipliers = Some((eta_d, eta_b));
    }
    Ok(report)
}

fn box_weight(ctx: &Context<'_, impl Real>, mu0: f64, beta: f64, k: usize) -> f64 {
    if ctx.problem.bounds.is_some() {
        mu0 * beta.powi(k as i32)
    } else {
        0.0
    }
}

pub(super) fn pm<T: Real>(ctx: &Context<'_, T>, monitor: &mut dyn Monitor<T>) -> Result<SolveReport<T>> {
    let c = &ctx.cfg.pm;
    let schedule = (0..c.stages)
        .map(|k| {
            let iters = if k == 0 { c.first_iters } else { c.stage_iters };
            (c.mu0 * c.beta.powi(k as i32), box_weight(ctx, c.box_mu0, c.box_beta, k), iters)
        })
        .collect();
    penalty_family(ctx, monitor, schedule, None)
}

pub(super) fn alm<T: Real>(ctx: &Context<'_, T>, monitor: &mut dyn Monitor<T>) -> Result<SolveReport<T>> {
    let c = &ctx.cfg.alm;
    let schedule = (0..c.rounds)
        .map(|k| {
            let iters = if k == 0 { c.first_iters } else { c.round_iters };
            (c.mu, box_weight(ctx, c.box_mu0, c.box_beta, k), iters)
        })
        .collect();
    penalty_family(ctx, monitor, schedule, Some((c.mu, c.clip)))
}
