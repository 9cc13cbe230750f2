use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cpinn::problems::{load_problem, verify_manufactured};
use cpinn::runner::{self, Precision, RunOptions, OUTPUT_ROOT_VAR};

#[derive(Parser)]
#[command(name = "cpinn", version, about = "Neural solvers for elliptic optimal control problems")]
struct Cli {
    /// Overrides the solver seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the floating-point precision of the config.
    #[arg(long, global = true, value_parser = ["32", "64"])]
    precision: Option<String>,
    /// Directory relative output paths are resolved against.
    #[arg(long, global = true, env = OUTPUT_ROOT_VAR, default_value = ".")]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured method and write its artifacts.
    Run { config: PathBuf },
    /// Train every method listed in the config and write a comparison table.
    Compare { config: PathBuf },
    /// Check that a benchmark's data satisfy its optimality system.
    Verify {
        problem: String,
        #[arg(long, default_value_t = 10_000)]
        points: usize,
    },
    /// Run the derivative, bound and consistency suites.
    Selftest,
    /// Run the config once per value of a dotted key, e.g. `solver.pm.mu0`.
    Sweep {
        config: PathBuf,
        key: String,
        #[arg(required = true)]
        values: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let precision = match cli.precision.as_deref() {
        Some("32") => Some(Precision::Single),
        Some("64") => Some(Precision::Double),
        Some(other) => bail!("unsupported precision {other}"),
        None => None,
    };
    let opts = RunOptions {
        output_root: cli.output_root,
        seed: cli.seed,
        precision,
    };
    match cli.command {
        Command::Run { config } => {
            let out = runner::run_experiment(&config, &opts)
                .with_context(|| format!("run {}", config.display()))?;
            let m = out.metrics;
            println!("method,e2_y,einf_y,e2_u,einf_u,J,time_s");
            println!(
                "{},{:e},{:e},{:e},{:e},{:e},{:.3}",
                out.method.label(),
                m.e2_y,
                m.einf_y,
                m.e2_u,
                m.einf_u,
                m.objective,
                m.time_s
            );
            println!("artifacts in {}", out.dir.display());
            Ok(true)
        }
        Command::Compare { config } => {
            let out = runner::run_comparison(&config, &opts)
                .with_context(|| format!("compare {}", config.display()))?;
            print!("{}", std::fs::read_to_string(out.dir.join("comparison.csv"))?);
            for (method, err) in &out.failures {
                eprintln!("{} failed: {err}", method.label());
            }
            Ok(out.failures.is_empty())
        }
        Command::Verify { problem, points } => {
            let spec = load_problem(&problem)?;
            let r = verify_manufactured(&spec, points)?;
            println!(
                "{problem}: state {:.3e} adjoint {:.3e} optimality {:.3e} (tolerance {:e}{}) {}",
                r.max_state_residual,
                r.max_adjoint_residual,
                r.max_optimality_gap,
                r.tolerance,
                if r.finite_differences { ", finite differences" } else { "" },
                if r.pass { "PASS" } else { "FAIL" }
            );
            Ok(r.pass)
        }
        Command::Selftest => {
            let r = runner::selftest(cli.seed.unwrap_or(0))?;
            let d = &r.derivatives;
            println!(
                "derivatives: {} nets, {} points, gradient {:.2e} laplacian {:.2e} parameters {:.2e} {}",
                d.nets,
                d.points,
                d.max_gradient_error,
                d.max_laplacian_error,
                d.max_param_error,
                verdict(d.pass(1e-6, 1e-5))
            );
            let b = &r.bounds;
            println!(
                "bounds: {} pairs, {} checks, {} violations, worst ratio {:.2e} {}",
                b.pairs,
                b.checks,
                b.violations,
                b.worst_ratio,
                verdict(b.violations == 0)
            );
            for (name, c) in &r.consistency {
                println!(
                    "consistency {name}: max residual {:.2e} {}",
                    c.max_state_residual.max(c.max_adjoint_residual).max(c.max_optimality_gap),
                    verdict(c.pass)
                );
            }
            Ok(r.pass())
        }
        Command::Sweep { config, key, values } => {
            let out = runner::run_sweep(&config, &key, &values, &opts)
                .with_context(|| format!("sweep {}", config.display()))?;
            print!("{}", std::fs::read_to_string(&out.csv)?);
            Ok(out.rows.iter().all(|r| !r.time_s.is_nan()))
        }
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
