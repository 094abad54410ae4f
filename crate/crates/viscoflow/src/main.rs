//! Command-line front end: `solve` and `optimize` runs driven by an INI-like
//! config, plus `verify`, a self-contained property suite. Exit codes:
//! 0 success, 1 configuration/usage error, 2 solver failure.

use clap::{Parser, Subcommand};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use viscoflow::calculus::{convection_form, norm_v_noslip, strain_magnitude_noslip};
use viscoflow::config::{self, RunConfig};
use viscoflow::control::{
    optimize, twin_experiment, AdmissibleSet, ControlBasis, CostFunctional, OptimizerConfig,
    ReducedProblem,
};
use viscoflow::diagnostics::{
    apriori_bound_check, blocking_test, vi_residual, vi_residual_floor, DEFAULT_POOL_SIZE,
};
use viscoflow::field::{ScalarField, VelocityField};
use viscoflow::io::{
    atomic_write, gnuplot_script, profile_csv, scalar_csv, velocity_csv, vtk_file, ManifestBuilder,
    RunLock,
};
use viscoflow::linalg::{random_solenoidal, smooth_solenoidal_modes};
use viscoflow::rheology::{
    monotonicity_check, poiseuille_oracle, SymMat, ViscosityModel,
};
use viscoflow::solver::{channel_profile, solve_flow, FlowProblem, SolveReport, SolverConfig};
use viscoflow::Error;

const OUTPUT_DIR_ENV: &str = "VISCOFLOW_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "viscoflow",
    version,
    about = "Steady viscoplastic flow solver with distributed-force optimal control"
)]
struct Cli {
    /// Directory for run artifacts (default: $VISCOFLOW_OUTPUT_DIR or ./out)
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Seed for all randomized components (test pools, multi-starts)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Suppress progress output
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the flow problem described by a config file
    Solve { config: PathBuf },
    /// Run the optimal-control loop described by a config file
    Optimize { config: PathBuf },
    /// Run the built-in property checks
    Verify {
        /// Only run checks whose name contains this substring
        #[arg(long)]
        filter: Option<String>,
        /// Debug mutation: flip the sign of the plastic dissipation term in
        /// the energy check (must make that check fail)
        #[arg(long, hide = true)]
        flip_yield_sign: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output_dir = cli
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let code = match &cli.command {
        Command::Solve { config } => cmd_solve(config, &output_dir, cli.seed, cli.quiet),
        Command::Optimize { config } => cmd_optimize(config, &output_dir, cli.seed, cli.quiet),
        Command::Verify {
            filter,
            flip_yield_sign,
        } => cmd_verify(filter.as_deref(), *flip_yield_sign, cli.seed, cli.quiet),
    };
    match code {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn read_config(path: &Path) -> Result<(RunConfig, String), Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = config::parse(&text)?;
    Ok((cfg, text))
}

fn write_fields(
    dir: &Path,
    cfg: &RunConfig,
    report: &SolveReport,
    manifest: &mut ManifestBuilder,
) -> Result<Vec<String>, Error> {
    let grid = &cfg.problem.grid;
    let mut files = Vec::new();
    let strain = strain_magnitude_noslip(&report.v);
    let rigid = ScalarField::from_fn(grid, {
        let mask = &report.rigid_mask;
        let g = grid.clone();
        move |x| {
            let idx = g.cell_index(
                ((x[0] / g.h(0)) as usize).min(g.cells(0) - 1),
                ((x[1] / g.h(1)) as usize).min(g.cells(1) - 1),
                ((x[2] / g.h(2)) as usize).min(g.cells(2) - 1),
            );
            if mask[idx] {
                1.0
            } else {
                0.0
            }
        }
    });

    if cfg.output.csv {
        for (name, text) in [
            ("velocity.csv", velocity_csv(&report.v)),
            ("pressure.csv", scalar_csv(&report.p)),
            ("strain_magnitude.csv", scalar_csv(&strain)),
            ("rigid_mask.csv", scalar_csv(&rigid)),
            ("profile.csv", profile_csv(&report.v)),
        ] {
            atomic_write(&dir.join(name), &text)?;
            files.push(name.to_string());
        }
    }
    if cfg.output.vtk {
        let text = vtk_file(grid, &report.v, &report.p, &strain, &report.rigid_mask);
        atomic_write(&dir.join("fields.vtk"), &text)?;
        files.push("fields.vtk".to_string());
    }
    if cfg.output.gnuplot && cfg.output.csv {
        atomic_write(&dir.join("plot.gp"), &gnuplot_script("profile.csv"))?;
        files.push("plot.gp".to_string());
    }
    manifest.value("files", json!(files));
    Ok(files)
}

fn report_to_manifest(report: &SolveReport, manifest: &mut ManifestBuilder) {
    manifest
        .scalar("energy_residual_regularized", report.energy_residual_regularized)
        .scalar("energy_residual_exact", report.energy_residual_exact)
        .scalar("external_work", report.external_work)
        .scalar("dissipation_viscous", report.dissipation_viscous)
        .scalar("dissipation_plastic", report.dissipation_plastic)
        .scalar("max_divergence", report.max_divergence)
        .scalar("norm_v", report.norm_v)
        .scalar("rigid_fraction", report.rigid_fraction)
        .value("iterations", json!(report.iterations))
        .value("linear_iterations", json!(report.linear_iterations))
        .value("converged", json!(report.converged));
}

fn cmd_solve(
    config_path: &Path,
    output_dir: &Path,
    seed: u64,
    quiet: bool,
) -> Result<ExitCode, Error> {
    let (cfg, text) = read_config(config_path)?;
    let _lock = RunLock::acquire(output_dir)?;
    let mut manifest = ManifestBuilder::new("solve", &text, seed);
    let t0 = Instant::now();
    let solved = solve_flow(&cfg.problem, &cfg.solver);
    manifest.timing("solve_seconds", t0.elapsed().as_secs_f64());
    let report = match solved {
        Ok(r) => r,
        Err(e) => {
            manifest.value("converged", json!(false));
            manifest.value("error", json!(e.to_string()));
            atomic_write(&output_dir.join("manifest.json"), &manifest.render())?;
            eprintln!("solver failure: {e}");
            return Ok(ExitCode::from(2));
        }
    };

    report_to_manifest(&report, &mut manifest);
    let t1 = Instant::now();
    let vi = vi_residual(&cfg.problem, &report.v, DEFAULT_POOL_SIZE, seed, cfg.solver.tol_div)?;
    let ap = apriori_bound_check(&cfg.problem, &report, seed)?;
    manifest.timing("diagnostics_seconds", t1.elapsed().as_secs_f64());
    manifest
        .scalar("vi_residual_min", vi.min_residual)
        .scalar("vi_residual_floor", vi_residual_floor(&cfg.problem.model))
        .value("vi_pool_size", json!(vi.pool_size))
        .scalar("embedding_constant", ap.embedding_constant)
        .scalar("apriori_bound", ap.bound)
        .value("apriori_satisfied", json!(ap.satisfied));

    write_fields(output_dir, &cfg, &report, &mut manifest)?;
    atomic_write(&output_dir.join("manifest.json"), &manifest.render())?;

    if !quiet {
        println!(
            "solved in {} iterations; |v|_V = {:.6e}, energy residual {:.3e}",
            report.iterations, report.norm_v, report.energy_residual_regularized
        );
        println!("artifacts in {}", output_dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_optimize(
    config_path: &Path,
    output_dir: &Path,
    seed: u64,
    quiet: bool,
) -> Result<ExitCode, Error> {
    let (cfg, text) = read_config(config_path)?;
    let control = cfg.control.clone().ok_or_else(|| {
        Error::Config("optimize requires a [control] section in the config".into())
    })?;
    let _lock = RunLock::acquire(output_dir)?;
    let mut manifest = ManifestBuilder::new("optimize", &text, seed);

    let basis = ControlBasis::harmonic(&cfg.problem.grid, control.basis_size)?;
    let mut opt_cfg = cfg.optimizer.clone();
    opt_cfg.seed = seed;

    let t0 = Instant::now();
    let twin = twin_experiment(
        &cfg.problem,
        &basis,
        &control.truth,
        control.lambda1,
        control.lambda2,
        &control.admissible,
        &cfg.solver,
        &opt_cfg,
    );
    manifest.timing("optimize_seconds", t0.elapsed().as_secs_f64());
    let twin = match twin {
        Ok(t) => t,
        Err(e) => {
            manifest.value("converged", json!(false));
            manifest.value("error", json!(e.to_string()));
            atomic_write(&output_dir.join("manifest.json"), &manifest.render())?;
            eprintln!("optimizer failure: {e}");
            return Ok(ExitCode::from(2));
        }
    };

    let pair = &twin.optimal;
    report_to_manifest(&pair.report, &mut manifest);
    manifest
        .scalar("cost_final", pair.cost)
        .scalar("cost_baseline", twin.baseline_cost)
        .value("cost_history", json!(pair.history))
        .value("coefficients", json!(pair.coeffs))
        .value("truth", json!(twin.truth))
        .value("evaluations", json!(pair.evaluations))
        .value("optimizer_iterations", json!(pair.iterations));
    if let Some(c) = &pair.candidates {
        manifest.value("candidate_costs", json!(c));
    }

    // admissibility certificates for the returned pair
    let final_problem = {
        let mut p = cfg.problem.clone();
        p.u = pair.u.clone();
        p
    };
    let vi = vi_residual(
        &final_problem,
        &pair.report.v,
        DEFAULT_POOL_SIZE,
        seed,
        cfg.solver.tol_div,
    )?;
    manifest
        .scalar("vi_residual_min", vi.min_residual)
        .scalar("vi_residual_floor", vi_residual_floor(&final_problem.model))
        .value("vi_pool_size", json!(vi.pool_size));

    let mut history_csv = String::from("step,cost\n");
    for (i, c) in pair.history.iter().enumerate() {
        history_csv.push_str(&format!("{i},{c}\n"));
    }
    atomic_write(&output_dir.join("cost_history.csv"), &history_csv)?;
    write_fields(output_dir, &cfg, &pair.report, &mut manifest)?;
    atomic_write(&output_dir.join("manifest.json"), &manifest.render())?;

    if !quiet {
        println!(
            "optimized: J = {:.6e} (baseline {:.6e}) after {} evaluations",
            pair.cost, twin.baseline_cost, pair.evaluations
        );
        println!("artifacts in {}", output_dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

struct Check {
    name: &'static str,
    run: fn(&VerifyContext) -> Result<(), String>,
}

struct VerifyContext {
    seed: u64,
    flip_yield_sign: bool,
}

fn check_monotonicity(ctx: &VerifyContext) -> Result<(), String> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let arctan = ViscosityModel::arctan(1.0).map_err(|e| e.to_string())?;
    let constant = ViscosityModel::constant(2.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(1));
    for trial in 0..1000 {
        let mut random = || {
            let mut m = SymMat::new(3);
            for i in 0..3 {
                for j in i..3 {
                    m.set(i, j, rng.gen_range(-10.0..10.0));
                }
            }
            m
        };
        let x = random();
        let y = random();
        let scale = x.frob().max(y.frob()).powi(2).max(1.0);
        let va = monotonicity_check(&arctan, &x, &y);
        if va < -1e-12 * scale {
            return Err(format!("trial {trial}: arctan model gave {va}"));
        }
        let vc = monotonicity_check(&constant, &x, &y);
        let d = x.sub(&y).frob();
        if (vc - 2.0 * d * d).abs() > 1e-12 * (2.0 * d * d).max(1.0) {
            return Err(format!("trial {trial}: constant model gave {vc}, want {}", 2.0 * d * d));
        }
    }
    Ok(())
}

fn check_skew_symmetry(ctx: &VerifyContext) -> Result<(), String> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let grid = viscoflow::grid::Grid::new(
        2,
        &[8, 8],
        &[1.0, 1.0],
        &[
            viscoflow::grid::BoundaryKind::Periodic,
            viscoflow::grid::BoundaryKind::Wall,
        ],
    )
    .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_add(2));
    for trial in 0..100 {
        let v = random_solenoidal(&grid, &mut rng).map_err(|e| e.to_string())?;
        let w = VelocityField::from_fn(&grid, |_, _| rng.gen_range(-1.0..1.0));
        let c = convection_form(&v, &w, &w).map_err(|e| e.to_string())?;
        let scale = v.l2_norm() * w.l2_norm() * w.l2_norm();
        if c.abs() > 1e-12 * scale.max(1.0) {
            return Err(format!("trial {trial}: c(v,w,w) = {c}"));
        }
    }
    Ok(())
}

fn check_newtonian_oracle(_ctx: &VerifyContext) -> Result<(), String> {
    let problem =
        FlowProblem::channel(4, 32, 1.0, 1.0, 0.0, 1.0, 1e-6).map_err(|e| e.to_string())?;
    let report = solve_flow(&problem, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let apex = 1.0 / 8.0;
    for (y, vx) in channel_profile(&report.v) {
        let exact = poiseuille_oracle(0.0, 1.0, 1.0, 0.5, y - 0.5).map_err(|e| e.to_string())?;
        if (vx - exact).abs() > 0.02 * apex {
            return Err(format!("at y = {y}: computed {vx}, oracle {exact}"));
        }
    }
    Ok(())
}

fn check_bingham_oracle(_ctx: &VerifyContext) -> Result<(), String> {
    let problem =
        FlowProblem::channel(4, 32, 2.0, 1.0, 0.25, 1.0, 1e-6).map_err(|e| e.to_string())?;
    let report = solve_flow(&problem, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let plug = channel_profile(&report.v)
        .iter()
        .map(|&(_, v)| v)
        .fold(0.0f64, f64::max);
    if (plug - 0.28125).abs() / 0.28125 > 0.02 {
        return Err(format!("plug velocity {plug}, oracle 0.28125"));
    }
    Ok(())
}

fn check_energy_identity(ctx: &VerifyContext) -> Result<(), String> {
    let problem =
        FlowProblem::channel(4, 32, 2.0, 1.0, 0.25, 1.0, 1e-6).map_err(|e| e.to_string())?;
    let report = solve_flow(&problem, &SolverConfig::default()).map_err(|e| e.to_string())?;
    if report.energy_residual_regularized > 1e-8 {
        return Err(format!(
            "regularized residual {}",
            report.energy_residual_regularized
        ));
    }
    let plastic_sign = if ctx.flip_yield_sign { -1.0 } else { 1.0 };
    let exact = report.dissipation_viscous + plastic_sign * report.dissipation_plastic;
    let residual = (exact - report.external_work).abs() / report.external_work.abs().max(1e-300);
    if residual > 1e-3 {
        return Err(format!("exact-form residual {residual}"));
    }
    Ok(())
}

fn check_blocking(ctx: &VerifyContext) -> Result<(), String> {
    let problem =
        FlowProblem::channel(4, 32, 2.0, 1.0, 1.0, 0.5, 1e-6).map_err(|e| e.to_string())?;
    let report = solve_flow(&problem, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let b = blocking_test(&problem, &report, DEFAULT_POOL_SIZE, ctx.seed, 1e-10)
        .map_err(|e| e.to_string())?;
    if !b.blocked {
        return Err(format!("max velocity {} above {}", b.max_velocity, b.threshold));
    }
    if !b.drive_nonpositive {
        return Err(format!("sampled drive {} is positive", b.max_drive));
    }
    Ok(())
}

fn check_apriori_bound(ctx: &VerifyContext) -> Result<(), String> {
    for (tau, force) in [(0.0, 1.0), (0.25, 1.0), (1.0, 0.5)] {
        let problem =
            FlowProblem::channel(4, 32, 2.0, 1.0, tau, force, 1e-6).map_err(|e| e.to_string())?;
        let report = solve_flow(&problem, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let ap = apriori_bound_check(&problem, &report, ctx.seed).map_err(|e| e.to_string())?;
        if !ap.satisfied {
            return Err(format!(
                "tau = {tau}: |v|_V = {} exceeds bound {}",
                ap.norm_v, ap.bound
            ));
        }
    }
    Ok(())
}

fn check_vi_residual(ctx: &VerifyContext) -> Result<(), String> {
    let problem =
        FlowProblem::channel(4, 32, 2.0, 1.0, 0.25, 1.0, 1e-6).map_err(|e| e.to_string())?;
    let report = solve_flow(&problem, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let vi = vi_residual(&problem, &report.v, DEFAULT_POOL_SIZE, ctx.seed, 1e-10)
        .map_err(|e| e.to_string())?;
    let floor = vi_residual_floor(&problem.model);
    if vi.min_residual < floor {
        return Err(format!("min residual {} below floor {floor}", vi.min_residual));
    }
    Ok(())
}

fn check_control_shortcut(ctx: &VerifyContext) -> Result<(), String> {
    let problem =
        FlowProblem::channel(4, 16, 1.0, 1.0, 0.05, 1.0, 1e-6).map_err(|e| e.to_string())?;
    let basis = ControlBasis::harmonic(&problem.grid, 2).map_err(|e| e.to_string())?;
    let cost = CostFunctional {
        lambda1: 0.0,
        lambda2: 1.0,
        v_target: VelocityField::zeros(&problem.grid),
        a_target: vec![2.0, 0.0],
    };
    let solver = SolverConfig::default();
    let reduced = ReducedProblem {
        template: &problem,
        basis: &basis,
        cost: &cost,
        solver: &solver,
    };
    let set = AdmissibleSet::Ball { radius: 1.0 };
    let mut cfg = OptimizerConfig::default();
    cfg.seed = ctx.seed;
    let out = optimize(&reduced, &set, &cfg).map_err(|e| e.to_string())?;
    if (out.coeffs[0] - 1.0).abs() > 1e-10 {
        return Err(format!("projected target should be [1, 0], got {:?}", out.coeffs));
    }
    Ok(())
}

fn check_pool_modes(_ctx: &VerifyContext) -> Result<(), String> {
    let grid = viscoflow::grid::Grid::new(
        2,
        &[8, 8],
        &[1.0, 1.0],
        &[
            viscoflow::grid::BoundaryKind::Periodic,
            viscoflow::grid::BoundaryKind::Wall,
        ],
    )
    .map_err(|e| e.to_string())?;
    for (i, m) in smooth_solenoidal_modes(&grid, 8)
        .map_err(|e| e.to_string())?
        .iter()
        .enumerate()
    {
        let d = viscoflow::calculus::divergence(m).max_abs();
        if d > 1e-10 {
            return Err(format!("mode {i} has divergence {d}"));
        }
        let n = norm_v_noslip(m);
        if !(n.is_finite() && n > 0.0) {
            return Err(format!("mode {i} has degenerate norm {n}"));
        }
    }
    Ok(())
}

const CHECKS: &[Check] = &[
    Check { name: "viscosity monotonicity", run: check_monotonicity },
    Check { name: "convection skew-symmetry", run: check_skew_symmetry },
    Check { name: "newtonian channel oracle", run: check_newtonian_oracle },
    Check { name: "bingham channel oracle", run: check_bingham_oracle },
    Check { name: "energy identity", run: check_energy_identity },
    Check { name: "blocking criterion", run: check_blocking },
    Check { name: "a-priori velocity bound", run: check_apriori_bound },
    Check { name: "flow inequality residual", run: check_vi_residual },
    Check { name: "control projection shortcut", run: check_control_shortcut },
    Check { name: "solenoidal test modes", run: check_pool_modes },
];

fn cmd_verify(
    filter: Option<&str>,
    flip_yield_sign: bool,
    seed: u64,
    quiet: bool,
) -> Result<ExitCode, Error> {
    let ctx = VerifyContext {
        seed,
        flip_yield_sign,
    };
    let selected: Vec<&Check> = CHECKS
        .iter()
        .filter(|c| filter.map(|f| c.name.contains(f)).unwrap_or(true))
        .collect();
    if selected.is_empty() {
        return Err(Error::Config(format!(
            "no check matches filter `{}`",
            filter.unwrap_or("")
        )));
    }
    let mut failures = 0;
    for check in &selected {
        match (check.run)(&ctx) {
            Ok(()) => {
                if !quiet {
                    println!("PASS  {}", check.name);
                }
            }
            Err(msg) => {
                failures += 1;
                println!("FAIL  {}: {msg}", check.name);
            }
        }
    }
    if !quiet {
        println!(
            "{}/{} checks passed",
            selected.len() - failures,
            selected.len()
        );
    }
    if failures == 0 {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}
