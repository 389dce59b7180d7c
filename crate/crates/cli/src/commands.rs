//! Subcommand implementations. Each returns the process exit code:
//! 0 success, 1 assertion/bound violation or runtime failure, 2 is reserved
//! for configuration errors (raised before these run).

use crate::config::RunConfig;
use crate::report::{fmt_f64, write_csv};
use crate::svg::{log_log_chart, Series};
use anyhow::Result;
use qbv_core::filter::run_lemma_suite;
use qbv_core::{
    inject_noise, naive_backward, run_convergence_sweep, run_stability_experiment,
    solve_regularized, FilterParams,
};
use std::path::{Path, PathBuf};

pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub svg: bool,
    pub seed_offset: u64,
}

impl Context {
    fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Run the lemma sampling suites; exit 0 iff zero violations.
pub fn cmd_verify_lemmas(ctx: &Context) -> Result<i32> {
    let report = run_lemma_suite(&ctx.config.lemma_config())?;
    println!(
        "lemma suite: {} cells, {} samples, {} violations",
        report.cells_checked,
        report.samples_checked,
        report.violations.len()
    );
    for (i, margin) in report.worst_margin.iter().enumerate() {
        println!("lemma {} worst margin (bound/lhs): {}", i + 1, fmt_f64(*margin));
    }
    if report.passed() {
        Ok(0)
    } else {
        for v in &report.violations {
            eprintln!(
                "violation (lemma {}): {} lhs={} bound={}",
                v.lemma,
                v.description,
                fmt_f64(v.lhs),
                fmt_f64(v.bound)
            );
        }
        Ok(1)
    }
}

/// Single exact-data solve; one CSV row per (t_n, mode) with the filtered
/// data term as a closed-form check column.
pub fn cmd_solve(ctx: &Context) -> Result<i32> {
    let config = &ctx.config;
    let basis = config.basis()?;
    let profile = config.profile()?;
    let grid = config.grid()?;
    let problem = config.problem(&basis)?;
    let delta = config.solve_delta;
    let radius = config.schedule()?.radius(delta)?;
    let src = problem.source().with_radius(radius)?;
    let params = FilterParams::new(delta, config.filter_k, &profile)?;

    let solution = solve_regularized(
        problem.final_data(),
        &params,
        &profile,
        &src,
        &basis,
        &grid,
        &config.solver_config(),
    )?;
    println!(
        "converged=true iterations={} residual={}",
        solution.iterations_used(),
        fmt_f64(solution.final_residual())
    );

    let mut rows = Vec::new();
    for (n, &t) in grid.nodes().iter().enumerate() {
        for p in 1..=basis.modes() {
            let phi = qbv_core::phi_filter(&params, &profile, profile.horizon(), t, basis.eigenvalue(p))?;
            let data_term = phi * problem.final_data().coeff(p);
            rows.push(format!(
                "{},{},{},{},{}",
                fmt_f64(t),
                p,
                fmt_f64(solution.field(n).coeff(p)),
                fmt_f64(data_term),
                true
            ));
        }
    }
    let path = ctx.out_path("solve.csv");
    write_csv(&path, "t,mode,coeff,data_term,converged", &rows)?;
    println!("wrote {}", path.display());
    Ok(0)
}

/// Noisy-data convergence sweep; CSV plus optional log-log charts.
pub fn cmd_sweep(ctx: &Context) -> Result<i32> {
    let config = &ctx.config;
    let basis = config.basis()?;
    let profile = config.profile()?;
    let grid = config.grid()?;
    config.check_times_on_grid(&grid, &config.sweep_times, "sweep.times")?;
    let problem = config.problem(&basis)?;
    let report = run_convergence_sweep(
        &problem,
        &config.sweep_plan(ctx.seed_offset),
        &basis,
        &grid,
        &config.schedule()?,
        &config.solver_config(),
    )?;

    let mut rows = Vec::new();
    for cell in &report.cells {
        rows.push(format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(cell.delta),
            fmt_f64(report.k),
            fmt_f64(cell.t),
            fmt_f64(profile.lower()),
            fmt_f64(profile.upper()),
            fmt_f64(profile.horizon()),
            basis.modes(),
            cell.seed,
            fmt_f64(cell.err_total),
            fmt_f64(cell.err_exact_data),
            fmt_f64(cell.err_stability),
            fmt_f64(cell.rate),
            fmt_f64(cell.bound),
            fmt_f64(cell.ratio),
            cell.converged
        ));
    }
    let path = ctx.out_path("sweep.csv");
    write_csv(
        &path,
        "delta,k,t,p,q,T,modes,seed,err_total,err_exactdata,err_stability,rate,bound,ratio,converged",
        &rows,
    )?;
    println!("wrote {}", path.display());
    for fit in &report.fits {
        println!(
            "t={}: C_T={} spread={} ratio envelope [{}, {}]{}",
            fmt_f64(fit.t),
            fmt_f64(fit.c_t),
            fmt_f64(fit.spread),
            fmt_f64(fit.min_ratio),
            fmt_f64(fit.max_ratio),
            if fit.degenerate { " (degenerate)" } else { "" }
        );
    }

    if ctx.svg {
        for &t in &config.sweep_times {
            let mut series = Vec::new();
            for rep in 0..config.sweep_replicates {
                let seed = ctx.seed_offset + rep as u64;
                let points: Vec<(f64, f64)> = report
                    .cells
                    .iter()
                    .filter(|c| c.t == t && c.seed == seed && c.err_total.is_finite())
                    .map(|c| (c.delta, c.err_total))
                    .collect();
                series.push(Series { label: format!("seed {seed}"), points });
            }
            let svg = log_log_chart(
                &format!("total error vs delta at t = {t}"),
                "delta",
                "err_total",
                &series,
            );
            let path = ctx.out_path(&format!("sweep_t{t}.svg"));
            std::fs::write(&path, svg)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(0)
}

/// Stability trials; exit 1 if any trial violates the bound.
pub fn cmd_stability(ctx: &Context) -> Result<i32> {
    let config = &ctx.config;
    let basis = config.basis()?;
    let grid = config.grid()?;
    config.check_times_on_grid(&grid, &config.stability_times, "stability.times")?;
    let problem = config.problem(&basis)?;
    let report = run_stability_experiment(
        &problem,
        config.stability_delta,
        config.filter_k,
        &config.stability_epsilons,
        config.stability_seeds,
        ctx.seed_offset,
        &config.stability_times,
        &basis,
        &grid,
        &config.schedule()?,
        &config.solver_config(),
    )?;

    let rows: Vec<String> = report
        .trials
        .iter()
        .map(|trial| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                fmt_f64(trial.delta),
                fmt_f64(report.k),
                fmt_f64(trial.t),
                fmt_f64(trial.epsilon),
                trial.seed,
                fmt_f64(trial.diff_data),
                fmt_f64(trial.diff_solution),
                fmt_f64(trial.bound),
                trial.satisfied
            )
        })
        .collect();
    let path = ctx.out_path("stability.csv");
    write_csv(&path, "delta,k,t,epsilon,seed,diff_data,diff_solution,bound,satisfied", &rows)?;
    println!("wrote {}", path.display());

    let satisfied = report.trials.iter().filter(|t| t.satisfied).count();
    println!("{satisfied}/{} trials satisfied the stability bound", report.trials.len());
    Ok(if report.all_satisfied() { 0 } else { 1 })
}

/// Unregularized vs regularized backward solve on the same noisy data; one
/// CSV row per mode at t = 0. Overflow is data, not an error.
pub fn cmd_illposed(ctx: &Context) -> Result<i32> {
    let config = &ctx.config;
    let basis = config.basis()?;
    let profile = config.profile()?;
    let grid = config.grid()?;
    let problem = config.problem(&basis)?;
    let delta = config.illposed_delta;
    let noisy = inject_noise(problem.final_data(), delta, ctx.seed_offset)?;

    let naive = naive_backward(&noisy, &profile, problem.source(), &basis, &grid)?;
    let src = problem.source().with_radius(config.schedule()?.radius(delta)?)?;
    let params = FilterParams::new(delta, config.filter_k, &profile)?;
    let regularized = solve_regularized(
        &noisy,
        &params,
        &profile,
        &src,
        &basis,
        &grid,
        &config.solver_config(),
    )?;

    let exact = problem.exact_solution(0.0);
    let rows: Vec<String> = (1..=basis.modes())
        .map(|p| {
            let naive_err = (naive.field(0).coeff(p) - exact.coeff(p)).abs();
            let reg_err = (regularized.field(0).coeff(p) - exact.coeff(p)).abs();
            format!(
                "{},{},{},{}",
                p,
                fmt_f64(naive.amplification()[p - 1]),
                fmt_f64(naive_err),
                fmt_f64(reg_err)
            )
        })
        .collect();
    let path = ctx.out_path("illposed.csv");
    write_csv(&path, "mode,amplification,naive_err_or_inf,regularized_err", &rows)?;
    println!("wrote {}", path.display());

    let naive_total = naive.field(0).distance(&exact);
    let reg_total = regularized.field(0).distance(&exact);
    println!(
        "t=0 H-norm error: naive={} regularized={} (noise {})",
        fmt_f64(naive_total),
        fmt_f64(reg_total),
        fmt_f64(delta)
    );
    Ok(0)
}

pub fn ensure_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}
