//! Experiment orchestration: the solve / sweep / verify / lab stages, run
//! directory management, and plot-data emission.
//!
//! Stages run sequentially in declared order; a failing stage is recorded in
//! the manifest and the remaining independent stages still execute (unless
//! `--strict` is set). Re-runs always allocate a fresh directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use degenlab_core::estimates::{
    bernstein_max_principle_check, caccioppoli_power_check, default_bernstein_lambda,
    default_bernstein_tolerance, diagonal_caccioppoli_check, energy_bound_audit,
    lipschitz_estimate_check, moser_ladder, propagation_check, sobolev_estimate_check,
    EstimateReport, MoserLadder,
};
use degenlab_core::grid::{lp_norm, partial, GridFunction};
use degenlab_core::minimize::{
    gradient_p_integral, harmonic_extension, solve_from, ProblemSpec, SolveReport,
};
use degenlab_core::troisi::{random_compact_field, troisi_check};

use crate::config::{ExperimentConfig, VerifyBlock};
use crate::io::{
    fmt_f64, read_grid_function, write_estimates_csv, write_estimates_json, write_grid_function,
    write_plot_csv, write_solve_reports, write_timings,
};
use crate::manifest::{unix_now, RunManifest, StageStatus};
use crate::DriverError;

#[derive(Debug, Clone)]
pub enum Mode {
    Solve,
    Sweep,
    Verify { solution: PathBuf },
    LabTroisi,
}

impl Mode {
    fn token(&self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Sweep => "sweep",
            Mode::Verify { .. } => "verify",
            Mode::LabTroisi => "lab",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub strict: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub failed_checks: usize,
    pub stage_errors: usize,
    pub reports: Vec<EstimateReport>,
}

struct RunState {
    dir: PathBuf,
    stages: Vec<StageStatus>,
    reports: Vec<EstimateReport>,
    strict: bool,
}

impl RunState {
    fn ok(&mut self, name: &str) {
        self.stages.push(StageStatus { name: name.into(), status: "ok".into() });
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.stages.push(StageStatus { name: name.into(), status: format!("skipped: {why}") });
    }

    fn fail(&mut self, name: &str, err: &dyn std::fmt::Display) -> Result<(), DriverError> {
        self.stages.push(StageStatus { name: name.into(), status: format!("error: {err}") });
        if self.strict {
            return Err(DriverError::Strict(format!("stage '{name}' failed: {err}")));
        }
        Ok(())
    }
}

/// Allocates `<root>/<config-stem>-<mode>-NNN`, never reusing a directory.
fn allocate_run_dir(config: &ExperimentConfig, mode: &Mode, opts: &RunOptions) -> Result<PathBuf, DriverError> {
    let root = opts
        .out
        .clone()
        .or_else(|| config.raw.output.dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os("DEGENLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&root)
        .map_err(|e| DriverError::Io(root.display().to_string(), e.to_string()))?;
    let stem = config
        .config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    for i in 0..10_000u32 {
        let candidate = root.join(format!("{stem}-{}-{i:03}", mode.token()));
        match std::fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(DriverError::Io(candidate.display().to_string(), e.to_string())),
        }
    }
    Err(DriverError::Io(root.display().to_string(), "no free run directory index".into()))
}

/// One timed solve; stamps the wall time into the report.
fn timed_solve(
    spec: &ProblemSpec,
    init: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport), degenlab_core::Error> {
    let start = Instant::now();
    let (u, mut report) = solve_from(spec, init, tol, max_iter)?;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((u, report))
}

pub fn run(config: &ExperimentConfig, mode: Mode, opts: &RunOptions) -> Result<RunOutcome, DriverError> {
    let mut config = config.clone();
    if let Some(seed) = opts.seed {
        config.raw.solver.seed = seed;
    }
    let dir = allocate_run_dir(&config, &mode, opts)?;
    let started = unix_now();
    let mut state = RunState {
        dir: dir.clone(),
        stages: Vec::new(),
        reports: Vec::new(),
        strict: opts.strict,
    };

    let result = match &mode {
        Mode::Solve => run_solve(&config, &mut state),
        Mode::Sweep => run_sweep(&config, &mut state),
        Mode::Verify { solution } => run_verify(&config, solution, &mut state),
        Mode::LabTroisi => run_lab(&config, &mut state),
    };
    // strict aborts still leave a manifest behind
    let strict_error = match result {
        Ok(()) => None,
        Err(e) => Some(e),
    };

    if !state.reports.is_empty() {
        write_estimates_json(&dir.join("estimates.json"), &state.reports)?;
        write_estimates_csv(&dir.join("estimates.csv"), &state.reports)?;
    }

    let manifest = RunManifest {
        config_path: config.config_path.display().to_string(),
        config_text: config.raw_text.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: mode.token().to_string(),
        seed: config.raw.solver.seed,
        threads: opts.threads,
        started_unix: started,
        finished_unix: unix_now(),
        stages: state.stages.clone(),
    };
    manifest.write(&dir)?;

    if let Some(e) = strict_error {
        return Err(e);
    }
    let failed_checks = state.reports.iter().filter(|r| !r.pass).count();
    let stage_errors =
        state.stages.iter().filter(|s| s.status.starts_with("error")).count();
    Ok(RunOutcome { dir, failed_checks, stage_errors, reports: state.reports })
}

fn run_solve(config: &ExperimentConfig, state: &mut RunState) -> Result<(), DriverError> {
    let spec = config.problem()?;
    let sb = &config.raw.solver;
    let init = match harmonic_extension(config.grid_ref(), &config.boundary) {
        Ok(u) => u,
        Err(e) => {
            state.fail("initial_guess", &e)?;
            return Ok(());
        }
    };
    match timed_solve(&spec, &init, sb.tol, sb.max_iter) {
        Ok((u, report)) => {
            if config.raw.output.emit_solutions {
                write_grid_function(&state.dir.join("solution.csv"), &u)?;
            }
            write_solve_reports(&state.dir.join("solve_reports.csv"), &[report.clone()])?;
            write_timings(&state.dir.join("timings.txt"), &[report])?;
            state.ok("solve");
        }
        Err(e) => state.fail("solve", &e)?,
    }
    Ok(())
}

fn run_sweep(config: &ExperimentConfig, state: &mut RunState) -> Result<(), DriverError> {
    let sb = config.raw.solver.clone();
    let (solutions, reports) = match sweep_path(config, &sb.eps_schedule, state, "continuation")? {
        Some(pair) => pair,
        None => return Ok(()),
    };

    // per-eps diagnostics and plot data
    write_solve_reports(&state.dir.join("solve_reports.csv"), &reports)?;
    write_timings(&state.dir.join("timings.txt"), &reports)?;
    if config.raw.output.emit_plot_data {
        let p = config.exponents.p();
        let rows: Vec<Vec<f64>> = solutions
            .iter()
            .zip(&reports)
            .map(|(u, r)| {
                vec![r.eps, r.final_energy, gradient_p_integral(u, p), r.el_residual]
            })
            .collect();
        write_plot_csv(
            &state.dir.join("energy_vs_eps.csv"),
            "eps (dimensionless),final_energy (dimensionless),gradient_p_integral (dimensionless),el_residual (dimensionless)",
            &rows,
        )?;
        let mut dist_rows = Vec::new();
        for (k, w) in solutions.windows(2).enumerate() {
            let diff = w[0].zip_map(&w[1], |a, b| a - b).map_err(DriverError::Core)?;
            let d = lp_norm(&diff, p).map_err(DriverError::Core)?;
            dist_rows.push(vec![sb.eps_schedule[k], sb.eps_schedule[k + 1], d]);
        }
        write_plot_csv(
            &state.dir.join("lp_distance.csv"),
            "eps_from (dimensionless),eps_to (dimensionless),lp_distance (dimensionless)",
            &dist_rows,
        )?;
    }
    if config.raw.output.emit_solutions {
        for (k, u) in solutions.iter().enumerate() {
            write_grid_function(&state.dir.join(format!("solution_{k:02}.csv")), u)?;
        }
    }

    // uniform energy audit over the schedule
    let variation_tol =
        config.raw.verify.as_ref().map(|v| v.variation_tol).unwrap_or(0.05);
    match harmonic_extension(config.grid_ref(), &config.boundary) {
        Ok(competitor) => match energy_bound_audit(
            &config.exponents,
            &competitor,
            &config.source,
            &solutions,
            variation_tol,
        ) {
            Ok(rep) => {
                state.reports.push(rep);
                state.ok("energy_bound");
            }
            Err(e) => state.fail("energy_bound", &e)?,
        },
        Err(e) => state.fail("energy_bound", &e)?,
    }

    // optional second continuation path and the propagation comparison
    if let Some(dual) = sb.dual_schedule.clone() {
        if let Some((dual_solutions, _)) = sweep_path(config, &dual, state, "dual_continuation")? {
            let a = solutions.last().unwrap();
            let b = dual_solutions.last().unwrap();
            let tol_h = propagation_slack(config, a, b)?;
            match propagation_check(&config.exponents, a, b, tol_h) {
                Ok(reps) => {
                    state.reports.extend(reps);
                    state.ok("propagation");
                }
                Err(e) => state.fail("propagation", &e)?,
            }
        }
    }

    // estimate checks on every iterate; ladder plot data for the final one
    if config.raw.verify.is_some() {
        let mut constant_rows = Vec::new();
        for (k, (u, report)) in solutions.iter().zip(&reports).enumerate() {
            let last = k + 1 == solutions.len();
            let reps = run_estimate_checks(config, u, report.eps, state, last)?;
            if config.raw.output.emit_plot_data {
                let mut row = vec![report.eps];
                row.extend(representative_ratios(config, &reps));
                constant_rows.push(row);
            }
            state.reports.extend(reps);
        }
        if config.raw.output.emit_plot_data {
            let header = constants_header(config);
            write_plot_csv(&state.dir.join("constants_vs_eps.csv"), &header, &constant_rows)?;
        }
    } else {
        state.skip("estimates", "no verify block in the configuration");
    }
    Ok(())
}

/// Warm-started continuation along one schedule with per-solve timing.
fn sweep_path(
    config: &ExperimentConfig,
    schedule: &[f64],
    state: &mut RunState,
    stage: &str,
) -> Result<Option<(Vec<GridFunction>, Vec<SolveReport>)>, DriverError> {
    let sb = &config.raw.solver;
    let mut current = match harmonic_extension(config.grid_ref(), &config.boundary) {
        Ok(u) => u,
        Err(e) => {
            state.fail(stage, &e)?;
            return Ok(None);
        }
    };
    let mut solutions = Vec::with_capacity(schedule.len());
    let mut reports = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let spec = match config.problem_at(eps) {
            Ok(s) => s,
            Err(e) => {
                state.fail(stage, &e)?;
                return Ok(None);
            }
        };
        match timed_solve(&spec, &current, sb.tol, sb.max_iter) {
            Ok((u, report)) => {
                current = u.clone();
                solutions.push(u);
                reports.push(report);
            }
            Err(e) => {
                state.fail(stage, &e)?;
                return Ok(None);
            }
        }
    }
    state.ok(stage);
    Ok(Some((solutions, reports)))
}

fn propagation_slack(
    config: &ExperimentConfig,
    a: &GridFunction,
    b: &GridFunction,
) -> Result<f64, DriverError> {
    let factor = config.raw.verify.as_ref().map(|v| v.tol_h_factor).unwrap_or(4.0);
    let h = config.grid_ref().max_spacing();
    let mut grad_sup = 0.0f64;
    for axis in 0..config.grid_ref().dim() {
        grad_sup = grad_sup.max(partial(a, axis).map_err(DriverError::Core)?.max_abs());
        grad_sup = grad_sup.max(partial(b, axis).map_err(DriverError::Core)?.max_abs());
    }
    Ok(factor * h * (1.0 + grad_sup))
}

fn run_verify(
    config: &ExperimentConfig,
    solution: &Path,
    state: &mut RunState,
) -> Result<(), DriverError> {
    if config.raw.verify.is_none() {
        state.skip("estimates", "no verify block in the configuration");
        return Ok(());
    }
    let u = read_grid_function(solution)?;
    if u.grid() != config.grid_ref() {
        state.fail(
            "load_solution",
            &"solution file grid does not match the configuration grid",
        )?;
        return Ok(());
    }
    let eps = *config.raw.solver.eps_schedule.last().unwrap();
    let reps = run_estimate_checks(config, &u, eps, state, true)?;
    state.reports.extend(reps);
    Ok(())
}

/// Runs the selected estimate checks on one field. When `emit_aux` is set the
/// auxiliary plot files (ladder rungs) are written.
fn run_estimate_checks(
    config: &ExperimentConfig,
    u: &GridFunction,
    eps: f64,
    state: &mut RunState,
    emit_aux: bool,
) -> Result<Vec<EstimateReport>, DriverError> {
    let v = config.raw.verify.as_ref().expect("caller checked the verify block");
    let exp = &config.exponents;
    let f = &config.source;
    let triple = match config.ball_triple()? {
        Some(t) => t,
        None => unreachable!("verify block implies a ball triple"),
    };
    let mut reports = Vec::new();
    for check in &v.checks {
        match check.as_str() {
            "sobolev" => {
                match sobolev_estimate_check(
                    exp,
                    u,
                    f,
                    &triple.center,
                    triple.middle,
                    triple.outer,
                    v.ratio_ceiling,
                ) {
                    Ok(rep) => reports.push(tag_eps(rep, eps)),
                    Err(e) => state.fail("verify:sobolev", &e)?,
                }
            }
            "caccioppoli" => {
                for axis in 0..exp.dim() {
                    for &s in &v.s_grid {
                        match caccioppoli_power_check(
                            exp,
                            eps,
                            u,
                            f,
                            s,
                            &triple.center,
                            triple.inner,
                            triple.middle,
                            axis,
                            v.ratio_ceiling,
                        ) {
                            Ok(rep) => reports.push(tag_eps(rep, eps)),
                            Err(e) => state.fail("verify:caccioppoli", &e)?,
                        }
                    }
                }
            }
            "diagonal" => {
                for axis in 0..exp.dim() {
                    for &s in &v.s_grid {
                        match diagonal_caccioppoli_check(
                            exp,
                            eps,
                            u,
                            f,
                            s,
                            &triple.center,
                            triple.inner,
                            triple.middle,
                            axis,
                            v.ratio_ceiling,
                        ) {
                            Ok(rep) => reports.push(tag_eps(rep, eps)),
                            Err(e) => state.fail("verify:diagonal", &e)?,
                        }
                    }
                }
            }
            "ladder" => {
                for axis in 0..exp.dim().min(2) {
                    match moser_ladder(
                        exp,
                        u,
                        f,
                        axis,
                        &triple.center,
                        triple.inner,
                        triple.middle,
                        v.ladder_levels,
                    ) {
                        Ok(ladder) => {
                            if emit_aux && config.raw.output.emit_plot_data {
                                emit_ladder(state, axis, &ladder)?;
                            }
                            reports.push(tag_eps(ladder_summary(axis, &ladder, v), eps));
                        }
                        Err(e) => state.fail("verify:ladder", &e)?,
                    }
                }
            }
            "lipschitz" => {
                for axis in 0..exp.dim() {
                    match lipschitz_estimate_check(exp, u, f, &triple, axis, v.ratio_ceiling) {
                        Ok(rep) => reports.push(tag_eps(rep, eps)),
                        Err(e) => state.fail("verify:lipschitz", &e)?,
                    }
                }
            }
            "bernstein" => {
                let lambda = if v.lambda > 0.0 {
                    v.lambda
                } else {
                    match default_bernstein_lambda(exp, f) {
                        Ok(l) => l,
                        Err(e) => {
                            state.fail("verify:bernstein", &e)?;
                            continue;
                        }
                    }
                };
                let tol_max = default_bernstein_tolerance(f, lambda);
                match bernstein_max_principle_check(
                    exp,
                    eps,
                    u,
                    f,
                    &triple.center,
                    triple.inner,
                    triple.middle,
                    lambda,
                    tol_max,
                ) {
                    Ok(rep) => reports.push(tag_eps(rep, eps)),
                    Err(e) => state.fail("verify:bernstein", &e)?,
                }
            }
            other => state.skip("verify", &format!("unknown check '{other}'")),
        }
    }
    Ok(reports)
}

fn tag_eps(mut rep: EstimateReport, eps: f64) -> EstimateReport {
    rep.params = format!("eps={} {}", fmt_f64(eps), rep.params);
    rep
}

/// Ladder health condensed to one record: the spread of the fitted constants
/// across rungs against the configured ceiling.
fn ladder_summary(axis: usize, ladder: &MoserLadder, v: &VerifyBlock) -> EstimateReport {
    let max = ladder.levels.iter().map(|l| l.fitted_c).fold(0.0f64, f64::max);
    let min = ladder.levels.iter().map(|l| l.fitted_c).fold(f64::INFINITY, f64::min);
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    EstimateReport {
        name: format!("moser_ladder_axis{axis}"),
        lhs: max,
        rhs_core: min,
        ratio: spread,
        params: format!(
            "levels={} coefficient={} spread_max={}",
            ladder.levels.len(),
            fmt_f64(ladder.coefficient),
            fmt_f64(v.ladder_spread_max)
        ),
        pass: spread <= v.ladder_spread_max,
    }
}

fn emit_ladder(state: &mut RunState, axis: usize, ladder: &MoserLadder) -> Result<(), DriverError> {
    let rows: Vec<Vec<f64>> = ladder
        .levels
        .iter()
        .map(|l| {
            vec![l.level as f64, l.theta, l.radius, l.norm_low, l.norm_high, l.fitted_c]
        })
        .collect();
    write_plot_csv(
        &state.dir.join(format!("ladder_axis{axis}.csv")),
        "k (level),theta (exponent),r (length),norm_low (dimensionless),norm_high (dimensionless),fitted_C (dimensionless)",
        &rows,
    )
}

/// Representative single ratio per selected check family, used for the
/// constants-vs-eps plot.
fn representative_ratios(config: &ExperimentConfig, reps: &[EstimateReport]) -> Vec<f64> {
    let v = config.raw.verify.as_ref().unwrap();
    let mut out = Vec::new();
    for check in &v.checks {
        let prefix = match check.as_str() {
            "sobolev" => "sobolev_weight",
            "caccioppoli" => "caccioppoli_power",
            "diagonal" => "caccioppoli_diagonal",
            "ladder" => "moser_ladder_axis0",
            "lipschitz" => "lipschitz_component",
            "bernstein" => "bernstein_max_principle",
            _ => continue,
        };
        let ratio = reps
            .iter()
            .find(|r| r.name.starts_with(prefix))
            .map(|r| r.ratio)
            .unwrap_or(f64::NAN);
        out.push(ratio);
    }
    out
}

fn constants_header(config: &ExperimentConfig) -> String {
    let v = config.raw.verify.as_ref().unwrap();
    let mut header = String::from("eps (dimensionless)");
    for check in &v.checks {
        header.push_str(&format!(",{check}_ratio (dimensionless)"));
    }
    header
}

fn run_lab(config: &ExperimentConfig, state: &mut RunState) -> Result<(), DriverError> {
    let lab = match &config.raw.lab {
        Some(l) => l.clone(),
        None => {
            state.skip("lab", "no lab block in the configuration");
            return Ok(());
        }
    };
    let grid = match degenlab_core::grid::Grid::unit(2, lab.resolution) {
        Ok(g) => g,
        Err(e) => {
            state.fail("lab", &e)?;
            return Ok(());
        }
    };
    let master = config.raw.solver.seed;
    let mut rows = String::from("seed,q,lhs,rhs,ratio,pass\n");
    let mut violations = 0usize;
    for k in 0..lab.fields as u64 {
        let seed = master.wrapping_add(k.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let field = match random_compact_field(&grid, seed, lab.max_bumps, 3) {
            Ok(f) => f,
            Err(e) => {
                state.fail("lab", &e)?;
                return Ok(());
            }
        };
        for &q in &lab.q_values {
            match troisi_check(&field, q, lab.tol_troisi) {
                Ok(rep) => {
                    if !rep.pass {
                        violations += 1;
                    }
                    rows.push_str(&format!(
                        "{seed},{},{},{},{},{}\n",
                        fmt_f64(q),
                        fmt_f64(rep.lhs),
                        fmt_f64(rep.rhs_core),
                        fmt_f64(rep.ratio),
                        rep.pass
                    ));
                    state.reports.push(rep);
                }
                Err(e) => state.fail("lab", &e)?,
            }
        }
    }
    std::fs::write(state.dir.join("troisi.csv"), rows)
        .map_err(|e| DriverError::Io("troisi.csv".into(), e.to_string()))?;
    if violations == 0 {
        state.ok("lab");
    } else {
        state.fail("lab", &format!("{violations} inequality violations"))?;
    }
    Ok(())
}

/// Prints a human summary of a finished run directory; returns the number of
/// failed checks recorded there.
pub fn report(run_dir: &Path) -> Result<usize, DriverError> {
    let manifest_text = std::fs::read_to_string(run_dir.join("manifest.json"))
        .map_err(|e| DriverError::Io(run_dir.display().to_string(), e.to_string()))?;
    let manifest: serde_json::Value = serde_json::from_str(&manifest_text)
        .map_err(|e| DriverError::Format("manifest.json".into(), e.to_string()))?;
    println!(
        "run: mode={} seed={} version={}",
        manifest["mode"].as_str().unwrap_or("?"),
        manifest["seed"],
        manifest["artifact_version"].as_str().unwrap_or("?")
    );
    for stage in manifest["stages"].as_array().into_iter().flatten() {
        println!(
            "stage {}: {}",
            stage["name"].as_str().unwrap_or("?"),
            stage["status"].as_str().unwrap_or("?")
        );
    }
    let mut failed = 0usize;
    let estimates_path = run_dir.join("estimates.csv");
    if estimates_path.exists() {
        let estimates = std::fs::read_to_string(&estimates_path)
            .map_err(|e| DriverError::Io("estimates.csv".into(), e.to_string()))?;
        for line in estimates.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() == 5 {
                let pass = cols[4] == "true";
                if !pass {
                    failed += 1;
                }
                println!(
                    "check {}: {} (ratio {})",
                    cols[0],
                    if pass { "pass" } else { "FAIL" },
                    cols[3]
                );
            }
        }
    } else {
        println!("no estimate records in this run");
    }
    println!("failed checks: {failed}");
    Ok(failed)
}
