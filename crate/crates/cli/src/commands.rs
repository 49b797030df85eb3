//! Subcommands and exit-code policy.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use owc_core::coupling::{wall_traces, CompatibilityReport};
use owc_core::diagnostics::{convergence_study, ode_scaling_test, write_columns};
use owc_core::model::{BoundaryState, FieldState, InitialDataReport};
use owc_core::solver::{picard_solve, preflight, run_with_dump, PicardMode, Problem};
use owc_core::swe::{
    boundary_dissipativity, boundary_matrix, friedrichs_symmetrizer_4, kreiss_symmetrizer,
    symmetrizer, EigenScaling, SystemMatrices,
};
use owc_core::Error;
use rayon::prelude::*;

use crate::config::{resolve_key, ConfigErrors, RunConfig};
use crate::output::{write_dump, write_result, OutputDir};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_REFUSED: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

/// Upper bound accepted for `‖L⁻¹‖`, i.e. `1/κ₀` with `κ₀ = 0.4`.
pub const MAX_L_INV_NORM: f64 = 2.5;

/// Maps a simulator failure onto the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
        e if e.is_runtime() => EXIT_ASSUMPTION,
        _ => EXIT_REFUSED,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "owc",
    version,
    about = "Oscillating water column shallow-water simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "owc_out")]
    pub out: PathBuf,

    /// Run even if the admissibility checks fail.
    #[arg(long, global = true)]
    pub force: bool,

    /// Only report failures.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parameter, initial-data, compatibility and boundary-structure checks.
    Check,
    /// Integrate to t_end.
    Simulate,
    /// Solve by Picard iteration on a fixed time grid.
    Picard,
    /// Observed order from runs at several refinements.
    Converge {
        /// Refinement factors relative to the configured grid.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        factors: Vec<usize>,
    },
    /// Short-time scaling of the boundary ODE with the initial wall traces held fixed.
    OdeScaling {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.025,0.0125")]
        t_list: Vec<f64>,
        /// RK4 steps per horizon.
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
    },
    /// Simulate once per value, in parallel: `key=v1,v2,...`.
    Sweep { spec: String },
}

/// Parses `argv` (program name first) and runs; returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let Some(path) = cli.config.clone() else {
        eprintln!("error: --config is required");
        return EXIT_USAGE;
    };
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    let text = String::from_utf8_lossy(&bytes).into_owned();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let cfg = match RunConfig::parse(&text, &base) {
        Ok(c) => c,
        Err(e) => return refuse_config(&e),
    };
    let ctx = Context {
        cli: &cli,
        path: &path,
        bytes: &bytes,
    };
    match &cli.command {
        Command::Check => check(&ctx, &cfg),
        Command::Simulate => simulate(&ctx, &cfg, &cli.out),
        Command::Picard => picard(&ctx, &cfg),
        Command::Converge { factors } => converge(&ctx, &cfg, factors),
        Command::OdeScaling { t_list, steps } => ode_scaling(&ctx, &cfg, t_list, *steps),
        Command::Sweep { spec } => sweep(&ctx, &text, &base, spec),
    }
}

struct Context<'a> {
    cli: &'a Cli,
    path: &'a Path,
    bytes: &'a [u8],
}

impl Context<'_> {
    fn say(&self, line: impl AsRef<str>) {
        if !self.cli.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn finish(&self, out: OutputDir, command: &str) -> i32 {
        match out.finish(Some(self.path), self.bytes, command) {
            Ok(m) => {
                self.say(format!("manifest: {}", m.display()));
                EXIT_OK
            }
            Err(e) => io_failure(&e),
        }
    }
}

fn refuse_config(e: &ConfigErrors) -> i32 {
    for line in e.to_string().lines() {
        eprintln!("config error: {line}");
    }
    EXIT_REFUSED
}

fn io_failure(e: &std::io::Error) -> i32 {
    eprintln!("error: {e}");
    EXIT_IO
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

type Setup = (Problem<f64>, FieldState<f64>, BoundaryState<f64>);

/// Problem, initial data and `G₀` of a configuration.
fn setup(cfg: &RunConfig) -> Result<Setup, i32> {
    let problem = cfg.problem().map_err(|e| fail(&e))?;
    let field = cfg
        .initial_field(&problem.layout)
        .map_err(|e| refuse_config(&e))?;
    Ok((problem, field, cfg.initial_g()))
}

fn initial_line(r: &InitialDataReport<f64>) -> String {
    format!(
        "initial data: min h = {} at {}[{}] (>= {}), min g h - q^2/h^2 = {} at {}[{}] (>= {}), {}",
        r.c_0,
        r.c_0_at.0.as_str(),
        r.c_0_at.1,
        r.thresholds.c_0,
        r.c_1,
        r.c_1_at.0.as_str(),
        r.c_1_at.1,
        r.thresholds.c_1,
        pass(r.passed())
    )
}

fn compat_line(r: &CompatibilityReport<f64>) -> String {
    format!(
        "compatibility: r0 = ({}, {}), |r1| = {}, tol = {}, {}",
        r.r0[0],
        r.r0[1],
        r.r1_norm().map_or("n/a".into(), |v| v.to_string()),
        r.tol,
        pass(r.passed())
    )
}

/// Runs the admissibility gate; prints the report unless quiet.
fn gate(
    ctx: &Context,
    cfg: &RunConfig,
    problem: &Problem<f64>,
    field: &FieldState<f64>,
    g0: &BoundaryState<f64>,
) -> Result<(), i32> {
    let pre =
        preflight(problem, field, g0, cfg.thresholds(), cfg.compat_tol).map_err(|e| fail(&e))?;
    if pre.passed() {
        return Ok(());
    }
    eprintln!("params: {}", pre.params.to_string().trim_end());
    eprintln!("{}", initial_line(&pre.initial));
    eprintln!("{}", compat_line(&pre.compatibility));
    if ctx.cli.force {
        eprintln!("warning: admissibility checks failed; continuing because of --force");
        Ok(())
    } else {
        eprintln!("refusing to start (use --force to override)");
        Err(EXIT_REFUSED)
    }
}

/// The `check` report as lines, and whether everything passed.
pub fn check_report(cfg: &RunConfig) -> Result<(Vec<String>, bool), i32> {
    let (problem, field, g0) = setup(cfg)?;
    let p = &problem.params;
    let mut lines = Vec::new();
    let mut ok = true;

    let pre =
        preflight(&problem, &field, &g0, cfg.thresholds(), cfg.compat_tol).map_err(|e| fail(&e))?;
    lines.push(format!("params: {}", pre.params.to_string().trim_end()));
    lines.push(format!(
        "derived: s = {}, h_w = {}, alpha = {}, gamma_1 = {}, gamma_2 = {}, chamber_len = {}",
        p.step_size(),
        p.h_w(),
        p.alpha(),
        p.gamma_1(),
        p.gamma_2(),
        p.chamber_len()
    ));
    lines.push(initial_line(&pre.initial));
    lines.push(compat_line(&pre.compatibility));
    ok &= pre.passed();

    let tr = match wall_traces(&problem.layout, &field) {
        Ok(t) => t,
        Err(e) => return Err(fail(&e)),
    };
    let (l, r) = (tr.left, tr.right);
    match SystemMatrices::at(&l, &r, p.g) {
        Ok(sm) => {
            let det = sm.l.det();
            let good = det.abs() >= 1e-12 && sm.l_inv_norm <= MAX_L_INV_NORM;
            lines.push(format!(
                "L = [[{},{}],[{},{}]], det={}, {}",
                sm.l.0[0][0],
                sm.l.0[0][1],
                sm.l.0[1][0],
                sm.l.0[1][1],
                det,
                pass(good)
            ));
            lines.push(format!(
                "|L^-1| = {} (bound {MAX_L_INV_NORM}), scaling {:?}",
                sm.l_inv_norm,
                EigenScaling::SecondComponentOne
            ));
            ok &= good;
        }
        Err(e) => {
            lines.push(format!("L: {e}, FAIL"));
            ok = false;
        }
    }
    for (side, u) in [("left wall", &l), ("right wall", &r)] {
        match (symmetrizer(u, p.g), owc_core::swe::jacobian(u, p.g)) {
            (Ok(s), Ok(a)) => {
                let sa = s * a;
                let asym = sa.asymmetry();
                let good = s.0[0][0] > 0.0
                    && s.det() > 0.0
                    && asym <= 1e-12 * s.frobenius() * a.frobenius();
                lines.push(format!(
                    "symmetrizer at {side}: det S = {}, |SA - (SA)^T| = {asym:e}, {}",
                    s.det(),
                    pass(good)
                ));
                ok &= good;
            }
            (Err(e), _) | (_, Err(e)) => {
                lines.push(format!("symmetrizer at {side}: {e}, FAIL"));
                ok = false;
            }
        }
    }
    let m = boundary_matrix::<f64>();
    let a4 = owc_core::swe::system_matrix_4(&l, &r, p.g);
    match (kreiss_symmetrizer(&l, &r, p.g), a4.as_ref()) {
        (Ok(s4), Ok(a4)) => match boundary_dissipativity(&s4, a4, &m) {
            Ok(d) => lines.push(format!(
                "boundary dissipativity (Kreiss symmetrizer): c_2 = {}, C_2 = {}, PASS",
                d.c_2, d.big_c_2
            )),
            Err(e) => {
                lines.push(format!(
                    "boundary dissipativity (Kreiss symmetrizer): {e}, FAIL"
                ));
                ok = false;
            }
        },
        (Err(e), _) => {
            lines.push(format!("boundary dissipativity: {e}, FAIL"));
            ok = false;
        }
        (_, Err(e)) => {
            lines.push(format!("boundary dissipativity: {e}, FAIL"));
            ok = false;
        }
    }
    if let (Ok(s4), Ok(a4)) = (friedrichs_symmetrizer_4(&l, &r, p.g), &a4) {
        let note = match boundary_dissipativity(&s4, a4, &m) {
            Ok(d) => format!("c_2 = {}, C_2 = {}", d.c_2, d.big_c_2),
            Err(e) => e.to_string(),
        };
        lines.push(format!(
            "block-diagonal Friedrichs symmetrizer (informational): {note}"
        ));
    }
    lines.push(format!("overall: {}", pass(ok)));
    Ok((lines, ok))
}

fn check(ctx: &Context, cfg: &RunConfig) -> i32 {
    match check_report(cfg) {
        Ok((lines, ok)) => {
            for l in &lines {
                if ok {
                    ctx.say(l);
                } else {
                    println!("{l}");
                }
            }
            if ok {
                EXIT_OK
            } else {
                EXIT_REFUSED
            }
        }
        Err(code) => code,
    }
}

fn simulate(ctx: &Context, cfg: &RunConfig, out_dir: &Path) -> i32 {
    let (problem, field, g0) = match setup(cfg) {
        Ok(s) => s,
        Err(c) => return c,
    };
    if let Err(c) = gate(ctx, cfg, &problem, &field, &g0) {
        return c;
    }
    let mut out = match OutputDir::create(out_dir) {
        Ok(o) => o,
        Err(e) => return io_failure(&e),
    };
    match run_with_dump(&problem, &field, &g0, &cfg.solver) {
        Ok(res) => match write_result(&mut out, &problem, &res) {
            Ok(summary) => {
                for l in summary.lines() {
                    ctx.say(l);
                }
                ctx.finish(out, "simulate")
            }
            Err(e) => io_failure(&e),
        },
        Err(aborted) => {
            let code = fail(&aborted.error);
            if let Err(e) = write_dump(
                &mut out,
                &problem.layout,
                &aborted.field,
                &aborted.g,
                &aborted.error.to_string(),
            ) {
                return io_failure(&e);
            }
            eprintln!(
                "last accepted state written to {}",
                out.root().join("dump").display()
            );
            let _ = out.finish(Some(ctx.path), ctx.bytes, "simulate (aborted)");
            code
        }
    }
}

/// Iteration controls used when the configuration leaves `picard = off`.
pub const DEFAULT_PICARD: PicardMode<f64> = PicardMode::On {
    max_iter: 50,
    tol: 1e-10,
};

fn picard(ctx: &Context, cfg: &RunConfig) -> i32 {
    let (problem, field, g0) = match setup(cfg) {
        Ok(s) => s,
        Err(c) => return c,
    };
    if let Err(c) = gate(ctx, cfg, &problem, &field, &g0) {
        return c;
    }
    let mut solver = cfg.solver;
    if solver.picard == PicardMode::Off {
        solver.picard = DEFAULT_PICARD;
    }
    let mut out = match OutputDir::create(&ctx.cli.out) {
        Ok(o) => o,
        Err(e) => return io_failure(&e),
    };
    match picard_solve(&problem, &field, &g0, &solver) {
        Ok(o) => {
            let it: Vec<f64> = (1..=o.differences.len()).map(|k| k as f64).collect();
            let mut ratios = vec![f64::NAN];
            ratios.extend(&o.ratios);
            let r = out
                .columns(
                    "diagnostics/picard.csv",
                    &["iteration", "difference", "ratio"],
                    &[&it, &o.differences, &ratios],
                )
                .and_then(|_| write_result(&mut out, &problem, &o.result));
            if let Err(e) = r {
                return io_failure(&e);
            }
            ctx.say(format!(
                "converged in {} iterations, dt = {}",
                o.iterations, o.dt
            ));
            ctx.say(format!("differences: {:?}", o.differences));
            ctx.say(format!("ratios: {:?}", o.ratios));
            ctx.finish(out, "picard")
        }
        Err(e) => {
            if let Error::NoConvergence { ratios, .. } = &e {
                let it: Vec<f64> = (2..ratios.len() + 2).map(|k| k as f64).collect();
                if let Err(io) = out.columns(
                    "diagnostics/picard_ratios.csv",
                    &["iteration", "ratio"],
                    &[&it, ratios],
                ) {
                    return io_failure(&io);
                }
                let _ = out.finish(Some(ctx.path), ctx.bytes, "picard (no convergence)");
            }
            fail(&e)
        }
    }
}

fn converge(ctx: &Context, cfg: &RunConfig, factors: &[usize]) -> i32 {
    if factors.len() < 3 || factors.windows(2).any(|w| w[1] <= w[0] || w[1] % w[0] != 0) {
        eprintln!(
            "error: --factors needs at least three increasing values, each dividing the next"
        );
        return EXIT_USAGE;
    }
    let problem = match cfg.problem() {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    let Some(initial) = cfg.profile_fn() else {
        eprintln!("error: converge needs an analytic initial profile (rest or gaussian)");
        return EXIT_REFUSED;
    };
    let field = FieldState::from_fn(&problem.layout, &initial);
    if let Err(c) = gate(ctx, cfg, &problem, &field, &cfg.initial_g()) {
        return c;
    }
    match convergence_study(&problem, &cfg.solver, factors, initial, cfg.initial_g()) {
        Ok(rep) => {
            let mut out = match OutputDir::create(&ctx.cli.out) {
                Ok(o) => o,
                Err(e) => return io_failure(&e),
            };
            let n = rep.errors.len();
            let f: Vec<f64> = rep.factors[..n].iter().map(|&x| x as f64).collect();
            let cells: Vec<f64> = rep.cells[..n].iter().map(|&x| x as f64).collect();
            if let Err(e) = out.columns(
                "diagnostics/convergence.csv",
                &["factor", "cells", "error_vs_finest", "difference_to_next"],
                &[&f, &cells, &rep.errors, &rep.differences],
            ) {
                return io_failure(&e);
            }
            ctx.say(format!("scheme = {}", cfg.solver.scheme.as_str()));
            for k in 0..n {
                ctx.say(format!(
                    "cells {:>7}  error {:.6e}  difference {:.6e}",
                    rep.cells[k], rep.errors[k], rep.differences[k]
                ));
            }
            ctx.say(format!("observed order = {:.4}", rep.observed_order));
            if !rep.monotone {
                eprintln!("warning: errors are not monotone under refinement");
            }
            ctx.finish(out, "converge")
        }
        Err(e) => fail(&e),
    }
}

fn ode_scaling(ctx: &Context, cfg: &RunConfig, t_list: &[f64], steps: usize) -> i32 {
    if t_list.len() < 3 || t_list.windows(2).any(|w| w[1] >= w[0]) || t_list[0] >= 1.0 || steps == 0
    {
        eprintln!("error: --t-list needs at least three strictly decreasing horizons below 1");
        return EXIT_USAGE;
    }
    let (problem, field, g0) = match setup(cfg) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let tr = match wall_traces(&problem.layout, &field) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let rep = match ode_scaling_test(
        &problem.params,
        |_| (tr.left, tr.right),
        g0,
        t_list,
        steps,
        true,
    ) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let mut out = match OutputDir::create(&ctx.cli.out) {
        Ok(o) => o,
        Err(e) => return io_failure(&e),
    };
    if let Err(e) = out.columns(
        "diagnostics/ode_scaling.csv",
        &["T", "h1_norm"],
        &[&rep.t, &rep.norms],
    ) {
        return io_failure(&e);
    }
    ctx.say(format!(
        "fitted exponent = {:.4} (>= {}), constant = {:.6e}, fit residual = {:.3e}",
        rep.exponent,
        owc_core::diagnostics::MIN_SCALING_EXPONENT,
        rep.constant,
        rep.fit_residual
    ));
    if let Some(err) = rep.analytic_error {
        ctx.say(format!(
            "relative error against the closed-form solution = {err:.3e}"
        ));
    }
    ctx.say(pass(rep.passed));
    let code = ctx.finish(out, "ode-scaling");
    if code != EXIT_OK {
        code
    } else if rep.passed {
        EXIT_OK
    } else {
        EXIT_REFUSED
    }
}

fn sweep(ctx: &Context, text: &str, base: &Path, spec: &str) -> i32 {
    let Some((name, values)) = spec.split_once('=') else {
        eprintln!("error: sweep expects key=v1,v2,...");
        return EXIT_USAGE;
    };
    let Some(id) = resolve_key(name.trim()) else {
        eprintln!("error: unknown or ambiguous key `{name}` (use section.key)");
        return EXIT_USAGE;
    };
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        eprintln!("error: sweep needs at least one value");
        return EXIT_USAGE;
    }
    let codes: Vec<(String, i32)> = values
        .par_iter()
        .map(|v| {
            let dir = ctx
                .cli
                .out
                .join(format!("{}={}", id.1, v.replace(['/', ' '], "_")));
            let code = match RunConfig::parse_with(text, base, &[(id, v.clone())]) {
                Ok(cfg) => {
                    let quiet = Context {
                        cli: &Cli {
                            quiet: true,
                            command: Command::Simulate,
                            config: ctx.cli.config.clone(),
                            out: dir.clone(),
                            force: ctx.cli.force,
                        },
                        path: ctx.path,
                        bytes: ctx.bytes,
                    };
                    simulate(&quiet, &cfg, &dir)
                }
                Err(e) => refuse_config(&e),
            };
            (v.clone(), code)
        })
        .collect();
    for (v, c) in &codes {
        ctx.say(format!("{}.{} = {v}: exit {c}", id.0, id.1));
    }
    codes.iter().map(|(_, c)| *c).max().unwrap_or(EXIT_OK)
}

/// Writes equally long columns to a path; shared by tests and tools.
pub fn write_csv_file(path: &Path, headers: &[&str], columns: &[&[f64]]) -> std::io::Result<()> {
    let f = fs::File::create(path)?;
    write_columns(std::io::BufWriter::new(f), headers, columns)
}
