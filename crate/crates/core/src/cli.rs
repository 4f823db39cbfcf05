//! `conekit` command line: solve, audit, oracle, compare, transport.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Run, RunConfig};
use crate::diagnostics::{self, emit_summary, RunLedger};
use crate::error::{Error, Result};
use crate::kinetics::audit_assumptions;
use crate::oracle::{compare, restrict, rk4_solve, split_step_transport_oracle, CompareReport};
use crate::solver::{solve, SolveResult, Trajectory};
use crate::space::cone_norm;
use crate::transport::solve_mild;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_AUDIT: i32 = 4;

pub const THREADS_ENV: &str = "CONEKIT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "conekit",
    version,
    about = "Monotone Picard solver for coagulation models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve and write the run ledgers.
    Solve(Common),
    /// Sample the model assumptions and write audit.json.
    Audit(Common),
    /// Integrate with RK4 on a refined grid.
    Oracle(Common),
    /// Solve, run the RK4 oracle, and compare the two.
    Compare(Common),
    /// Solve with advection and compare against split-step RK4.
    Transport(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Audit seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

/// Exit code for a failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidKernel(_) | Error::NoDefault(_) => EXIT_CONFIG,
        Error::AssumptionViolation(_) => EXIT_AUDIT,
        _ => EXIT_SOLVER,
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
    // a pool set up earlier in the process wins
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_USAGE;
    }
    let (cmd, common) = match &cli.command {
        Command::Solve(c) => ("solve", c),
        Command::Audit(c) => ("audit", c),
        Command::Oracle(c) => ("oracle", c),
        Command::Compare(c) => ("compare", c),
        Command::Transport(c) => ("transport", c),
    };
    let run = match load(common) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error [{}]: {e}", e.code());
            return EXIT_CONFIG;
        }
    };
    let dir = run.outputs.directory.clone();
    if let Err(e) = std::fs::create_dir_all(&dir) {
        let _ = writeln!(
            err,
            "error [IO_ERROR]: cannot create {}: {e}",
            dir.display()
        );
        return EXIT_SOLVER;
    }
    let outcome = match cmd {
        "solve" => cmd_solve(&run, &dir),
        "audit" => cmd_audit(&run, &dir),
        "oracle" => cmd_oracle(&run, &dir),
        "compare" => cmd_compare(&run, &dir),
        _ => cmd_transport(&run, &dir),
    };
    match outcome {
        Ok((line, code)) => {
            if !common.quiet {
                let _ = writeln!(out, "{line}");
            }
            if code != EXIT_OK {
                let _ = writeln!(err, "{cmd}: {line}");
            }
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error [{}]: {e}", e.code());
            if let Error::MaxItersExceeded { history, .. } = &e {
                let tail: Vec<String> = history
                    .iter()
                    .rev()
                    .take(5)
                    .map(|v| format!("{v:e}"))
                    .collect();
                let _ = writeln!(err, "last increments (newest first): {}", tail.join(" "));
            }
            exit_code(&e)
        }
    }
}

fn load(common: &Common) -> Result<Run> {
    let (cfg, base) = RunConfig::load(&common.config).map_err(|e| match e {
        Error::Io { .. } | Error::InvalidConfig(_) => e,
        other => Error::InvalidConfig(other.to_string()),
    })?;
    let mut run = cfg.resolve(&base)?;
    if let Some(o) = &common.out {
        run.outputs.directory = o.clone();
    }
    if let Some(s) = common.seed {
        run.audit.seed = s;
    }
    Ok(run)
}

fn write_ledgers(dir: &Path, ledger: &RunLedger) -> Result<()> {
    diagnostics::emit_csv(ledger, &dir.join("ledger.csv"))?;
    diagnostics::emit_sweep_csv(ledger, &dir.join("sweeps.csv"))
}

fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    let grid = traj.grid();
    let rows = traj.states().iter().enumerate().flat_map(|(m, s)| {
        let t = grid.t(m);
        let k = s.sizes();
        s.as_slice().iter().enumerate().map(move |(idx, v)| {
            vec![
                format!("{t:?}"),
                (idx / k).to_string(),
                (idx % k + 1).to_string(),
                format!("{v:?}"),
            ]
        })
    });
    diagnostics::write_csv(
        &dir.join("trajectory.csv"),
        &["t", "cell", "size", "value"],
        rows,
    )
}

fn write_compare(dir: &Path, traj: &Trajectory, report: &CompareReport) -> Result<()> {
    let grid = traj.grid();
    let rows = report
        .per_node
        .iter()
        .enumerate()
        .map(|(m, d)| vec![format!("{:?}", grid.t(m)), format!("{d:?}")]);
    diagnostics::write_csv(&dir.join("compare.csv"), &["t", "distance"], rows)
}

fn finish_solve(run: &Run, dir: &Path, result: &SolveResult) -> Result<RunLedger> {
    let ledger = RunLedger::build(&run.model, result, &run.f0)?;
    write_ledgers(dir, &ledger)?;
    if run.outputs.trajectory {
        write_trajectory(dir, &result.trajectory)?;
    }
    Ok(ledger)
}

fn cmd_solve(run: &Run, dir: &Path) -> Result<(String, i32)> {
    let result = solve(&run.model, &run.f0, run.grid, &run.solver)?;
    let ledger = finish_solve(run, dir, &result)?;
    let summary = emit_summary(&ledger);
    diagnostics::write_text(&dir.join("summary.txt"), &format!("{summary}\n"))?;
    Ok((summary, EXIT_OK))
}

fn cmd_audit(run: &Run, dir: &Path) -> Result<(String, i32)> {
    let report = audit_assumptions(&run.model, run.audit.samples, run.audit.seed);
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    diagnostics::write_text(&dir.join("audit.json"), &format!("{json}\n"))?;
    let failed = report.failed();
    if failed.is_empty() {
        Ok((
            format!(
                "PASS {} checks over {} samples (seed {})",
                report.checks.len(),
                report.samples,
                report.seed
            ),
            EXIT_OK,
        ))
    } else {
        Ok((format!("FAIL {}", failed.join(", ")), EXIT_AUDIT))
    }
}

fn cmd_oracle(run: &Run, dir: &Path) -> Result<(String, i32)> {
    let fine = run.grid.refine(run.oracle.refine)?;
    let o = rk4_solve(&run.model, &run.f0, fine)?;
    let coarse = restrict(&o.trajectory, run.grid)?;
    let rows = coarse.states().iter().enumerate().map(|(m, s)| {
        vec![
            format!("{:?}", run.grid.t(m)),
            format!("{:?}", cone_norm(s)),
            format!("{:?}", diagnostics::mass(s)),
        ]
    });
    diagnostics::write_csv(&dir.join("oracle.csv"), &["t", "N", "mass"], rows)?;
    Ok((
        format!(
            "RK4 {} steps: N(T) = {:?}, clamped {} entries ({:e} total)",
            fine.steps(),
            cone_norm(coarse.last()),
            o.clamped_entries,
            o.clamped_mass
        ),
        EXIT_OK,
    ))
}

fn cmd_compare(run: &Run, dir: &Path) -> Result<(String, i32)> {
    let result = solve(&run.model, &run.f0, run.grid, &run.solver)?;
    let ledger = finish_solve(run, dir, &result)?;
    let o = rk4_solve(&run.model, &run.f0, run.grid.refine(run.oracle.refine)?)?;
    let report = compare(&result.trajectory, &restrict(&o.trajectory, run.grid)?)?;
    write_compare(dir, &result.trajectory, &report)?;
    Ok((
        format!(
            "sup distance {:e}, max excess over oracle {:e}; {}",
            report.sup,
            report.max_excess,
            emit_summary(&ledger)
        ),
        EXIT_OK,
    ))
}

fn cmd_transport(run: &Run, dir: &Path) -> Result<(String, i32)> {
    let Some(transport) = &run.transport else {
        return Err(Error::InvalidConfig(
            "transport needs model.spatial with at least 2 cells".into(),
        ));
    };
    let mild = solve_mild(&run.model, transport, &run.f0, run.grid, &run.solver)?;
    let ledger = finish_solve(run, dir, &mild.result)?;
    let o =
        split_step_transport_oracle(&run.model, transport, &run.f0, run.grid, run.oracle.refine)?;
    let report = compare(&mild.result.trajectory, &o.trajectory)?;
    write_compare(dir, &mild.result.trajectory, &report)?;
    Ok((
        format!(
            "shift {} cells/step, sup distance to split-step {:e}; {}",
            mild.shift,
            report.sup,
            emit_summary(&ledger)
        ),
        EXIT_OK,
    ))
}
