//! Command-line front end: problem ingestion, solver commands, certificate
//! and report emission.
//!
//! Exit codes: 0 ok, 1 input error, 2 solver failure, 3 certification gap,
//! 4 ergodicity diagnostic. All floating-point output carries 17 significant
//! digits so runs are reproducible bit for bit.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ergodicity_lab::error::Error;
use ergodicity_lab::generator::build_generator;
use ergodicity_lab::mather::{format_certificate, format_measure, solve_mather, MatherContext};
use ergodicity_lab::problem::parse_spec;
use ergodicity_lab::vanish::{
    format_schedule_csv, geometric_schedule, run_schedule, selection_check, CSource,
};
use ergodicity_lab::{solve_discounted, EllipticProblem};

const EXIT_INPUT: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_GAP: u8 = 3;
const EXIT_ERGODICITY: u8 = 4;

#[derive(Parser)]
#[command(name = "ergodicity-lab", version, about = "HJB solvers, Mather-measure LPs, and vanishing-discount experiments on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the problem document (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Seed for randomized probes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the discounted problem and dump the value table and policy.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Discount factor (> 0).
        #[arg(long)]
        lambda: f64,
        /// Solver tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Solve the occupation-measure LP, certify against the PDE side.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        /// Discount factor; omit for the ergodic certificate.
        #[arg(long)]
        lambda: Option<f64>,
        /// Root point for the discounted measure.
        #[arg(long, default_value_t = 0)]
        z: usize,
        /// Certificate gap tolerance.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Also dump the LP in plain text.
        #[arg(long, default_value_t = false)]
        dump_lp: bool,
    },
    /// Run a vanishing-discount schedule and the selection checks.
    Vanish {
        #[command(flatten)]
        common: CommonArgs,
        /// Schedule, e.g. geometric:0:13 (lambda_k = 2^-k).
        #[arg(long, default_value = "geometric:0:13")]
        schedule: String,
        /// Cauchy-gap tolerance for declaring convergence.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Source of the exact critical value: lp or howard.
        #[arg(long, default_value = "lp")]
        c_source: String,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::SpecParse(_) | Error::ShapeMismatch(_) => EXIT_INPUT,
        Error::ErgodicityFailure(_) => EXIT_ERGODICITY,
        Error::NonConvergence { .. }
        | Error::NumericalBreakdown { .. }
        | Error::Infeasible(_) => EXIT_SOLVER,
    }
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code_for(err))
}

fn load_problem(path: &Path) -> Result<EllipticProblem, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::SpecParse(format!("{}: {e}", path.display())))?;
    parse_spec(&text)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::InvalidArgument(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Validated thread cap from ERGODICITY_LAB_THREADS; the solvers are
/// single-threaded today, so the cap is honored trivially.
fn thread_cap() -> Result<Option<usize>, Error> {
    match std::env::var("ERGODICITY_LAB_THREADS") {
        Err(_) => Ok(None),
        Ok(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|v| *v >= 1)
            .map(Some)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "ERGODICITY_LAB_THREADS must be a positive integer, got `{raw}`"
                ))
            }),
    }
}

fn cmd_solve(common: &CommonArgs, lambda: f64, tol: f64) -> Result<(), Error> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(
            "lambda must be > 0; for the ergodic problem use `certify` (no --lambda)".into(),
        ));
    }
    let problem = load_problem(&common.spec)?;
    let gen = build_generator(&problem);
    let sol = solve_discounted(&problem, &gen, lambda, tol, None)?;
    let mut dump = String::new();
    {
        use std::fmt::Write;
        writeln!(dump, "# discounted solution").unwrap();
        writeln!(dump, "lambda {lambda:.16e}").unwrap();
        writeln!(dump, "residual {:.16e}", sol.residual).unwrap();
        writeln!(dump, "iterations {}", sol.iterations).unwrap();
        writeln!(dump, "# point value policy").unwrap();
        for (x, v) in sol.v.values().iter().enumerate() {
            writeln!(dump, "{x} {v:.16e} {}", sol.policy[x]).unwrap();
        }
    }
    write_file(&common.out, "solution.txt", &dump)?;
    Ok(())
}

fn cmd_certify(
    common: &CommonArgs,
    lambda: Option<f64>,
    z: usize,
    tol: f64,
    dump_lp: bool,
) -> Result<bool, Error> {
    let problem = load_problem(&common.spec)?;
    let gen = build_generator(&problem);
    let context = match lambda {
        None => MatherContext::Ergodic,
        Some(l) if l > 0.0 => MatherContext::Discounted { z, lambda: l },
        Some(l) => {
            return Err(Error::InvalidArgument(format!("lambda must be > 0, got {l}")))
        }
    };
    if dump_lp {
        let lp = match context {
            MatherContext::Ergodic => ergodicity_lab::build_ergodic_lp(&problem, &gen),
            MatherContext::Discounted { z, lambda } => {
                ergodicity_lab::build_discounted_lp(&problem, &gen, z, lambda)?
            }
        };
        write_file(&common.out, "lp.txt", &lp.to_text())?;
    }
    let cert = solve_mather(&problem, &gen, context)?;
    write_file(&common.out, "certificate.txt", &format_certificate(&cert))?;
    write_file(&common.out, "measure.txt", &format_measure(&cert.measure, context))?;
    Ok(cert.gap <= tol)
}

fn parse_schedule(text: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        ["geometric", k0, k1] => {
            let k0: u32 = k0
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad schedule bound `{k0}`")))?;
            let k1: u32 = k1
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad schedule bound `{k1}`")))?;
            geometric_schedule(k0, k1)
        }
        _ => Err(Error::InvalidArgument(format!(
            "unsupported schedule `{text}` (expected geometric:k0:k1)"
        ))),
    }
}

fn cmd_vanish(
    common: &CommonArgs,
    schedule: &str,
    tol: f64,
    c_source: &str,
) -> Result<(bool, bool), Error> {
    let lambdas = parse_schedule(schedule)?;
    let c_source = match c_source {
        "lp" => CSource::Lp,
        "howard" => CSource::Howard,
        other => {
            return Err(Error::InvalidArgument(format!(
                "c-source must be lp or howard, got `{other}`"
            )))
        }
    };
    let problem = load_problem(&common.spec)?;
    let gen = build_generator(&problem);
    let report = run_schedule(&problem, &gen, &lambdas, c_source, tol)?;
    write_file(&common.out, "schedule.csv", &format_schedule_csv(&report))?;
    let mut u0_dump = String::new();
    {
        use std::fmt::Write;
        writeln!(u0_dump, "# selected ergodic limit u0").unwrap();
        writeln!(u0_dump, "c {:.16e}", report.c).unwrap();
        writeln!(u0_dump, "converged {}", report.converged).unwrap();
        writeln!(u0_dump, "# point value").unwrap();
        for (x, v) in report.u0.values().iter().enumerate() {
            writeln!(u0_dump, "{x} {v:.16e}").unwrap();
        }
    }
    write_file(&common.out, "u0.txt", &u0_dump)?;

    if !report.converged {
        let mut sel_dump = String::from("# selection check\nskipped: schedule not converged\n");
        if let Some(ref diag) = report.diagnostic {
            sel_dump.push_str(&format!("diagnostic {diag}\n"));
        }
        write_file(&common.out, "selection.txt", &sel_dump)?;
        return Ok((false, false));
    }

    // selection check on the c-normalized problem's vertex measure
    let normalized = problem.with_shifted_cost(report.c);
    let gen_norm = build_generator(&normalized);
    let cert = solve_mather(&normalized, &gen_norm, MatherContext::Ergodic)?;
    let sel = selection_check(&normalized, &gen_norm, &report, &[cert.measure])?;
    let mut sel_dump = String::new();
    {
        use std::fmt::Write;
        writeln!(sel_dump, "# selection check").unwrap();
        writeln!(sel_dump, "c_normalized {:.16e}", sel.c_normalized).unwrap();
        for (i, pairing) in sel.pairings.iter().enumerate() {
            writeln!(sel_dump, "measure {i} pairing {pairing:.16e}").unwrap();
        }
        writeln!(sel_dump, "max_pairing {:.16e}", sel.max_pairing).unwrap();
        writeln!(sel_dump, "ok {}", sel.ok).unwrap();
        if let Some(ref diag) = report.diagnostic {
            writeln!(sel_dump, "diagnostic {diag}").unwrap();
        }
    }
    write_file(&common.out, "selection.txt", &sel_dump)?;
    Ok((report.converged, sel.ok))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(err) = thread_cap() {
        return fail(&err);
    }
    match cli.command {
        Command::Solve { common, lambda, tol } => match cmd_solve(&common, lambda, tol) {
            Ok(()) => ExitCode::SUCCESS,
            Err(err) => fail(&err),
        },
        Command::Certify { common, lambda, z, tol, dump_lp } => {
            match cmd_certify(&common, lambda, z, tol, dump_lp) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => {
                    eprintln!("certification gap above tolerance");
                    ExitCode::from(EXIT_GAP)
                }
                Err(err) => fail(&err),
            }
        }
        Command::Vanish { common, schedule, tol, c_source } => {
            match cmd_vanish(&common, &schedule, tol, &c_source) {
                Ok((true, true)) => ExitCode::SUCCESS,
                Ok((false, _)) => {
                    eprintln!("spread diagnostic failed: schedule did not converge");
                    ExitCode::from(EXIT_ERGODICITY)
                }
                Ok((true, false)) => {
                    eprintln!("selection inequality violated");
                    ExitCode::from(EXIT_GAP)
                }
                Err(err) => fail(&err),
            }
        }
    }
}
