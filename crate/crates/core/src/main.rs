use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use finpot::adjoint::adjoint_structure;
use finpot::conformance::{
    example_check, run_batch, run_conformance_with, BatchReport, ConformanceReport, GenParams,
};
use finpot::io::{fingerprint, serialize, to_json_string};
use finpot::report::{analyze, Analysis};
use finpot::scalar::{cx, fmt_cx};
use finpot::spectral::{trace_det_report, TraceDetReport};
use finpot::{worked_example, Cx, Error, StructuredOperator, CHECK_TOL, DEFAULT_TOL};

/// Finite potent operators: index, decompositions, spectra, traces and
/// determinants.
#[derive(Parser)]
#[command(name = "finpot", version)]
struct Cli {
    /// Rank-decision tolerance, relative to max(1, norm).
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Tolerance for identity checks (exit code 2 above it).
    #[arg(long = "check-tol", global = true, default_value_t = CHECK_TOL)]
    check_tol: f64,
    /// Emit the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index, dimensions, annihilator, spectrum, traces and determinants.
    Analyze { file: PathBuf },
    /// Write the adjoint operator to a new file.
    Adjoint {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// The four traces and their discrepancy.
    Trace { file: PathBuf },
    /// Det(Id + phi) by every route.
    Det { file: PathBuf },
    /// Run the theorem suite on a file or on generated operators.
    Verify(VerifyArgs),
    /// Print the worked example operator, or check its reference values.
    Example {
        #[arg(long)]
        check: bool,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Operator file.
    #[arg(required_unless_present = "random", conflicts_with = "random")]
    file: Option<PathBuf>,
    /// Generate operators instead of reading a file.
    #[arg(long)]
    random: bool,
    /// Base seed; case i uses a seed derived from it.
    #[arg(long, default_value_t = 0, requires = "random")]
    seed: u64,
    /// Number of generated operators.
    #[arg(long, default_value_t = 50, requires = "random")]
    cases: usize,
}

enum Outcome {
    Pass,
    CheckFailed,
}

const EXIT_INPUT: u8 = 1;
const EXIT_CHECK: u8 = 2;

/// A closed stdout (e.g. piping into `head`) ends the process quietly.
fn quiet_broken_pipe() {
    let default = std::panic::take_hook();
    std::panic::set_hook(Box::new(move |info| {
        let msg = info
            .payload()
            .downcast_ref::<String>()
            .map(String::as_str)
            .unwrap_or_default();
        if msg.contains("failed printing to stdout") && msg.contains("Broken pipe") {
            std::process::exit(0);
        }
        default(info);
    }));
}

fn main() -> ExitCode {
    quiet_broken_pipe();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    for (name, v) in [("--tol", cli.tol), ("--check-tol", cli.check_tol)] {
        if !(v > 0.0 && v < 1.0) {
            eprintln!("error [InvalidArgument]: {name} must lie in (0, 1), got {v}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(EXIT_CHECK),
        Err(e) => {
            eprintln!("error [{}]: {e}", e.kind());
            ExitCode::from(if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_CHECK
            })
        }
    }
}

fn run(cli: &Cli) -> finpot::Result<Outcome> {
    match &cli.command {
        Command::Analyze { file } => {
            let a = analyze(&parse(file)?, cli.tol)?;
            emit(cli, &a, print_analysis)?;
            Ok(judge(a.traces.max_discrepancy <= cli.check_tol))
        }
        Command::Adjoint { file, output } => adjoint(cli, file, output),
        Command::Trace { file } => {
            let r = trace_det_report(&parse(file)?, cli.tol)?;
            emit(cli, &r, print_traces)?;
            Ok(judge(r.trace_discrepancy <= cli.check_tol))
        }
        Command::Det { file } => {
            let r = trace_det_report(&parse(file)?, cli.tol)?;
            emit(cli, &r, print_dets)?;
            Ok(judge(r.det_discrepancy <= cli.check_tol))
        }
        Command::Verify(v) if v.random => {
            let r = run_batch(
                &GenParams::with_seed(v.seed),
                v.cases,
                cli.tol,
                cli.check_tol,
            );
            emit(cli, &r, print_batch)?;
            Ok(judge(r.all_passed()))
        }
        Command::Verify(v) => {
            let file = v
                .file
                .as_ref()
                .expect("clap enforces a file without --random");
            let r = run_conformance_with(&parse(file)?, cli.tol, cli.check_tol);
            emit(cli, &r, print_conformance)?;
            Ok(judge(r.passed))
        }
        Command::Example { check: false } => {
            print!("{}", to_json_string(&worked_example()));
            Ok(Outcome::Pass)
        }
        Command::Example { check: true } => {
            let e = example_check(cli.tol, cli.check_tol)?;
            emit(cli, &e, |e| {
                println!("tr = {}", fmt_cx(e.trace));
                println!("tr* = {}", fmt_cx(e.adjoint_trace));
                println!(
                    "index {}, adjoint index {}, dim W {}",
                    e.index, e.adjoint_index, e.dim_w
                );
                println!("Det(Id+phi) = {}", fmt_cx(e.det_id_plus));
                println!("det(phi|W) = {}", fmt_cx(e.det_core));
                print_conformance(&e.report);
            })?;
            Ok(judge(e.passed))
        }
    }
}

/// Parses `file`, naming it in I/O errors.
fn parse(file: &Path) -> finpot::Result<StructuredOperator> {
    finpot::io::parse(file).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", file.display()),
        )),
        e => e,
    })
}

fn judge(ok: bool) -> Outcome {
    if ok {
        Outcome::Pass
    } else {
        Outcome::CheckFailed
    }
}

fn emit<T: Serialize>(cli: &Cli, value: &T, text: impl FnOnce(&T)) -> finpot::Result<()> {
    if cli.json {
        let s = serde_json::to_string_pretty(value)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        println!("{s}");
    } else {
        text(value);
    }
    Ok(())
}

#[derive(Serialize)]
struct AdjointOutput {
    output: PathBuf,
    fingerprint: String,
    dim_w: usize,
    index: usize,
    index_match: bool,
    max_residual: f64,
}

fn adjoint(cli: &Cli, file: &Path, output: &Path) -> finpot::Result<Outcome> {
    if same_file(file, output) {
        return Err(Error::InvalidArgument(
            "refusing to overwrite the input file".into(),
        ));
    }
    let phi = parse(file)?;
    let star = phi.adjoint();
    let report = adjoint_structure(&phi, cli.tol)?;
    serialize(&star, output)?;
    let out = AdjointOutput {
        output: output.to_path_buf(),
        fingerprint: fingerprint(&star),
        dim_w: report.dim_w_star,
        index: report.index_star,
        index_match: report.index_match,
        max_residual: report.max_residual(),
    };
    emit(cli, &out, |o| {
        println!(
            "wrote {} (fingerprint {})",
            o.output.display(),
            o.fingerprint
        );
        row("dim W*", o.dim_w);
        row("index*", o.index);
        row("max residual", format!("{:.3e}", o.max_residual));
    })?;
    Ok(judge(report.passes(cli.check_tol)))
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

fn row(label: &str, value: impl std::fmt::Display) {
    println!("{label:<20}{value}");
}

fn print_analysis(a: &Analysis) {
    row("fingerprint", &a.fingerprint);
    row("ambient", &a.ambient);
    row("cutoff", a.cutoff);
    row("rank-one terms", a.rank_one_terms);
    row("dim V_act", a.dim_active);
    row("dim W", a.dim_w);
    row("dim U ∩ V_act", a.dim_u_active);
    row("index", a.index);
    row("nilpotent", a.nilpotent);
    let ann: Vec<Cx> = a.annihilator.iter().map(|c| cx(c[0], c[1])).collect();
    row("annihilator", poly_text(&ann));
    row("splitting cond", format!("{:.3e}", a.splitting_condition));
    println!("spectrum (nonzero)");
    if a.spectrum.eigenpairs.is_empty() {
        println!("  none");
    }
    for e in &a.spectrum.eigenpairs {
        println!(
            "  {:<32} mult {}  residual {:.1e}",
            fmt_cx(e.lambda),
            e.multiplicity,
            e.residual
        );
    }
    row("0 in spectrum", a.spectrum.contains_zero);
    print_traces(&a.traces);
    print_dets(&a.traces);
}

fn poly_text(c: &[Cx]) -> String {
    let terms: Vec<String> = c
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, z)| z.norm() > 1e-12)
        .map(|(k, z)| match k {
            0 => format!("({})", fmt_cx(*z)),
            1 => format!("({}) x", fmt_cx(*z)),
            _ => format!("({}) x^{k}", fmt_cx(*z)),
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

fn print_traces(r: &TraceDetReport) {
    row("trace (tate)", fmt_cx(r.tate));
    row("trace (leray)", fmt_cx(r.leray));
    row("trace (riesz)", fmt_cx(r.riesz));
    row("trace (diagonal)", fmt_cx(r.diagonal));
    row("trace discrepancy", format!("{:.3e}", r.trace_discrepancy));
}

fn print_dets(r: &TraceDetReport) {
    row("det(I+B|W)", fmt_cx(r.det_restriction));
    row("prod (1+lambda)", fmt_cx(r.det_product));
    row("1 + sum tr L^r", fmt_cx(r.det_exterior));
    row("det(I+B) on V_act", fmt_cx(r.det_active));
    row("det discrepancy", format!("{:.3e}", r.det_discrepancy));
}

fn print_conformance(r: &ConformanceReport) {
    println!(
        "fingerprint {}  rank tol {:e}  check tol {:e}",
        r.fingerprint, r.rank_tol, r.tol
    );
    for c in &r.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!(
            "  {:<3} {:<52} {:>10.3e}  {status}",
            c.id, c.name, c.residual
        );
        if let Some(e) = &c.error {
            println!("      {e}");
        }
    }
    for n in &r.notes {
        println!("note: {n}");
    }
    println!("{}", if r.passed { "PASS" } else { "FAIL" });
}

fn print_batch(r: &BatchReport) {
    println!("seed {}  cases {}  passed {}", r.seed, r.cases, r.passed);
    for (id, w) in &r.worst {
        println!("  worst {id:<3} {w:.3e}");
    }
    for f in &r.failures {
        println!(
            "  case {} (seed {}, fingerprint {}) failed {}{}",
            f.case,
            f.seed,
            f.fingerprint,
            f.failed.join(","),
            f.error
                .as_ref()
                .map(|e| format!(": {e}"))
                .unwrap_or_default()
        );
    }
    println!("{}", if r.all_passed() { "PASS" } else { "FAIL" });
}
