//! `optmom`: run scenario self-tests, orbit queries and reductions.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use optmom::checks::RunContext;
use optmom::distribution::{same_orbit, OrbitAnswer, OrbitSearch};
use optmom::linalg::Vector;
use optmom::optimal_momentum::label_at;
use optmom::reduction::{mw_reduce_compare, reduced_form};
use optmom::report::{format_float, write_csv, CheckReport};
use optmom::scenario_file;
use optmom::scenarios::{self, Scenario};
use optmom::Error;

#[derive(Parser, Debug)]
#[command(
    name = "optmom",
    version,
    about = "Optimal momentum maps: self-tests, orbits and reduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the checks of a scenario.
    Check(CheckArgs),
    /// Decide whether two points lie on the same leaf.
    Orbit(OrbitArgs),
    /// Reduce at a designated label and dump the reduced form.
    Reduce(ReduceArgs),
    /// List built-in scenarios and their checks.
    List,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args, Debug)]
struct Common {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "file")]
    scenario: Option<String>,
    /// Scenario file (TOML).
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, env = "OPTMOM_SEED", default_value_t = 0)]
    seed: u64,
    /// Tolerance override, `NAME=VALUE`; repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Multiplier on every default probe count.
    #[arg(long, default_value_t = 1.0)]
    probe_scale: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    /// Glob over check names.
    #[arg(long)]
    select: Option<String>,
}

#[derive(Args, Debug)]
struct OrbitArgs {
    #[command(flatten)]
    common: Common,
    /// Action case within the scenario (default: the first).
    #[arg(long)]
    case: Option<String>,
    /// Total steering time.
    #[arg(long, default_value_t = 100.0)]
    budget: f64,
    /// First point, comma-separated coordinates.
    #[arg(allow_hyphen_values = true)]
    a: String,
    /// Second point.
    #[arg(allow_hyphen_values = true)]
    b: String,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    case: Option<String>,
    /// Name of the designated label (cross-section).
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value_t = 10)]
    probes: usize,
}

/// Failure with its exit code.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(2, e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure(2, e.to_string())
    }
}

fn context(c: &Common) -> Result<RunContext, Failure> {
    let mut ctx = RunContext::new(c.seed);
    for t in &c.tol {
        ctx.tolerances.apply_override(t)?;
    }
    if !(c.probe_scale.is_finite() && c.probe_scale > 0.0) {
        return Err(Failure(2, "probe scale must be positive".into()));
    }
    ctx.probe_scale = c.probe_scale;
    Ok(ctx)
}

fn load(c: &Common) -> Result<Scenario, Failure> {
    match (&c.scenario, &c.file) {
        (Some(name), None) => Ok(scenarios::by_name(name)?),
        (None, Some(path)) => Ok(scenario_file::load(path)?),
        _ => Err(Failure(
            2,
            "give exactly one of --scenario or --file".into(),
        )),
    }
}

fn output(c: &Common) -> Result<Box<dyn Write>, Failure> {
    Ok(match &c.out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(c: &Common, reports: &[CheckReport]) -> Result<(), Failure> {
    let mut out = output(c)?;
    match c.format {
        Format::Csv => write_csv(&mut out, reports).map_err(|e| Failure(2, e.to_string()))?,
        Format::Text => {
            for r in reports {
                writeln!(out, "{}", r.text_line())?;
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            writeln!(out, "{} checks, {} failed", reports.len(), failed)?;
        }
    }
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> Result<u8, Failure> {
    let ctx = context(&args.common)?;
    let scenario = load(&args.common)?;
    let reports = scenario.run(&ctx, args.select.as_deref())?;
    emit(&args.common, &reports)?;
    Ok(if reports.iter().all(|r| r.passed) {
        0
    } else {
        1
    })
}

fn parse_point(text: &str, dim: usize) -> Result<Vector, Failure> {
    let coords: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure(2, format!("bad point `{text}`: {e}")))?;
    if coords.len() != dim {
        return Err(Failure(
            2,
            format!(
                "point `{text}` has {} coordinates, expected {dim}",
                coords.len()
            ),
        ));
    }
    Ok(Vector::from_vec(coords))
}

fn cmd_orbit(args: &OrbitArgs) -> Result<u8, Failure> {
    let ctx = context(&args.common)?;
    let scenario = load(&args.common)?;
    let case = scenario.case(args.case.as_deref())?;
    let chart = case.e.base().chart().clone();
    let a = chart.point(parse_point(&args.a, chart.dim())?)?;
    let b = chart.point(parse_point(&args.b, chart.dim())?)?;
    let search = OrbitSearch {
        budget: args.budget,
        seed: ctx.seed,
        tol_reach: ctx.tolerances.reach,
        ..OrbitSearch::default()
    };
    let invariants = case
        .e
        .labels()
        .map(|l| l.components.clone())
        .unwrap_or_default();
    let answer = same_orbit(case.e.base(), &a, &b, &invariants, &search)?;
    let mut out = output(&args.common)?;
    let csv = args.common.format == Format::Csv;
    if csv {
        writeln!(out, "answer,detail")?;
    }
    match answer {
        OrbitAnswer::Yes(w) => {
            if csv {
                writeln!(out, "yes,\"{w}\"")?;
            } else {
                writeln!(out, "yes")?;
                writeln!(out, "word: {w}")?;
            }
        }
        OrbitAnswer::No(w) => {
            if csv {
                writeln!(
                    out,
                    "no,\"{}={}|{}\"",
                    w.name,
                    format_float(w.at_a),
                    format_float(w.at_b)
                )?;
            } else {
                writeln!(out, "no")?;
                writeln!(
                    out,
                    "witness: {} = {} vs {} (max |dI.X| {:.1e})",
                    w.name, w.at_a, w.at_b, w.max_derivative
                )?;
            }
        }
        OrbitAnswer::Unknown {
            spent,
            best_distance,
        } => {
            if csv {
                writeln!(
                    out,
                    "unknown,\"{}|{}\"",
                    format_float(spent),
                    format_float(best_distance)
                )?;
            } else {
                writeln!(out, "unknown")?;
                writeln!(
                    out,
                    "spent {spent} time units, closest distance {best_distance:.3e}"
                )?;
            }
        }
    }
    Ok(0)
}

fn cmd_reduce(args: &ReduceArgs) -> Result<u8, Failure> {
    let ctx = context(&args.common)?;
    let scenario = load(&args.common)?;
    let (case, red) = scenario
        .reduction(args.case.as_deref(), args.label.as_deref())
        .map_err(|e| Failure(2, format!("no cross-section available: {e}")))?;
    let t = &ctx.tolerances;
    let probes = optmom::phase_space::Probes::new(args.probes.max(1), ctx.seed_for(&red.name));
    let rep = reduced_form(
        &case.e,
        &red.level,
        &red.chart,
        &red.g_rho,
        &probes,
        t.reduced_form,
        t.nondeg,
    )?;
    let mut reports = rep.reports();
    let mut mw_passed = true;
    if let (Some(mw), Some(j)) = (&red.mw, &case.momentum) {
        let cmp = mw_reduce_compare(
            &case.e,
            j,
            &red.level,
            &red.chart,
            mw,
            &probes,
            t.reduced_form,
        )?;
        mw_passed = cmp.passed();
        reports.push(cmp.form);
        reports.push(cmp.level);
    }
    for r in &mut reports {
        r.scenario = scenario.name.clone();
        r.check = format!("{}.{}", r.check, red.name);
    }
    let label = label_at(&case.e, &red.level.sample_point(&mut probes.rng()))?;
    let mut out = output(&args.common)?;
    match args.common.format {
        Format::Csv => {
            writeln!(out, "sample,row,col,value")?;
            for (i, (_, w)) in rep.samples.iter().enumerate() {
                for r in 0..w.nrows() {
                    for c in 0..w.ncols() {
                        writeln!(out, "{i},{r},{c},{}", format_float(w[(r, c)]))?;
                    }
                }
            }
        }
        Format::Text => {
            writeln!(out, "label: {label}")?;
            writeln!(out, "reduced dimension: {}", rep.dim)?;
            if rep.dim == 0 {
                writeln!(out, "reduced space is a point")?;
            } else {
                writeln!(out, "smallest singular value: {:.6e}", rep.min_singular)?;
            }
            if let Some((y, w)) = rep.samples.first() {
                writeln!(out, "at y = {}", fmt_vec(y))?;
                for r in 0..w.nrows() {
                    let row: Vec<f64> = (0..w.ncols()).map(|c| w[(r, c)]).collect();
                    writeln!(out, "  [{}]", fmt_slice(&row))?;
                }
            }
            for r in &reports {
                writeln!(out, "{}", r.text_line())?;
            }
        }
    }
    let ok = rep.passed() && mw_passed && reports.iter().all(|r| r.passed);
    Ok(if ok { 0 } else { 1 })
}

fn fmt_slice(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:+.6}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_vec(v: &Vector) -> String {
    format!("({})", fmt_slice(v.as_slice()))
}

fn cmd_list() -> Result<u8, Failure> {
    let mut out = io::stdout().lock();
    for s in scenarios::all() {
        writeln!(out, "{}: {}", s.name, s.summary)?;
        for c in &s.checks {
            writeln!(out, "  {} [{}]", c.name, c.provenance)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Orbit(a) => cmd_orbit(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::List => cmd_list(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("optmom: {msg}");
            ExitCode::from(code)
        }
    }
}
