//! The `debpbo` command line.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use debpbo_core::opb::{parse_opb, render_model, OutputStatus};
use debpbo_core::scenario::{draw_requests, generate, ScenarioSpec};
use debpbo_core::universe::parse_universe;
use debpbo_core::{
    ClosureMode, ConstraintRef, EncodeError, PlanError, PlanOptions, PlanStatus, SolveStatus, Solver,
    TransactionPlan, Universe, Weights,
};

use crate::backend::{plan_with, BackendSpec, Deadline};
use crate::bench::{report, run_batch, BatchConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNKNOWN: i32 = 3;
pub const EXIT_DECLINED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "debpbo", version, about = "Package installation planning as pseudo-Boolean optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan the installation of packages.
    Install(InstallArgs),
    /// Solve an OPB file, printing `o` / `s` / `v` lines.
    Solve(SolveArgs),
    /// Print a synthetic universe built from a scenario spec.
    Generate(GenerateArgs),
    /// Run a batch of install transactions and print the summary table.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct InstallArgs {
    /// Universe file in stanza format.
    #[arg(long, short)]
    pub universe: PathBuf,
    /// Objective weights: removal, presence, version.
    #[arg(long, default_value = "6,1,2", value_parser = parse_weights)]
    pub weights: Weights,
    /// `embedded`, or `external:COMMAND [ARGS]`; the OPB path is appended.
    #[arg(long, default_value = "embedded", value_parser = parse_backend)]
    pub backend: BackendSpec,
    /// Time limit in seconds.
    #[arg(long, default_value = "150", value_parser = parse_timeout)]
    pub timeout: Duration,
    /// Grow the encoded universe on demand instead of encoding the full
    /// closure up front.
    #[arg(long)]
    pub lazy: bool,
    /// Do not ask for confirmation.
    #[arg(long, short)]
    pub yes: bool,
    /// Print the plan in the line-oriented dump format, without prompting.
    #[arg(long)]
    pub machine: bool,
    /// Package references: `name`, `name=version` or `name (>= version)`.
    #[arg(required = true)]
    pub packages: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance in OPB format.
    pub file: PathBuf,
    /// Time limit in seconds; unlimited when absent.
    #[arg(long, value_parser = parse_timeout)]
    pub timeout: Option<Duration>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Scenario spec (`key = value` lines).
    pub spec: PathBuf,
    /// Overrides the seed of the spec.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario spec (`key = value` lines).
    pub spec: PathBuf,
    /// Repeat to compare backends.
    #[arg(long = "backend", default_value = "embedded")]
    pub backends: Vec<String>,
    /// Time limit per transaction in seconds.
    #[arg(long, default_value = "150", value_parser = parse_timeout)]
    pub timeout: Duration,
    /// Overrides the seed of the spec; requests are drawn from it too.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the transaction count of the spec.
    #[arg(long)]
    pub transactions: Option<u32>,
    /// Objective weights: removal, presence, version.
    #[arg(long, default_value = "6,1,2", value_parser = parse_weights)]
    pub weights: Weights,
    /// Parallel runs.
    #[arg(long, default_value = "1")]
    pub jobs: usize,
    /// Write the per-run CSV here instead of after the table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [r, p, v] = parts.as_slice() else {
        return Err("expected three comma separated weights r,p,v".to_string());
    };
    let num = |x: &str| x.parse::<i64>().map_err(|_| format!("bad weight `{x}`"));
    Weights::new(num(r)?, num(p)?, num(v)?).map_err(|e| e.to_string())
}

fn parse_backend(s: &str) -> Result<BackendSpec, String> {
    s.parse().map_err(|e: crate::backend::UnknownBackend| e.to_string())
}

fn parse_timeout(s: &str) -> Result<Duration, String> {
    match s.parse::<f64>() {
        Ok(t) if t > 0.0 && t.is_finite() => Ok(Duration::from_secs_f64(t)),
        _ => Err(format!("timeout must be a positive number of seconds, got `{s}`")),
    }
}

/// Process streams, injectable for tests.
pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, io: &mut Io) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, io),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = io.stderr.write_all(text.as_bytes());
            } else {
                let _ = io.stdout.write_all(text.as_bytes());
            }
            code
        }
    }
}

pub fn run(cli: Cli, io: &mut Io) -> i32 {
    let result = match cli.command {
        Command::Install(a) => cmd_install(&a, io),
        Command::Solve(a) => cmd_solve(&a, io),
        Command::Generate(a) => cmd_generate(&a, io),
        Command::Bench(a) => cmd_bench(&a, io),
    };
    let _ = io.stdout.flush();
    match result {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(io.stderr, "debpbo: {message}");
            EXIT_USAGE
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_universe(path: &Path) -> Result<Universe, String> {
    parse_universe(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

/// Exit code for a finished plan, before any confirmation.
pub fn exit_code(status: PlanStatus) -> i32 {
    match status {
        PlanStatus::Optimal | PlanStatus::FeasibleTimeout => EXIT_OK,
        PlanStatus::Infeasible => EXIT_INFEASIBLE,
        PlanStatus::Unknown => EXIT_UNKNOWN,
    }
}

/// Sectioned, human-oriented plan listing.
pub fn render_plan(plan: &TransactionPlan, universe: &Universe) -> String {
    let mut out = String::new();
    let unit = |id| {
        let u = universe.unit(id);
        format!("  {} {}\n", u.name, u.version)
    };
    if !plan.install.is_empty() {
        out.push_str("Install:\n");
        plan.install.iter().for_each(|&id| out.push_str(&unit(id)));
    }
    if !plan.remove.is_empty() {
        out.push_str("Remove:\n");
        plan.remove.iter().for_each(|&id| out.push_str(&unit(id)));
    }
    if !plan.upgrade.is_empty() {
        out.push_str("Upgrade:\n");
        for up in &plan.upgrade {
            let (from, to) = (universe.unit(up.from), universe.unit(up.to));
            let note = if up.downgrade { " (downgrade)" } else { "" };
            out.push_str(&format!("  {} {} -> {}{note}\n", from.name, from.version, to.version));
        }
    }
    if !plan.keep.is_empty() {
        out.push_str("Keep:\n");
        plan.keep.iter().for_each(|&id| out.push_str(&unit(id)));
    }
    if let Some(v) = plan.objective_value {
        out.push_str(&format!("objective {v}\n"));
    }
    out.push_str(&format!("status {}\n", plan.status));
    out
}

fn cmd_install(args: &InstallArgs, io: &mut Io) -> Result<i32, String> {
    let universe = load_universe(&args.universe)?;
    let request = args
        .packages
        .iter()
        .map(|p| ConstraintRef::parse(p).map_err(|e| format!("bad package reference `{p}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let options = PlanOptions {
        weights: args.weights,
        mode: if args.lazy { ClosureMode::Lazy } else { ClosureMode::Eager },
    };
    let plan = match plan_with(&universe, &request, options, &args.backend, args.timeout) {
        Ok(plan) => plan,
        Err(PlanError::Encode(EncodeError::UnresolvableRequest(r))) => {
            let _ = writeln!(io.stderr, "debpbo: no package matches `{r}`");
            TransactionPlan::empty(PlanStatus::Infeasible)
        }
        Err(e) => return Err(e.to_string()),
    };

    let text = if args.machine { plan.machine_dump(&universe) } else { render_plan(&plan, &universe) };
    io.stdout.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
    io.stdout.flush().map_err(|e| e.to_string())?;

    let code = exit_code(plan.status);
    if plan.status == PlanStatus::FeasibleTimeout {
        let _ = writeln!(io.stderr, "debpbo: time limit reached; the plan may not be optimal");
    }
    if code != EXIT_OK || args.yes || args.machine || !plan.has_changes() {
        return Ok(code);
    }
    let _ = write!(io.stderr, "Proceed? [y/N] ");
    let _ = io.stderr.flush();
    let mut answer = String::new();
    io.stdin.read_line(&mut answer).map_err(|e| e.to_string())?;
    Ok(match answer.trim().to_ascii_lowercase().as_str() {
        "y" | "yes" => EXIT_OK,
        _ => EXIT_DECLINED,
    })
}

fn cmd_solve(args: &SolveArgs, io: &mut Io) -> Result<i32, String> {
    let text = read(&args.file)?;
    let instance = parse_opb(&text).map_err(|e| format!("{}: {e}", args.file.display()))?;
    let mut solver = Solver::new(&instance);
    let stdout = &mut *io.stdout;
    let mut progress = |_: &debpbo_core::Assignment, value: i64| {
        let _ = writeln!(stdout, "o {value}");
        let _ = stdout.flush();
    };
    let outcome = match args.timeout {
        Some(t) => solver.optimize(&mut Deadline::after(t), &mut progress),
        None => solver.optimize(&mut debpbo_core::Unlimited, &mut progress),
    };
    let mut out = format!("s {}\n", OutputStatus::from(outcome.status).as_str());
    if let (SolveStatus::Optimum | SolveStatus::Satisfiable, Some(a)) = (outcome.status, &outcome.assignment) {
        out.push_str(&render_model(a));
    }
    io.stdout.write_all(out.as_bytes()).map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

fn load_spec(path: &Path, seed: Option<u64>) -> Result<ScenarioSpec, String> {
    let mut spec = ScenarioSpec::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn cmd_generate(args: &GenerateArgs, io: &mut Io) -> Result<i32, String> {
    let spec = load_spec(&args.spec, args.seed)?;
    let universe = generate(&spec).map_err(|e| e.to_string())?;
    let s = universe.stats();
    let _ = writeln!(
        io.stderr,
        "{}: {} names, {} units, {} dependencies, {} provides, {} installed",
        spec.name, s.names, s.units, s.dependencies, s.provides, s.installed
    );
    io.stdout.write_all(universe.serialize().as_bytes()).map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}

fn cmd_bench(args: &BenchArgs, io: &mut Io) -> Result<i32, String> {
    let backends = args
        .backends
        .iter()
        .map(|b| b.parse::<BackendSpec>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = load_spec(&args.spec, args.seed)?;
    let universe = generate(&spec).map_err(|e| e.to_string())?;
    let requests = draw_requests(&universe, args.transactions.unwrap_or(spec.transactions), spec.seed);
    let config = BatchConfig { timeout: args.timeout, weights: args.weights, jobs: args.jobs };
    let bench = run_batch(&universe, &requests, &backends, &config);
    let (table, csv) = report(&bench);

    let mut out = table;
    match &args.csv {
        Some(path) => fs::write(path, &csv).map_err(|e| format!("{}: {e}", path.display()))?,
        None => {
            out.push('\n');
            out.push_str(&csv);
        }
    }
    io.stdout.write_all(out.as_bytes()).map_err(|e| e.to_string())?;

    for b in &bench.backends {
        let agg = bench.aggregate(b);
        let _ = writeln!(io.stderr, "{b}: {} infeasible, {} failed of {} runs", agg.infeasible, agg.failed, agg.runs);
    }
    for m in &bench.mismatches {
        let _ = writeln!(
            io.stderr,
            "debpbo: transaction {}: {} found optimum {} but {} found {}",
            m.txn, m.first.0, m.first.1, m.second.0, m.second.1
        );
    }
    Ok(if bench.mismatches.is_empty() { EXIT_OK } else { EXIT_INFEASIBLE })
}

/// Runs with the real process streams.
pub fn main_stdio() -> i32 {
    let stdin = io::stdin();
    let mut stdin = stdin.lock();
    let mut stdout = io::stdout().lock();
    let mut stderr = io::stderr().lock();
    main_with(std::env::args_os(), &mut Io { stdin: &mut stdin, stdout: &mut stdout, stderr: &mut stderr })
}
