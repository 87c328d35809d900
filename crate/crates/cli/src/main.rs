//! `casemix`: treatment limits, solves, sweeps, Pareto audits and the HTTP service.
//!
//! Exit codes: 0 success, 1 infeasible or zeroed result, 2 usage or input
//! error, 3 solver or internal failure.

mod parse;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use casemix_api::{AppState, ServiceOptions};
use casemix_core::engine::{AsfObjective, SolveMethod};
use casemix_core::io::{
    bundled_case_study, bundled_toy, load_caseload_totals, load_instance, report, write_bounds,
    write_json, write_pareto, write_sweep_csv, Format, UfConfig,
};
use casemix_core::model::compute_upper_bounds;
use casemix_core::scalarize::{GamWeights, GpmMode, TieBreak};
use casemix_core::sensitivity::{Objective, SweepSpec};
use casemix_core::solver::{backend_by_name, Backend};
use casemix_core::{Engine, Error, HospitalInstance, RepairStrategy, SolveOutcome, SolveRequest, UfTemplate};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "casemix", version, about = "Hospital case-mix planning")]
struct Cli {
    /// Instance file, or `case-study` / `toy` for a bundled instance.
    #[arg(long, global = true, default_value = "case-study")]
    instance: String,
    /// LP/MILP backend.
    #[arg(long, global = true, env = "CASEMIX_SOLVER", default_value = "simplex")]
    solver: String,
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print each group's treatment limit.
    Bounds(BoundsArgs),
    /// Solve one scalarization.
    Solve(Box<SolveArgs>),
    /// Sweep a utility parameter.
    Sweep(SweepArgs),
    /// Audit a caseload for Pareto optimality.
    Pareto(ParetoArgs),
    /// Serve the HTTP/JSON API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct BoundsArgs {
    /// Write the table to a `.json` or `.csv` file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ufm,
    Gam,
    Gpm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Mmu,
    Msu,
    Asf,
}

#[derive(Clone, Copy, ValueEnum)]
enum GpmModeArg {
    Sum,
    MinimaxUnder,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieBreakArg {
    None,
    MaxThroughput,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value = "ufm")]
    method: MethodArg,
    /// Utility configuration file, or an inline spec such as `UF3:aspiration_pct=40`.
    #[arg(long, default_value = "UF1")]
    uf: String,
    #[arg(long, value_enum, default_value = "mmu")]
    objective: ObjectiveArg,
    /// Weight of the worst-off term; overrides the objective's default.
    #[arg(long)]
    eps1: Option<f64>,
    /// Weight of the sum term; overrides the objective's default.
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long, value_enum, default_value = "none")]
    tie_break: TieBreakArg,
    /// Goals for GAM/GPM: a comma list, a caseload file, or `limits`.
    #[arg(long, default_value = "limits")]
    goals: String,
    /// `relative`, `absolute` or a comma list of weights.
    #[arg(long, value_parser = parse::gam_weights, default_value = "relative", allow_hyphen_values = true)]
    gam_weights: GamWeights,
    #[arg(long, value_enum, default_value = "sum")]
    gpm_mode: GpmModeArg,
    /// Absolute rather than relative GPM deviations.
    #[arg(long)]
    absolute: bool,
    /// `preference:GROUP`, `sum-overachieve` or `tradeoff:E+:E-`.
    #[arg(long, value_parser = parse::repair)]
    repair: Option<RepairStrategy>,
    /// Full request as JSON, replacing the flags above except --uf.
    #[arg(long, conflicts_with_all = ["method", "objective", "eps1", "eps2", "repair"])]
    request: Option<PathBuf>,
    /// Write the result to a `.json` or `.csv` file and print a summary;
    /// JSON goes to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep description as JSON; replaces the flags below.
    #[arg(long, conflicts_with_all = ["template", "param", "values"])]
    spec: Option<PathBuf>,
    #[arg(long, required_unless_present = "spec")]
    template: Option<UfTemplate>,
    /// Parameter to vary, such as `aspiration`, `indifference` or `pair`.
    #[arg(long, required_unless_present = "spec")]
    param: Option<String>,
    /// `lo:hi:step` or a comma list; thresholds are percent of each limit.
    #[arg(long, value_parser = parse::sweep_values, required_unless_present = "spec")]
    values: Option<parse::Values>,
    /// Comma list of `mmu` and `msu`.
    #[arg(long, value_delimiter = ',', default_value = "mmu,msu")]
    objectives: Vec<Objective>,
    /// Thresholds are patient counts rather than percentages.
    #[arg(long)]
    absolute: bool,
    #[arg(long, value_enum, default_value = "none")]
    tie_break: TieBreakArg,
    /// Directory for `sweep.json` and the CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel solves; sequential when omitted.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ParetoArgs {
    /// A solve result, a caseload, or an object of group totals.
    caseload: PathBuf,
    /// Audit the repaired caseload of a solve result.
    #[arg(long)]
    repaired: bool,
    /// Write the report to a `.json` or `.csv` file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Directory where sessions are saved across restarts.
    #[arg(long)]
    persist: Option<PathBuf>,
    /// Concurrent solves; one per core when omitted.
    #[arg(long)]
    workers: Option<usize>,
}

/// Failures outside the engine's own error type that still count as bad input.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", message(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The error chain, skipping causes already quoted by their parent.
fn message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Infeasible(_)) => 1,
        Some(Error::Validation { .. } | Error::Utility(_) | Error::Io { .. } | Error::Json { .. } | Error::Csv(_)) => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let backend: Arc<dyn Backend> =
        Arc::from(backend_by_name(&cli.solver).map_err(|e| anyhow!(Usage(e.to_string())))?);
    let instance = load(&cli.instance)?;
    match cli.command {
        Command::Bounds(a) => bounds(&instance, backend.as_ref(), a),
        Command::Solve(a) => solve(&Engine::new(instance, backend)?, *a),
        Command::Sweep(a) => sweep(&Engine::new(instance, backend)?, a),
        Command::Pareto(a) => pareto(&Engine::new(instance, backend)?, a),
        Command::Serve(a) => serve(Engine::new(instance, backend)?, a),
    }
}

fn load(instance: &str) -> anyhow::Result<HospitalInstance> {
    Ok(match instance {
        "case-study" => bundled_case_study(),
        "toy" => bundled_toy(),
        path => load_instance(path)?,
    })
}

fn out_format(path: &Path) -> Format {
    Format::from_path(path)
}

fn bounds(inst: &HospitalInstance, backend: &dyn Backend, a: BoundsArgs) -> anyhow::Result<ExitCode> {
    let table = compute_upper_bounds(inst, backend)?;
    let width = table.iter().map(|b| b.group.len()).max().unwrap_or(0).max(5);
    println!("{:<width$}  {:>12}", "group", "bound");
    for b in &table {
        println!("{:<width$}  {:>12.2}", b.group, b.bound);
    }
    println!("{:<width$}  {:>12.2}", "TOTAL", table.iter().map(|b| b.bound).sum::<f64>());
    if let Some(out) = a.out {
        write_bounds(&table, &out, out_format(&out))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn solve_request(a: &SolveArgs, inst: &HospitalInstance) -> anyhow::Result<SolveRequest> {
    if let Some(path) = &a.request {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let req: SolveRequest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        return Ok(req);
    }
    let goals = match a.goals.as_str() {
        "limits" => None,
        s => Some(match parse::number_list(s) {
            Some(v) => v,
            None => load_caseload_totals(s, inst)?,
        }),
    };
    Ok(SolveRequest {
        method: match a.method {
            MethodArg::Ufm => SolveMethod::Ufm,
            MethodArg::Gam => SolveMethod::Gam,
            MethodArg::Gpm => SolveMethod::Gpm,
        },
        objective: match a.objective {
            ObjectiveArg::Mmu => AsfObjective::Mmu,
            ObjectiveArg::Msu => AsfObjective::Msu,
            ObjectiveArg::Asf => AsfObjective::Asf,
        },
        eps1: a.eps1,
        eps2: a.eps2,
        tie_break: tie_break(a.tie_break),
        goals,
        gam_weights: a.gam_weights.clone(),
        gpm_mode: match a.gpm_mode {
            GpmModeArg::Sum => GpmMode::Sum,
            GpmModeArg::MinimaxUnder => GpmMode::MinimaxUnder,
        },
        absolute: a.absolute,
        over_weights: Vec::new(),
        under_weights: Vec::new(),
        repair: a.repair.clone(),
    })
}

fn tie_break(t: TieBreakArg) -> TieBreak {
    match t {
        TieBreakArg::None => TieBreak::None,
        TieBreakArg::MaxThroughput => TieBreak::MaxThroughput,
    }
}

fn solve(engine: &Engine, a: SolveArgs) -> anyhow::Result<ExitCode> {
    let uf: UfConfig = parse::uf_config(&a.uf)?;
    let req = solve_request(&a, engine.instance())?;
    let outcome = engine.solve(Some(&uf), &req)?;
    match &a.out {
        Some(p) if p.as_os_str() != "-" => {
            write_outcome(&outcome, p)?;
            print_outcome(&outcome);
        }
        _ => print!("{}", report::to_json(&outcome)),
    }
    if outcome.result.zeroed {
        eprintln!("warning: the optimum treats no patients (zeroed result)");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_outcome(o: &SolveOutcome, path: &Path) -> anyhow::Result<()> {
    match out_format(path) {
        Format::Json => write_json(o, path)?,
        Format::Csv => {
            report::write_result(&o.result, path, Format::Csv)?;
            if let Some(r) = &o.repaired {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("result");
                report::write_result(r, path.with_file_name(format!("{stem}.repaired.csv")), Format::Csv)?;
            }
        }
    }
    Ok(())
}

fn print_outcome(o: &SolveOutcome) {
    print_result("result", &o.result);
    if let Some(r) = &o.repaired {
        println!();
        print_result("repaired", r);
    }
}

fn print_result(label: &str, r: &casemix_core::SolveResult) {
    println!(
        "{label}: N = {:.2}  sum u = {:.2}  min u = {:.2}  objective = {:.6}{}",
        r.throughput,
        r.sum_u,
        r.min_u,
        r.objective,
        if r.zeroed { "  (zeroed)" } else { "" }
    );
    let width = r.groups.iter().map(|g| g.id.len()).max().unwrap_or(0).max(5);
    println!("{:<width$}  {:>10}  {:>8}  {:>10}", "group", "patients", "utility", "limit");
    for g in &r.groups {
        println!("{:<width$}  {:>10.2}  {:>8.2}  {:>10.2}", g.id, g.patients, g.utility, g.bound);
    }
}

fn sweep(engine: &Engine, a: SweepArgs) -> anyhow::Result<ExitCode> {
    let spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            serde_json::from_str::<SweepSpec>(&text).map_err(|source| Error::Json {
                path: path.display().to_string(),
                source,
            })?
        }
        None => {
            let mut s = SweepSpec::new(
                a.template.expect("required by clap"),
                a.param.as_deref().expect("required by clap"),
                a.values.clone().expect("required by clap").0,
            )
            .with_objectives(a.objectives.clone());
            s.absolute = a.absolute;
            s.tie_break = tie_break(a.tie_break);
            s
        }
    };
    spec.validate()?;
    let report = engine.sweep(&spec, a.jobs)?;
    println!("{:>10}  {:>4}  {:>10}  {:>9}  {:>8}  zeroed", "value", "obj", "N", "sum u", "min u");
    for row in &report.rows {
        match (&row.summary, &row.error) {
            (Some(s), _) => println!(
                "{:>10.2}  {:>4}  {:>10.2}  {:>9.2}  {:>8.2}  {}",
                row.value,
                row.objective.as_str(),
                s.throughput,
                s.sum_u,
                s.min_u,
                s.zeroed
            ),
            (None, e) => println!(
                "{:>10.2}  {:>4}  error: {}",
                row.value,
                row.objective.as_str(),
                e.as_deref().unwrap_or("unknown")
            ),
        }
    }
    if let Some(dir) = &a.out {
        write_sweep_csv(&report, dir)?;
        write_json(&report, dir.join("sweep.json"))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn pareto(engine: &Engine, a: ParetoArgs) -> anyhow::Result<ExitCode> {
    let base = if a.repaired {
        let text = std::fs::read_to_string(&a.caseload).map_err(|source| Error::Io {
            path: a.caseload.display().to_string(),
            source,
        })?;
        let o: SolveOutcome = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: a.caseload.display().to_string(),
            source,
        })?;
        o.repaired
            .context("--repaired needs a solve result with a repaired caseload")
            .map_err(|e| anyhow!(Usage(e.to_string())))?
            .patients()
    } else {
        load_caseload_totals(&a.caseload, engine.instance())?
    };
    let r = engine.pareto(&base)?;
    println!(
        "pareto optimal: {}\nbase N = {:.2}  corrected N = {:.2}  diff = {:.2} ({:.2}%){}",
        r.is_pareto,
        r.base_throughput,
        r.corrected_throughput,
        r.diff,
        r.diff_pct,
        if r.zeroed { "  (zeroed base)" } else { "" }
    );
    if let Some(out) = &a.out {
        write_pareto(&r, out, out_format(out))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(engine: Engine, a: ServeArgs) -> anyhow::Result<ExitCode> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| anyhow!(Usage(format!("bad address {}:{}: {e}", a.host, a.port))))?;
    let state = AppState::new(
        engine,
        ServiceOptions {
            persist_dir: a.persist,
            workers: a.workers,
        },
    )
    .context("opening the session store")?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(casemix_api::serve(state, addr))
        .with_context(|| format!("serving on {addr}"))?;
    Ok(ExitCode::SUCCESS)
}
