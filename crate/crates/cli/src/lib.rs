//! Command-line front end.
//!
//! [`run`] parses arguments, dispatches to a subcommand and maps the outcome
//! to an exit code: 0 on success, 1 when the instance is infeasible, 2 for
//! usage and input errors, 3 when a solver fails or stops short of a proof.
//! Diagnostics go to stderr; tables go to stdout; files go to `--out`.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use freightcon::benders::{
    lp_relaxation_on, run_benders_on, BendersError, BendersParams, BendersResult,
};
use freightcon::instance::{
    generate_synthetic, load_instance, save_instance, validate_routes, GeneratorConfig, Instance,
    InstancePaths,
};
use freightcon::milp::{solve_milp, MilpParams, MilpProblem, MilpStatus};
use freightcon::model::{build_mip, objective_breakdown, DeliveryMode, MipModel};
use freightcon::report::{delivery_histogram, ScenarioReport, ScenarioRow, SolutionFile};
use freightcon::simplex::LpParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "freightcon",
    version,
    about = "Plan in-transit freight consolidation through gateway ports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that every pickup has a route that fits the window and horizon.
    Validate(InstanceArgs),
    /// Solve the LP relaxation (fractional container counts).
    Relax(SolveArgs),
    /// Solve the full model by branch and bound; only for small instances.
    Solve(SolveArgs),
    /// Solve by Benders decomposition.
    Benders(SolveArgs),
    /// Relaxation plus Benders in both delivery modes, side by side.
    Compare(SolveArgs),
    /// Recompute reports from a saved solution file.
    Report {
        /// A solution.json written by another subcommand.
        solution: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic instance.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct InstanceArgs {
    /// Directory holding suppliers.csv, gateways.csv, pickups.csv and config.json.
    instance: PathBuf,
    /// Fixed charge per pickup, overriding the instance configuration.
    #[arg(long)]
    pickup_cost: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Window,
    ExactDay,
}

impl From<ModeArg> for DeliveryMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Window => DeliveryMode::Window,
            ModeArg::ExactDay => DeliveryMode::ExactDay,
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    input: InstanceArgs,
    /// Delivery rule; ignored by `compare`, which runs both.
    #[arg(long, value_enum, default_value = "window")]
    mode: ModeArg,
    /// Benders convergence tolerance on the relative gap.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Relative gap for branch and bound (the master, or the full model for `solve`).
    #[arg(long, default_value_t = 1e-10)]
    gap_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    node_limit: usize,
    /// `solve` refuses models with more columns than this.
    #[arg(long, default_value_t = 200_000)]
    max_vars: usize,
    /// Accepted for symmetry with `generate`; solving is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for solution.json, trace.csv, report.csv and histogram.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    products: usize,
    #[arg(long, default_value_t = 5)]
    suppliers: usize,
    #[arg(long, default_value_t = 3)]
    gateways: usize,
    #[arg(long, default_value_t = 30)]
    days: usize,
    #[arg(long, default_value_t = 9)]
    window: usize,
    #[arg(long)]
    pickup_cost: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    verbose: bool,
}

/// Why a command stopped; each kind has its own exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Infeasible(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Infeasible(_) => EXIT_INFEASIBLE,
            Failure::Solver(_) => EXIT_SOLVER,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "error: {m}"),
            Failure::Infeasible(m) => write!(f, "infeasible: {m}"),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl From<BendersError> for Failure {
    fn from(e: BendersError) -> Self {
        match e {
            BendersError::Infeasible(m) => Failure::Infeasible(m),
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn solver<E: fmt::Display>(e: E) -> Failure {
    Failure::Solver(e.to_string())
}

fn io<E: fmt::Display>(path: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Solver(format!("{}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Validate(args) => validate(&args),
        Command::Relax(args) => relax(&args),
        Command::Solve(args) => solve(&args),
        Command::Benders(args) => benders(&args),
        Command::Compare(args) => compare(&args),
        Command::Report { solution, out } => report(&solution, out.as_deref()),
        Command::Generate(args) => generate(&args),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("{f}");
            f.code()
        }
    }
}

fn load(args: &InstanceArgs) -> Result<Instance, Failure> {
    let mut inst = load_instance(&InstancePaths::in_dir(&args.instance))
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(c) = args.pickup_cost {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Failure::Usage(format!(
                "--pickup-cost must be >= 0, got {c}"
            )));
        }
        inst.pickup_fixed_cost = c;
    }
    Ok(inst)
}

/// Route check shared by every solving command.
fn require_routes(inst: &Instance) -> Outcome {
    let routes = validate_routes(inst);
    if let Some(first) = routes.issues.first() {
        return Err(Failure::Infeasible(format!(
            "{} of {} pickups cannot be routed; first: product {} from {} on day {} ({:?})",
            routes.issues.len(),
            routes.checked,
            first.product,
            first.supplier,
            first.day,
            first.issue
        )));
    }
    Ok(())
}

fn validate(args: &InstanceArgs) -> Outcome {
    let inst = load(args)?;
    let routes = validate_routes(&inst);
    println!(
        "{} products, {} suppliers, {} gateways, {} days, {}-day window",
        inst.num_products(),
        inst.num_suppliers(),
        inst.num_gateways(),
        inst.horizon_days,
        inst.window_days
    );
    println!(
        "{} pickups checked, {} unroutable",
        routes.checked,
        routes.issues.len()
    );
    for d in &routes.issues {
        println!(
            "  product {} from {} on day {}: {:?}",
            d.product, d.supplier, d.day, d.issue
        );
    }
    if routes.feasible() {
        Ok(())
    } else {
        Err(Failure::Infeasible(format!(
            "{} pickup(s) cannot be routed",
            routes.issues.len()
        )))
    }
}

fn lp_params() -> LpParams {
    LpParams::default()
}

fn benders_params(args: &SolveArgs) -> Result<BendersParams, Failure> {
    for (name, v) in [("--tol", args.tol), ("--gap-tol", args.gap_tol)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Failure::Usage(format!("{name} must be positive, got {v}")));
        }
    }
    if args.max_iters == 0 || args.node_limit == 0 {
        return Err(Failure::Usage(
            "--max-iters and --node-limit must be positive".into(),
        ));
    }
    Ok(BendersParams {
        tol: args.tol,
        max_iters: args.max_iters,
        gap_tol: args.gap_tol,
        node_limit: args.node_limit,
        lp: lp_params(),
        ..BendersParams::default()
    })
}

fn model_for(inst: &Instance, mode: DeliveryMode) -> Result<MipModel, Failure> {
    require_routes(inst)?;
    build_mip(inst, mode).map_err(|e| Failure::Usage(e.to_string()))
}

/// A finished scenario, ready to be written out.
struct Scenario {
    label: String,
    model: MipModel,
    solution: Vec<f64>,
    objective: f64,
    trace_csv: Option<String>,
}

impl Scenario {
    fn row(&self) -> Result<ScenarioRow, Failure> {
        ScenarioRow::from_solution(&self.label, &self.model, &self.solution).map_err(solver)
    }

    /// Writes solution.json, report.csv, histogram.csv and trace.csv (when
    /// there is a trace) into `dir`.
    fn write(&self, inst: &Instance, dir: &Path) -> Outcome {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let file = SolutionFile::new(
            &self.label,
            inst,
            &self.model,
            &self.solution,
            self.objective,
        );
        let path = dir.join("solution.json");
        file.save(&path).map_err(io(&path))?;
        write_reports(&self.model, inst, &self.solution, &self.label, dir)?;
        if let Some(trace) = &self.trace_csv {
            let path = dir.join("trace.csv");
            fs::write(&path, trace).map_err(io(&path))?;
        }
        Ok(())
    }
}

fn write_reports(model: &MipModel, inst: &Instance, x: &[f64], label: &str, dir: &Path) -> Outcome {
    let mut report = ScenarioReport::default();
    report.push(ScenarioRow::from_solution(label, model, x).map_err(solver)?);
    let hist = delivery_histogram(model, inst, x).map_err(solver)?;
    for (name, body) in [
        ("report.csv", report.to_csv().map_err(solver)?),
        ("histogram.csv", hist.to_csv().map_err(solver)?),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
    }
    Ok(())
}

fn print_summary(s: &Scenario, inst: &Instance) -> Outcome {
    let mut report = ScenarioReport::default();
    report.push(s.row()?);
    print!("{}", report.to_table());
    let hist = delivery_histogram(&s.model, inst, &s.solution).map_err(solver)?;
    println!();
    println!("lag_days  weight_lbs  products");
    for (lag, bin) in hist.bins.iter().enumerate() {
        println!("{lag:>8}  {:>10.1}  {:>8}", bin.weight, bin.products);
    }
    Ok(())
}

fn finish(s: &Scenario, inst: &Instance, out: Option<&Path>) -> Outcome {
    print_summary(s, inst)?;
    if let Some(dir) = out {
        s.write(inst, dir)?;
    }
    Ok(())
}

fn run_relax(inst: &Instance, mode: DeliveryMode, label: &str) -> Result<Scenario, Failure> {
    let model = model_for(inst, mode)?;
    let relax = lp_relaxation_on(&model, &lp_params())?;
    Ok(Scenario {
        label: label.to_string(),
        model,
        solution: relax.solution,
        objective: relax.objective,
        trace_csv: None,
    })
}

fn relax(args: &SolveArgs) -> Outcome {
    let inst = load(&args.input)?;
    let s = run_relax(&inst, args.mode.into(), "relax")?;
    finish(&s, &inst, args.out.as_deref())
}

fn solve(args: &SolveArgs) -> Outcome {
    let inst = load(&args.input)?;
    let mode: DeliveryMode = args.mode.into();
    let model = model_for(&inst, mode)?;
    if model.num_cols() > args.max_vars {
        return Err(Failure::Usage(format!(
            "model has {} variables, above the --max-vars limit of {}; use `freightcon benders` instead",
            model.num_cols(),
            args.max_vars
        )));
    }
    let params = MilpParams {
        gap_tol: args.gap_tol,
        node_limit: args.node_limit,
        lp: lp_params(),
        log: args.verbose,
        ..MilpParams::default()
    };
    let outcome = solve_milp(&MilpProblem::from_model(&model), &params).map_err(solver)?;
    if args.verbose {
        eprint!("{}", outcome.log_csv());
        eprintln!(
            "{} nodes, root bound {}, bound {}, gap {:.3e}",
            outcome.nodes, outcome.root_bound, outcome.bound, outcome.gap
        );
    }
    let Some(x) = outcome.incumbent.clone() else {
        return Err(match outcome.status {
            MilpStatus::Infeasible => Failure::Infeasible("the model has no solution".into()),
            _ => Failure::Solver(format!(
                "node limit reached after {} nodes without a solution",
                outcome.nodes
            )),
        });
    };
    let s = Scenario {
        label: mode.label().to_string(),
        model,
        solution: x,
        objective: outcome.objective,
        trace_csv: None,
    };
    finish(&s, &inst, args.out.as_deref())?;
    if outcome.status == MilpStatus::NodeLimit {
        return Err(Failure::Solver(format!(
            "node limit reached; best solution is within {:.3e} of optimal, not proven",
            outcome.gap
        )));
    }
    Ok(())
}

fn run_decomposition(
    inst: &Instance,
    mode: DeliveryMode,
    params: &BendersParams,
    label: &str,
) -> Result<(Scenario, BendersResult), Failure> {
    let model = model_for(inst, mode)?;
    let res = run_benders_on(&model, params)?;
    let s = Scenario {
        label: label.to_string(),
        solution: res.solution.clone(),
        objective: res.objective,
        trace_csv: Some(res.trace.to_csv()),
        model,
    };
    Ok((s, res))
}

fn unproven(label: &str, res: &BendersResult) -> Failure {
    Failure::Solver(format!(
        "{label}: iteration limit reached with gap {:.3e}; the solution is not proven optimal",
        res.gap
    ))
}

fn log_trace(label: &str, res: &BendersResult) {
    for e in &res.trace.entries {
        eprintln!(
            "[{label}] iter {:>4}  lb {:>16.6}  ub {:>16.6}  gap {:.3e}  {}{}",
            e.iteration,
            e.lower_bound,
            e.upper_bound,
            e.gap,
            e.cut.label(),
            if e.relaxed { " (relaxed)" } else { "" }
        );
    }
}

fn benders(args: &SolveArgs) -> Outcome {
    let inst = load(&args.input)?;
    let params = benders_params(args)?;
    let mode: DeliveryMode = args.mode.into();
    let (s, res) = run_decomposition(&inst, mode, &params, mode.label())?;
    if args.verbose {
        log_trace(mode.label(), &res);
    }
    finish(&s, &inst, args.out.as_deref())?;
    if !res.proven {
        return Err(unproven(mode.label(), &res));
    }
    Ok(())
}

fn compare(args: &SolveArgs) -> Outcome {
    let inst = load(&args.input)?;
    let params = benders_params(args)?;
    // Scenarios are independent, so they run side by side; the report is
    // assembled in a fixed order once all of them are done.
    let (relaxed, window, exact) = std::thread::scope(|scope| {
        let relaxed = scope.spawn(|| run_relax(&inst, DeliveryMode::Window, "relax"));
        let window = scope
            .spawn(|| run_decomposition(&inst, DeliveryMode::Window, &params, "benders-window"));
        let exact = scope.spawn(|| {
            run_decomposition(&inst, DeliveryMode::ExactDay, &params, "benders-exact-day")
        });
        (
            relaxed.join().expect("relaxation thread panicked"),
            window.join().expect("benders thread panicked"),
            exact.join().expect("benders thread panicked"),
        )
    });
    let relaxed = relaxed?;
    let (window, window_res) = window?;
    let (exact, exact_res) = exact?;
    if args.verbose {
        log_trace(&window.label, &window_res);
        log_trace(&exact.label, &exact_res);
    }

    let scenarios = [&relaxed, &window, &exact];
    let mut report = ScenarioReport::default();
    for s in scenarios {
        report.push(s.row()?);
    }
    print!("{}", report.to_table());
    for s in [&window, &exact] {
        let hist = delivery_histogram(&s.model, &inst, &s.solution).map_err(solver)?;
        let shares: Vec<String> = (0..hist.bins.len())
            .map(|lag| format!("{lag}:{:.3}", hist.share(lag).unwrap_or(0.0)))
            .collect();
        println!("{} delivery lag shares  {}", s.label, shares.join(" "));
    }

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join("report.csv");
        fs::write(&path, report.to_csv().map_err(solver)?).map_err(io(&path))?;
        for s in scenarios {
            s.write(&inst, &dir.join(&s.label))?;
        }
    }
    for (s, res) in [(&window, &window_res), (&exact, &exact_res)] {
        if !res.proven {
            return Err(unproven(&s.label, res));
        }
    }
    Ok(())
}

fn report(solution: &Path, out: Option<&Path>) -> Outcome {
    let file = SolutionFile::load(solution).map_err(|e| Failure::Usage(e.to_string()))?;
    let model = build_mip(&file.instance, file.mode).map_err(|e| Failure::Usage(e.to_string()))?;
    let x = file
        .column_values(&model)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let costs = objective_breakdown(&model, &x).map_err(solver)?;
    if (costs.total - file.objective).abs() > 1e-6 * (1.0 + file.objective.abs()) {
        eprintln!(
            "warning: stored objective {} differs from recomputed {}",
            file.objective, costs.total
        );
    }
    let s = Scenario {
        label: file.label.clone(),
        model,
        solution: x,
        objective: file.objective,
        trace_csv: None,
    };
    print_summary(&s, &file.instance)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io(dir))?;
        write_reports(&s.model, &file.instance, &s.solution, &s.label, dir)?;
    }
    Ok(())
}

fn generate(args: &GenerateArgs) -> Outcome {
    let mut config =
        GeneratorConfig::sized(args.products, args.suppliers, args.gateways, args.days);
    config.window_days = args.window;
    if let Some(c) = args.pickup_cost {
        config.pickup_fixed_cost = c;
    }
    let inst = generate_synthetic(&config, args.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    save_instance(&inst, &args.out).map_err(solver)?;
    if args.verbose {
        eprintln!(
            "{} pickups, {:.0} lb in total",
            inst.pickups.len(),
            inst.total_weight()
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}
