//! Command-line front end: analyze switching curves, simulate maximal
//! trajectories, classify omega-limit sets, check chaos conditions, and run
//! the registered scenarios.
//!
//! Exit codes: 0 success / expectation match; 2 scenario expectation
//! mismatch; 3 hypothesis-violation warnings escalated by `--strict`;
//! 1 operational errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use filippov_core::classify::{classify_omega, return_sequence, OmegaReport};
use filippov_core::hybrid::{simulate, EventKind, Policy, Trajectory};
use filippov_core::io::{load_system, save_system};
use filippov_core::lambda::{chaos_conditions, construct_lambda, theorem2_probes};
use filippov_core::scenario::{scenario, SCENARIO_NAMES};
use filippov_core::sigma::{classify_point, partition_sigma, SigmaPartition};
use filippov_core::svg::Portrait;
use filippov_core::system::PiecewiseSystem;
use filippov_core::{Tolerances, Vec2};

#[derive(Parser)]
#[command(
    name = "filippov",
    about = "Planar discontinuous (Filippov) vector fields: switching-curve analysis, \
             event-driven simulation and omega-limit classification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition the switching curve and classify its points.
    Analyze(AnalyzeArgs),
    /// Simulate a maximal trajectory under a branch policy.
    Simulate(SimArgs),
    /// Simulate and classify the omega-limit set.
    ClassifyOmega(SimArgs),
    /// Evaluate the geometric chaos conditions.
    ChaosCheck(ChaosArgs),
    /// Run a registered scenario and compare against its expectation.
    Scenario(ScenarioArgs),
}

#[derive(Args)]
struct SystemArg {
    /// Path to a system description file (JSON).
    #[arg(long)]
    system: PathBuf,
    /// Escalate hypothesis-violation warnings to exit code 3.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    sys: SystemArg,
    /// Write the machine-readable report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write an SVG portrait here.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    sys: SystemArg,
    /// Initial point "x,y".
    #[arg(long)]
    p0: String,
    /// Time budget.
    #[arg(long, default_value_t = 100.0)]
    t_budget: f64,
    /// Branch policy: always-x | always-y | stay-sliding | random |
    /// script:<tokens> (tokens X, Y, S, optionally X@0.25).
    #[arg(long, default_value = "stay-sliding")]
    policy: String,
    /// Seed for the random policy.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the trajectory CSV (t, x, y, mode, arc_index, event_flag).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write an SVG portrait with the trajectory.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Write the verdict / trajectory report JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ChaosArgs {
    #[command(flatten)]
    sys: SystemArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// One of: linear-center-center, three-zone, relay-template,
    /// fold-fold-connection.
    #[arg(long)]
    name: String,
    /// Output directory for emitted files.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the suggested seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the suggested time budget.
    #[arg(long)]
    t_budget: Option<f64>,
    /// Escalate hypothesis warnings to exit code 3.
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    let tol = Tolerances::default().with_env_overrides();
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args, tol),
        Command::Simulate(args) => cmd_simulate(args, tol, false),
        Command::ClassifyOmega(args) => cmd_simulate(args, tol, true),
        Command::ChaosCheck(args) => cmd_chaos(args, tol),
        Command::Scenario(args) => cmd_scenario(args, tol),
    }
}

fn load(arg: &SystemArg, tol: Tolerances) -> Result<(PiecewiseSystem, bool)> {
    let (sys, warnings) = load_system(&arg.system, tol)
        .with_context(|| format!("loading {}", arg.system.display()))?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok((sys, !warnings.is_empty()))
}

fn parse_point(s: &str) -> Result<Vec2> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| anyhow!("expected \"x,y\", got {s:?}"))?;
    Ok(Vec2::new(x.trim().parse()?, y.trim().parse()?))
}

fn parse_policy(name: &str, seed: u64) -> Result<Policy> {
    match name {
        "always-x" => Ok(Policy::AlwaysX),
        "always-y" => Ok(Policy::AlwaysY),
        "stay-sliding" => Ok(Policy::StaySliding),
        "random" => Ok(Policy::SeededRandom(seed)),
        other => {
            if let Some(script) = other.strip_prefix("script:") {
                Policy::parse_script(script)
                    .ok_or_else(|| anyhow!("invalid script {script:?} (tokens X, Y, S, X@0.25)"))
            } else {
                bail!("unknown policy {other:?}")
            }
        }
    }
}

fn write_out(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn partition_report(sys: &PiecewiseSystem, part: &SigmaPartition) -> serde_json::Value {
    let mut charts = Vec::new();
    for cp in &part.charts {
        let points: Vec<serde_json::Value> = cp
            .breakpoints
            .iter()
            .map(|bp| {
                let rep = classify_point(sys, cp.chart, bp.s);
                serde_json::json!({
                    "s": bp.s,
                    "kind": format!("{:?}", bp.kind),
                    "point": [rep.point.x, rep.point.y],
                    "report": rep,
                })
            })
            .collect();
        charts.push(serde_json::json!({
            "chart": cp.chart,
            "intervals": cp.intervals,
            "breakpoints": points,
            "pseudo_equilibria": cp.pseudo_equilibria,
        }));
    }
    serde_json::json!({ "charts": charts })
}

fn describe_partition(sys: &PiecewiseSystem, part: &SigmaPartition) -> String {
    let mut out = String::new();
    for cp in &part.charts {
        let _ = writeln!(out, "chart {}:", cp.chart);
        for iv in &cp.intervals {
            let _ = writeln!(
                out,
                "  ({:+.6}, {:+.6})  {:?}",
                iv.lo, iv.hi, iv.kind
            );
        }
        for bp in &cp.breakpoints {
            let p = sys.curve.charts[cp.chart].point(bp.s);
            let _ = writeln!(
                out,
                "  s = {:+.9}  {:?} at ({:+.6}, {:+.6})",
                bp.s, bp.kind, p.x, p.y
            );
        }
        for pe in &cp.pseudo_equilibria {
            let _ = writeln!(
                out,
                "  pseudo-equilibrium at ({:+.9}, {:+.9}): {:?}",
                pe.point.x, pe.point.y, pe.stability
            );
        }
    }
    out
}

fn cmd_analyze(args: AnalyzeArgs, tol: Tolerances) -> Result<ExitCode> {
    let (sys, warned) = load(&args.sys, tol)?;
    let part = partition_sigma(&sys).map_err(|e| anyhow!("{e}"))?;
    print!("{}", describe_partition(&sys, &part));
    if let Some(path) = args.json {
        let report = partition_report(&sys, &part);
        write_out(&path, &format!("{:#}\n", report))?;
    }
    if let Some(path) = args.svg {
        let svg = Portrait {
            sys: &sys,
            partition: Some(&part),
            trajectory: None,
            lambda: None,
        }
        .render();
        write_out(&path, &svg)?;
    }
    Ok(exit_for(warned, args.sys.strict))
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x,y,mode,arc_index,event_flag\n");
    for (i, arc) in traj.arcs.iter().enumerate() {
        for (j, &(t, p)) in arc.samples.iter().enumerate() {
            let flag = (j == 0) as u8;
            let _ = writeln!(out, "{t},{},{},{:?},{i},{flag}", p.x, p.y, arc.mode);
        }
    }
    out
}

fn cmd_simulate(args: SimArgs, tol: Tolerances, classify: bool) -> Result<ExitCode> {
    let (sys, warned) = load(&args.sys, tol)?;
    let p0 = parse_point(&args.p0)?;
    let policy = parse_policy(&args.policy, args.seed)?;
    let traj = simulate(&sys, p0, args.t_budget, policy).map_err(|e| anyhow!("{e}"))?;

    println!(
        "terminal: {:?} at t = {:.6}, ({:+.6}, {:+.6})",
        traj.terminal.kind, traj.terminal.time, traj.terminal.point.x, traj.terminal.point.y
    );
    println!(
        "arcs: {}, sigma events: {}, policy branches: {}",
        traj.arcs.len(),
        traj.sigma_events().len(),
        traj.policy_log.len()
    );

    let report: Option<OmegaReport> = classify.then(|| classify_omega(&sys, &traj, &sys.tol));
    if let Some(rep) = &report {
        println!("verdict: {:?}", rep.verdict);
        println!("reason: {}", rep.evidence.reason);
    }

    if let Some(path) = &args.csv {
        write_out(path, &trajectory_csv(&traj))?;
    }
    if let Some(path) = &args.svg {
        let part = partition_sigma(&sys).ok();
        let svg = Portrait {
            sys: &sys,
            partition: part.as_ref(),
            trajectory: Some(&traj),
            lambda: report.as_ref().and_then(|r| r.evidence.lambda.as_ref()),
        }
        .render();
        write_out(path, &svg)?;
    }
    if let Some(path) = &args.json {
        let seq = return_sequence(&sys, &traj);
        let value = serde_json::json!({
            "terminal": traj.terminal,
            "policy_log": traj.policy_log,
            "events": seq.events,
            "report": report,
        });
        write_out(path, &format!("{:#}\n", value))?;
    }
    Ok(exit_for(warned, args.sys.strict))
}

fn cmd_chaos(args: ChaosArgs, tol: Tolerances) -> Result<ExitCode> {
    let (sys, warned) = load(&args.sys, tol)?;
    let report = chaos_conditions(&sys, args.seed);
    println!("double tangency:          {}", report.double_tangency);
    println!("parabolic or hyperbolic:  {}", report.parabolic_or_hyperbolic);
    println!("no crossing region in K:  {}", report.no_crossing_in_k);
    println!("two-sided visit witness:  {}", report.two_sided_visits_witness);
    println!("all conditions:           {}", report.all());
    if let Some((chart, s)) = report.tangency {
        if report.all() {
            if let Ok(region) = construct_lambda(&sys, chart, s) {
                println!(
                    "invariant region: area {:.6}, boundary gap {:.3e}",
                    region.area, region.closure_gap
                );
                if let Ok(t2) = theorem2_probes(&sys, &region, 8, args.seed) {
                    println!(
                        "probes: periodic {}, coverage {:.4}, recurrence {}",
                        t2.periodic_witnesses_pass, t2.coverage, t2.recurrence_pass
                    );
                }
            }
        }
    }
    if let Some(path) = args.json {
        write_out(&path, &format!("{:#}\n", serde_json::json!(report)))?;
    }
    Ok(exit_for(warned, args.sys.strict))
}

fn exit_for(warned: bool, strict: bool) -> ExitCode {
    if warned && strict {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_scenario(args: ScenarioArgs, tol: Tolerances) -> Result<ExitCode> {
    let Some(sc) = scenario(&args.name) else {
        bail!(
            "unknown scenario {:?}; registered: {}",
            args.name,
            SCENARIO_NAMES.join(", ")
        );
    };
    let mut sys = sc.system;
    sys.tol = tol;
    let warnings = sys.check_hypotheses();
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    std::fs::create_dir_all(&args.out_dir)?;
    let dir = &args.out_dir;
    write_out(&dir.join("system.json"), &save_system(&sys))?;

    // Analyze.
    let part = partition_sigma(&sys).map_err(|e| anyhow!("{e}"))?;
    print!("{}", describe_partition(&sys, &part));
    write_out(
        &dir.join("analysis.json"),
        &format!("{:#}\n", partition_report(&sys, &part)),
    )?;

    // Simulate with scenario defaults.
    let policy = match (&sc.suggested_policy, args.seed) {
        (Policy::SeededRandom(_), Some(seed)) => Policy::SeededRandom(seed),
        (p, _) => p.clone(),
    };
    let budget = args.t_budget.unwrap_or(sc.suggested_budget);
    let traj = simulate(&sys, sc.suggested_p0, budget, policy).map_err(|e| anyhow!("{e}"))?;
    write_out(&dir.join("trajectory.csv"), &trajectory_csv(&traj))?;

    // Classify.
    let report = classify_omega(&sys, &traj, &sys.tol);
    println!("verdict: {:?}", report.verdict);
    println!("reason: {}", report.evidence.reason);
    write_out(
        &dir.join("verdict.json"),
        &format!("{:#}\n", serde_json::json!(&report)),
    )?;

    let svg = Portrait {
        sys: &sys,
        partition: Some(&part),
        trajectory: Some(&traj),
        lambda: report.evidence.lambda.as_ref(),
    }
    .render();
    write_out(&dir.join("portrait.svg"), &svg)?;

    // Compare against the expectation skeleton.
    let mut mismatch = false;
    if let Some(expected) = &sc.expected {
        if report.verdict != expected.verdict {
            eprintln!(
                "mismatch: verdict {:?}, expected {:?}",
                report.verdict, expected.verdict
            );
            mismatch = true;
        }
        for (label, loc, tol_pt) in &expected.key_points {
            let found = part.charts.iter().any(|cp| {
                cp.breakpoints
                    .iter()
                    .any(|bp| sys.curve.charts[cp.chart].point(bp.s).dist(*loc) <= *tol_pt)
            });
            if !found {
                eprintln!("mismatch: key point {label} {loc:?} not found within {tol_pt:.1e}");
                mismatch = true;
            }
        }
    }
    if mismatch {
        return Ok(ExitCode::from(2));
    }
    if let EventKind::ExitK = traj.terminal.kind {
        eprintln!("note: trajectory left K");
    }
    Ok(exit_for(!warnings.is_empty(), args.strict))
}
