//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O error, 2 usage error, 3 schema error,
//! 4 negative answer (unsat, infeasible plan, rejected event or unmet query
//! precondition), 5 timeout.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::dynamic::{resolve_dynamic, DynamicError, DynamicPolicy, Event, ExecutionState};
use crate::explain::{answer, templates, ExplainError, ExplainOptions, Explanation, Query};
use crate::io::{
    from_json, grid_from_ascii, parse_instance, parse_instance_on_grid, parse_plan, to_canonical_json, FormatError,
};
use crate::model::{AgentId, AgentState, Instance, Plan, VertexId};
use crate::service::{solve_json, ServiceConfig};
use crate::solver::{solve_decision, solve_optimal, Budget, Relaxation, SolveOutcome, SolverError, TimeWindow};
use crate::validate::{categorize, validate};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_NEGATIVE: i32 = 4;
pub const EXIT_TIMEOUT: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "mmapf", version, about = "Multi-modal multi-agent path finding workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    /// Solver budget in seconds.
    #[arg(long, global = true, default_value_t = 60.0)]
    timeout: f64,
    /// Include wall-clock timings in solver statistics.
    #[arg(long, global = true)]
    timings: bool,
    /// Take the grid from an ASCII map (`.` free, `#` obstacle, `C`
    /// charging, `2`-`9` slow); the instance file then omits `grid`/`graph`.
    #[arg(long, global = true, value_name = "MAP")]
    from_ascii: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find an optimal plan, or decide a fixed makespan.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        makespan: Option<u32>,
        /// Also write the plan to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Check a plan against an instance.
    Validate {
        instance: PathBuf,
        plan: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Answer a query about an instance or plan.
    Explain {
        instance: PathBuf,
        #[command(flatten)]
        query: QueryArgs,
        /// Plan the wait query refers to.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Largest extra horizon probed when explaining infeasibility.
        #[arg(long, default_value_t = 3)]
        delta_max: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Execute a plan while applying events, revising it after each batch.
    Dynamic {
        instance: PathBuf,
        #[arg(long)]
        events: PathBuf,
        /// Initial plan; solved optimally when omitted.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PolicyArg::Fallback)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 3)]
        delta_max: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "MAPF_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        /// Directory for session snapshots; snapshots are disabled without it.
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
        /// Allowed CORS origin (any when omitted).
        #[arg(long)]
        cors_origin: Option<String>,
        /// Solves with a longer timeout than this many seconds run in the background.
        #[arg(long, default_value_t = 10.0)]
        async_threshold: f64,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct QueryArgs {
    /// AGENT:VERTEX or AGENT:VERTEX:T0-T1.
    #[arg(long, value_name = "SPEC")]
    why_wait: Option<String>,
    #[arg(long)]
    why_infeasible: bool,
    #[arg(long, value_name = "PLAN")]
    check_plan: Option<PathBuf>,
    #[arg(long, value_name = "PLAN")]
    why_nonoptimal: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    /// Revise, then replan everyone if revising fails.
    Fallback,
    /// Revise only.
    ReviseOnly,
}

#[derive(Debug)]
enum Failure {
    Io(String),
    Usage(String),
    Schema(FormatError),
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Schema(e)
    }
}

struct Output<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path, common: &Common) -> Result<Instance, Failure> {
    let bytes = read(path)?;
    match &common.from_ascii {
        Some(map) => {
            let text = String::from_utf8(read(map)?).map_err(|e| Failure::Io(format!("{}: {e}", map.display())))?;
            Ok(parse_instance_on_grid(&bytes, grid_from_ascii(&text)?)?)
        }
        None => Ok(parse_instance(&bytes)?),
    }
}

fn load_plan(path: &Path, instance: &Instance) -> Result<Plan, Failure> {
    Ok(parse_plan(&read(path)?, instance.graph())?)
}

fn budget(common: &Common) -> Result<Budget, Failure> {
    if !(common.timeout.is_finite() && common.timeout > 0.0) {
        return Err(Failure::Usage("--timeout must be a positive number of seconds".into()));
    }
    Ok(Budget::with_timeout(Duration::from_secs_f64(common.timeout)))
}

fn parse_wait_spec(spec: &str) -> Result<(AgentId, VertexId, TimeWindow), Failure> {
    let bad = || Failure::Usage(format!("--why-wait expects AGENT:VERTEX[:T0-T1], got `{spec}`"));
    let mut parts = spec.split(':');
    let agent = parts.next().filter(|a| !a.is_empty()).ok_or_else(bad)?;
    let vertex = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    let window = match parts.next() {
        None => TimeWindow::ALL,
        Some(w) => {
            let (a, b) = w.split_once('-').ok_or_else(bad)?;
            let from: u32 = a.parse().map_err(|_| bad())?;
            let to: u32 = b.parse().map_err(|_| bad())?;
            if to < from {
                return Err(bad());
            }
            TimeWindow::new(from, to)
        }
    };
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((AgentId::from(agent), vertex, window))
}

fn state_cell(s: &AgentState) -> String {
    match s {
        AgentState::AtVertex(v) => v.to_string(),
        AgentState::InTransit { from, to, step } => format!("{from}>{to}:{step}"),
        AgentState::Done => "-".to_owned(),
    }
}

/// One line per agent listing its state at each time step.
pub fn render_plan(plan: &Plan) -> String {
    let mut out = String::new();
    let width = plan.agents.keys().map(|id| id.as_str().len()).max().unwrap_or(0);
    for (id, a) in &plan.agents {
        let mut cells: Vec<String> = (0..a.release).map(|_| ".".to_owned()).collect();
        cells.extend(a.trajectory.iter().map(state_cell));
        out.push_str(&format!("{:width$}  {}\n", id.as_str(), cells.join(" ")));
        let levels: Vec<String> = a.battery.iter().map(u32::to_string).collect();
        out.push_str(&format!("{:width$}  battery {}\n", "", levels.join(" ")));
    }
    out
}

fn render_explanation(e: &Explanation) -> String {
    let mut text = format!("{}\n", e.message());
    match e {
        Explanation::AlternativePlan { plan, .. } | Explanation::DelayedItinerary { plan, .. } => {
            text.push_str(&render_plan(plan));
        }
        Explanation::RelaxationSuggestion { witness_plan, .. } => text.push_str(&render_plan(witness_plan)),
        Explanation::InfeasibilityReport { violations, .. } => {
            for v in violations {
                text.push_str(&format!("  {}\n", v.describe()));
            }
        }
        _ => {}
    }
    text
}

fn emit(o: &mut Output, pretty: bool, json: &Value, human: impl FnOnce() -> String) -> Result<(), Failure> {
    let text = if pretty { human() } else { to_canonical_json(json) };
    o.out
        .write_all(text.as_bytes())
        .map_err(|e| Failure::Io(format!("stdout: {e}")))
}

fn strip_timings(mut v: Value, keep: bool) -> Value {
    if !keep {
        if let Some(stats) = v.get_mut("stats").and_then(Value::as_object_mut) {
            stats.remove("wall_ms");
        }
    }
    v
}

fn cmd_solve(
    o: &mut Output,
    instance: &Path,
    makespan: Option<u32>,
    out: Option<&Path>,
    common: &Common,
) -> Result<i32, Failure> {
    let inst = load_instance(instance, common)?;
    let budget = budget(common)?;
    let started = Instant::now();
    let mut result = match makespan {
        Some(h) => match solve_decision(&inst, h, &Relaxation::none(), &budget) {
            Ok(r) => r,
            Err(e @ SolverError::HorizonAboveLimit { .. }) => return Err(Failure::Usage(e.to_string())),
            Err(SolverError::Timeout) => return Ok(EXIT_TIMEOUT),
            Err(e) => return Err(Failure::Usage(e.to_string())),
        },
        None => solve_optimal(&inst, &Relaxation::none(), &budget),
    };
    if common.timings {
        result.stats.wall_ms = Some(started.elapsed().as_millis() as u64);
    }
    if let (Some(path), Some(plan)) = (out, result.plan()) {
        std::fs::write(path, crate::io::serialize_plan(plan))
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    }
    let body = strip_timings(solve_json(&result), common.timings);
    emit(o, common.pretty, &body, || match result.plan() {
        Some(plan) => {
            let v = plan.objective_values();
            format!(
                "sat: makespan {}, total time {}, charges {}\n{}",
                v.makespan,
                v.total_time,
                v.charges,
                render_plan(plan)
            )
        }
        None if result.outcome == SolveOutcome::Unsat => "unsat\n".to_owned(),
        None => "timeout\n".to_owned(),
    })?;
    Ok(match result.outcome {
        SolveOutcome::Sat(_) => EXIT_OK,
        SolveOutcome::Unsat => EXIT_NEGATIVE,
        SolveOutcome::Timeout => EXIT_TIMEOUT,
    })
}

fn cmd_validate(o: &mut Output, instance: &Path, plan: &Path, common: &Common) -> Result<i32, Failure> {
    let inst = load_instance(instance, common)?;
    let plan = load_plan(plan, &inst)?;
    let report = validate(&inst, &plan);
    let categories = categorize(&report);
    let mut body = serde_json::to_value(&report).expect("reports serialize");
    body["categories"] = json!(categories);
    emit(o, common.pretty, &body, || {
        let mut text = if report.feasible {
            "feasible\n".to_owned()
        } else {
            format!("infeasible due to {}\n", categories.join(", "))
        };
        for v in &report.violations {
            text.push_str(&format!("  {}\n", v.describe()));
        }
        text
    })?;
    Ok(if report.feasible { EXIT_OK } else { EXIT_NEGATIVE })
}

fn explain_error(o: &mut Output, pretty: bool, e: &ExplainError) -> Result<i32, Failure> {
    let code = match e {
        ExplainError::Timeout | ExplainError::Solver(SolverError::Timeout) => EXIT_TIMEOUT,
        _ => EXIT_NEGATIVE,
    };
    let mut body = json!({ "error": { "message": e.to_string() } });
    if let ExplainError::PlanInfeasible(report) = e {
        body["error"]["detail"] = serde_json::to_value(report).expect("reports serialize");
    }
    emit(o, pretty, &body, || format!("{e}\n"))?;
    Ok(code)
}

fn cmd_explain(
    o: &mut Output,
    instance: &Path,
    q: &QueryArgs,
    plan: Option<&Path>,
    delta_max: u32,
    common: &Common,
) -> Result<i32, Failure> {
    let inst = load_instance(instance, common)?;
    let options = ExplainOptions {
        delta_max,
        budget: budget(common)?,
    };
    let mut given = None;
    let query = if let Some(spec) = &q.why_wait {
        let (agent, vertex, window) = parse_wait_spec(spec)?;
        let path = plan.ok_or_else(|| Failure::Usage("--why-wait needs --plan".into()))?;
        given = Some(load_plan(path, &inst)?);
        Query::WhyWait { agent, vertex, window }
    } else if q.why_infeasible {
        Query::WhyInfeasible
    } else if let Some(p) = &q.check_plan {
        Query::CheckModifiedPlan {
            plan: load_plan(p, &inst)?,
        }
    } else if let Some(p) = &q.why_nonoptimal {
        Query::WhyNonoptimal {
            plan: load_plan(p, &inst)?,
        }
    } else {
        return Err(Failure::Usage("no query given".into()));
    };
    let list = match answer(&inst, given.as_ref(), &query, &options) {
        Ok(list) => list,
        Err(e) => return explain_error(o, common.pretty, &e),
    };
    if matches!(query, Query::WhyInfeasible) {
        let body = serde_json::to_value(&list).expect("explanations serialize");
        emit(o, common.pretty, &body, || {
            if list.is_empty() {
                format!("{}\n", templates::NO_SINGLE_RELAXATION)
            } else {
                list.iter().map(render_explanation).collect()
            }
        })?;
    } else {
        let e = &list[0];
        let body = serde_json::to_value(e).expect("explanations serialize");
        emit(o, common.pretty, &body, || render_explanation(e))?;
    }
    Ok(EXIT_OK)
}

fn dynamic_code(e: &DynamicError) -> i32 {
    match e {
        DynamicError::Timeout => EXIT_TIMEOUT,
        _ => EXIT_NEGATIVE,
    }
}

fn cmd_dynamic(
    o: &mut Output,
    instance: &Path,
    events: &Path,
    plan: Option<&Path>,
    policy: DynamicPolicy,
    common: &Common,
) -> Result<i32, Failure> {
    let inst = load_instance(instance, common)?;
    let events: Vec<Event> = from_json(&read(events)?)?;
    let budget = budget(common)?;
    let initial = match plan {
        Some(p) => load_plan(p, &inst)?,
        None => match solve_optimal(&inst, &Relaxation::none(), &budget).outcome {
            SolveOutcome::Sat(p) => p,
            SolveOutcome::Unsat => {
                emit(
                    o,
                    common.pretty,
                    &json!({ "error": { "message": "the instance has no solution" } }),
                    || "the instance has no solution\n".to_owned(),
                )?;
                return Ok(EXIT_NEGATIVE);
            }
            SolveOutcome::Timeout => return Ok(EXIT_TIMEOUT),
        },
    };
    let mut state = match ExecutionState::new(inst, initial.clone()) {
        Ok(s) => s,
        Err(e) => {
            let body = json!({ "error": { "message": e.to_string() } });
            emit(o, common.pretty, &body, || format!("{e}\n"))?;
            return Ok(EXIT_NEGATIVE);
        }
    };

    let mut steps = Vec::new();
    let mut human = format!("initial makespan {}\n{}", initial.makespan, render_plan(&initial));
    let mut code = EXIT_OK;
    let mut i = 0;
    while i < events.len() {
        let time = events[i].time;
        let batch: Vec<&Event> = events[i..].iter().take_while(|e| e.time == time).collect();
        i += batch.len();
        let outcome = batch
            .iter()
            .try_fold(state.clone(), |s, e| s.apply_event(e))
            .and_then(|next| resolve_dynamic(&next, &policy, &budget).map(|r| (next, r)));
        match outcome {
            Ok((mut next, mut result)) => {
                next.commit(&result);
                if !common.timings {
                    result.stats.wall_ms = None;
                }
                human.push_str(&format!(
                    "t={time}: {} event(s), {} at horizon {}\n{}",
                    batch.len(),
                    serde_json::to_value(result.method)
                        .expect("methods serialize")
                        .as_str()
                        .unwrap_or_default(),
                    result.horizon_used,
                    render_plan(&result.plan)
                ));
                let mut step = serde_json::to_value(&result).expect("results serialize");
                step["time"] = json!(time);
                step["events"] = json!(batch.len());
                steps.push(step);
                state = next;
            }
            Err(e) => {
                human.push_str(&format!("t={time}: {e}\n"));
                steps.push(json!({ "time": time, "events": batch.len(), "error": { "message": e.to_string() } }));
                code = dynamic_code(&e);
                break;
            }
        }
    }
    let body = json!({
        "initial": initial,
        "steps": steps,
        "final": state.active_plan(),
    });
    emit(o, common.pretty, &body, || human)?;
    Ok(code)
}

fn cmd_serve(
    port: u16,
    bind: IpAddr,
    snapshot_dir: Option<PathBuf>,
    cors_origin: Option<String>,
    threshold: f64,
) -> Result<i32, Failure> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Failure::Usage(
            "--async-threshold must be a non-negative number of seconds".into(),
        ));
    }
    if let Some(dir) = &snapshot_dir {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    }
    let config = ServiceConfig {
        snapshot_dir,
        async_threshold: Duration::from_secs_f64(threshold),
        cors_origin,
        ..ServiceConfig::default()
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Io(e.to_string()))?;
    runtime
        .block_on(crate::service::serve(SocketAddr::new(bind, port), config))
        .map_err(|e| Failure::Io(e.to_string()))?;
    Ok(EXIT_OK)
}

/// Runs the CLI with `argv` (including the program name), writing results
/// to `out` and diagnostics to `err`. Returns the process exit code.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let mut o = Output { out, err };
    let result = match &cli.command {
        Command::Solve {
            instance,
            makespan,
            out,
            common,
        } => cmd_solve(&mut o, instance, *makespan, out.as_deref(), common),
        Command::Validate { instance, plan, common } => cmd_validate(&mut o, instance, plan, common),
        Command::Explain {
            instance,
            query,
            plan,
            delta_max,
            common,
        } => cmd_explain(&mut o, instance, query, plan.as_deref(), *delta_max, common),
        Command::Dynamic {
            instance,
            events,
            plan,
            policy,
            delta_max,
            common,
        } => {
            let policy = DynamicPolicy {
                delta_max: *delta_max,
                fallback_replan: *policy == PolicyArg::Fallback,
            };
            cmd_dynamic(&mut o, instance, events, plan.as_deref(), policy, common)
        }
        Command::Serve {
            port,
            bind,
            snapshot_dir,
            cors_origin,
            async_threshold,
        } => cmd_serve(
            *port,
            *bind,
            snapshot_dir.clone(),
            cors_origin.clone(),
            *async_threshold,
        ),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let (code, message) = match f {
                Failure::Io(m) => (EXIT_IO, m),
                Failure::Usage(m) => (EXIT_USAGE, m),
                Failure::Schema(e) => (EXIT_SCHEMA, e.to_string()),
            };
            let _ = writeln!(o.err, "error: {message}");
            code
        }
    }
}
