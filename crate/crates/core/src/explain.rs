//! Answers to wait, infeasibility, plan-check and optimality queries.
//!
//! Every answer carries structured data plus a sentence rendered from the
//! fixed templates in [`templates`], so clients can either match on fields
//! or display the message.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AgentId, AgentState, Instance, Plan, VertexId, Violation, ViolationKind};
use crate::solver::{
    battery_trace, solve_decision, solve_optimal, Budget, Relaxation, SolveOutcome, SolveResult, SolverError,
    TimeWindow,
};
use crate::validate::{categorize, validate, validate_relaxed, ValidationReport};

pub mod templates;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Query {
    WhyWait {
        agent: AgentId,
        vertex: VertexId,
        #[serde(default)]
        window: TimeWindow,
    },
    WhyInfeasible,
    CheckModifiedPlan {
        plan: Plan,
    },
    WhyNonoptimal {
        plan: Plan,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Explanation {
    AlternativePlan {
        plan: Plan,
        message: String,
    },
    DelayedItinerary {
        plan: Plan,
        delay: u32,
        message: String,
    },
    CounterfactualConflict {
        violation: Violation,
        message: String,
    },
    RelaxationSuggestion {
        relaxation: Relaxation,
        witness_plan: Plan,
        first_violation_of_witness_under_original: Option<Violation>,
        message: String,
    },
    OptimalityGap {
        time_delta: i64,
        charge_delta: i64,
        optimal_plan: Plan,
        message: String,
    },
    FeasibilityConfirmed {
        better_plans: Vec<Plan>,
        message: String,
    },
    InfeasibilityReport {
        categories: Vec<String>,
        violations: Vec<Violation>,
        message: String,
    },
}

impl Explanation {
    pub fn message(&self) -> &str {
        match self {
            Explanation::AlternativePlan { message, .. }
            | Explanation::DelayedItinerary { message, .. }
            | Explanation::CounterfactualConflict { message, .. }
            | Explanation::RelaxationSuggestion { message, .. }
            | Explanation::OptimalityGap { message, .. }
            | Explanation::FeasibilityConfirmed { message, .. }
            | Explanation::InfeasibilityReport { message, .. } => message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExplainError {
    #[error("agent `{agent}` never waits at vertex {vertex} in the given window")]
    NoSuchWait {
        agent: AgentId,
        vertex: VertexId,
        window: TimeWindow,
    },
    #[error("the instance has a solution")]
    InstanceIsFeasible,
    #[error("the plan is not feasible")]
    PlanInfeasible(ValidationReport),
    #[error("a wait query needs a plan")]
    MissingPlan,
    #[error("unknown agent `{0}`")]
    UnknownAgent(AgentId),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("no counterfactual conflict found")]
    Inconclusive,
    #[error("solver budget exhausted")]
    Timeout,
    #[error("{0}")]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone)]
pub struct ExplainOptions {
    /// Largest extra horizon tried by the infeasibility probe.
    pub delta_max: u32,
    pub budget: Budget,
}

impl ExplainOptions {
    pub fn new(budget: Budget) -> Self {
        Self { delta_max: 3, budget }
    }
}

impl Default for ExplainOptions {
    fn default() -> Self {
        Self::new(Budget::unlimited())
    }
}

fn sat(result: SolveResult) -> Result<Option<Plan>, ExplainError> {
    match result.outcome {
        SolveOutcome::Sat(p) => Ok(Some(p)),
        SolveOutcome::Unsat => Ok(None),
        SolveOutcome::Timeout => Err(ExplainError::Timeout),
    }
}

fn require_feasible(instance: &Instance, plan: &Plan) -> Result<(), ExplainError> {
    let report = validate(instance, plan);
    if report.feasible {
        Ok(())
    } else {
        Err(ExplainError::PlanInfeasible(report))
    }
}

/// Dispatches a query. Only [`Query::WhyInfeasible`] can produce more than
/// one explanation; an empty list means no single relaxation helps.
pub fn answer(
    instance: &Instance,
    plan: Option<&Plan>,
    query: &Query,
    options: &ExplainOptions,
) -> Result<Vec<Explanation>, ExplainError> {
    match query {
        Query::WhyWait { agent, vertex, window } => {
            let plan = plan.ok_or(ExplainError::MissingPlan)?;
            why_wait(instance, plan, agent, *vertex, *window, options).map(|e| vec![e])
        }
        Query::WhyInfeasible => why_infeasible(instance, options),
        Query::CheckModifiedPlan { plan } => check_modified_plan(instance, plan, options).map(|e| vec![e]),
        Query::WhyNonoptimal { plan } => why_nonoptimal(instance, plan, options).map(|e| vec![e]),
    }
}

/// Why does `agent` wait at `vertex`? Tries, in order: an alternative plan
/// at the optimal makespan without that wait, a later plan without it, and
/// finally the conflict the agent runs into if it simply skips the wait.
pub fn why_wait(
    instance: &Instance,
    plan: &Plan,
    agent: &AgentId,
    vertex: VertexId,
    window: TimeWindow,
    options: &ExplainOptions,
) -> Result<Explanation, ExplainError> {
    if instance.agent(agent).is_none() {
        return Err(ExplainError::UnknownAgent(agent.clone()));
    }
    if !instance.graph().contains(vertex) {
        return Err(ExplainError::UnknownVertex(vertex));
    }
    require_feasible(instance, plan)?;
    let waits: Vec<u32> = plan
        .agents
        .get(agent)
        .map(|a| a.waits_at(vertex))
        .unwrap_or_default()
        .into_iter()
        .filter(|&t| window.covers_step(t))
        .collect();
    if waits.is_empty() {
        return Err(ExplainError::NoSuchWait {
            agent: agent.clone(),
            vertex,
            window,
        });
    }

    let optimum = sat(solve_optimal(instance, &Relaxation::none(), &options.budget))?
        .expect("a feasible plan exists, so the instance is solvable");
    let m_star = optimum.objective_values().makespan;
    let relax = Relaxation::forbidding_wait(agent.clone(), vertex, window);

    if let Some(alt) = sat(solve_decision(instance, m_star, &relax, &options.budget)?)? {
        let message = templates::alternative_plan(agent, vertex, m_star);
        return Ok(Explanation::AlternativePlan { plan: alt, message });
    }
    if let Some(later) = sat(solve_optimal(instance, &relax, &options.budget))? {
        let m = later.objective_values().makespan;
        let delay = m - m_star;
        let message = templates::delayed_itinerary(agent, vertex, delay, m);
        return Ok(Explanation::DelayedItinerary {
            plan: later,
            delay,
            message,
        });
    }

    let shifted = skip_waits(instance, plan, agent, &waits.into_iter().collect());
    let report = validate(instance, &shifted);
    let violation = report
        .first_inter_agent()
        .or_else(|| report.first())
        .cloned()
        .ok_or(ExplainError::Inconclusive)?;
    let message = templates::counterfactual_conflict(agent, vertex, &violation);
    Ok(Explanation::CounterfactualConflict { violation, message })
}

/// `plan` with the given wait steps of `agent` removed: the rest of its
/// trajectory moves earlier and the freed steps are spent at the goal.
pub(crate) fn skip_waits(instance: &Instance, plan: &Plan, agent: &AgentId, waits: &BTreeSet<u32>) -> Plan {
    let mut out = plan.clone();
    let spec = instance.agent(agent).expect("checked by caller");
    let a = out.agents.get_mut(agent).expect("checked by caller");
    let len = a.trajectory.len();
    let release = a.release;
    let mut trajectory = Vec::with_capacity(len);
    let mut charges = BTreeSet::new();
    let mut removed = 0u32;
    for (k, state) in a.trajectory.iter().enumerate() {
        let t = release + k as u32;
        // Dropping the state at t + 1 removes the wait step t -> t + 1.
        if t > release && waits.contains(&(t - 1)) {
            removed += 1;
            continue;
        }
        trajectory.push(*state);
        if a.charge_times.contains(&t) {
            charges.insert(t - removed);
        }
    }
    trajectory.resize(len, AgentState::Done);
    a.battery = battery_trace(&trajectory, release, spec.battery, &charges, instance.battery_max());
    a.trajectory = trajectory;
    a.charge_times = charges;
    out
}

/// Probes which single constraint class makes the instance unsolvable:
/// agent collisions, each obstacle on its own, the makespan bound, and the
/// battery limit. Results come back in that order.
pub fn why_infeasible(instance: &Instance, options: &ExplainOptions) -> Result<Vec<Explanation>, ExplainError> {
    let budget = &options.budget;
    if sat(solve_optimal(instance, &Relaxation::none(), budget))?.is_some() {
        return Err(ExplainError::InstanceIsFeasible);
    }
    let mut out = Vec::new();

    if let Some(w) = sat(solve_optimal(instance, &Relaxation::ignoring_collisions(), budget))? {
        let first = validate(instance, &w).first_inter_agent().cloned();
        let message = match &first {
            Some(v) => templates::agents_collide(v),
            None => templates::agents_collide_somewhere(),
        };
        out.push(suggestion(
            instance,
            Relaxation::ignoring_collisions(),
            w,
            first,
            message,
        ));
    }
    for &o in instance.graph().obstacles() {
        let relax = Relaxation::without_obstacle(o);
        if let Some(w) = sat(solve_optimal(instance, &relax, budget))? {
            let first = validate(instance, &w).first().cloned();
            let hit = first.as_ref().filter(|v| v.kind == ViolationKind::ObstacleCollision);
            let message = templates::remove_obstacle(o, hit);
            out.push(suggestion(instance, relax, w, first, message));
        }
    }
    if options.delta_max > 0 {
        let widest = Relaxation::with_extra_horizon(options.delta_max);
        if let Some(w) = sat(solve_optimal(instance, &widest, budget))? {
            // Makespan is minimized first, so this is the smallest extension that works.
            let k = w.objective_values().makespan - instance.makespan_bound();
            let first = validate(instance, &w).first().cloned();
            out.push(suggestion(
                instance,
                Relaxation::with_extra_horizon(k),
                w,
                first,
                templates::more_time(k),
            ));
        }
    }
    let relax = Relaxation::with_unlimited_battery();
    if let Some(w) = sat(solve_optimal(instance, &relax, budget))? {
        let first = validate(instance, &w).first().cloned();
        out.push(suggestion(instance, relax, w, first, templates::more_charging()));
    }
    Ok(out)
}

fn suggestion(
    instance: &Instance,
    relaxation: Relaxation,
    witness_plan: Plan,
    first: Option<Violation>,
    message: String,
) -> Explanation {
    debug_assert!(validate_relaxed(instance, &witness_plan, &relaxation).feasible);
    Explanation::RelaxationSuggestion {
        relaxation,
        witness_plan,
        first_violation_of_witness_under_original: first,
        message,
    }
}

/// Validates an edited plan; when it is feasible, also reports whether an
/// optimal plan does strictly better.
pub fn check_modified_plan(
    instance: &Instance,
    plan: &Plan,
    options: &ExplainOptions,
) -> Result<Explanation, ExplainError> {
    let report = validate(instance, plan);
    if !report.feasible {
        let categories: Vec<String> = categorize(&report).into_iter().map(str::to_owned).collect();
        let message = templates::plan_infeasible(&categories);
        return Ok(Explanation::InfeasibilityReport {
            categories,
            violations: report.violations,
            message,
        });
    }
    let optimum = sat(solve_optimal(instance, &Relaxation::none(), &options.budget))?
        .expect("a feasible plan exists, so the instance is solvable");
    let order = instance.objectives();
    let better = optimum.objective_values().key(order) < plan.objective_values().key(order);
    let message = templates::plan_feasible(better);
    Ok(Explanation::FeasibilityConfirmed {
        better_plans: if better { vec![optimum] } else { Vec::new() },
        message,
    })
}

/// How far a feasible plan is from the lexicographic optimum, in makespan
/// and in charge actions.
pub fn why_nonoptimal(instance: &Instance, plan: &Plan, options: &ExplainOptions) -> Result<Explanation, ExplainError> {
    require_feasible(instance, plan)?;
    let optimum = sat(solve_optimal(instance, &Relaxation::none(), &options.budget))?
        .expect("a feasible plan exists, so the instance is solvable");
    let (mine, best) = (plan.objective_values(), optimum.objective_values());
    let time_delta = i64::from(mine.makespan) - i64::from(best.makespan);
    let charge_delta = i64::from(mine.charges) - i64::from(best.charges);
    let message = templates::optimality_gap(time_delta, charge_delta);
    Ok(Explanation::OptimalityGap {
        time_delta,
        charge_delta,
        optimal_plan: optimum,
        message,
    })
}
