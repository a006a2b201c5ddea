//! Optimal bounded-horizon solving.
//!
//! [`solve_optimal`] deepens the horizon from a lower bound until the joint
//! search finds a plan; at that horizon the remaining objectives are
//! minimized lexicographically and ties are broken deterministically
//! (moves to smaller vertices before waits before charges, agents in
//! instance order). [`brute_force_optimal`] and [`oracle_accepts`] are an
//! independent implementation kept for cross-checking.

mod automaton;
mod oracle;
mod relax;
mod search;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::model::{AgentId, AgentPlan, AgentState, Instance, Plan, VertexId};

pub(crate) use automaton::{AgentModel, Loc, StartState};
pub use oracle::{brute_force_from, brute_force_optimal, oracle_accepts, DEFAULT_ORACLE_CAP};
pub use relax::{ForbiddenWait, Relaxation, TimeWindow};
pub(crate) use search::{solve_at_horizon, Counters, Track, Weights, ABSENT};

/// Wall-clock deadline and cooperative cancellation for a solve.
#[derive(Debug, Clone, Default)]
pub struct Budget {
    deadline: Option<Instant>,
    cancel: Option<Arc<AtomicBool>>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn with_timeout(timeout: Duration) -> Self {
        Self {
            deadline: Instant::now().checked_add(timeout),
            cancel: None,
        }
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }

    pub fn expired(&self) -> bool {
        self.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed))
            || self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Plan),
    Unsat,
    Timeout,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub horizons: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_completed_horizon: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub outcome: SolveOutcome,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn plan(&self) -> Option<&Plan> {
        match &self.outcome {
            SolveOutcome::Sat(p) => Some(p),
            _ => None,
        }
    }

    pub fn into_plan(self) -> Option<Plan> {
        match self.outcome {
            SolveOutcome::Sat(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_sat(&self) -> bool {
        matches!(self.outcome, SolveOutcome::Sat(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("horizon {horizon} exceeds the limit {limit}")]
    HorizonAboveLimit { horizon: u32, limit: u32 },
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("joint state space exceeds the cap of {cap} states")]
    CapExceeded { cap: usize },
    #[error("solver budget exhausted")]
    Timeout,
}

/// Snapshot of one agent mid-execution, used to start a search from a
/// state other than the instance's start vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSnapshot {
    pub state: AgentState,
    pub visited: BTreeSet<VertexId>,
    pub battery: u32,
}

pub(crate) fn fresh_models(instance: &Instance, relax: &Relaxation) -> Vec<AgentModel> {
    instance
        .agents()
        .iter()
        .map(|spec| AgentModel::new(instance, spec, relax, StartState::fresh(spec), None))
        .collect()
}

/// Lower bound from the per-agent heuristics, or `None` when some agent
/// cannot complete at all.
pub(crate) fn heuristic_bound(models: &[AgentModel], t0: u32) -> Option<u32> {
    let mut bound = t0;
    for m in models {
        if !m.solvable() {
            return None;
        }
        bound = bound.max(m.release.max(t0) + m.h(m.initial));
    }
    Some(bound)
}

pub(crate) enum Deepened {
    Found(u32, Vec<Track>),
    Exhausted,
    Interrupted,
}

/// Tries each horizon in `from..=to` in turn.
#[allow(clippy::too_many_arguments)]
pub(crate) fn deepen(
    models: &[AgentModel],
    t0: u32,
    from: u32,
    to: u32,
    weights: Weights,
    collisions: bool,
    budget: &Budget,
    stats: &mut SolveStats,
) -> Deepened {
    let mut counters = Counters::default();
    let mut result = Deepened::Exhausted;
    for h in from..=to {
        if budget.expired() {
            result = Deepened::Interrupted;
            break;
        }
        stats.horizons.push(h);
        match solve_at_horizon(models, t0, h, weights, collisions, budget, &mut counters) {
            Ok(Some(tracks)) => {
                stats.last_completed_horizon = Some(h);
                result = Deepened::Found(h, tracks);
                break;
            }
            Ok(None) => stats.last_completed_horizon = Some(h),
            Err(_) => {
                result = Deepened::Interrupted;
                break;
            }
        }
    }
    stats.nodes += counters.nodes;
    result
}

/// Renders a search track as plan states from `t0`, skipping the time
/// before the agent is released. The first done state renders as the goal
/// vertex only when `render_completion` is set.
pub(crate) fn render_track(model: &AgentModel, track: &Track, render_completion: bool) -> Vec<AgentState> {
    let mut out = Vec::with_capacity(track.states.len());
    let mut finished = !render_completion;
    for &l in &track.states {
        if l == ABSENT {
            continue;
        }
        if model.is_done(l) {
            if finished {
                out.push(AgentState::Done);
            } else {
                out.push(AgentState::AtVertex(model.goal));
                finished = true;
            }
        } else {
            out.push(model.loc(l).to_state());
        }
    }
    out
}

/// Battery levels from `initial` through the last non-`Done` entry of
/// `trajectory`, which starts at absolute time `first`.
pub(crate) fn battery_trace(
    trajectory: &[AgentState],
    first: u32,
    initial: u32,
    charges: &BTreeSet<u32>,
    battery_max: u32,
) -> Vec<u32> {
    let active = trajectory.iter().rposition(|s| *s != AgentState::Done).unwrap_or(0);
    let mut levels = Vec::with_capacity(active + 1);
    let mut level = initial;
    levels.push(level);
    for k in 0..active {
        level = crate::model::battery_step(level, charges.contains(&(first + k as u32)), battery_max);
        levels.push(level);
    }
    levels
}

fn plan_from_tracks(instance: &Instance, models: &[AgentModel], tracks: &[Track]) -> Plan {
    let len = tracks.first().map_or(1, |t| t.states.len());
    let mut plan = Plan {
        makespan: len as u32 - 1,
        ..Plan::default()
    };
    for ((spec, model), track) in instance.agents().iter().zip(models).zip(tracks) {
        let trajectory = render_track(model, track, true);
        let charge_times: BTreeSet<u32> = track.charges.iter().copied().collect();
        let battery = battery_trace(
            &trajectory,
            spec.release,
            spec.battery,
            &charge_times,
            instance.battery_max(),
        );
        plan.agents.insert(
            spec.id.clone(),
            AgentPlan {
                release: spec.release,
                trajectory,
                battery,
                charge_times,
            },
        );
    }
    plan
}

fn debug_check(instance: &Instance, plan: &Plan, relax: &Relaxation) {
    if cfg!(debug_assertions) {
        let report = crate::validate::validate_relaxed(instance, plan, relax);
        debug_assert!(
            report.feasible,
            "solver produced an invalid plan: {:?}",
            report.violations
        );
    }
}

fn finish(
    instance: &Instance,
    relax: &Relaxation,
    models: &[AgentModel],
    result: Deepened,
    stats: SolveStats,
) -> SolveResult {
    let outcome = match result {
        Deepened::Found(_, tracks) => {
            let plan = plan_from_tracks(instance, models, &tracks);
            debug_check(instance, &plan, relax);
            SolveOutcome::Sat(plan)
        }
        Deepened::Exhausted => SolveOutcome::Unsat,
        Deepened::Interrupted => SolveOutcome::Timeout,
    };
    SolveResult { outcome, stats }
}

/// Shortest completion for one agent alone. The returned plan contains only
/// that agent.
pub fn single_agent_optimal(
    instance: &Instance,
    agent: &AgentId,
    relax: &Relaxation,
    budget: &Budget,
) -> Result<SolveResult, SolverError> {
    let spec = instance
        .agent(agent)
        .ok_or_else(|| SolverError::UnknownAgent(agent.to_string()))?;
    let alone = Instance::new(
        instance.graph().clone(),
        vec![spec.clone()],
        instance.battery_max(),
        instance.makespan_bound(),
        instance.objectives().to_vec(),
    )
    .expect("a sub-instance of a valid instance is valid");
    Ok(solve_optimal(&alone, relax, budget))
}

/// Largest single-agent optimum; `Ok(None)` when some agent cannot complete
/// within the horizon limit.
pub fn makespan_lower_bound(
    instance: &Instance,
    relax: &Relaxation,
    budget: &Budget,
) -> Result<Option<u32>, SolverError> {
    let mut bound = 0;
    for spec in instance.agents() {
        let result = single_agent_optimal(instance, &spec.id, relax, budget)?;
        match result.outcome {
            SolveOutcome::Sat(plan) => bound = bound.max(plan.makespan),
            SolveOutcome::Unsat => return Ok(None),
            SolveOutcome::Timeout => return Err(SolverError::Timeout),
        }
    }
    Ok(Some(bound))
}

/// Is there a plan with every completion at or before `horizon`? A Sat
/// answer carries the plan that is lexicographically best on the secondary
/// objectives among those.
pub fn solve_decision(
    instance: &Instance,
    horizon: u32,
    relax: &Relaxation,
    budget: &Budget,
) -> Result<SolveResult, SolverError> {
    let limit = relax.horizon_limit(instance);
    if horizon > limit {
        return Err(SolverError::HorizonAboveLimit { horizon, limit });
    }
    let models = fresh_models(instance, relax);
    let mut stats = SolveStats::default();
    let result = match heuristic_bound(&models, 0) {
        Some(lb) if lb <= horizon => deepen(
            &models,
            0,
            horizon,
            horizon,
            Weights::new(instance.objectives()),
            !relax.ignore_agent_collisions,
            budget,
            &mut stats,
        ),
        _ => Deepened::Exhausted,
    };
    Ok(finish(instance, relax, &models, result, stats))
}

/// Lexicographically optimal plan within the horizon limit.
pub fn solve_optimal(instance: &Instance, relax: &Relaxation, budget: &Budget) -> SolveResult {
    let models = fresh_models(instance, relax);
    let limit = relax.horizon_limit(instance);
    let mut stats = SolveStats::default();
    let result = match heuristic_bound(&models, 0) {
        Some(lb) if lb <= limit => deepen(
            &models,
            0,
            lb,
            limit,
            Weights::new(instance.objectives()),
            !relax.ignore_agent_collisions,
            budget,
            &mut stats,
        ),
        _ => Deepened::Exhausted,
    };
    finish(instance, relax, &models, result, stats)
}
