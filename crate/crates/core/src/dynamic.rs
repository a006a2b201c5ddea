//! Replanning for a plan that is already being executed.
//!
//! Events (agents joining or leaving, obstacles appearing, disappearing or
//! moving) are applied at the current execution time. A resolve first tries
//! to keep every surviving agent on its remaining route, changing only when
//! it waits and charges while routing newcomers freely, at the current
//! makespan and a few steps beyond. If that fails it can fall back to
//! replanning everyone from their current states.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AgentId, AgentPlan, AgentSpec, AgentState, Instance, Location, ModelError, Plan, VertexId, Violation, ViolationKind,
};
use crate::solver::{
    battery_trace, deepen, heuristic_bound, render_track, AgentModel, AgentSnapshot, Budget, Deepened, Loc, Relaxation,
    SolveStats, StartState, Weights,
};
use crate::validate::{validate, validate_with, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub time: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    AgentJoin { agent: AgentSpec },
    AgentLeave { agent: AgentId },
    ObstacleAdd { vertex: VertexId },
    ObstacleRemove { vertex: VertexId },
    ObstacleMove { from: VertexId, to: VertexId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DynamicError {
    #[error("event at time step {time} is before the current time step {now}")]
    EventInPast { time: u32, now: u32 },
    #[error("pending events at time step {now} must be resolved before advancing to {time}")]
    Stale { time: u32, now: u32 },
    #[error("{}", .0.describe())]
    Occupied(Violation),
    #[error("unknown agent `{0}`")]
    UnknownAgent(AgentId),
    #[error("agent `{0}` is in transit and cannot leave")]
    InTransit(AgentId),
    #[error("vertex {0} is not an obstacle")]
    NotAnObstacle(VertexId),
    #[error("vertex {0} is already an obstacle")]
    AlreadyAnObstacle(VertexId),
    #[error("horizon {horizon} is before the current time step {now}")]
    HorizonInPast { horizon: u32, now: u32 },
    #[error("the initial plan is not feasible")]
    InvalidPlan(ValidationReport),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("no plan found within the makespan bound")]
    Unsat,
    #[error("solver budget exhausted")]
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicPolicy {
    /// How far beyond the current makespan revise-and-augment may go.
    pub delta_max: u32,
    /// Replan every agent from its current state when revising fails.
    pub fallback_replan: bool,
}

impl Default for DynamicPolicy {
    fn default() -> Self {
        Self {
            delta_max: 3,
            fallback_replan: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ReviseAugment,
    Replan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DynamicResult {
    pub plan: Plan,
    pub method: Method,
    pub horizon_used: u32,
    pub stats: SolveStats,
}

/// A plan being executed, the instance as modified by events so far, and
/// the current time step. Everything up to `t_now` is committed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionState {
    instance: Instance,
    plan: Plan,
    t_now: u32,
    stale: bool,
    departed: BTreeMap<AgentId, AgentPlan>,
}

impl ExecutionState {
    pub fn new(instance: Instance, plan: Plan) -> Result<Self, DynamicError> {
        let report = validate(&instance, &plan);
        if !report.feasible {
            return Err(DynamicError::InvalidPlan(report));
        }
        Ok(Self {
            instance,
            plan,
            t_now: 0,
            stale: false,
            departed: BTreeMap::new(),
        })
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    /// The plan being executed. While [`is_stale`](Self::is_stale), agents
    /// that joined at `t_now` have no entry yet.
    pub fn active_plan(&self) -> &Plan {
        &self.plan
    }

    pub fn t_now(&self) -> u32 {
        self.t_now
    }

    pub fn is_stale(&self) -> bool {
        self.stale
    }

    /// Agents that left, with their trajectories up to the leave time.
    pub fn departed(&self) -> &BTreeMap<AgentId, AgentPlan> {
        &self.departed
    }

    /// Committed trajectory of `agent` through `t_now`.
    pub fn committed(&self, agent: &AgentId) -> Option<&[AgentState]> {
        let a = self.plan.agents.get(agent)?;
        let end = (self.t_now + 1).saturating_sub(a.release) as usize;
        Some(&a.trajectory[..end.min(a.trajectory.len())])
    }

    fn occupant(&self, v: VertexId) -> Option<AgentId> {
        self.plan
            .agents
            .iter()
            .find_map(|(id, a)| match a.occupancy_at(self.t_now) {
                Some(AgentState::AtVertex(u)) if u == v => Some(id.clone()),
                Some(AgentState::InTransit { to, .. }) if to == v => Some(id.clone()),
                _ => None,
            })
    }

    fn advance_to(&mut self, time: u32) {
        if time > self.plan.makespan {
            for a in self.plan.agents.values_mut() {
                let len = (time - a.release + 1) as usize;
                a.trajectory.resize(len, AgentState::Done);
            }
            self.plan.makespan = time;
        }
        self.t_now = time;
    }

    fn check_free(&self, v: VertexId, who: &AgentId, kind: ViolationKind) -> Result<(), DynamicError> {
        match self.occupant(v) {
            Some(other) => Err(DynamicError::Occupied(
                Violation::new(kind, vec![who.clone(), other]).at(Location::Vertex(v), self.t_now),
            )),
            None => Ok(()),
        }
    }

    fn add_obstacle(&mut self, v: VertexId) -> Result<(), DynamicError> {
        if self.instance.graph().is_obstacle(v) {
            return Err(DynamicError::AlreadyAnObstacle(v));
        }
        if let Some(other) = self.occupant(v) {
            return Err(DynamicError::Occupied(
                Violation::new(ViolationKind::ObstacleCollision, vec![other]).at(Location::Vertex(v), self.t_now),
            ));
        }
        self.instance.set_obstacle(v, true)?;
        Ok(())
    }

    fn remove_obstacle(&mut self, v: VertexId) -> Result<(), DynamicError> {
        if !self.instance.graph().is_obstacle(v) {
            return Err(DynamicError::NotAnObstacle(v));
        }
        self.instance.set_obstacle(v, false)?;
        Ok(())
    }

    /// Applies one event. Several events may be applied at the same time
    /// step before resolving; advancing past a pending batch is an error.
    pub fn apply_event(&self, event: &Event) -> Result<ExecutionState, DynamicError> {
        if event.time < self.t_now {
            return Err(DynamicError::EventInPast {
                time: event.time,
                now: self.t_now,
            });
        }
        if self.stale && event.time > self.t_now {
            return Err(DynamicError::Stale {
                time: event.time,
                now: self.t_now,
            });
        }
        let mut next = self.clone();
        next.advance_to(event.time);
        match &event.kind {
            EventKind::AgentJoin { agent } => {
                let mut spec = agent.clone();
                spec.release = event.time;
                next.check_free(spec.start, &spec.id, ViolationKind::VertexConflict)?;
                next.instance.push_agent(spec)?;
            }
            EventKind::AgentLeave { agent } => {
                let Some(a) = next.plan.agents.get(agent) else {
                    return Err(DynamicError::UnknownAgent(agent.clone()));
                };
                if matches!(a.state_at(next.t_now), Some(AgentState::InTransit { .. })) {
                    return Err(DynamicError::InTransit(agent.clone()));
                }
                let mut gone = next.plan.agents.remove(agent).expect("checked above");
                let keep = (next.t_now + 1).saturating_sub(gone.release) as usize;
                gone.trajectory.truncate(keep);
                let active = gone.trajectory.iter().filter(|s| **s != AgentState::Done).count();
                gone.battery.truncate(active);
                gone.charge_times.retain(|&t| t < next.t_now);
                next.departed.insert(agent.clone(), gone);
                next.instance.remove_agent(agent);
            }
            EventKind::ObstacleAdd { vertex } => next.add_obstacle(*vertex)?,
            EventKind::ObstacleRemove { vertex } => next.remove_obstacle(*vertex)?,
            EventKind::ObstacleMove { from, to } => {
                next.remove_obstacle(*from)?;
                next.add_obstacle(*to)?;
            }
        }
        next.stale = true;
        Ok(next)
    }

    /// Where each agent stands at `t_now`, in instance order.
    pub fn snapshots(&self) -> Vec<AgentSnapshot> {
        self.instance
            .agents()
            .iter()
            .map(|spec| match self.plan.agents.get(&spec.id) {
                Some(a) if a.release <= self.t_now => {
                    let committed = self.committed(&spec.id).unwrap_or_default();
                    let state = *committed.last().unwrap_or(&AgentState::AtVertex(spec.start));
                    let visited = committed.iter().filter_map(AgentState::vertex).collect();
                    let k = (self.t_now - a.release) as usize;
                    let battery = a.battery.get(k).copied().unwrap_or(0);
                    AgentSnapshot {
                        state,
                        visited,
                        battery,
                    }
                }
                _ => AgentSnapshot {
                    state: AgentState::AtVertex(spec.start),
                    visited: [spec.start].into(),
                    battery: spec.battery,
                },
            })
            .collect()
    }

    /// Remaining vertex route of an existing agent after `t_now`.
    fn remaining_route(&self, id: &AgentId) -> Vec<VertexId> {
        let a = &self.plan.agents[id];
        let from = self.t_now.saturating_sub(a.release) as usize;
        let mut route: Vec<VertexId> = Vec::new();
        let mut last = match a.trajectory.get(from) {
            Some(AgentState::AtVertex(v)) => Some(*v),
            _ => None,
        };
        for s in a.trajectory.iter().skip(from + 1) {
            if let AgentState::AtVertex(v) = *s {
                if last != Some(v) {
                    route.push(v);
                }
                last = Some(v);
            }
        }
        route
    }

    fn models(&self, restrict: bool) -> Vec<AgentModel> {
        let relax = Relaxation::none();
        self.instance
            .agents()
            .iter()
            .zip(self.snapshots())
            .map(|(spec, snap)| {
                let existing = self.plan.agents.contains_key(&spec.id);
                let route = (restrict && existing).then(|| self.remaining_route(&spec.id));
                let start = StartState {
                    loc: match snap.state {
                        AgentState::InTransit { from, to, step } => Loc::Transit { from, to, step },
                        AgentState::AtVertex(v) => Loc::At(v),
                        AgentState::Done => Loc::At(spec.goal),
                    },
                    visited: snap.visited.iter().copied().collect(),
                    battery: snap.battery,
                    done: snap.state == AgentState::Done,
                };
                AgentModel::new(&self.instance, spec, &relax, start, route)
            })
            .collect()
    }

    fn assemble(&self, models: &[AgentModel], tracks: &[crate::solver::Track]) -> Plan {
        let len = tracks.first().map_or(1, |t| t.states.len()) as u32;
        let mut plan = Plan {
            makespan: self.t_now + len - 1,
            ..Plan::default()
        };
        for ((spec, model), track) in self.instance.agents().iter().zip(models).zip(tracks) {
            let (mut trajectory, mut charge_times, initial) = match self.plan.agents.get(&spec.id) {
                Some(a) => {
                    let prefix = self.committed(&spec.id).unwrap_or_default().to_vec();
                    let charges: BTreeSet<u32> = a.charge_times.iter().copied().filter(|&t| t < self.t_now).collect();
                    (prefix, charges, a.battery.first().copied().unwrap_or(spec.battery))
                }
                None => (Vec::new(), BTreeSet::new(), spec.battery),
            };
            let already_done = trajectory.last() == Some(&AgentState::Done);
            let rendered = render_track(model, track, !already_done);
            let skip = usize::from(!trajectory.is_empty());
            trajectory.extend(rendered.into_iter().skip(skip));
            charge_times.extend(track.charges.iter().copied());
            let battery = battery_trace(
                &trajectory,
                spec.release,
                initial,
                &charge_times,
                self.instance.battery_max(),
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

    fn run(
        &self,
        restrict: bool,
        from: u32,
        to: u32,
        budget: &Budget,
        stats: &mut SolveStats,
    ) -> Result<Option<(u32, Plan)>, DynamicError> {
        let models = self.models(restrict);
        let Some(lb) = heuristic_bound(&models, self.t_now) else {
            return Ok(None);
        };
        let from = from.max(lb);
        if from > to {
            return Ok(None);
        }
        let weights = Weights::new(self.instance.objectives());
        match deepen(&models, self.t_now, from, to, weights, true, budget, stats) {
            Deepened::Found(h, tracks) => {
                let plan = self.assemble(&models, &tracks);
                if cfg!(debug_assertions) {
                    let report = validate_with(&self.instance, &plan, &Relaxation::none(), self.t_now);
                    debug_assert!(report.feasible, "dynamic plan invalid: {:?}", report.violations);
                }
                Ok(Some((h, plan)))
            }
            Deepened::Exhausted => Ok(None),
            Deepened::Interrupted => Err(DynamicError::Timeout),
        }
    }

    /// Keeps existing agents on their remaining routes (waits and charges
    /// are free) and plans new agents, completing by `horizon`.
    pub fn revise_and_augment(&self, horizon: u32, budget: &Budget) -> Result<Option<Plan>, DynamicError> {
        if horizon < self.t_now {
            return Err(DynamicError::HorizonInPast {
                horizon,
                now: self.t_now,
            });
        }
        let mut stats = SolveStats::default();
        Ok(self.run(true, horizon, horizon, budget, &mut stats)?.map(|(_, p)| p))
    }

    /// Replans every agent freely from its state at `t_now`.
    pub fn replan(&self, budget: &Budget) -> Result<Option<(u32, Plan)>, DynamicError> {
        let mut stats = SolveStats::default();
        self.run(false, self.t_now, self.instance.makespan_bound(), budget, &mut stats)
    }

    pub fn resolve(&self, policy: &DynamicPolicy, budget: &Budget) -> Result<DynamicResult, DynamicError> {
        resolve_dynamic(self, policy, budget)
    }

    /// Installs a resolve result as the new active plan.
    pub fn commit(&mut self, result: &DynamicResult) {
        self.plan = result.plan.clone();
        self.stale = false;
    }
}

/// Tries revise-and-augment at the current makespan and up to
/// `policy.delta_max` steps beyond (never past the makespan bound), then
/// optionally falls back to a full replan.
pub fn resolve_dynamic(
    state: &ExecutionState,
    policy: &DynamicPolicy,
    budget: &Budget,
) -> Result<DynamicResult, DynamicError> {
    let bound = state.instance.makespan_bound();
    let base = state.plan.makespan.max(state.t_now);
    let top = base.saturating_add(policy.delta_max).min(bound);
    let mut stats = SolveStats::default();
    if base <= top {
        for h in base..=top {
            if let Some((_, plan)) = state.run(true, h, h, budget, &mut stats)? {
                return Ok(DynamicResult {
                    plan,
                    method: Method::ReviseAugment,
                    horizon_used: h,
                    stats,
                });
            }
        }
    }
    if policy.fallback_replan {
        if let Some((h, plan)) = state.run(false, state.t_now, bound, budget, &mut stats)? {
            return Ok(DynamicResult {
                plan,
                method: Method::Replan,
                horizon_used: h,
                stats,
            });
        }
    }
    Err(DynamicError::Unsat)
}
