//! Plan feasibility checking.
//!
//! The validator never stops at the first problem: it returns every
//! violation it finds, sorted by `(time, kind, agents, location)`, so the
//! explanation engine can pick the earliest one and the UI can render all of
//! them. Malformed plans produce `Discontinuity` violations instead of errors.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{
    battery_step, edge_key, AgentId, AgentPlan, AgentSpec, AgentState, EdgeKey, Instance, Location, Plan, VertexId,
    Violation, ViolationKind,
};
use crate::solver::Relaxation;

pub const COLLISIONS: &str = "collisions with obstacles or other robots";
pub const LOW_BATTERY: &str = "low battery-level";
pub const TASK_INCOMPLETE: &str = "task incomplete";
pub const MALFORMED: &str = "malformed plan";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    pub summary: BTreeMap<ViolationKind, usize>,
}

impl ValidationReport {
    fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort();
        violations.dedup();
        let mut summary = BTreeMap::new();
        for v in &violations {
            *summary.entry(v.kind).or_insert(0) += 1;
        }
        Self {
            feasible: violations.is_empty(),
            violations,
            summary,
        }
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }

    pub fn first_inter_agent(&self) -> Option<&Violation> {
        self.violations.iter().find(|v| v.kind.is_inter_agent())
    }
}

/// Maps violation kinds onto headline categories, in a fixed order.
pub fn categorize(report: &ValidationReport) -> Vec<&'static str> {
    let mut present = BTreeSet::new();
    for v in &report.violations {
        let rank = match v.kind {
            ViolationKind::VertexConflict
            | ViolationKind::SwapConflict
            | ViolationKind::EdgeOverlapConflict
            | ViolationKind::ObstacleCollision => 0,
            ViolationKind::BatteryDepleted => 1,
            ViolationKind::WaypointMissed | ViolationKind::GoalMissed | ViolationKind::HorizonExceeded => 2,
            ViolationKind::Discontinuity => 3,
        };
        present.insert(rank);
    }
    present
        .into_iter()
        .map(|rank| [COLLISIONS, LOW_BATTERY, TASK_INCOMPLETE, MALFORMED][rank])
        .collect()
}

pub fn validate(instance: &Instance, plan: &Plan) -> ValidationReport {
    validate_with(instance, plan, &Relaxation::none(), 0)
}

pub fn validate_relaxed(instance: &Instance, plan: &Plan, relax: &Relaxation) -> ValidationReport {
    validate_with(instance, plan, relax, 0)
}

/// Full validation under `relax`. Obstacle collisions before `obstacles_from`
/// are not reported; dynamic sessions use this because the obstacle set may
/// have changed after part of the plan was executed.
pub fn validate_with(instance: &Instance, plan: &Plan, relax: &Relaxation, obstacles_from: u32) -> ValidationReport {
    let mut out = Vec::new();

    for id in plan.agents.keys() {
        if instance.agent(id).is_none() {
            out.push(
                Violation::new(ViolationKind::Discontinuity, vec![id.clone()]).detail("not an agent of the instance"),
            );
        }
    }

    let mut tracks = Vec::new();
    for spec in instance.agents() {
        match plan.agents.get(&spec.id) {
            Some(agent_plan) => {
                let track = check_agent(instance, plan, spec, agent_plan, relax, obstacles_from, &mut out);
                tracks.push(track);
            }
            None => out.push(
                Violation::new(ViolationKind::Discontinuity, vec![spec.id.clone()]).detail("missing from the plan"),
            ),
        }
    }

    if !relax.ignore_agent_collisions {
        check_conflicts(instance, plan, &tracks, &mut out);
    }

    ValidationReport::from_violations(out)
}

struct Track<'a> {
    id: &'a AgentId,
    plan: &'a AgentPlan,
    traversals: Vec<(EdgeKey, u32, u32)>,
}

fn valid_state(instance: &Instance, state: AgentState) -> Result<(), String> {
    let graph = instance.graph();
    match state {
        AgentState::AtVertex(v) if !graph.contains(v) => Err(format!("unknown vertex {v}")),
        AgentState::InTransit { from, to, step } => match graph.duration(from, to) {
            None => Err(format!("no edge between {from} and {to}")),
            Some(d) if step == 0 || step >= d => {
                Err(format!("transit step {step} on edge {from}-{to} of duration {d}"))
            }
            Some(_) => Ok(()),
        },
        _ => Ok(()),
    }
}

fn valid_step(instance: &Instance, prev: AgentState, next: AgentState) -> Result<(), String> {
    use AgentState::*;
    let graph = instance.graph();
    match (prev, next) {
        (AtVertex(u), AtVertex(v)) if u == v => Ok(()),
        (AtVertex(u), AtVertex(v)) => match graph.duration(u, v) {
            Some(1) => Ok(()),
            Some(d) => Err(format!("jumps from {u} to {v} across a duration-{d} edge")),
            None => Err(format!("jumps from {u} to non-adjacent {v}")),
        },
        (AtVertex(u), InTransit { from, step: 1, .. }) if from == u => Ok(()),
        (
            InTransit { from, to, step },
            InTransit {
                from: f2,
                to: t2,
                step: s2,
            },
        ) if from == f2 && to == t2 && s2 == step + 1 => Ok(()),
        (InTransit { from, to, step }, AtVertex(v)) if v == to => match graph.duration(from, to) {
            Some(d) if step + 1 == d => Ok(()),
            _ => Err(format!("arrives at {v} before finishing the edge from {from}")),
        },
        (p, n) => Err(format!("cannot go from {p:?} to {n:?}")),
    }
}

fn state_location(state: AgentState) -> Option<Location> {
    match state {
        AgentState::AtVertex(v) => Some(Location::Vertex(v)),
        AgentState::InTransit { from, to, .. } => {
            let (a, b) = edge_key(from, to);
            Some(Location::Edge(a, b))
        }
        AgentState::Done => None,
    }
}

fn check_agent<'a>(
    instance: &Instance,
    plan: &Plan,
    spec: &'a AgentSpec,
    agent_plan: &'a AgentPlan,
    relax: &Relaxation,
    obstacles_from: u32,
    out: &mut Vec<Violation>,
) -> Track<'a> {
    let id = &spec.id;
    let me = || vec![id.clone()];
    let broken = |t: u32, detail: String| {
        Violation::new(ViolationKind::Discontinuity, vec![id.clone()])
            .timed(t)
            .detail(detail)
    };
    let release = agent_plan.release;
    let traj = &agent_plan.trajectory;
    let mut track = Track {
        id,
        plan: agent_plan,
        traversals: Vec::new(),
    };

    if release != spec.release {
        out.push(broken(
            release,
            format!("plan release {release} differs from {}", spec.release),
        ));
    }
    if release > plan.makespan || traj.is_empty() {
        out.push(broken(release, "empty trajectory".to_owned()));
        return track;
    }
    let expected = (plan.makespan - release + 1) as usize;
    if traj.len() != expected {
        out.push(broken(
            release,
            format!("trajectory has {} states, expected {expected}", traj.len()),
        ));
    }
    if traj[0] != AgentState::AtVertex(spec.start) {
        out.push(broken(release, format!("does not start at vertex {}", spec.start)));
    }

    let mut well_formed = vec![true; traj.len()];
    for (k, &s) in traj.iter().enumerate() {
        if let Err(detail) = valid_state(instance, s) {
            well_formed[k] = false;
            out.push(broken(release + k as u32, detail));
        }
    }
    for k in 0..traj.len().saturating_sub(1) {
        let (prev, next) = (traj[k], traj[k + 1]);
        if !well_formed[k] || !well_formed[k + 1] || prev == AgentState::Done || next == AgentState::Done {
            continue;
        }
        if let Err(detail) = valid_step(instance, prev, next) {
            out.push(broken(release + k as u32 + 1, detail));
        }
        if let (AgentState::AtVertex(u), AgentState::InTransit { from, to, step: 1 }) = (prev, next) {
            if u == from {
                let d = instance.graph().duration(from, to).unwrap_or(2);
                track.traversals.push((edge_key(from, to), release + k as u32, d));
            }
        }
    }

    // Completion: the first time the agent stands on its goal having seen
    // every waypoint. Everything after it must be `Done`.
    let mut visited = BTreeSet::new();
    let mut completion = None;
    for (k, &s) in traj.iter().enumerate() {
        match s {
            AgentState::Done => break,
            AgentState::AtVertex(v) => {
                if spec.waypoints.contains(&v) {
                    visited.insert(v);
                }
                if v == spec.goal && visited.len() == spec.waypoints.len() {
                    completion = Some(k);
                    break;
                }
            }
            AgentState::InTransit { .. } => {}
        }
    }
    let last_index = match completion {
        Some(k) => {
            if let Some(j) = (k + 1..traj.len()).find(|&j| traj[j] != AgentState::Done) {
                out.push(broken(
                    release + j as u32,
                    format!("keeps moving after completing at time step {}", release + k as u32),
                ));
            }
            k
        }
        None => {
            let first_done = traj.iter().position(|s| *s == AgentState::Done);
            if let Some(j) = first_done {
                out.push(broken(release + j as u32, "marked done before completing".to_owned()));
            }
            let end = first_done.unwrap_or(traj.len()).saturating_sub(1);
            if traj[end] != AgentState::AtVertex(spec.goal) {
                out.push(Violation::new(ViolationKind::GoalMissed, me()).located(Location::Vertex(spec.goal)));
            }
            for &w in spec.waypoints.difference(&visited) {
                out.push(Violation::new(ViolationKind::WaypointMissed, me()).located(Location::Vertex(w)));
            }
            end
        }
    };

    if let Some(k) = completion {
        let done_at = release + k as u32;
        if done_at > relax.horizon_limit(instance) {
            out.push(Violation::new(ViolationKind::HorizonExceeded, me()).at(Location::Vertex(spec.goal), done_at));
        }
    }

    for (k, &s) in traj.iter().enumerate().take(last_index + 1) {
        let t = release + k as u32;
        if t < obstacles_from {
            continue;
        }
        match s {
            AgentState::AtVertex(v) if relax.blocks(instance, v) => {
                out.push(Violation::new(ViolationKind::ObstacleCollision, me()).at(Location::Vertex(v), t))
            }
            AgentState::InTransit { to, step: 1, .. } if relax.blocks(instance, to) => {
                out.push(Violation::new(ViolationKind::ObstacleCollision, me()).at(Location::Vertex(to), t))
            }
            _ => {}
        }
    }

    check_battery(instance, spec, agent_plan, last_index, relax, out);
    track
}

fn check_battery(
    instance: &Instance,
    spec: &AgentSpec,
    agent_plan: &AgentPlan,
    last_index: usize,
    relax: &Relaxation,
    out: &mut Vec<Violation>,
) {
    let release = agent_plan.release;
    let traj = &agent_plan.trajectory;
    let broken = |t: u32, detail: String| {
        Violation::new(ViolationKind::Discontinuity, vec![spec.id.clone()])
            .timed(t)
            .detail(detail)
    };

    let end = release + last_index as u32;
    for &t in &agent_plan.charge_times {
        if t < release || t >= end {
            out.push(broken(
                t,
                format!("charges at time step {t}, outside its active period"),
            ));
            continue;
        }
        match traj[(t - release) as usize] {
            AgentState::AtVertex(v) if instance.graph().is_charging(v) => {}
            other => out.push(broken(t, format!("charges away from a charging station ({other:?})"))),
        }
    }

    let mut replay = Vec::with_capacity(last_index + 1);
    let mut level = spec.battery;
    let mut reported = false;
    for (k, &state) in traj[..=last_index].iter().enumerate() {
        replay.push(level);
        let t = release + k as u32;
        if level == 0 && !reported && !relax.unlimited_battery {
            let mut v = Violation::new(ViolationKind::BatteryDepleted, vec![spec.id.clone()]).timed(t);
            v.location = state_location(state);
            out.push(v);
            reported = true;
        }
        level = battery_step(level, agent_plan.charge_times.contains(&t), instance.battery_max());
    }
    if agent_plan.battery != replay {
        let k = agent_plan
            .battery
            .iter()
            .zip(&replay)
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| agent_plan.battery.len().min(replay.len()));
        out.push(broken(
            release + k as u32,
            "battery trace does not match the replayed charge actions".to_owned(),
        ));
    }
}

fn check_conflicts(instance: &Instance, plan: &Plan, tracks: &[Track<'_>], out: &mut Vec<Violation>) {
    let pair = |a: &Track<'_>, b: &Track<'_>| vec![a.id.clone(), b.id.clone()];

    for t in 0..=plan.makespan {
        let mut at_vertex: HashMap<VertexId, Vec<usize>> = HashMap::new();
        for (i, track) in tracks.iter().enumerate() {
            if let Some(AgentState::AtVertex(v)) = track.plan.occupancy_at(t) {
                at_vertex.entry(v).or_default().push(i);
            }
        }
        for (&v, agents) in &at_vertex {
            for (x, &i) in agents.iter().enumerate() {
                for &j in &agents[x + 1..] {
                    out.push(
                        Violation::new(ViolationKind::VertexConflict, pair(&tracks[i], &tracks[j]))
                            .at(Location::Vertex(v), t),
                    );
                }
            }
        }

        if t == plan.makespan {
            break;
        }
        let moves: Vec<Option<(VertexId, VertexId)>> = tracks
            .iter()
            .map(
                |track| match (track.plan.occupancy_at(t), track.plan.occupancy_at(t + 1)) {
                    (Some(AgentState::AtVertex(u)), Some(AgentState::AtVertex(v))) if u != v => Some((u, v)),
                    _ => None,
                },
            )
            .collect();
        for i in 0..tracks.len() {
            let Some((u, v)) = moves[i] else { continue };
            if instance.graph().duration(u, v) != Some(1) {
                continue;
            }
            for j in i + 1..tracks.len() {
                if moves[j] == Some((v, u)) {
                    let (a, b) = edge_key(u, v);
                    out.push(
                        Violation::new(ViolationKind::SwapConflict, pair(&tracks[i], &tracks[j]))
                            .at(Location::Edge(a, b), t + 1),
                    );
                }
            }
        }
    }

    for i in 0..tracks.len() {
        for j in i + 1..tracks.len() {
            for &(edge_a, dep_a, d) in &tracks[i].traversals {
                for &(edge_b, dep_b, _) in &tracks[j].traversals {
                    if edge_a == edge_b && dep_a.abs_diff(dep_b) < d {
                        out.push(
                            Violation::new(ViolationKind::EdgeOverlapConflict, pair(&tracks[i], &tracks[j]))
                                .at(Location::Edge(edge_a.0, edge_a.1), dep_a.max(dep_b) + 1),
                        );
                    }
                }
            }
        }
    }
}
