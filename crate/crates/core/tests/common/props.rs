//! Invariants shared by the property suite and the acceptance run.

use mmapf::dynamic::{resolve_dynamic, DynamicPolicy, Event, EventKind, ExecutionState, Method};
use mmapf::model::{edge_key, AgentSpec, AgentState, Instance, Plan};
use mmapf::random::{random_instance, RandomSpec};
use mmapf::solver::{oracle_accepts, solve_optimal, Budget, Relaxation};
use mmapf::validate::validate;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::{assert_prefix_preserved, refit, with_extra_wait};

type Checked = Result<(), TestCaseError>;

pub fn specs() -> impl Strategy<Value = RandomSpec> {
    (2u32..=4, 2u32..=4, 1usize..=3, 0.0f64..0.3, 0.0f64..0.7, 3u32..=8).prop_map(
        |(rows, cols, agents, obstacles, slow, battery)| RandomSpec {
            rows,
            cols,
            agents: agents.min((rows * cols / 3) as usize),
            obstacle_density: obstacles,
            slow_density: slow,
            battery_max: battery,
            battery_min: 2,
            makespan_bound: 10,
            ..RandomSpec::default()
        },
    )
}

pub fn solved(seed: u64, spec: &RandomSpec) -> (Instance, Option<Plan>) {
    let inst = random_instance(seed, spec);
    let plan = solve_optimal(&inst, &Relaxation::none(), &Budget::unlimited()).into_plan();
    (inst, plan)
}

/// Pairwise collision check written directly over occupancies.
pub fn collisions(plan: &Plan) -> Vec<String> {
    let agents: Vec<_> = plan.agents.iter().collect();
    let mut found = Vec::new();
    for t in 0..=plan.makespan {
        for (i, (a, pa)) in agents.iter().enumerate() {
            for (b, pb) in &agents[i + 1..] {
                let (Some(x), Some(y)) = (pa.occupancy_at(t), pb.occupancy_at(t)) else {
                    continue;
                };
                let same = match (x, y) {
                    (AgentState::AtVertex(u), AgentState::AtVertex(v)) => u == v,
                    (
                        AgentState::InTransit { from: f1, to: t1, .. },
                        AgentState::InTransit { from: f2, to: t2, .. },
                    ) => edge_key(f1, t1) == edge_key(f2, t2),
                    _ => false,
                };
                let swapped = match (x, y, pa.occupancy_at(t + 1), pb.occupancy_at(t + 1)) {
                    (
                        AgentState::AtVertex(u),
                        AgentState::AtVertex(v),
                        Some(AgentState::AtVertex(u2)),
                        Some(AgentState::AtVertex(v2)),
                    ) => u != v && u == v2 && v == u2,
                    _ => false,
                };
                if same || swapped {
                    found.push(format!("{a} and {b} at t={t}"));
                }
            }
        }
    }
    found
}

/// Battery rows start at the initial charge, never drop below one, and
/// either lose one unit or refill on a charge taken at a charging vertex.
pub fn battery_rule(seed: u64, spec: &RandomSpec) -> Checked {
    let (inst, Some(plan)) = solved(seed, spec) else {
        return Ok(());
    };
    let max = inst.battery_max();
    for spec in inst.agents() {
        let a = &plan.agents[&spec.id];
        prop_assert_eq!(a.battery[0], spec.battery);
        prop_assert!(a.battery.iter().all(|&b| b >= 1), "{:?}", a.battery);
        for (k, w) in a.battery.windows(2).enumerate() {
            let t = a.release + k as u32;
            let charged = a.charge_times.contains(&t);
            if charged {
                let at = a.occupancy_at(t).and_then(|s| s.vertex());
                prop_assert!(
                    at.is_some_and(|v| inst.graph().is_charging(v)),
                    "charge off a charger at {}",
                    t
                );
                prop_assert_eq!(w[1], max);
            } else {
                prop_assert_eq!(w[1], w[0] - 1);
            }
        }
    }
    Ok(())
}

/// Optimal plans pass both the validator and a direct pairwise check.
pub fn collision_free(seed: u64, spec: &RandomSpec) -> Checked {
    let (inst, Some(plan)) = solved(seed, spec) else {
        return Ok(());
    };
    prop_assert_eq!(collisions(&plan), Vec::<String>::new());
    prop_assert!(validate(&inst, &plan).feasible);
    prop_assert!(plan.makespan <= inst.makespan_bound());
    Ok(())
}

/// Mutates an optimal plan by operation `op` and compares the validator
/// with the oracle replay.
pub fn validator_matches_oracle(seed: u64, spec: &RandomSpec, op: usize, pick: usize, at: u32) -> Checked {
    let (inst, Some(mut plan)) = solved(seed, spec) else {
        return Ok(());
    };
    let ids: Vec<_> = plan.agents.keys().cloned().collect();
    let id = ids[pick % ids.len()].clone();
    let len = plan.agents[&id].trajectory.len();
    let k = at as usize % len;
    let release = plan.agents[&id].release;
    match op {
        0 if len > 1 => {
            plan.agents.get_mut(&id).unwrap().trajectory.remove(k);
            refit(&mut plan, &inst);
        }
        1 => plan = with_extra_wait(&plan, &inst, id.as_str(), release + k as u32),
        2 => {
            let a = plan.agents.get_mut(&id).unwrap();
            let first = a.charge_times.iter().next().copied();
            match first {
                Some(c) => {
                    a.charge_times.remove(&c);
                }
                None => {
                    a.charge_times.insert(release + k as u32);
                }
            }
            refit(&mut plan, &inst);
        }
        3 => {
            let vertices: Vec<_> = inst.graph().vertices().iter().copied().collect();
            let v = vertices[pick % vertices.len()];
            plan.agents.get_mut(&id).unwrap().trajectory[k] = AgentState::AtVertex(v);
        }
        4 => {
            let other = ids[(pick / 7 + 1) % ids.len()].clone();
            if other != id {
                let moved = plan.agents[&other].trajectory.clone();
                plan.agents.get_mut(&id).unwrap().trajectory = moved;
                refit(&mut plan, &inst);
            }
        }
        _ => {}
    }
    let report = validate(&inst, &plan);
    prop_assert_eq!(
        report.feasible,
        oracle_accepts(&inst, &plan, &Relaxation::none()),
        "{:?}",
        report.violations
    );
    Ok(())
}

/// Joins a new agent at a random free vertex and time, resolves, and
/// checks the committed prefixes.
pub fn join_keeps_prefixes(seed: u64, spec: &RandomSpec, at: u32, s: usize, g: usize, battery: u32) -> Checked {
    let (inst, Some(plan)) = solved(seed, spec) else {
        return Ok(());
    };
    let t = at % (plan.makespan + 1);
    let free: Vec<u32> = inst
        .graph()
        .vertices()
        .iter()
        .copied()
        .filter(|&v| !inst.graph().is_obstacle(v))
        .collect();
    let idle: Vec<u32> = free
        .iter()
        .copied()
        .filter(|&v| {
            plan.agents.values().all(|a| match a.occupancy_at(t) {
                Some(AgentState::AtVertex(u)) => u != v,
                Some(AgentState::InTransit { to, .. }) => to != v,
                _ => true,
            })
        })
        .collect();
    let goals: Vec<u32> = free
        .iter()
        .copied()
        .filter(|&v| inst.agents().iter().all(|a| a.goal != v))
        .collect();
    if idle.is_empty() || goals.is_empty() {
        return Ok(());
    }
    let joiner = AgentSpec::new(
        "J",
        idle[s % idle.len()],
        goals[g % goals.len()],
        battery.min(inst.battery_max()),
    );
    let state = ExecutionState::new(inst, plan).unwrap();
    let event = Event {
        time: t,
        kind: EventKind::AgentJoin { agent: joiner },
    };
    let next = state.apply_event(&event).unwrap();
    let Ok(result) = resolve_dynamic(&next, &DynamicPolicy::default(), &Budget::unlimited()) else {
        return Ok(());
    };
    prop_assert!(validate(next.instance(), &result.plan).feasible);
    prop_assert_eq!(collisions(&result.plan), Vec::<String>::new());
    assert_prefix_preserved(&next, &result.plan, result.method == Method::ReviseAugment);
    Ok(())
}
