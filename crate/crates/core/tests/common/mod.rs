#![allow(dead_code)]

pub mod golden;
pub mod props;

use std::path::PathBuf;

use mmapf::io::{parse_instance, parse_plan};
use mmapf::model::{AgentState, Instance, Plan};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read_fixture(name: &str) -> Vec<u8> {
    std::fs::read(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn instance(name: &str) -> Instance {
    parse_instance(&read_fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn plan(name: &str, instance: &Instance) -> Plan {
    parse_plan(&read_fixture(name), instance.graph()).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Vertex (or `None` for transit/done) of `agent` at each absolute time.
pub fn positions(plan: &Plan, agent: &str) -> Vec<Option<u32>> {
    let a = &plan.agents[&agent.into()];
    a.trajectory.iter().map(|s| s.vertex()).collect()
}

/// Vertices `agent` occupies in order, with `Done` and transit dropped.
pub fn vertex_route(plan: &Plan, agent: &str) -> Vec<u32> {
    positions(plan, agent).into_iter().flatten().collect()
}

/// Distinct consecutive vertices `agent` visits strictly after `t`, waits
/// and transit steps removed.
pub fn route_after(plan: &Plan, agent: &str, t: u32) -> Vec<u32> {
    let a = &plan.agents[&agent.into()];
    let from = t.saturating_sub(a.release) as usize;
    let mut last = a.trajectory.get(from).and_then(|s| s.vertex());
    let mut out = Vec::new();
    for v in a.trajectory.iter().skip(from + 1).filter_map(|s| s.vertex()) {
        if last != Some(v) {
            out.push(v);
        }
        last = Some(v);
    }
    out
}

/// Panics unless every existing agent keeps its committed prefix in
/// `after` and, when `revised`, also its remaining vertex route.
pub fn assert_prefix_preserved(state: &mmapf::dynamic::ExecutionState, after: &Plan, revised: bool) {
    let t = state.t_now();
    for spec in state.instance().agents() {
        let Some(prefix) = state.committed(&spec.id) else {
            continue;
        };
        let new = &after.agents[&spec.id];
        assert_eq!(&new.trajectory[..prefix.len()], prefix, "{} prefix", spec.id);
        let id = spec.id.as_str();
        if !revised {
            continue;
        }
        assert_eq!(
            route_after(after, id, t),
            route_after(state.active_plan(), id, t),
            "{id} route"
        );
    }
}

/// Re-derives battery rows and makespan after a trajectory edit and pads
/// every agent with `Done` up to the new makespan.
pub fn refit(plan: &mut Plan, instance: &Instance) {
    for a in plan.agents.values_mut() {
        while a.trajectory.len() > 1 && a.trajectory[a.trajectory.len() - 1] == AgentState::Done {
            a.trajectory.pop();
        }
    }
    plan.makespan = plan.objective_values().makespan;
    for spec in instance.agents() {
        let a = plan.agents.get_mut(&spec.id).expect("agent in plan");
        a.battery = a.replay_battery(spec.battery, instance.battery_max());
        a.trajectory
            .resize((plan.makespan + 1 - a.release) as usize, AgentState::Done);
    }
}

/// Copy of `plan` in which `agent` stays one extra step at its position at
/// absolute time `t`.
pub fn with_extra_wait(plan: &Plan, instance: &Instance, agent: &str, t: u32) -> Plan {
    let mut next = plan.clone();
    let a = next.agents.get_mut(&agent.into()).expect("agent in plan");
    let k = (t - a.release) as usize;
    let state = a.trajectory[k];
    a.trajectory.insert(k, state);
    a.charge_times = a.charge_times.iter().map(|&c| if c >= t { c + 1 } else { c }).collect();
    refit(&mut next, instance);
    next
}
