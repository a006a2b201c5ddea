//! Message templates. [`TABLE`] lists every template with its placeholders;
//! the functions below are the only way messages are rendered.

use crate::model::{AgentId, VertexId, Violation};

/// `(id, template)` pairs. Placeholders are in braces.
pub const TABLE: &[(&str, &str)] = &[
    (
        "T1",
        "{agent} does not need to wait at Cell {vertex}: another plan with the same optimal makespan {makespan} avoids it.",
    ),
    (
        "T2",
        "Without waiting at Cell {vertex}, {agent} has to follow another itinerary and the plan finishes {delay} time step(s) later, at makespan {makespan}.",
    ),
    ("T3", "If {agent} does not wait at Cell {vertex}, {conflict}."),
    ("T4", "Ignoring collisions between robots yields a plan, but in it {conflict}."),
    (
        "T5",
        "Without the obstacle at Cell {obstacle} a plan exists: {agent} crosses Cell {obstacle} at time step {time}. Consider removing that obstacle.",
    ),
    ("T6a", "A plan exists with {k} more time step(s) than the makespan bound allows."),
    ("T6b", "A plan exists once battery limits are lifted; the robots cannot charge enough."),
    ("T7a", "The plan is infeasible due to {categories}."),
    ("T7b", "The plan is feasible and no plan is strictly better."),
    ("T7c", "The plan is feasible, but a strictly better plan exists."),
    ("T7d", "The plan is optimal."),
    ("T7e", "The plan is not optimal: it needs {time_delta} more time step(s) than necessary."),
    ("T7f", "The plan is not optimal: it uses {charge_delta} more charge action(s) than necessary."),
];

/// Rendered when no single relaxation makes an infeasible instance solvable.
pub const NO_SINGLE_RELAXATION: &str =
    "No single relaxation makes the instance solvable; removing several obstacles at once was not tried.";

fn fill(id: &str, values: &[(&str, String)]) -> String {
    let (_, template) = TABLE.iter().find(|(k, _)| *k == id).expect("known template");
    let mut out = (*template).to_owned();
    for (key, value) in values {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

pub fn alternative_plan(agent: &AgentId, vertex: VertexId, makespan: u32) -> String {
    fill(
        "T1",
        &[
            ("agent", agent.to_string()),
            ("vertex", vertex.to_string()),
            ("makespan", makespan.to_string()),
        ],
    )
}

pub fn delayed_itinerary(agent: &AgentId, vertex: VertexId, delay: u32, makespan: u32) -> String {
    fill(
        "T2",
        &[
            ("agent", agent.to_string()),
            ("vertex", vertex.to_string()),
            ("delay", delay.to_string()),
            ("makespan", makespan.to_string()),
        ],
    )
}

pub fn counterfactual_conflict(agent: &AgentId, vertex: VertexId, conflict: &Violation) -> String {
    fill(
        "T3",
        &[
            ("agent", agent.to_string()),
            ("vertex", vertex.to_string()),
            ("conflict", conflict.describe()),
        ],
    )
}

pub fn agents_collide(conflict: &Violation) -> String {
    fill("T4", &[("conflict", conflict.describe())])
}

pub fn agents_collide_somewhere() -> String {
    fill("T4", &[("conflict", "robots meet".to_owned())])
}

pub fn remove_obstacle(obstacle: VertexId, hit: Option<&Violation>) -> String {
    let agent = hit
        .and_then(|v| v.agents.first())
        .map(ToString::to_string)
        .unwrap_or_else(|| "a robot".to_owned());
    let time = hit
        .and_then(|v| v.time)
        .map(|t| t.to_string())
        .unwrap_or_else(|| "?".to_owned());
    fill(
        "T5",
        &[("obstacle", obstacle.to_string()), ("agent", agent), ("time", time)],
    )
}

pub fn more_time(k: u32) -> String {
    fill("T6a", &[("k", k.to_string())])
}

pub fn more_charging() -> String {
    fill("T6b", &[])
}

pub fn plan_infeasible(categories: &[String]) -> String {
    fill("T7a", &[("categories", categories.join(", "))])
}

pub fn plan_feasible(better_exists: bool) -> String {
    fill(if better_exists { "T7c" } else { "T7b" }, &[])
}

pub fn optimality_gap(time_delta: i64, charge_delta: i64) -> String {
    if time_delta > 0 {
        fill("T7e", &[("time_delta", time_delta.to_string())])
    } else if time_delta == 0 && charge_delta > 0 {
        fill("T7f", &[("charge_delta", charge_delta.to_string())])
    } else {
        fill("T7d", &[])
    }
}
