//! World, instance, plan and diagnostic types plus the pure transition
//! semantics (adjacency, edge durations, battery updates).

mod graph;
mod instance;
mod plan;
mod violation;

use thiserror::Error;

pub use graph::{build_graph, edge_key, EdgeKey, GridSpec, VertexId, WorldGraph};
pub use instance::{AgentId, AgentSpec, Instance, Objective, MAX_WAYPOINTS};
pub use plan::{battery_step, AgentPlan, AgentState, ObjectiveValues, Plan};
pub use violation::{Location, Violation, ViolationKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(VertexId, VertexId),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("agent `{agent}` is not in the world at time step {time}")]
    NotPresent { agent: String, time: u32 },
    #[error("time step {time} is past the plan makespan {makespan}")]
    TimeOutOfRange { time: u32, makespan: u32 },
}

impl ModelError {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}
