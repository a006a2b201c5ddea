//! File formats. JSON is canonical: objects are written with sorted keys,
//! two-space indentation and a trailing newline, so a parsed-and-reserialized
//! file is byte-identical to its source.

mod ascii;

use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{
    AgentId, AgentPlan, AgentSpec, AgentState, GridSpec, Instance, ModelError, Objective, Plan, VertexId, WorldGraph,
};

pub use ascii::grid_from_ascii;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
}

impl FormatError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        FormatError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn path(&self) -> &str {
        match self {
            FormatError::Schema { path, .. } => path,
        }
    }
}

impl From<ModelError> for FormatError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Schema { field, message } => FormatError::Schema { path: field, message },
            other => FormatError::schema("$", other.to_string()),
        }
    }
}

/// Parses JSON into `T`, reporting the JSON path of the first mismatch.
pub fn from_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, FormatError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            "$".to_owned()
        } else {
            format!("$.{path}")
        };
        FormatError::schema(path, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| FormatError::schema("$", e.to_string()))?;
    Ok(value)
}

/// Canonical JSON text of any serializable value.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let tree = serde_json::to_value(value).expect("model values serialize to JSON");
    let mut text = serde_json::to_string_pretty(&tree).expect("JSON values always print");
    text.push('\n');
    text
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    u: VertexId,
    v: VertexId,
    duration: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    vertices: Vec<VertexId>,
    edges: Vec<EdgeFile>,
    #[serde(default)]
    obstacles: BTreeSet<VertexId>,
    #[serde(default)]
    charging: BTreeSet<VertexId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    graph: Option<GraphFile>,
    battery_max: u32,
    agents: Vec<AgentSpec>,
    makespan_bound: u32,
    objectives: Vec<Objective>,
}

impl InstanceFile {
    fn from_instance(instance: &Instance) -> Self {
        let graph = instance.graph();
        let (grid, graph) = match instance.grid() {
            Some(grid) => (Some(grid.clone()), None),
            None => (
                None,
                Some(GraphFile {
                    vertices: graph.vertices().iter().copied().collect(),
                    edges: graph
                        .edges()
                        .map(|(u, v, duration)| EdgeFile { u, v, duration })
                        .collect(),
                    obstacles: graph.obstacles().clone(),
                    charging: graph.charging().clone(),
                }),
            ),
        };
        Self {
            grid,
            graph,
            battery_max: instance.battery_max(),
            agents: instance.agents().to_vec(),
            makespan_bound: instance.makespan_bound(),
            objectives: instance.objectives().to_vec(),
        }
    }

    fn into_instance(self) -> Result<Instance, FormatError> {
        match (self.grid, self.graph) {
            (Some(_), Some(_)) => Err(FormatError::schema("$", "exactly one of `grid` and `graph` is allowed")),
            (None, None) => Err(FormatError::schema("$", "one of `grid` or `graph` is required")),
            (Some(grid), None) => Ok(Instance::from_grid(
                grid,
                self.agents,
                self.battery_max,
                self.makespan_bound,
                self.objectives,
            )?),
            (None, Some(g)) => {
                let graph = WorldGraph::new(
                    g.vertices,
                    g.edges.into_iter().map(|e| (e.u, e.v, e.duration)),
                    g.obstacles,
                    g.charging,
                )
                .map_err(|e| prefix("graph", e))?;
                Ok(Instance::new(
                    graph,
                    self.agents,
                    self.battery_max,
                    self.makespan_bound,
                    self.objectives,
                )?)
            }
        }
    }
}

fn prefix(scope: &str, e: ModelError) -> FormatError {
    match e {
        ModelError::Schema { field, message } => FormatError::schema(format!("{scope}.{field}"), message),
        other => FormatError::schema(scope, other.to_string()),
    }
}

pub fn parse_instance(bytes: &[u8]) -> Result<Instance, FormatError> {
    from_json::<InstanceFile>(bytes)?.into_instance()
}

/// Parses an instance whose world comes from `grid` (typically built by
/// [`grid_from_ascii`]); the file itself must then omit `grid` and `graph`.
pub fn parse_instance_on_grid(bytes: &[u8], grid: GridSpec) -> Result<Instance, FormatError> {
    let mut file = from_json::<InstanceFile>(bytes)?;
    if file.grid.is_some() || file.graph.is_some() {
        return Err(FormatError::schema(
            "$",
            "the world is given by the ASCII map; drop `grid` and `graph`",
        ));
    }
    file.grid = Some(grid);
    file.into_instance()
}

pub fn serialize_instance(instance: &Instance) -> String {
    to_canonical_json(&InstanceFile::from_instance(instance))
}

impl Serialize for Instance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        InstanceFile::from_instance(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        InstanceFile::deserialize(d)?
            .into_instance()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum DoneTag {
    #[serde(rename = "done")]
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum RouteEntry {
    Done(DoneTag),
    At { at: VertexId },
    Transit { transit: [VertexId; 2], step: u32 },
}

impl From<AgentState> for RouteEntry {
    fn from(s: AgentState) -> Self {
        match s {
            AgentState::AtVertex(v) => RouteEntry::At { at: v },
            AgentState::InTransit { from, to, step } => RouteEntry::Transit {
                transit: [from, to],
                step,
            },
            AgentState::Done => RouteEntry::Done(DoneTag::Done),
        }
    }
}

impl From<RouteEntry> for AgentState {
    fn from(e: RouteEntry) -> Self {
        match e {
            RouteEntry::At { at } => AgentState::AtVertex(at),
            RouteEntry::Transit {
                transit: [from, to],
                step,
            } => AgentState::InTransit { from, to, step },
            RouteEntry::Done(_) => AgentState::Done,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentPlanFile {
    route: Vec<RouteEntry>,
    battery: Vec<u32>,
    #[serde(default)]
    charge_times: BTreeSet<u32>,
    #[serde(default, skip_serializing_if = "is_zero")]
    release: u32,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    makespan: u32,
    agents: BTreeMap<AgentId, AgentPlanFile>,
}

impl From<&Plan> for PlanFile {
    fn from(plan: &Plan) -> Self {
        PlanFile {
            makespan: plan.makespan,
            agents: plan
                .agents
                .iter()
                .map(|(id, a)| {
                    (
                        id.clone(),
                        AgentPlanFile {
                            route: a.trajectory.iter().map(|&s| s.into()).collect(),
                            battery: a.battery.clone(),
                            charge_times: a.charge_times.clone(),
                            release: a.release,
                        },
                    )
                })
                .collect(),
        }
    }
}

impl From<PlanFile> for Plan {
    fn from(file: PlanFile) -> Self {
        Plan {
            makespan: file.makespan,
            agents: file
                .agents
                .into_iter()
                .map(|(id, a)| {
                    (
                        id,
                        AgentPlan {
                            release: a.release,
                            trajectory: a.route.into_iter().map(AgentState::from).collect(),
                            battery: a.battery,
                            charge_times: a.charge_times,
                        },
                    )
                })
                .collect(),
        }
    }
}

impl Serialize for Plan {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PlanFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Plan {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(PlanFile::deserialize(d)?.into())
    }
}

/// Parses a plan file. Transit entries must have `1 <= step < duration`
/// on edges of `graph`; everything else is left to the validator so that
/// malformed plans can still be rendered and diagnosed.
pub fn parse_plan(bytes: &[u8], graph: &WorldGraph) -> Result<Plan, FormatError> {
    let plan: Plan = from_json(bytes)?;
    check_transits(&plan, graph)?;
    Ok(plan)
}

pub(crate) fn check_transits(plan: &Plan, graph: &WorldGraph) -> Result<(), FormatError> {
    for (id, a) in &plan.agents {
        for (k, s) in a.trajectory.iter().enumerate() {
            if let AgentState::InTransit { from, to, step } = *s {
                let path = format!("$.agents.{id}.route[{k}]");
                let Some(d) = graph.duration(from, to) else {
                    return Err(FormatError::schema(path, format!("{from}-{to} is not an edge")));
                };
                if step == 0 || step >= d {
                    return Err(FormatError::schema(
                        path,
                        format!("step {step} must be in 1..{d} for an edge of duration {d}"),
                    ));
                }
            }
        }
    }
    Ok(())
}

pub fn serialize_plan(plan: &Plan) -> String {
    to_canonical_json(plan)
}
