use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::{build_graph, GridSpec, VertexId, WorldGraph};
use super::ModelError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for AgentId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: AgentId,
    pub start: VertexId,
    pub goal: VertexId,
    #[serde(default)]
    pub waypoints: BTreeSet<VertexId>,
    /// Initial battery level.
    pub battery: u32,
    /// Time step at which the agent enters the world. Zero for every agent
    /// of a static instance; agents joining a running plan get the join time.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub release: u32,
}

/// Upper limit on waypoints per agent; the solver tracks visited waypoints
/// as a bit mask.
pub const MAX_WAYPOINTS: usize = 16;

fn is_zero(v: &u32) -> bool {
    *v == 0
}

impl AgentSpec {
    pub fn new(id: impl Into<AgentId>, start: VertexId, goal: VertexId, battery: u32) -> Self {
        Self {
            id: id.into(),
            start,
            goal,
            waypoints: BTreeSet::new(),
            battery,
            release: 0,
        }
    }

    pub fn with_waypoints(mut self, waypoints: impl IntoIterator<Item = VertexId>) -> Self {
        self.waypoints = waypoints.into_iter().collect();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Makespan,
    TotalTime,
    Charges,
}

/// A complete mMAPF problem: world, agents, battery capacity, horizon and
/// the lexicographic objective order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    graph: WorldGraph,
    grid: Option<GridSpec>,
    agents: Vec<AgentSpec>,
    battery_max: u32,
    makespan_bound: u32,
    objectives: Vec<Objective>,
}

impl Instance {
    pub fn new(
        graph: WorldGraph,
        agents: Vec<AgentSpec>,
        battery_max: u32,
        makespan_bound: u32,
        objectives: Vec<Objective>,
    ) -> Result<Self, ModelError> {
        let instance = Self {
            graph,
            grid: None,
            agents,
            battery_max,
            makespan_bound,
            objectives,
        };
        instance.check()?;
        Ok(instance)
    }

    pub fn from_grid(
        grid: GridSpec,
        agents: Vec<AgentSpec>,
        battery_max: u32,
        makespan_bound: u32,
        objectives: Vec<Objective>,
    ) -> Result<Self, ModelError> {
        let graph = build_graph(&grid)?;
        let mut instance = Self::new(graph, agents, battery_max, makespan_bound, objectives)?;
        instance.grid = Some(grid);
        Ok(instance)
    }

    fn check(&self) -> Result<(), ModelError> {
        if self.battery_max == 0 {
            return Err(ModelError::schema("battery_max", "must be at least 1"));
        }
        match self.objectives.first() {
            None => return Err(ModelError::schema("objectives", "must not be empty")),
            Some(Objective::Makespan) => {}
            Some(_) => return Err(ModelError::schema("objectives", "first objective must be makespan")),
        }
        let distinct: BTreeSet<_> = self.objectives.iter().collect();
        if distinct.len() != self.objectives.len() {
            return Err(ModelError::schema("objectives", "objectives must not repeat"));
        }

        let mut ids = HashSet::new();
        let mut goals = HashSet::new();
        let mut starts = HashSet::new();
        for (i, agent) in self.agents.iter().enumerate() {
            let field = |name: &str| format!("agents[{i}].{name}");
            if !ids.insert(&agent.id) {
                return Err(ModelError::schema(field("id"), format!("duplicate id `{}`", agent.id)));
            }
            for (name, v) in [("start", agent.start), ("goal", agent.goal)] {
                if !self.graph.contains(v) {
                    return Err(ModelError::schema(field(name), format!("unknown vertex {v}")));
                }
                if self.graph.is_obstacle(v) {
                    return Err(ModelError::schema(field(name), format!("vertex {v} is an obstacle")));
                }
            }
            if agent.waypoints.len() > MAX_WAYPOINTS {
                return Err(ModelError::schema(
                    field("waypoints"),
                    format!("at most {MAX_WAYPOINTS} waypoints per agent"),
                ));
            }
            for &w in &agent.waypoints {
                if !self.graph.contains(w) {
                    return Err(ModelError::schema(field("waypoints"), format!("unknown vertex {w}")));
                }
                if self.graph.is_obstacle(w) {
                    return Err(ModelError::schema(
                        field("waypoints"),
                        format!("vertex {w} is an obstacle"),
                    ));
                }
            }
            if agent.battery == 0 || agent.battery > self.battery_max {
                return Err(ModelError::schema(
                    field("battery"),
                    format!("{} outside 1..={}", agent.battery, self.battery_max),
                ));
            }
            if agent.release == 0 && !starts.insert(agent.start) {
                return Err(ModelError::schema(
                    field("start"),
                    format!("vertex {} is the start of another agent", agent.start),
                ));
            }
            if !goals.insert(agent.goal) {
                return Err(ModelError::schema(
                    field("goal"),
                    format!("vertex {} is the goal of another agent", agent.goal),
                ));
            }
        }
        Ok(())
    }

    pub fn graph(&self) -> &WorldGraph {
        &self.graph
    }

    /// The grid this instance was built from, when it was described as one.
    pub fn grid(&self) -> Option<&GridSpec> {
        self.grid.as_ref()
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.agents
    }

    pub fn agent(&self, id: &AgentId) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| &a.id == id)
    }

    pub fn agent_index(&self, id: &AgentId) -> Option<usize> {
        self.agents.iter().position(|a| &a.id == id)
    }

    pub fn battery_max(&self) -> u32 {
        self.battery_max
    }

    pub fn makespan_bound(&self) -> u32 {
        self.makespan_bound
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    pub fn with_makespan_bound(&self, bound: u32) -> Self {
        let mut next = self.clone();
        next.makespan_bound = bound;
        next
    }

    pub(crate) fn push_agent(&mut self, agent: AgentSpec) -> Result<(), ModelError> {
        self.agents.push(agent);
        if let Err(e) = self.check() {
            self.agents.pop();
            return Err(e);
        }
        Ok(())
    }

    pub(crate) fn remove_agent(&mut self, id: &AgentId) -> Option<AgentSpec> {
        let idx = self.agent_index(id)?;
        Some(self.agents.remove(idx))
    }

    pub(crate) fn set_obstacle(&mut self, v: VertexId, blocked: bool) -> Result<(), ModelError> {
        let mut next = self.graph.clone();
        next.set_obstacle(v, blocked)?;
        let previous = std::mem::replace(&mut self.graph, next);
        if let Err(e) = self.check() {
            self.graph = previous;
            return Err(e);
        }
        if let Some(grid) = &mut self.grid {
            if blocked {
                grid.obstacles.insert(v);
            } else {
                grid.obstacles.remove(&v);
            }
        }
        Ok(())
    }

    /// Copy of this instance with the graph's obstacle set edited; used by
    /// relaxation probes and fixture variants.
    pub fn with_graph(&self, graph: WorldGraph) -> Result<Self, ModelError> {
        let mut next = Self::new(
            graph,
            self.agents.clone(),
            self.battery_max,
            self.makespan_bound,
            self.objectives.clone(),
        )?;
        next.grid = None;
        Ok(next)
    }
}
