use std::collections::{BTreeMap, BTreeSet};

use super::graph::{edge_key, EdgeKey, VertexId};
use super::instance::{AgentId, Objective};
use super::ModelError;

/// Where an agent is at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentState {
    AtVertex(VertexId),
    /// Part-way along a slow edge: departed `from` `step` time steps ago.
    InTransit {
        from: VertexId,
        to: VertexId,
        step: u32,
    },
    /// Finished; the agent still occupies its goal for conflict purposes.
    Done,
}

impl AgentState {
    pub fn vertex(&self) -> Option<VertexId> {
        match *self {
            AgentState::AtVertex(v) => Some(v),
            _ => None,
        }
    }

    pub fn transit_edge(&self) -> Option<EdgeKey> {
        match *self {
            AgentState::InTransit { from, to, .. } => Some(edge_key(from, to)),
            _ => None,
        }
    }
}

/// One battery update: the level after a step that started at `level`.
///
/// Charging refills to `battery_max`; otherwise one unit is consumed. The
/// result may be zero; callers enforce the floor.
pub fn battery_step(level: u32, charging: bool, battery_max: u32) -> u32 {
    if charging {
        battery_max
    } else {
        level.saturating_sub(1)
    }
}

/// Timed trajectory of one agent.
///
/// `trajectory[k]` is the state at absolute time `release + k`. Entries after
/// the completion time are [`AgentState::Done`]; `battery` covers the
/// trajectory through completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentPlan {
    pub release: u32,
    pub trajectory: Vec<AgentState>,
    pub battery: Vec<u32>,
    pub charge_times: BTreeSet<u32>,
}

impl AgentPlan {
    /// Absolute time of the last non-`Done` state.
    pub fn completion_time(&self) -> u32 {
        let active = self
            .trajectory
            .iter()
            .rposition(|s| *s != AgentState::Done)
            .unwrap_or(0);
        self.release + active as u32
    }

    /// Stored state at absolute time `t`, if the agent exists then.
    pub fn state_at(&self, t: u32) -> Option<AgentState> {
        if t < self.release {
            return None;
        }
        self.trajectory.get((t - self.release) as usize).copied()
    }

    /// State at `t` with `Done` resolved to the vertex the agent finished on.
    pub fn occupancy_at(&self, t: u32) -> Option<AgentState> {
        match self.state_at(t)? {
            AgentState::Done => {
                let last = (self.completion_time() - self.release) as usize;
                Some(self.trajectory[last])
            }
            other => Some(other),
        }
    }

    /// Timesteps `t` at which the agent goes from `v` at `t` to `v` at `t + 1`.
    pub fn waits_at(&self, v: VertexId) -> Vec<u32> {
        self.trajectory
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] == AgentState::AtVertex(v) && w[1] == AgentState::AtVertex(v))
            .map(|(k, _)| self.release + k as u32)
            .collect()
    }

    /// Replays [`battery_step`] from `initial` using `charge_times`, through the
    /// completion time. Depletion saturates at zero.
    pub fn replay_battery(&self, initial: u32, battery_max: u32) -> Vec<u32> {
        let end = self.completion_time();
        let mut levels = Vec::with_capacity((end - self.release + 1) as usize);
        let mut level = initial;
        levels.push(level);
        for t in self.release..end {
            level = battery_step(level, self.charge_times.contains(&t), battery_max);
            levels.push(level);
        }
        levels
    }
}

/// A (candidate) solution: one timed trajectory per agent, indexed by
/// absolute time `0..=makespan`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan {
    pub makespan: u32,
    pub agents: BTreeMap<AgentId, AgentPlan>,
}

impl Plan {
    pub fn agent(&self, id: &AgentId) -> Result<&AgentPlan, ModelError> {
        self.agents
            .get(id)
            .ok_or_else(|| ModelError::UnknownAgent(id.to_string()))
    }

    /// The state used for conflict checking: after completion an agent keeps
    /// occupying the vertex it finished on.
    pub fn trajectory_occupancy(&self, agent: &AgentId, t: u32) -> Result<AgentState, ModelError> {
        let plan = self.agent(agent)?;
        if t > self.makespan {
            return Err(ModelError::TimeOutOfRange {
                time: t,
                makespan: self.makespan,
            });
        }
        plan.occupancy_at(t).ok_or_else(|| ModelError::NotPresent {
            agent: agent.to_string(),
            time: t,
        })
    }

    pub fn objective_values(&self) -> ObjectiveValues {
        let completions = self.agents.values().map(AgentPlan::completion_time);
        ObjectiveValues {
            makespan: completions.clone().max().unwrap_or(0),
            total_time: completions.sum(),
            charges: self.agents.values().map(|a| a.charge_times.len() as u32).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct ObjectiveValues {
    pub makespan: u32,
    pub total_time: u32,
    pub charges: u32,
}

impl ObjectiveValues {
    pub fn get(&self, objective: Objective) -> u32 {
        match objective {
            Objective::Makespan => self.makespan,
            Objective::TotalTime => self.total_time,
            Objective::Charges => self.charges,
        }
    }

    /// Values in the given priority order, for lexicographic comparison.
    pub fn key(&self, order: &[Objective]) -> Vec<u32> {
        order.iter().map(|&o| self.get(o)).collect()
    }
}
