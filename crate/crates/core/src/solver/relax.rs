use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{AgentId, Instance, VertexId};

/// Inclusive interval of time steps; `to: None` leaves it open-ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    #[serde(default)]
    pub from: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<u32>,
}

impl TimeWindow {
    pub const ALL: TimeWindow = TimeWindow { from: 0, to: None };

    pub fn new(from: u32, to: u32) -> Self {
        Self { from, to: Some(to) }
    }

    /// Whether the step `t -> t + 1` lies inside the window.
    pub fn covers_step(&self, t: u32) -> bool {
        t >= self.from && self.to.is_none_or(|to| t < to)
    }
}

impl Default for TimeWindow {
    fn default() -> Self {
        Self::ALL
    }
}

/// `agent` must never stay at `vertex` across a step inside `window`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ForbiddenWait {
    pub agent: AgentId,
    pub vertex: VertexId,
    #[serde(default)]
    pub window: TimeWindow,
}

/// Constraint switches for a solve. Everything except `forbidden_waits`
/// only removes constraints.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relaxation {
    #[serde(default)]
    pub ignore_agent_collisions: bool,
    #[serde(default)]
    pub ignored_obstacles: BTreeSet<VertexId>,
    #[serde(default)]
    pub unlimited_battery: bool,
    #[serde(default)]
    pub extra_horizon: u32,
    #[serde(default)]
    pub forbidden_waits: Vec<ForbiddenWait>,
}

impl Relaxation {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_none(&self) -> bool {
        *self == Self::default()
    }

    pub fn ignoring_collisions() -> Self {
        Self {
            ignore_agent_collisions: true,
            ..Self::default()
        }
    }

    pub fn without_obstacle(v: VertexId) -> Self {
        Self {
            ignored_obstacles: [v].into(),
            ..Self::default()
        }
    }

    pub fn with_extra_horizon(k: u32) -> Self {
        Self {
            extra_horizon: k,
            ..Self::default()
        }
    }

    pub fn with_unlimited_battery() -> Self {
        Self {
            unlimited_battery: true,
            ..Self::default()
        }
    }

    pub fn forbidding_wait(agent: AgentId, vertex: VertexId, window: TimeWindow) -> Self {
        Self {
            forbidden_waits: vec![ForbiddenWait { agent, vertex, window }],
            ..Self::default()
        }
    }

    pub fn horizon_limit(&self, instance: &Instance) -> u32 {
        instance.makespan_bound() + self.extra_horizon
    }

    /// Whether `v` blocks movement under this relaxation.
    pub fn blocks(&self, instance: &Instance, v: VertexId) -> bool {
        instance.graph().is_obstacle(v) && !self.ignored_obstacles.contains(&v)
    }

    pub fn forbids_wait(&self, agent: &AgentId, v: VertexId, t: u32) -> bool {
        self.forbidden_waits
            .iter()
            .any(|f| &f.agent == agent && f.vertex == v && f.window.covers_step(t))
    }

    /// Checks the relaxation refers to things that exist in `instance`.
    pub fn check(&self, instance: &Instance, delta_max: u32) -> Result<(), String> {
        if let Some(v) = self
            .ignored_obstacles
            .iter()
            .find(|v| !instance.graph().is_obstacle(**v))
        {
            return Err(format!("ignored_obstacles: vertex {v} is not an obstacle"));
        }
        if self.extra_horizon > delta_max {
            return Err(format!(
                "extra_horizon: {} exceeds the configured maximum {delta_max}",
                self.extra_horizon
            ));
        }
        if let Some(f) = self.forbidden_waits.iter().find(|f| instance.agent(&f.agent).is_none()) {
            return Err(format!("forbidden_waits: unknown agent `{}`", f.agent));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_covers_steps_inside() {
        let w = TimeWindow::new(0, 2);
        assert!(w.covers_step(0));
        assert!(w.covers_step(1));
        assert!(!w.covers_step(2));
        assert!(TimeWindow::ALL.covers_step(1000));
        assert!(!TimeWindow { from: 3, to: None }.covers_step(2));
    }
}
