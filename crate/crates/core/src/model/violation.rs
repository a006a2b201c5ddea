use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::VertexId;
use super::instance::AgentId;

/// Violation kinds. The declaration order is part of the report ordering and
/// of the JSON schema; do not reorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    VertexConflict,
    SwapConflict,
    EdgeOverlapConflict,
    ObstacleCollision,
    BatteryDepleted,
    WaypointMissed,
    GoalMissed,
    Discontinuity,
    HorizonExceeded,
}

impl ViolationKind {
    pub fn is_inter_agent(self) -> bool {
        matches!(
            self,
            ViolationKind::VertexConflict | ViolationKind::SwapConflict | ViolationKind::EdgeOverlapConflict
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Vertex(VertexId),
    Edge(VertexId, VertexId),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Vertex(v) => write!(f, "Cell {v}"),
            Location::Edge(u, v) => write!(f, "the edge between Cell {u} and Cell {v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub agents: Vec<AgentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Location>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<u32>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Violation {
    pub fn new(kind: ViolationKind, agents: Vec<AgentId>) -> Self {
        Self {
            kind,
            agents,
            location: None,
            time: None,
            detail: String::new(),
        }
    }

    pub fn at(mut self, location: Location, time: u32) -> Self {
        self.location = Some(location);
        self.time = Some(time);
        self
    }

    pub fn located(mut self, location: Location) -> Self {
        self.location = Some(location);
        self
    }

    pub fn timed(mut self, time: u32) -> Self {
        self.time = Some(time);
        self
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    fn sort_key(&self) -> (u8, u32, ViolationKind, &[AgentId], Option<Location>, &str) {
        let (timed, t) = match self.time {
            Some(t) => (0, t),
            None => (1, 0),
        };
        (timed, t, self.kind, &self.agents, self.location, &self.detail)
    }

    /// One-sentence rendering used inside explanation messages.
    pub fn describe(&self) -> String {
        let who = |i: usize| self.agents.get(i).map(AgentId::as_str).unwrap_or("?");
        let place = self
            .location
            .map(|l| l.to_string())
            .unwrap_or_else(|| "an unknown location".to_owned());
        let when = self.time.map(|t| format!(" at time step {t}")).unwrap_or_default();
        match self.kind {
            ViolationKind::VertexConflict => {
                format!("{} and {} collide at {place}{when}", who(0), who(1))
            }
            ViolationKind::SwapConflict => {
                format!("{} and {} swap positions across {place}{when}", who(0), who(1))
            }
            ViolationKind::EdgeOverlapConflict => {
                format!("{} and {} are on {place} together{when}", who(0), who(1))
            }
            ViolationKind::ObstacleCollision => {
                format!("{} collides with the obstacle at {place}{when}", who(0))
            }
            ViolationKind::BatteryDepleted => {
                format!("{} runs out of battery at {place}{when}", who(0))
            }
            ViolationKind::WaypointMissed => format!("{} never visits waypoint {place}", who(0)),
            ViolationKind::GoalMissed => format!("{} never reaches its goal {place}", who(0)),
            ViolationKind::HorizonExceeded => {
                format!("{} completes after the makespan bound{when}", who(0))
            }
            ViolationKind::Discontinuity => {
                format!("{} has an invalid trajectory{when}: {}", who(0), self.detail)
            }
        }
    }
}

impl Ord for Violation {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for Violation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untimed_violations_sort_last() {
        let a = Violation::new(ViolationKind::WaypointMissed, vec!["A".into()]).located(Location::Vertex(3));
        let b = Violation::new(ViolationKind::Discontinuity, vec!["A".into()]).timed(40);
        let c = Violation::new(ViolationKind::VertexConflict, vec!["A".into(), "B".into()]).at(Location::Vertex(1), 40);
        let mut v = vec![a.clone(), b.clone(), c.clone()];
        v.sort();
        assert_eq!(v, vec![c, b, a]);
    }

    #[test]
    fn json_shape() {
        let v = Violation::new(ViolationKind::SwapConflict, vec!["A1".into(), "A2".into()]).at(Location::Edge(4, 7), 3);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"SwapConflict","agents":["A1","A2"],"location":{"edge":[4,7]},"time":3}"#
        );
        let back: Violation = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }
}
