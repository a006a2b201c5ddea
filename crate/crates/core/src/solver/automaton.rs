//! Per-agent compiled state machine used by the joint search.
//!
//! An agent's local state is an abstract position (vertex or transit step,
//! visited-waypoint mask, progress along a fixed route, done flag) paired
//! with a battery level. Abstract states are enumerated once per solve;
//! distances to completion and to the nearest charging station over that
//! graph give admissible pruning bounds.

use std::collections::{HashMap, VecDeque};

use crate::model::{AgentSpec, AgentState, Instance, VertexId};

use super::relax::{Relaxation, TimeWindow};

pub(crate) const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Loc {
    At(VertexId),
    Transit { from: VertexId, to: VertexId, step: u32 },
}

impl Loc {
    pub(crate) fn to_state(self) -> AgentState {
        match self {
            Loc::At(v) => AgentState::AtVertex(v),
            Loc::Transit { from, to, step } => AgentState::InTransit { from, to, step },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Abs {
    loc: Loc,
    mask: u32,
    route_pos: u32,
    done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Move,
    Wait,
}

/// Where an agent begins a search: its start vertex for a fresh solve, or
/// its state at the current time for a dynamic resolve.
#[derive(Debug, Clone)]
pub(crate) struct StartState {
    pub loc: Loc,
    pub visited: Vec<VertexId>,
    pub battery: u32,
    pub done: bool,
}

impl StartState {
    pub(crate) fn fresh(spec: &AgentSpec) -> Self {
        Self {
            loc: Loc::At(spec.start),
            visited: vec![spec.start],
            battery: spec.battery,
            done: false,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AgentModel {
    pub release: u32,
    pub goal: VertexId,
    pub initial: u32,
    abs: Vec<Abs>,
    succ: Vec<Vec<(u32, Step)>>,
    h: Vec<u32>,
    to_charge: Vec<u32>,
    charging: Vec<bool>,
    levels: u32,
    battery_max: u32,
    limited: bool,
    forbidden: Vec<(VertexId, TimeWindow)>,
}

impl AgentModel {
    /// Compiles the automaton. `route`, when given, is the exact sequence of
    /// vertices the agent must arrive at next; only waits and charges stay free.
    pub(crate) fn new(
        instance: &Instance,
        spec: &AgentSpec,
        relax: &Relaxation,
        start: StartState,
        route: Option<Vec<VertexId>>,
    ) -> Self {
        let graph = instance.graph();
        let bits: HashMap<VertexId, u32> = spec
            .waypoints
            .iter()
            .enumerate()
            .map(|(i, &w)| (w, 1u32 << i))
            .collect();
        let full = (1u32 << spec.waypoints.len()) - 1;
        let route_len = route.as_ref().map_or(0, |r| r.len() as u32);
        let goal = spec.goal;
        let done_abs = Abs {
            loc: Loc::At(goal),
            mask: full,
            route_pos: route_len,
            done: true,
        };
        let arrive = |v: VertexId, mask: u32, pos: u32| {
            let mask = mask | bits.get(&v).copied().unwrap_or(0);
            let pos = if route.is_some() { pos + 1 } else { pos };
            if v == goal && mask == full && pos == route_len {
                done_abs
            } else {
                Abs {
                    loc: Loc::At(v),
                    mask,
                    route_pos: pos,
                    done: false,
                }
            }
        };

        let start_mask = start
            .visited
            .iter()
            .fold(0, |m, v| m | bits.get(v).copied().unwrap_or(0));
        let start_abs = if start.done {
            done_abs
        } else {
            match start.loc {
                Loc::At(v) if v == goal && start_mask == full && route_len == 0 => done_abs,
                loc => Abs {
                    loc,
                    mask: start_mask,
                    route_pos: 0,
                    done: false,
                },
            }
        };

        let mut abs = vec![start_abs];
        let mut index = HashMap::from([(start_abs, 0u32)]);
        let mut succ: Vec<Vec<(u32, Step)>> = Vec::new();
        let mut queue = VecDeque::from([0u32]);
        while let Some(i) = queue.pop_front() {
            let s = abs[i as usize];
            let mut next = Vec::new();
            if !s.done {
                match s.loc {
                    Loc::At(u) => {
                        for &v in graph.neighbors(u) {
                            if relax.blocks(instance, v) {
                                continue;
                            }
                            if let Some(r) = &route {
                                if r.get(s.route_pos as usize) != Some(&v) {
                                    continue;
                                }
                            }
                            let d = graph.duration(u, v).unwrap_or(1);
                            let target = if d == 1 {
                                arrive(v, s.mask, s.route_pos)
                            } else {
                                Abs {
                                    loc: Loc::Transit {
                                        from: u,
                                        to: v,
                                        step: 1,
                                    },
                                    ..s
                                }
                            };
                            next.push((target, Step::Move));
                        }
                        next.push((s, Step::Wait));
                    }
                    Loc::Transit { from, to, step } => {
                        let d = graph.duration(from, to).unwrap_or(step + 1);
                        let target = if step + 1 < d {
                            Abs {
                                loc: Loc::Transit {
                                    from,
                                    to,
                                    step: step + 1,
                                },
                                ..s
                            }
                        } else {
                            arrive(to, s.mask, s.route_pos)
                        };
                        next.push((target, Step::Move));
                    }
                }
            }
            let mut edges = Vec::with_capacity(next.len());
            for (target, step) in next {
                let j = *index.entry(target).or_insert_with(|| {
                    abs.push(target);
                    queue.push_back(abs.len() as u32 - 1);
                    abs.len() as u32 - 1
                });
                edges.push((j, step));
            }
            succ.push(edges);
        }
        // The queue pops indices in insertion order, so `succ[i]` lines up.

        let mut reverse = vec![Vec::new(); abs.len()];
        for (i, edges) in succ.iter().enumerate() {
            for &(j, _) in edges {
                if j as usize != i {
                    reverse[j as usize].push(i as u32);
                }
            }
        }
        let charging: Vec<bool> = abs
            .iter()
            .map(|a| !a.done && matches!(a.loc, Loc::At(v) if graph.is_charging(v)))
            .collect();
        let h = reverse_bfs(&reverse, abs.iter().map(|a| a.done));
        let to_charge = reverse_bfs(&reverse, charging.iter().copied());

        let limited = !relax.unlimited_battery;
        let levels = if limited { instance.battery_max() + 1 } else { 1 };
        let battery = if limited {
            start.battery.min(instance.battery_max())
        } else {
            0
        };
        let forbidden = relax
            .forbidden_waits
            .iter()
            .filter(|f| f.agent == spec.id)
            .map(|f| (f.vertex, f.window))
            .collect();

        let mut model = Self {
            release: spec.release,
            goal,
            initial: 0,
            abs,
            succ,
            h,
            to_charge,
            charging,
            levels,
            battery_max: instance.battery_max(),
            limited,
            forbidden,
        };
        model.initial = model.local(0, battery);
        model
    }

    fn local(&self, abs: u32, battery: u32) -> u32 {
        if self.abs[abs as usize].done {
            abs * self.levels
        } else {
            abs * self.levels + battery
        }
    }

    fn abs_of(&self, local: u32) -> &Abs {
        &self.abs[(local / self.levels) as usize]
    }

    pub(crate) fn battery(&self, local: u32) -> u32 {
        local % self.levels
    }

    pub(crate) fn is_done(&self, local: u32) -> bool {
        self.abs_of(local).done
    }

    pub(crate) fn loc(&self, local: u32) -> Loc {
        self.abs_of(local).loc
    }

    /// Lower bound on the steps needed to complete, ignoring battery.
    pub(crate) fn h(&self, local: u32) -> u32 {
        self.h[(local / self.levels) as usize]
    }

    fn viable(&self, abs: u32, battery: u32) -> bool {
        let i = abs as usize;
        if self.h[i] == UNREACHABLE {
            return false;
        }
        if !self.limited || self.abs[i].done {
            return true;
        }
        if battery == 0 {
            return false;
        }
        let reach = battery - 1;
        self.h[i] <= reach || self.to_charge[i] <= reach
    }

    fn forbids_wait(&self, v: VertexId, t: u32) -> bool {
        self.forbidden
            .iter()
            .any(|&(w, window)| w == v && window.covers_step(t))
    }

    /// Successors of `local` for the step `t -> t + 1`, in tie-breaking
    /// order: plain moves by target vertex, plain wait, then the same with a
    /// charge. Each entry is `(next, charged)`.
    pub(crate) fn successors(&self, local: u32, t: u32, out: &mut Vec<(u32, bool)>) {
        out.clear();
        let i = (local / self.levels) as usize;
        let s = &self.abs[i];
        if s.done {
            out.push((local, false));
            return;
        }
        let battery = self.battery(local);
        let passes: &[bool] = if self.limited && self.charging[i] {
            &[false, true]
        } else {
            &[false]
        };
        for &charge in passes {
            let next_battery = match (self.limited, charge) {
                (false, _) => 0,
                (true, true) => self.battery_max,
                (true, false) => battery.saturating_sub(1),
            };
            for &(j, step) in &self.succ[i] {
                if step == Step::Wait {
                    if let Loc::At(v) = s.loc {
                        if self.forbids_wait(v, t) {
                            continue;
                        }
                    }
                }
                // Done states forget the level, so check arrival here.
                let arrives_empty = self.limited && next_battery == 0 && self.abs[j as usize].done;
                if !arrives_empty && self.viable(j, next_battery) {
                    out.push((self.local(j, next_battery), charge));
                }
            }
        }
    }

    /// Whether the agent can ever complete from its initial state.
    pub(crate) fn solvable(&self) -> bool {
        self.viable(self.initial / self.levels, self.battery(self.initial))
    }
}

fn reverse_bfs(reverse: &[Vec<u32>], sources: impl Iterator<Item = bool>) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; reverse.len()];
    let mut queue = VecDeque::new();
    for (i, is_source) in sources.enumerate() {
        if is_source {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for &p in &reverse[i] {
            if dist[p as usize] == UNREACHABLE {
                dist[p as usize] = dist[i] + 1;
                queue.push_back(p as usize);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GridSpec, Objective};

    fn line(slow: bool) -> Instance {
        let mut grid = GridSpec::new(1, 4);
        if slow {
            grid.slow_cells = [2, 3].into();
        }
        grid.charging = [2].into();
        Instance::from_grid(
            grid,
            vec![AgentSpec::new("A", 1, 4, 3).with_waypoints([3])],
            3,
            10,
            vec![Objective::Makespan, Objective::TotalTime],
        )
        .unwrap()
    }

    #[test]
    fn heuristic_counts_transit_steps() {
        let inst = line(true);
        let spec = &inst.agents()[0];
        let m = AgentModel::new(&inst, spec, &Relaxation::none(), StartState::fresh(spec), None);
        assert_eq!(m.h(m.initial), 4);
        let mut out = Vec::new();
        m.successors(m.initial, 0, &mut out);
        // Move to 2, then wait; vertex 1 is not a charging station.
        assert_eq!(out.len(), 2);
        assert!(matches!(m.loc(out[0].0), Loc::At(2)));
        assert_eq!(m.battery(out[0].0), 2);
    }

    #[test]
    fn charging_variants_come_after_plain_ones() {
        let inst = line(false);
        let spec = &inst.agents()[0];
        let m = AgentModel::new(&inst, spec, &Relaxation::none(), StartState::fresh(spec), None);
        let mut out = Vec::new();
        m.successors(m.initial, 0, &mut out);
        let at2 = out[0].0;
        m.successors(at2, 1, &mut out);
        let kinds: Vec<(Loc, bool)> = out.iter().map(|&(l, c)| (m.loc(l), c)).collect();
        // Battery 2 at vertex 2: a plain move would strand the agent at level 1
        // away from the station, so only the plain wait survives.
        assert_eq!(
            kinds,
            vec![
                (Loc::At(2), false),
                (Loc::At(1), true),
                (Loc::At(3), true),
                (Loc::At(2), true),
            ]
        );
    }

    #[test]
    fn route_restriction_allows_only_the_next_vertex() {
        let inst = line(false);
        let spec = &inst.agents()[0];
        let m = AgentModel::new(
            &inst,
            spec,
            &Relaxation::with_unlimited_battery(),
            StartState::fresh(spec),
            Some(vec![2, 3, 4]),
        );
        let mut out = Vec::new();
        m.successors(m.initial, 0, &mut out);
        let locs: Vec<Loc> = out.iter().map(|&(l, _)| m.loc(l)).collect();
        assert_eq!(locs, vec![Loc::At(2), Loc::At(1)]);
        assert_eq!(m.h(m.initial), 3);
    }

    #[test]
    fn forbidden_wait_removes_the_wait() {
        let inst = line(false);
        let spec = &inst.agents()[0];
        let relax = Relaxation::forbidding_wait("A".into(), 1, TimeWindow::ALL);
        let m = AgentModel::new(&inst, spec, &relax, StartState::fresh(spec), None);
        let mut out = Vec::new();
        m.successors(m.initial, 0, &mut out);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn arriving_at_the_goal_needs_charge_left() {
        let inst = Instance::from_grid(
            GridSpec::new(1, 3),
            vec![AgentSpec::new("A", 1, 3, 2)],
            2,
            10,
            vec![Objective::Makespan],
        )
        .unwrap();
        let spec = &inst.agents()[0];
        let m = AgentModel::new(&inst, spec, &Relaxation::none(), StartState::fresh(spec), None);
        let mut out = Vec::new();
        m.successors(m.initial, 0, &mut out);
        let at2 = out.iter().find(|&&(l, _)| m.loc(l) == Loc::At(2)).map(|&(l, _)| l);
        // Reaching 2 leaves level 1; the last step would complete at level 0.
        assert!(at2.is_none_or(|l| {
            m.successors(l, 1, &mut out);
            out.iter().all(|&(n, _)| !m.is_done(n))
        }));
    }
}
