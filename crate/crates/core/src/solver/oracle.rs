//! Reference implementation for tests: a layered forward search over joint
//! states and a plan checker, written without reusing the main solver's
//! automaton, search or conflict code.

use std::collections::{BTreeSet, HashMap};

use crate::model::{edge_key, AgentPlan, AgentSpec, AgentState, EdgeKey, Instance, Plan, VertexId};

use super::{AgentSnapshot, Relaxation, SolveOutcome, SolveResult, SolveStats, SolverError};

pub const DEFAULT_ORACLE_CAP: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Pos {
    Absent,
    At(VertexId),
    Moving { from: VertexId, to: VertexId, elapsed: u32 },
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Agent {
    pos: Pos,
    seen: u32,
    level: u32,
}

const FINISHED: Agent = Agent {
    pos: Pos::Finished,
    seen: 0,
    level: 0,
};

struct Rules<'a> {
    instance: &'a Instance,
    relax: &'a Relaxation,
}

impl Rules<'_> {
    fn spec(&self, i: usize) -> &AgentSpec {
        &self.instance.agents()[i]
    }

    fn bit(&self, i: usize, v: VertexId) -> u32 {
        self.spec(i)
            .waypoints
            .iter()
            .position(|&w| w == v)
            .map_or(0, |p| 1 << p)
    }

    fn all_seen(&self, i: usize) -> u32 {
        (1 << self.spec(i).waypoints.len()) - 1
    }

    fn limited(&self) -> bool {
        !self.relax.unlimited_battery
    }

    fn settle(&self, i: usize, v: VertexId, seen: u32, level: u32) -> Agent {
        let seen = seen | self.bit(i, v);
        if v == self.spec(i).goal && seen == self.all_seen(i) {
            FINISHED
        } else {
            Agent {
                pos: Pos::At(v),
                seen,
                level,
            }
        }
    }

    fn entry(&self, i: usize) -> Agent {
        let spec = self.spec(i);
        let level = if self.limited() { spec.battery } else { 0 };
        self.settle(i, spec.start, 0, level)
    }

    /// All `(next, charged)` moves of agent `i` over the step starting at `t`.
    fn moves(&self, i: usize, a: Agent, t: u32) -> Vec<(Agent, bool)> {
        let graph = self.instance.graph();
        let spec = self.spec(i);
        match a.pos {
            Pos::Finished => vec![(FINISHED, false)],
            Pos::Absent => {
                if spec.release <= t + 1 {
                    vec![(self.entry(i), false)]
                } else {
                    vec![(a, false)]
                }
            }
            Pos::Moving { from, to, elapsed } => {
                let level = if self.limited() { a.level.saturating_sub(1) } else { 0 };
                if self.limited() && level == 0 {
                    return vec![];
                }
                let d = graph.duration(from, to).unwrap_or(1);
                if elapsed + 1 >= d {
                    vec![(self.settle(i, to, a.seen, level), false)]
                } else {
                    vec![(
                        Agent {
                            pos: Pos::Moving {
                                from,
                                to,
                                elapsed: elapsed + 1,
                            },
                            ..a
                        },
                        false,
                    )]
                }
            }
            Pos::At(u) => {
                let mut out = Vec::new();
                let mut targets: Vec<VertexId> = vec![u];
                targets.extend(graph.neighbors(u).iter().copied());
                for charge in [false, true] {
                    if charge && !graph.is_charging(u) {
                        continue;
                    }
                    let level = match (self.limited(), charge) {
                        (false, _) => 0,
                        (true, true) => self.instance.battery_max(),
                        (true, false) => a.level.saturating_sub(1),
                    };
                    if self.limited() && level == 0 {
                        continue;
                    }
                    for &v in &targets {
                        if v == u {
                            if self.relax.forbids_wait(&spec.id, u, t) {
                                continue;
                            }
                            out.push((Agent { level, ..a }, charge));
                            continue;
                        }
                        if self.relax.blocks(self.instance, v) {
                            continue;
                        }
                        let next = if graph.duration(u, v) == Some(1) {
                            self.settle(i, v, a.seen, level)
                        } else {
                            Agent {
                                pos: Pos::Moving {
                                    from: u,
                                    to: v,
                                    elapsed: 1,
                                },
                                seen: a.seen,
                                level,
                            }
                        };
                        out.push((next, charge));
                    }
                }
                out
            }
        }
    }

    fn spot(&self, i: usize, a: Agent) -> Option<VertexId> {
        match a.pos {
            Pos::At(v) => Some(v),
            Pos::Finished => Some(self.spec(i).goal),
            _ => None,
        }
    }

    /// Edges an agent is on at some instant strictly inside the step.
    fn edges_during(&self, a: Agent, b: Agent) -> Vec<EdgeKey> {
        let mut out = Vec::new();
        if let Pos::Moving { from, to, .. } = a.pos {
            out.push(edge_key(from, to));
        }
        if let Pos::Moving { from, to, .. } = b.pos {
            out.push(edge_key(from, to));
        }
        if let (Pos::At(u), Pos::At(v)) = (a.pos, b.pos) {
            if u != v {
                out.push(edge_key(u, v));
            }
        }
        out
    }

    fn clash(&self, cur: &[Agent], next: &[Agent]) -> bool {
        if self.relax.ignore_agent_collisions {
            return false;
        }
        let n = cur.len();
        let mut spots = HashMap::new();
        for (i, &agent) in next.iter().enumerate() {
            if let Some(v) = self.spot(i, agent) {
                if spots.insert(v, i).is_some() {
                    return true;
                }
            }
        }
        let lanes: Vec<Vec<EdgeKey>> = (0..n)
            .map(|i| {
                let from = match cur[i].pos {
                    Pos::Finished | Pos::Absent => return Vec::new(),
                    _ => cur[i],
                };
                let to = match next[i].pos {
                    Pos::Finished => Agent {
                        pos: Pos::At(self.spec(i).goal),
                        ..next[i]
                    },
                    _ => next[i],
                };
                self.edges_during(from, to)
            })
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                if lanes[i].iter().any(|e| lanes[j].contains(e)) {
                    return true;
                }
            }
        }
        false
    }

    fn secondary(&self, cur: &[Agent], charged: u32) -> Vec<u32> {
        let busy = cur
            .iter()
            .filter(|a| !matches!(a.pos, Pos::Finished | Pos::Absent))
            .count() as u32;
        self.instance
            .objectives()
            .iter()
            .skip(1)
            .map(|o| match o {
                crate::model::Objective::TotalTime => busy,
                crate::model::Objective::Charges => charged,
                crate::model::Objective::Makespan => 0,
            })
            .collect()
    }
}

struct Entry {
    joint: Vec<Agent>,
    cost: Vec<u32>,
    parent: usize,
    charged: Vec<bool>,
}

fn all_finished(rules: &Rules<'_>, joint: &[Agent], t: u32) -> bool {
    joint.iter().all(|a| a.pos == Pos::Finished) && rules.instance.agents().iter().all(|s| s.release <= t)
}

/// Forward layered search from `start` at time `t0`. Returns the layers and
/// the index of the all-finished entry in the last layer.
enum Explored {
    /// Layers up to the first finishing layer, and the finishing entry.
    Found(Vec<Vec<Entry>>, usize),
    /// Number of joint states stored before running out.
    Exhausted(usize),
}

fn explore(rules: &Rules<'_>, t0: u32, start: Vec<Agent>, limit: u32, cap: usize) -> Result<Explored, SolverError> {
    let width = rules.instance.objectives().len().saturating_sub(1);
    let mut layers = vec![vec![Entry {
        joint: start,
        cost: vec![0; width],
        parent: usize::MAX,
        charged: Vec::new(),
    }]];
    let mut stored = 1usize;
    let mut t = t0;
    loop {
        let last = layers.last().expect("at least one layer");
        if let Some(k) = last.iter().position(|e| all_finished(rules, &e.joint, t)) {
            return Ok(Explored::Found(layers, k));
        }
        if t >= limit {
            return Ok(Explored::Exhausted(stored));
        }
        let mut index: HashMap<Vec<Agent>, usize> = HashMap::new();
        let mut next_layer: Vec<Entry> = Vec::new();
        for (p, entry) in last.iter().enumerate() {
            let options: Vec<Vec<(Agent, bool)>> = entry
                .joint
                .iter()
                .enumerate()
                .map(|(i, &a)| rules.moves(i, a, t))
                .collect();
            if options.iter().any(Vec::is_empty) {
                continue;
            }
            let mut pick = vec![0usize; options.len()];
            'combos: loop {
                let next: Vec<Agent> = pick.iter().enumerate().map(|(i, &k)| options[i][k].0).collect();
                let charged: Vec<bool> = pick.iter().enumerate().map(|(i, &k)| options[i][k].1).collect();
                if !rules.clash(&entry.joint, &next) {
                    let step = rules.secondary(&entry.joint, charged.iter().filter(|c| **c).count() as u32);
                    let cost: Vec<u32> = entry.cost.iter().zip(&step).map(|(a, b)| a + b).collect();
                    match index.get(&next) {
                        Some(&k) => {
                            if cost < next_layer[k].cost {
                                next_layer[k] = Entry {
                                    joint: next,
                                    cost,
                                    parent: p,
                                    charged,
                                };
                            }
                        }
                        None => {
                            index.insert(next.clone(), next_layer.len());
                            next_layer.push(Entry {
                                joint: next,
                                cost,
                                parent: p,
                                charged,
                            });
                            stored += 1;
                            if stored > cap {
                                return Err(SolverError::CapExceeded { cap });
                            }
                        }
                    }
                }
                for i in (0..pick.len()).rev() {
                    pick[i] += 1;
                    if pick[i] < options[i].len() {
                        continue 'combos;
                    }
                    pick[i] = 0;
                }
                break;
            }
        }
        if next_layer.is_empty() {
            return Ok(Explored::Exhausted(stored));
        }
        layers.push(next_layer);
        t += 1;
    }
}

fn to_state(rules: &Rules<'_>, i: usize, prev: Option<Agent>, a: Agent) -> Option<AgentState> {
    match a.pos {
        Pos::Absent => None,
        Pos::At(v) => Some(AgentState::AtVertex(v)),
        Pos::Moving { from, to, elapsed } => Some(AgentState::InTransit {
            from,
            to,
            step: elapsed,
        }),
        Pos::Finished => match prev.map(|p| p.pos) {
            Some(Pos::Finished) => Some(AgentState::Done),
            _ => Some(AgentState::AtVertex(rules.spec(i).goal)),
        },
    }
}

/// Exhaustive optimal solve. Explores every joint state layer by layer, so
/// only use it on small instances; `cap` bounds the number of stored states.
pub fn brute_force_optimal(instance: &Instance, relax: &Relaxation, cap: usize) -> Result<SolveResult, SolverError> {
    let rules = Rules { instance, relax };
    let start: Vec<Agent> = (0..instance.agents().len())
        .map(|i| {
            if rules.spec(i).release == 0 {
                rules.entry(i)
            } else {
                Agent {
                    pos: Pos::Absent,
                    seen: 0,
                    level: 0,
                }
            }
        })
        .collect();
    let limit = relax.horizon_limit(instance);
    let (layers, k) = match explore(&rules, 0, start, limit, cap)? {
        Explored::Found(layers, k) => (layers, k),
        Explored::Exhausted(stored) => {
            return Ok(SolveResult {
                outcome: SolveOutcome::Unsat,
                stats: SolveStats {
                    nodes: stored as u64,
                    horizons: vec![limit],
                    last_completed_horizon: Some(limit),
                    wall_ms: None,
                },
            });
        }
    };
    let nodes = layers.iter().map(|l| l.len() as u64).sum();

    let mut chain = Vec::with_capacity(layers.len());
    let mut at = k;
    for layer in layers.iter().rev() {
        chain.push(at);
        at = layer[at].parent;
    }
    chain.reverse();
    let makespan = layers.len() as u32 - 1;

    let mut plan = Plan {
        makespan,
        ..Plan::default()
    };
    for (i, spec) in instance.agents().iter().enumerate() {
        let mut trajectory = Vec::new();
        let mut charge_times = BTreeSet::new();
        let mut prev = None;
        for (t, (&idx, layer)) in chain.iter().zip(&layers).enumerate() {
            let a = layer[idx].joint[i];
            if let Some(s) = to_state(&rules, i, prev, a) {
                trajectory.push(s);
            }
            if t + 1 < layers.len() && layers[t + 1][chain[t + 1]].charged[i] {
                charge_times.insert(t as u32);
            }
            prev = Some(a);
        }
        let completion = trajectory.iter().rposition(|s| *s != AgentState::Done).unwrap_or(0);
        let mut battery = vec![spec.battery];
        let mut level = spec.battery;
        for k in 0..completion {
            let t = spec.release + k as u32;
            level = if charge_times.contains(&t) {
                instance.battery_max()
            } else {
                level.saturating_sub(1)
            };
            battery.push(level);
        }
        plan.agents.insert(
            spec.id.clone(),
            AgentPlan {
                release: spec.release,
                trajectory,
                battery,
                charge_times,
            },
        );
    }
    Ok(SolveResult {
        outcome: SolveOutcome::Sat(plan),
        stats: SolveStats {
            nodes,
            horizons: vec![makespan],
            last_completed_horizon: Some(makespan),
            wall_ms: None,
        },
    })
}

/// Whether any plan exists from the given mid-execution snapshots (one per
/// instance agent, in order) at time `t0`, completing by `horizon`. Returns
/// the earliest possible makespan.
pub fn brute_force_from(
    instance: &Instance,
    relax: &Relaxation,
    t0: u32,
    snapshots: &[AgentSnapshot],
    horizon: u32,
    cap: usize,
) -> Result<Option<u32>, SolverError> {
    let rules = Rules { instance, relax };
    let start: Vec<Agent> = snapshots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let seen = s.visited.iter().fold(0, |m, &v| m | rules.bit(i, v));
            let level = if rules.limited() { s.battery } else { 0 };
            match s.state {
                AgentState::Done => FINISHED,
                AgentState::AtVertex(v) => rules.settle(i, v, seen, level),
                AgentState::InTransit { from, to, step } => Agent {
                    pos: Pos::Moving {
                        from,
                        to,
                        elapsed: step,
                    },
                    seen,
                    level,
                },
            }
        })
        .collect();
    Ok(match explore(&rules, t0, start, horizon, cap)? {
        Explored::Found(layers, _) => Some(t0 + layers.len() as u32 - 1),
        Explored::Exhausted(_) => None,
    })
}

/// Independent feasibility check: accepts exactly the plans the validator
/// accepts under `relax` (forbidden waits are not plan constraints).
pub fn oracle_accepts(instance: &Instance, plan: &Plan, relax: &Relaxation) -> bool {
    let rules = Rules { instance, relax };
    let n = instance.agents().len();
    if plan.agents.len() != n {
        return false;
    }
    let span = plan.makespan as usize + 1;
    let mut timeline: Vec<Vec<Agent>> = vec![Vec::with_capacity(n); span];
    let mut charged_at: Vec<Vec<bool>> = vec![vec![false; n]; span];

    for (i, spec) in instance.agents().iter().enumerate() {
        let Some(ap) = plan.agents.get(&spec.id) else {
            return false;
        };
        if ap.release != spec.release || ap.release > plan.makespan {
            return false;
        }
        let r = ap.release as usize;
        if ap.trajectory.len() != span - r || ap.trajectory[0] != AgentState::AtVertex(spec.start) {
            return false;
        }
        let free = Relaxation {
            forbidden_waits: Vec::new(),
            ..relax.clone()
        };
        let walker = Rules { instance, relax: &free };
        for slot in &mut timeline[..r] {
            slot.push(Agent {
                pos: Pos::Absent,
                seen: 0,
                level: 0,
            });
        }
        let mut a = walker.entry(i);
        let mut levels = vec![spec.battery];
        let mut level = spec.battery;
        timeline[r].push(a);
        let mut finished_at = (a.pos == Pos::Finished).then_some(r);
        for k in 1..ap.trajectory.len() {
            let t = (r + k - 1) as u32;
            let charge = ap.charge_times.contains(&t);
            let observed = ap.trajectory[k];
            let found = walker
                .moves(i, a, t)
                .into_iter()
                .filter(|&(_, c)| c == charge)
                .map(|(next, _)| next)
                .find(|&next| to_state(&walker, i, Some(a), next) == Some(observed));
            let Some(next) = found else {
                return false;
            };
            if a.pos != Pos::Finished {
                level = if charge {
                    instance.battery_max()
                } else {
                    level.saturating_sub(1)
                };
                levels.push(level);
            }
            charged_at[t as usize + 1][i] = charge;
            if next.pos == Pos::Finished && finished_at.is_none() {
                finished_at = Some(r + k);
            }
            a = next;
            timeline[r + k].push(a);
        }
        let Some(done) = finished_at else {
            return false;
        };
        if done as u32 > relax.horizon_limit(instance) {
            return false;
        }
        if ap.charge_times.iter().any(|&t| (t as usize) < r || t as usize >= done) {
            return false;
        }
        if ap.battery != levels {
            return false;
        }
        if rules.limited() && levels.contains(&0) {
            return false;
        }
    }

    for t in 0..span.saturating_sub(1) {
        if rules.clash(&timeline[t], &timeline[t + 1]) {
            return false;
        }
    }
    if span == 1 {
        let mut seen = BTreeSet::new();
        for (i, a) in timeline[0].iter().enumerate() {
            if let Some(v) = rules.spot(i, *a) {
                if !seen.insert(v) {
                    return false;
                }
            }
        }
    }
    true
}
