//! Joint-state search at a fixed horizon.
//!
//! A memoized depth-first search computes the lexicographic cost-to-go of
//! every reachable joint state; the plan is then read off forward by taking,
//! at each step, the first joint successor (agents in order, each agent's
//! successors in tie-breaking order) that attains the optimum. Independent
//! groups of agents are solved separately and merged on the first conflict.

use std::collections::HashMap;

use super::automaton::{AgentModel, Loc};
use super::Budget;
use crate::model::{edge_key, EdgeKey, Objective};

pub(crate) const ABSENT: u32 = u32::MAX;

pub(crate) type Cost = [u32; 2];

/// Where each secondary objective accumulates in a [`Cost`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct Weights {
    total_time: Option<usize>,
    charges: Option<usize>,
}

impl Weights {
    pub(crate) fn new(objectives: &[Objective]) -> Self {
        let mut w = Weights {
            total_time: None,
            charges: None,
        };
        for (slot, objective) in objectives.iter().skip(1).enumerate() {
            match objective {
                Objective::TotalTime => w.total_time = Some(slot),
                Objective::Charges => w.charges = Some(slot),
                Objective::Makespan => {}
            }
        }
        w
    }

    fn step(&self, active: u32, charges: u32) -> Cost {
        let mut c = [0; 2];
        if let Some(s) = self.total_time {
            c[s] += active;
        }
        if let Some(s) = self.charges {
            c[s] += charges;
        }
        c
    }
}

fn add(a: Cost, b: Cost) -> Cost {
    [a[0] + b[0], a[1] + b[1]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Interrupted;

/// Search counters, accumulated across horizons.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Counters {
    pub nodes: u64,
}

/// The states of one agent from `t0` to the end of its group's plan, plus
/// the times at which it charged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Track {
    pub states: Vec<u32>,
    pub charges: Vec<u32>,
}

impl Track {
    fn at(&self, k: usize) -> u32 {
        *self
            .states
            .get(k)
            .unwrap_or_else(|| self.states.last().expect("non-empty track"))
    }
}

/// Occupancy of one agent over the step `t -> t + 1`.
#[derive(Clone, Copy)]
struct Occ {
    cur: Option<Loc>,
    next: Option<Loc>,
}

fn transit_edge(loc: Option<Loc>) -> Option<EdgeKey> {
    match loc {
        Some(Loc::Transit { from, to, .. }) => Some(edge_key(from, to)),
        _ => None,
    }
}

fn entering(o: &Occ) -> Option<EdgeKey> {
    match (o.cur, o.next) {
        (Some(Loc::At(_)), Some(Loc::Transit { from, to, step: 1 })) => Some(edge_key(from, to)),
        _ => None,
    }
}

fn conflict(a: &Occ, b: &Occ) -> bool {
    if let (Some(Loc::At(u)), Some(Loc::At(v))) = (a.next, b.next) {
        if u == v {
            return true;
        }
    }
    if let (Some(Loc::At(au)), Some(Loc::At(av)), Some(Loc::At(bu)), Some(Loc::At(bv))) = (a.cur, a.next, b.cur, b.next)
    {
        if au != av && au == bv && av == bu {
            return true;
        }
    }
    let hits = |enter: Option<EdgeKey>, other: &Occ| {
        enter.is_some() && (enter == transit_edge(other.cur) || enter == transit_edge(other.next))
    };
    hits(entering(a), b) || hits(entering(b), a)
}

struct Group<'a> {
    models: Vec<&'a AgentModel>,
    t0: u32,
    horizon: u32,
    weights: Weights,
    collisions: bool,
    last_release: u32,
    memo: HashMap<(u32, Box<[u32]>), Option<Cost>>,
    budget: &'a Budget,
    counters: &'a mut Counters,
    scratch: Vec<(u32, bool)>,
}

struct Successor {
    next: Box<[u32]>,
    step: Cost,
    charged: Vec<bool>,
}

impl<'a> Group<'a> {
    fn occupancy(&self, i: usize, local: u32) -> Option<Loc> {
        (local != ABSENT).then(|| {
            let m = self.models[i];
            if m.is_done(local) {
                Loc::At(m.goal)
            } else {
                m.loc(local)
            }
        })
    }

    fn terminal(&self, t: u32, joint: &[u32]) -> bool {
        t >= self.last_release
            && joint
                .iter()
                .enumerate()
                .all(|(i, &l)| l != ABSENT && self.models[i].is_done(l))
    }

    fn hopeless(&self, t: u32, joint: &[u32]) -> bool {
        joint.iter().enumerate().any(|(i, &l)| {
            let m = self.models[i];
            if l == ABSENT {
                m.release.max(t) + m.h(m.initial) > self.horizon
            } else {
                t + m.h(l) > self.horizon
            }
        })
    }

    fn successors(&mut self, t: u32, joint: &[u32]) -> Vec<Successor> {
        let n = joint.len();
        let mut options: Vec<Vec<(u32, bool)>> = Vec::with_capacity(n);
        for (i, &l) in joint.iter().enumerate() {
            let m = self.models[i];
            if l == ABSENT {
                let next = if m.release <= t + 1 { m.initial } else { ABSENT };
                options.push(vec![(next, false)]);
            } else {
                m.successors(l, t, &mut self.scratch);
                let horizon = self.horizon;
                options.push(
                    self.scratch
                        .iter()
                        .copied()
                        .filter(|&(s, _)| t + 1 + m.h(s) <= horizon)
                        .collect(),
                );
            }
        }
        let active = joint
            .iter()
            .enumerate()
            .filter(|&(i, &l)| l != ABSENT && !self.models[i].is_done(l))
            .count() as u32;

        let mut out = Vec::new();
        let mut chosen: Vec<(u32, bool)> = Vec::with_capacity(n);
        let mut occs: Vec<Occ> = Vec::with_capacity(n);
        self.product(joint, &options, &mut chosen, &mut occs, active, &mut out);
        out
    }

    fn product(
        &self,
        joint: &[u32],
        options: &[Vec<(u32, bool)>],
        chosen: &mut Vec<(u32, bool)>,
        occs: &mut Vec<Occ>,
        active: u32,
        out: &mut Vec<Successor>,
    ) {
        let i = chosen.len();
        if i == options.len() {
            let charges = chosen.iter().filter(|c| c.1).count() as u32;
            out.push(Successor {
                next: chosen.iter().map(|c| c.0).collect(),
                step: self.weights.step(active, charges),
                charged: chosen.iter().map(|c| c.1).collect(),
            });
            return;
        }
        let cur = self.occupancy(i, joint[i]);
        for &(next, charged) in &options[i] {
            let occ = Occ {
                cur,
                next: self.occupancy(i, next),
            };
            if self.collisions && occs.iter().any(|o| conflict(o, &occ)) {
                continue;
            }
            chosen.push((next, charged));
            occs.push(occ);
            self.product(joint, options, chosen, occs, active, out);
            chosen.pop();
            occs.pop();
        }
    }

    fn value(&mut self, t: u32, joint: &[u32]) -> Result<Option<Cost>, Interrupted> {
        if self.terminal(t, joint) {
            return Ok(Some([0, 0]));
        }
        if t >= self.horizon || self.hopeless(t, joint) {
            return Ok(None);
        }
        let key = (t, Box::<[u32]>::from(joint));
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        self.counters.nodes += 1;
        if self.counters.nodes % 1024 == 0 && self.budget.expired() {
            return Err(Interrupted);
        }
        let mut best: Option<Cost> = None;
        for s in self.successors(t, joint) {
            if let Some(rest) = self.value(t + 1, &s.next)? {
                let total = add(s.step, rest);
                if best.is_none_or(|b| total < b) {
                    best = Some(total);
                }
            }
        }
        self.memo.insert(key, best);
        Ok(best)
    }

    fn extract(&mut self, start: Vec<u32>) -> Result<Option<Vec<Track>>, Interrupted> {
        let Some(mut target) = self.value(self.t0, &start)? else {
            return Ok(None);
        };
        let mut tracks: Vec<Track> = start
            .iter()
            .map(|&l| Track {
                states: vec![l],
                charges: Vec::new(),
            })
            .collect();
        let mut joint = start;
        let mut t = self.t0;
        while !self.terminal(t, &joint) {
            let mut taken = None;
            for s in self.successors(t, &joint) {
                if let Some(rest) = self.value(t + 1, &s.next)? {
                    if add(s.step, rest) == target {
                        target = rest;
                        taken = Some(s);
                        break;
                    }
                }
            }
            let s = taken.expect("an optimal successor exists");
            for (i, track) in tracks.iter_mut().enumerate() {
                track.states.push(s.next[i]);
                if s.charged[i] {
                    track.charges.push(t);
                }
            }
            joint = s.next.into_vec();
            t += 1;
        }
        Ok(Some(tracks))
    }
}

/// Solves a set of agents jointly at `horizon`. Returns one track per model,
/// all of the same length, or `None` when no plan completes by `horizon`.
fn solve_group(
    models: &[&AgentModel],
    t0: u32,
    horizon: u32,
    weights: Weights,
    collisions: bool,
    budget: &Budget,
    counters: &mut Counters,
) -> Result<Option<Vec<Track>>, Interrupted> {
    let start: Vec<u32> = models
        .iter()
        .map(|m| if m.release <= t0 { m.initial } else { ABSENT })
        .collect();
    let mut group = Group {
        models: models.to_vec(),
        t0,
        horizon,
        weights,
        collisions,
        last_release: models.iter().map(|m| m.release).max().unwrap_or(0),
        memo: HashMap::new(),
        budget,
        counters,
        scratch: Vec::new(),
    };
    group.extract(start)
}

/// First pair of agents (by model index) whose tracks conflict, if any.
fn first_conflict(models: &[AgentModel], tracks: &[Track], groups_of: &[usize]) -> Option<(usize, usize)> {
    let len = tracks.iter().map(|t| t.states.len()).max().unwrap_or(0);
    let occ = |i: usize, k: usize| -> Option<Loc> {
        let l = tracks[i].at(k);
        (l != ABSENT).then(|| {
            if models[i].is_done(l) {
                Loc::At(models[i].goal)
            } else {
                models[i].loc(l)
            }
        })
    };
    for k in 0..len.saturating_sub(1) {
        for i in 0..models.len() {
            let a = Occ {
                cur: occ(i, k),
                next: occ(i, k + 1),
            };
            for j in i + 1..models.len() {
                if groups_of[i] == groups_of[j] {
                    continue;
                }
                let b = Occ {
                    cur: occ(j, k),
                    next: occ(j, k + 1),
                };
                if conflict(&a, &b) {
                    return Some((i, j));
                }
            }
        }
    }
    None
}

/// Solves all `models` at `horizon` with independence detection: agents are
/// planned in singleton groups, and groups whose plans conflict are merged
/// and re-solved together.
pub(crate) fn solve_at_horizon(
    models: &[AgentModel],
    t0: u32,
    horizon: u32,
    weights: Weights,
    collisions: bool,
    budget: &Budget,
    counters: &mut Counters,
) -> Result<Option<Vec<Track>>, Interrupted> {
    let n = models.len();
    let mut groups_of: Vec<usize> = (0..n).collect();
    let mut cache: HashMap<Vec<usize>, Vec<Track>> = HashMap::new();
    loop {
        let mut tracks: Vec<Option<Track>> = vec![None; n];
        let mut group_ids: Vec<usize> = groups_of.clone();
        group_ids.sort_unstable();
        group_ids.dedup();
        for g in group_ids {
            let members: Vec<usize> = (0..n).filter(|&i| groups_of[i] == g).collect();
            if !cache.contains_key(&members) {
                let refs: Vec<&AgentModel> = members.iter().map(|&i| &models[i]).collect();
                match solve_group(&refs, t0, horizon, weights, collisions, budget, counters)? {
                    Some(found) => {
                        cache.insert(members.clone(), found);
                    }
                    None => return Ok(None),
                }
            }
            for (k, &i) in members.iter().enumerate() {
                tracks[i] = Some(cache[&members][k].clone());
            }
        }
        let mut tracks: Vec<Track> = tracks.into_iter().map(|t| t.expect("every agent planned")).collect();
        if !collisions {
            return Ok(Some(pad(tracks)));
        }
        match first_conflict(models, &tracks, &groups_of) {
            None => {
                tracks = pad(tracks);
                return Ok(Some(tracks));
            }
            Some((i, j)) => {
                let (keep, drop) = (groups_of[i].min(groups_of[j]), groups_of[i].max(groups_of[j]));
                for g in groups_of.iter_mut() {
                    if *g == drop {
                        *g = keep;
                    }
                }
            }
        }
    }
}

fn pad(mut tracks: Vec<Track>) -> Vec<Track> {
    let len = tracks.iter().map(|t| t.states.len()).max().unwrap_or(0);
    for t in &mut tracks {
        let last = *t.states.last().expect("non-empty track");
        t.states.resize(len, last);
    }
    tracks
}
