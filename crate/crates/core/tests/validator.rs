mod common;

use common::{instance, plan, refit, with_extra_wait};
use mmapf::io::{parse_instance, parse_plan};
use mmapf::model::{battery_step, AgentId, Location, Plan, ViolationKind};
use mmapf::solver::{oracle_accepts, Relaxation};
use mmapf::validate::{categorize, validate, ValidationReport, COLLISIONS, LOW_BATTERY, TASK_INCOMPLETE};

fn kinds(report: &ValidationReport) -> Vec<ViolationKind> {
    report.violations.iter().map(|v| v.kind).collect()
}

#[test]
fn fix_m_table_plan_is_feasible() {
    let m = instance("fix_m.json");
    let p = plan("fix_m_plan.json", &m);
    let report = validate(&m, &p);
    assert!(report.feasible, "{report:?}");
    assert!(report.violations.is_empty() && report.summary.is_empty());

    let a1 = [10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 10, 9, 8, 7, 6, 5, 4, 3];
    let a2 = [8, 7, 6, 5, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 10, 9, 8, 7, 6];
    let replay = |id: &str, initial| p.agents[&id.into()].replay_battery(initial, 10);
    assert_eq!(replay("A1", 10), a1);
    assert_eq!(replay("A2", 8), a2);
    assert_eq!(p.agents[&"A1".into()].battery, a1);
    assert_eq!(p.agents[&"A2".into()].battery, a2);
}

#[test]
fn fix_e1_plans_are_feasible() {
    let e1 = instance("fix_e1.json");
    for name in ["fix_e1_plan1.json", "fix_e1_plan2.json"] {
        let p = plan(name, &e1);
        assert!(validate(&e1, &p).feasible, "{name}");
        assert_eq!(p.objective_values().makespan, 4);
    }
}

#[test]
fn skipping_the_wait_collides_at_seven() {
    let e1 = instance("fix_e1.json");
    let mut p = plan("fix_e1_plan1.json", &e1);
    p.agents.get_mut(&"A2".into()).unwrap().trajectory.remove(0);
    refit(&mut p, &e1);
    let report = validate(&e1, &p);
    let first = report.first().unwrap();
    assert_eq!(first.kind, ViolationKind::VertexConflict);
    assert_eq!(first.agents, [AgentId::from("A1"), AgentId::from("A2")]);
    assert_eq!((first.location, first.time), (Some(Location::Vertex(7)), Some(1)));
    // Both agents then follow the same corridor, so they meet again at 6.
    assert_eq!(kinds(&report), [ViolationKind::VertexConflict; 2]);
    assert_eq!(report.violations[1].location, Some(Location::Vertex(6)));
    assert_eq!(categorize(&report), [COLLISIONS]);
    assert!(!oracle_accepts(&e1, &p, &Relaxation::none()));
}

#[test]
fn dropping_a_charge_depletes_the_battery() {
    let m = instance("fix_m.json");
    let mut p = plan("fix_m_plan.json", &m);
    p.agents.get_mut(&"A2".into()).unwrap().charge_times.remove(&3);
    refit(&mut p, &m);

    let mut level = 8;
    let mut empty_at = None;
    for t in 0..18 {
        level = battery_step(level, t == 13, 10);
        if level == 0 {
            empty_at = Some(t + 1);
            break;
        }
    }
    assert_eq!(empty_at, Some(8));

    let report = validate(&m, &p);
    let depleted: Vec<_> = report
        .violations
        .iter()
        .filter(|v| v.kind == ViolationKind::BatteryDepleted)
        .collect();
    assert_eq!(depleted.len(), 1);
    assert_eq!(depleted[0].agents, [AgentId::from("A2")]);
    assert_eq!(depleted[0].time, empty_at);
    assert!(categorize(&report).contains(&LOW_BATTERY));
}

#[test]
fn categories() {
    assert!(categorize(&ValidationReport {
        feasible: true,
        violations: vec![],
        summary: Default::default(),
    })
    .is_empty());

    // A1 skips its waypoint and exhausts its battery.
    let inst = parse_instance(
        br#"{"grid": {"rows": 1, "cols": 4}, "battery_max": 2, "makespan_bound": 6,
             "objectives": ["makespan"],
             "agents": [{"id": "A1", "start": 1, "goal": 4, "waypoints": [2], "battery": 2}]}"#,
    )
    .unwrap();
    let p = parse_plan(
        br#"{"makespan": 3, "agents": {"A1": {"route": [{"at": 1}, {"at": 1}, {"at": 1}, {"at": 1}],
             "battery": [2, 1, 0, 0], "charge_times": []}}}"#,
        inst.graph(),
    )
    .unwrap();
    let report = validate(&inst, &p);
    assert!(report
        .violations
        .iter()
        .any(|v| v.kind == ViolationKind::BatteryDepleted));
    assert!(report
        .violations
        .iter()
        .any(|v| v.kind == ViolationKind::WaypointMissed));
    assert_eq!(categorize(&report)[..2], [LOW_BATTERY, TASK_INCOMPLETE]);
}

fn line() -> mmapf::model::Instance {
    parse_instance(
        br#"{"grid": {"rows": 1, "cols": 4, "slow_cells": [3, 4]}, "battery_max": 9, "makespan_bound": 6,
             "objectives": ["makespan"],
             "agents": [{"id": "A", "start": 1, "goal": 2, "waypoints": [], "battery": 9},
                        {"id": "B", "start": 2, "goal": 1, "waypoints": [], "battery": 9},
                        {"id": "C", "start": 3, "goal": 4, "waypoints": [], "battery": 9},
                        {"id": "D", "start": 4, "goal": 3, "waypoints": [], "battery": 9}]}"#,
    )
    .unwrap()
}

#[test]
fn swaps_and_shared_slow_edges() {
    let inst = line();
    // A and B swap over a unit edge; C and D cross on the slow edge 3-4.
    let p = parse_plan(
        br#"{"makespan": 2, "agents": {
             "A": {"route": [{"at": 1}, {"at": 2}, "done"], "battery": [9, 8], "charge_times": []},
             "B": {"route": [{"at": 2}, {"at": 1}, "done"], "battery": [9, 8], "charge_times": []},
             "C": {"route": [{"at": 3}, {"transit": [3, 4], "step": 1}, {"at": 4}], "battery": [9, 8, 7], "charge_times": []},
             "D": {"route": [{"at": 4}, {"transit": [4, 3], "step": 1}, {"at": 3}], "battery": [9, 8, 7], "charge_times": []}}}"#,
        inst.graph(),
    )
    .unwrap();
    let report = validate(&inst, &p);
    assert_eq!(
        kinds(&report),
        [ViolationKind::SwapConflict, ViolationKind::EdgeOverlapConflict]
    );
    assert_eq!(report.violations[0].location, Some(Location::Edge(1, 2)));
    assert_eq!(report.violations[1].location, Some(Location::Edge(3, 4)));
    assert!(!oracle_accepts(&inst, &p, &Relaxation::none()));
}

#[test]
fn obstacles_horizon_and_goals() {
    let e6 = instance("fix_e6.json");
    let p = parse_plan(
        br#"{"makespan": 2, "agents": {
             "R1": {"route": [{"at": 1}, {"at": 2}, {"at": 3}], "battery": [10, 9, 8], "charge_times": []},
             "R2": {"route": [{"at": 3}, {"at": 6}, {"at": 9}], "battery": [10, 9, 8], "charge_times": []}}}"#,
        e6.graph(),
    )
    .unwrap();
    let report = validate(&e6, &p);
    assert_eq!(
        kinds(&report),
        [ViolationKind::ObstacleCollision, ViolationKind::GoalMissed]
    );
    assert_eq!(report.violations[0].location, Some(Location::Vertex(2)));
    assert_eq!(report.summary.len(), 2);

    let e1 = instance("fix_e1.json");
    let waited = with_extra_wait(&plan("fix_e1_plan2.json", &e1), &e1, "A1", 0);
    let over = validate(&e1, &waited);
    assert_eq!(kinds(&over), [ViolationKind::HorizonExceeded]);
    assert!(validate(&e1.with_makespan_bound(5), &waited).feasible);
}

#[test]
fn malformed_plans_still_produce_reports() {
    let e1 = instance("fix_e1.json");
    let mut p = plan("fix_e1_plan1.json", &e1);
    p.agents.get_mut(&"A2".into()).unwrap().trajectory.truncate(2);
    let report = validate(&e1, &p);
    assert!(!report.feasible);
    assert!(report.violations.iter().any(|v| v.kind == ViolationKind::Discontinuity));

    let mut missing = plan("fix_e1_plan1.json", &e1);
    missing.agents.remove(&"A1".into());
    assert!(kinds(&validate(&e1, &missing)).contains(&ViolationKind::Discontinuity));

    let teleport: Plan = {
        let mut q = plan("fix_e1_plan2.json", &e1);
        q.agents.get_mut(&"A2".into()).unwrap().trajectory[1] = mmapf::model::AgentState::AtVertex(2);
        q
    };
    let r = validate(&e1, &teleport);
    assert!(r
        .violations
        .iter()
        .any(|v| v.kind == ViolationKind::Discontinuity && v.time == Some(1)));
}

#[test]
fn reports_are_pure_and_sorted() {
    let m = instance("fix_m.json");
    let mut p = plan("fix_m_plan.json", &m);
    p.agents.get_mut(&"A1".into()).unwrap().charge_times.clear();
    p.agents.get_mut(&"A2".into()).unwrap().charge_times.clear();
    refit(&mut p, &m);
    let a = validate(&m, &p);
    let b = validate(&m, &p);
    assert_eq!(mmapf::io::to_canonical_json(&a), mmapf::io::to_canonical_json(&b));
    let mut sorted = a.violations.clone();
    sorted.sort();
    assert_eq!(sorted, a.violations);
    assert_eq!(a.summary.values().sum::<usize>(), a.violations.len());
}
