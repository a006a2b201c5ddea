//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::golden::{check, CASES};
use common::props::{battery_rule, collision_free, join_keeps_prefixes, specs};
use common::{assert_prefix_preserved, instance, plan, read_fixture, vertex_route};
use mmapf::dynamic::{resolve_dynamic, DynamicPolicy, Event, ExecutionState, Method};
use mmapf::explain::{why_infeasible, why_wait, ExplainOptions, Explanation};
use mmapf::io::from_json;
use mmapf::model::AgentState;
use mmapf::random::{random_instance, RandomSpec};
use mmapf::solver::{
    brute_force_optimal, oracle_accepts, solve_decision, solve_optimal, Budget, Relaxation, TimeWindow,
    DEFAULT_ORACLE_CAP,
};
use mmapf::validate::{validate, validate_relaxed};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fix_m() -> Outcome {
    let m = instance("fix_m.json");
    let p = plan("fix_m_plan.json", &m);
    let report = validate(&m, &p);
    ensure!(
        report.violations.is_empty(),
        "table plan violations: {:?}",
        report.violations
    );
    let a1 = [10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 10, 9, 8, 7, 6, 5, 4, 3];
    let a2 = [8, 7, 6, 5, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 10, 9, 8, 7, 6];
    for (id, row, initial) in [("A2", &a2[..], 8), ("A1", &a1[..], 10)] {
        let replay = p.agents[&id.into()].replay_battery(initial, m.battery_max());
        ensure!(replay == row, "{id} battery replay {replay:?}");
    }

    let started = Instant::now();
    let solved = solve_optimal(&m, &Relaxation::none(), &Budget::with_timeout(Duration::from_secs(60)));
    let elapsed = started.elapsed();
    let Some(found) = solved.plan() else {
        return Err(format!("solve_optimal returned {:?}", solved.outcome));
    };
    let makespan = found.objective_values().makespan;
    ensure!(makespan <= 18, "makespan {makespan}");
    ensure!(validate(&m, found).feasible, "solver plan rejected");
    Ok(format!(
        "19 + 18 battery values match; solve makespan {makespan} in {elapsed:.2?}"
    ))
}

fn fix_d() -> Outcome {
    let started = Instant::now();
    let d = instance("fix_d.json");
    let initial = solve_optimal(&d, &Relaxation::none(), &Budget::unlimited())
        .into_plan()
        .ok_or("FIX-D unsolved")?;
    ensure!(
        initial.objective_values().makespan == 4,
        "initial makespan {}",
        initial.makespan
    );

    let events: Vec<Event> = from_json(&read_fixture("fix_d_events.json")).map_err(|e| e.to_string())?;
    let mut state = ExecutionState::new(d, initial.clone()).map_err(|e| e.to_string())?;
    let policy = DynamicPolicy::default();

    let joined = state.apply_event(&events[0]).map_err(|e| e.to_string())?;
    let r = resolve_dynamic(&joined, &policy, &Budget::unlimited()).map_err(|e| e.to_string())?;
    ensure!(
        r.method == Method::ReviseAugment && r.horizon_used == 4,
        "A3 join resolved by {:?} at {}",
        r.method,
        r.horizon_used
    );
    for id in ["A1", "A2"] {
        ensure!(
            r.plan.agents[&id.into()] == initial.agents[&id.into()],
            "{id} route changed"
        );
    }
    assert_prefix_preserved(&joined, &r.plan, true);
    state = joined;
    state.commit(&r);

    let joined = state.apply_event(&events[1]).map_err(|e| e.to_string())?;
    let at4 = joined
        .revise_and_augment(4, &Budget::unlimited())
        .map_err(|e| e.to_string())?;
    ensure!(at4.is_none(), "revise-and-augment found a horizon-4 plan");
    let at5 = joined
        .revise_and_augment(5, &Budget::unlimited())
        .map_err(|e| e.to_string())?;
    ensure!(at5.is_some(), "revise-and-augment failed at horizon 5");

    let expected = plan("fix_d_a4_plan.json", joined.instance());
    ensure!(
        validate(joined.instance(), &expected).feasible,
        "expected plan rejected"
    );
    for (id, v) in [("A1", 3), ("A2", 5), ("A3", 6)] {
        let waits = expected.agents[&id.into()].waits_at(v).len();
        ensure!(waits == 1, "{id} waits {waits} times at {v}");
    }
    let a4 = &expected.agents[&"A4".into()];
    ensure!(
        vertex_route(&expected, "A4")[..3] == [7, 4, 1],
        "A4 route {:?}",
        vertex_route(&expected, "A4")
    );
    ensure!(
        a4.occupancy_at(5) == Some(AgentState::AtVertex(1)),
        "A4 does not wait at 1"
    );

    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:.2?}");
    Ok(format!("horizons 4 then 5; ran in {elapsed:.2?}"))
}

fn fix_e1() -> Outcome {
    let e1 = instance("fix_e1.json");
    let p1 = plan("fix_e1_plan1.json", &e1);
    let p2 = plan("fix_e1_plan2.json", &e1);
    let e =
        why_wait(&e1, &p1, &"A2".into(), 8, TimeWindow::ALL, &ExplainOptions::default()).map_err(|e| e.to_string())?;
    let Explanation::AlternativePlan { plan: alt, .. } = e else {
        return Err(format!("why_wait answered {e:?}"));
    };
    ensure!(
        alt.objective_values().makespan == 4,
        "alternative makespan {}",
        alt.makespan
    );
    ensure!(alt.agents[&"A2".into()].waits_at(8).is_empty(), "A2 still waits at 8");
    ensure!(validate(&e1, &alt).feasible, "alternative rejected");
    ensure!(validate(&e1, &p2).feasible, "Plan-2 rejected");
    ensure!(oracle_accepts(&e1, &p2, &Relaxation::none()), "oracle rejects Plan-2");

    let at3 = solve_decision(&e1, 3, &Relaxation::none(), &Budget::unlimited()).map_err(|e| e.to_string())?;
    ensure!(!at3.is_sat(), "solver found a makespan-3 plan");
    let oracle = brute_force_optimal(&e1.with_makespan_bound(3), &Relaxation::none(), DEFAULT_ORACLE_CAP)
        .map_err(|e| e.to_string())?;
    ensure!(!oracle.is_sat(), "oracle found a makespan-3 plan");
    Ok("AlternativePlan at makespan 4; makespan 3 refuted by solver and oracle".into())
}

fn fix_e6() -> Outcome {
    let e6 = instance("fix_e6.json");
    ensure!(
        !solve_optimal(&e6, &Relaxation::none(), &Budget::unlimited()).is_sat(),
        "solver found a plan"
    );
    let oracle = brute_force_optimal(&e6, &Relaxation::none(), DEFAULT_ORACLE_CAP).map_err(|e| e.to_string())?;
    ensure!(!oracle.is_sat(), "oracle found a plan");
    ensure!(oracle.stats.nodes > 0, "oracle explored nothing");

    let list = why_infeasible(&e6, &ExplainOptions::default()).map_err(|e| e.to_string())?;
    ensure!(list.len() >= 2, "{} explanations", list.len());
    let mut collision = false;
    let mut obstacle_2 = false;
    for e in &list {
        let Explanation::RelaxationSuggestion {
            relaxation,
            witness_plan,
            ..
        } = e
        else {
            return Err(format!("unexpected {e:?}"));
        };
        ensure!(
            validate_relaxed(&e6, witness_plan, relaxation).feasible,
            "witness rejected: {}",
            e.message()
        );
        collision |= relaxation.ignore_agent_collisions;
        obstacle_2 |= relaxation.ignored_obstacles.contains(&2);
    }
    ensure!(
        collision && obstacle_2,
        "collision report {collision}, obstacle 2 suggestion {obstacle_2}"
    );
    Ok(format!(
        "Unsat after {} oracle states; {} explanations",
        oracle.stats.nodes,
        list.len()
    ))
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let spec = RandomSpec::default();
    let (mut sat, total) = (0, 60);
    for seed in 0..total {
        let inst = random_instance(seed, &spec);
        let fast = solve_optimal(&inst, &Relaxation::none(), &Budget::unlimited());
        let slow = brute_force_optimal(&inst, &Relaxation::none(), DEFAULT_ORACLE_CAP).map_err(|e| e.to_string())?;
        let order = inst.objectives();
        let key = |r: &mmapf::solver::SolveResult| r.plan().map(|p| p.objective_values().key(order));
        ensure!(fast.is_sat() == slow.is_sat(), "seed {seed}: Sat/Unsat differ");
        ensure!(
            key(&fast) == key(&slow),
            "seed {seed}: {:?} vs {:?}",
            key(&fast),
            key(&slow)
        );
        sat += usize::from(fast.is_sat());
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(600), "took {elapsed:.2?}");
    Ok(format!("{total} instances agree ({sat} Sat) in {elapsed:.2?}"))
}

fn property<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn semantics() -> Outcome {
    property((any::<u64>(), specs()), |(seed, spec)| battery_rule(seed, &spec)).map_err(|e| format!("battery: {e}"))?;
    property((any::<u64>(), specs()), |(seed, spec)| collision_free(seed, &spec))
        .map_err(|e| format!("conflicts: {e}"))?;
    property(
        (
            any::<u64>(),
            specs(),
            any::<u32>(),
            any::<usize>(),
            any::<usize>(),
            3u32..=8,
        ),
        |(seed, spec, at, s, g, battery)| join_keeps_prefixes(seed, &spec, at, s, g, battery),
    )
    .map_err(|e| format!("prefixes: {e}"))?;
    Ok("3 invariants x 1000 cases".into())
}

fn determinism() -> Outcome {
    let failures: Vec<String> = CASES.iter().filter_map(|c| check(c).err()).collect();
    ensure!(failures.is_empty(), "{failures:?}");
    Ok(format!(
        "{} goldens byte-identical over two runs on this platform",
        CASES.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("FIX-M regression", fix_m),
        ("FIX-D dynamic trace", fix_d),
        ("FIX-E1 explanation", fix_e1),
        ("FIX-E6 infeasibility", fix_e6),
        ("oracle equivalence", oracle_equivalence),
        ("semantics properties", semantics),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let text = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {text}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", n + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
