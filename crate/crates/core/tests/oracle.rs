//! The optimal solver against the independent brute-force search.

use mmapf::random::{random_instance, RandomSpec};
use mmapf::solver::{brute_force_optimal, oracle_accepts, solve_optimal, Budget, Relaxation, DEFAULT_ORACLE_CAP};
use mmapf::validate::validate;

fn compare(seed: u64, spec: &RandomSpec) -> (bool, Option<Vec<u32>>) {
    let inst = random_instance(seed, spec);
    let fast = solve_optimal(&inst, &Relaxation::none(), &Budget::unlimited());
    let slow = brute_force_optimal(&inst, &Relaxation::none(), DEFAULT_ORACLE_CAP).expect("within cap");
    assert_eq!(fast.is_sat(), slow.is_sat(), "seed {seed}: sat mismatch");
    let order = inst.objectives();
    let key = fast.plan().map(|p| p.objective_values().key(order));
    assert_eq!(
        key,
        slow.plan().map(|p| p.objective_values().key(order)),
        "seed {seed}: objective mismatch"
    );
    if let Some(p) = fast.plan() {
        assert!(validate(&inst, p).feasible, "seed {seed}");
        assert!(oracle_accepts(&inst, p, &Relaxation::none()), "seed {seed}");
    }
    if let Some(p) = slow.plan() {
        assert!(validate(&inst, p).feasible, "seed {seed}: oracle plan rejected");
    }
    (fast.is_sat(), key)
}

#[test]
fn agrees_on_random_4x4_instances() {
    let spec = RandomSpec::default();
    let mut sat = 0;
    for seed in 0..60 {
        sat += usize::from(compare(seed, &spec).0);
    }
    // Both outcomes must be represented for the comparison to mean much.
    assert!(sat > 10 && sat < 60, "{sat} of 60 satisfiable");
}

#[test]
fn agrees_with_slow_cells_and_tight_batteries() {
    let spec = RandomSpec {
        rows: 3,
        cols: 4,
        slow_density: 0.3,
        battery_max: 5,
        battery_min: 2,
        makespan_bound: 10,
        ..RandomSpec::default()
    };
    for seed in 1000..1040 {
        compare(seed, &spec);
    }
}
