mod common;

use common::props::{battery_rule, collision_free, join_keeps_prefixes, specs, validator_matches_oracle};
use mmapf::model::battery_step;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn battery_step_refills_or_drains(level in 0u32..20, charging: bool, max in 1u32..20) {
        let next = battery_step(level, charging, max);
        if charging {
            prop_assert_eq!(next, max);
        } else {
            prop_assert_eq!(next, level.saturating_sub(1));
        }
    }

    #[test]
    fn planned_batteries_follow_the_charging_rule(seed: u64, spec in specs()) {
        battery_rule(seed, &spec)?;
    }

    #[test]
    fn optimal_plans_are_collision_free(seed: u64, spec in specs()) {
        collision_free(seed, &spec)?;
    }

    #[test]
    fn validator_agrees_with_the_oracle(seed: u64, spec in specs(), op in 0usize..6, pick: usize, at: u32) {
        validator_matches_oracle(seed, &spec, op, pick, at)?;
    }

    #[test]
    fn joins_preserve_committed_prefixes(seed: u64, spec in specs(), at: u32, s: usize, g: usize, battery in 3u32..=8) {
        join_keeps_prefixes(seed, &spec, at, s, g, battery)?;
    }
}
