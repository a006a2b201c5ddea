//! Seeded random grid instances for benchmarks and cross-checking.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{AgentSpec, GridSpec, Instance, Objective, VertexId};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpec {
    pub rows: u32,
    pub cols: u32,
    pub agents: usize,
    pub max_waypoints: usize,
    pub battery_max: u32,
    pub makespan_bound: u32,
    pub obstacle_density: f64,
    pub slow_density: f64,
    pub charging_cells: usize,
    /// Initial charge is drawn from `battery_min..=battery_max`.
    pub battery_min: u32,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            agents: 2,
            max_waypoints: 1,
            battery_max: 8,
            makespan_bound: 12,
            obstacle_density: 0.2,
            slow_density: 0.0,
            charging_cells: 1,
            battery_min: 4,
        }
    }
}

/// Same seed and spec, same instance, on every platform.
pub fn random_instance(seed: u64, spec: &RandomSpec) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(instance) = attempt(&mut rng, spec) {
            return instance;
        }
    }
}

fn attempt(rng: &mut ChaCha8Rng, spec: &RandomSpec) -> Option<Instance> {
    let mut grid = GridSpec::new(spec.rows, spec.cols);
    let cells: Vec<VertexId> = (1..=grid.cell_count()).collect();
    for &c in &cells {
        if rng.random_bool(spec.obstacle_density) {
            grid.obstacles.insert(c);
        } else if rng.random_bool(spec.slow_density) {
            grid.slow_cells.insert(c);
        }
    }
    let mut free: Vec<VertexId> = cells.iter().copied().filter(|c| !grid.obstacles.contains(c)).collect();
    if free.len() < 2 * spec.agents + spec.charging_cells {
        return None;
    }
    free.shuffle(rng);
    grid.charging.extend(free.iter().take(spec.charging_cells));

    let mut starts = free.clone();
    starts.shuffle(rng);
    let mut goals = free.clone();
    goals.shuffle(rng);
    let agents = (0..spec.agents)
        .map(|i| {
            let waypoints: Vec<VertexId> = (0..rng.random_range(0..=spec.max_waypoints))
                .map(|_| free[rng.random_range(0..free.len())])
                .collect();
            let battery = rng.random_range(spec.battery_min.min(spec.battery_max)..=spec.battery_max);
            AgentSpec::new(format!("A{}", i + 1), starts[i], goals[i], battery).with_waypoints(waypoints)
        })
        .collect();
    Instance::from_grid(
        grid,
        agents,
        spec.battery_max,
        spec.makespan_bound,
        vec![Objective::Makespan, Objective::TotalTime, Objective::Charges],
    )
    .ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let spec = RandomSpec::default();
        assert_eq!(random_instance(7, &spec), random_instance(7, &spec));
        let distinct: std::collections::BTreeSet<String> = (0..20)
            .map(|s| crate::io::serialize_instance(&random_instance(s, &spec)))
            .collect();
        assert!(distinct.len() > 15);
    }
}
