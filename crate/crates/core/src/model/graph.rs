use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Opaque vertex identifier. Grid worlds use 1-based row-major cell numbers.
pub type VertexId = u32;

/// Undirected edge key, always stored with the smaller endpoint first.
pub type EdgeKey = (VertexId, VertexId);

pub fn edge_key(u: VertexId, v: VertexId) -> EdgeKey {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// The world an instance lives in: an undirected graph whose edges carry a
/// traversal duration, plus obstacle and charging-station vertex sets.
///
/// Obstacles are vertex attributes rather than deletions, so editing them
/// (dynamic events, relaxation probes) never changes the edge set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldGraph {
    vertices: BTreeSet<VertexId>,
    edges: BTreeMap<EdgeKey, u32>,
    adjacency: BTreeMap<VertexId, Vec<VertexId>>,
    obstacles: BTreeSet<VertexId>,
    charging: BTreeSet<VertexId>,
}

impl WorldGraph {
    pub fn new(
        vertices: impl IntoIterator<Item = VertexId>,
        edges: impl IntoIterator<Item = (VertexId, VertexId, u32)>,
        obstacles: impl IntoIterator<Item = VertexId>,
        charging: impl IntoIterator<Item = VertexId>,
    ) -> Result<Self, ModelError> {
        let vertices: BTreeSet<VertexId> = vertices.into_iter().collect();
        let mut edge_map = BTreeMap::new();
        for (u, v, duration) in edges {
            if !vertices.contains(&u) || !vertices.contains(&v) {
                return Err(ModelError::schema(
                    "edges",
                    format!("edge {u}-{v} references an unknown vertex"),
                ));
            }
            if u == v {
                return Err(ModelError::schema("edges", format!("self-loop on vertex {u}")));
            }
            if duration == 0 {
                return Err(ModelError::schema(
                    "edges",
                    format!("edge {u}-{v} has duration 0, must be at least 1"),
                ));
            }
            if let Some(previous) = edge_map.insert(edge_key(u, v), duration) {
                if previous != duration {
                    return Err(ModelError::schema(
                        "edges",
                        format!("edge {u}-{v} listed twice with different durations"),
                    ));
                }
            }
        }
        let obstacles: BTreeSet<VertexId> = obstacles.into_iter().collect();
        let charging: BTreeSet<VertexId> = charging.into_iter().collect();
        if let Some(v) = obstacles.iter().find(|v| !vertices.contains(v)) {
            return Err(ModelError::schema("obstacles", format!("unknown vertex {v}")));
        }
        if let Some(v) = charging.iter().find(|v| !vertices.contains(v)) {
            return Err(ModelError::schema("charging", format!("unknown vertex {v}")));
        }
        if let Some(v) = charging.intersection(&obstacles).next() {
            return Err(ModelError::schema(
                "charging",
                format!("vertex {v} is both a charging station and an obstacle"),
            ));
        }

        let mut adjacency: BTreeMap<VertexId, Vec<VertexId>> = vertices.iter().map(|&v| (v, Vec::new())).collect();
        for &(u, v) in edge_map.keys() {
            adjacency.entry(u).or_default().push(v);
            adjacency.entry(v).or_default().push(u);
        }
        for neighbors in adjacency.values_mut() {
            neighbors.sort_unstable();
        }

        Ok(Self {
            vertices,
            edges: edge_map,
            adjacency,
            obstacles,
            charging,
        })
    }

    pub fn vertices(&self) -> &BTreeSet<VertexId> {
        &self.vertices
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }

    /// All edges as `(u, v, duration)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId, u32)> + '_ {
        self.edges.iter().map(|(&(u, v), &d)| (u, v, d))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Neighbors of `v` in ascending vertex order.
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        self.adjacency.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edge_duration(&self, u: VertexId, v: VertexId) -> Result<u32, ModelError> {
        self.edges
            .get(&edge_key(u, v))
            .copied()
            .ok_or(ModelError::NotAdjacent(u, v))
    }

    pub fn duration(&self, u: VertexId, v: VertexId) -> Option<u32> {
        self.edges.get(&edge_key(u, v)).copied()
    }

    pub fn obstacles(&self) -> &BTreeSet<VertexId> {
        &self.obstacles
    }

    pub fn charging(&self) -> &BTreeSet<VertexId> {
        &self.charging
    }

    pub fn is_obstacle(&self, v: VertexId) -> bool {
        self.obstacles.contains(&v)
    }

    pub fn is_charging(&self, v: VertexId) -> bool {
        self.charging.contains(&v)
    }

    pub(crate) fn set_obstacle(&mut self, v: VertexId, blocked: bool) -> Result<(), ModelError> {
        if !self.contains(v) {
            return Err(ModelError::schema("obstacles", format!("unknown vertex {v}")));
        }
        if blocked {
            if self.charging.contains(&v) {
                return Err(ModelError::schema(
                    "obstacles",
                    format!("vertex {v} is a charging station"),
                ));
            }
            self.obstacles.insert(v);
        } else {
            self.obstacles.remove(&v);
        }
        Ok(())
    }
}

/// Convenience description of a rectangular 4-connected grid world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    #[serde(default)]
    pub obstacles: BTreeSet<VertexId>,
    #[serde(default)]
    pub slow_cells: BTreeSet<VertexId>,
    #[serde(default = "default_slow_duration")]
    pub slow_duration: u32,
    #[serde(default)]
    pub charging: BTreeSet<VertexId>,
}

fn default_slow_duration() -> u32 {
    2
}

impl GridSpec {
    pub fn new(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            obstacles: BTreeSet::new(),
            slow_cells: BTreeSet::new(),
            slow_duration: default_slow_duration(),
            charging: BTreeSet::new(),
        }
    }

    pub fn cell_count(&self) -> u32 {
        self.rows * self.cols
    }

    /// Row-major cell id of the zero-based `(row, col)` position.
    pub fn cell(&self, row: u32, col: u32) -> VertexId {
        row * self.cols + col + 1
    }

    /// Zero-based `(row, col)` of a cell id.
    pub fn position(&self, cell: VertexId) -> (u32, u32) {
        ((cell - 1) / self.cols, (cell - 1) % self.cols)
    }
}

/// Expands a grid description into a [`WorldGraph`].
///
/// An edge gets `slow_duration` iff both endpoints are slow cells.
pub fn build_graph(spec: &GridSpec) -> Result<WorldGraph, ModelError> {
    if spec.rows == 0 {
        return Err(ModelError::schema("grid.rows", "must be at least 1"));
    }
    if spec.cols == 0 {
        return Err(ModelError::schema("grid.cols", "must be at least 1"));
    }
    if spec.slow_duration < 2 {
        return Err(ModelError::schema("grid.slow_duration", "must be at least 2"));
    }
    let n = spec.cell_count();
    let in_range = |field: &str, cells: &BTreeSet<VertexId>| -> Result<(), ModelError> {
        match cells.iter().find(|&&c| c == 0 || c > n) {
            Some(c) => Err(ModelError::schema(
                format!("grid.{field}"),
                format!("cell {c} outside 1..={n}"),
            )),
            None => Ok(()),
        }
    };
    in_range("obstacles", &spec.obstacles)?;
    in_range("slow_cells", &spec.slow_cells)?;
    in_range("charging", &spec.charging)?;

    let mut edges = Vec::new();
    for row in 0..spec.rows {
        for col in 0..spec.cols {
            let here = spec.cell(row, col);
            let mut link = |there: VertexId| {
                let slow = spec.slow_cells.contains(&here) && spec.slow_cells.contains(&there);
                edges.push((here, there, if slow { spec.slow_duration } else { 1 }));
            };
            if col + 1 < spec.cols {
                link(spec.cell(row, col + 1));
            }
            if row + 1 < spec.rows {
                link(spec.cell(row + 1, col));
            }
        }
    }
    WorldGraph::new(
        1..=n,
        edges,
        spec.obstacles.iter().copied(),
        spec.charging.iter().copied(),
    )
    .map_err(|e| match e {
        ModelError::Schema { field, message } => ModelError::Schema {
            field: format!("grid.{field}"),
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn warehouse() -> GridSpec {
        let mut spec = GridSpec::new(3, 10);
        spec.slow_cells = (3..=8).collect();
        spec.charging = [24, 27].into();
        spec.obstacles = [12, 13, 15, 16, 18, 19].into();
        spec
    }

    #[test]
    fn slow_corridor_durations() {
        let g = build_graph(&warehouse()).unwrap();
        assert_eq!(g.edge_duration(3, 4).unwrap(), 2);
        assert_eq!(g.edge_duration(8, 9).unwrap(), 1);
        assert_eq!(g.edge_duration(2, 3).unwrap(), 1);
        assert_eq!(g.edge_duration(6, 5).unwrap(), 2);
        assert_eq!(g.edge_duration(4, 14).unwrap(), 1);
        assert_eq!(g.edge_duration(17, 7).unwrap(), 1);
    }

    #[test]
    fn duration_is_symmetric() {
        let g = build_graph(&warehouse()).unwrap();
        for (u, v, d) in g.edges() {
            assert_eq!(g.edge_duration(v, u).unwrap(), d);
        }
    }

    #[test]
    fn degenerate_grid() {
        let g = build_graph(&GridSpec::new(1, 1)).unwrap();
        assert_eq!(g.vertices().len(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn small_grid_counts_and_adjacency() {
        let g = build_graph(&GridSpec::new(3, 3)).unwrap();
        assert_eq!(g.vertices().len(), 9);
        assert_eq!(g.edge_count(), 12);
        assert!(g.edges().all(|(_, _, d)| d == 1));
        for w in [1, 2, 3, 6, 9].windows(2) {
            assert!(g.duration(w[0], w[1]).is_some());
        }
        assert_eq!(g.edge_duration(1, 5), Err(ModelError::NotAdjacent(1, 5)));
        assert_eq!(g.neighbors(5), &[2, 4, 6, 8]);
    }

    #[test]
    fn obstacles_do_not_delete_edges() {
        let mut spec = GridSpec::new(4, 5);
        spec.obstacles = [2, 7, 13].into();
        let g = build_graph(&spec).unwrap();
        assert_eq!(g.vertices().len(), 20);
        assert_eq!(g.edge_count(), (4 * 4 + 5 * 3) as usize);
    }

    #[test]
    fn out_of_range_cells_name_the_field() {
        let mut spec = GridSpec::new(2, 2);
        spec.charging = [5].into();
        match build_graph(&spec) {
            Err(ModelError::Schema { field, .. }) => assert_eq!(field, "grid.charging"),
            other => panic!("unexpected {other:?}"),
        }
        let mut spec = GridSpec::new(2, 2);
        spec.slow_cells = [0].into();
        match build_graph(&spec) {
            Err(ModelError::Schema { field, .. }) => assert_eq!(field, "grid.slow_cells"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn charging_on_obstacle_is_rejected() {
        let mut spec = GridSpec::new(2, 2);
        spec.charging = [1].into();
        spec.obstacles = [1].into();
        assert!(build_graph(&spec).is_err());
    }
}
