//! Shared fixtures for the benchmark suite: a seven-agent reference problem
//! on a tree, its designed coupling system, and a few graphs that stress the
//! region counters.

use consensus_kit_core::{
    classify_edges, min_energy_coefficients, CoupledSystem, Mode, Problem, UndirectedGraph,
};
use std::f64::consts::TAU;

/// Seven agents on a tree, neighbors spaced a seventh of the circle apart.
pub fn balanced_problem() -> Problem {
    let k = TAU / 7.0;
    Problem::new(
        7,
        vec![-0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6],
        &[
            (1, 3, 2.0 * k),
            (2, 3, k),
            (3, 4, k),
            (4, 5, k),
            (3, 6, 3.0 * k),
            (6, 7, k),
        ],
        Mode::AttractiveOnly,
        Some(0.1),
    )
    .unwrap()
}

/// The compensated full-support design for [`balanced_problem`], ready to run.
pub fn balanced_system() -> CoupledSystem {
    let p = balanced_problem();
    let partition = classify_edges(&p, 0.1).unwrap();
    let sol = min_energy_coefficients(&p, 0.1, &partition, None, 0.01, true).unwrap();
    CoupledSystem::from_solution(&p, &sol, 1e-6).unwrap()
}

/// Complete graph on `n` vertices.
pub fn complete_graph(n: usize) -> UndirectedGraph {
    let mut edges = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            edges.push((i, j));
        }
    }
    UndirectedGraph::new(n, &edges).unwrap()
}

/// Cycle graph on `n` vertices.
pub fn cycle_graph(n: usize) -> UndirectedGraph {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i, i + 1)).chain([(n, 1)]).collect();
    UndirectedGraph::new(n, &edges).unwrap()
}
