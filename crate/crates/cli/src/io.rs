//! File loading with the error split the exit codes need: JSON syntax and
//! shape trouble is a parse failure, while a well-formed file describing a
//! problem the toolkit must reject maps to the matching semantic class.
//!
//! Loaders hand back the raw bytes too; manifests hash them.

use crate::CliError;
use consensus_kit_core::{
    CouplingSolution, GraphError, Mode, Problem, ShapingError, UndirectedGraph,
};
use serde::Deserialize;
use std::path::Path;

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
struct EdgeFile {
    i: usize,
    j: usize,
    delta: f64,
}

#[derive(Deserialize)]
struct ProblemFile {
    n: usize,
    omega: Vec<f64>,
    edges: Vec<EdgeFile>,
    mode: Mode,
    #[serde(default)]
    omega_bar: Option<f64>,
}

/// Problem files are parsed in two stages so a syntactically fine file
/// whose offsets sit on a singularity exits as "not solvable", naming the
/// edge, rather than as a generic parse failure.
pub fn load_problem(path: &Path) -> Result<(Problem, Vec<u8>), CliError> {
    let bytes = read_bytes(path)?;
    let file: ProblemFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let edges: Vec<(usize, usize, f64)> =
        file.edges.iter().map(|e| (e.i, e.j, e.delta)).collect();
    let p = Problem::new(file.n, file.omega, &edges, file.mode, file.omega_bar)
        .map_err(|e| problem_error(path, e))?;
    Ok((p, bytes))
}

fn problem_error(path: &Path, e: ShapingError) -> CliError {
    match e {
        // data that no problem could carry, whatever its values mean
        ShapingError::OmegaLength { .. }
        | ShapingError::NonFinite
        | ShapingError::DuplicateEdge { .. }
        | ShapingError::Graph(GraphError::InvalidEdge { .. })
        | ShapingError::Graph(GraphError::Empty) => {
            CliError::Parse(format!("{}: {e}", path.display()))
        }
        other => crate::shaping_error(other),
    }
}

pub fn load_solution(path: &Path) -> Result<(CouplingSolution, Vec<u8>), CliError> {
    let bytes = read_bytes(path)?;
    let sol: CouplingSolution = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok((sol, bytes))
}

pub fn load_graph(path: &Path) -> Result<(UndirectedGraph, Vec<u8>), CliError> {
    let bytes = read_bytes(path)?;
    let g: UndirectedGraph = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok((g, bytes))
}

/// A stored initial state is a plain JSON array of phases, one per agent.
pub fn load_init(path: &Path, n: usize) -> Result<(Vec<f64>, Vec<u8>), CliError> {
    let bytes = read_bytes(path)?;
    let theta: Vec<f64> = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    if theta.len() != n {
        return Err(CliError::Inconsistent(format!(
            "{}: initial state has {} phases but the problem has {} agents",
            path.display(),
            theta.len(),
            n
        )));
    }
    Ok((theta, bytes))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}
