//! Command-line front end for the consensus design toolkit: region
//! counting, gain synthesis, simulation and verification, glued together
//! with reproducible artifact plumbing (JSON solutions, CSV trajectories,
//! a manifest next to every file written).

use consensus_kit_core::{GraphError, RegionError, ShapingError, SimError};
use std::fmt;

pub mod demo;
pub mod io;
pub mod manifest;
pub mod regions;
pub mod shape;
pub mod simulate;
pub mod verify;

/// Failure taxonomy of the binary. Scripts branch on the exit code, so
/// each class keeps a fixed one.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input file.
    Parse(String),
    /// The requested computation exceeds a hard size bound.
    TooLarge(String),
    /// The problem is well formed but admits no design; the message names
    /// the violated condition.
    NotSolvable(String),
    /// Integration was stopped with the state pinned against a barrier.
    Collapse { t_last: f64 },
    /// Problem and solution files do not belong together.
    Inconsistent(String),
    /// Anything else: failed check, I/O trouble, internal limit.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Parse(_) => 2,
            CliError::TooLarge(_) => 3,
            CliError::NotSolvable(_) => 4,
            CliError::Collapse { .. } => 5,
            CliError::Inconsistent(_) => 6,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m)
            | CliError::TooLarge(m)
            | CliError::NotSolvable(m)
            | CliError::Inconsistent(m)
            | CliError::Failed(m) => write!(f, "{m}"),
            CliError::Collapse { t_last } => {
                write!(f, "step collapsed against a barrier; last valid t = {t_last}")
            }
        }
    }
}

impl std::error::Error for CliError {}

/// Shaping failures split into three exit classes: size bounds, cross-file
/// inconsistency, and everything that makes the problem unsolvable as
/// stated.
pub(crate) fn shaping_error(e: ShapingError) -> CliError {
    match e {
        ShapingError::Graph(GraphError::TooLarge { .. }) => CliError::TooLarge(e.to_string()),
        ShapingError::Inconsistent { .. } | ShapingError::ArcNotInGraph { .. } => {
            CliError::Inconsistent(e.to_string())
        }
        _ => CliError::NotSolvable(e.to_string()),
    }
}

pub(crate) fn region_error(e: RegionError) -> CliError {
    match e {
        RegionError::TooManyEdges { .. } | RegionError::Graph(GraphError::TooLarge { .. }) => {
            CliError::TooLarge(e.to_string())
        }
        _ => CliError::Failed(e.to_string()),
    }
}

pub(crate) fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::StepCollapse { t_last, .. } => CliError::Collapse { t_last },
        SimError::Shaping(inner) => shaping_error(inner),
        _ => CliError::Failed(e.to_string()),
    }
}
