//! Toolkit for designing and simulating phase consensus of coupled agents on
//! the circle.
//!
//! Agents obey
//!
//! ```text
//! dθi/dt = ωi + Σj fij(θj − θi)
//! ```
//!
//! where each coupling `fij` is a scaled copy of one of two prototypes: an
//! attractive one with a barrier at antipodal separation and a repulsive one
//! with a barrier at zero separation. The crate provides
//!
//! * [`graph`]: undirected/directed graphs, orientations, spanning trees,
//!   strongly connected components, chromatic polynomial evaluation;
//! * [`regions`]: counting the disconnected invariant regions that repulsive
//!   barriers cut out of the torus, via acyclic orientations and
//!   source/sink flips;
//! * [`coupling`]: the two coupling prototypes and their derivatives;
//! * [`shaping`]: synthesis of coupling coefficients that make a prescribed
//!   phase formation a limit cycle of the network;
//! * [`simulator`]: fixed-step RK4 integration with barrier-aware step
//!   halving, phase-lock detection and event reporting.

pub mod coupling;
pub mod graph;
pub mod regions;
pub mod shaping;
pub mod simulator;

pub use coupling::{CouplingError, CouplingKind, ScaledCoupling};
pub use graph::{
    chromatic_polynomial_at, connected_components, independent_sccs, is_acyclic, spanning_tree,
    strongly_connected_components, DirectedGraph, GraphError, Orientation, UndirectedGraph,
};
pub use regions::{
    closed_form_regions, count_regions_repulsive, GraphFamily, RegionError, RegionReport,
};
pub use shaping::{
    check_solvability, classify_edges, min_edge_subgraph_attractive, min_edge_subgraph_mixed,
    min_energy_coefficients, select_omega_bar, sign_sets, verify_limit_cycle, CouplingSolution,
    EdgePartition, MinimalAttractiveDesign, Mode, Problem, ShapingError, SignSets,
    SolvabilityResult, DEFAULT_EPSILON,
};
pub use simulator::{
    detect_phase_lock, formation_error, CoupledSystem, Event, EventKind, LockReport, SimConfig,
    SimError, SimState, Trajectory,
};
