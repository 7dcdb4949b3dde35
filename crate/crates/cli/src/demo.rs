//! `demo-fig2`: a fixed four-agent scenario showing why repulsive links
//! must be bidirectional. Agents 1 and 2 sit at opposite points, agents 3
//! and 4 halfway between them on either side, every repulsion one-way.
//! Against agent 1 the pushes from 3 and 4 cancel, nothing pushes back,
//! and the pair drifts straight through it: an ordering change. Adding the
//! reverse links at a small gain restores the barrier and the crossing
//! disappears over the same horizon.

use crate::manifest::RunManifest;
use crate::{io, sim_error, CliError};
use clap::Args;
use consensus_kit_core::{CoupledSystem, CouplingKind, EventKind, SimConfig};
use std::f64::consts::PI;
use std::path::PathBuf;

/// Narrow on purpose: the demo steers phases exactly through a barrier,
/// and a wide band would stop the run before the crossing it exists to
/// show.
pub const DEMO_GUARD: f64 = 1e-12;

const OMEGA: [f64; 4] = [0.0, 0.0, -0.5, 0.5];
const ARCS: [(usize, usize); 5] = [(2, 1), (3, 2), (1, 3), (4, 2), (1, 4)];

pub fn directed_system() -> CoupledSystem {
    let links: Vec<_> = ARCS
        .iter()
        .map(|&(i, j)| (i, j, CouplingKind::Repulsive, 1.0))
        .collect();
    CoupledSystem::new(OMEGA.to_vec(), &links, DEMO_GUARD).expect("fixed scenario is valid")
}

pub fn bidirectional_system(epsilon: f64) -> CoupledSystem {
    let mut links: Vec<_> = ARCS
        .iter()
        .map(|&(i, j)| (i, j, CouplingKind::Repulsive, 1.0))
        .collect();
    for &(i, j) in &ARCS {
        links.push((j, i, CouplingKind::Repulsive, epsilon));
    }
    CoupledSystem::new(OMEGA.to_vec(), &links, DEMO_GUARD).expect("fixed scenario is valid")
}

pub fn initial_state() -> Vec<f64> {
    vec![0.0, PI, 70.0 * PI / 180.0, -70.0 * PI / 180.0]
}

pub fn config(t_end: f64) -> SimConfig {
    SimConfig {
        step: 1e-3,
        t_end,
        barrier_guard: DEMO_GUARD,
        ..SimConfig::default()
    }
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Integration horizon
    #[arg(long, default_value_t = 3.0)]
    pub t_end: f64,
    /// Gain of the reverse links in the bidirectional variant
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Write <prefix>_directed.csv and <prefix>_bidirectional.csv
    #[arg(long)]
    pub csv_prefix: Option<PathBuf>,
}

pub fn run(args: &DemoArgs) -> Result<(), CliError> {
    let cfg = config(args.t_end);
    let scenario_bytes = serde_json::json!({
        "omega": OMEGA,
        "repulsive_arcs": ARCS,
        "init": initial_state(),
        "epsilon": args.epsilon,
    })
    .to_string()
    .into_bytes();

    let variants =
        [("directed", directed_system()), ("bidirectional", bidirectional_system(args.epsilon))];
    let mut crossings = Vec::new();

    for (label, sys) in &variants {
        println!("{label} repulsion:");
        let traj = sys.simulate(&initial_state(), &cfg).map_err(sim_error)?;
        let mut count = 0;
        for e in &traj.events {
            match e.kind {
                EventKind::OrderingChange => {
                    count += 1;
                    println!("  t = {:.3}  {}", e.t, e.detail);
                }
                EventKind::PhaseLocked => {
                    println!("  t = {:.3}  locked, {}", e.t, e.detail);
                }
                EventKind::BarrierApproach => {}
            }
        }
        if count == 0 {
            println!("  no ordering changes");
        }
        crossings.push((*label, count));

        if let Some(prefix) = &args.csv_prefix {
            let mut name = prefix.as_os_str().to_os_string();
            name.push(format!("_{label}.csv"));
            let path = PathBuf::from(name);
            io::write_text(&path, &traj.to_csv())?;
            RunManifest::new(
                "demo-fig2",
                &[&scenario_bytes],
                0,
                serde_json::to_value(&cfg).expect("config serialises"),
            )
            .write_alongside(&path)?;
            println!("  trajectory written to {}", path.display());
        }
    }

    for (label, count) in &crossings {
        println!("{label}: {count} ordering changes");
    }
    Ok(())
}
