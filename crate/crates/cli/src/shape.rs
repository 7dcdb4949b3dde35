//! `shape`: pick a locked rate if none is pinned, synthesise the
//! minimum-energy gains, print them as a table and write the solution
//! JSON with its manifest.

use crate::manifest::RunManifest;
use crate::{io, shaping_error, CliError};
use clap::Args;
use consensus_kit_core::{
    check_solvability, classify_edges, min_edge_subgraph_attractive, min_edge_subgraph_mixed,
    min_energy_coefficients, select_omega_bar, verify_limit_cycle, CouplingKind, CouplingSolution,
    Mode, Problem, DEFAULT_EPSILON,
};
use std::collections::BTreeSet;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct ShapeArgs {
    /// Problem file: graph, frequencies and target offsets
    pub problem_file: PathBuf,
    /// Locked rate; defaults to the problem's hint, else to the midpoint
    /// of the widest admissible interval
    #[arg(long)]
    pub omega_bar: Option<f64>,
    /// Gain for links that only exist to keep pairs bidirectional
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Rescale each agent's gains so the epsilon links' drag cancels and
    /// the residual at the formation is exactly zero
    #[arg(long)]
    pub compensate: bool,
    /// Restrict formula gains to the smallest link set that still solves
    /// the problem, and report that set
    #[arg(long)]
    pub least_communication: bool,
    /// Where to write the solution (default: next to the problem file)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

enum MinimalSet {
    Attractive(consensus_kit_core::MinimalAttractiveDesign),
    Mixed(Vec<(usize, usize)>),
}

pub fn run(args: &ShapeArgs) -> Result<(), CliError> {
    let (p, bytes) = io::load_problem(&args.problem_file)?;

    let (omega_bar, origin) = match args.omega_bar {
        Some(w) => (w, "flag"),
        None => match p.omega_bar_hint() {
            Some(w) => (w, "problem file"),
            None => {
                let sol = check_solvability(&p).map_err(shaping_error)?;
                let w = select_omega_bar(&sol).ok_or_else(|| {
                    CliError::NotSolvable(
                        "no admissible locked rate: every candidate interval fails".into(),
                    )
                })?;
                (w, "widest admissible interval")
            }
        },
    };

    let partition = classify_edges(&p, omega_bar).map_err(shaping_error)?;

    let (support, minimal) = if args.least_communication {
        match p.mode() {
            Mode::AttractiveOnly => {
                let design =
                    min_edge_subgraph_attractive(&p, omega_bar).map_err(shaping_error)?;
                let set: BTreeSet<(usize, usize)> = design.links.iter().copied().collect();
                (Some(set), Some(MinimalSet::Attractive(design)))
            }
            Mode::Mixed => {
                let tree = min_edge_subgraph_mixed(&p, omega_bar).map_err(shaping_error)?;
                let mut set = BTreeSet::new();
                for &(i, j) in &tree {
                    set.insert((i, j));
                    set.insert((j, i));
                }
                (Some(set), Some(MinimalSet::Mixed(tree)))
            }
        }
    } else {
        (None, None)
    };

    let sol = min_energy_coefficients(
        &p,
        omega_bar,
        &partition,
        support.as_ref(),
        args.epsilon,
        args.compensate,
    )
    .map_err(shaping_error)?;

    let mode_text = match p.mode() {
        Mode::AttractiveOnly => "attractive couplings only",
        Mode::Mixed => "mixed couplings",
    };
    println!("problem: {} agents, {mode_text}", p.agent_count());
    println!("locked rate: {omega_bar:.6} ({origin})");
    println!(
        "epsilon: {}, {}",
        args.epsilon,
        if args.compensate { "compensated" } else { "uncompensated" }
    );
    print_table(&sol);

    let residuals = verify_limit_cycle(&p, &sol).map_err(shaping_error)?;
    let (agent, worst) = residuals
        .iter()
        .enumerate()
        .map(|(k, r)| (k + 1, r.abs()))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("at least one agent");
    println!("largest residual at the formation: {worst:.3e} (agent {agent})");

    if let Some(minimal) = minimal {
        print_minimal(&minimal, &sol, &p);
    }

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.problem_file.with_extension("solution.json"));
    let mut text = serde_json::to_string_pretty(&sol)
        .map_err(|e| CliError::Failed(format!("solution serialisation: {e}")))?;
    text.push('\n');
    io::write_text(&out, &text)?;
    let config = serde_json::json!({
        "omega_bar": omega_bar,
        "epsilon": args.epsilon,
        "compensate": args.compensate,
        "least_communication": args.least_communication,
    });
    RunManifest::new("shape", &[&bytes], 0, config).write_alongside(&out)?;
    println!("solution written to {}", out.display());
    Ok(())
}

fn print_table(sol: &CouplingSolution) {
    println!("links (listener <- source):");
    let mut rows: Vec<(usize, usize, CouplingKind, f64)> = Vec::new();
    for (&(i, j), &c) in &sol.alpha {
        rows.push((i, j, CouplingKind::Attractive, c));
    }
    for (&(i, j), &c) in &sol.beta {
        rows.push((i, j, CouplingKind::Repulsive, c));
    }
    rows.sort_by_key(|&(i, j, _, _)| (i, j));
    for (i, j, kind, c) in rows {
        let kind = match kind {
            CouplingKind::Attractive => "attractive",
            CouplingKind::Repulsive => "repulsive ",
        };
        println!("  {kind}  {i} <- {j}   {c:.3}");
    }
}

fn link_list(links: &[(usize, usize)]) -> String {
    links
        .iter()
        .map(|&(i, j)| format!("({i}<-{j})"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn print_minimal(minimal: &MinimalSet, sol: &CouplingSolution, p: &Problem) {
    match minimal {
        MinimalSet::Attractive(design) => {
            println!("least-communication support:");
            println!(
                "  directed minimal set ({} links): {}",
                design.links.len(),
                link_list(&design.links)
            );
            let feedback: usize = design.sources_per_component.iter().map(|&k| k - 1).sum();
            println!(
                "  count = {} = {} agents + {} component bridges + {} feedback links",
                design.count,
                p.agent_count(),
                design.components - 1,
                feedback
            );
            let all: Vec<(usize, usize)> =
                sol.alpha.keys().chain(sol.beta.keys()).copied().collect();
            println!(
                "  with epsilon reverses ({} links total): {}",
                all.len(),
                link_list(&all)
            );
        }
        MinimalSet::Mixed(tree) => {
            println!("least-communication support:");
            let mut both: Vec<(usize, usize)> = Vec::new();
            for &(i, j) in tree {
                both.push((i, j));
                both.push((j, i));
            }
            both.sort_unstable();
            println!(
                "  spanning tree, both directions ({} links): {}",
                both.len(),
                link_list(&both)
            );
        }
    }
}
