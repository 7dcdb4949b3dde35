//! `regions`: count the disconnected invariant regions a repulsive network
//! carves out of the torus, with an optional closed-form cross-check for
//! the graph families that have one.

use crate::manifest::RunManifest;
use crate::{io, region_error, CliError};
use clap::Args;
use consensus_kit_core::{closed_form_regions, count_regions_repulsive, GraphFamily};
use std::path::PathBuf;

fn parse_family(s: &str) -> Result<GraphFamily, String> {
    match s {
        "tree" => Ok(GraphFamily::Tree),
        "cycle" => Ok(GraphFamily::Cycle),
        "complete" => Ok(GraphFamily::Complete),
        other => Err(format!("unknown family '{other}' (expected tree, cycle or complete)")),
    }
}

fn family_name(f: GraphFamily) -> &'static str {
    match f {
        GraphFamily::Tree => "tree",
        GraphFamily::Cycle => "cycle",
        GraphFamily::Complete => "complete",
    }
}

#[derive(Debug, Args)]
pub struct RegionsArgs {
    /// Graph file: {"n": ..., "edges": [[i, j], ...]}
    pub graph_file: PathBuf,
    /// Cross-check the count against the closed form for tree, cycle or
    /// complete graphs
    #[arg(long, value_parser = parse_family)]
    pub closed_form: Option<GraphFamily>,
    /// Also write the report as JSON (a manifest lands next to it)
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn run(args: &RegionsArgs) -> Result<(), CliError> {
    let (g, bytes) = io::load_graph(&args.graph_file)?;
    let report = count_regions_repulsive(&g).map_err(region_error)?;

    println!("graph: {} vertices, {} edges", g.vertex_count(), g.edge_count());
    println!("r0 = {}", report.r0);
    println!("n_acyclic = {}", report.n_acyclic);
    println!("n_cyclic = {}", report.n_cyclic);

    if let Some(family) = args.closed_form {
        let expected =
            closed_form_regions(family, g.vertex_count()).map_err(region_error)?;
        if u128::from(report.r0) == expected {
            println!("closed form ({}): {} regions, matches", family_name(family), expected);
        } else {
            return Err(CliError::Failed(format!(
                "closed form for a {} on {} vertices predicts {} regions, counted {}",
                family_name(family),
                g.vertex_count(),
                expected,
                report.r0
            )));
        }
    }

    if let Some(out) = &args.json {
        let mut text = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Failed(format!("report serialisation: {e}")))?;
        text.push('\n');
        io::write_text(out, &text)?;
        let config = serde_json::json!({
            "closed_form": args.closed_form.map(family_name),
        });
        RunManifest::new("regions", &[&bytes], 0, config).write_alongside(out)?;
        println!("report written to {}", out.display());
    }
    Ok(())
}
