//! `verify`: recompute each agent's rate at the target formation under a
//! solution's gains and report the residuals against the locked rate. An
//! exactly shaped (compensated) solution sits at machine precision; an
//! uncompensated one carries the epsilon links' drag, hence the loose
//! default tolerance.

use crate::manifest::RunManifest;
use crate::{io, shaping_error, CliError};
use clap::Args;
use consensus_kit_core::verify_limit_cycle;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Problem file: graph, frequencies and target offsets
    pub problem_file: PathBuf,
    /// Solution file with the coupling gains
    pub solution_file: PathBuf,
    /// Largest acceptable |residual|
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    /// Also write the residual report as JSON (a manifest lands next to it)
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn run(args: &VerifyArgs) -> Result<(), CliError> {
    let (p, problem_bytes) = io::load_problem(&args.problem_file)?;
    let (sol, solution_bytes) = io::load_solution(&args.solution_file)?;
    sol.validate_against(&p).map_err(shaping_error)?;

    let residuals = verify_limit_cycle(&p, &sol).map_err(shaping_error)?;
    for (k, r) in residuals.iter().enumerate() {
        println!("agent {}: residual {r:+.6e}", k + 1);
    }
    let (agent, worst) = residuals
        .iter()
        .enumerate()
        .map(|(k, r)| (k + 1, r.abs()))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .expect("at least one agent");
    println!("max |residual| = {worst:.6e} (agent {agent})");

    if let Some(out) = &args.json {
        let report = serde_json::json!({
            "residuals": residuals,
            "max_abs_residual": worst,
            "worst_agent": agent,
            "tol": args.tol,
        });
        let mut text = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Failed(format!("report serialisation: {e}")))?;
        text.push('\n');
        io::write_text(out, &text)?;
        let config = serde_json::json!({ "tol": args.tol });
        RunManifest::new("verify", &[&problem_bytes, &solution_bytes], 0, config)
            .write_alongside(out)?;
        println!("report written to {}", out.display());
    }

    if worst < args.tol {
        println!("within tolerance {}", args.tol);
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "max |residual| {worst:.6e} exceeds tolerance {}",
            args.tol
        )))
    }
}
