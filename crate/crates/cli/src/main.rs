use clap::{Parser, Subcommand};
use consensus_kit_cli::{demo, regions, shape, simulate, verify};

#[derive(Parser)]
#[command(
    name = "consensus-kit",
    version,
    about = "Design and simulate phase formations of coupled agents on the circle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count the disconnected invariant regions of a repulsive network
    Regions(regions::RegionsArgs),
    /// Synthesise coupling gains that lock a target formation
    Shape(shape::ShapeArgs),
    /// Integrate a designed network and report lock and events
    Simulate(simulate::SimulateArgs),
    /// Check a solution holds the formation at the locked rate
    Verify(verify::VerifyArgs),
    /// Show how one-way repulsion lets agents cross, and how reverse
    /// links prevent it
    DemoFig2(demo::DemoArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Regions(args) => regions::run(args),
        Command::Shape(args) => shape::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Verify(args) => verify::run(args),
        Command::DemoFig2(args) => demo::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
