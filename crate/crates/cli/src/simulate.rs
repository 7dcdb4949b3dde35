//! `simulate`: integrate a designed network from a seeded random state (or
//! one loaded from a file), print the lock summary and any events, and
//! optionally dump the trajectory as CSV. `--sweep` fans the same setup
//! out over consecutive seeds on worker threads.

use crate::manifest::RunManifest;
use crate::{io, shaping_error, sim_error, CliError};
use clap::Args;
use consensus_kit_core::{
    formation_error, CoupledSystem, EventKind, Problem, SimConfig, SimError, Trajectory,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Problem file: graph, frequencies and target offsets
    pub problem_file: PathBuf,
    /// Solution file with the coupling gains
    pub solution_file: PathBuf,
    /// Integration horizon
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    /// Grid step
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// Seed for the random initial state
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// "random" or a path to a JSON array of phases
    #[arg(long, default_value = "random")]
    pub init: String,
    /// Write the trajectory here (a manifest lands next to it)
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Keep every k-th grid sample in the trajectory
    #[arg(long, default_value_t = 1)]
    pub record_stride: usize,
    /// Guard band around the coupling barriers
    #[arg(long, default_value_t = 1e-6)]
    pub guard: f64,
    /// Run this many simulations on seeds seed, seed+1, ...
    #[arg(long)]
    pub sweep: Option<usize>,
}

/// What one finished run reports. Collapse is data here, not an early
/// return, so a sweep can finish its other runs first.
struct RunOutcome {
    seed: u64,
    result: Result<Trajectory, SimError>,
    csv_path: Option<PathBuf>,
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let (p, problem_bytes) = io::load_problem(&args.problem_file)?;
    let (sol, solution_bytes) = io::load_solution(&args.solution_file)?;
    sol.validate_against(&p).map_err(shaping_error)?;
    let sys = CoupledSystem::from_solution(&p, &sol, args.guard).map_err(sim_error)?;

    if args.record_stride == 0 {
        return Err(CliError::Failed("record stride must be at least 1".into()));
    }
    let cfg = SimConfig {
        step: args.step,
        t_end: args.t_end,
        barrier_guard: args.guard,
        record_stride: args.record_stride,
        ..SimConfig::default()
    };

    let mut input_chunks: Vec<&[u8]> = vec![&problem_bytes, &solution_bytes];
    let init_file: Option<(Vec<f64>, Vec<u8>)> = if args.init == "random" {
        None
    } else {
        Some(io::load_init(Path::new(&args.init), p.agent_count())?)
    };
    if let Some((_, bytes)) = &init_file {
        input_chunks.push(bytes);
    }

    let runs = args.sweep.unwrap_or(1);
    if runs == 0 {
        return Err(CliError::Failed("sweep needs at least one run".into()));
    }

    let outcomes = execute(&sys, &cfg, args, &init_file, runs)?;

    let mut first_collapse: Option<f64> = None;
    for (idx, outcome) in outcomes.iter().enumerate() {
        if runs > 1 {
            println!("run {idx} (seed {}):", outcome.seed);
        }
        match &outcome.result {
            Ok(traj) => report(&p, traj, &cfg),
            Err(SimError::StepCollapse { t_last, trajectory }) => {
                println!("step collapse at t = {t_last:.6}; partial trajectory kept");
                report(&p, trajectory, &cfg);
                first_collapse.get_or_insert(*t_last);
            }
            Err(e) => return Err(sim_error(e.clone())),
        }
        if let Some(path) = &outcome.csv_path {
            let traj = match &outcome.result {
                Ok(traj) => traj,
                Err(SimError::StepCollapse { trajectory, .. }) => trajectory,
                Err(_) => unreachable!("only collapse keeps a trajectory"),
            };
            io::write_text(path, &traj.to_csv())?;
            RunManifest::new(
                "simulate",
                &input_chunks,
                outcome.seed,
                serde_json::to_value(&cfg).expect("config serialises"),
            )
            .write_alongside(path)?;
            println!("trajectory written to {}", path.display());
        }
    }

    match first_collapse {
        Some(t_last) => Err(CliError::Collapse { t_last }),
        None => Ok(()),
    }
}

/// Draw phases uniformly until the system accepts the state. Rejection
/// keeps the draw honest: states inside a guard band are resampled, not
/// nudged, so the accepted distribution is uniform over the valid set.
pub fn random_init(sys: &CoupledSystem, seed: u64) -> Result<Vec<f64>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sys.agent_count();
    for _ in 0..1000 {
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
        if sys.rhs(&theta).is_ok() {
            return Ok(theta);
        }
    }
    Err(CliError::Failed(
        "no valid initial state in 1000 draws; the guard bands leave almost nothing".into(),
    ))
}

fn csv_path_for_run(base: &Path, idx: usize, runs: usize) -> PathBuf {
    if runs == 1 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().unwrap_or_default().to_string_lossy();
    let name = match base.extension() {
        Some(ext) => format!("{stem}_run{idx}.{}", ext.to_string_lossy()),
        None => format!("{stem}_run{idx}"),
    };
    base.with_file_name(name)
}

fn execute(
    sys: &CoupledSystem,
    cfg: &SimConfig,
    args: &SimulateArgs,
    init_file: &Option<(Vec<f64>, Vec<u8>)>,
    runs: usize,
) -> Result<Vec<RunOutcome>, CliError> {
    let worker_cap = std::env::var("CONSENSUS_KIT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |v| v.get()));
    let workers = worker_cap.min(runs);

    let slots: Mutex<Vec<Option<Result<RunOutcome, CliError>>>> =
        Mutex::new((0..runs).map(|_| None).collect());
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= runs {
                    break;
                }
                let seed = args.seed + idx as u64;
                let outcome = (|| {
                    let theta0 = match init_file {
                        Some((theta, _)) => theta.clone(),
                        None => random_init(sys, seed)?,
                    };
                    Ok(RunOutcome {
                        seed,
                        result: sys.simulate(&theta0, cfg),
                        csv_path: args.csv.as_ref().map(|b| csv_path_for_run(b, idx, runs)),
                    })
                })();
                slots.lock().unwrap()[idx] = Some(outcome);
            });
        }
    });

    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every run index was claimed"))
        .collect()
}

fn report(p: &Problem, traj: &Trajectory, cfg: &SimConfig) {
    for e in &traj.events {
        if e.kind == EventKind::OrderingChange {
            println!("  t = {:.6}  {}", e.t, e.detail);
        }
    }
    let halvings = traj
        .events
        .iter()
        .filter(|e| e.kind == EventKind::BarrierApproach)
        .count();
    if halvings > 0 {
        println!("  {halvings} steps halved near a barrier");
    }
    let fe = traj
        .last_state()
        .map(|s| formation_error(p, &s.theta))
        .unwrap_or(f64::NAN);
    match &traj.lock {
        Some(lock) => println!(
            "  locked at t = {:.3}, omega_est = {:.6}, formation error = {:.3e}",
            lock.t, lock.omega_est, fe
        ),
        None => println!("  no phase lock by t = {}; formation error = {:.3e}", cfg.t_end, fe),
    }
}
