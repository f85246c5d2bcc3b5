use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use uptheriver::harness::{exit, exit_code, run_experiment, write_outputs, Experiment, KList, RunConfig};

/// Particle simulations of the push-the-laggard problem and checks against
/// its hydrodynamic limit.
#[derive(Parser, Debug)]
#[command(name = "uptheriver", version)]
struct Cli {
    command: Command,
    /// Experiment file (`.json` or `.toml`); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Particle count; repeat for a list.
    #[arg(long = "K", value_name = "n")]
    k: Vec<u64>,
    #[arg(long, value_name = "n")]
    replicates: Option<u32>,
    /// Seed of replicate 0; replicate r uses seed + r.
    #[arg(long, value_name = "n")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "n")]
    jobs: Option<usize>,
    #[arg(long, value_name = "dir")]
    output_dir: Option<PathBuf>,
    /// Exit with status 1 when an acceptance check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Survivors,
    StrategySweep,
    HydroCompare,
    StefanSolve,
    IdentityTest,
    AtlasGaps,
    Validate,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Survivors => Experiment::Survivors,
            Command::StrategySweep => Experiment::StrategySweep,
            Command::HydroCompare => Experiment::HydroCompare,
            Command::StefanSolve => Experiment::StefanSolve,
            Command::IdentityTest => Experiment::IdentityTest,
            Command::AtlasGaps => Experiment::AtlasGaps,
            Command::Validate => Experiment::Validate,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { exit::PASS as u8 });
        }
    };
    ExitCode::from(run(cli) as u8)
}

fn run(cli: Cli) -> i32 {
    let experiment = Experiment::from(cli.command);
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::from_path(path) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        },
        None => RunConfig::default(),
    };
    match cli.k.as_slice() {
        [] => {}
        [k] => cfg.k = Some(KList::One(*k)),
        ks => cfg.k = Some(KList::Many(ks.to_vec())),
    }
    if cli.replicates.is_some() {
        cfg.replicates = cli.replicates;
    }
    if cli.seed.is_some() {
        cfg.seed_base = cli.seed;
    }
    if cli.output_dir.is_some() {
        cfg.output_dir = cli.output_dir.clone();
    }
    let resolved = match cfg.resolve(experiment) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };

    let start = Instant::now();
    let outcome = match run_experiment(&resolved, cli.jobs) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    if let Err(e) = write_outputs(&resolved.output_dir, &resolved, &outcome) {
        return fail(&e);
    }
    for c in &outcome.summary.checks {
        let tag = match (c.passed, c.enforced) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "note",
        };
        println!("{tag} {:<26} {:<12.6} {}", c.name, c.value, c.criterion);
    }
    eprintln!(
        "{} finished in {:.1} s; results in {}",
        experiment.name(),
        start.elapsed().as_secs_f64(),
        resolved.output_dir.display()
    );
    let enforce = cli.check || experiment == Experiment::Validate;
    if enforce && !outcome.summary.passed {
        exit::CHECK_FAILED
    } else {
        exit::PASS
    }
}

fn fail(e: &uptheriver::Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}
