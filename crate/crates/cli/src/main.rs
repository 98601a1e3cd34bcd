use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dais_core::harness::{run_and_write, run_pseudo_true, ExperimentConfig, ExperimentKind};
use dais_core::DaisError;

#[derive(Parser, Debug)]
#[command(name = "dais", version, about = "Localization bounds under delay-angle information spoofing")]
struct Cli {
    /// TOML experiment file; the built-in reference scenario when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, env = "DAIS_SEED_PILOT")]
    seed_pilot: Option<u64>,

    #[arg(long, global = true, env = "DAIS_SEED_SHIFT")]
    seed_shift: Option<u64>,

    /// Worker threads; rayon's default when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Receiver CRB and eavesdropper MCRB across the SNR sweep.
    Bounds,
    /// Eavesdropper bound over the delay/angle shift grid.
    Design,
    /// Bounds averaged over random shifts, with the delay-only baseline.
    Average,
    /// Rank of the information when the shift is treated as unknown.
    Leakage,
    /// Sub-array triangulation error versus angle shift.
    Subarray,
    /// Location an eavesdropper converges to for the configured shift.
    PseudoTrue,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Bounds => ExperimentKind::Bounds,
            Command::Design => ExperimentKind::Design,
            Command::Average => ExperimentKind::Average,
            Command::Leakage => ExperimentKind::Leakage,
            Command::Subarray => ExperimentKind::Subarray,
            Command::PseudoTrue => ExperimentKind::PseudoTrue,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, DaisError> {
    let kind = cli.command.kind();
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::reference(kind),
    };
    config.experiment = kind;
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    if let Some(seed) = cli.seed_pilot {
        config.seeds.pilot = seed;
    }
    if let Some(seed) = cli.seed_shift {
        config.seeds.shift = seed;
    }
    for warning in config.validate()? {
        eprintln!("warning: {warning}");
    }
    Ok(config)
}

fn print_pseudo_true(config: &ExperimentConfig) -> Result<(), DaisError> {
    let solution = run_pseudo_true(config)?;
    let loc = &solution.locations;
    println!("shift: delta_tau = {} us, delta_theta = {} rad", config.shift.delta_tau, config.shift.delta_theta);
    println!("alice: [{:.6}, {:.6}]", loc.alice.x, loc.alice.y);
    for (k, s) in loc.scatterers.iter().enumerate() {
        println!("scatterer {}: [{:.6}, {:.6}]", k + 1, s.x, s.y);
    }
    println!("leading path: {}{}", solution.k_min, if solution.swapped { " (swapped)" } else { "" });
    println!("mismatch: {:.6} m", loc.alice.distance(config.scene.alice));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if config.experiment == ExperimentKind::PseudoTrue {
        if let Err(e) = print_pseudo_true(&config) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run_and_write(&config) {
        Ok(artifacts) => {
            eprintln!("wrote {} rows to {}", artifacts.rows, artifacts.csv.display());
            if let Some((svg, _)) = &artifacts.plot {
                eprintln!("plot: {}", svg.display());
            }
            if artifacts.all_degenerate {
                eprintln!("error: every point is numerically degenerate");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e @ DaisError::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
