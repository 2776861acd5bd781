use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use resonant_imaging::config::KeyValues;
use resonant_imaging::runner::{run_scenario, validate, RunError, RunKind, Scenario};
use resonant_imaging::validation::DEFAULT_SEED;

/// Resonator-array imaging: capacity, resonances, point-spread and
/// broadband time-reversal imaging runs from flat key-value scenarios.
#[derive(Parser)]
#[command(name = "resonant", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; created if missing. Overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized modes. Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "RES_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium density and capacity of the aperture.
    Capacity(Common),
    /// Asymptotic resonances paired with the matrix-pencil oracle.
    Resonances(Common),
    /// Perturbed Green function along a scan line at one frequency.
    Psf(Common),
    /// Broadband imaging functional along a scan line (one or more eps).
    Imaging(Common),
    /// Closed-form Lorentzian integrals against quadrature.
    ValidateIntegrals(Common),
    /// Full acceptance suite.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Skip the second run used for the determinism check.
        #[arg(long)]
        skip_determinism: bool,
    },
}

fn load(common: &Common) -> Result<KeyValues, RunError> {
    let mut kv = match &common.config {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::default(),
    };
    if let Some(seed) = common.seed {
        kv.set("seed", seed.to_string());
    }
    Ok(kv)
}

fn out_dir(common: &Common, from_config: Option<PathBuf>, fallback: &str) -> PathBuf {
    common
        .out
        .clone()
        .or(from_config)
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn set_threads(n: Option<usize>) -> Result<(), RunError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(RunError::Parameter("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Parameter(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), RunError> {
    let (kind, common) = match &cli.command {
        Command::Capacity(c) => (RunKind::Capacity, c),
        Command::Resonances(c) => (RunKind::Resonances, c),
        Command::Psf(c) => (RunKind::Psf, c),
        Command::Imaging(c) => (RunKind::Imaging, c),
        Command::ValidateIntegrals(c) => (RunKind::ValidateIntegrals, c),
        Command::Validate {
            common,
            skip_determinism,
        } => {
            set_threads(common.threads)?;
            let kv = load(common)?;
            kv.check_known(&["seed", "out"]).map_err(RunError::Config)?;
            let seed = kv.u64_or("seed", DEFAULT_SEED)?;
            let dir = out_dir(common, kv.get("out").map(PathBuf::from), "validation");
            validate(&dir, seed, !skip_determinism, &mut |r| {
                println!("{}", r.line())
            })?;
            println!("all criteria passed; artifacts in {}", dir.display());
            return Ok(());
        }
    };
    set_threads(common.threads)?;
    let kv = load(common)?;
    let sc = Scenario::from_key_values(&kv, kind)?;
    let dir = out_dir(common, sc.out.clone(), &format!("out-{}", sc.kind.name()));
    let manifest = run_scenario(&sc, &dir)?;
    for f in &manifest.files {
        println!("{}  {}", f.sha256, dir.join(&f.file).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
