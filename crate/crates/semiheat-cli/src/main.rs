//! Command-line surface for the semiheat library.
//!
//! Every command reads one JSON config (all fields defaulted), writes its
//! artifacts atomically under `--out`, and appends an entry with checksums
//! to `manifest.json`. Reruns with the same config and seed produce byte
//! identical CSV/SVG artifacts.
//!
//! Exit codes: 0 success, 1 validation/configuration error, 2 numerical
//! abort (diagnostics still written).

mod artifacts;
mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "semiheat", version, about = "graph heat-semigroup calculus and renormalized Anderson-model experiments")]
struct Cli {
    /// JSON config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Seed override (takes precedence over the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Spectral cache file, keyed by the graph content hash.
    #[arg(long, global = true)]
    spectral_cache: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph from a generator spec or file and store it with its hash.
    GenGraph {
        /// Generator spec like `torus2d:16` (falls back to the config graph).
        spec: Option<String>,
    },
    /// Eigendecomposition summary (and cache write when requested).
    Spectrum,
    /// Estimate doubling/Ahlfors/Poincare/De Giorgi constants.
    VerifyGeometry,
    /// Fit the heat-kernel bounds and the composition constant.
    VerifyKernel,
    /// Norm reports on a manufactured field plus the noise regularity study.
    Norm,
    /// Bony decomposition of a seeded pair, per-piece norms and residual.
    Paraproduct {
        /// Evaluate through the exact spectral tensor oracle instead of quadrature.
        #[arg(long)]
        oracle: bool,
    },
    /// Commutator-gain refinement sweep.
    CommutatorTest,
    /// Draw weighted noise realizations to a JSON+binary sidecar.
    SampleNoise {
        #[arg(long, default_value_t = 1)]
        draws: u64,
    },
    /// Renormalization-constant ladder with the log fit.
    RenormConstant,
    /// Build and store an enhanced-noise bundle.
    Enhance,
    /// Solve the (renormalized) equation in the configured mode.
    Solve,
    /// Epsilon sweep: renormalized and bare solves down the ladder.
    SweepEps,
    /// Render SVG summaries from the artifacts recorded in the manifest.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match RunConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = semiheat::parallel::env_thread_cap() {
        return run_in_pool(threads, cli, cfg);
    }
    dispatch(cli, cfg)
}

fn run_in_pool(threads: usize, cli: Cli, cfg: RunConfig) -> ExitCode {
    semiheat::parallel::run_with_threads(threads, move || dispatch(cli, cfg))
}

fn dispatch(cli: Cli, cfg: RunConfig) -> ExitCode {
    let ctx = commands::Context {
        cfg,
        out: cli.out,
        spectral_cache: cli.spectral_cache,
    };
    let result = match cli.command {
        Command::GenGraph { spec } => commands::gen_graph(&ctx, spec.as_deref()),
        Command::Spectrum => commands::spectrum(&ctx),
        Command::VerifyGeometry => commands::verify_geometry(&ctx),
        Command::VerifyKernel => commands::verify_kernel(&ctx),
        Command::Norm => commands::norms(&ctx),
        Command::Paraproduct { oracle } => commands::paraproduct(&ctx, oracle),
        Command::CommutatorTest => commands::commutator_test(&ctx),
        Command::SampleNoise { draws } => commands::sample_noise(&ctx, draws),
        Command::RenormConstant => commands::renorm_constant(&ctx),
        Command::Enhance => commands::enhance(&ctx),
        Command::Solve => commands::solve(&ctx),
        Command::SweepEps => commands::sweep_eps(&ctx),
        Command::Report => commands::report(&ctx),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
