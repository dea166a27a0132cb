use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use cdp_cli::{ExperimentConfig, Stage, Workspace};
use cdp_core::attack::EstimatorKind;

#[derive(Parser)]
#[command(name = "cdpbench", version, about = "Copy detection pattern experiment driver")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, default_value = "cdpbench.toml")]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the template set.
    Generate,
    /// Print-scan every template through the configured printers.
    Printsim {
        #[arg(long)]
        printer: Option<String>,
    },
    /// Train the estimators and score them on held-out codes.
    Attack {
        #[arg(long)]
        estimator: Option<EstimatorKind>,
        #[arg(long)]
        printer: Option<String>,
    },
    /// Re-print estimates to produce fakes.
    Fakes {
        /// Printer whose scans were estimated.
        #[arg(long)]
        from: Option<String>,
        /// Printer used to print the fakes.
        #[arg(long)]
        to: Option<String>,
    },
    /// Compute the metric vectors of originals and fakes.
    Authenticate,
    /// Run the SVM protocols.
    Classify,
    /// Write the report bundle.
    Report,
    /// Run every stage in order.
    RunAll,
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Generate => Stage::Generate.name(),
            Command::Printsim { .. } => Stage::Printsim.name(),
            Command::Attack { .. } => Stage::Attack.name(),
            Command::Fakes { .. } => Stage::Fakes.name(),
            Command::Authenticate => Stage::Authenticate.name(),
            Command::Classify => Stage::Classify.name(),
            Command::Report => Stage::Report.name(),
            Command::RunAll => "run-all",
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        #[cfg(feature = "parallel")]
        anyhow::Context::context(
            rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global(),
            "configuring worker threads",
        )?;
        #[cfg(not(feature = "parallel"))]
        log::warn!("--jobs {jobs} ignored: built without the parallel feature");
    }
    let ws = Workspace::new(cfg, cli.out.clone());
    match &cli.command {
        Command::Generate => ws.generate(),
        Command::Printsim { printer } => ws.printsim(printer.as_deref()),
        Command::Attack { estimator, printer } => ws.attack(*estimator, printer.as_deref()),
        Command::Fakes { from, to } => ws.fakes(from.as_deref(), to.as_deref()),
        Command::Authenticate => ws.authenticate(),
        Command::Classify => ws.classify(),
        Command::Report => ws.report(),
        Command::RunAll => ws.run_all(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cdpbench {} failed: {e:#}", cli.command.stage());
            ExitCode::FAILURE
        }
    }
}
