use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stoq_clock_cli::harness::{resolve_out_dir, run_analyze, run_simulate, run_sweep};
use stoq_clock_cli::{config_load, CliError, SweepVar};

#[derive(Parser)]
#[command(
    name = "stoq-clock",
    about = "Simulator and statistics toolkit for a measurement-driven superconducting qubit clock",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// experiment definition (TOML)
    #[arg(short, long)]
    config: PathBuf,
    /// override the base seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// output directory (default: config out_dir under $STOQ_CLOCK_OUT)
    #[arg(long)]
    out: Option<String>,
    /// worker threads for trajectory ensembles
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured model and write trajectory CSVs
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the clock-signal pipeline over recorded CSVs
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// directory holding the input CSVs
        #[arg(short, long)]
        input: PathBuf,
    },
    /// Simulate and analyze across a parameter sweep
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// swept variable: Omega, E, or n0
        #[arg(long)]
        var: String,
        /// comma-separated sweep values
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
}

fn setup(common: &CommonArgs) -> Result<stoq_clock_cli::RunConfig, CliError> {
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let mut cfg = config_load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::try_parse().map_err(|e| {
        // help/version are not errors
        if e.use_stderr() {
            CliError::Config(e.to_string())
        } else {
            print!("{e}");
            std::process::exit(0);
        }
    })?;

    match cli.command {
        Command::Simulate { common } => {
            let cfg = setup(&common)?;
            let out = resolve_out_dir(&cfg, common.out.as_deref());
            let manifest = run_simulate(&cfg, &out)?;
            report(&manifest, &out);
        }
        Command::Analyze { common, input } => {
            let cfg = setup(&common)?;
            let out = resolve_out_dir(&cfg, common.out.as_deref());
            let manifest = run_analyze(&cfg, &input, &out)?;
            report(&manifest, &out);
        }
        Command::Sweep { common, var, values } => {
            let cfg = setup(&common)?;
            let var: SweepVar = var.parse()?;
            let out = resolve_out_dir(&cfg, common.out.as_deref());
            let manifest = run_sweep(&cfg, var, &values, &out)?;
            report(&manifest, &out);
        }
    }
    Ok(())
}

fn report(manifest: &stoq_clock_cli::RunManifest, out: &std::path::Path) {
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}: {} outputs in {} ({:.2} s)",
        manifest.command,
        manifest.outputs.len(),
        out.display(),
        manifest.wall_clock_seconds
    );
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
