use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fluxprobe_cli::{commands, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fluxprobe", version, about = "Optimal incident fields for detecting a buried scatterer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides the config.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Reflection table and distinguishability of a layered medium.
    #[command(name = "probe-1d")]
    Probe1d(Common),
    /// Assemble (or load from cache) the scattering matrices of a voxel medium.
    #[command(name = "assemble-3d")]
    Assemble3d(Common),
    /// Eigenvalue curves of the time-reversal operator and their maximizers.
    Spectrum(Common),
    /// Iterative time reversal.
    Iterate(Common),
    /// The concentration integral I(n, p) against its asymptote.
    Lemma1 {
        /// Exponents n, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0, 100.0, 1e3, 1e4, 1e5])]
        n: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Invariant checks on the configured medium.
    Validate(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Probe1d(_) => "probe-1d",
            Command::Assemble3d(_) => "assemble-3d",
            Command::Spectrum(_) => "spectrum",
            Command::Iterate(_) => "iterate",
            Command::Lemma1 { .. } => "lemma1",
            Command::Validate(_) => "validate",
        }
    }
}

fn prepare(c: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let workers = c.workers.or(cfg.workers);
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = c.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    Ok((cfg, out))
}

fn run(command: &Command) -> Result<serde_json::Value, CliError> {
    match command {
        Command::Probe1d(c) => prepare(c).and_then(|(cfg, out)| commands::probe_1d(&cfg, &out)),
        Command::Assemble3d(c) => prepare(c).and_then(|(cfg, out)| commands::assemble_3d(&cfg, &out)),
        Command::Spectrum(c) => prepare(c).and_then(|(cfg, out)| commands::spectrum(&cfg, &out)),
        Command::Iterate(c) => prepare(c).and_then(|(cfg, out)| commands::iterate(&cfg, &out)),
        Command::Lemma1 { n, p, b, h, out } => commands::lemma1(n, *p, *b, *h, out),
        Command::Validate(c) => prepare(c).and_then(|(cfg, out)| commands::validate(&cfg, &out)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(report) => {
            if !matches!(cli.command, Command::Validate(_)) {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.document(cli.command.name()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
