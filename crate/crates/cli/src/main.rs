mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::Command;
use config::{GridConfig, RunConfig};
use dptqfi::{Error, ErrorKind};
use output::Format;

#[derive(Parser, Debug)]
#[command(name = "dptqfi", version, about = "QFI, counting statistics and trajectories of open quantum systems")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads for grid scans and trajectory batches.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Time grid `start:stop:count[:lin|log]`.
    #[arg(long = "t", allow_hyphen_values = true, value_parser = GridConfig::parse)]
    t_grid: Option<GridConfig>,
    /// Counting-field grid `start:stop:count[:lin|log]`.
    #[arg(long = "s", allow_hyphen_values = true, value_parser = GridConfig::parse)]
    s_grid: Option<GridConfig>,
    /// Single evaluation time for cgf, traj, oracle and wigner.
    #[arg(long)]
    time: Option<f64>,
    /// Initial finite-difference step in `g`.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    ntraj: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Precondition => 4,
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidParameter(format!("reading {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.t_grid.is_some() {
        cfg.t_grid = cli.t_grid;
    }
    if cli.s_grid.is_some() {
        cfg.s_grid = cli.s_grid;
    }
    if cli.time.is_some() {
        cfg.t = cli.time;
    }
    if let Some(h) = cli.h {
        cfg.stencil.h = h;
    }
    if let Some(n) = cli.ntraj {
        cfg.n_traj = n;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let cfg = load(cli)?;
    let hash = output::config_hash(&cfg.canonical_json());
    let (table, warnings) = commands::run(cli.command, &cfg, hash)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let text = table.render(cli.format);
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidParameter(format!("writing {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
