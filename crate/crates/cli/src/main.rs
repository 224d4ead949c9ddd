//! `bec`: run bulk-edge experiments from a JSON config.
//!
//! Exit status is 0 on success, 2 for configuration errors (reported with the
//! JSON field path) and 3 for numerical failures (reported with the stage).

mod cache;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cache::{config_hash, unix_now, write_outputs, Cache, ResultRecord, TOOL_VERSION};
use commands::Command;
use config::ExperimentConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bec", version, about = "Bulk-edge correspondence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's `out`, default `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Recompute even when a cached record exists.
    #[arg(long, global = true)]
    force: bool,

    /// Worker threads for the numerical kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(flatten)]
    overrides: Overrides,
}

/// Command-line values that replace the corresponding config fields.
#[derive(Debug, clap::Args)]
struct Overrides {
    /// Brillouin-zone grid side.
    #[arg(long, global = true)]
    grid: Option<usize>,

    /// Strip half-width.
    #[arg(long, global = true)]
    width: Option<usize>,

    #[arg(long, global = true)]
    zeta_nodes: Option<usize>,

    /// Energy window half-width around lambda0.
    #[arg(long, global = true)]
    window: Option<f64>,

    /// Interface weight needed for a state to count in the flow.
    #[arg(long, global = true)]
    loc_threshold: Option<f64>,

    /// Conductivity box: L1 columns, 2 L2 + 1 rows.
    #[arg(long = "box", num_args = 2, value_names = ["L1", "L2"], global = true)]
    box_size: Option<Vec<usize>>,

    #[arg(long, global = true)]
    margin: Option<usize>,

    /// Ramp half-width of the position switch.
    #[arg(long, global = true)]
    ell: Option<f64>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        if let Some(w) = self.width {
            cfg.edge.width = w;
        }
        if let Some(n) = self.zeta_nodes {
            cfg.edge.zeta_nodes = n;
        }
        if let Some(w) = self.window {
            cfg.edge.window = Some(w);
        }
        if let Some(t) = self.loc_threshold {
            cfg.edge.loc_threshold = t;
        }
        if let Some(b) = &self.box_size {
            cfg.conductivity.box_size = [b[0], b[1]];
        }
        if let Some(m) = self.margin {
            cfg.conductivity.margin = m;
        }
        if let Some(l) = self.ell {
            cfg.conductivity.ell = Some(l);
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config: a config file is required".into()))?;
    let mut cfg = config::load(path)?;
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let command = cli.command;
    let hash = config_hash(command.name(), &cfg);
    let cache = Cache::new(&out);

    let cached = if cli.force { None } else { cache.lookup(&hash, command.name()) };
    let record = match cached {
        Some(r) => {
            eprintln!("cache hit {hash}");
            r
        }
        None => {
            let started = unix_now();
            let outputs = command.run(&cfg)?;
            let r = ResultRecord {
                config_hash: hash.clone(),
                command: command.name().to_string(),
                tool_version: TOOL_VERSION.to_string(),
                started,
                finished: unix_now(),
                outputs,
            };
            cache.store(&r)?;
            r
        }
    };
    for p in write_outputs(&out, &record.outputs)? {
        eprintln!("wrote {}", p.display());
    }
    if let Some(summary) = record.outputs.get(command.summary_file()) {
        if command == Command::Verify {
            println!("match: {}", summary["match"]);
        }
        println!("{}", cache::render(command.summary_file(), summary).trim_end());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
