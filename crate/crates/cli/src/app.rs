use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::ConfigError;
use crate::run::{execute, Command, RunError};
use crate::ExperimentConfig;

#[derive(Parser)]
#[command(name = "rpflow", version, about = "Rosenzweig-Porter flow experiments")]
struct Cli {
    /// Worker threads for the realization pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw potentials and H_T spectra for every realization.
    Sample(RunArgs),
    /// Run the configured experiment.
    Run(RunArgs),
    /// Aggregate run directories into tables and SVG plots.
    Report {
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Check a configuration file and list every violation.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides master_seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(path: &Path) -> Result<ExperimentConfig, RunError> {
    ExperimentConfig::load(path).map_err(|e| match e {
        ConfigError::Io(m) => RunError::Io(m),
        ConfigError::Invalid(errs) => RunError::Validation(errs),
    })
}

/// Parses `args` (program name first) and runs the subcommand. Help and
/// version requests print and succeed; other parse errors are usage errors.
pub fn try_main<I, T>(args: I) -> Result<(), RunError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(RunError::Usage(e.render().to_string().trim_end().to_string())),
    };
    match cli.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| RunError::Validation(vec![e.to_string()]))?
            .install(|| dispatch(cli.cmd)),
        None => dispatch(cli.cmd),
    }
}

fn dispatch(cmd: Cmd) -> Result<(), RunError> {
    match cmd {
        Cmd::Validate { config } => {
            load(&config)?;
            println!("{}: ok", config.display());
        }
        Cmd::Run(a) => run_one(a, Command::Run)?,
        Cmd::Sample(a) => run_one(a, Command::Sample)?,
        Cmd::Report { runs, out } => {
            for f in crate::report::report(&runs, &out)? {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn run_one(a: RunArgs, command: Command) -> Result<(), RunError> {
    let mut cfg = load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    let out = a.out.unwrap_or_else(|| cfg.output_dir.clone());
    cfg.output_dir = out.clone();
    let m = execute(&cfg, &out, command)?;
    for p in &m.phases {
        log::info!("{}: {:.3} s", p.name, p.seconds);
    }
    println!(
        "{} {}: {} outputs, {} failures, in {}",
        m.command,
        cfg.experiment,
        m.outputs.len(),
        m.failures.len(),
        out.display()
    );
    Ok(())
}
