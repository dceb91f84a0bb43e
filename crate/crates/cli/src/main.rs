use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twophoton_cli::config::{self, Engine};
use twophoton_cli::engines;
use twophoton_cli::output::Report;
use twophoton_cli::scenarios::{self, Named, RunOptions};
use twophoton_cli::{init_workers, povm_cmd, sweep, CliError, CliResult};

#[derive(Parser)]
#[command(name = "twophoton", version, about = "Sequential two-photon detector simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write one CSV per table (plus notes and a gnuplot script) here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named scenario (fig2, fig3, fig5, fig6_7, fig8, fig9) or a config file.
    Run {
        target: String,
        /// Override the engine selection.
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
    },
    /// Cartesian sweep described by a config file.
    Sweep { config: PathBuf },
    /// Build and diagonalize the detector operators.
    Povm { config: PathBuf },
    /// Cross-check the two time-domain engines on a scenario or config file.
    Validate { target: String },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum EngineArg {
    Gdm,
    Liouvillian,
    Analytic,
    All,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Gdm => Engine::Gdm,
            EngineArg::Liouvillian => Engine::Liouvillian,
            EngineArg::Analytic => Engine::Analytic,
            EngineArg::All => Engine::All,
        }
    }
}

/// Equivalence threshold for `validate`.
const VALIDATE_TOLERANCE: f64 = 1e-5;

fn run(cli: &Cli) -> CliResult<Report> {
    match &cli.command {
        Command::Run { target, engine } => {
            if let Some(named) = Named::parse(target) {
                let mut opts = RunOptions::default();
                if let Some(e) = engine {
                    opts.engine = (*e).into();
                }
                scenarios::run_named(named, &opts)
            } else {
                let cfg = config::load(Path::new(target))?;
                let mut opts = RunOptions::from_config(&cfg)?;
                if let Some(e) = engine {
                    opts.engine = (*e).into();
                }
                scenarios::run_pair(&scenarios::setup_from_config(&cfg)?, &opts)
            }
        }
        Command::Sweep { config: path } => sweep::run(&config::load(path)?),
        Command::Povm { config: path } => povm_cmd::run(&config::load(path)?),
        Command::Validate { target } => {
            let setup = match Named::parse(target) {
                Some(n) => n.representative(),
                None => scenarios::setup_from_config(&config::load(Path::new(target))?)?,
            };
            let eq = engines::equivalence(&setup, None, 10)?;
            let mut report = Report::default();
            report.tables.push(scenarios::crosscheck_table(&eq).brief());
            for (v, d) in &eq.attempts {
                report.notes.push(format!("transform {v:?}: initial trace-rule residual {d:.3e}"));
            }
            if eq.check.max_deviation >= VALIDATE_TOLERANCE {
                report.print(std::io::stdout()).ok();
                return Err(CliError::Numerical(twophoton_core::Error::Consistency(format!(
                    "engines disagree by {:.3e} at t = {:.4}",
                    eq.check.max_deviation, eq.check.worst_time
                ))));
            }
            Ok(report)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    init_workers();
    let result = run(&cli).and_then(|report| match &cli.out {
        Some(dir) => report.save(dir),
        None => report.print(std::io::stdout()).map_err(|source| CliError::Write {
            file: PathBuf::from("<stdout>"),
            source,
        }),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
