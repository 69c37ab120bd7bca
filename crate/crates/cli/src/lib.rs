mod commands;
mod config;
mod error;
mod output;
mod reproduce;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use evtsir_core::presets;
use evtsir_core::stats::KlOptions;

use crate::commands::{Density, Outcome};
use crate::config::{CommonArgs, Extra, GridArgs, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{Document, Format};

/// Extreme-value analysis of the maximum SIR over L branches under
/// κ-μ shadowed fading.
#[derive(Debug, Parser)]
#[command(name = "evtsir", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact single-link SIR CDF on a z-grid.
    Cdf {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Exact single-link SIR density on a z-grid.
    Pdf {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Frechet scale, shape and convergence exponent for each L.
    Frechet {
        #[command(flatten)]
        common: CommonArgs,
        /// Also report the order-nu moment of the limit law.
        #[arg(long)]
        nu: Option<f64>,
    },
    /// Outage probability of the maximum SIR: limit law, exact and simulated.
    Outage {
        #[command(flatten)]
        common: CommonArgs,
        /// Threshold(s), comma separated.
        #[arg(long = "gamma-t", value_delimiter = ',')]
        gamma_t: Vec<f64>,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Ergodic rate of the maximum SIR: limit law and simulated.
    Rate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Rate when keeping the Ls strongest of L branches: bound and simulated.
    Fas {
        #[command(flatten)]
        common: CommonArgs,
        /// Selected branch count(s), comma separated.
        #[arg(long = "Ls", value_delimiter = ',')]
        ls: Vec<usize>,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Histogram KL divergence between simulated maxima and the limit law.
    Kl {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Count used for empty reference bins.
        #[arg(long, default_value_t = 0.5)]
        pseudo_count: f64,
        /// Clip both samples at this quantile of their union.
        #[arg(long)]
        winsorize: Option<f64>,
    },
    /// Regenerate the KL table or a figure's data as files in --out.
    Reproduce(ReproduceArgs),
    /// List the named scenarios.
    Presets,
}

#[derive(Debug, Clone, Args)]
struct McArgs {
    /// Monte Carlo repetitions.
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct ReproduceArgs {
    /// `table1`, `fig1` … `fig13`, or `all`.
    target: String,
    #[arg(long, default_value = "reproduce")]
    out: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    reps: usize,
    #[arg(long, default_value_t = evtsir_core::DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn finish(name: &str, cfg: &RunConfig, outcome: Outcome) -> CliResult<()> {
    let doc = Document::new(name, cfg.seed, cfg.header_json(), outcome.table);
    output::emit(&doc.render(cfg.format), cfg.out.as_deref())?;
    if outcome.failed {
        return Err(commands::numeric("series did not converge at one or more grid points (rows marked `nonconverged`)"));
    }
    Ok(())
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Cdf { common, grid } => {
            let cfg = config::resolve(&common, Extra { grid: Some(grid), ..Extra::default() })?;
            finish("cdf", &cfg, commands::cdf_or_pdf(&cfg, Density::Cdf)?)
        }
        Command::Pdf { common, grid } => {
            let cfg = config::resolve(&common, Extra { grid: Some(grid), ..Extra::default() })?;
            finish("pdf", &cfg, commands::cdf_or_pdf(&cfg, Density::Pdf)?)
        }
        Command::Frechet { common, nu } => {
            if let Some(nu) = nu {
                if !(nu > 0.0) {
                    return Err(error::usage(format!("--nu must be positive, got {nu}")));
                }
            }
            let cfg = config::resolve(&common, Extra { nu, ..Extra::default() })?;
            finish("frechet", &cfg, commands::frechet_table(&cfg)?)
        }
        Command::Outage { common, gamma_t, mc } => {
            let cfg = config::resolve(&common, Extra { gamma_t, reps: mc.reps, ..Extra::default() })?;
            finish("outage", &cfg, commands::outage(&cfg)?)
        }
        Command::Rate { common, mc } => {
            let cfg = config::resolve(&common, Extra { reps: mc.reps, ..Extra::default() })?;
            finish("rate", &cfg, commands::rate(&cfg)?)
        }
        Command::Fas { common, ls, mc } => {
            let cfg = config::resolve(&common, Extra { ls, reps: mc.reps, ..Extra::default() })?;
            finish("fas", &cfg, commands::fas(&cfg)?)
        }
        Command::Kl { common, mc, pseudo_count, winsorize } => {
            let cfg = config::resolve(&common, Extra { reps: mc.reps, ..Extra::default() })?;
            let opts = KlOptions { pseudo_count, winsorize };
            finish("kl", &cfg, commands::kl(&cfg, &opts)?)
        }
        Command::Reproduce(args) => {
            if args.reps < config::MIN_REPS {
                return Err(error::usage(format!("--reps must be at least {}, got {}", config::MIN_REPS, args.reps)));
            }
            let workers = args.workers.unwrap_or_else(config::default_workers);
            if workers == 0 {
                return Err(error::usage("--workers must be at least 1"));
            }
            let set = reproduce::Settings {
                reps: args.reps,
                seed: args.seed,
                workers,
            };
            for path in reproduce::run(&args.target, &args.out, args.format, &set)? {
                eprintln!("wrote {path}");
            }
            Ok(())
        }
        Command::Presets => {
            let mut text = String::new();
            for p in presets::all() {
                text.push_str(&format!("{:<22} beta={:<3} {}\n", p.name, p.scenario.mu_sum(), p.description));
            }
            output::emit(&text, None)
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0, 2 (numeric failure), 64 (usage) or 74 (I/O).
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 64 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let kind = match &e {
                CliError::Usage(_) => "usage error",
                CliError::Numeric(_) => "numeric failure",
                CliError::Io(_) => "i/o error",
            };
            eprintln!("evtsir: {kind}: {e}");
            e.exit_code()
        }
    }
}
