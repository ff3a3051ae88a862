use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use synfuel_cli::commands::{self, Run, RunOptions};
use synfuel_ies::plantmodel::IesConfiguration;

/// Stochastic techno-economic study of a nuclear-coupled synfuel plant.
#[derive(Parser)]
#[command(name = "synfuel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the synthetic price model to the price history.
    Train(Common),
    /// Emit synthetic price years.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Years per realization.
        #[arg(long, default_value_t = 1)]
        years: usize,
    },
    /// Export the hourly schedule of one operating year.
    Dispatch {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        capacities: Capacities,
    },
    /// Build the CO₂ supply curve.
    SupplyCurve(Common),
    /// Build the refinery-gate fuel price track.
    GatePrices(Common),
    /// Monte Carlo NPV of one configuration.
    Npv {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        capacities: Capacities,
    },
    /// Evaluate the capacity lattice.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Lattice points per axis.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Run the sensitivity suite around a reference configuration.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        capacities: Capacities,
        /// Lattice points per axis when the reference comes from a sweep.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Print the JSON Schema of the configuration document.
    Schema,
    /// Run the full pipeline and collect every artifact in one directory.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        points: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Base seed; defaults to `study.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Price realizations; defaults to `study.realizations`.
    #[arg(long)]
    realizations: Option<usize>,
}

/// Overrides `study.configuration` when all three are given.
#[derive(Args)]
struct Capacities {
    #[arg(long)]
    htse_mwe: Option<f64>,
    #[arg(long)]
    ft_kg_per_h: Option<f64>,
    #[arg(long)]
    storage_kg: Option<f64>,
}

impl Capacities {
    fn resolve(&self) -> Result<Option<IesConfiguration>> {
        match (self.htse_mwe, self.ft_kg_per_h, self.storage_kg) {
            (None, None, None) => Ok(None),
            (Some(htse_mwe), Some(ft_kg_per_h), Some(storage_kg)) => Ok(Some(IesConfiguration {
                htse_mwe,
                ft_kg_per_h,
                storage_kg,
            })),
            _ => bail!("--htse-mwe, --ft-kg-per-h and --storage-kg must be given together"),
        }
    }
}

fn options(common: &Common, points: Option<usize>, capacities: Option<&Capacities>) -> Result<RunOptions> {
    Ok(RunOptions {
        seed: common.seed,
        realizations: common.realizations,
        out: common.out.clone(),
        sweep_points: points,
        configuration: capacities.map(Capacities::resolve).transpose()?.flatten(),
    })
}

fn execute(command: Command) -> Result<Value> {
    let (common, opts) = match &command {
        Command::Schema => return Ok(synfuel_cli::config::schema()),
        Command::Train(c) | Command::SupplyCurve(c) | Command::GatePrices(c) => (c, options(c, None, None)?),
        Command::Generate { common, .. } => (common, options(common, None, None)?),
        Command::Dispatch { common, capacities } | Command::Npv { common, capacities } => {
            (common, options(common, None, Some(capacities))?)
        }
        Command::Sweep { common, points } | Command::Report { common, points } => {
            (common, options(common, *points, None)?)
        }
        Command::Sensitivity {
            common,
            capacities,
            points,
        } => (common, options(common, *points, Some(capacities))?),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build()?;
    let run = Run::new(&common.config, &opts)?;
    pool.install(|| match command {
        Command::Train(_) => commands::train(&run),
        Command::Generate { years, .. } => commands::generate_prices(&run, years),
        Command::Dispatch { .. } => commands::dispatch(&run),
        Command::SupplyCurve(_) => commands::supply_curve(&run),
        Command::GatePrices(_) => commands::gate_prices(&run),
        Command::Npv { .. } => commands::npv(&run),
        Command::Sweep { .. } => commands::sweep(&run),
        Command::Sensitivity { .. } => commands::sensitivity(&run),
        Command::Report { .. } => commands::report(&run),
        Command::Schema => unreachable!("handled before loading a configuration"),
    })
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use synfuel_ies::Error as E;
    for cause in err.chain() {
        if cause.is::<commands::InfeasibleConfiguration>() {
            return "infeasible";
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InfeasibleSite { .. }
                | E::DispatchInfeasible { .. }
                | E::NoFeasibleResult
                | E::SupplyShortfall { .. }
                | E::BeyondSupplyCurve { .. } => "infeasible",
                E::Io { .. } | E::Csv { .. } | E::Json { .. } => "io",
                E::InvalidConfiguration(_) | E::InvalidInput(_) => "config",
                _ => "engine",
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "schema";
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "config"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(doc) => {
            println!("{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(err) => {
            let report = json!({
                "error": {
                    "kind": error_kind(&err),
                    "message": err.to_string(),
                    "causes": err.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
                }
            });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
