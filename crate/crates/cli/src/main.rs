//! `coco-clear`: scenario runner for the coco-clearing engine.
//!
//! Exit status: 0 on success, 1 when a run produced error rows or the engine
//! failed (e.g. no convergence), 2 on invalid input.

mod commands;
mod grid;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coco_clearing::calibration::Method;
use coco_clearing::{ClearingConfig, Error, Scheme};

use grid::Grid;

#[derive(Debug, Parser)]
#[command(
    name = "coco-clear",
    version,
    about = "Clearing, CoCo-ization and stress studies for interbank networks"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Flags override config-file values.
#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Clearing tolerance, relative to the largest face value or external asset.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Iteration cap for the clearing solver.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Seed for the matrix sampler (calibrate) or recorded with the scenario.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML config: a scenario for clear/study*, sampler settings for calibrate.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

impl Global {
    pub fn clearing(&self) -> ClearingConfig {
        let d = ClearingConfig::default();
        ClearingConfig {
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
        }
    }
}

/// Where to write tabular output; stdout when absent.
#[derive(Debug, Clone, Args)]
pub struct OutArg {
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NetworkFiles {
    /// Edge list CSV `debtor,creditor,amount` (creditor 0 = society).
    #[arg(long)]
    pub edges: PathBuf,
    /// Node table CSV `bank,external_assets[,external_liab]`.
    #[arg(long)]
    pub nodes: PathBuf,
}

/// Scenario fields shared by single runs and sweeps; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct BaseArgs {
    #[arg(long)]
    pub trigger: Option<f64>,
    #[arg(long)]
    pub conversion: Option<f64>,
    #[arg(long)]
    pub recovery: Option<f64>,
    #[arg(long)]
    pub shock: Option<f64>,
    #[arg(long)]
    pub interbank_fraction: Option<f64>,
}

/// CoCo-ization of a single run.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    #[command(flatten)]
    pub base: BaseArgs,
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// CoCo fraction applied according to the scheme (sets beta and beta0).
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub beta0: Option<f64>,
}

/// Parameters of a symmetric system.
#[derive(Debug, Clone, Args)]
pub struct SymmetricArgs {
    #[arg(long)]
    pub n: usize,
    /// External debt per bank.
    #[arg(long)]
    pub y: f64,
    /// Interbank debt per bank.
    #[arg(long)]
    pub z: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Share of each bank's equity held by the other banks together.
    #[arg(long, default_value_t = 0.0)]
    pub pie: f64,
    #[arg(long, default_value_t = 0.1)]
    pub trigger: f64,
    #[arg(long, default_value_t = 1.0)]
    pub conversion: f64,
    #[arg(long, default_value_t = 0.5)]
    pub recovery: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate the single-bank valuation curves.
    ValueCurve {
        #[arg(long)]
        vanilla_face: f64,
        #[arg(long)]
        coco_face: f64,
        #[arg(long, default_value_t = 0.1)]
        trigger: f64,
        #[arg(long, default_value_t = 1.0)]
        conversion: f64,
        #[arg(long, default_value_t = 0.5)]
        recovery: f64,
        /// Asset grid (default: 0 to 1.3 times the last breakpoint, 131 points).
        #[arg(long)]
        assets: Option<Grid>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Clear one scenario; writes the result as JSON and the risk measures as CSV.
    Clear {
        #[command(flatten)]
        network: NetworkFiles,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Report the minimal instead of the maximal clearing vector.
        #[arg(long)]
        minimal: bool,
        /// Directory for `result.json` and `measures.csv` (default: stdout).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Reconstruct a liability matrix from aggregate bank data.
    Calibrate {
        /// CSV `bank_id,total_assets,capital,interbank_liabilities[,interbank_assets]`.
        #[arg(long)]
        eba: PathBuf,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        burn_in: Option<u64>,
        /// Output edge list.
        #[arg(long)]
        edges: PathBuf,
        /// Output node table.
        #[arg(long)]
        nodes: PathBuf,
        /// Optional CSV mapping bank numbers to identifiers.
        #[arg(long)]
        ids: Option<PathBuf>,
    },
    /// Maximal and minimal clearing of a symmetric system over external assets.
    Symmetric {
        #[command(flatten)]
        params: SymmetricArgs,
        /// External-asset grid (default: 0 to 1.3 x₃, 101 points).
        #[arg(long)]
        x: Option<Grid>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Critical shocks of a strongly symmetric system over a (beta, beta0) grid.
    CriticalEps {
        #[command(flatten)]
        params: SymmetricArgs,
        /// External assets per bank before the shock.
        #[arg(long)]
        x: f64,
        /// Number of stressed banks.
        #[arg(long)]
        stressed: usize,
        #[arg(long, default_value = "0:1:11")]
        betas: Grid,
        #[arg(long, default_value = "0:1:11")]
        beta0s: Grid,
        #[command(flatten)]
        out: OutArg,
    },
    /// CoCo fraction × trigger sweep under full and interbank CoCo-ization
    /// (default shock 0.03).
    Study1 {
        #[command(flatten)]
        network: NetworkFiles,
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value = "0:1:101")]
        betas: Grid,
        #[arg(long, default_value = "0.01,0.03,0.05,0.1,0.2")]
        triggers: Grid,
        #[command(flatten)]
        out: OutArg,
    },
    /// Shock sweep under all four schemes.
    Study2 {
        #[command(flatten)]
        network: NetworkFiles,
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long, default_value = "0:0.1:51")]
        shocks: Grid,
        #[command(flatten)]
        out: OutArg,
    },
    /// Interbank-fraction sweep under all four schemes (default shock 0.05).
    Study3 {
        #[command(flatten)]
        network: NetworkFiles,
        #[command(flatten)]
        base: BaseArgs,
        #[arg(long, default_value_t = 1.0)]
        fraction: f64,
        #[arg(long, default_value = "0:1:51")]
        gammas: Grid,
        #[command(flatten)]
        out: OutArg,
    },
    /// Two-bank counterexample: clearing assets and defaults against the CoCo fraction.
    Counterexample {
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[command(flatten)]
        out: OutArg,
    },
}

/// Outcome of a command that ran to completion.
pub enum Status {
    Ok,
    /// Output was written but some cells failed.
    Partial(usize),
}

/// Input problems detected by the CLI itself.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::NoConvergence { .. } | Error::RootBracketFailure { .. } | Error::DivisionByZero,
        ) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(Usage("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    let g = &cli.global;
    match cli.command {
        Command::ValueCurve {
            vanilla_face,
            coco_face,
            trigger,
            conversion,
            recovery,
            assets,
            out,
        } => commands::value_curve(
            vanilla_face,
            coco_face,
            trigger,
            conversion,
            recovery,
            assets,
            &out,
        ),
        Command::Clear {
            network,
            scenario,
            minimal,
            out_dir,
        } => commands::clear_one(g, &network, &scenario, minimal, out_dir.as_deref()),
        Command::Calibrate {
            eba,
            method,
            burn_in,
            edges,
            nodes,
            ids,
        } => commands::calibrate(g, &eba, method, burn_in, &edges, &nodes, ids.as_deref()),
        Command::Symmetric { params, x, out } => commands::symmetric(&params, x, &out),
        Command::CriticalEps {
            params,
            x,
            stressed,
            betas,
            beta0s,
            out,
        } => commands::critical_eps(g, &params, x, stressed, &betas, &beta0s, &out),
        Command::Study1 {
            network,
            base,
            betas,
            triggers,
            out,
        } => commands::study1(g, &network, &base, &betas, &triggers, &out),
        Command::Study2 {
            network,
            base,
            fraction,
            shocks,
            out,
        } => commands::study2(g, &network, &base, fraction, &shocks, &out),
        Command::Study3 {
            network,
            base,
            fraction,
            gammas,
            out,
        } => commands::study3(g, &network, &base, fraction, &gammas, &out),
        Command::Counterexample { points, out } => commands::counterexample(g, points, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Partial(errors)) => {
            eprintln!("coco-clear: {errors} cells failed; see the error column");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("coco-clear: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
