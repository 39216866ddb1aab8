use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::Table;

use gsav::diagnostics::fit_log_decay;
use gsav::harness::config::{bcp_preset, mbe_preset};
use gsav::harness::convergence::format_table;
use gsav::harness::{compare_g_variants, measure_convergence, simulate, Reference, RunConfig, RunSummary};
use gsav::Error;

/// G-SAV gradient-flow simulations on periodic grids.
///
/// Outputs go under $GSAV_OUT (default: the current directory).
#[derive(Parser)]
#[command(name = "gsav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set grid.n=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run(Common),
    /// Measure errors and observed orders over a ladder of step sizes.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Decreasing step sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        dts: Vec<f64>,
        /// `exact` (manufactured solution) or `fine:DT`.
        #[arg(long, default_value = "exact")]
        reference: String,
    },
    /// Run the same configuration under several G functions and compare.
    CompareG {
        #[command(flatten)]
        common: Common,
        /// G specification, repeatable (`tanh:10000`, `pow:3`, `sqrt:10`, ...).
        #[arg(long = "g", required = true)]
        gs: Vec<String>,
    },
    /// Block-copolymer annealing run (preset, overridable).
    Bcp(Common),
    /// Thin-film coarsening run with a log fit of the energy (preset, overridable).
    Mbe(Common),
}

fn load(common: &Common, base: Table) -> Result<RunConfig, Error> {
    RunConfig::load(common.config.as_deref(), base, &common.overrides)
}

fn require_config(common: &Common) -> Result<(), Error> {
    if common.config.is_none() {
        return Err(Error::Config("this subcommand needs a configuration file".into()));
    }
    Ok(())
}

fn report(summary: &RunSummary) {
    let s = &summary.final_state;
    println!(
        "finished: t = {:.6}, {} steps ({} rejected)",
        s.t(),
        summary.accepted_steps,
        summary.rejected_steps
    );
    if let Some(last) = summary.records.last() {
        println!("E_original = {:e}, E_modified = {:e}", last.e_original, last.e_modified);
    }
    if let Some(dir) = &summary.output_dir {
        println!("output: {}", dir.display());
    }
}

fn parse_reference(s: &str) -> Result<Reference, Error> {
    match s.split_once(':') {
        None if s == "exact" => Ok(Reference::Exact),
        Some(("fine", dt)) => dt
            .parse()
            .map(Reference::Fine)
            .map_err(|_| Error::Config(format!("bad reference step in {s:?}"))),
        _ => Err(Error::Config(format!("unknown reference {s:?}"))),
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(c) => {
            require_config(&c)?;
            report(&simulate(&load(&c, Table::new())?)?);
        }
        Command::Converge { common, dts, reference } => {
            require_config(&common)?;
            let cfg = load(&common, Table::new())?;
            let rows = measure_convergence(&cfg, &dts, parse_reference(&reference)?)?;
            print!("{}", format_table(&rows));
        }
        Command::CompareG { common, gs } => {
            require_config(&common)?;
            let cfg = load(&common, Table::new())?;
            let r = compare_g_variants(&cfg, &gs)?;
            for (i, j, d) in &r.pairwise {
                println!("{} vs {}: relative L2 difference {d:e}", r.labels[*i], r.labels[*j]);
            }
            println!("original energy spread: {:e}", r.energy_spread);
            for (l, ok) in r.labels.iter().zip(&r.monotone) {
                println!("{l}: modified energy {}", if *ok { "monotone" } else { "NOT monotone" });
            }
        }
        Command::Bcp(c) => report(&simulate(&load(&c, bcp_preset())?)?),
        Command::Mbe(c) => {
            let summary = simulate(&load(&c, mbe_preset())?)?;
            report(&summary);
            let t: Vec<f64> = summary.records.iter().map(|r| r.t).collect();
            let e: Vec<f64> = summary.records.iter().map(|r| r.e_original).collect();
            match fit_log_decay(&t, &e, (1.0, 100.0)) {
                Ok((a, b)) => println!("energy fit on [1, 100]: E = {a:.3} log t + {b:.3}"),
                Err(err) => println!("no energy fit: {err}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
