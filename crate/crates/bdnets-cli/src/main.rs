//! Command line harness: build the construction from a configuration file,
//! run verification suites, extract the net, and export tables.
//!
//! The configuration file is the sole positional argument of every
//! subcommand; `BDNETS_OUT` overrides the configured output directory.
//! Verification subcommands exit nonzero when any selected check fails.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use bdnets::assembly::Construction;
use bdnets::config::{parse_config, RunConfig};
use bdnets::export;
use bdnets::pipeline::{run_pipeline, run_suites};
use bdnets::verify::SuiteSelection;

#[derive(Parser)]
#[command(name = "bdnets", version, about = "Retractional bases for quantized nets, verified exactly")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the system and blocks, print the realized sizes.
    Build { config: PathBuf },
    /// Emit the global index table.
    Order { config: PathBuf },
    /// Run the selected verification suites and print the summary.
    Verify {
        config: PathBuf,
        /// Override the configured suite selection (repeatable).
        #[arg(long = "suite")]
        suites: Vec<String>,
    },
    /// Extract the net and print its certificate.
    Net { config: PathBuf },
    /// Run the free-space projection report.
    Report { config: PathBuf },
    /// Write every export table to the output directory.
    Export { config: PathBuf },
    /// Full pipeline: build, verify, net, report, export.
    Run { config: PathBuf },
}

fn load(config: &PathBuf) -> Result<RunConfig> {
    let text = std::fs::read_to_string(config)
        .with_context(|| format!("reading {}", config.display()))?;
    Ok(parse_config(&text)?)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    std::env::var_os("BDNETS_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir))
}

fn print_sizes(cons: &Construction) {
    println!("stages realized: {}", cons.params.n_cap);
    for n in 1..=cons.params.n_cap {
        let m = cons.blocks.m(n).map(|b| b.len()).unwrap_or(0);
        print!("#M_{n} = {m}");
        if cons.blocks.has_shell(n) {
            let c = cons.blocks.c(n).map(|b| b.len()).unwrap_or(0);
            let d = cons.blocks.d(n).map(|b| b.len()).unwrap_or(0);
            print!("  #C_{n} = {c}  #D_{n} = {d}");
        }
        println!();
    }
    println!("realized points: {}", cons.order.len());
}

fn main() -> ExitCode {
    match run() {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Build { config } => {
            let cfg = load(&config)?;
            let cons = Construction::build(&cfg.system, cfg.params.clone())?;
            print_sizes(&cons);
            Ok(true)
        }
        Command::Order { config } => {
            let cfg = load(&config)?;
            let cons = Construction::build(&cfg.system, cfg.params.clone())?;
            print!("{}", export::order_table(&cons));
            Ok(true)
        }
        Command::Verify { config, suites } => {
            let mut cfg = load(&config)?;
            if !suites.is_empty() {
                cfg.suites = SuiteSelection::parse(&suites)?;
            }
            let cons = Construction::build(&cfg.system, cfg.params.clone())?;
            let report = run_suites(&cons, &cfg)?;
            print!("{}", export::summary(&report));
            Ok(report.all_pass())
        }
        Command::Net { config } => {
            let mut cfg = load(&config)?;
            cfg.suites = SuiteSelection::parse(&["net".to_string()])?;
            let cons = Construction::build(&cfg.system, cfg.params.clone())?;
            let report = run_suites(&cons, &cfg)?;
            if let Some(net) = &report.net {
                print!("{}", export::net_certificate(&cons, net));
            }
            for check in &report.checks {
                println!("{}", export::summary_line(check));
            }
            Ok(report.all_pass())
        }
        Command::Report { config } => {
            let mut cfg = load(&config)?;
            cfg.suites = SuiteSelection::parse(&["free".to_string()])?;
            let cons = Construction::build(&cfg.system, cfg.params.clone())?;
            let report = run_suites(&cons, &cfg)?;
            if let Some(free) = &report.free {
                print!("{}", export::free_table(free));
            }
            for check in &report.checks {
                println!("{}", export::summary_line(check));
            }
            Ok(report.all_pass())
        }
        Command::Export { config } => {
            let mut cfg = load(&config)?;
            cfg.suites = SuiteSelection::none();
            let dir = out_dir(&cfg);
            let outcome = run_pipeline(&cfg, Some(dir))?;
            for name in &outcome.written {
                println!("wrote {}", outcome.out_dir.join(name).display());
            }
            Ok(true)
        }
        Command::Run { config } => {
            let cfg = load(&config)?;
            let dir = out_dir(&cfg);
            let outcome = run_pipeline(&cfg, Some(dir))?;
            print_sizes(&outcome.construction);
            print!("{}", export::summary(&outcome.report));
            for name in &outcome.written {
                println!("wrote {}", outcome.out_dir.join(name).display());
            }
            Ok(outcome.all_pass())
        }
    }
}
