use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mnms::harness::{
    catalog, catalog_ids, catalog_scenario, run_scenario, scenario_from_config, sweep, verify, write_csv,
    write_report, QueryKind, Scenario,
};

#[derive(Parser)]
#[command(name = "mnms", version, about = "Classical vs migratory near-memory query traffic")]
struct Cli {
    /// Scenario file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed (or the first verify seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (run, sweep) or directory (report).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its CSV rows.
    Run {
        /// Catalog scenario id; ignored when --config is given.
        scenario: Option<String>,
    },
    /// Run several scenarios into one CSV file.
    Sweep {
        /// Catalog scenario ids; all of them when empty.
        scenarios: Vec<String>,
    },
    /// Compare simulator results with the brute-force oracle.
    Verify {
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long, value_enum, default_value_t = VerifyKind::All)]
        query: VerifyKind,
    },
    /// Summarize a sweep CSV as a table and plot-data files.
    Report { csv: PathBuf },
    /// List built-in scenarios.
    Catalog,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyKind {
    Select,
    Join,
    All,
}

fn with_seed(mut sc: Scenario, seed: Option<u64>) -> Scenario {
    if let Some(s) = seed {
        sc.seed = s;
    }
    sc
}

fn load(cli: &Cli, id: Option<&str>) -> Result<Scenario> {
    let sc = match (&cli.config, id) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            scenario_from_config(&text)?
        }
        (None, Some(id)) => catalog_scenario(id)?,
        (None, None) => bail!("give a scenario id or --config (known: {})", catalog_ids().join(", ")),
    };
    Ok(with_seed(sc, cli.seed))
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Catalog => {
            for e in catalog() {
                println!("{:<14} {}", e.id, e.description);
            }
        }
        Command::Run { scenario } => {
            let sc = load(&cli, scenario.as_deref())?;
            let rows = run_scenario(&sc)?;
            match &cli.out {
                Some(p) => {
                    let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
                    write_csv(&rows, std::io::BufWriter::new(f))?;
                }
                None => write_csv(&rows, std::io::stdout().lock())?,
            }
        }
        Command::Sweep { scenarios } => {
            let mut list = Vec::new();
            if cli.config.is_some() {
                list.push(load(&cli, None)?);
            }
            let ids: Vec<String> = if scenarios.is_empty() && list.is_empty() {
                catalog_ids().into_iter().map(String::from).collect()
            } else {
                scenarios.clone()
            };
            for id in ids {
                list.push(with_seed(catalog_scenario(&id)?, cli.seed));
            }
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
            let rows = sweep(&list, &out)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Verify { n, seeds, query } => {
            let first = cli.seed.unwrap_or(1);
            let seeds: Vec<u64> = (first..first + seeds).collect();
            let kind = match query {
                VerifyKind::Select => Some(QueryKind::Select),
                VerifyKind::Join => Some(QueryKind::Join),
                VerifyKind::All => None,
            };
            let rep = verify(*n, &seeds, kind)?;
            println!("{rep}");
            return Ok(rep.all_passed());
        }
        Command::Report { csv } => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("plots"));
            let rep = write_report(csv, &dir)?;
            let mut out = std::io::stdout().lock();
            write!(out, "{}", rep.table)?;
            if !rep.plots.is_empty() {
                eprintln!("wrote {} plot-data files to {}", rep.plots.len(), dir.display());
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
