//! Command-line front end: run single experiments, sweep loads, inspect
//! minimal paths and buffer mapping tables, and verify destination tables.
//!
//! Config values come from a key=value file; any known key can be
//! overridden through `FTSIM_<SECTION>_<KEY>` environment variables.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};

use ftsim::harness::{
    parse_config_with_env, series_csv, sweep_csv, sweep_many, ExperimentSpec,
};
use ftsim::queuing::mapping_table;
use ftsim::table::check_machine;
use ftsim::topology::{build_rlft, enumerate_shortest_paths, RlftParams};

#[derive(Parser)]
#[command(
    name = "ftsim",
    about = "Deterministic fat-tree interconnect simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and emit its per-bin metrics series as CSV.
    Run {
        /// Path to a key=value config file.
        config: PathBuf,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the configured loads and seeds of one or more configs and
    /// emit the aggregated throughput table as CSV.
    Sweep {
        /// Config files; each contributes its own sweep rows.
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print every minimal path between two end nodes, one per line.
    Paths {
        /// Switch port count P (arity is K = P/2).
        #[arg(long)]
        ports: u32,
        /// Switch stage count T.
        #[arg(long)]
        stages: u32,
        #[arg(long)]
        src: u32,
        #[arg(long)]
        dst: u32,
    },
    /// Print which destinations a config's routing and queuing can place
    /// in each buffer, as `stage,switch,port,vc: {destinations}` lines.
    Mapping {
        /// Path to a key=value config file.
        config: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify per-port reachable-destination tables against brute-force
    /// route enumeration (and closed forms where they exist).
    TableCheck {
        /// Switch port counts to verify.
        #[arg(long, value_delimiter = ',', default_values_t = vec![4u32, 6, 8])]
        ports: Vec<u32>,
        /// Stage counts to verify.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2u32, 3])]
        stages: Vec<u32>,
    },
}

fn load_spec(path: &Path) -> anyhow::Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let spec = parse_config_with_env(&text, |name| std::env::var(name).ok())
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(spec)
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config, out } => {
            let spec = load_spec(&config)?;
            let series = spec.run_once()?;
            eprintln!(
                "{}: load {:.3} -> delivered {:.4}, injected {:.4} of capacity",
                spec.config_id(),
                spec.pattern.load,
                series.delivered_frac(),
                series.injected_frac()
            );
            emit(&series_csv(&series), out.as_deref())?;
        }
        Command::Sweep { configs, out } => {
            let specs = configs
                .iter()
                .map(|p| load_spec(p))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let rows = sweep_many(&specs)?;
            emit(&sweep_csv(&rows), out.as_deref())?;
        }
        Command::Paths { ports, stages, src, dst } => {
            let rlft = build_rlft(RlftParams { ports, stages })?;
            for path in enumerate_shortest_paths(&rlft, src, dst)? {
                let hops: Vec<String> = path
                    .hops
                    .iter()
                    .map(|(pos, port)| format!("{pos}:{port}"))
                    .collect();
                println!("{}", hops.join(" "));
            }
        }
        Command::Mapping { config, out } => {
            let spec = load_spec(&config)?;
            let rlft = spec.build_topology()?;
            let table = mapping_table(spec.scheme, &rlft, &spec.routing_config());
            let mut text = String::new();
            for ((pos, port, vc), dsts) in &table {
                let items: Vec<String> = dsts.iter().map(|d| d.to_string()).collect();
                text.push_str(&format!(
                    "{},{},{},{}: {{{}}}\n",
                    pos.stage,
                    pos.index,
                    port,
                    vc,
                    items.join(" ")
                ));
            }
            emit(&text, out.as_deref())?;
        }
        Command::TableCheck { ports, stages } => {
            let mut all_ok = true;
            for &p in &ports {
                for &t in &stages {
                    let report = check_machine(RlftParams { ports: p, stages: t })?;
                    print!("{report}");
                    all_ok &= report.passed();
                }
            }
            if all_ok {
                println!("table-check: PASS");
            } else {
                println!("table-check: FAIL");
                std::process::exit(1);
            }
        }
    }
    Ok(())
}
