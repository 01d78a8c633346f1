//! `spillover`: run conditional randomization tests of exposure mappings on
//! network data, simulate their size and power, and generate test networks.

mod config;
mod data;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spillover_rt::engine::{run_test, Instance, TestSpec, CSV_HEADER};
use spillover_rt::graph::erdos_renyi;
use spillover_rt::rng::stream;
use spillover_rt::sim::{rejection_frequency_experiment, SIM_CSV_HEADER};
use spillover_rt::stats::simes_p_value;
use spillover_rt::{Error, Mechanism};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Degenerate(String),
    Sampling(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Sampling(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Degenerate(m) => write!(f, "degenerate design: {m}"),
            CliError::Sampling(m) => write!(f, "sampling failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_degenerate_design() {
            CliError::Degenerate(e.to_string())
        } else if matches!(e, Error::LowAcceptance { .. }) {
            CliError::Sampling(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "spillover",
    version,
    about = "Conditional randomization tests of exposure mappings under network interference"
)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a null exposure against a finer one on observed data; prints one
    /// CSV row per statistic and a Simes row.
    #[command(after_help = config::DEFAULTS_HELP)]
    Test {
        #[arg(long)]
        config: PathBuf,
        /// CSV with header `from,to`, 1-based ids; `from` affects `to`.
        #[arg(long)]
        edges: PathBuf,
        /// CSV with columns id, Y, Z and optionally D, stratum.
        #[arg(long)]
        units: PathBuf,
        /// Output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rejection frequencies over a grid of spillover strengths on simulated
    /// networks.
    #[command(after_help = config::DEFAULTS_HELP)]
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write an Erdős–Rényi network as an undirected edge list.
    GenNetwork {
        #[arg(long)]
        n: usize,
        /// Edge probability.
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn write_lines(path: Option<&Path>, lines: &[String]) -> Result<(), CliError> {
    let mut w = output(path)?;
    for line in lines {
        writeln!(w, "{line}").map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn mechanism(cfg: &RunConfig, units: &data::UnitTable) -> Result<Mechanism, CliError> {
    let n = units.len();
    let m = &cfg.mechanism;
    let mech = match m.kind.as_str() {
        "complete" => Mechanism::complete(n, m.treated.unwrap_or_else(|| units.z.treated()))?,
        "bernoulli" => Mechanism::bernoulli_uniform(n, m.p.unwrap_or(0.5))?,
        "stratified" => {
            let labels = units
                .strata
                .as_ref()
                .ok_or_else(|| CliError::Validation("stratified mechanism needs a `stratum` column".into()))?;
            let mut treated: BTreeMap<i64, usize> = BTreeMap::new();
            match &m.strata {
                Some(given) => {
                    for (label, &count) in given {
                        let key = label
                            .parse()
                            .map_err(|_| CliError::Validation(format!("stratum label `{label}` is not an integer")))?;
                        treated.insert(key, count);
                    }
                }
                None => {
                    for (i, &s) in labels.iter().enumerate() {
                        *treated.entry(s).or_default() += usize::from(units.z.get(i));
                    }
                }
            }
            Mechanism::stratified(labels, &treated)?
        }
        other => {
            return Err(CliError::Validation(format!(
                "unknown mechanism `{other}`; expected complete, bernoulli or stratified"
            )))
        }
    };
    if !mech.in_support(&units.z)? {
        return Err(CliError::Validation("observed Z impossible under declared mechanism".into()));
    }
    Ok(mech)
}

fn cmd_test(config: &Path, edges: &Path, units: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let table = data::read_units(open(units)?)?;
    let net = data::read_edges(open(edges)?, table.len(), cfg.network.undirected)?;
    let mech = mechanism(&cfg, &table)?;
    let pair = cfg.pair()?;
    let design = cfg.focal_settings()?.build(&pair, &table.z, &net, &mech, &mut stream(cfg.seed, 0))?;
    let mut spec = TestSpec::new(cfg.statistics()?, cfg.draws as usize, cfg.seed)?;
    spec.p_value_rule = cfg.p_value_rule()?;
    spec.max_attempts = cfg.max_attempts;
    let inst = Instance { pair: &pair, design: &design, mech: &mech, net: &net, y: &table.y, z: &table.z };
    let result = run_test(&spec, &inst)?;
    let d = &result.diagnostics;
    let mut lines = vec![CSV_HEADER.to_string()];
    lines.extend(result.csv_rows());
    lines.push(format!(
        "simes,,{},{},{},{},{},{},{}",
        simes_p_value(&result.p_values())?,
        d.draws,
        d.focal_size,
        d.kappa,
        result.method,
        d.acceptance_rate,
        result.seed
    ));
    write_lines(out, &lines)
}

fn cmd_simulate(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let table = rejection_frequency_experiment(&cfg.experiment()?)?;
    let mut lines = vec![SIM_CSV_HEADER.to_string()];
    lines.extend(table.iter().map(|c| c.csv_row()));
    write_lines(out, &lines)
}

fn cmd_gen_network(n: usize, p: f64, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let net = erdos_renyi(n, p, &mut stream(seed, 0))?;
    let mut w = output(out)?;
    data::write_edges(&mut w, &net)?;
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Test { config, edges, units, out, seed } => cmd_test(&config, &edges, &units, out.as_deref(), seed),
        Command::Simulate { config, out, seed } => cmd_simulate(&config, out.as_deref(), seed),
        Command::GenNetwork { n, p, seed, out } => cmd_gen_network(n, p, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
