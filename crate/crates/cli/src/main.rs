//! `nfiscsc`: seeded experiment sweeps written as CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nfiscsc::experiments::write_rows;
use nfiscsc::{emit_csv, load_config, run_experiment, ExperimentId, ExperimentSpec, SystemConfig};

#[derive(Parser, Debug)]
#[command(name = "nfiscsc", version, about = "Seeded NF-ISCSC experiment sweeps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Objective trace per AO epoch against the movable range.
    Convergence(Common),
    /// Per-antenna gain of the FA methods over fixed antennas.
    PerAntennaGain(Common),
    /// Monte-Carlo MSE of the LS estimator against the CRB.
    MseVsCrb(Common),
    /// Worst-case semantic secrecy rate against the CRB bound.
    SsrVsCrb(Common),
    /// Latency and energy against the task data size.
    ComputeTradeoff(Common),
    /// Fluid antennas against dense and sparse fixed arrays.
    AntennaScaling(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config; defaults are used when absent.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Single seed (overrides the config's seed).
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed range, `N..M` (M excluded) or `N..=M`.
    #[arg(long, value_name = "N..M", value_parser = parse_seeds)]
    seeds: Option<SeedRange>,
    /// Output CSV; stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Comma-separated sweep values replacing the default grid.
    #[arg(long, value_name = "LIST", value_delimiter = ',', allow_hyphen_values = true)]
    grid: Option<Vec<f64>>,
    /// Fix every extraction ratio at 1 and drop the semantic gain.
    #[arg(long)]
    no_semantic: bool,
    /// Monte-Carlo trials (mse-vs-crb only).
    #[arg(long, default_value_t = 500)]
    trials: usize,
}

#[derive(Debug, Clone)]
struct SeedRange(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedRange, String> {
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        return Err(format!("expected N..M or N..=M, got `{s}`"));
    };
    let a: u64 = a.trim().parse().map_err(|e| format!("bad start `{a}`: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad end `{b}`: {e}"))?;
    let seeds: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
    if seeds.is_empty() {
        return Err(format!("seed range `{s}` is empty"));
    }
    Ok(SeedRange(seeds))
}

impl Cmd {
    fn split(self) -> (ExperimentId, Common) {
        match self {
            Cmd::Convergence(c) => (ExperimentId::Convergence, c),
            Cmd::PerAntennaGain(c) => (ExperimentId::PerAntennaGain, c),
            Cmd::MseVsCrb(c) => (ExperimentId::MseVsCrb, c),
            Cmd::SsrVsCrb(c) => (ExperimentId::SsrVsCrb, c),
            Cmd::ComputeTradeoff(c) => (ExperimentId::ComputeTradeoff, c),
            Cmd::AntennaScaling(c) => (ExperimentId::AntennaScaling, c),
        }
    }
}

fn run(id: ExperimentId, args: Common) -> nfiscsc::Result<usize> {
    let config = match &args.config {
        Some(p) => load_config(p)?,
        None => SystemConfig::default(),
    };
    let seeds = match (args.seeds, args.seed) {
        (Some(s), _) => s.0,
        (None, Some(s)) => vec![s],
        (None, None) => vec![config.rng_seed],
    };
    let mut spec = ExperimentSpec::new(id, seeds);
    if let Some(g) = args.grid {
        spec.grid = g;
    }
    spec.out = args.out.clone();
    spec.semantic = !args.no_semantic;
    spec.trials = args.trials;
    spec.validate()?;

    let rows = run_experiment(&spec, &config)?;
    match &spec.out {
        Some(p) => emit_csv(&rows, p)?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            write_rows(&mut w, &rows)?;
            w.flush()?;
        }
    }
    for r in rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("seed {} at {} = {}: {}", r.seed, spec.sweep(), r.sweep_value, r.status);
    }
    Ok(rows.iter().filter(|r| !r.is_ok()).count())
}

fn main() -> ExitCode {
    let (id, args) = Cli::parse().cmd.split();
    match run(id, args) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("nfiscsc {id}: {n} sub-run(s) failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("nfiscsc {id}: {e}");
            ExitCode::FAILURE
        }
    }
}
