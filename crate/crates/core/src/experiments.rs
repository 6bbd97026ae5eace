//! Seeded experiment sweeps, baselines and CSV output.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ao::{run_ao, AoOptions, AoOutcome, FaMethod};
use crate::error::{Error, Result};
use crate::scenario::{Scenario, SystemConfig, TxArray};
use crate::semantics::MetricsReport;
use crate::sensing::{crb_extended, monte_carlo_mse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    Convergence,
    PerAntennaGain,
    MseVsCrb,
    SsrVsCrb,
    ComputeTradeoff,
    AntennaScaling,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::Convergence,
        ExperimentId::PerAntennaGain,
        ExperimentId::MseVsCrb,
        ExperimentId::SsrVsCrb,
        ExperimentId::ComputeTradeoff,
        ExperimentId::AntennaScaling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Convergence => "convergence",
            ExperimentId::PerAntennaGain => "per-antenna-gain",
            ExperimentId::MseVsCrb => "mse-vs-crb",
            ExperimentId::SsrVsCrb => "ssr-vs-crb",
            ExperimentId::ComputeTradeoff => "compute-tradeoff",
            ExperimentId::AntennaScaling => "antenna-scaling",
        }
    }

    /// Name of the swept variable.
    pub fn sweep(self) -> &'static str {
        match self {
            ExperimentId::Convergence | ExperimentId::PerAntennaGain => "movable_range_m",
            ExperimentId::MseVsCrb | ExperimentId::SsrVsCrb => "xi",
            ExperimentId::ComputeTradeoff => "data_size_mbit",
            ExperimentId::AntennaScaling => "n_t",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            ExperimentId::Convergence => vec![0.02, 0.05, 0.1],
            ExperimentId::PerAntennaGain => vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            ExperimentId::MseVsCrb => vec![0.3, 0.5, 0.8, 1.0],
            ExperimentId::SsrVsCrb => vec![0.1, 0.2, 0.3, 0.5, 0.8, 1.0],
            ExperimentId::ComputeTradeoff => vec![0.1, 0.2, 0.3, 0.4, 0.5],
            ExperimentId::AntennaScaling => vec![7.0, 8.0, 9.0],
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    /// `false` runs the no-semantic ablation.
    pub semantic: bool,
    /// Monte-Carlo trials for the MSE experiment.
    pub trials: usize,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId, seeds: Vec<u64>) -> ExperimentSpec {
        ExperimentSpec { id, grid: id.default_grid(), seeds, out: None, semantic: true, trials: 500 }
    }

    pub fn sweep(&self) -> &'static str {
        self.id.sweep()
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Domain(format!("{}: empty grid", self.id)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Domain(format!("{}: no seeds", self.id)));
        }
        if let Some(v) = self.grid.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("{}: grid value {v} is not finite", self.id)));
        }
        Ok(())
    }
}

/// One CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub sweep_value: f64,
    pub metric: String,
    pub value: f64,
    /// Wall time of the run that produced the row, s.
    pub wall_time: f64,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub const CSV_HEADER: [&str; 7] = ["experiment", "seed", "sweep_value", "metric", "value", "wall_time_s", "status"];

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Write rows with a header line.
pub fn emit_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    write_rows(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

pub fn write_rows<W: std::io::Write>(w: &mut csv::Writer<W>, rows: &[ResultRow]) -> Result<()> {
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.seed.to_string(),
            fmt_f64(r.sweep_value),
            r.metric.clone(),
            fmt_f64(r.value),
            fmt_f64(r.wall_time),
            r.status.clone(),
        ])?;
    }
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Domain(format!("unexpected CSV header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Domain(format!("bad number `{s}`: {e}")));
    rd.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ResultRow {
                experiment: rec[0].to_string(),
                seed: rec[1].parse().map_err(|e| Error::Domain(format!("bad seed `{}`: {e}", &rec[1])))?,
                sweep_value: num(&rec[2])?,
                metric: rec[3].to_string(),
                value: num(&rec[4])?,
                wall_time: num(&rec[5])?,
                status: rec[6].to_string(),
            })
        })
        .collect()
}

/// Uniform positions inside every box; the reference element stays put.
pub fn random_positions(tx: &TxArray, seed: u64) -> TxArray {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut out = tx.clone();
    for i in tx.movable() {
        let b = &tx.boxes[i];
        let x = if b.width() > 0.0 { rng.random_range(b.x_min..=b.x_max) } else { b.x_min };
        let z = if b.height() > 0.0 { rng.random_range(b.z_min..=b.z_max) } else { b.z_min };
        out.positions[i] = [x, z];
    }
    out
}

/// AO with antennas frozen at the nominal grid.
pub fn baseline_fpa(scenario: &Scenario, opts: &AoOptions) -> Result<AoOutcome> {
    let s = scenario.with_tx(scenario.tx.nominal());
    run_ao(&s, &opts.clone().with_method(FaMethod::Fixed))
}

/// AO with antennas frozen at uniform random positions in their boxes.
pub fn baseline_random_fa(scenario: &Scenario, opts: &AoOptions, seed: u64) -> Result<AoOutcome> {
    let s = scenario.with_tx(random_positions(&scenario.tx.nominal(), seed));
    run_ao(&s, &opts.clone().with_method(FaMethod::Fixed))
}

/// AO with the given position method, started from the random-FA positions
/// of `seed`.
pub fn optimized_fa(scenario: &Scenario, opts: &AoOptions, method: FaMethod, seed: u64) -> Result<AoOutcome> {
    let s = scenario.with_tx(random_positions(&scenario.tx.nominal(), seed));
    run_ao(&s, &opts.clone().with_method(method))
}

/// `100·(S_FA − S_FPA)/(S_FPA·n_t)`, percent per antenna.
pub fn per_antenna_gain(s_fa: f64, s_fpa: f64, n_t: usize) -> f64 {
    if s_fa == s_fpa {
        return 0.0;
    }
    100.0 * (s_fa - s_fpa) / (s_fpa * n_t as f64)
}

/// Worst-case information efficiency of a finished run.
pub fn worst_efficiency(config: &SystemConfig, out: &AoOutcome) -> Result<f64> {
    let bf = &out.beamforming;
    let mut cfg = config.clone();
    cfg.iota = out.iota;
    let m = MetricsReport::evaluate(&cfg, &out.channels, &bf.w, &bf.r, &out.ratio.rho, &bf.cpu)?;
    Ok(m.efficiency.iter().map(|e| e.unwrap_or(f64::NAN)).fold(f64::INFINITY, f64::min))
}

/// Mean of the per-iteration position-update times over all epochs, s.
pub fn fa_time_per_iteration(out: &AoOutcome) -> f64 {
    let (t, n) = out
        .trace
        .epochs
        .iter()
        .fold((0.0, 0usize), |(t, n), e| (t + e.fa_time.as_secs_f64(), n + e.fa_iterations));
    if n == 0 {
        f64::NAN
    } else {
        t / n as f64
    }
}

fn ao_options(config: &SystemConfig, semantic: bool) -> AoOptions {
    let mut o = AoOptions::from_config(config);
    o.semantic = semantic;
    o
}

/// Config with movable range `r` on a fixed grid pitch.
fn with_range(config: &SystemConfig, r: f64, pitch: f64) -> SystemConfig {
    let mut c = config.clone();
    c.movable_area = r * r;
    c.tx_pitch = Some(pitch.max(r));
    c
}

/// Most-square `n_tx × n_tz` layout with `n_tx·n_tz = n`.
fn layout(n: usize) -> (usize, usize) {
    let mut nz = (n as f64).sqrt().floor() as usize;
    while nz > 1 && n % nz != 0 {
        nz -= 1;
    }
    (n / nz.max(1), nz.max(1))
}

/// `(metric, value, failure)`.
type Metrics = Vec<(String, f64, Option<String>)>;

fn run_point(spec: &ExperimentSpec, config: &SystemConfig, seed: u64, x: f64) -> Result<Metrics> {
    let opts = ao_options(config, spec.semantic);
    let mut m: Metrics = Vec::new();
    match spec.id {
        ExperimentId::Convergence => {
            let cfg = with_range(config, x, config.movable_range().max(x));
            cfg.validate()?;
            let out = run_ao(&Scenario::new(cfg, seed), &opts)?;
            for (e, v) in out.trace.values().iter().enumerate() {
                m.push((format!("min_secrecy_epoch_{e}"), *v, None));
            }
        }
        ExperimentId::PerAntennaGain => {
            let pitch = spec.grid.iter().copied().fold(config.movable_range(), f64::max);
            let cfg = with_range(config, x, pitch);
            cfg.validate()?;
            let n_t = cfg.n_t();
            let sc = Scenario::new(cfg.clone(), seed);
            let fpa = baseline_fpa(&sc, &opts)?;
            let random = baseline_random_fa(&sc, &opts, seed)?;
            let bfgs = optimized_fa(&sc, &opts, FaMethod::ProjectedBfgs, seed)?;
            let bench = optimized_fa(&sc, &opts, FaMethod::Benchmark, seed)?;
            let s_fpa = fpa.min_secrecy();
            for (name, out) in [("fpa", &fpa), ("random", &random), ("bfgs", &bfgs), ("benchmark", &bench)] {
                m.push((format!("ssr_{name}"), out.min_secrecy(), None));
                m.push((format!("efficiency_{name}"), worst_efficiency(&cfg, out)?, None));
                if name != "fpa" {
                    m.push((format!("gain_{name}"), per_antenna_gain(out.min_secrecy(), s_fpa, n_t), None));
                }
            }
            m.push(("time_per_iter_bfgs".into(), fa_time_per_iteration(&bfgs), None));
            m.push(("time_per_iter_benchmark".into(), fa_time_per_iteration(&bench), None));
        }
        ExperimentId::MseVsCrb => {
            let mut cfg = config.clone();
            cfg.xi = x;
            cfg.validate()?;
            let sc = Scenario::new(cfg.clone(), seed);
            let out = run_ao(&sc, &opts)?;
            let rx = out.beamforming.rx_cov();
            let crb = crb_extended(&rx, cfg.sigma_r2, cfg.frames, cfg.n_rx, cfg.n_rz)?;
            let g = &out.channels.echo;
            let mse = monte_carlo_mse(g, &rx, cfg.sigma_r2, cfg.frames, spec.trials, seed)?;
            m.push(("crb".into(), crb, None));
            m.push(("mse".into(), mse, None));
            m.push(("mse_over_crb".into(), mse / crb, None));
        }
        ExperimentId::SsrVsCrb => {
            let mut cfg = config.clone();
            cfg.xi = x;
            cfg.validate()?;
            let out = run_ao(&Scenario::new(cfg, seed), &opts)?;
            m.push(("ssr".into(), out.min_secrecy(), None));
        }
        ExperimentId::ComputeTradeoff => {
            for (t_max, q) in [(config.t_max, config.cycles_per_bit), (5.0 * config.t_max, config.cycles_per_bit), (5.0 * config.t_max, 150.0)] {
                let mut cfg = config.clone();
                cfg.data_bits = x * 1e6;
                cfg.t_max = t_max;
                cfg.cycles_per_bit = q;
                let name = format!("ssr_T{t_max}_Q{q}");
                match cfg.validate().and_then(|_| run_ao(&Scenario::new(cfg, seed), &opts)) {
                    Ok(o) => m.push((name, o.min_secrecy(), None)),
                    Err(e) => m.push((name, f64::NAN, Some(e.to_string()))),
                }
            }
        }
        ExperimentId::AntennaScaling => {
            let n = x.round() as usize;
            let (n_tx, n_tz) = layout(n);
            let mut fa = config.clone();
            fa.n_tx = n_tx;
            fa.n_tz = n_tz;
            fa.validate()?;
            let sc = Scenario::new(fa.clone(), seed);
            m.push(("ssr_fa_bfgs".into(), optimized_fa(&sc, &opts, FaMethod::ProjectedBfgs, seed)?.min_secrecy(), None));
            let (tx, _) = crate::scenario::build_arrays(&fa);
            let side = |tx: &TxArray| {
                let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                for b in &tx.boxes {
                    lo = [lo[0].min(b.x_min), lo[1].min(b.z_min)];
                    hi = [hi[0].max(b.x_max), hi[1].max(b.z_max)];
                }
                ((hi[0] - lo[0]) * (hi[1] - lo[1])).sqrt()
            };
            let sparse_pitch = side(&tx) / 8.0;
            for (name, pitch) in [("ssr_dense_fpa", fa.wavelength / 2.0), ("ssr_sparse_fpa", sparse_pitch)] {
                let mut cfg = fa.clone();
                cfg.movable_area = 0.0;
                cfg.tx_pitch = Some(pitch);
                cfg.validate()?;
                // same users and targets as the fluid-antenna run
                let (tx, rx) = crate::scenario::build_arrays(&cfg);
                let s = Scenario { config: cfg, tx, rx, placement: sc.placement.clone(), seed };
                m.push((name.into(), run_ao(&s, &opts.clone().with_method(FaMethod::Fixed))?.min_secrecy(), None));
            }
        }
    }
    Ok(m)
}

/// Run every `(seed, grid point)` of the spec. Failed runs become rows
/// with a `failed` status; the sweep continues.
pub fn run_experiment(spec: &ExperimentSpec, config: &SystemConfig) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let jobs: Vec<(u64, f64)> = spec.seeds.iter().flat_map(|s| spec.grid.iter().map(move |x| (*s, *x))).collect();
    let rows: Vec<Vec<ResultRow>> = jobs
        .par_iter()
        .map(|&(seed, x)| {
            let clock = Instant::now();
            let res = run_point(spec, config, seed, x);
            let wall_time = clock.elapsed().as_secs_f64();
            let row = |metric: String, value: f64, status: String| ResultRow {
                experiment: spec.id.as_str().to_string(),
                seed,
                sweep_value: x,
                metric,
                value,
                wall_time,
                status,
            };
            match res {
                Ok(metrics) => metrics
                    .into_iter()
                    .map(|(k, v, fail)| row(k, v, fail.map_or("ok".into(), |e| format!("failed: {e}"))))
                    .collect(),
                Err(e) => vec![row("error".into(), f64::NAN, format!("failed: {e}"))],
            }
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}
