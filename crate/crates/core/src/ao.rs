//! Alternating optimisation: beamforming by SCA, then antenna positions, then
//! semantic extraction ratios, until the worst-case secrecy rate settles.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::beamforming::{
    exact_margin, exact_objective, gaussian_randomize, interior_point, sca_iterate, BeamformingSolution, Problem,
    Randomized, ScaEpoch,
};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::trace_re;
use crate::positioning::{benchmark_step, optimize_positions, FaProblem, PositionState, SmoothObjective};
use crate::ratio::{allocate, bisection_solve, Binding, RatioSolution};
use crate::scenario::{Scenario, SystemConfig, TxArray};
use crate::semantics::{compute_power, process_power};
use crate::sensing::crb_extended;

/// How the antenna positions are updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaMethod {
    /// Positions stay where the scenario puts them.
    Fixed,
    ProjectedBfgs,
    /// One second-order Taylor step per epoch.
    Benchmark,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoOptions {
    pub method: FaMethod,
    /// `false`: `ρ ≡ 1`, `ι = 1`, no ratio step.
    pub semantic: bool,
    pub max_epochs: usize,
    /// Stopping threshold `ς`.
    pub varsigma: f64,
    /// SCA epochs per AO epoch.
    pub sca_epochs: usize,
    /// Randomisation draws for the final rank-one recovery; 0 skips it.
    pub samples: usize,
}

impl AoOptions {
    pub fn from_config(config: &SystemConfig) -> AoOptions {
        AoOptions {
            method: FaMethod::ProjectedBfgs,
            semantic: config.semantic_enabled,
            max_epochs: config.tol.ao_max_epochs,
            varsigma: config.tol.ao_tol,
            sca_epochs: config.tol.ao_sca_epochs,
            samples: config.tol.randomization_samples,
        }
    }

    pub fn with_method(mut self, method: FaMethod) -> AoOptions {
        self.method = method;
        self
    }
}

/// Slack of each constraint family at the end of an epoch (non-negative when met).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `P_t − P_comp − Tr(R_x) − Σ P_process`, mW.
    pub power: f64,
    /// `ξ − CRB`; `+∞` without a bound.
    pub crb: f64,
    /// `min_l (f_l − f_min)`, Hz.
    pub latency: f64,
    /// `F_max − Σ f_l`, Hz.
    pub cpu_budget: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoEpoch {
    /// `min_k S_k` after the epoch.
    pub min_secrecy: f64,
    /// `ζ` of the last SCA sub-problem.
    pub zeta: f64,
    pub rho: Vec<f64>,
    pub u: DVector<f64>,
    pub sca: Vec<ScaEpoch>,
    pub sca_time: Duration,
    pub fa_time: Duration,
    pub ratio_time: Duration,
    /// Position iterations (BFGS steps or benchmark steps) run this epoch.
    pub fa_iterations: usize,
    pub fa_accepted: bool,
    pub fa_stalled: bool,
    pub residuals: Residuals,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AoTrace {
    /// `min_k S_k` at the starting state.
    pub initial: f64,
    pub epochs: Vec<AoEpoch>,
}

impl AoTrace {
    /// Initial value followed by one value per epoch.
    pub fn values(&self) -> Vec<f64> {
        std::iter::once(self.initial).chain(self.epochs.iter().map(|e| e.min_secrecy)).collect()
    }

    /// Largest drop between consecutive values (0 for a monotone trace).
    pub fn worst_decrease(&self) -> f64 {
        self.values().windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

/// `|Δ min_k S_k| ≤ ς` over the last two values of the trace.
pub fn convergence_check(trace: &AoTrace, varsigma: f64) -> bool {
    let v = trace.values();
    match v.as_slice() {
        [.., a, b] => (b - a).abs() <= varsigma,
        _ => false,
    }
}

#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub beamforming: BeamformingSolution,
    pub positions: PositionState,
    pub ratio: RatioSolution,
    pub trace: AoTrace,
    pub tx: TxArray,
    pub channels: ChannelSet,
    pub iota: f64,
    /// Rank-one recovery of the final beamformers.
    pub randomized: Option<Randomized>,
    pub converged: bool,
}

impl AoOutcome {
    pub fn min_secrecy(&self) -> f64 {
        self.trace.epochs.last().map_or(self.trace.initial, |e| e.min_secrecy)
    }
}

/// Ratio at the start: the allocation for half of the power left after
/// processing at the latency floor.
pub fn initial_ratio(config: &SystemConfig, semantic: bool) -> Result<RatioSolution> {
    if !semantic {
        return Ok(RatioSolution { rho: vec![1.0; config.users], binding: Binding::Unity, residual: 0.0 });
    }
    let floor = config.targets as f64 * process_power(config.min_cpu_frequency(), config.cycles_per_bit, config.kappa);
    let budget = 0.5 * (config.p_t - floor);
    bisection_solve(budget.max(0.0), config.nu, config.users, config.rho_lb(), config.tol.bisection_tol)
}

pub fn residuals(config: &SystemConfig, bf: &BeamformingSolution, rho: &[f64]) -> Result<Residuals> {
    let rx = bf.rx_cov();
    let process: f64 = bf.cpu.iter().map(|f| process_power(*f, config.cycles_per_bit, config.kappa)).sum();
    let crb = if config.xi.is_finite() {
        config.xi - crb_extended(&rx, config.sigma_r2, config.frames, config.n_rx, config.n_rz)?
    } else {
        f64::INFINITY
    };
    let f_min = config.min_cpu_frequency();
    Ok(Residuals {
        power: config.p_t - compute_power(rho, config.nu)? - trace_re(&rx) - process,
        crb,
        latency: bf.cpu.iter().map(|f| f - f_min).fold(f64::INFINITY, f64::min),
        cpu_budget: config.f_max - bf.cpu.iter().sum::<f64>(),
    })
}

fn aborted(epoch: usize, source: Error, trace: &AoTrace) -> Error {
    Error::Aborted { epoch, source: Box::new(source), trace: trace.values() }
}

/// Run the alternating optimisation from the scenario's antenna positions.
pub fn run_ao(scenario: &Scenario, opts: &AoOptions) -> Result<AoOutcome> {
    let cfg = &scenario.config;
    let iota = if opts.semantic { cfg.iota } else { 1.0 };
    let mut tx = scenario.tx.clone();
    let mut channels = ChannelSet::synthesize(&scenario.placement, &tx, &scenario.rx)?;
    let mut ratio = initial_ratio(cfg, opts.semantic)?;
    let mut bf = {
        let pb = Problem { config: cfg, channels: &channels, rho: &ratio.rho, iota };
        interior_point(&pb)?
    };
    let mut trace = AoTrace::default();
    trace.initial = exact_objective(&Problem { config: cfg, channels: &channels, rho: &ratio.rho, iota }, &bf.w, &bf.r);
    let mut h_inv: Option<DMatrix<f64>> = None;
    let mut converged = false;

    for epoch in 0..opts.max_epochs.max(1) {
        // beamforming
        let clock = Instant::now();
        let pb = Problem { config: cfg, channels: &channels, rho: &ratio.rho, iota };
        let (next, sca) = sca_iterate(&pb, &bf, opts.sca_epochs, cfg.tol.sca_tol).map_err(|e| aborted(epoch, e, &trace))?;
        bf = next;
        let sca_time = clock.elapsed();

        // positions
        let clock = Instant::now();
        let before = exact_margin(&pb, &bf.w, &bf.r);
        let fp = FaProblem::new(
            &scenario.placement,
            &tx,
            &bf.w,
            &bf.r,
            &ratio.rho,
            iota,
            cfg.sigma_c2,
            cfg.tol.softmin_beta,
        );
        let u0 = tx.to_vec();
        let (candidate, fa_iterations, fa_stalled, h) = match opts.method {
            FaMethod::Fixed => (None, 0, false, None),
            FaMethod::ProjectedBfgs => {
                let rep = optimize_positions(&fp, &u0, &cfg.tol).map_err(|e| aborted(epoch, e, &trace))?;
                (Some(rep.state.u.clone()), rep.iterations, rep.stalled, Some(rep.state.h_inv))
            }
            FaMethod::Benchmark => {
                let u = benchmark_step(&u0, &fp, cfg.tol.grad_fd_step).map_err(|e| aborted(epoch, e, &trace))?;
                (Some(u), 1, false, None)
            }
        };
        let mut fa_accepted = false;
        if let Some(u) = candidate {
            let moved = tx.with_positions(u.as_slice());
            let ch = ChannelSet::synthesize(&scenario.placement, &moved, &scenario.rx)?;
            let after = exact_margin(&Problem { config: cfg, channels: &ch, rho: &ratio.rho, iota }, &bf.w, &bf.r);
            if after >= before && u != u0 {
                tx = moved;
                channels = ch;
                fa_accepted = true;
                if h.is_some() {
                    h_inv = h;
                }
            }
        }
        let fa_time = clock.elapsed();

        // ratios
        let clock = Instant::now();
        if opts.semantic {
            let next = allocate(cfg, &bf.rx_cov(), &bf.cpu).map_err(|e| aborted(epoch, e, &trace))?;
            // the current ratio is feasible, so the minimal one is never larger
            let rho = next.rho.iter().zip(&ratio.rho).map(|(a, b)| a.min(*b)).collect();
            ratio = RatioSolution { rho, ..next };
        }
        let ratio_time = clock.elapsed();

        let pb = Problem { config: cfg, channels: &channels, rho: &ratio.rho, iota };
        trace.epochs.push(AoEpoch {
            min_secrecy: exact_objective(&pb, &bf.w, &bf.r),
            zeta: bf.zeta,
            rho: ratio.rho.clone(),
            u: tx.to_vec(),
            sca,
            sca_time,
            fa_time,
            ratio_time,
            fa_iterations,
            fa_accepted,
            fa_stalled,
            residuals: residuals(cfg, &bf, &ratio.rho)?,
        });
        if convergence_check(&trace, opts.varsigma) {
            converged = true;
            break;
        }
    }

    let pb = Problem { config: cfg, channels: &channels, rho: &ratio.rho, iota };
    let randomized = if opts.samples > 0 {
        let r = gaussian_randomize(&pb, &bf, opts.samples, scenario.seed)?;
        if r.feasible {
            bf.w_vec = Some(r.w_vec.clone());
        }
        Some(r)
    } else {
        None
    };
    let fp = FaProblem::new(
        &scenario.placement,
        &tx,
        &bf.w,
        &bf.r,
        &ratio.rho,
        iota,
        cfg.sigma_c2,
        cfg.tol.softmin_beta,
    );
    let u = tx.to_vec();
    let (value, grad) = fp.value_grad(&u)?;
    let n = u.len();
    let positions = PositionState { u, h_inv: h_inv.unwrap_or_else(|| DMatrix::identity(n, n)), value, grad };
    Ok(AoOutcome { beamforming: bf, positions, ratio, trace, tx, channels, iota, randomized, converged })
}
