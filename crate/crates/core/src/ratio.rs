//! Semantic extraction ratio allocation under the residual power budget.

use crate::error::{Error, Result};
use crate::linalg::{trace_re, CMat};
use crate::scenario::SystemConfig;
use crate::semantics::process_power;

/// Which constraint fixes the common ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    /// `−ν Σ ln ρ_k = C`.
    Budget,
    /// `ρ = ρ_LB`.
    LowerBound,
    /// `ρ = 1` (no budget for extraction).
    Unity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSolution {
    pub rho: Vec<f64>,
    pub binding: Binding,
    /// Budget `C` the ratios were allocated against, mW.
    pub residual: f64,
}

/// `P_t − Tr(R_x) − Σ κ f_l³ Q`, mW.
pub fn residual_budget(config: &SystemConfig, rx_cov: &CMat, cpu: &[f64]) -> f64 {
    let process: f64 = cpu.iter().map(|f| process_power(*f, config.cycles_per_bit, config.kappa)).sum();
    config.p_t - trace_re(rx_cov) - process
}

/// Minimise `Σ ρ_k` subject to `−ν Σ ln ρ_k ≤ C` and `ρ_LB ≤ ρ_k ≤ 1`.
///
/// The optimum is symmetric, so the search runs over the common ratio.
pub fn bisection_solve(residual: f64, nu: f64, users: usize, rho_lb: f64, tol: f64) -> Result<RatioSolution> {
    if !(residual >= 0.0) {
        return Err(Error::Domain(format!("residual budget must be non-negative, got {residual}")));
    }
    if !(nu > 0.0) || users == 0 || !(rho_lb > 0.0 && rho_lb <= 1.0) || !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "bisection needs nu > 0, K > 0, rho_LB in (0, 1], tol > 0 (nu={nu}, K={users}, rho_LB={rho_lb}, tol={tol})"
        )));
    }
    let k = users as f64;
    let power = |rho: f64| -nu * k * rho.ln();
    let done = |rho: f64, binding| RatioSolution { rho: vec![rho; users], binding, residual };
    if residual == 0.0 {
        return Ok(done(1.0, Binding::Unity));
    }
    if power(rho_lb) <= residual {
        return Ok(done(rho_lb, Binding::LowerBound));
    }
    // power is decreasing in rho: find the smallest feasible rho
    let (mut lo, mut hi) = (rho_lb, 1.0);
    while hi - lo > 0.25 * tol {
        let mid = 0.5 * (lo + hi);
        if power(mid) <= residual {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(done(hi, Binding::Budget))
}

/// Ratio allocation for a beamforming state.
pub fn allocate(config: &SystemConfig, rx_cov: &CMat, cpu: &[f64]) -> Result<RatioSolution> {
    let c = residual_budget(config, rx_cov, cpu);
    if c < 0.0 {
        return Err(Error::Domain(format!("negative residual budget {c} mW")));
    }
    bisection_solve(c, config.nu, config.users, config.rho_lb(), config.tol.bisection_tol)
}
