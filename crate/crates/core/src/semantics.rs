//! Communication, semantic and computing metrics.

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{quad_row, trace_re, CMat, CVec};
use crate::scenario::SystemConfig;

/// `h W hᴴ` summed over all beamformers except `skip`.
fn interference(h: &CVec, w: &[CMat], skip: usize) -> f64 {
    w.iter()
        .enumerate()
        .filter(|(j, _)| *j != skip)
        .map(|(_, wj)| quad_row(h, wj))
        .sum()
}

/// SINR of user `k` with relaxed beamformers `W_k` and sensing covariance `R`.
pub fn sinr_user(h_k: &CVec, w: &[CMat], r: &CMat, sigma_c2: f64, k: usize) -> f64 {
    let signal = quad_row(h_k, &w[k]);
    let denom = interference(h_k, w, k) + quad_row(h_k, r) + sigma_c2;
    (signal / denom).max(0.0)
}

/// SINR at target `l` when it eavesdrops on user `k`'s stream.
pub fn sinr_target(h_l: &CVec, w: &[CMat], r: &CMat, sigma_c2: f64, k: usize) -> f64 {
    sinr_user(h_l, w, r, sigma_c2, k)
}

/// Beamformer-vector form of [`sinr_user`].
pub fn sinr_user_vec(h_k: &CVec, w: &[CVec], r: &CMat, sigma_c2: f64, k: usize) -> f64 {
    let gain = |v: &CVec| {
        let z = h_k.iter().zip(v.iter()).fold(crate::linalg::c(0.0, 0.0), |acc, (a, b)| acc + a * b);
        z.norm_sqr()
    };
    let signal = gain(&w[k]);
    let inter: f64 = w.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| gain(v)).sum();
    signal / (inter + quad_row(h_k, r) + sigma_c2)
}

/// `(ι/ρ)·log2(1 + γ)`.
pub fn semantic_rate(gamma: f64, rho: f64, iota: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("extraction ratio must be positive, got {rho}")));
    }
    Ok(iota / rho * (1.0 + gamma).log2())
}

/// Lower bound on the semantic extraction ratio, natural logs throughout.
///
/// Returns the raw value; callers decide whether it lies in `(0, 1]`.
pub fn rho_lower_bound(varrho: f64, weights: &[f64], precisions: &[f64]) -> Result<f64> {
    if !(varrho > 0.0) || precisions.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Domain("BLEU bound and precisions must be positive".into()));
    }
    if weights.len() != precisions.len() {
        return Err(Error::Dimension("gram weights and precisions differ in length".into()));
    }
    let s: f64 = weights.iter().zip(precisions).map(|(w, p)| w * p.ln()).sum();
    let denom = 1.0 - varrho.ln() + s;
    if !(denom > 0.0) {
        return Err(Error::Domain(format!("lower-bound denominator {denom} is not positive")));
    }
    Ok(1.0 / denom)
}

/// Worst-case secrecy rate `max(min_l (R_k − R_{l|k}), 0)`.
pub fn secrecy_rate(r_k: f64, eavesdroppers: &[f64]) -> f64 {
    let worst = eavesdroppers.iter().fold(f64::NEG_INFINITY, |m, r| m.max(*r));
    if worst == f64::NEG_INFINITY {
        return r_k.max(0.0);
    }
    (r_k - worst).max(0.0)
}

/// `S_k / R_k` clamped to `[0, 1]`; `None` when `R_k = 0`.
pub fn info_efficiency(s_k: f64, r_k: f64) -> Option<f64> {
    if !(r_k > 0.0) {
        return None;
    }
    Some((s_k / r_k).clamp(0.0, 1.0))
}

/// `−ν·Σ ln ρ_k`.
pub fn compute_power(rho: &[f64], nu: f64) -> Result<f64> {
    if rho.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
        return Err(Error::Domain("extraction ratios must lie in (0, 1]".into()));
    }
    Ok(-nu * rho.iter().map(|r| r.ln()).sum::<f64>())
}

/// Power spent on communication and sensing, `Tr(R_x)`.
pub fn cs_power(rx_cov: &CMat) -> f64 {
    trace_re(rx_cov)
}

/// `U·Q/(f − f̄)`.
pub fn latency(bits: f64, cycles_per_bit: f64, f: f64, f_bar: f64) -> Result<f64> {
    if !(f > f_bar) {
        return Err(Error::Domain(format!("CPU frequency {f} must exceed baseline {f_bar}")));
    }
    Ok(bits * cycles_per_bit / (f - f_bar))
}

/// `κ·f³·Q`.
pub fn process_power(f: f64, cycles_per_bit: f64, kappa: f64) -> f64 {
    kappa * f.powi(3) * cycles_per_bit
}

/// Extraction ratios and their common lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticState {
    pub rho: Vec<f64>,
    pub rho_lb: f64,
    pub iota: f64,
}

impl SemanticState {
    pub fn uniform(config: &SystemConfig, rho: f64) -> SemanticState {
        SemanticState { rho: vec![rho; config.users], rho_lb: config.rho_lb(), iota: config.iota }
    }
}

/// Spectral terms `log2(1+γ_k)` and `log2(1+Γ_{l|k})` (indexed `[l][k]`).
pub fn spectral_terms(ch: &ChannelSet, w: &[CMat], r: &CMat, sigma_c2: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k_count = w.len();
    let users = (0..k_count)
        .map(|k| (1.0 + sinr_user(&ch.users[k], w, r, sigma_c2, k)).log2())
        .collect();
    let eaves = ch
        .targets
        .iter()
        .map(|h| (0..k_count).map(|k| (1.0 + sinr_target(h, w, r, sigma_c2, k)).log2()).collect())
        .collect();
    (users, eaves)
}

/// Secrecy rate of every user.
pub fn secrecy_rates(
    ch: &ChannelSet,
    w: &[CMat],
    r: &CMat,
    rho: &[f64],
    iota: f64,
    sigma_c2: f64,
) -> Vec<f64> {
    let (u, e) = spectral_terms(ch, w, r, sigma_c2);
    (0..w.len())
        .map(|k| {
            let scale = iota / rho[k];
            let eav: Vec<f64> = e.iter().map(|row| scale * row[k]).collect();
            secrecy_rate(scale * u[k], &eav)
        })
        .collect()
}

pub fn min_secrecy(
    ch: &ChannelSet,
    w: &[CMat],
    r: &CMat,
    rho: &[f64],
    iota: f64,
    sigma_c2: f64,
) -> f64 {
    secrecy_rates(ch, w, r, rho, iota, sigma_c2)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Every metric of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub gamma: Vec<f64>,
    /// `Γ_{l|k}` indexed `[l][k]`.
    pub gamma_eve: Vec<Vec<f64>>,
    pub rate: Vec<f64>,
    pub rate_eve: Vec<Vec<f64>>,
    pub secrecy: Vec<f64>,
    pub efficiency: Vec<Option<f64>>,
    pub p_comp: f64,
    pub p_cs: f64,
    pub p_process: Vec<f64>,
    pub latency: Vec<f64>,
}

impl MetricsReport {
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        config: &SystemConfig,
        ch: &ChannelSet,
        w: &[CMat],
        r: &CMat,
        rho: &[f64],
        cpu: &[f64],
    ) -> Result<MetricsReport> {
        let sc = config.sigma_c2;
        let k_count = w.len();
        let gamma: Vec<f64> = (0..k_count).map(|k| sinr_user(&ch.users[k], w, r, sc, k)).collect();
        let gamma_eve: Vec<Vec<f64>> = ch
            .targets
            .iter()
            .map(|h| (0..k_count).map(|k| sinr_target(h, w, r, sc, k)).collect())
            .collect();
        let rate = (0..k_count)
            .map(|k| semantic_rate(gamma[k], rho[k], config.iota))
            .collect::<Result<Vec<_>>>()?;
        let rate_eve = gamma_eve
            .iter()
            .map(|row| {
                (0..k_count)
                    .map(|k| semantic_rate(row[k], rho[k], config.iota))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let secrecy: Vec<f64> = (0..k_count)
            .map(|k| {
                let e: Vec<f64> = rate_eve.iter().map(|row| row[k]).collect();
                secrecy_rate(rate[k], &e)
            })
            .collect();
        let efficiency = (0..k_count).map(|k| info_efficiency(secrecy[k], rate[k])).collect();
        let mut rx_cov = r.clone();
        for wk in w {
            rx_cov += wk;
        }
        let p_process = cpu
            .iter()
            .map(|f| process_power(*f, config.cycles_per_bit, config.kappa))
            .collect();
        let latency = cpu
            .iter()
            .map(|f| latency(config.data_bits, config.cycles_per_bit, *f, config.f_bar))
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricsReport {
            gamma,
            gamma_eve,
            rate,
            rate_eve,
            secrecy,
            efficiency,
            p_comp: compute_power(rho, config.nu)?,
            p_cs: cs_power(&rx_cov),
            p_process,
            latency,
        })
    }

    pub fn min_secrecy(&self) -> f64 {
        self.secrecy.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
