//! Fisher information, Cramér-Rao bounds and the least-squares echo estimator.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{phase_grad_entity, rx_steering, steering_phase, tx_steering};
use crate::error::{Error, Result};
use crate::linalg::{c, check_psd, cis, inv_pd, kron, psd_sqrt, trace_re, CMat, C64};
use crate::scenario::{Entity, RxArray, TxArray};

const PSD_TOL: f64 = 1e-9;

/// `(F/σ²)·R_xᵀ ⊗ I_{n_r}`.
pub fn fim_extended(rx_cov: &CMat, sigma_r2: f64, frames: usize, n_r: usize) -> Result<CMat> {
    check_psd(rx_cov, PSD_TOL)?;
    let scale = c(frames as f64 / sigma_r2, 0.0);
    Ok(kron(&rx_cov.transpose(), &CMat::identity(n_r, n_r)) * scale)
}

/// `σ²·n_rx·n_rz/F · Tr(R_x⁻¹)`.
pub fn crb_extended(
    rx_cov: &CMat,
    sigma_r2: f64,
    frames: usize,
    n_rx: usize,
    n_rz: usize,
) -> Result<f64> {
    check_psd(rx_cov, PSD_TOL)?;
    let inv = inv_pd(rx_cov).ok_or(Error::Singular("transmit covariance R_x"))?;
    let tr = trace_re(&inv);
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::Singular("transmit covariance R_x"));
    }
    Ok(sigma_r2 * (n_rx * n_rz) as f64 / frames as f64 * tr)
}

/// Fisher information of a single point target over `(θ, φ, d)`.
///
/// Path loss is ignored unless `include_pathloss` is set.
#[allow(clippy::too_many_arguments)]
pub fn point_target_fim(
    target: &Entity,
    rx_cov: &CMat,
    tx: &TxArray,
    rx: &RxArray,
    sigma_r2: f64,
    frames: usize,
    include_pathloss: bool,
) -> Result<Matrix3<f64>> {
    if !(target.range > 0.0) {
        return Err(Error::NonPositiveRange(target.range));
    }
    let derivs = echo_derivatives(target, tx, rx, include_pathloss)?;
    let scale = 2.0 * frames as f64 / sigma_r2;
    let mut j = Matrix3::zeros();
    let prods: Vec<CMat> = derivs.iter().map(|d| d * rx_cov).collect();
    for p in 0..3 {
        for q in p..3 {
            // Re tr(A R Bᴴ) = Re Σ (A R) ∘ conj(B)
            let v: f64 = prods[p]
                .iter()
                .zip(derivs[q].iter())
                .map(|(a, b)| (a * b.conj()).re)
                .sum();
            j[(p, q)] = scale * v;
            j[(q, p)] = scale * v;
        }
    }
    Ok(j)
}

/// Single-scatterer echo matrix as a function of the scatterer's `(θ, φ, d)`.
pub fn point_echo(target: &Entity, tx: &TxArray, rx: &RxArray, include_pathloss: bool) -> Result<CMat> {
    let at = tx_steering(target.theta, target.phi, target.range, tx)?;
    let ar = rx_steering(target.theta, target.phi, target.range, rx)?;
    let psi = if include_pathloss {
        Some(crate::channel::pathloss_echo(target.position(), tx, rx)?)
    } else {
        None
    };
    Ok(CMat::from_fn(rx.len(), tx.len(), |m, i| {
        let g = ar[m].conj() * at[i];
        match &psi {
            Some(p) => g * p[(m, i)],
            None => g,
        }
    }))
}

/// `∂G/∂θ, ∂G/∂φ, ∂G/∂d` of the single-scatterer echo matrix.
fn echo_derivatives(
    t: &Entity,
    tx: &TxArray,
    rx: &RxArray,
    include_pathloss: bool,
) -> Result<[CMat; 3]> {
    let k = 2.0 * PI / tx.wavelength;
    let (th, ph, d) = (t.theta, t.phi, t.range);
    let tx_ph: Vec<(f64, [f64; 3])> = tx
        .positions
        .iter()
        .map(|p| (steering_phase(p[0], p[1], th, ph, d), phase_grad_entity(p[0], p[1], th, ph, d)))
        .collect();
    let rx_ph: Vec<(f64, [f64; 3])> = rx
        .positions
        .iter()
        .map(|p| (steering_phase(p[0], p[1], th, ph, d), phase_grad_entity(p[0], p[1], th, ph, d)))
        .collect();

    let b = t.position();
    let (st, ct) = th.sin_cos();
    let (sp, cp) = ph.sin_cos();
    let db = [
        [-d * st * sp, d * ct * sp, 0.0],
        [d * ct * cp, d * st * cp, -d * sp],
        [ct * sp, st * sp, cp],
    ];
    // range and its derivatives for every element
    let ranges = |pts: &[[f64; 2]]| -> Result<Vec<(f64, [f64; 3])>> {
        pts.iter()
            .enumerate()
            .map(|(i, p)| {
                let v = [b[0] - p[0], b[1], b[2] - p[1]];
                let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if !(r > 0.0) {
                    return Err(Error::CoincidentPoint { index: i });
                }
                let dr = [0, 1, 2].map(|q| (v[0] * db[q][0] + v[1] * db[q][1] + v[2] * db[q][2]) / r);
                Ok((r, dr))
            })
            .collect()
    };
    let (rt, rr) = if include_pathloss {
        (ranges(&tx.positions)?, ranges(&rx.positions)?)
    } else {
        (Vec::new(), Vec::new())
    };

    let mut out = [
        CMat::zeros(rx.len(), tx.len()),
        CMat::zeros(rx.len(), tx.len()),
        CMat::zeros(rx.len(), tx.len()),
    ];
    for m in 0..rx.len() {
        for i in 0..tx.len() {
            let g = cis(k * (tx_ph[i].0 - rx_ph[m].0));
            let (amp, damp) = if include_pathloss {
                let (a, da) = rt[i];
                let (r, dr) = rr[m];
                let psi = 1.0 / (4.0 * PI * a * r);
                (psi, [0, 1, 2].map(|q| -psi * (da[q] / a + dr[q] / r)))
            } else {
                (1.0, [0.0; 3])
            };
            for q in 0..3 {
                let dphase = k * (tx_ph[i].1[q] - rx_ph[m].1[q]);
                out[q][(m, i)] = g * c(damp[q], amp * dphase);
            }
        }
    }
    Ok(out)
}

/// `Ĝ = Z·Xᴴ·(X·Xᴴ)⁻¹`.
pub fn ls_estimate(z: &CMat, x: &CMat) -> Result<CMat> {
    let (n_t, frames) = x.shape();
    if z.ncols() != frames {
        return Err(Error::Dimension(format!(
            "received block has {} frames, transmit block has {}",
            z.ncols(),
            frames
        )));
    }
    if frames < n_t {
        return Err(Error::RankDeficient { frames, antennas: n_t });
    }
    let gram = x * x.adjoint();
    let inv = inv_pd(&gram).ok_or(Error::RankDeficient { frames, antennas: n_t })?;
    Ok(z * x.adjoint() * inv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmitMode {
    /// `X·Xᴴ = F·R_x` exactly.
    Exact,
    /// Independent Gaussian columns with covariance `R_x`.
    Stochastic,
}

/// Transmit block `X` (`n_t × F`) whose sample covariance realises `R_x`.
pub fn synthesize_transmit(rx_cov: &CMat, frames: usize, mode: TransmitMode, seed: u64) -> Result<CMat> {
    check_psd(rx_cov, PSD_TOL)?;
    let n = rx_cov.nrows();
    let root = psd_sqrt(rx_cov);
    match mode {
        TransmitMode::Exact => {
            if frames < n {
                return Err(Error::RankDeficient { frames, antennas: n });
            }
            let f = frames as f64;
            // DFT rows are orthonormal, so Q·Qᴴ = I
            let q = CMat::from_fn(n, frames, |i, t| cis(-2.0 * PI * (i * t) as f64 / f) / f.sqrt());
            Ok(root * q * c(f.sqrt(), 0.0))
        }
        TransmitMode::Stochastic => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = complex_gaussian(n, frames, 1.0, &mut rng);
            Ok(root * w)
        }
    }
}

/// Matrix of i.i.d. `CN(0, var)` entries.
pub fn complex_gaussian<R: rand::Rng>(rows: usize, cols: usize, var: f64, rng: &mut R) -> CMat {
    let s = (var / 2.0).sqrt();
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(s * re, s * im)
    })
}

/// Mean `‖Ĝ − G‖²_F` of the LS estimator over `trials` noisy echo blocks.
///
/// A fresh stochastic transmit block is drawn per trial.
pub fn monte_carlo_mse(
    g: &CMat,
    rx_cov: &CMat,
    sigma_r2: f64,
    frames: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = psd_sqrt(rx_cov);
    let mut acc = 0.0;
    for _ in 0..trials {
        let x = &root * complex_gaussian(rx_cov.nrows(), frames, 1.0, &mut rng);
        let noise = complex_gaussian(g.nrows(), frames, sigma_r2, &mut rng);
        let z = g * &x + noise;
        let est = ls_estimate(&z, &x)?;
        acc += (est - g).norm_squared();
    }
    Ok(acc / trials as f64)
}

/// Sensing quality of a transmit covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingReport {
    pub fim: CMat,
    pub crb: f64,
    pub point_fim: Option<Matrix3<f64>>,
}

impl SensingReport {
    pub fn evaluate(
        rx_cov: &CMat,
        sigma_r2: f64,
        frames: usize,
        rx: &RxArray,
        point: Option<(&Entity, &TxArray)>,
    ) -> Result<SensingReport> {
        let fim = fim_extended(rx_cov, sigma_r2, frames, rx.len())?;
        let crb = crb_extended(rx_cov, sigma_r2, frames, rx.n_rx, rx.n_rz)?;
        let point_fim = match point {
            Some((e, tx)) => Some(point_target_fim(e, rx_cov, tx, rx, sigma_r2, frames, false)?),
            None => None,
        };
        Ok(SensingReport { fim, crb, point_fim })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frob_norm, hermitian_part};
    use crate::scenario::{build_arrays, SystemConfig};
    use proptest::prelude::*;

    fn random_psd(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = complex_gaussian(n, n, 1.0, &mut rng);
        hermitian_part(&(&a * a.adjoint())) + CMat::identity(n, n) * c(0.1, 0.0)
    }

    #[test]
    fn fim_identity_case() {
        let f = fim_extended(&CMat::identity(2, 2), 1.0, 10, 4).unwrap();
        assert!(frob_norm(&(f - CMat::identity(8, 8) * c(10.0, 0.0))) < 1e-14);
    }

    #[test]
    fn fim_is_linear_in_covariance() {
        let r = random_psd(3, 1);
        let a = fim_extended(&r, 0.5, 7, 2).unwrap();
        let b = fim_extended(&(&r * c(3.0, 0.0)), 0.5, 7, 2).unwrap();
        assert!(frob_norm(&(b - a * c(3.0, 0.0))) < 1e-12);
    }

    #[test]
    fn fim_equals_kronecker_chain() {
        let r = random_psd(3, 2);
        let x = synthesize_transmit(&r, 12, TransmitMode::Exact, 0).unwrap();
        let n_r = 4;
        let sigma = 0.3;
        let big = kron(&x.transpose(), &CMat::identity(n_r, n_r));
        let chain = big.adjoint() * &big * c(1.0 / sigma, 0.0);
        // (Xᵀ⊗I)ᴴ(Xᵀ⊗I) = (X̄ Xᵀ)⊗I = (F R)ᵀ⊗I
        let fim = fim_extended(&r, sigma, 12, n_r).unwrap();
        assert!(frob_norm(&(&chain - &fim)) < 1e-10 * frob_norm(&fim));
    }

    #[test]
    fn crb_examples() {
        let v = crb_extended(&CMat::identity(2, 2), 1.0, 10, 2, 2).unwrap();
        assert!((v - 0.8).abs() < 1e-15);
        let w = crb_extended(&CMat::identity(9, 9), 1e-4, 100, 5, 5).unwrap();
        let oracle = 1e-4 * 25.0 / 100.0 * 9.0;
        assert!((w - oracle).abs() < 1e-18);
        let p = crb_extended(&(CMat::identity(9, 9) * c(4.0, 0.0)), 1e-4, 100, 5, 5).unwrap();
        assert!((p - oracle / 4.0).abs() < 1e-18);
        let mut sing = CMat::identity(3, 3);
        sing[(2, 2)] = c(0.0, 0.0);
        assert!(crb_extended(&sing, 1.0, 10, 2, 2).is_err());
    }

    #[test]
    fn crb_matches_fim_block_inverse() {
        let r = random_psd(3, 4);
        let fim = fim_extended(&r, 0.2, 20, 6).unwrap();
        let inv = inv_pd(&fim).unwrap();
        let crb = crb_extended(&r, 0.2, 20, 2, 3).unwrap();
        assert!((trace_re(&inv) - crb).abs() < 1e-10 * crb);
    }

    fn geometry() -> (TxArray, RxArray, Entity) {
        let (tx, rx) = build_arrays(&SystemConfig::default());
        (tx, rx, Entity { theta: 1.1, phi: 1.3, range: 2.5 })
    }

    #[test]
    fn point_fim_zero_for_zero_covariance() {
        let (tx, rx, e) = geometry();
        let j = point_target_fim(&e, &CMat::zeros(9, 9), &tx, &rx, 1e-4, 100, false).unwrap();
        assert_eq!(j, Matrix3::zeros());
    }

    #[test]
    fn point_fim_is_symmetric_psd() {
        let (tx, rx, e) = geometry();
        for seed in 0..5 {
            let r = random_psd(9, seed);
            for pl in [false, true] {
                let j = point_target_fim(&e, &r, &tx, &rx, 1e-4, 100, pl).unwrap();
                assert!((j - j.transpose()).norm() <= 1e-12 * j.norm());
                let ev = j.symmetric_eigen().eigenvalues;
                assert!(ev.min() >= -1e-9 * ev.max());
            }
        }
    }

    #[test]
    fn point_fim_matches_finite_differences() {
        let (tx, rx, e) = geometry();
        let r = random_psd(9, 9);
        for pl in [false, true] {
            let analytic = point_target_fim(&e, &r, &tx, &rx, 1e-4, 100, pl).unwrap();
            let params = [e.theta, e.phi, e.range];
            let derivs: Vec<CMat> = (0..3)
                .map(|q| {
                    let h = 1e-6 * params[q].abs();
                    let mut p = params;
                    let mut m = params;
                    p[q] += h;
                    m[q] -= h;
                    let ep = Entity { theta: p[0], phi: p[1], range: p[2] };
                    let em = Entity { theta: m[0], phi: m[1], range: m[2] };
                    (point_echo(&ep, &tx, &rx, pl).unwrap() - point_echo(&em, &tx, &rx, pl).unwrap())
                        / c(2.0 * h, 0.0)
                })
                .collect();
            let mut fd = Matrix3::zeros();
            for p in 0..3 {
                for q in 0..3 {
                    fd[(p, q)] = 2.0 * 100.0 / 1e-4 * (&derivs[p] * &r * derivs[q].adjoint()).trace().re;
                }
            }
            let rel = (analytic - fd).norm() / analytic.norm();
            assert!(rel < 1e-5, "pathloss {pl}: {rel}");
        }
    }

    #[test]
    fn ls_recovers_noiseless_echo() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = complex_gaussian(6, 3, 1.0, &mut rng);
        let x = complex_gaussian(3, 10, 1.0, &mut rng);
        let est = ls_estimate(&(&g * &x), &x).unwrap();
        assert!(frob_norm(&(est - &g)) < 1e-12);
        let short = complex_gaussian(3, 2, 1.0, &mut rng);
        assert!(matches!(
            ls_estimate(&(&g * &short), &short),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn ls_mse_matches_inverse_gram_trace() {
        // fixed X: E‖Ĝ − G‖² = σ²·n_r·Tr((XXᴴ)⁻¹)
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let r = random_psd(3, 5);
        let x = synthesize_transmit(&r, 40, TransmitMode::Exact, 0).unwrap();
        let g = complex_gaussian(4, 3, 1.0, &mut rng);
        let sigma = 0.01;
        let trials = 500;
        let mut acc = 0.0;
        for _ in 0..trials {
            let z = &g * &x + complex_gaussian(4, 40, sigma, &mut rng);
            acc += (ls_estimate(&z, &x).unwrap() - &g).norm_squared();
        }
        let mse = acc / trials as f64;
        let crb = crb_extended(&r, sigma, 40, 2, 2).unwrap();
        assert!((mse / crb - 1.0).abs() < 0.08, "{}", mse / crb);
    }

    #[test]
    fn exact_transmit_realises_covariance() {
        let r = random_psd(4, 6);
        let x = synthesize_transmit(&r, 100, TransmitMode::Exact, 0).unwrap();
        let sample = &x * x.adjoint() / c(100.0, 0.0);
        assert!(frob_norm(&(sample - &r)) < 1e-10);
        let z = synthesize_transmit(&CMat::zeros(4, 4), 100, TransmitMode::Exact, 0).unwrap();
        assert_eq!(frob_norm(&z), 0.0);
    }

    #[test]
    fn stochastic_transmit_deviates_about_ten_percent() {
        let r = CMat::identity(9, 9);
        let mut rel = 0.0;
        for seed in 0..20 {
            let x = synthesize_transmit(&r, 100, TransmitMode::Stochastic, seed).unwrap();
            let sample = &x * x.adjoint() / c(100.0, 0.0);
            rel += frob_norm(&(sample - &r)) / frob_norm(&r);
        }
        rel /= 20.0;
        // E‖S − I‖_F / ‖I‖_F = √(n/F) = 0.3 for n = 9; per-entry scale is 1/√F
        assert!(rel > 0.2 && rel < 0.4, "{rel}");
    }

    #[test]
    fn crb_ignores_positions_but_point_fim_does_not() {
        let (tx, rx, e) = geometry();
        let r = random_psd(9, 8);
        let base = crb_extended(&r, 1e-4, 100, 5, 5).unwrap();
        let j0 = point_target_fim(&e, &r, &tx, &rx, 1e-4, 100, false).unwrap();
        let mut moved = tx.clone();
        moved.positions[1][0] += 1e-3;
        assert_eq!(crb_extended(&r, 1e-4, 100, 5, 5).unwrap(), base);
        let j1 = point_target_fim(&e, &r, &moved, &rx, 1e-4, 100, false).unwrap();
        assert!((j1 - j0).abs().max() > 1e-12);
    }

    proptest! {
        #[test]
        fn fim_hermitian_psd(seed in 0u64..1000, n in 1usize..4, n_r in 1usize..4) {
            let r = random_psd(n, seed);
            let f = fim_extended(&r, 0.7, 15, n_r).unwrap();
            prop_assert!(frob_norm(&(&f - f.adjoint())) < 1e-12 * frob_norm(&f));
            prop_assert!(crate::linalg::min_eigenvalue(&f) > -1e-10);
        }
    }
}
