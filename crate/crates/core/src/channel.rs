//! Near-field channel synthesis under the non-uniform spherical wave model.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{c, cis, CMat, CVec};
use crate::scenario::{Entity, Placement, RxArray, Scenario, Target, TxArray};

/// Second-order (Fresnel) phase path `ψ` of an element at `(x, z)`.
///
/// The steering element is `exp(j·2π/λ·ψ)`.
pub fn steering_phase(x: f64, z: f64, theta: f64, phi: f64, d: f64) -> f64 {
    let (sp, cp) = phi.sin_cos();
    let ct = theta.cos();
    let a = ct * sp;
    x * a - x * x * (1.0 - a * a) / (2.0 * d) + z * cp - z * z * sp * sp / (2.0 * d)
}

/// `(∂ψ/∂x, ∂ψ/∂z)` at the element position.
pub fn phase_grad_position(x: f64, z: f64, theta: f64, phi: f64, d: f64) -> (f64, f64) {
    let (sp, cp) = phi.sin_cos();
    let a = theta.cos() * sp;
    (a - x * (1.0 - a * a) / d, cp - z * sp * sp / d)
}

/// `(∂ψ/∂θ, ∂ψ/∂φ, ∂ψ/∂d)` at the element position.
pub fn phase_grad_entity(x: f64, z: f64, theta: f64, phi: f64, d: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let dt = -x * st * sp - x * x * ct * st * sp * sp / d;
    let dp = x * ct * cp + x * x * ct * ct * sp * cp / d - z * sp - z * z * sp * cp / d;
    let dd = (x * x * (1.0 - ct * ct * sp * sp) + z * z * sp * sp) / (2.0 * d * d);
    [dt, dp, dd]
}

fn steering(points: &[[f64; 2]], theta: f64, phi: f64, d: f64, wavelength: f64) -> Result<CVec> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveRange(d));
    }
    let k = 2.0 * PI / wavelength;
    Ok(CVec::from_iterator(
        points.len(),
        points.iter().map(|p| cis(k * steering_phase(p[0], p[1], theta, phi, d))),
    ))
}

/// Transmit steering vector evaluated at each element's own coordinates.
pub fn tx_steering(theta: f64, phi: f64, d: f64, tx: &TxArray) -> Result<CVec> {
    steering(&tx.positions, theta, phi, d, tx.wavelength)
}

/// Receive steering vector over the grid `(m_x·d_x, m_z·d_z)`.
pub fn rx_steering(theta: f64, phi: f64, d: f64, rx: &RxArray) -> Result<CVec> {
    steering(&rx.positions, theta, phi, d, rx.wavelength)
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// `1/(√(4π)·‖u_i − b‖)` per transmit element.
pub fn pathloss_user(b: [f64; 3], tx: &TxArray) -> Result<DVector<f64>> {
    let s = 1.0 / (4.0 * PI).sqrt();
    let mut out = DVector::zeros(tx.len());
    for i in 0..tx.len() {
        let r = dist3(tx.point3(i), b);
        if !(r > 0.0) {
            return Err(Error::CoincidentPoint { index: i });
        }
        out[i] = s / r;
    }
    Ok(out)
}

/// `1/(4π·‖u_i − b‖·‖v_m − b‖)` with rows over receive and columns over transmit elements.
pub fn pathloss_echo(b: [f64; 3], tx: &TxArray, rx: &RxArray) -> Result<DMatrix<f64>> {
    let mut rt = Vec::with_capacity(tx.len());
    for i in 0..tx.len() {
        let r = dist3(tx.point3(i), b);
        if !(r > 0.0) {
            return Err(Error::CoincidentPoint { index: i });
        }
        rt.push(r);
    }
    let mut out = DMatrix::zeros(rx.len(), tx.len());
    for m in 0..rx.len() {
        let rr = dist3(rx.point3(m), b);
        if !(rr > 0.0) {
            return Err(Error::CoincidentPoint { index: m });
        }
        for i in 0..tx.len() {
            out[(m, i)] = 1.0 / (4.0 * PI * rt[i] * rr);
        }
    }
    Ok(out)
}

/// `h = Φ ⊙ a_t` for a point entity.
pub fn user_channel(entity: &Entity, tx: &TxArray) -> Result<CVec> {
    let a = tx_steering(entity.theta, entity.phi, entity.range, tx)?;
    let pl = pathloss_user(entity.position(), tx)?;
    Ok(a.zip_map(&pl, |z, p| z * p))
}

/// Sum of scatterer channels of an extended target.
pub fn target_channel(target: &Target, tx: &TxArray) -> Result<CVec> {
    let mut h = CVec::zeros(tx.len());
    for s in &target.scatterers {
        h += user_channel(s, tx)?;
    }
    Ok(h)
}

/// Channel of a point entity with its derivatives in each element's `x` and `z`.
///
/// Element `i` depends only on `(x_i, z_i)`, so the Jacobians are diagonal and
/// returned as vectors.
pub fn user_channel_with_jacobian(entity: &Entity, tx: &TxArray) -> Result<(CVec, CVec, CVec)> {
    let k = 2.0 * PI / tx.wavelength;
    let b = entity.position();
    let n = tx.len();
    let s = 1.0 / (4.0 * PI).sqrt();
    let (mut h, mut hx, mut hz) = (CVec::zeros(n), CVec::zeros(n), CVec::zeros(n));
    if !(entity.range > 0.0) {
        return Err(Error::NonPositiveRange(entity.range));
    }
    for i in 0..n {
        let [x, z] = tx.positions[i];
        let r2 = (x - b[0]).powi(2) + b[1] * b[1] + (z - b[2]).powi(2);
        if !(r2 > 0.0) {
            return Err(Error::CoincidentPoint { index: i });
        }
        let psi = steering_phase(x, z, entity.theta, entity.phi, entity.range);
        let (px, pz) = phase_grad_position(x, z, entity.theta, entity.phi, entity.range);
        let hi = cis(k * psi) * (s / r2.sqrt());
        h[i] = hi;
        hx[i] = hi * c(-(x - b[0]) / r2, k * px);
        hz[i] = hi * c(-(z - b[2]) / r2, k * pz);
    }
    Ok((h, hx, hz))
}

pub fn target_channel_with_jacobian(target: &Target, tx: &TxArray) -> Result<(CVec, CVec, CVec)> {
    let n = tx.len();
    let (mut h, mut hx, mut hz) = (CVec::zeros(n), CVec::zeros(n), CVec::zeros(n));
    for s in &target.scatterers {
        let (a, ax, az) = user_channel_with_jacobian(s, tx)?;
        h += a;
        hx += ax;
        hz += az;
    }
    Ok((h, hx, hz))
}

/// Echo contribution `Ψ ⊙ (a_rᴴ a_t)` of one scatterer.
pub fn scatterer_echo(s: &Entity, tx: &TxArray, rx: &RxArray) -> Result<CMat> {
    let at = tx_steering(s.theta, s.phi, s.range, tx)?;
    let ar = rx_steering(s.theta, s.phi, s.range, rx)?;
    let psi = pathloss_echo(s.position(), tx, rx)?;
    Ok(CMat::from_fn(rx.len(), tx.len(), |m, i| {
        ar[m].conj() * at[i] * psi[(m, i)]
    }))
}

pub fn target_echo(target: &Target, tx: &TxArray, rx: &RxArray) -> Result<CMat> {
    let mut g = CMat::zeros(rx.len(), tx.len());
    for s in &target.scatterers {
        g += scatterer_echo(s, tx, rx)?;
    }
    Ok(g)
}

/// Echo matrix summed over all targets and scatterers.
pub fn echo_channel(placement: &Placement, tx: &TxArray, rx: &RxArray) -> Result<CMat> {
    let mut g = CMat::zeros(rx.len(), tx.len());
    for t in &placement.targets {
        g += target_echo(t, tx, rx)?;
    }
    Ok(g)
}

/// Every channel of one coherent block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// User channels `h_k`, stored as column vectors of the row channel.
    pub users: Vec<CVec>,
    /// Target channels `h_l`.
    pub targets: Vec<CVec>,
    /// Echo matrix `G`, `n_r × n_t`.
    pub echo: CMat,
}

impl ChannelSet {
    pub fn synthesize(placement: &Placement, tx: &TxArray, rx: &RxArray) -> Result<ChannelSet> {
        let users = placement
            .users
            .iter()
            .map(|u| user_channel(u, tx))
            .collect::<Result<Vec<_>>>()?;
        let targets = placement
            .targets
            .iter()
            .map(|t| target_channel(t, tx))
            .collect::<Result<Vec<_>>>()?;
        let echo = echo_channel(placement, tx, rx)?;
        Ok(ChannelSet { users, targets, echo })
    }

    pub fn for_scenario(s: &Scenario) -> Result<ChannelSet> {
        Self::synthesize(&s.placement, &s.tx, &s.rx)
    }

    /// User and target channels only; the echo matrix is left empty.
    pub fn communication_only(placement: &Placement, tx: &TxArray) -> Result<ChannelSet> {
        let users = placement
            .users
            .iter()
            .map(|u| user_channel(u, tx))
            .collect::<Result<Vec<_>>>()?;
        let targets = placement
            .targets
            .iter()
            .map(|t| target_channel(t, tx))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelSet { users, targets, echo: CMat::zeros(0, tx.len()) })
    }

    pub fn n_t(&self) -> usize {
        self.echo.ncols()
    }
}
