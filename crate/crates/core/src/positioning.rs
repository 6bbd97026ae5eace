//! Fluid-antenna position optimisation: objective and analytic gradient in
//! the flattened coordinates `u = [x…, z…]`, projected BFGS with backtracking,
//! and the second-order Taylor benchmark step.

use std::f64::consts::LN_2;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::channel::{target_channel_with_jacobian, user_channel_with_jacobian};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::scenario::{Placement, Tolerances, TxArray};
use crate::solver::{Affine, ConcaveQuadratic, ConvexProgram, Linear, SolverOptions, VarLayout};

/// Function maximised by [`projected_bfgs`].
pub trait SmoothObjective {
    fn value(&self, u: &DVector<f64>) -> Result<f64>;
    fn value_grad(&self, u: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    pub tau_init: f64,
    pub shrink_factor: f64,
    pub armijo_c: f64,
    pub tau_min: f64,
}

impl LineSearchParams {
    pub fn from_tolerances(t: &Tolerances) -> Self {
        LineSearchParams {
            tau_init: t.tau_init,
            shrink_factor: t.shrink_factor,
            armijo_c: t.armijo_c,
            tau_min: t.tau_min,
        }
    }
}

impl Default for LineSearchParams {
    fn default() -> Self {
        LineSearchParams::from_tolerances(&Tolerances::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionState {
    pub u: DVector<f64>,
    pub h_inv: DMatrix<f64>,
    /// Smoothed objective at `u`.
    pub value: f64,
    pub grad: DVector<f64>,
}

/// Beamforming quantities held fixed while the antennas move.
#[derive(Debug, Clone)]
pub struct FaProblem<'a> {
    pub placement: &'a Placement,
    /// Array whose boxes and wavelength are used; positions come from `u`.
    pub tx: &'a TxArray,
    pub w: &'a [CMat],
    pub rx_cov: CMat,
    pub sigma_c2: f64,
    /// `ι/ρ_k` per user.
    pub scale: Vec<f64>,
    pub beta: f64,
}

impl<'a> FaProblem<'a> {
    pub fn new(
        placement: &'a Placement,
        tx: &'a TxArray,
        w: &'a [CMat],
        r: &CMat,
        rho: &[f64],
        iota: f64,
        sigma_c2: f64,
        beta: f64,
    ) -> Self {
        let mut rx_cov = r.clone();
        for wk in w {
            rx_cov += wk;
        }
        FaProblem {
            placement,
            tx,
            w,
            rx_cov,
            sigma_c2,
            scale: rho.iter().map(|r| iota / r).collect(),
            beta,
        }
    }

    fn users(&self) -> usize {
        self.placement.users.len()
    }

    fn targets(&self) -> usize {
        self.placement.targets.len()
    }

    /// Coordinates of `u` that may change (positive box extent, not the reference element).
    pub fn free_coordinates(&self) -> Vec<usize> {
        free_coordinates(self.tx)
    }
}

pub fn free_coordinates(tx: &TxArray) -> Vec<usize> {
    let n = tx.len();
    let mut out = Vec::new();
    for i in tx.movable() {
        if tx.boxes[i].width() > 0.0 {
            out.push(i);
        }
    }
    for i in tx.movable() {
        if tx.boxes[i].height() > 0.0 {
            out.push(n + i);
        }
    }
    out
}

/// Quadratic form `h M hᴴ` and its gradient in `u`.
fn form_with_grad(h: &CVec, hx: &CVec, hz: &CVec, m: &CMat, grad: &mut [f64]) -> f64 {
    let n = h.len();
    let v = m * h.conjugate();
    let mut q = 0.0;
    for i in 0..n {
        q += (h[i] * v[i]).re;
        grad[i] = 2.0 * (hx[i] * v[i]).re;
        grad[n + i] = 2.0 * (hz[i] * v[i]).re;
    }
    q
}

/// Every `log2` term of the pair margins with its gradient.
///
/// Order: `A_k` (K), `B_k` (K), `C_{l|k}` (L·K, `l`-major), `D_l` (L).
struct LogTerms {
    values: Vec<f64>,
    grads: Vec<DVector<f64>>,
}

impl FaProblem<'_> {
    fn log_terms(&self, u: &DVector<f64>) -> Result<LogTerms> {
        let tx = self.tx.with_positions(u.as_slice());
        let (kk, ll) = (self.users(), self.targets());
        let dim = u.len();
        let mut values = Vec::with_capacity(2 * kk + ll * kk + ll);
        let mut grads = Vec::with_capacity(values.capacity());
        let mut g_rx = vec![0.0; dim];
        let mut g_own = vec![0.0; dim];
        let mut push = |v: f64, g: DVector<f64>| {
            values.push(v.log2());
            grads.push(g / (v * LN_2));
        };
        let mut b_terms = Vec::with_capacity(kk);
        for (k, user) in self.placement.users.iter().enumerate() {
            let (h, hx, hz) = user_channel_with_jacobian(user, &tx)?;
            let a = form_with_grad(&h, &hx, &hz, &self.rx_cov, &mut g_rx) + self.sigma_c2;
            let own = form_with_grad(&h, &hx, &hz, &self.w[k], &mut g_own);
            let ga = DVector::from_column_slice(&g_rx);
            let gb = &ga - DVector::from_column_slice(&g_own);
            push(a, ga);
            b_terms.push((a - own, gb));
        }
        for (b, gb) in b_terms {
            push(b, gb);
        }
        let mut d_terms = Vec::with_capacity(ll);
        for target in &self.placement.targets {
            let (h, hx, hz) = target_channel_with_jacobian(target, &tx)?;
            let d = form_with_grad(&h, &hx, &hz, &self.rx_cov, &mut g_rx) + self.sigma_c2;
            let gd = DVector::from_column_slice(&g_rx);
            for k in 0..kk {
                let leak = form_with_grad(&h, &hx, &hz, &self.w[k], &mut g_own);
                push(d - leak, &gd - DVector::from_column_slice(&g_own));
            }
            d_terms.push((d, gd));
        }
        for (d, gd) in d_terms {
            push(d, gd);
        }
        Ok(LogTerms { values, grads })
    }

    fn index_a(&self, k: usize) -> usize {
        k
    }

    fn index_b(&self, k: usize) -> usize {
        self.users() + k
    }

    fn index_c(&self, k: usize, l: usize) -> usize {
        2 * self.users() + l * self.users() + k
    }

    fn index_d(&self, l: usize) -> usize {
        2 * self.users() + self.targets() * self.users() + l
    }

    /// `(ι/ρ_k)·(log2 A − log2 B + log2 C − log2 D)` for every pair, `k`-major.
    fn pair_margins(&self, terms: &LogTerms, with_grad: bool) -> (Vec<f64>, Vec<DVector<f64>>) {
        let (kk, ll) = (self.users(), self.targets());
        let mut m = Vec::with_capacity(kk * ll);
        let mut g = Vec::new();
        for k in 0..kk {
            for l in 0..ll {
                let (a, b, c, d) = (self.index_a(k), self.index_b(k), self.index_c(k, l), self.index_d(l));
                let v = &terms.values;
                m.push(self.scale[k] * (v[a] - v[b] + v[c] - v[d]));
                if with_grad {
                    let gr = &terms.grads;
                    g.push((&gr[a] - &gr[b] + &gr[c] - &gr[d]) * self.scale[k]);
                }
            }
        }
        (m, g)
    }

    fn zero_fixed(&self, g: &mut DVector<f64>) {
        let free = self.free_coordinates();
        for i in 0..g.len() {
            if !free.contains(&i) {
                g[i] = 0.0;
            }
        }
    }
}

/// Worst-case secrecy rate `min_k S_k` with channels recomputed at `u`.
pub fn fa_objective(u: &DVector<f64>, fp: &FaProblem) -> Result<f64> {
    let terms = fp.log_terms(u)?;
    let (m, _) = fp.pair_margins(&terms, false);
    Ok(m.into_iter().fold(f64::INFINITY, f64::min).max(0.0))
}

fn softmin(m: &[f64], beta: f64) -> (f64, Vec<f64>) {
    let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = m.iter().map(|v| (-beta * (v - lo)).exp()).collect();
    let s: f64 = e.iter().sum();
    (lo - s.ln() / beta, e.iter().map(|x| x / s).collect())
}

/// Soft-min (sharpness `β`) of the pair margins.
pub fn fa_smooth_objective(u: &DVector<f64>, fp: &FaProblem) -> Result<f64> {
    let terms = fp.log_terms(u)?;
    let (m, _) = fp.pair_margins(&terms, false);
    Ok(softmin(&m, fp.beta).0)
}

/// Analytic gradient of [`fa_smooth_objective`]; fixed coordinates are zero.
pub fn fa_gradient(u: &DVector<f64>, fp: &FaProblem) -> Result<DVector<f64>> {
    Ok(fp.value_grad(u)?.1)
}

impl SmoothObjective for FaProblem<'_> {
    fn value(&self, u: &DVector<f64>) -> Result<f64> {
        fa_smooth_objective(u, self)
    }

    fn value_grad(&self, u: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let terms = self.log_terms(u)?;
        let (m, gm) = self.pair_margins(&terms, true);
        let (v, pi) = softmin(&m, self.beta);
        let mut g = DVector::zeros(u.len());
        for (p, gi) in pi.iter().zip(&gm) {
            g.axpy(*p, gi, 1.0);
        }
        self.zero_fixed(&mut g);
        Ok((v, g))
    }
}

/// Componentwise clamp of every element into its box.
pub fn project(u: &DVector<f64>, tx: &TxArray) -> DVector<f64> {
    let n = tx.len();
    let mut out = u.clone();
    for (i, b) in tx.boxes.iter().enumerate() {
        out[i] = u[i].min(b.x_max).max(b.x_min);
        out[n + i] = u[n + i].min(b.z_max).max(b.z_min);
    }
    out
}

/// Inverse-Hessian BFGS update for minimisation with `s = Δu`, `y = Δ∇`.
///
/// Returns the input unchanged (and `false`) when `yᵀs ≤ curvature_eps`.
pub fn bfgs_update(
    h_inv: &DMatrix<f64>,
    delta_u: &DVector<f64>,
    delta_grad: &DVector<f64>,
    curvature_eps: f64,
) -> (DMatrix<f64>, bool) {
    let ys = delta_grad.dot(delta_u);
    if !(ys > curvature_eps) {
        return (h_inv.clone(), false);
    }
    let n = h_inv.nrows();
    let rho = 1.0 / ys;
    let left = DMatrix::identity(n, n) - delta_u * delta_grad.transpose() * rho;
    let mut h = &left * h_inv * left.transpose() + delta_u * delta_u.transpose() * rho;
    h = (&h + h.transpose()) * 0.5;
    (h, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub tau: f64,
    pub u: DVector<f64>,
    pub value: f64,
    /// `τ` fell below `τ_min` without sufficient increase.
    pub stalled: bool,
}

/// Largest `τ = τ₀·shrinkⁿ` with `f(P(u+τd)) ≥ f(u) + c·∇f·(P(u+τd) − u)`.
pub fn backtracking_search(
    f: impl Fn(&DVector<f64>) -> Result<f64>,
    proj: impl Fn(&DVector<f64>) -> DVector<f64>,
    u: &DVector<f64>,
    f_u: f64,
    direction: &DVector<f64>,
    grad: &DVector<f64>,
    params: &LineSearchParams,
) -> Result<LineSearchResult> {
    let mut tau = params.tau_init;
    while tau >= params.tau_min {
        let cand = proj(&(u + direction * tau));
        let step = &cand - u;
        let gain = grad.dot(&step);
        if gain > 0.0 {
            let fc = f(&cand)?;
            if fc >= f_u + params.armijo_c * gain {
                return Ok(LineSearchResult { tau, u: cand, value: fc, stalled: false });
            }
        }
        tau *= params.shrink_factor;
    }
    Ok(LineSearchResult { tau: params.tau_min, u: u.clone(), value: f_u, stalled: true })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsReport {
    pub state: PositionState,
    /// Objective after each iteration, starting with the initial value.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub stalled: bool,
    pub skipped_updates: usize,
    pub elapsed: Duration,
}

/// Projected BFGS ascent `u ← P(u + τ·H·∇f)` with backtracking.
pub fn projected_bfgs(
    objective: &impl SmoothObjective,
    proj: impl Fn(&DVector<f64>) -> DVector<f64>,
    u0: &DVector<f64>,
    params: &LineSearchParams,
    max_epochs: usize,
    grad_tol: f64,
    curvature_eps: f64,
) -> Result<BfgsReport> {
    let start = Instant::now();
    let n = u0.len();
    let u = proj(u0);
    let (value, grad) = objective.value_grad(&u)?;
    let mut state = PositionState { u, h_inv: DMatrix::identity(n, n), value, grad };
    let mut trace = vec![state.value];
    let (mut iterations, mut stalled, mut skipped) = (0, false, 0);
    let pg_norm = |s: &PositionState| (proj(&(&s.u + &s.grad)) - &s.u).norm();
    while iterations < max_epochs && pg_norm(&state) >= grad_tol {
        let mut dir = &state.h_inv * &state.grad;
        let probe = proj(&(&state.u + &dir * params.tau_init)) - &state.u;
        if !(state.grad.dot(&probe) > 0.0) {
            state.h_inv = DMatrix::identity(n, n);
            dir = state.grad.clone();
        }
        let f = |x: &DVector<f64>| objective.value(x);
        let ls = backtracking_search(f, &proj, &state.u, state.value, &dir, &state.grad, params)?;
        iterations += 1;
        if ls.stalled {
            stalled = true;
            break;
        }
        let (value, grad) = objective.value_grad(&ls.u)?;
        let s = &ls.u - &state.u;
        // curvature of −f
        let y = &state.grad - &grad;
        let (h, applied) = bfgs_update(&state.h_inv, &s, &y, curvature_eps);
        if !applied {
            skipped += 1;
        }
        state = PositionState { u: ls.u, h_inv: h, value, grad };
        trace.push(state.value);
    }
    Ok(BfgsReport { state, trace, iterations, stalled, skipped_updates: skipped, elapsed: start.elapsed() })
}

/// Objective in wavelength units `v = u/λ`.
struct InWavelengths<'a, 'b> {
    fp: &'a FaProblem<'b>,
    lambda: f64,
}

impl SmoothObjective for InWavelengths<'_, '_> {
    fn value(&self, v: &DVector<f64>) -> Result<f64> {
        self.fp.value(&(v * self.lambda))
    }

    fn value_grad(&self, v: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (f, g) = self.fp.value_grad(&(v * self.lambda))?;
        Ok((f, g * self.lambda))
    }
}

/// Projected BFGS on the antenna positions with parameters from `tol`.
///
/// The iteration runs in wavelength units; the returned state is in metres.
pub fn optimize_positions(fp: &FaProblem, u0: &DVector<f64>, tol: &Tolerances) -> Result<BfgsReport> {
    let lambda = fp.tx.wavelength;
    let scaled = InWavelengths { fp, lambda };
    let mut rep = projected_bfgs(
        &scaled,
        |v| project(&(v * lambda), fp.tx) / lambda,
        &(u0 / lambda),
        &LineSearchParams::from_tolerances(tol),
        tol.bfgs_max_epochs,
        tol.bfgs_grad_tol,
        tol.curvature_eps,
    )?;
    let st = &mut rep.state;
    st.u = project(&(&st.u * lambda), fp.tx);
    st.grad /= lambda;
    st.h_inv *= lambda * lambda;
    Ok(rep)
}

/// Curvature bounds used by the benchmark surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct Curvatures {
    /// Per log term: `λ_max(−∇²)` for terms entering positively (`A`, `C`) and
    /// `λ_max(∇²)` for terms entering negatively (`B`, `D`), clipped at 0.
    pub per_term: Vec<f64>,
    /// `(ι/ρ_k)·(ε_A + δ_B + ε_C + δ_D)` per pair, `k`-major.
    pub per_pair: Vec<f64>,
}

/// Second-order surrogate of the pair margins around `u_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorSurrogate {
    pub center: DVector<f64>,
    pub values: Vec<f64>,
    pub grads: Vec<DVector<f64>>,
    pub curvature: Curvatures,
}

impl TaylorSurrogate {
    /// `min_{k,l}` of the surrogate margins at `u`.
    pub fn value(&self, u: &DVector<f64>) -> f64 {
        let d = u - &self.center;
        let sq = d.norm_squared();
        self.values
            .iter()
            .zip(&self.grads)
            .zip(&self.curvature.per_pair)
            .map(|((v, g), k)| v + g.dot(&d) - 0.5 * k * sq)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Build the benchmark surrogate with curvatures from central-difference
/// Hessians (of analytic gradients) of each log term.
pub fn taylor_surrogate(u_e: &DVector<f64>, fp: &FaProblem, fd_step: f64) -> Result<TaylorSurrogate> {
    let free = fp.free_coordinates();
    let terms = fp.log_terms(u_e)?;
    let n_terms = terms.values.len();
    let d = free.len();
    let mut hess: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); n_terms];
    for (j, &cj) in free.iter().enumerate() {
        let mut up = u_e.clone();
        up[cj] += fd_step;
        let mut dn = u_e.clone();
        dn[cj] -= fd_step;
        let (tp, tm) = (fp.log_terms(&up)?, fp.log_terms(&dn)?);
        for t in 0..n_terms {
            for (i, &ci) in free.iter().enumerate() {
                hess[t][(i, j)] = (tp.grads[t][ci] - tm.grads[t][ci]) / (2.0 * fd_step);
            }
        }
    }
    let (kk, ll) = (fp.users(), fp.targets());
    let mut per_term = vec![0.0; n_terms];
    for (t, h) in hess.into_iter().enumerate() {
        if d == 0 {
            break;
        }
        let sym = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym).eigenvalues;
        let positive_term = t < kk || (2 * kk..2 * kk + ll * kk).contains(&t);
        per_term[t] = if positive_term {
            (-eig.min()).max(0.0)
        } else {
            eig.max().max(0.0)
        };
    }
    let mut per_pair = Vec::with_capacity(kk * ll);
    for k in 0..kk {
        for l in 0..ll {
            let sum = per_term[fp.index_a(k)]
                + per_term[fp.index_b(k)]
                + per_term[fp.index_c(k, l)]
                + per_term[fp.index_d(l)];
            per_pair.push(fp.scale[k] * sum);
        }
    }
    let (values, mut grads) = fp.pair_margins(&terms, true);
    for g in &mut grads {
        fp.zero_fixed(g);
    }
    Ok(TaylorSurrogate { center: u_e.clone(), values, grads, curvature: Curvatures { per_term, per_pair } })
}

/// One benchmark update: maximise the surrogate's worst pair over the boxes.
pub fn benchmark_step(u_e: &DVector<f64>, fp: &FaProblem, fd_step: f64) -> Result<DVector<f64>> {
    let sur = taylor_surrogate(u_e, fp, fd_step)?;
    let free = fp.free_coordinates();
    if free.is_empty() || sur.grads.iter().all(|g| g.iter().all(|v| *v == 0.0)) {
        return Ok(u_e.clone());
    }
    let d = free.len();
    let zeta = d;
    let mut prog = ConvexProgram::new(VarLayout::new(vec![], d + 1));
    prog.objective = Linear::single(zeta, 1.0);
    for (p, ((v, g), kappa)) in sur.values.iter().zip(&sur.grads).zip(&sur.curvature.per_pair).enumerate() {
        let mut lin: Vec<(usize, f64)> = free.iter().enumerate().map(|(j, &c)| (j, g[c])).collect();
        lin.push((zeta, -1.0));
        prog.add(ConcaveQuadratic {
            name: format!("pair[{p}]"),
            constant: *v,
            linear: Linear::new(lin),
            center: (0..d).map(|j| (j, 0.0)).collect(),
            eta: *kappa,
        });
    }
    let n = fp.tx.len();
    let bounds = |c: usize| {
        let b = &fp.tx.boxes[c % n];
        if c < n {
            (b.x_min, b.x_max)
        } else {
            (b.z_min, b.z_max)
        }
    };
    let mut x0 = DVector::zeros(d + 1);
    for (j, &c) in free.iter().enumerate() {
        let (lo, hi) = bounds(c);
        prog.add(Affine::new(format!("box lo[{c}]"), Linear::single(j, 1.0), u_e[c] - lo));
        prog.add(Affine::new(format!("box hi[{c}]"), Linear::single(j, -1.0), hi - u_e[c]));
        x0[j] = 1e-3 * (0.5 * (lo + hi) - u_e[c]);
    }
    let mut probe = u_e.clone();
    for (j, &c) in free.iter().enumerate() {
        probe[c] += x0[j];
    }
    x0[zeta] = sur.value(&probe) - 1.0;
    let res = prog.solve(&x0, &SolverOptions { kkt_tol: 1e-9, ..SolverOptions::default() })?;
    let mut u = u_e.clone();
    for (j, &c) in free.iter().enumerate() {
        u[c] += res.x[j];
    }
    let u = project(&u, fp.tx);
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("benchmark step produced non-finite positions".into()));
    }
    Ok(u)
}
