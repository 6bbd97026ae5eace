//! Beamforming and CPU allocation by successive convex approximation over
//! relaxed (PSD) beamformers, with Gaussian randomisation for rank-one
//! recovery.
//!
//! Decision variables: `W_1..W_K` and the sensing covariance `R`, so that
//! `R_x = R + Σ W_k`; scalars `ζ`, CPU frequencies `f_l` (GHz) and cubic
//! epigraph variables `t_l` (mW).

use std::f64::consts::LN_2;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelSet;
use crate::error::{Error, InfeasibilityReport, Result};
use crate::linalg::{c, herm_eigen, hermitian_part, outer, psd_sqrt, row_gram, trace_re, CMat, CVec};
use crate::scenario::SystemConfig;
use crate::semantics::{compute_power, process_power, secrecy_rates};
use crate::sensing::{complex_gaussian, crb_extended};
use crate::solver::{
    Affine, ConvexProgram, CubicEpigraph, InverseTrace, Linear, LogAffine, SolverOptions, VarLayout,
};

const GHZ: f64 = 1e9;

/// Fixed data of one beamforming sub-problem.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub config: &'a SystemConfig,
    pub channels: &'a ChannelSet,
    pub rho: &'a [f64],
    pub iota: f64,
}

impl Problem<'_> {
    fn users(&self) -> usize {
        self.channels.users.len()
    }

    fn targets(&self) -> usize {
        self.channels.targets.len()
    }

    fn n_t(&self) -> usize {
        self.channels.users[0].len()
    }

    /// Bound `c` on `Tr(R_x⁻¹)` equivalent to `CRB ≤ ξ`; `None` when unbounded.
    pub fn inverse_trace_bound(&self) -> Option<f64> {
        let cfg = self.config;
        if !cfg.xi.is_finite() {
            return None;
        }
        Some(cfg.xi * cfg.frames as f64 / (cfg.sigma_r2 * cfg.n_r() as f64))
    }

    fn p_comp(&self) -> Result<f64> {
        compute_power(self.rho, self.config.nu)
    }

    /// `κ·Q·10²⁷`: cubic coefficient for frequencies in GHz.
    fn cubic_coef(&self) -> f64 {
        self.config.kappa * self.config.cycles_per_bit * GHZ.powi(3)
    }
}

/// Relaxed beamforming state.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub w: Vec<CMat>,
    /// Rank-one beamformers after randomisation, if recovered.
    pub w_vec: Option<Vec<CVec>>,
    /// Sensing covariance `R`.
    pub r: CMat,
    /// CPU frequency per target, Hz.
    pub cpu: Vec<f64>,
    /// Slack variable of the last sub-problem (its optimal value).
    pub zeta: f64,
    pub kkt_residual: f64,
    pub newton_steps: usize,
    /// Names of constraints with a non-negligible multiplier.
    pub active: Vec<String>,
    /// Linearisation of the sub-problem that produced this state.
    pub terms: Option<LinearizedTerms>,
}

impl BeamformingSolution {
    /// `R_x = R + Σ W_k`.
    pub fn rx_cov(&self) -> CMat {
        let mut m = self.r.clone();
        for w in &self.w {
            m += w;
        }
        m
    }

    /// Power on the communication and sensing signal plus processing power.
    pub fn radiated_power(&self) -> f64 {
        trace_re(&self.rx_cov())
    }
}

/// Affine pieces of the log terms of every `(k, l)` pair and their
/// expansion-point values.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedTerms {
    pub sigma2: f64,
    /// `Q_k = h̄_k h_kᵀ`.
    pub q_users: Vec<CMat>,
    pub q_targets: Vec<CMat>,
    /// `B_{k,e}`: interference plus noise at user `k`.
    pub b_e: Vec<f64>,
    /// `D_{l,e}`: total received power plus noise at target `l`.
    pub d_e: Vec<f64>,
}

/// Quadratic forms needed by the four log terms at `(W, R)`.
struct Powers {
    /// `h_k R_x h_kᴴ + σ²`
    a: Vec<f64>,
    /// `h_k W_k h_kᴴ`
    own: Vec<f64>,
    /// `h_l R_x h_lᴴ + σ²`
    d: Vec<f64>,
    /// `h_l W_k h_lᴴ`, `[l][k]`
    leak: Vec<Vec<f64>>,
}

impl LinearizedTerms {
    fn powers(&self, w: &[CMat], r: &CMat) -> Powers {
        let mut rx = r.clone();
        for wk in w {
            rx += wk;
        }
        let tr = |q: &CMat, m: &CMat| (m * q).trace().re;
        Powers {
            a: self.q_users.iter().map(|q| tr(q, &rx) + self.sigma2).collect(),
            own: self.q_users.iter().zip(w).map(|(q, wk)| tr(q, wk)).collect(),
            d: self.q_targets.iter().map(|q| tr(q, &rx) + self.sigma2).collect(),
            leak: self.q_targets.iter().map(|q| w.iter().map(|wk| tr(q, wk)).collect()).collect(),
        }
    }

    /// Concave minorant `g_{k,l}` (bits) of `log2(1+γ_k) − log2(1+Γ_{l|k})`.
    pub fn minorant(&self, k: usize, l: usize, w: &[CMat], r: &CMat) -> f64 {
        let p = self.powers(w, r);
        self.minorant_from(&p, k, l)
    }

    fn minorant_from(&self, p: &Powers, k: usize, l: usize) -> f64 {
        let b = p.a[k] - p.own[k];
        let cc = p.d[l] - p.leak[l][k];
        let lin = |v: f64, e: f64| e.log2() + (v - e) / (e * LN_2);
        p.a[k].log2() - lin(b, self.b_e[k]) + cc.log2() - lin(p.d[l], self.d_e[l])
    }

    /// Exact spectral difference for the pair.
    pub fn exact(&self, k: usize, l: usize, w: &[CMat], r: &CMat) -> f64 {
        let p = self.powers(w, r);
        let b = p.a[k] - p.own[k];
        let cc = p.d[l] - p.leak[l][k];
        p.a[k].log2() - b.log2() + cc.log2() - p.d[l].log2()
    }
}

/// First-order expansion of the convex log terms at `(W_e, R_e)`.
pub fn linearize(channels: &ChannelSet, sigma_c2: f64, w: &[CMat], r: &CMat) -> LinearizedTerms {
    let q_users: Vec<CMat> = channels.users.iter().map(row_gram).collect();
    let q_targets: Vec<CMat> = channels.targets.iter().map(row_gram).collect();
    let mut terms = LinearizedTerms { sigma2: sigma_c2, q_users, q_targets, b_e: vec![], d_e: vec![] };
    let p = terms.powers(w, r);
    terms.b_e = p.a.iter().zip(&p.own).map(|(a, o)| a - o).collect();
    terms.d_e = p.d.clone();
    terms
}

/// Pair margins `min_{k,l} (ι/ρ_k)·(log2(1+γ_k) − log2(1+Γ_{l|k}))`, unclamped.
pub fn exact_margin(pb: &Problem, w: &[CMat], r: &CMat) -> f64 {
    let terms = linearize(pb.channels, pb.config.sigma_c2, w, r);
    let mut m = f64::INFINITY;
    for k in 0..pb.users() {
        for l in 0..pb.targets() {
            m = m.min(pb.iota / pb.rho[k] * terms.exact(k, l, w, r));
        }
    }
    m
}

/// Worst-case secrecy rate `min_k S_k`.
pub fn exact_objective(pb: &Problem, w: &[CMat], r: &CMat) -> f64 {
    secrecy_rates(pb.channels, w, r, pb.rho, pb.iota, pb.config.sigma_c2)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// The convex sub-problem together with its variable map.
pub struct ScaProgram {
    pub program: ConvexProgram,
    pub users: usize,
    pub targets: usize,
    pub n_t: usize,
    /// Per scalar constraint, the magnitude used to judge whether it is active.
    pub scales: Vec<f64>,
    pub zeta: usize,
    pub f0: usize,
    pub t0: usize,
}

impl ScaProgram {
    fn layout(&self) -> &VarLayout {
        &self.program.layout
    }

    /// Decision vector for a state; `ζ` is set to `zeta`.
    pub fn pack(&self, w: &[CMat], r: &CMat, cpu_hz: &[f64], t: &[f64], zeta: f64) -> DVector<f64> {
        let lay = self.layout();
        let mut x = DVector::zeros(lay.dim());
        for (k, wk) in w.iter().enumerate() {
            lay.set_block(x.as_mut_slice(), k, wk);
        }
        lay.set_block(x.as_mut_slice(), self.users, r);
        x[self.zeta] = zeta;
        for l in 0..self.targets {
            x[self.f0 + l] = cpu_hz[l] / GHZ;
            x[self.t0 + l] = t[l];
        }
        x
    }

    pub fn unpack_w(&self, x: &[f64]) -> (Vec<CMat>, CMat) {
        let lay = self.layout();
        let w = (0..self.users).map(|k| lay.block(x, k)).collect();
        (w, lay.block(x, self.users))
    }

    pub fn unpack_cpu(&self, x: &[f64]) -> Vec<f64> {
        (0..self.targets).map(|l| x[self.f0 + l] * GHZ).collect()
    }

    /// Smallest pair-constraint value without the `ζ` term.
    pub fn surrogate(&self, x: &[f64]) -> f64 {
        let mut xs = x.to_vec();
        xs[self.zeta] = 0.0;
        self.program.constraints[..self.users * self.targets]
            .iter()
            .map(|c| c.value(&xs))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Build the convex sub-problem for fixed `ρ`, positions and expansion point.
pub fn assemble_subproblem(terms: &LinearizedTerms, pb: &Problem) -> Result<ScaProgram> {
    let (kk, ll, n) = (pb.users(), pb.targets(), pb.n_t());
    let cfg = pb.config;
    let layout = VarLayout::new(vec![n; kk + 1], 1 + 2 * ll);
    let zeta = layout.scalar(0);
    let f0 = layout.scalar(1);
    let t0 = layout.scalar(1 + ll);
    let mut prog = ConvexProgram::new(layout.clone());
    prog.objective = Linear::single(zeta, 1.0);
    prog.psd_blocks = (0..=kk).collect();
    let mut scales = Vec::new();

    let all_blocks = |q: &CMat| -> Linear {
        let mut lin = Linear::default();
        for b in 0..=kk {
            lin.extend(layout.inner_functional(b, q, 1.0));
        }
        lin
    };
    let sig = terms.sigma2;
    for k in 0..kk {
        let a = all_blocks(&terms.q_users[k]);
        let mut b = a.clone();
        b.extend(layout.inner_functional(k, &terms.q_users[k], -1.0));
        for l in 0..ll {
            let d = all_blocks(&terms.q_targets[l]);
            let mut cl = d.clone();
            cl.extend(layout.inner_functional(k, &terms.q_targets[l], -1.0));
            let s = pb.iota / pb.rho[k];
            let (be, de) = (terms.b_e[k], terms.d_e[l]);
            // s·[log2 A − (log2 B_e + (B − B_e)/(B_e ln2)) + log2 C − (log2 D_e + (D − D_e)/(D_e ln2))] − ζ
            let mut linear = Linear::default();
            for &(i, v) in &b.terms {
                linear.terms.push((i, -s * v / (be * LN_2)));
            }
            for &(i, v) in &d.terms {
                linear.terms.push((i, -s * v / (de * LN_2)));
            }
            linear.terms.push((zeta, -1.0));
            let constant = -s * (be.log2() + de.log2()) + s * (2.0 - sig / be - sig / de) / LN_2;
            prog.add(LogAffine::new(
                format!("secrecy[{k},{l}]"),
                vec![(s / LN_2, a.clone(), sig), (s / LN_2, cl, sig)],
                linear,
                constant,
            ));
            scales.push(1.0);
        }
    }

    if let Some(bound) = pb.inverse_trace_bound() {
        prog.add(InverseTrace {
            name: "crb".into(),
            layout: layout.clone(),
            blocks: (0..=kk).collect(),
            bound,
        });
        scales.push(bound);
    }

    let p_comp = pb.p_comp()?;
    let mut power = Linear::default();
    for b in 0..=kk {
        power.extend(layout.trace_functional(b, -1.0));
    }
    for l in 0..ll {
        power.terms.push((t0 + l, -1.0));
    }
    prog.add(Affine::new("power", power, cfg.p_t - p_comp));
    scales.push(cfg.p_t);

    let f_min = cfg.min_cpu_frequency() / GHZ;
    let coef = pb.cubic_coef();
    for l in 0..ll {
        prog.add(CubicEpigraph { name: format!("process[{l}]"), t: t0 + l, f: f0 + l, coef });
        scales.push(coef * f_min.powi(3) + 1e-12);
        prog.add(Affine::new(format!("latency[{l}]"), Linear::single(f0 + l, 1.0), -f_min));
        scales.push(f_min);
    }
    let budget = Linear::new((0..ll).map(|l| (f0 + l, -1.0)).collect());
    prog.add(Affine::new("cpu budget", budget, cfg.f_max / GHZ));
    scales.push(cfg.f_max / GHZ);

    // static feasibility: the latency floor must fit the CPU budget and leave power
    let floor_power = ll as f64 * coef * f_min.powi(3);
    let spare = cfg.p_t - p_comp - floor_power;
    if !(spare > 0.0) {
        return Err(Error::Infeasible(InfeasibilityReport {
            constraint: "power".into(),
            slack: spare,
            detail: format!(
                "extraction ({p_comp:.3} mW) and processing at the latency floor ({floor_power:.3} mW) exhaust P_t"
            ),
        }));
    }
    if let Some(bound) = pb.inverse_trace_bound() {
        let need = (n * n) as f64 / bound;
        if need >= spare {
            return Err(Error::Infeasible(InfeasibilityReport {
                constraint: "crb".into(),
                slack: spare - need,
                detail: format!("the CRB bound needs at least {need:e} mW of transmit power"),
            }));
        }
    }
    if ll as f64 * f_min >= cfg.f_max / GHZ {
        return Err(Error::Infeasible(InfeasibilityReport {
            constraint: "cpu budget".into(),
            slack: cfg.f_max / GHZ - ll as f64 * f_min,
            detail: "latency floors exhaust the CPU budget".into(),
        }));
    }
    Ok(ScaProgram { program: prog, users: kk, targets: ll, n_t: n, scales, zeta, f0, t0 })
}

/// Strictly interior starting state for the given `ρ`.
///
/// CPU frequencies sit just above the latency floor; the remaining power is
/// split between isotropic `W_k` and `R`.
pub fn interior_point(pb: &Problem) -> Result<BeamformingSolution> {
    let cfg = pb.config;
    let (kk, ll, n) = (pb.users(), pb.targets(), pb.n_t());
    let f_min = cfg.min_cpu_frequency();
    let head = (cfg.f_max / ll as f64 - f_min).max(0.0);
    let f = f_min + (1e-3 * f_min).min(0.5 * head);
    let t = process_power(f, cfg.cycles_per_bit, cfg.kappa) * (1.0 + 1e-3) + 1e-9;
    let avail = cfg.p_t - pb.p_comp()? - ll as f64 * t;
    let crb_need = pb.inverse_trace_bound().map(|b| (n * n) as f64 / b).unwrap_or(0.0);
    if !(avail > crb_need) {
        return Err(Error::Infeasible(InfeasibilityReport {
            constraint: "power".into(),
            slack: avail - crb_need,
            detail: "no power left for the transmit covariance".into(),
        }));
    }
    let p0 = (0.5 * avail).max(0.5 * (crb_need + avail));
    let id = CMat::identity(n, n);
    Ok(BeamformingSolution {
        w: vec![&id * c(p0 / (2.0 * (kk * n) as f64), 0.0); kk],
        w_vec: None,
        r: &id * c(p0 / (2.0 * n as f64), 0.0),
        cpu: vec![f; ll],
        zeta: f64::NAN,
        kkt_residual: f64::NAN,
        newton_steps: 0,
        active: Vec::new(),
        terms: None,
    })
}

fn epigraph_values(pb: &Problem, cpu: &[f64]) -> Vec<f64> {
    cpu.iter()
        .map(|f| process_power(*f, pb.config.cycles_per_bit, pb.config.kappa) * (1.0 + 1e-9) + 1e-12)
        .collect()
}

/// Solve one convex sub-problem from a strictly feasible start.
pub fn solve_convex(sp: &ScaProgram, start: &DVector<f64>, kkt_tol: f64) -> Result<BeamformingSolution> {
    let opts = SolverOptions { kkt_tol, ..SolverOptions::default() };
    let res = sp.program.solve(start, &opts)?;
    let x = res.x.as_slice();
    let (w, r) = sp.unpack_w(x);
    let cpu = sp.unpack_cpu(x);
    let obj = res.objective.abs().max(1.0);
    let active = sp
        .program
        .constraints
        .iter()
        .zip(&res.multipliers)
        .zip(&sp.scales)
        .filter(|((_, m), s)| *m * *s >= 1e-6 * obj)
        .map(|((c, _), _)| c.name().to_string())
        .collect();
    Ok(BeamformingSolution {
        w,
        w_vec: None,
        r,
        cpu,
        zeta: res.objective,
        kkt_residual: res.kkt_residual,
        newton_steps: res.newton_steps,
        active,
        terms: None,
    })
}

/// One SCA epoch record.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaEpoch {
    /// Optimal `ζ` of the sub-problem.
    pub zeta: f64,
    /// Exact pair margin at the sub-problem solution.
    pub exact: f64,
    pub newton_steps: usize,
    /// Multiple of the sub-problem step that was kept (1 without extrapolation).
    pub step: f64,
}

/// Successive convex approximation from `start` (any feasible state).
///
/// Each epoch re-linearises at the current state and solves the convex
/// sub-problem; a sub-problem whose exact objective drops is rejected.
/// The step to the sub-problem solution is then stretched by 2, 4, 8, ...
/// while the stretched point stays feasible and its exact objective keeps
/// rising.
pub fn sca_iterate(
    pb: &Problem,
    start: &BeamformingSolution,
    max_epochs: usize,
    sca_tol: f64,
) -> Result<(BeamformingSolution, Vec<ScaEpoch>)> {
    let kkt_tol = pb.config.tol.kkt_tol;
    let interior = interior_point(pb)?;
    let mut cur = start.clone();
    let mut cur_exact = exact_margin(pb, &cur.w, &cur.r);
    let mut trace = Vec::new();
    for _ in 0..max_epochs.max(1) {
        let terms = linearize(pb.channels, pb.config.sigma_c2, &cur.w, &cur.r);
        let sp = assemble_subproblem(&terms, pb)?;
        let x0 = start_point(&sp, pb, &interior);
        let mut sol = solve_convex(&sp, &x0, kkt_tol)?;
        sol.terms = Some(terms);
        let mut exact = exact_margin(pb, &sol.w, &sol.r);
        let mut step = 1.0;
        if exact >= cur_exact {
            if let Some((w, r, e, g)) = extrapolate(pb, &cur, &sol, exact)? {
                (sol.w, sol.r, exact, step) = (w, r, e, g);
            }
        }
        trace.push(ScaEpoch { zeta: sol.zeta, exact, newton_steps: sol.newton_steps, step });
        if exact + kkt_tol * exact.abs().max(1.0) < cur_exact {
            break;
        }
        let gain = exact - cur_exact;
        cur = sol;
        cur_exact = exact;
        if gain.abs() < sca_tol {
            break;
        }
    }
    if cur.zeta.is_nan() {
        cur.zeta = cur_exact;
    }
    Ok((cur, trace))
}

/// Best feasible point `cur + γ·(sol − cur)`, `γ = 2, 4, ...`, whose exact
/// margin beats `exact`; CPU frequencies stay at the sub-problem's.
#[allow(clippy::type_complexity)]
fn extrapolate(
    pb: &Problem,
    cur: &BeamformingSolution,
    sol: &BeamformingSolution,
    exact: f64,
) -> Result<Option<(Vec<CMat>, CMat, f64, f64)>> {
    let cfg = pb.config;
    let process: f64 = sol.cpu.iter().map(|f| process_power(*f, cfg.cycles_per_bit, cfg.kappa)).sum();
    let avail = cfg.p_t - pb.p_comp()? - process;
    let dw: Vec<CMat> = sol.w.iter().zip(&cur.w).map(|(a, b)| a - b).collect();
    let dr = &sol.r - &cur.r;
    let mut best: Option<(Vec<CMat>, CMat, f64, f64)> = None;
    let mut best_exact = exact;
    let mut gamma = 2.0;
    while gamma <= 1024.0 {
        let g = c(gamma, 0.0);
        let mut w: Vec<CMat> = cur.w.iter().zip(&dw).map(|(b, d)| psd_part(&(b + d * g))).collect();
        let mut r = psd_part(&(&cur.r + &dr * g));
        let mut rx = r.clone();
        for wk in &w {
            rx += wk;
        }
        // back onto the power budget when clipping or rounding overshoots it
        let tr = trace_re(&rx);
        if tr > avail {
            let s = c(avail / tr * (1.0 - 1e-12), 0.0);
            w.iter_mut().for_each(|m| *m *= s);
            r *= s;
            rx *= s;
        }
        let feasible = avail > 0.0
            && (!cfg.xi.is_finite()
                || crb_extended(&rx, cfg.sigma_r2, cfg.frames, cfg.n_rx, cfg.n_rz).is_ok_and(|v| v <= cfg.xi));
        if !feasible {
            break;
        }
        let e = exact_margin(pb, &w, &r);
        if !(e > best_exact) {
            break;
        }
        best_exact = e;
        best = Some((w, r, e, gamma));
        gamma *= 2.0;
    }
    Ok(best)
}

/// Nearest PSD matrix (negative eigenvalues clipped).
fn psd_part(m: &CMat) -> CMat {
    let (vals, vecs) = herm_eigen(m);
    let mut scaled = vecs.clone();
    for (j, v) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v.max(0.0));
    }
    hermitian_part(&(&scaled * vecs.adjoint()))
}

/// Strictly feasible start: the interior point with `ζ` below every pair value.
fn start_point(sp: &ScaProgram, pb: &Problem, interior: &BeamformingSolution) -> DVector<f64> {
    let mut x = sp.pack(&interior.w, &interior.r, &interior.cpu, &epigraph_values(pb, &interior.cpu), 0.0);
    let s = sp.surrogate(x.as_slice());
    x[sp.zeta] = s - 0.1 * s.abs().max(1.0);
    x
}

/// Outcome of rank-one recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct Randomized {
    pub w_vec: Vec<CVec>,
    /// Sensing covariance of the candidate (after any CRB repair).
    pub r: CMat,
    /// Exact `min_k S_k` of the candidate.
    pub objective: f64,
    /// Worst pair value of the candidate under the relaxed solution's
    /// sub-problem; never above that sub-problem's `ζ`.
    pub surrogate: f64,
    /// Exact `min_k S_k` of the relaxed solution.
    pub relaxed_objective: f64,
    pub feasible: bool,
}

/// Draw rank-one candidates `w_k ~ CN(0, W_k)` rescaled to `Tr(W_k)`, keep `R`,
/// and return the best (by exact objective) candidate meeting the CRB bound.
///
/// Candidate 0 is the principal eigenvector of each `W_k`.
pub fn gaussian_randomize(
    pb: &Problem,
    sol: &BeamformingSolution,
    n_samples: usize,
    seed: u64,
) -> Result<Randomized> {
    let n = pb.n_t();
    let kk = pb.users();
    let roots: Vec<CMat> = sol.w.iter().map(psd_sqrt).collect();
    let powers: Vec<f64> = sol.w.iter().map(trace_re).collect();
    let principal: Vec<CVec> = sol
        .w
        .iter()
        .map(|w| {
            let (vals, vecs) = herm_eigen(w);
            let top = vals[n - 1].max(0.0);
            vecs.column(n - 1).into_owned() * c(top.sqrt(), 0.0)
        })
        .collect();
    let relaxed_objective = exact_objective(pb, &sol.w, &sol.r);
    let terms = sol
        .terms
        .clone()
        .unwrap_or_else(|| linearize(pb.channels, pb.config.sigma_c2, &sol.w, &sol.r));
    let surrogate = |w: &[CMat], r: &CMat| {
        let mut m = f64::INFINITY;
        for k in 0..kk {
            for l in 0..pb.targets() {
                m = m.min(pb.iota / pb.rho[k] * terms.minorant(k, l, w, r));
            }
        }
        m
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Randomized> = None;
    for s in 0..n_samples.max(1) {
        let cand: Vec<CVec> = if s == 0 {
            principal.clone()
        } else {
            (0..kk)
                .map(|k| {
                    let z = complex_gaussian(n, 1, 1.0, &mut rng).column(0).into_owned();
                    let v = &roots[k] * z;
                    let norm2 = v.norm_squared();
                    if norm2 > 0.0 {
                        v * c((powers[k] / norm2).sqrt(), 0.0)
                    } else {
                        v
                    }
                })
                .collect()
        };
        let Some((cand, r)) = repair_crb(pb, cand, &sol.r) else {
            continue;
        };
        let w: Vec<CMat> = cand.iter().map(outer).collect();
        let objective = exact_objective(pb, &w, &r);
        if best.as_ref().is_none_or(|b| objective > b.objective) {
            let surrogate = surrogate(&w, &r);
            best = Some(Randomized { w_vec: cand, r, objective, surrogate, relaxed_objective, feasible: true });
        }
    }
    Ok(best.unwrap_or(Randomized {
        w_vec: principal,
        r: sol.r.clone(),
        objective: f64::NAN,
        surrogate: f64::NAN,
        relaxed_objective,
        feasible: false,
    }))
}

/// Rank-one beamformers and sensing covariance meeting the CRB bound.
///
/// If `R + Σ w wᴴ` violates the bound, the whole transmit covariance is
/// blended with an isotropic one of equal power until it holds.
fn repair_crb(pb: &Problem, w_vec: Vec<CVec>, r: &CMat) -> Option<(Vec<CVec>, CMat)> {
    let cfg = pb.config;
    if !cfg.xi.is_finite() {
        return Some((w_vec, r.clone()));
    }
    let n = r.nrows();
    let mut rx = r.clone();
    for w in &w_vec {
        rx += outer(w);
    }
    let crb = |m: &CMat| crb_extended(m, cfg.sigma_r2, cfg.frames, cfg.n_rx, cfg.n_rz).unwrap_or(f64::INFINITY);
    if crb(&rx) <= cfg.xi {
        return Some((w_vec, r.clone()));
    }
    let iso = CMat::identity(n, n) * c(trace_re(&rx) / n as f64, 0.0);
    let mix = |a: f64| &rx * c(1.0 - a, 0.0) + &iso * c(a, 0.0);
    if crb(&mix(1.0)) > cfg.xi * (1.0 - 1e-8) {
        return None;
    }
    // a little inside the bound so the rebuilt covariance still meets it
    let target = cfg.xi * (1.0 - 1e-8);
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if crb(&mix(mid)) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let keep = (1.0 - hi).sqrt();
    let w_vec = w_vec.into_iter().map(|w| w * c(keep, 0.0)).collect();
    Some((w_vec, r * c(1.0 - hi, 0.0) + &iso * c(hi, 0.0)))
}

/// Gain of user `k` for a rank-one beamformer set (used by tests and grids).
pub fn rank_one_objective(pb: &Problem, w_vec: &[CVec], r: &CMat) -> f64 {
    let w: Vec<CMat> = w_vec.iter().map(outer).collect();
    exact_objective(pb, &w, r)
}

#[cfg(test)]
mod tests;
