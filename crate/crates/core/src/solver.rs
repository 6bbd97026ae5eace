//! Small dense primal log-barrier interior-point solver.
//!
//! Variables are a concatenation of Hermitian matrix blocks (in the real
//! coordinates of [`crate::linalg`]) followed by real scalars. The program
//! maximises a linear objective subject to
//!
//! * `X_b ⪰ 0` for selected blocks,
//! * general linear matrix inequalities,
//! * smooth concave scalar constraints `h(x) ≥ 0`.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::Solve;
use faer::{Accum, MatMut, MatRef, Par, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, InfeasibilityReport, Result};
use crate::linalg::{
    basis_quad, herm_dim, herm_to_svec, herm_to_svec_into, inv_pd, log_det_pd, min_eigenvalue,
    svec_to_herm, trace_re, CMat,
};

/// Layout of the decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VarLayout {
    blocks: Vec<usize>,
    offsets: Vec<usize>,
    n_scalars: usize,
    dim: usize,
}

impl VarLayout {
    pub fn new(blocks: Vec<usize>, n_scalars: usize) -> VarLayout {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut p = 0;
        for &n in &blocks {
            offsets.push(p);
            p += herm_dim(n);
        }
        VarLayout { blocks, offsets, n_scalars, dim: p + n_scalars }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_scalars(&self) -> usize {
        self.n_scalars
    }

    /// Matrix size of block `b`.
    pub fn block_size(&self, b: usize) -> usize {
        self.blocks[b]
    }

    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        self.offsets[b]..self.offsets[b] + herm_dim(self.blocks[b])
    }

    /// Index of scalar `s` in the decision vector.
    pub fn scalar(&self, s: usize) -> usize {
        debug_assert!(s < self.n_scalars);
        self.dim - self.n_scalars + s
    }

    pub fn block(&self, x: &[f64], b: usize) -> CMat {
        svec_to_herm(&x[self.block_range(b)], self.blocks[b])
    }

    pub fn set_block(&self, x: &mut [f64], b: usize, m: &CMat) {
        let r = self.block_range(b);
        herm_to_svec_into(m, &mut x[r]);
    }

    /// Coordinates of `Tr(X_b)` as a linear functional.
    pub fn trace_functional(&self, b: usize, coef: f64) -> Linear {
        let o = self.offsets[b];
        Linear::new((0..self.blocks[b]).map(|i| (o + i, coef)).collect())
    }

    /// Coordinates of `Re tr(X_b·Q)` for Hermitian `Q`.
    pub fn inner_functional(&self, b: usize, q: &CMat, coef: f64) -> Linear {
        let o = self.offsets[b];
        let v = herm_to_svec(q);
        Linear::new(v.iter().enumerate().map(|(i, a)| (o + i, coef * a)).collect())
    }
}

/// Sparse linear functional `aᵀx`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Linear {
    pub terms: Vec<(usize, f64)>,
}

impl Linear {
    pub fn new(terms: Vec<(usize, f64)>) -> Linear {
        Linear { terms }
    }

    pub fn single(index: usize, coef: f64) -> Linear {
        Linear { terms: vec![(index, coef)] }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, a)| a * x[i]).sum()
    }

    pub fn add_to(&self, out: &mut [f64], scale: f64) {
        for &(i, a) in &self.terms {
            out[i] += scale * a;
        }
    }

    pub fn extend(&mut self, other: Linear) {
        self.terms.extend(other.terms);
    }

    /// `hess += scale·a·aᵀ`.
    pub fn add_outer(&self, hess: &mut DMatrix<f64>, scale: f64) {
        for &(i, a) in &self.terms {
            let s = scale * a;
            for &(j, b) in &self.terms {
                hess[(i, j)] += s * b;
            }
        }
    }

    /// Merge duplicate indices.
    pub fn compact(mut self) -> Linear {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (i, a) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => out.push((i, a)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        Linear { terms: out }
    }
}

/// Smooth concave constraint `h(x) ≥ 0`.
pub trait Constraint: Send + Sync {
    fn name(&self) -> &str;

    /// `h(x)`; `-∞` outside the domain.
    fn value(&self, x: &[f64]) -> f64;

    /// `h(x)` with its gradient written into `grad` (full length, overwritten).
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// `hess += scale·∇²h(x)`.
    fn add_hessian(&self, x: &[f64], scale: f64, hess: &mut DMatrix<f64>);

    /// Push columns `u` with `Σ u uᵀ = −scale·∇²h(x)` for `scale > 0`.
    ///
    /// Returns `false` (pushing nothing) when no cheap factorisation exists.
    fn curvature_columns(&self, _x: &[f64], _scale: f64, _out: &mut Vec<DVector<f64>>) -> bool {
        false
    }
}

/// `aᵀx + b ≥ 0`.
#[derive(Debug, Clone)]
pub struct Affine {
    pub name: String,
    pub linear: Linear,
    pub constant: f64,
}

impl Affine {
    pub fn new(name: impl Into<String>, linear: Linear, constant: f64) -> Affine {
        Affine { name: name.into(), linear: linear.compact(), constant }
    }
}

impl Constraint for Affine {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.linear.dot(x) + self.constant
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.linear.add_to(grad, 1.0);
        self.value(x)
    }

    fn add_hessian(&self, _x: &[f64], _scale: f64, _hess: &mut DMatrix<f64>) {}
}

/// `Σ w_j·ln(a_jᵀx + b_j) + cᵀx + d ≥ 0` with `w_j > 0`.
#[derive(Debug, Clone)]
pub struct LogAffine {
    pub name: String,
    pub logs: Vec<(f64, Linear, f64)>,
    pub linear: Linear,
    pub constant: f64,
}

impl LogAffine {
    pub fn new(
        name: impl Into<String>,
        logs: Vec<(f64, Linear, f64)>,
        linear: Linear,
        constant: f64,
    ) -> LogAffine {
        assert!(logs.iter().all(|l| l.0 > 0.0), "log weights must be positive");
        LogAffine {
            name: name.into(),
            logs: logs.into_iter().map(|(w, a, b)| (w, a.compact(), b)).collect(),
            linear: linear.compact(),
            constant,
        }
    }
}

impl Constraint for LogAffine {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.linear.dot(x) + self.constant;
        for (w, a, b) in &self.logs {
            let arg = a.dot(x) + b;
            if !(arg > 0.0) {
                return f64::NEG_INFINITY;
            }
            v += w * arg.ln();
        }
        v
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.linear.add_to(grad, 1.0);
        let mut v = self.linear.dot(x) + self.constant;
        for (w, a, b) in &self.logs {
            let arg = a.dot(x) + b;
            if !(arg > 0.0) {
                return f64::NEG_INFINITY;
            }
            v += w * arg.ln();
            a.add_to(grad, w / arg);
        }
        v
    }

    fn add_hessian(&self, x: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        for (w, a, b) in &self.logs {
            let arg = a.dot(x) + b;
            a.add_outer(hess, -scale * w / (arg * arg));
        }
    }

    fn curvature_columns(&self, x: &[f64], scale: f64, out: &mut Vec<DVector<f64>>) -> bool {
        if self.logs.iter().any(|(w, _, _)| *w < 0.0) {
            return false;
        }
        for (w, a, b) in &self.logs {
            let arg = a.dot(x) + b;
            let mut u = DVector::zeros(x.len());
            a.add_to(u.as_mut_slice(), (scale * w).sqrt() / arg);
            out.push(u);
        }
        true
    }
}

/// `c − Tr((Σ_b X_b)⁻¹) ≥ 0` over a set of equally sized blocks.
#[derive(Debug, Clone)]
pub struct InverseTrace {
    pub name: String,
    pub layout: VarLayout,
    pub blocks: Vec<usize>,
    pub bound: f64,
}

impl InverseTrace {
    fn sum(&self, x: &[f64]) -> CMat {
        let n = self.layout.block_size(self.blocks[0]);
        let mut m = CMat::zeros(n, n);
        for &b in &self.blocks {
            m += self.layout.block(x, b);
        }
        m
    }
}

impl Constraint for InverseTrace {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[f64]) -> f64 {
        match inv_pd(&self.sum(x)) {
            Some(inv) => self.bound - trace_re(&inv),
            None => f64::NEG_INFINITY,
        }
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let Some(inv) = inv_pd(&self.sum(x)) else {
            return f64::NEG_INFINITY;
        };
        // ∂/∂X of −Tr(X⁻¹) is X⁻²
        let g = herm_to_svec(&(&inv * &inv));
        for &b in &self.blocks {
            let r = self.layout.block_range(b);
            grad[r].copy_from_slice(g.as_slice());
        }
        self.bound - trace_re(&inv)
    }

    fn add_hessian(&self, x: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        let Some(inv) = inv_pd(&self.sum(x)) else {
            return;
        };
        let inv2 = &inv * &inv;
        // d²Tr(X⁻¹)[E, F] = 2·Re tr(E X⁻¹ F X⁻²)
        let q = basis_quad(&inv, &inv2);
        let q = (&q + q.transpose()) * (-scale);
        for &a in &self.blocks {
            let ra = self.layout.block_range(a);
            for &b in &self.blocks {
                let rb = self.layout.block_range(b);
                let mut view = hess.view_mut((ra.start, rb.start), (ra.len(), rb.len()));
                view += &q;
            }
        }
    }
}

/// `t − a·f³ ≥ 0` on `f ≥ 0` (epigraph of a cubic cost).
#[derive(Debug, Clone)]
pub struct CubicEpigraph {
    pub name: String,
    pub t: usize,
    pub f: usize,
    pub coef: f64,
}

impl Constraint for CubicEpigraph {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[f64]) -> f64 {
        x[self.t] - self.coef * x[self.f].powi(3)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        grad[self.t] = 1.0;
        grad[self.f] = -3.0 * self.coef * x[self.f].powi(2);
        self.value(x)
    }

    fn add_hessian(&self, x: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        hess[(self.f, self.f)] += scale * (-6.0 * self.coef * x[self.f]);
    }
}

/// `d + aᵀx − (η/2)·Σ_i (x_i − c_i)² ≥ 0` with `η ≥ 0`.
#[derive(Debug, Clone)]
pub struct ConcaveQuadratic {
    pub name: String,
    pub constant: f64,
    pub linear: Linear,
    pub center: Vec<(usize, f64)>,
    pub eta: f64,
}

impl Constraint for ConcaveQuadratic {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: &[f64]) -> f64 {
        let sq: f64 = self.center.iter().map(|&(i, c)| (x[i] - c).powi(2)).sum();
        self.constant + self.linear.dot(x) - 0.5 * self.eta * sq
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.linear.add_to(grad, 1.0);
        for &(i, c) in &self.center {
            grad[i] -= self.eta * (x[i] - c);
        }
        self.value(x)
    }

    fn add_hessian(&self, _x: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        for &(i, _) in &self.center {
            hess[(i, i)] -= scale * self.eta;
        }
    }
}

/// One term of a linear matrix inequality.
#[derive(Debug, Clone)]
pub enum LmiTerm {
    /// Variable block placed on the diagonal starting at `offset`.
    Block { block: usize, offset: usize },
    /// `x_var·M`.
    Scalar { var: usize, matrix: CMat },
}

/// `C + Σ terms ⪰ 0`.
#[derive(Debug, Clone)]
pub struct Lmi {
    pub name: String,
    pub constant: CMat,
    pub terms: Vec<LmiTerm>,
}

impl Lmi {
    fn matrix(&self, layout: &VarLayout, x: &[f64]) -> CMat {
        let mut m = self.constant.clone();
        for t in &self.terms {
            match t {
                LmiTerm::Block { block, offset } => {
                    let b = layout.block(x, *block);
                    let n = b.nrows();
                    let mut view = m.view_mut((*offset, *offset), (n, n));
                    view += b;
                }
                LmiTerm::Scalar { var, matrix } => m += matrix * crate::linalg::c(x[*var], 0.0),
            }
        }
        m
    }

    /// Direction matrices `A_i` for every coordinate the LMI touches.
    fn directions(&self, layout: &VarLayout) -> Vec<(usize, CMat)> {
        let size = self.constant.nrows();
        let mut out = Vec::new();
        for t in &self.terms {
            match t {
                LmiTerm::Block { block, offset } => {
                    let n = layout.block_size(*block);
                    let r = layout.block_range(*block);
                    for (a, idx) in r.enumerate() {
                        let mut e = vec![0.0; herm_dim(n)];
                        e[a] = 1.0;
                        let basis = svec_to_herm(&e, n);
                        let mut m = CMat::zeros(size, size);
                        m.view_mut((*offset, *offset), (n, n)).copy_from(&basis);
                        out.push((idx, m));
                    }
                }
                LmiTerm::Scalar { var, matrix } => out.push((*var, matrix.clone())),
            }
        }
        out
    }
}

/// Maximise `objᵀx` over the feasible set.
pub struct ConvexProgram {
    pub layout: VarLayout,
    pub objective: Linear,
    /// Blocks constrained to be PSD.
    pub psd_blocks: Vec<usize>,
    pub lmis: Vec<Lmi>,
    pub constraints: Vec<Box<dyn Constraint>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Accept when the barrier duality gap is below `kkt_tol·max(1, |objective|)`.
    pub kkt_tol: f64,
    /// Barrier parameter growth per outer iteration.
    pub mu: f64,
    pub t_init: Option<f64>,
    pub max_newton: usize,
    /// Newton decrement threshold for centering.
    pub newton_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { kkt_tol: 1e-8, mu: 20.0, t_init: None, max_newton: 400, newton_tol: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Relative duality-gap bound `m/(t·max(1, |objective|))` at exit.
    pub kkt_residual: f64,
    pub newton_steps: usize,
    pub converged: bool,
    /// Dual estimate `1/(t·gᵢ(x))` for each scalar constraint.
    pub multipliers: Vec<f64>,
}

/// Shift added to every constraint in a phase-one problem.
struct Shifted<'a> {
    inner: &'a dyn Constraint,
    s: usize,
}

impl Constraint for Shifted<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(&x[..self.s]) + x[self.s]
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let v = self.inner.value_grad(&x[..self.s], &mut grad[..self.s]);
        grad[self.s] = 1.0;
        v + x[self.s]
    }

    fn add_hessian(&self, x: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        let n = self.s;
        let mut sub = hess.view_mut((0, 0), (n, n)).into_owned();
        self.inner.add_hessian(&x[..n], scale, &mut sub);
        hess.view_mut((0, 0), (n, n)).copy_from(&sub);
    }
}

/// Constraint set seen by the Newton iterations.
struct Barrier<'a> {
    layout: &'a VarLayout,
    psd_blocks: &'a [usize],
    /// Phase-one shift variable added to every PSD block and LMI.
    shift: Option<usize>,
    lmis: &'a [Lmi],
    lmi_dirs: Vec<Vec<(usize, CMat)>>,
    constraints: Vec<&'a dyn Constraint>,
    dim: usize,
}

impl Barrier<'_> {
    fn n_constraints(&self) -> f64 {
        let mut m = self.constraints.len();
        for &b in self.psd_blocks {
            m += self.layout.block_size(b);
        }
        for l in self.lmis {
            m += l.constant.nrows();
        }
        m as f64
    }

    fn block_matrix(&self, x: &[f64], b: usize) -> CMat {
        let mut m = self.layout.block(x, b);
        if let Some(s) = self.shift {
            for i in 0..m.nrows() {
                m[(i, i)].re += x[s];
            }
        }
        m
    }

    fn lmi_matrix(&self, x: &[f64], l: &Lmi) -> CMat {
        let mut m = l.matrix(self.layout, x);
        if let Some(s) = self.shift {
            for i in 0..m.nrows() {
                m[(i, i)].re += x[s];
            }
        }
        m
    }

    /// Barrier value `−Σ ln h − Σ ln det`; `None` outside the interior.
    fn value(&self, x: &[f64]) -> Option<f64> {
        let mut v = 0.0;
        for &b in self.psd_blocks {
            v -= log_det_pd(&self.block_matrix(x, b))?;
        }
        for l in self.lmis {
            v -= log_det_pd(&self.lmi_matrix(x, l))?;
        }
        for c in &self.constraints {
            let h = c.value(x);
            if !(h > 0.0) || !h.is_finite() {
                return None;
            }
            v -= h.ln();
        }
        Some(v)
    }

    fn grad_hess(&self, x: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.dim;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for &b in self.psd_blocks {
            let inv = inv_pd(&self.block_matrix(x, b))?;
            let r = self.layout.block_range(b);
            let gi = herm_to_svec(&inv);
            for (k, idx) in r.clone().enumerate() {
                g[idx] -= gi[k];
            }
            let q = basis_quad(&inv, &inv);
            let mut view = h.view_mut((r.start, r.start), (r.len(), r.len()));
            view += &q;
            if let Some(s) = self.shift {
                let inv2 = herm_to_svec(&(&inv * &inv));
                g[s] -= trace_re(&inv);
                h[(s, s)] += trace_re(&(&inv * &inv));
                for (k, idx) in r.enumerate() {
                    h[(idx, s)] += inv2[k];
                    h[(s, idx)] += inv2[k];
                }
            }
        }
        for (l, dirs) in self.lmis.iter().zip(&self.lmi_dirs) {
            let inv = inv_pd(&self.lmi_matrix(x, l))?;
            let mut prods: Vec<(usize, CMat)> =
                dirs.iter().map(|(i, a)| (*i, &inv * a)).collect();
            if let Some(s) = self.shift {
                prods.push((s, inv.clone()));
            }
            for (p, (i, mi)) in prods.iter().enumerate() {
                g[*i] -= trace_re(mi);
                for (j, mj) in prods.iter().skip(p) {
                    // Re tr(M_i M_j) = Re Σ M_i ∘ M_jᵀ
                    let mut acc = 0.0;
                    for r in 0..mi.nrows() {
                        for c in 0..mi.ncols() {
                            acc += (mi[(r, c)] * mj[(c, r)]).re;
                        }
                    }
                    h[(*i, *j)] += acc;
                    if i != j {
                        h[(*j, *i)] += acc;
                    }
                }
            }
        }
        // rank-one terms are gathered and added with one product
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(2 * self.constraints.len());
        for c in &self.constraints {
            let mut gc = DVector::zeros(n);
            let v = c.value_grad(x, gc.as_mut_slice());
            if !(v > 0.0) {
                return None;
            }
            g.axpy(-1.0 / v, &gc, 1.0);
            gc /= v;
            cols.push(gc);
            if !c.curvature_columns(x, 1.0 / v, &mut cols) {
                c.add_hessian(x, -1.0 / v, &mut h);
            }
        }
        if !cols.is_empty() {
            let u = DMatrix::from_columns(&cols);
            let uf = MatRef::from_column_major_slice(u.as_slice(), n, cols.len());
            let hf = MatMut::from_column_major_slice_mut(h.as_mut_slice(), n, n);
            matmul(hf, Accum::Add, uf, uf.transpose(), 1.0, Par::Seq);
        }
        Some((g, h))
    }
}

/// Solve `H·d = −g`, regularising the diagonal if `H` is not numerically PD.
///
/// The system is solved in Jacobi-scaled form with one refinement step.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let dscale: Vec<f64> = (0..n).map(|i| 1.0 / h[(i, i)].abs().max(1e-300).sqrt()).collect();
    let mut hs = h.clone();
    for (j, col) in hs.as_mut_slice().chunks_exact_mut(n).enumerate() {
        let dj = dscale[j];
        for (v, di) in col.iter_mut().zip(&dscale) {
            *v *= di * dj;
        }
    }
    let rhs = DVector::from_iterator(n, g.iter().zip(&dscale).map(|(gi, di)| -gi * di));
    let hs_ref = MatRef::from_column_major_slice(hs.as_slice(), n, n);
    let mut reg = 0.0;
    for _ in 0..12 {
        let llt = if reg > 0.0 {
            let mut m = hs.clone();
            for i in 0..n {
                m[(i, i)] += reg;
            }
            MatRef::from_column_major_slice(m.as_slice(), n, n).llt(Side::Lower)
        } else {
            hs_ref.llt(Side::Lower)
        };
        if let Ok(llt) = llt {
            let solve = |b: &DVector<f64>| -> DVector<f64> {
                let bf = MatRef::from_column_major_slice(b.as_slice(), n, 1);
                let y = llt.solve(bf);
                DVector::from_iterator(n, (0..n).map(|i| y[(i, 0)]))
            };
            let mut y = solve(&rhs);
            let resid = &rhs - &hs * &y;
            y += solve(&resid);
            let d = DVector::from_iterator(n, y.iter().zip(&dscale).map(|(yi, di)| yi * di));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
    }
    None
}

impl ConvexProgram {
    pub fn new(layout: VarLayout) -> ConvexProgram {
        ConvexProgram {
            layout,
            objective: Linear::default(),
            psd_blocks: Vec::new(),
            lmis: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, c: impl Constraint + 'static) {
        self.constraints.push(Box::new(c));
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.dot(x)
    }

    /// The most violated constraint at `x`, or `None` if `x` is strictly feasible.
    pub fn check_strict(&self, x: &[f64]) -> Option<InfeasibilityReport> {
        let mut worst: Option<InfeasibilityReport> = None;
        let mut consider = |name: &str, slack: f64, detail: &str| {
            if !(slack > 0.0) && worst.as_ref().is_none_or(|w| slack < w.slack || w.slack.is_nan()) {
                worst = Some(InfeasibilityReport {
                    constraint: name.to_string(),
                    slack,
                    detail: detail.to_string(),
                });
            }
        };
        for &b in &self.psd_blocks {
            let e = min_eigenvalue(&self.layout.block(x, b));
            consider(&format!("psd block {b}"), e, "minimum eigenvalue");
        }
        for l in &self.lmis {
            let e = min_eigenvalue(&l.matrix(&self.layout, x));
            consider(&l.name, e, "minimum eigenvalue");
        }
        for c in &self.constraints {
            consider(c.name(), c.value(x), "constraint value");
        }
        worst
    }

    /// Slack of every scalar constraint at `x`.
    pub fn slacks(&self, x: &[f64]) -> Vec<(String, f64)> {
        self.constraints.iter().map(|c| (c.name().to_string(), c.value(x))).collect()
    }

    /// Run the barrier method from a strictly feasible `x0`.
    ///
    /// A start that is not strictly feasible triggers a phase-one search; if
    /// that fails the returned error carries the constraint that could not be
    /// made strict.
    pub fn solve(&self, x0: &DVector<f64>, opts: &SolverOptions) -> Result<SolveResult> {
        if x0.len() != self.layout.dim() {
            return Err(Error::Dimension(format!(
                "start has {} entries, program has {}",
                x0.len(),
                self.layout.dim()
            )));
        }
        let start = match self.check_strict(x0.as_slice()) {
            None => x0.clone(),
            Some(_) => self.phase_one(x0, opts)?,
        };
        let barrier = Barrier {
            layout: &self.layout,
            psd_blocks: &self.psd_blocks,
            shift: None,
            lmis: &self.lmis,
            lmi_dirs: self.lmis.iter().map(|l| l.directions(&self.layout)).collect(),
            constraints: self.constraints.iter().map(|c| c.as_ref()).collect(),
            dim: self.layout.dim(),
        };
        let c = self.dense_objective(self.layout.dim());
        run_barrier(&barrier, &c, start, opts, |_| false)
    }

    fn dense_objective(&self, n: usize) -> DVector<f64> {
        let mut c = DVector::zeros(n);
        self.objective.add_to(c.as_mut_slice(), 1.0);
        c
    }

    /// Find a strictly feasible point by maximising `−s` subject to every
    /// constraint shifted by `s`.
    fn phase_one(&self, x0: &DVector<f64>, opts: &SolverOptions) -> Result<DVector<f64>> {
        let n = self.layout.dim();
        let s_idx = n;
        let worst = self.check_strict(x0.as_slice()).map(|r| r.slack).unwrap_or(0.0);
        let s0 = if worst.is_finite() { 1.0 - 2.0 * worst.min(0.0) } else { 1.0 };
        let mut x = DVector::zeros(n + 1);
        x.rows_mut(0, n).copy_from(x0);
        x[s_idx] = s0;
        // constraints with no finite value at x0 cannot be shifted into the interior
        for c in &self.constraints {
            let v = c.value(x0.as_slice());
            if !v.is_finite() {
                return Err(Error::Infeasible(InfeasibilityReport {
                    constraint: c.name().to_string(),
                    slack: v,
                    detail: "start is outside the constraint's domain".into(),
                }));
            }
        }
        let shifted: Vec<Shifted> =
            self.constraints.iter().map(|c| Shifted { inner: c.as_ref(), s: s_idx }).collect();
        // keep the shift bounded below so the auxiliary problem is bounded
        let floor = Affine::new("phase-one floor", Linear::single(s_idx, 1.0), 1.0);
        // and keep the auxiliary iterates bounded in every direction
        let radius = 1e3 * x0.amax().max(1.0);
        let ball = ConcaveQuadratic {
            name: "phase-one ball".into(),
            constant: 1.0,
            linear: Linear::default(),
            center: (0..n).map(|i| (i, x0[i])).chain(std::iter::once((s_idx, s0))).collect(),
            eta: 2.0 / (radius * radius),
        };
        let mut constraints: Vec<&dyn Constraint> = shifted.iter().map(|c| c as &dyn Constraint).collect();
        constraints.push(&floor);
        constraints.push(&ball);
        let barrier = Barrier {
            layout: &self.layout,
            psd_blocks: &self.psd_blocks,
            shift: Some(s_idx),
            lmis: &self.lmis,
            lmi_dirs: self.lmis.iter().map(|l| l.directions(&self.layout)).collect(),
            constraints,
            dim: n + 1,
        };
        let mut c = DVector::zeros(n + 1);
        c[s_idx] = -1.0;
        let opts1 = SolverOptions { kkt_tol: 1e-10, ..opts.clone() };
        let res = run_barrier(&barrier, &c, x, &opts1, |x| x[s_idx] < -1e-6)?;
        let cand = res.x.rows(0, n).into_owned();
        match self.check_strict(cand.as_slice()) {
            None => Ok(cand),
            Some(mut report) => {
                report.detail = format!(
                    "no strictly feasible point: best uniform margin {:e}",
                    -res.x[s_idx]
                );
                Err(Error::Infeasible(report))
            }
        }
    }
}

fn run_barrier(
    barrier: &Barrier,
    c: &DVector<f64>,
    mut x: DVector<f64>,
    opts: &SolverOptions,
    early_exit: impl Fn(&DVector<f64>) -> bool,
) -> Result<SolveResult> {
    let m = barrier.n_constraints().max(1.0);
    let mut t = match opts.t_init {
        Some(t) => t,
        None => {
            // the t for which x is closest to centred in the Hessian norm
            let (g, h) = barrier
                .grad_hess(x.as_slice())
                .ok_or_else(|| Error::Numerical("start is not interior".into()))?;
            let fallback = (m / c.dot(&x).abs().max(1.0)).clamp(1e-3, 1e6);
            match newton_direction(&h, c) {
                Some(u) => {
                    let (num, den) = (-g.dot(&u), -c.dot(&u));
                    let t = num / den;
                    if den > 0.0 && t.is_finite() && t > 0.0 {
                        t.clamp(1e-6, 1e8)
                    } else {
                        fallback
                    }
                }
                None => fallback,
            }
        }
    };
    let mut steps = 0;
    let mut converged = false;
    let f = |x: &DVector<f64>, t: f64| -> Option<f64> { Some(-t * c.dot(x) + barrier.value(x.as_slice())?) };
    'outer: loop {
        if early_exit(&x) {
            converged = true;
            break;
        }
        // centering
        loop {
            if steps >= opts.max_newton {
                break 'outer;
            }
            let Some((gb, h)) = barrier.grad_hess(x.as_slice()) else {
                return Err(Error::Numerical("iterate left the interior".into()));
            };
            let g = gb - c * t;
            let Some(d) = newton_direction(&h, &g) else {
                return Err(Error::Numerical("Newton system could not be solved".into()));
            };
            let dec = -g.dot(&d);
            steps += 1;
            if dec / 2.0 <= opts.newton_tol || !dec.is_finite() {
                break;
            }
            let f0 = f(&x, t).expect("iterate is interior");
            let slope = g.dot(&d);
            let mut s = 1.0;
            let mut accepted = false;
            while s > 1e-16 {
                let cand = &x + &d * s;
                if let Some(fc) = f(&cand, t) {
                    if fc <= f0 + 0.01 * s * slope {
                        x = cand;
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted || early_exit(&x) {
                break;
            }
        }
        let obj = c.dot(&x);
        if m / t <= opts.kkt_tol * obj.abs().max(1.0) {
            converged = true;
            break;
        }
        t *= opts.mu;
    }
    let obj = c.dot(&x);
    let multipliers = barrier.constraints.iter().map(|g| 1.0 / (t * g.value(x.as_slice()))).collect();
    Ok(SolveResult {
        multipliers,
        objective: obj,
        kkt_residual: m / t / obj.abs().max(1.0),
        newton_steps: steps,
        converged,
        x,
    })
}
