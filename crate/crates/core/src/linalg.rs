//! Dense complex linear-algebra helpers and the real coordinate system used
//! for Hermitian matrix variables.
//!
//! A Hermitian `n × n` matrix is mapped to `n²` real coordinates in an
//! orthonormal basis for the inner product `Re tr(A B)`: the `n` diagonal
//! entries first, then for every `i < j` the pair `√2·Re H_ij`, `√2·Im H_ij`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

const SQRT2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// `exp(j·phase)`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    Complex::new(phase.cos(), phase.sin())
}

/// Number of real coordinates of an `n × n` Hermitian matrix.
#[inline]
pub fn herm_dim(n: usize) -> usize {
    n * n
}

/// Non-zero entries `(row, col, value)` of basis element `a` for size `n`.
fn basis_entries(n: usize, a: usize) -> ([(usize, usize, C64); 2], usize) {
    if a < n {
        return ([(a, a, c(1.0, 0.0)), (0, 0, c(0.0, 0.0))], 1);
    }
    let k = (a - n) / 2;
    let imag = (a - n) % 2 == 1;
    let (i, j) = offdiag_pair(n, k);
    if imag {
        ([(i, j, c(0.0, INV_SQRT2)), (j, i, c(0.0, -INV_SQRT2))], 2)
    } else {
        ([(i, j, c(INV_SQRT2, 0.0)), (j, i, c(INV_SQRT2, 0.0))], 2)
    }
}

/// The `k`-th strictly-upper pair `(i, j)`, row-major.
fn offdiag_pair(n: usize, k: usize) -> (usize, usize) {
    let mut k = k;
    for i in 0..n {
        let row = n - i - 1;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
    }
    unreachable!("off-diagonal index out of range")
}

/// Hermitian matrix to real coordinates, written into `out`.
pub fn herm_to_svec_into(m: &CMat, out: &mut [f64]) {
    let n = m.nrows();
    debug_assert_eq!(out.len(), herm_dim(n));
    for i in 0..n {
        out[i] = m[(i, i)].re;
    }
    let mut p = n;
    for i in 0..n {
        for j in (i + 1)..n {
            // average the two triangles so slightly non-Hermitian input maps
            // to its Hermitian part
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[p] = SQRT2 * z.re;
            out[p + 1] = SQRT2 * z.im;
            p += 2;
        }
    }
}

pub fn herm_to_svec(m: &CMat) -> DVector<f64> {
    let mut v = DVector::zeros(herm_dim(m.nrows()));
    herm_to_svec_into(m, v.as_mut_slice());
    v
}

/// Real coordinates back to a Hermitian matrix.
pub fn svec_to_herm(v: &[f64], n: usize) -> CMat {
    debug_assert_eq!(v.len(), herm_dim(n));
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = c(v[i], 0.0);
    }
    let mut p = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = c(v[p] * INV_SQRT2, v[p + 1] * INV_SQRT2);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            p += 2;
        }
    }
    m
}

/// `M[a, b] = Re tr(B_a · P · B_b · Q)` over the Hermitian basis.
///
/// With `P = Q = X⁻¹` this is the Hessian of `−log det X`.
pub fn basis_quad(p: &CMat, q: &CMat) -> DMatrix<f64> {
    let n = p.nrows();
    let d = herm_dim(n);
    let entries: Vec<_> = (0..d).map(|a| basis_entries(n, a)).collect();
    let mut out = DMatrix::zeros(d, d);
    for a in 0..d {
        let (ea, na) = &entries[a];
        for b in 0..d {
            let (eb, nb) = &entries[b];
            let mut acc = c(0.0, 0.0);
            for &(pa, qa, va) in &ea[..*na] {
                for &(rb, sb, vb) in &eb[..*nb] {
                    acc += va * p[(qa, rb)] * vb * q[(sb, pa)];
                }
            }
            out[(a, b)] = acc.re;
        }
    }
    out
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

pub fn frob_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn herm_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = m.nrows();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    herm_eigen(m).0[0]
}

/// Accept `m` as PSD when its smallest eigenvalue is above `−tol·max(1, ‖m‖)`.
pub fn check_psd(m: &CMat, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let herm_err = frob_norm(&(m - m.adjoint()));
    let scale = frob_norm(m).max(1.0);
    if herm_err > 1e-9 * scale {
        return Err(Error::NotPsd(f64::NAN));
    }
    let lo = min_eigenvalue(m);
    if lo < -tol * scale {
        return Err(Error::NotPsd(lo));
    }
    Ok(())
}

/// Principal square root of a PSD matrix (negative round-off eigenvalues are clamped).
pub fn psd_sqrt(m: &CMat) -> CMat {
    let (vals, vecs) = herm_eigen(m);
    let n = m.nrows();
    let floor = n as f64 * f64::EPSILON * vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = if vals[j] > floor { vals[j].sqrt() } else { 0.0 };
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

/// Lower Cholesky factor of a Hermitian matrix; `None` unless every pivot is
/// strictly positive.
///
/// Only the lower triangle is read.
pub fn cholesky_herm(m: &CMat) -> Option<CMat> {
    let n = m.nrows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = c(d, 0.0);
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
pub fn inv_pd(m: &CMat) -> Option<CMat> {
    let l = cholesky_herm(m)?;
    let n = m.nrows();
    let linv = l.solve_lower_triangular(&CMat::identity(n, n))?;
    let inv = linv.adjoint() * linv;
    Some(hermitian_part(&inv))
}

/// `log det` of a Hermitian positive-definite matrix, `None` if not PD.
pub fn log_det_pd(m: &CMat) -> Option<f64> {
    let l = cholesky_herm(m)?;
    Some(2.0 * (0..m.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            for p in 0..br {
                for q in 0..bc {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// `h M hᴴ` for a row vector `h` stored as a column.
pub fn quad_row(h: &CVec, m: &CMat) -> f64 {
    let mut acc = c(0.0, 0.0);
    for j in 0..h.len() {
        let mut row = c(0.0, 0.0);
        for i in 0..h.len() {
            row += h[i] * m[(i, j)];
        }
        acc += row * h[j].conj();
    }
    acc.re
}

/// Gram matrix `Q = h̄ hᵀ` with `tr(M Q) = h M hᴴ`.
pub fn row_gram(h: &CVec) -> CMat {
    let n = h.len();
    CMat::from_fn(n, n, |i, j| h[i].conj() * h[j])
}

/// `w wᴴ`.
pub fn outer(w: &CVec) -> CMat {
    w * w.adjoint()
}
