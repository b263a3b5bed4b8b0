//! Dense complex linear algebra on rank-2 [`DenseTensor`]s.
//!
//! Hermitian eigenproblems and SVDs use Jacobi rotations (cyclic two-sided for
//! eigen, one-sided Hestenes for SVD), which keep residuals at the level of
//! machine precision for the small matrices the tensor network produces.
//! Non-Hermitian spectra go through Hessenberg reduction and shifted QR.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_err, val_err, Error, Result};
use crate::scalar::{cone, czero, from_real, real, tol, Real, C};
use crate::tensor::DenseTensor;

/// Nominal Hermiticity tolerance; inputs within it are symmetrized.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Smallest,
    Largest,
}

#[derive(Debug, Clone)]
pub struct SvdResult<T: Real = f64> {
    /// `rows × k` isometry.
    pub left_isometry: DenseTensor<T>,
    /// Descending, non-negative.
    pub singular_values: Vec<T>,
    /// `k × cols`; rows are orthonormal (this is `V†`).
    pub right_isometry: DenseTensor<T>,
    /// Frobenius norm of the discarded part.
    pub truncation_error: T,
    /// Shapes of the row and column mode groups of the input.
    pub row_shape: Vec<usize>,
    pub col_shape: Vec<usize>,
}

impl<T: Real> SvdResult<T> {
    /// `U · diag(S) · V†` as a matrix.
    pub fn reconstruct(&self) -> DenseTensor<T> {
        let us = scale_columns(&self.left_isometry, &self.singular_values);
        us.matmul(&self.right_isometry).expect("svd factor shapes")
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

fn scale_columns<T: Real>(m: &DenseTensor<T>, s: &[T]) -> DenseTensor<T> {
    let (r, c) = (m.rows(), m.cols());
    let mut out = m.clone();
    for i in 0..r {
        for j in 0..c {
            *out.at_mut(i, j) = m.at(i, j) * s[j];
        }
    }
    out
}

fn require_square<T: Real>(h: &DenseTensor<T>) -> Result<usize> {
    if !h.is_square() {
        return Err(dim_err!("expected a square matrix, got {:?}", h.shape()));
    }
    Ok(h.rows())
}

fn check_hermitian<T: Real>(h: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    require_square(h)?;
    let scale = h.data().iter().map(|z| z.norm()).fold(T::one(), T::max);
    let defect = h.hermiticity_defect();
    if defect > tol::<T>(HERMITIAN_TOL) * scale {
        return Err(val_err!("matrix not Hermitian (defect {})", defect));
    }
    Ok(h.hermitian_part())
}

/// Full eigendecomposition of a Hermitian matrix: ascending eigenvalues and
/// the matching eigenvectors as columns.
pub fn herm_eig<T: Real>(h: &DenseTensor<T>) -> Result<(Vec<T>, DenseTensor<T>)> {
    let a = check_hermitian(h)?;
    Ok(jacobi_hermitian(a))
}

/// Extremal eigenpair of a Hermitian matrix. The vector is returned as a
/// rank-1 tensor of unit norm.
pub fn herm_eig_extreme<T: Real>(h: &DenseTensor<T>, which: Which) -> Result<(T, DenseTensor<T>)> {
    let (vals, vecs) = herm_eig(h)?;
    let n = vals.len();
    if n == 0 {
        return Err(dim_err!("empty matrix"));
    }
    let k = match which {
        Which::Smallest => 0,
        Which::Largest => n - 1,
    };
    let v: Vec<C<T>> = (0..n).map(|i| vecs.at(i, k)).collect();
    Ok((vals[k], DenseTensor::from_vec(&[n], v)?))
}

fn jacobi_hermitian<T: Real>(mut a: DenseTensor<T>) -> (Vec<T>, DenseTensor<T>) {
    let n = a.rows();
    let mut v = DenseTensor::<T>::identity(n);
    let eps = T::epsilon();
    let fro = a.norm();
    if fro == T::zero() {
        return (vec![T::zero(); n], v);
    }
    for i in 0..n {
        let d = a.at(i, i).re;
        *a.at_mut(i, i) = from_real(d);
    }
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a.at(p, q).norm_sqr();
            }
        }
        if off.sqrt() <= eps * real::<T>(0.1) * fro {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.at(p, q);
                let g = apq.norm();
                if g <= eps * real::<T>(1e-3) * fro {
                    continue;
                }
                let app = a.at(p, p).re;
                let aqq = a.at(q, q).re;
                let theta = (aqq - app) / (g + g);
                let t = if theta >= T::zero() {
                    T::one() / (theta + (theta * theta + T::one()).sqrt())
                } else {
                    -T::one() / (-theta + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                let ph = (apq / g).conj();
                let (gpp, gpq, gqp, gqq) = (from_real(c), from_real(s), ph * (-s), ph * c);
                rotate_columns(&mut a, p, q, gpp, gpq, gqp, gqq);
                rotate_rows(&mut a, p, q, gpp, gpq, gqp, gqq);
                rotate_columns(&mut v, p, q, gpp, gpq, gqp, gqq);
                *a.at_mut(p, q) = czero();
                *a.at_mut(q, p) = czero();
                let dp = a.at(p, p).re;
                let dq = a.at(q, q).re;
                *a.at_mut(p, p) = from_real(dp);
                *a.at_mut(q, q) = from_real(dq);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.at(i, i).re.partial_cmp(&a.at(j, j).re).unwrap_or(std::cmp::Ordering::Equal));
    let vals = order.iter().map(|&i| a.at(i, i).re).collect();
    let vecs = DenseTensor::from_fn(&[n, n], |ix| v.at(ix[0], order[ix[1]]));
    (vals, vecs)
}

/// Columns `p, q` of `m` replaced by `[m_p, m_q] · G`.
fn rotate_columns<T: Real>(m: &mut DenseTensor<T>, p: usize, q: usize, gpp: C<T>, gpq: C<T>, gqp: C<T>, gqq: C<T>) {
    for k in 0..m.rows() {
        let mp = m.at(k, p);
        let mq = m.at(k, q);
        *m.at_mut(k, p) = mp * gpp + mq * gqp;
        *m.at_mut(k, q) = mp * gpq + mq * gqq;
    }
}

/// Rows `p, q` of `m` replaced by `G† · [m_p; m_q]`.
fn rotate_rows<T: Real>(m: &mut DenseTensor<T>, p: usize, q: usize, gpp: C<T>, gpq: C<T>, gqp: C<T>, gqq: C<T>) {
    for k in 0..m.cols() {
        let mp = m.at(p, k);
        let mq = m.at(q, k);
        *m.at_mut(p, k) = gpp.conj() * mp + gqp.conj() * mq;
        *m.at_mut(q, k) = gpq.conj() * mp + gqq.conj() * mq;
    }
}

/// SVD of the matricization of `t` with the given mode groups.
///
/// `max_keep` truncates to at most that many singular values; the discarded
/// weight is reported as `truncation_error`.
pub fn svd<T: Real>(
    t: &DenseTensor<T>,
    row_modes: &[usize],
    col_modes: &[usize],
    max_keep: Option<usize>,
) -> Result<SvdResult<T>> {
    if row_modes.is_empty() || col_modes.is_empty() {
        return Err(dim_err!("svd needs non-empty row and column mode groups"));
    }
    let m = t.matricize(row_modes, col_modes)?;
    let row_shape = row_modes.iter().map(|&k| t.shape()[k]).collect();
    let col_shape = col_modes.iter().map(|&k| t.shape()[k]).collect();
    let mut r = svd_matrix(&m, max_keep)?;
    r.row_shape = row_shape;
    r.col_shape = col_shape;
    Ok(r)
}

/// Thin SVD of a matrix.
pub fn svd_matrix<T: Real>(m: &DenseTensor<T>, max_keep: Option<usize>) -> Result<SvdResult<T>> {
    if m.rank() != 2 {
        return Err(dim_err!("svd_matrix needs a matrix"));
    }
    let (rows, cols) = (m.rows(), m.cols());
    if rows == 0 || cols == 0 {
        return Err(dim_err!("svd of empty matrix"));
    }
    let (u, s, vh) = if rows >= cols {
        hestenes(m)
    } else {
        // A† = U' S V'†  =>  A = V' S U'†
        let (u2, s2, vh2) = hestenes(&m.dagger());
        (vh2.dagger(), s2, u2.dagger())
    };
    let k_full = s.len();
    let keep = max_keep.map_or(k_full, |k| k.clamp(1, k_full));
    let discarded: T = s[keep..].iter().map(|&x| x * x).sum();
    let left = DenseTensor::from_fn(&[rows, keep], |ix| u.at(ix[0], ix[1]));
    let right = DenseTensor::from_fn(&[keep, cols], |ix| vh.at(ix[0], ix[1]));
    Ok(SvdResult {
        left_isometry: left,
        singular_values: s[..keep].to_vec(),
        right_isometry: right,
        truncation_error: discarded.sqrt(),
        row_shape: vec![rows],
        col_shape: vec![cols],
    })
}

/// One-sided Jacobi for `rows >= cols`. Returns `(U rows×cols, S, V† cols×cols)`.
fn hestenes<T: Real>(m: &DenseTensor<T>) -> (DenseTensor<T>, Vec<T>, DenseTensor<T>) {
    let (rows, n) = (m.rows(), m.cols());
    let mut cols: Vec<Vec<C<T>>> = (0..n).map(|j| (0..rows).map(|i| m.at(i, j)).collect()).collect();
    let mut v = DenseTensor::<T>::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: T = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: T = cols[q].iter().map(|z| z.norm_sqr()).sum();
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                let gamma: C<T> = cols[p].iter().zip(&cols[q]).map(|(a, b)| a.conj() * b).sum();
                let g = gamma.norm();
                if g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (g + g);
                let t = if zeta >= T::zero() {
                    T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
                } else {
                    -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let ph = (gamma / g).conj();
                let (gpp, gpq, gqp, gqq) = (from_real(c), from_real(s), ph * (-s), ph * c);
                for i in 0..rows {
                    let ap = cols[p][i];
                    let aq = cols[q][i];
                    cols[p][i] = ap * gpp + aq * gqp;
                    cols[q][i] = ap * gpq + aq * gqq;
                }
                rotate_columns(&mut v, p, q, gpp, gpq, gqp, gqq);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = cols.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal));
    let smax = norms[order[0]];
    let cutoff = smax * eps * real::<T>(rows.max(n) as f64);
    let mut ucols: Vec<Vec<C<T>>> = Vec::with_capacity(n);
    let mut svals = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let s = norms[j];
        svals.push(s);
        if s > cutoff && s > T::zero() {
            ucols.push(cols[j].iter().map(|z| z / s).collect());
        } else {
            ucols.push(vec![czero(); rows]);
            deficient.push(slot);
        }
    }
    if !deficient.is_empty() {
        fill_orthonormal(&mut ucols, &deficient, rows);
    }
    let u = DenseTensor::from_fn(&[rows, n], |ix| ucols[ix[1]][ix[0]]);
    let vh = DenseTensor::from_fn(&[n, n], |ix| v.at(ix[1], order[ix[0]]).conj());
    (u, svals, vh)
}

/// Replaces the listed columns with unit vectors orthogonal to all others.
fn fill_orthonormal<T: Real>(cols: &mut [Vec<C<T>>], slots: &[usize], dim: usize) {
    let mut candidate = 0usize;
    for &slot in slots {
        loop {
            assert!(candidate < dim, "cannot complete orthonormal set");
            let mut w = vec![czero::<T>(); dim];
            w[candidate] = cone();
            candidate += 1;
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if slots.contains(&k) && c.iter().all(|z| *z == czero()) {
                        continue;
                    }
                    let proj: C<T> = c.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                    for (wi, ci) in w.iter_mut().zip(c) {
                        *wi = *wi - proj * ci;
                    }
                }
            }
            let nrm: T = w.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
            if nrm > real(0.5) {
                cols[slot] = w.iter().map(|z| z / nrm).collect();
                break;
            }
        }
    }
}

/// Extends orthonormal columns (`dim × k`) to a `dim × dim` unitary whose
/// first `k` columns are the input.
pub fn complete_unitary<T: Real>(iso: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let (dim, k) = (iso.rows(), iso.cols());
    if k > dim {
        return Err(dim_err!("isometry {}x{} has more columns than rows", dim, k));
    }
    let mut cols: Vec<Vec<C<T>>> = (0..k).map(|j| (0..dim).map(|i| iso.at(i, j)).collect()).collect();
    cols.extend((k..dim).map(|_| vec![czero(); dim]));
    let slots: Vec<usize> = (k..dim).collect();
    fill_orthonormal(&mut cols, &slots, dim);
    Ok(DenseTensor::from_fn(&[dim, dim], |ix| cols[ix[1]][ix[0]]))
}

/// Thin Householder QR: `m = Q R` with `Q` of shape `rows × k`, `k = min(rows, cols)`.
pub fn qr<T: Real>(m: &DenseTensor<T>) -> Result<(DenseTensor<T>, DenseTensor<T>)> {
    if m.rank() != 2 {
        return Err(dim_err!("qr needs a matrix"));
    }
    let (rows, cols) = (m.rows(), m.cols());
    let k = rows.min(cols);
    let mut r = m.clone();
    let mut reflectors: Vec<Option<Vec<C<T>>>> = Vec::with_capacity(k);
    for j in 0..k {
        let x: Vec<C<T>> = (j..rows).map(|i| r.at(i, j)).collect();
        let nx = x.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        let below: T = x.iter().skip(1).map(|z| z.norm_sqr()).sum();
        if nx == T::zero() || below == T::zero() {
            reflectors.push(None);
            continue;
        }
        let phase = if x[0].norm() > T::zero() { x[0] / x[0].norm() } else { cone() };
        let alpha = -phase * nx;
        let mut v = x;
        v[0] = v[0] - alpha;
        let nv = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        for z in v.iter_mut() {
            *z = *z / nv;
        }
        apply_reflector_left(&mut r, &v, j, j);
        reflectors.push(Some(v));
    }
    let mut q = DenseTensor::<T>::zeros(&[rows, k]);
    for i in 0..k {
        *q.at_mut(i, i) = cone();
    }
    for j in (0..k).rev() {
        if let Some(v) = &reflectors[j] {
            apply_reflector_left(&mut q, v, j, 0);
        }
    }
    let rr = DenseTensor::from_fn(&[k, cols], |ix| if ix[0] <= ix[1] { r.at(ix[0], ix[1]) } else { czero() });
    Ok((q, rr))
}

/// `m[row0.., col0..] -= 2 v (v† m[row0.., col0..])`
fn apply_reflector_left<T: Real>(m: &mut DenseTensor<T>, v: &[C<T>], row0: usize, col0: usize) {
    let two = real::<T>(2.0);
    for c in col0..m.cols() {
        let mut s = czero::<T>();
        for (k, vk) in v.iter().enumerate() {
            s += vk.conj() * m.at(row0 + k, c);
        }
        if s == czero() {
            continue;
        }
        for (k, vk) in v.iter().enumerate() {
            let cur = m.at(row0 + k, c);
            *m.at_mut(row0 + k, c) = cur - vk * s * two;
        }
    }
}

/// `exp(i δ K)` for Hermitian `K`, through its eigendecomposition.
pub fn unitary_exp<T: Real>(k: &DenseTensor<T>, delta: T) -> Result<DenseTensor<T>> {
    let (vals, vecs) = herm_eig(k)?;
    let n = vals.len();
    let phases: Vec<C<T>> = vals.iter().map(|&l| Complex::new(T::zero(), delta * l).exp()).collect();
    let mut out = DenseTensor::<T>::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let mut s = czero::<T>();
            for (m, ph) in phases.iter().enumerate() {
                s += vecs.at(i, m) * ph * vecs.at(j, m).conj();
            }
            *out.at_mut(i, j) = s;
        }
    }
    Ok(out)
}

/// Eigenvalues of a general complex square matrix (unordered).
pub fn eigvals_general<T: Real>(a: &DenseTensor<T>) -> Result<Vec<C<T>>> {
    let n = require_square(a)?;
    if n == 0 {
        return Ok(vec![]);
    }
    let mut h = hessenberg(a);
    let eps = T::epsilon();
    let mut vals = vec![czero::<T>(); n];
    let mut hi = n - 1;
    let mut iter = 0usize;
    let scale = a.norm().max(T::min_positive_value());
    loop {
        if hi == 0 {
            vals[0] = h.at(0, 0);
            break;
        }
        // locate the start of the active unreduced block
        let mut l = hi;
        while l > 0 {
            let sub = h.at(l, l - 1).norm();
            let diag = h.at(l - 1, l - 1).norm() + h.at(l, l).norm();
            let ref_scale = if diag > T::zero() { diag } else { scale };
            if sub <= eps * ref_scale {
                *h.at_mut(l, l - 1) = czero();
                break;
            }
            l -= 1;
        }
        if l == hi {
            vals[hi] = h.at(hi, hi);
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > 60 * n {
            return Err(Error::Numerical("QR iteration did not converge".into()));
        }
        let mu = if iter % 11 == 10 {
            h.at(hi, hi) + from_real(h.at(hi, hi - 1).norm() * real::<T>(0.75))
        } else {
            wilkinson_shift(h.at(hi - 1, hi - 1), h.at(hi - 1, hi), h.at(hi, hi - 1), h.at(hi, hi))
        };
        qr_step(&mut h, l, hi, mu);
    }
    Ok(vals)
}

fn wilkinson_shift<T: Real>(a: C<T>, b: C<T>, c: C<T>, d: C<T>) -> C<T> {
    let half = real::<T>(0.5);
    let tr = (a + d) * half;
    let det = a * d - b * c;
    let disc = (tr * tr - det).sqrt();
    let l1 = tr + disc;
    let l2 = tr - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn qr_step<T: Real>(h: &mut DenseTensor<T>, lo: usize, hi: usize, mu: C<T>) {
    for i in lo..=hi {
        let v = h.at(i, i);
        *h.at_mut(i, i) = v - mu;
    }
    let mut rots = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let a = h.at(k, k);
        let b = h.at(k + 1, k);
        let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (g00, g01, g10, g11) = if r == T::zero() {
            (cone(), czero(), czero(), cone())
        } else {
            (a.conj() / r, b.conj() / r, -b / r, a / r)
        };
        for c in k..=hi {
            let x = h.at(k, c);
            let y = h.at(k + 1, c);
            *h.at_mut(k, c) = g00 * x + g01 * y;
            *h.at_mut(k + 1, c) = g10 * x + g11 * y;
        }
        rots.push((g00, g01, g10, g11));
    }
    for (idx, k) in (lo..hi).enumerate() {
        let (g00, g01, g10, g11) = rots[idx];
        let top = (k + 2).min(hi);
        for r in lo..=top {
            let x = h.at(r, k);
            let y = h.at(r, k + 1);
            *h.at_mut(r, k) = x * g00.conj() + y * g01.conj();
            *h.at_mut(r, k + 1) = x * g10.conj() + y * g11.conj();
        }
    }
    for i in lo..=hi {
        let v = h.at(i, i);
        *h.at_mut(i, i) = v + mu;
    }
}

fn hessenberg<T: Real>(a: &DenseTensor<T>) -> DenseTensor<T> {
    let n = a.rows();
    let mut h = a.clone();
    let two = real::<T>(2.0);
    for j in 0..n.saturating_sub(2) {
        let x: Vec<C<T>> = ((j + 1)..n).map(|i| h.at(i, j)).collect();
        let below: T = x.iter().skip(1).map(|z| z.norm_sqr()).sum();
        if below == T::zero() {
            continue;
        }
        let nx = x.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        let phase = if x[0].norm() > T::zero() { x[0] / x[0].norm() } else { cone() };
        let mut v = x;
        v[0] = v[0] + phase * nx;
        let nv = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        for z in v.iter_mut() {
            *z = *z / nv;
        }
        apply_reflector_left(&mut h, &v, j + 1, 0);
        // right application: h[:, j+1..] -= 2 (h[:, j+1..] v) v†
        for r in 0..n {
            let mut s = czero::<T>();
            for (k, vk) in v.iter().enumerate() {
                s += h.at(r, j + 1 + k) * vk;
            }
            for (k, vk) in v.iter().enumerate() {
                let cur = h.at(r, j + 1 + k);
                *h.at_mut(r, j + 1 + k) = cur - s * vk.conj() * two;
            }
        }
    }
    h
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting. Exactly
/// singular pivots are replaced by a tiny value, which is what inverse
/// iteration needs.
pub fn lu_solve<T: Real>(a: &DenseTensor<T>, b: &[C<T>]) -> Result<Vec<C<T>>> {
    let n = require_square(a)?;
    if b.len() != n {
        return Err(dim_err!("rhs length {} for {}x{} system", b.len(), n, n));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    let tiny = a.norm().max(T::one()) * T::epsilon() * real::<T>(1e-2);
    for col in 0..n {
        let mut piv = col;
        let mut best = m.at(col, col).norm();
        for r in (col + 1)..n {
            let v = m.at(r, col).norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if piv != col {
            for c in 0..n {
                let t = m.at(col, c);
                *m.at_mut(col, c) = m.at(piv, c);
                *m.at_mut(piv, c) = t;
            }
            x.swap(col, piv);
        }
        if m.at(col, col).norm() < tiny {
            *m.at_mut(col, col) = from_real(tiny);
        }
        let p = m.at(col, col);
        for r in (col + 1)..n {
            let f = m.at(r, col) / p;
            if f == czero() {
                continue;
            }
            for c in col..n {
                let v = m.at(r, c) - f * m.at(col, c);
                *m.at_mut(r, c) = v;
            }
            x[r] = x[r] - f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in (r + 1)..n {
            s -= m.at(r, c) * x[c];
        }
        x[r] = s / m.at(r, r);
    }
    Ok(x)
}

/// Right eigenvector for a known eigenvalue by inverse iteration.
pub fn eigvec_general<T: Real>(a: &DenseTensor<T>, lambda: C<T>) -> Result<Vec<C<T>>> {
    let n = require_square(a)?;
    let shift = lambda + from_real(a.norm().max(T::one()) * T::epsilon() * real::<T>(10.0));
    let mut shifted = a.clone();
    for i in 0..n {
        let v = shifted.at(i, i);
        *shifted.at_mut(i, i) = v - shift;
    }
    let mut x: Vec<C<T>> = (0..n).map(|i| Complex::new(T::one(), real::<T>(0.1 * (i as f64 + 1.0)))).collect();
    for _ in 0..4 {
        x = lu_solve(&shifted, &x)?;
        let nrm = x.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if nrm == T::zero() || !nrm.is_finite() {
            return Err(Error::Numerical("inverse iteration breakdown".into()));
        }
        for z in x.iter_mut() {
            *z = *z / nrm;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { krylov_dim: 60, max_restarts: 200, residual_tol: 1e-9, seed: 0x5eed }
    }
}

/// Lowest eigenpair of a Hermitian operator given as a matrix-vector product.
///
/// Restarted Lanczos with full reorthogonalization; restarts from the current
/// Ritz vector. Returns `(energy, vector, residual)`.
pub fn lanczos_ground<T: Real>(
    dim: usize,
    apply: impl Fn(&[C<T>]) -> Vec<C<T>>,
    opts: &LanczosOptions,
) -> Result<(T, Vec<C<T>>, T)> {
    if dim == 0 {
        return Err(dim_err!("empty operator"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start = DenseTensor::<T>::random_gaussian(&[dim], &mut rng);
    let mut v: Vec<C<T>> = start.into_data();
    normalize(&mut v);
    let tolr = tol::<T>(opts.residual_tol);
    let mut best = (T::zero(), v.clone(), T::infinity());
    for _restart in 0..opts.max_restarts {
        let m = opts.krylov_dim.min(dim);
        let mut basis: Vec<Vec<C<T>>> = vec![v.clone()];
        let mut alphas: Vec<T> = Vec::new();
        let mut betas: Vec<T> = Vec::new();
        for j in 0..m {
            let mut w = apply(&basis[j]);
            let alpha = dotc(&basis[j], &w).re;
            alphas.push(alpha);
            for _ in 0..2 {
                for b in &basis {
                    let p = dotc(b, &w);
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi = *wi - p * bi;
                    }
                }
            }
            let beta = w.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
            if j + 1 == m || beta <= T::epsilon() * real::<T>(100.0) * alpha.abs().max(T::one()) {
                break;
            }
            for z in w.iter_mut() {
                *z = *z / beta;
            }
            betas.push(beta);
            basis.push(w);
        }
        let k = alphas.len();
        let tri = DenseTensor::<T>::from_fn(&[k, k], |ix| {
            let (i, j) = (ix[0], ix[1]);
            if i == j {
                from_real(alphas[i])
            } else if i + 1 == j {
                from_real(betas[i])
            } else if j + 1 == i {
                from_real(betas[j])
            } else {
                czero()
            }
        });
        let (theta, y) = herm_eig_extreme(&tri, Which::Smallest)?;
        let mut x = vec![czero::<T>(); dim];
        for (i, b) in basis.iter().enumerate().take(k) {
            let yi = y.data()[i];
            for (xv, bv) in x.iter_mut().zip(b) {
                *xv += yi * bv;
            }
        }
        normalize(&mut x);
        let hx = apply(&x);
        let e = dotc(&x, &hx).re;
        let res = hx.iter().zip(&x).map(|(a, b)| (a - b * e).norm_sqr()).sum::<T>().sqrt();
        let _ = theta;
        if res < best.2 {
            best = (e, x.clone(), res);
        }
        if res < tolr {
            return Ok((e, x, res));
        }
        v = x;
    }
    Err(Error::Numerical(format!("Lanczos did not reach residual {} (best {})", opts.residual_tol, best.2)))
}

fn dotc<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize<T: Real>(v: &mut [C<T>]) {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    if n > T::zero() {
        for z in v.iter_mut() {
            *z = *z / n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    type M = DenseTensor<f64>;

    fn pauli_y() -> M {
        M::from_rows(&[&[(0.0, 0.0), (0.0, -1.0)], &[(0.0, 1.0), (0.0, 0.0)]])
    }

    fn pauli_z() -> M {
        M::from_rows(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]])
    }

    fn random_hermitian(n: usize, seed: u64) -> M {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        M::random_gaussian(&[n, n], &mut rng).hermitian_part()
    }

    /// Truncated power series of exp(X), summed until terms fall below 1e-17.
    fn expm_series(x: &M) -> M {
        let n = x.rows();
        let mut term = M::identity(n);
        let mut sum = M::identity(n);
        for k in 1..200 {
            term = term.matmul(x).unwrap().scale_real(1.0 / k as f64);
            sum = sum.add(&term).unwrap();
            if term.norm() < 1e-17 {
                break;
            }
        }
        sum
    }

    #[test]
    fn sigma_z_smallest() {
        let (v, x) = herm_eig_extreme(&pauli_z(), Which::Smallest).unwrap();
        assert!((v + 1.0).abs() < 1e-14);
        assert!(x.data()[0].norm() < 1e-14);
        assert!((x.data()[1].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_smallest_has_tiny_residual() {
        let id = M::identity(5);
        let (v, x) = herm_eig_extreme(&id, Which::Smallest).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!((x.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = M::from_rows(&[&[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]]);
        assert!(matches!(herm_eig(&m), Err(Error::Validation(_))));
        assert!(matches!(unitary_exp(&m, 0.1), Err(Error::Validation(_))));
    }

    #[test]
    fn random_hermitian_full_spectrum() {
        let h = random_hermitian(8, 42);
        let (vals, vecs) = herm_eig(&h).unwrap();
        // residual of every pair, orthonormality, and trace identities
        for k in 0..8 {
            let v = M::from_fn(&[8, 1], |ix| vecs.at(ix[0], k));
            let hv = h.matmul(&v).unwrap();
            assert!(hv.sub(&v.scale_real(vals[k])).unwrap().norm() < 1e-12);
        }
        assert!(vecs.unitarity_defect() < 1e-12);
        let tr: f64 = vals.iter().sum();
        assert!((tr - h.trace().re).abs() < 1e-12);
        let tr2: f64 = vals.iter().map(|x| x * x).sum();
        assert!((tr2 - h.matmul(&h).unwrap().trace().re).abs() < 1e-10);
        // extreme agrees with the full spectrum
        let (lo, _) = herm_eig_extreme(&h, Which::Smallest).unwrap();
        let (hi, _) = herm_eig_extreme(&h, Which::Largest).unwrap();
        assert_eq!(lo, vals[0]);
        assert_eq!(hi, vals[7]);
    }

    #[test]
    fn svd_identity_and_rank_one() {
        let r = svd_matrix(&M::identity(2), None).unwrap();
        assert!((r.singular_values[0] - 1.0).abs() < 1e-14 && (r.singular_values[1] - 1.0).abs() < 1e-14);

        let u = M::from_rows(&[&[(1.0, 0.0)], &[(2.0, 1.0)], &[(0.0, -1.0)]]);
        let v = M::from_rows(&[&[(0.5, 0.5)], &[(-1.0, 0.0)]]);
        let outer = u.matmul(&v.dagger()).unwrap();
        let r = svd_matrix(&outer, None).unwrap();
        let expect = u.norm() * v.norm();
        assert!((r.singular_values[0] - expect).abs() < 1e-12);
        assert!(r.singular_values[1] < 1e-12);
        assert!(r.left_isometry.unitarity_defect() < 1e-12);
    }

    #[test]
    fn svd_random_against_gram_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = M::random_gaussian(&[4, 4], &mut rng);
        let r = svd_matrix(&t, None).unwrap();
        assert!(r.reconstruct().max_abs_diff(&t) < 1e-12);
        let gram = t.dagger().matmul(&t).unwrap();
        let (ev, _) = herm_eig(&gram).unwrap();
        let mut from_eig: Vec<f64> = ev.iter().map(|x| x.max(0.0).sqrt()).collect();
        from_eig.reverse();
        for (a, b) in r.singular_values.iter().zip(&from_eig) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(r.left_isometry.unitarity_defect() < 1e-12);
        assert!(r.right_isometry.dagger().unitarity_defect() < 1e-12);
    }

    #[test]
    fn svd_truncation_error_matches_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = M::random_gaussian(&[5, 3], &mut rng);
        let r = svd_matrix(&t, Some(2)).unwrap();
        let err = r.reconstruct().sub(&t).unwrap().norm();
        assert!((err - r.truncation_error).abs() < 1e-12);
        let wide = M::random_gaussian(&[2, 6], &mut rng);
        let r = svd_matrix(&wide, None).unwrap();
        assert!(r.reconstruct().max_abs_diff(&wide) < 1e-12);
    }

    #[test]
    fn svd_empty_partition_is_error() {
        let t = M::zeros(&[2, 2]);
        assert!(matches!(svd(&t, &[], &[0, 1], None), Err(Error::Dimension(_))));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let u = unitary_exp(&M::zeros(&[3, 3]), 0.7).unwrap();
        assert!(u.max_abs_diff(&M::identity(3)) < 1e-15);
    }

    #[test]
    fn exp_sigma_y_quarter_turn() {
        let u = unitary_exp(&pauli_y(), std::f64::consts::FRAC_PI_2).unwrap();
        let x = pauli_y().scale(Complex::new(0.0, std::f64::consts::FRAC_PI_2));
        let oracle = expm_series(&x);
        let expect = M::from_rows(&[&[(0.0, 0.0), (1.0, 0.0)], &[(-1.0, 0.0), (0.0, 0.0)]]);
        assert!(oracle.max_abs_diff(&expect) < 1e-14);
        assert!(u.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn exp_random_against_series() {
        let k = random_hermitian(4, 17);
        let u = unitary_exp(&k, 0.1).unwrap();
        assert!(u.unitarity_defect() < 1e-12);
        let oracle = expm_series(&k.scale(Complex::new(0.0, 0.1)));
        assert!(u.max_abs_diff(&oracle) < 1e-13);
        let back = unitary_exp(&k, -0.1).unwrap();
        assert!(u.matmul(&back).unwrap().max_abs_diff(&M::identity(4)) < 1e-12);
    }

    #[test]
    fn qr_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for shape in [[6, 3], [3, 6], [4, 4]] {
            let a = M::random_gaussian(&shape, &mut rng);
            let (q, r) = qr(&a).unwrap();
            assert!(q.matmul(&r).unwrap().max_abs_diff(&a) < 1e-12);
            assert!(q.unitarity_defect() < 1e-12);
        }
        // rank deficient input still yields an isometric Q
        let z = M::zeros(&[4, 2]);
        let (q, _) = qr(&z).unwrap();
        assert!(q.unitarity_defect() < 1e-12);
    }

    #[test]
    fn completion_is_unitary() {
        let v = M::from_rows(&[&[(0.6, 0.0)], &[(0.0, 0.8)], &[(0.0, 0.0)]]);
        let u = complete_unitary(&v).unwrap();
        assert!(u.unitarity_defect() < 1e-14);
        assert!((u.at(1, 0) - Complex::new(0.0, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn general_eigenvalues_match_hermitian_and_triangular_cases() {
        let h = random_hermitian(6, 3);
        let (ev, _) = herm_eig(&h).unwrap();
        let mut g: Vec<f64> = eigvals_general(&h).unwrap().iter().map(|z| z.re).collect();
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in g.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-10);
        }
        // rotation matrix has eigenvalues e^{±iθ}
        let th = 0.3f64;
        let rot = M::from_rows(&[&[(th.cos(), 0.0), (-th.sin(), 0.0)], &[(th.sin(), 0.0), (th.cos(), 0.0)]]);
        let ev = eigvals_general(&rot).unwrap();
        for z in ev {
            assert!((z.norm() - 1.0).abs() < 1e-12);
            assert!((z.im.abs() - th.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn general_eigenvector_by_inverse_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = M::random_gaussian(&[5, 5], &mut rng);
        for lam in eigvals_general(&a).unwrap() {
            let v = eigvec_general(&a, lam).unwrap();
            let vm = M::from_vec(&[5, 1], v).unwrap();
            let res = a.matmul(&vm).unwrap().sub(&vm.scale(lam)).unwrap().norm();
            assert!(res < 1e-9, "residual {res}");
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let h = random_hermitian(40, 8);
        let (ev, _) = herm_eig(&h).unwrap();
        let apply = |x: &[C<f64>]| {
            let v = M::from_vec(&[40, 1], x.to_vec()).unwrap();
            h.matmul(&v).unwrap().into_data()
        };
        let opts = LanczosOptions { krylov_dim: 15, ..Default::default() };
        let (e, _, res) = lanczos_ground(40, apply, &opts).unwrap();
        assert!((e - ev[0]).abs() < 1e-10);
        assert!(res < 1e-9);
    }
}
