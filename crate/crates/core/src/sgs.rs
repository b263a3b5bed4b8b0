//! Sequentially generated states: row MPS followed by column unitaries.
//!
//! Rows are numbered from the top (row 0) to the bottom (row `H-1`) of the
//! effective lattice. The unitary `U[b,c]` acts on rows `b-M ..= b` of column
//! `c`; its output and input modes list those rows top first. Each column
//! applies `U[H-1,c]` first and then moves upwards to `U[M,c]`, so there are
//! `H-M` unitaries per column. A block size `N > 1` turns the state into a
//! B-SGS whose effective sites group `N` physical rows (top row most
//! significant).

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, val_err, Error, Result};
use crate::lattice::LatticeSpec;
use crate::linalg;
use crate::mps::{self, MPSRow};
use crate::scalar::{cast_c, cone, czero, real, tol, Real, C};
use crate::statevec;
use crate::tensor::{contract, DenseTensor};

/// Default cap on statevector length for brute-force paths.
pub const STATEVECTOR_CAP: usize = 1 << 22;

/// Rejection threshold for non-unitary column gates.
pub const UNITARITY_TOL: f64 = 1e-8;

/// Rejection threshold for unnormalized rows.
pub const NORM_TOL: f64 = 1e-10;

pub const CONVENTIONS: &str = "rows top-to-bottom from 0; U[b,c] acts on rows b-M..=b, modes (out rows top first) x (in rows top first); columns apply b = H-1 down to M; effective site = N physical rows, top row most significant";

const MAGIC: &[u8; 8] = b"SGSSTATE";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SGSParams {
    /// Physical lattice.
    pub spec: LatticeSpec,
    /// Vertical span minus one; column gates act on `M+1` effective rows.
    pub m: usize,
    /// Row-MPS bond dimension.
    pub bond: usize,
    /// Rows per effective site; 1 is plain SGS.
    pub block: usize,
}

impl SGSParams {
    pub fn new(spec: LatticeSpec, m: usize, bond: usize, block: usize) -> Result<Self> {
        let p = SGSParams { spec, m, bond, block };
        p.validate()?;
        Ok(p)
    }

    /// Plain SGS with `D = d^M`.
    pub fn plain(spec: LatticeSpec, m: usize) -> Result<Self> {
        Self::new(spec, m, spec.local_dim.pow(m as u32), 1)
    }

    pub fn validate(&self) -> Result<()> {
        LatticeSpec::new(self.spec.rows, self.spec.cols, self.spec.local_dim)?;
        if self.m == 0 {
            return Err(val_err!("M must be at least 1"));
        }
        if self.bond == 0 {
            return Err(val_err!("bond dimension must be at least 1"));
        }
        if self.block == 0 || self.spec.rows % self.block != 0 {
            return Err(val_err!("{} rows are not divisible into blocks of {}", self.spec.rows, self.block));
        }
        let gate = (self.local_dim() as u128).checked_pow(self.m as u32 + 1);
        if gate.map_or(true, |g| g > 1 << 16) {
            return Err(Error::Resource("column unitary dimension exceeds 65536".into()));
        }
        Ok(())
    }

    /// Effective lattice (rows/N, cols, d^N).
    pub fn effective(&self) -> LatticeSpec {
        LatticeSpec { rows: self.spec.rows / self.block, cols: self.spec.cols, local_dim: self.local_dim() }
    }

    pub fn rows(&self) -> usize {
        self.spec.rows / self.block
    }

    pub fn cols(&self) -> usize {
        self.spec.cols
    }

    /// Effective local dimension `d^N`.
    pub fn local_dim(&self) -> usize {
        self.spec.local_dim.pow(self.block as u32)
    }

    /// `d^(N(M+1))`.
    pub fn unitary_dim(&self) -> usize {
        self.local_dim().pow(self.m as u32 + 1)
    }

    pub fn unitaries_per_column(&self) -> usize {
        self.rows().saturating_sub(self.m)
    }

    /// Bottom rows `b` of the column unitaries in application order.
    pub fn unitary_rows(&self) -> impl Iterator<Item = usize> {
        (self.m..self.rows()).rev()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgsState<T: Real = f64> {
    pub params: SGSParams,
    pub rows: Vec<MPSRow<T>>,
    /// `unitaries[c][b - M]`.
    pub unitaries: Vec<Vec<DenseTensor<T>>>,
    /// Seed the state was drawn from, if any.
    pub seed: Option<u64>,
}

impl<T: Real> SgsState<T> {
    /// Validated constructor.
    pub fn new(params: SGSParams, rows: Vec<MPSRow<T>>, unitaries: Vec<Vec<DenseTensor<T>>>) -> Result<Self> {
        let s = Self::new_unchecked(params, rows, unitaries)?;
        s.validate()?;
        Ok(s)
    }

    /// Checks shapes only; normalization and unitarity are not enforced.
    pub fn new_unchecked(params: SGSParams, rows: Vec<MPSRow<T>>, unitaries: Vec<Vec<DenseTensor<T>>>) -> Result<Self> {
        params.validate()?;
        let s = SgsState { params, rows, unitaries, seed: None };
        s.check_shapes()?;
        Ok(s)
    }

    pub fn with_identity_unitaries(params: SGSParams, rows: Vec<MPSRow<T>>) -> Result<Self> {
        let u = DenseTensor::identity(params.unitary_dim());
        let unitaries = vec![vec![u; params.unitaries_per_column()]; params.cols()];
        Self::new(params, rows, unitaries)
    }

    /// `|0...0>` with identity unitaries.
    pub fn zero_state(params: SGSParams) -> Result<Self> {
        let rows = (0..params.rows()).map(|_| MPSRow::basis(params.cols(), params.local_dim(), 0)).collect();
        Self::with_identity_unitaries(params, rows)
    }

    /// Random normalized rows and Haar-type random unitaries.
    pub fn random(params: SGSParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self::random_with(params, &mut rng, None)?;
        s.seed = Some(seed);
        Ok(s)
    }

    /// Random rows; unitaries `exp(i·scale·K)` for random Hermitian `K` when
    /// `near_identity = Some(scale)`, Haar-type otherwise.
    pub fn random_with<R: Rng + ?Sized>(params: SGSParams, rng: &mut R, near_identity: Option<f64>) -> Result<Self> {
        params.validate()?;
        let rows = (0..params.rows())
            .map(|_| mps::random_mps_with(params.cols(), params.local_dim(), params.bond, rng))
            .collect::<Result<Vec<_>>>()?;
        let dim = params.unitary_dim();
        let mut unitaries = Vec::with_capacity(params.cols());
        for _ in 0..params.cols() {
            let mut col = Vec::with_capacity(params.unitaries_per_column());
            for _ in 0..params.unitaries_per_column() {
                col.push(match near_identity {
                    Some(scale) => near_identity_unitary(dim, scale, rng)?,
                    None => random_unitary(dim, rng)?,
                });
            }
            unitaries.push(col);
        }
        Self::new(params, rows, unitaries)
    }

    fn check_shapes(&self) -> Result<()> {
        let p = &self.params;
        if self.rows.len() != p.rows() {
            return Err(dim_err!("{} row MPS for {} effective rows", self.rows.len(), p.rows()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            row.validate()?;
            if row.len() != p.cols() || row.phys_dim() != p.local_dim() {
                return Err(dim_err!("row {r}: length {} dim {}, expected {} and {}", row.len(), row.phys_dim(), p.cols(), p.local_dim()));
            }
            if row.max_bond() > p.bond {
                return Err(dim_err!("row {r} bond {} exceeds D = {}", row.max_bond(), p.bond));
            }
        }
        if self.unitaries.len() != p.cols() {
            return Err(dim_err!("{} unitary columns for {} columns", self.unitaries.len(), p.cols()));
        }
        let dim = p.unitary_dim();
        for (c, col) in self.unitaries.iter().enumerate() {
            if col.len() != p.unitaries_per_column() {
                return Err(dim_err!("column {c} has {} unitaries, expected {}", col.len(), p.unitaries_per_column()));
            }
            for u in col {
                if u.shape() != [dim, dim] {
                    return Err(dim_err!("column {c} unitary shape {:?}, expected {dim}x{dim}", u.shape()));
                }
            }
        }
        Ok(())
    }

    /// Shapes, row normalization and unitarity.
    pub fn validate(&self) -> Result<()> {
        self.check_shapes()?;
        for (r, row) in self.rows.iter().enumerate() {
            let n = row.norm();
            if (n - T::one()).abs() > tol::<T>(NORM_TOL) {
                return Err(val_err!("row {r} has norm {n}"));
            }
        }
        for (c, col) in self.unitaries.iter().enumerate() {
            for (k, u) in col.iter().enumerate() {
                let defect = u.unitarity_defect();
                if defect > tol::<T>(UNITARITY_TOL) {
                    return Err(val_err!("U[{},{c}] has unitarity defect {defect}", k + self.params.m));
                }
            }
        }
        Ok(())
    }

    pub fn unitary(&self, b: usize, c: usize) -> &DenseTensor<T> {
        &self.unitaries[c][b - self.params.m]
    }

    pub fn set_unitary(&mut self, b: usize, c: usize, u: DenseTensor<T>) {
        self.unitaries[c][b - self.params.m] = u;
    }

    /// Rows `b-M ..= b` touched by `U[b, ·]`.
    pub fn unitary_span(&self, b: usize) -> std::ops::RangeInclusive<usize> {
        b - self.params.m..=b
    }

    /// Statevector on the effective lattice, site `(r,c)` at position `r·V+c`.
    pub fn effective_statevector(&self, cap: usize) -> Result<DenseTensor<T>> {
        let eff = self.params.effective();
        let dim = eff.hilbert_dim().filter(|&x| x <= cap).ok_or_else(|| Error::Resource(format!("statevector exceeds cap {cap}")))?;
        let mut psi = DenseTensor::<T>::scalar(cone());
        for row in &self.rows {
            psi = psi.outer(&row.statevector());
        }
        let psi = psi.into_reshaped(&[dim])?;
        let mut psi = psi.into_data();
        debug_assert_eq!(psi.len(), dim);
        let (n, d, v) = (eff.sites(), eff.local_dim, eff.cols);
        for c in 0..v {
            for b in self.params.unitary_rows() {
                let sites: Vec<usize> = self.unitary_span(b).map(|r| r * v + c).collect();
                statevec::apply_gate(&mut psi, n, d, &sites, self.unitary(b, c))?;
            }
        }
        DenseTensor::from_vec(&[dim], psi)
    }

    /// Statevector over physical sites in row-major order.
    pub fn to_statevector(&self) -> Result<DenseTensor<T>> {
        self.to_statevector_capped(STATEVECTOR_CAP)
    }

    pub fn to_statevector_capped(&self, cap: usize) -> Result<DenseTensor<T>> {
        let psi = self.effective_statevector(cap)?;
        effective_to_physical(&self.params, psi)
    }

    /// `Π_r ‖φ_r‖`.
    pub fn row_norm_product(&self) -> T {
        self.rows.iter().map(|r| r.norm()).fold(T::one(), |a, b| a * b)
    }

    /// Largest unitarity defect over all column gates.
    pub fn max_unitarity_defect(&self) -> T {
        self.unitaries.iter().flatten().map(|u| u.unitarity_defect()).fold(T::zero(), T::max)
    }

    pub fn cast<S: Real>(&self) -> SgsState<S> {
        let ct = |t: &DenseTensor<T>| DenseTensor::<S>::from_vec(t.shape(), t.data().iter().map(|z| cast_c(*z)).collect()).expect("same shape");
        SgsState {
            params: self.params,
            rows: self.rows.iter().map(|r| MPSRow { tensors: r.tensors.iter().map(ct).collect(), center: r.center }).collect(),
            unitaries: self.unitaries.iter().map(|col| col.iter().map(ct).collect()).collect(),
            seed: self.seed,
        }
    }
}

/// Reorders an effective-lattice statevector into physical row-major order.
pub fn effective_to_physical<T: Real>(p: &SGSParams, psi: DenseTensor<T>) -> Result<DenseTensor<T>> {
    if p.block == 1 {
        return Ok(psi);
    }
    let (hb, v, n, d) = (p.rows(), p.cols(), p.block, p.spec.local_dim);
    let total = hb * v * n;
    let t = psi.into_reshaped(&vec![d; total])?;
    // effective digit order (R, c, s); physical order (R, s, c)
    let mut perm = Vec::with_capacity(total);
    for rr in 0..hb {
        for s in 0..n {
            for c in 0..v {
                perm.push((rr * v + c) * n + s);
            }
        }
    }
    let len = t.len();
    t.permute(&perm).into_reshaped(&[len])
}

/// Haar-type random unitary from the QR decomposition of a complex Gaussian
/// matrix with the diagonal phases of `R` removed.
pub fn random_unitary<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DenseTensor<T>> {
    let g = DenseTensor::<T>::random_gaussian(&[dim, dim], rng);
    let (q, r) = linalg::qr(&g)?;
    let mut q = q;
    for j in 0..dim {
        let z = r.at(j, j);
        let ph = if z.norm() > T::zero() { z / crate::scalar::from_real(z.norm()) } else { cone() };
        for i in 0..dim {
            *q.at_mut(i, j) = q.at(i, j) * ph;
        }
    }
    Ok(q)
}

/// Random Hermitian matrix with unit Frobenius norm.
pub fn random_hermitian<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DenseTensor<T> {
    let h = DenseTensor::<T>::random_gaussian(&[dim, dim], rng).hermitian_part();
    let n = h.norm();
    h.scale_real(T::one() / n)
}

/// `exp(i·scale·K)` for a random unit-norm Hermitian `K`.
pub fn near_identity_unitary<T: Real, R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> Result<DenseTensor<T>> {
    let k = random_hermitian::<T, R>(dim, rng);
    linalg::unitary_exp(&k, real(scale))
}

/// PEPS tensors with modes `(l, u, r, d, phys)`, `tensors[r][c]`.
#[derive(Debug, Clone)]
pub struct Peps<T: Real = f64> {
    pub tensors: Vec<Vec<DenseTensor<T>>>,
}

impl<T: Real> Peps<T> {
    pub fn rows(&self) -> usize {
        self.tensors.len()
    }

    pub fn cols(&self) -> usize {
        self.tensors.first().map_or(0, |r| r.len())
    }

    pub fn max_horizontal_bond(&self) -> usize {
        self.tensors.iter().flatten().map(|b| b.shape()[0].max(b.shape()[2])).max().unwrap_or(1)
    }

    pub fn max_vertical_bond(&self) -> usize {
        self.tensors.iter().flatten().map(|b| b.shape()[1].max(b.shape()[3])).max().unwrap_or(1)
    }

    /// Contracts every virtual bond, returning the physical statevector
    /// (row-major site order). Exponential cost; small lattices only.
    pub fn contract_all(&self, cap: usize) -> Result<DenseTensor<T>> {
        let (h, v) = (self.rows(), self.cols());
        // x modes: phys (p of them), frontier bonds (v), horizontal bond
        let mut x = DenseTensor::<T>::from_vec(&vec![1; v + 1], vec![cone()])?;
        let mut p = 0usize;
        for r in 0..h {
            for c in 0..v {
                let b = &self.tensors[r][c];
                if b.rank() != 5 {
                    return Err(dim_err!("PEPS tensor ({r},{c}) has rank {}", b.rank()));
                }
                // contract frontier[c] with u and h with l
                let t = contract(&x, &[p + c, p + v], b, &[1, 0])?;
                // t modes: phys(p), frontier without c (v-1), r, d, i
                let (rr, dd, ii) = (p + v - 1, p + v, p + v + 1);
                let mut perm: Vec<usize> = (0..p).collect();
                perm.push(ii);
                for k in 0..v {
                    perm.push(match k.cmp(&c) {
                        std::cmp::Ordering::Less => p + k,
                        std::cmp::Ordering::Equal => dd,
                        std::cmp::Ordering::Greater => p + k - 1,
                    });
                }
                perm.push(rr);
                x = t.permute(&perm);
                p += 1;
                if x.len() > cap {
                    return Err(Error::Resource(format!("PEPS contraction exceeds cap {cap}")));
                }
            }
        }
        for (k, &e) in x.shape()[p..].iter().enumerate() {
            if e != 1 {
                return Err(dim_err!("open boundary bond {k} has extent {e}"));
            }
        }
        let n = x.len();
        x.into_reshaped(&[n])
    }
}

/// Splits a column segment `T(l, u, r, d, p_0, ..., p_{k-1})` into `k`
/// single-site tensors by successive SVDs, keeping every singular value.
/// The horizontal bonds stay on sub-site `host`.
fn split_column<T: Real>(t: &DenseTensor<T>, k: usize, host: usize) -> Result<Vec<DenseTensor<T>>> {
    let mut out = Vec::with_capacity(k);
    let mut x = t.clone();
    for s in 0..k - 1 {
        // x modes: l, u, r, d, p_s .. p_{k-1}
        let rest: Vec<usize> = (5..4 + (k - s)).collect();
        let (row_modes, col_modes): (Vec<usize>, Vec<usize>) = if s == host {
            (vec![0, 1, 2, 4], [3].into_iter().chain(rest.iter().copied()).collect())
        } else {
            (vec![1, 4], [0, 2, 3].into_iter().chain(rest.iter().copied()).collect())
        };
        let f = linalg::svd(&x, &row_modes, &col_modes, None)?;
        let kk = f.rank();
        let sv = DenseTensor::from_fn(&[kk, kk], |ix| if ix[0] == ix[1] { crate::scalar::from_real(f.singular_values[ix[0]]) } else { czero() });
        let rem = sv.matmul(&f.right_isometry)?;
        let xs = x.shape().to_vec();
        let tail: Vec<usize> = rest.iter().map(|&m| xs[m]).collect();
        if s == host {
            let b = f.left_isometry.into_reshaped(&[xs[0], xs[1], xs[2], xs[4], kk])?.permute(&[0, 1, 2, 4, 3]);
            out.push(b);
            let mut shape = vec![kk, xs[3]];
            shape.extend(&tail);
            let rem = rem.into_reshaped(&shape)?;
            // -> l=1, u=kk, r=1, d, tail
            let mut full = vec![1, kk, 1, xs[3]];
            full.extend(&tail);
            x = rem.into_reshaped(&full)?;
        } else {
            let b = f.left_isometry.into_reshaped(&[1, xs[1], 1, xs[4], kk])?.permute(&[0, 1, 2, 4, 3]);
            out.push(b);
            let mut shape = vec![kk, xs[0], xs[2], xs[3]];
            shape.extend(&tail);
            let rem = rem.into_reshaped(&shape)?;
            let mut perm = vec![1, 0, 2, 3];
            perm.extend(4..4 + tail.len());
            x = rem.permute(&perm);
        }
    }
    out.push(x);
    Ok(out)
}

/// `U` as a tensor with `2(M+1)` modes of extent `d`.
fn unitary_tensor<T: Real>(u: &DenseTensor<T>, d: usize, span: usize) -> Result<DenseTensor<T>> {
    u.reshape(&vec![d; 2 * span])
}

/// PEPS export of a plain SGS (block size 1).
///
/// Bulk rows follow `B[r,c](l,u,r,d,i) = Σ_j U[r,c]((u,i),(j,d)) A[r-M,c](l,j,r)`.
/// The bottom row also absorbs the rows below `H-1-M` (horizontal bond
/// `D^(M+1)`); the topmost unitary is split over rows `0..=M` by SVD.
pub fn to_peps<T: Real>(s: &SgsState<T>) -> Result<Peps<T>> {
    if s.params.block > 1 {
        return bsgs_to_peps(s);
    }
    plain_peps(s)
}

fn plain_peps<T: Real>(s: &SgsState<T>) -> Result<Peps<T>> {
    let p = &s.params;
    let (h, v, d, m) = (p.rows(), p.cols(), p.local_dim(), p.m);
    let all_identity = s.unitaries.iter().flatten().all(|u| u.max_abs_diff(&DenseTensor::identity(u.rows())) == T::zero());
    if h <= m || all_identity {
        let tensors = s
            .rows
            .iter()
            .map(|row| row.tensors.iter().map(|a| direct_site(a)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        return Ok(Peps { tensors });
    }
    let span = m + 1;
    let dm = d.pow(m as u32);
    let mut grid: Vec<Vec<Option<DenseTensor<T>>>> = vec![vec![None; v]; h];
    for c in 0..v {
        for b in p.unitary_rows() {
            let u = unitary_tensor(s.unitary(b, c), d, span)?;
            // contract A[b-M] phys with input slot 0 (mode span)
            let a = &s.rows[b - m].tensors[c];
            let mut t = contract(&u, &[span], a, &[1])?;
            // modes: out_0..out_M (span), in_1..in_M (m), l0, r0
            let mut lefts = vec![t.rank() - 2];
            let mut rights = vec![t.rank() - 1];
            if b == h - 1 {
                for kk in 1..=m {
                    let a = &s.rows[b - m + kk].tensors[c];
                    // input slot kk is currently at position span + kk - 1 minus already-consumed slots
                    t = contract(&t, &[span], a, &[1])?;
                    let rank = t.rank();
                    for x in lefts.iter_mut().chain(rights.iter_mut()) {
                        *x -= 1;
                    }
                    lefts.push(rank - 2);
                    rights.push(rank - 1);
                }
            }
            let shape = t.shape().to_vec();
            let ldim: usize = lefts.iter().map(|&k| shape[k]).product();
            let rdim: usize = rights.iter().map(|&k| shape[k]).product();
            let n_in = if b == h - 1 { 0 } else { m };
            let ins: Vec<usize> = (span..span + n_in).collect();
            // order: l, u (out_0..out_{M-1}), r, d (ins), out_M
            let mut perm: Vec<usize> = lefts.clone();
            perm.extend(0..m);
            perm.extend(rights.iter().copied());
            perm.extend(ins.iter().copied());
            perm.push(m);
            let t = t.permute(&perm);
            let ddim = d.pow(n_in as u32);
            if b > m {
                grid[b][c] = Some(t.into_reshaped(&[ldim, dm, rdim, ddim, d])?);
            } else {
                // top unitary: outputs 0..M are physical rows 0..=M
                // (l, out_0..out_{M-1}, r, d, out_M) -> (l, 1, r, d, out_0..out_M)
                let t = t.into_reshaped(&[ldim, dm, rdim, ddim, d])?.permute(&[0, 2, 3, 1, 4]);
                let mut shape = vec![ldim, 1, rdim, ddim];
                shape.extend(std::iter::repeat(d).take(span));
                let t = t.into_reshaped(&shape)?;
                for (r, bt) in split_column(&t, span, m)?.into_iter().enumerate() {
                    grid[r][c] = Some(bt);
                }
            }
        }
    }
    let tensors = grid.into_iter().map(|row| row.into_iter().map(|b| b.expect("every site filled")).collect()).collect();
    Ok(Peps { tensors })
}

fn direct_site<T: Real>(a: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let s = a.shape();
    a.reshape(&[s[0], 1, s[1], 1, s[2]]).map(|t| t.permute(&[0, 1, 4, 3, 2]))
}

/// B-SGS export: the effective PEPS is built first, then each effective
/// tensor is split into `N` physical tensors (horizontal bonds on the top one).
fn bsgs_to_peps<T: Real>(s: &SgsState<T>) -> Result<Peps<T>> {
    let p = s.params;
    let eff = SGSParams { spec: p.effective(), m: p.m, bond: p.bond, block: 1 };
    let plain = SgsState { params: eff, rows: s.rows.clone(), unitaries: s.unitaries.clone(), seed: s.seed };
    let ep = plain_peps(&plain)?;
    let (n, d) = (p.block, p.spec.local_dim);
    let mut tensors: Vec<Vec<DenseTensor<T>>> = vec![Vec::with_capacity(p.cols()); p.spec.rows];
    for (rr, row) in ep.tensors.iter().enumerate() {
        for b in row {
            let sh = b.shape().to_vec();
            let mut shape = sh[..4].to_vec();
            shape.extend(std::iter::repeat(d).take(n));
            let t = b.reshape(&shape)?;
            for (k, piece) in split_column(&t, n, 0)?.into_iter().enumerate() {
                tensors[rr * n + k].push(piece);
            }
        }
    }
    Ok(Peps { tensors })
}

/// 2D cluster state: rows are 1D cluster states (bond 2), column gates are
/// controlled-Z on vertical neighbors.
pub fn cluster_state<T: Real>(spec: LatticeSpec) -> Result<SgsState<T>> {
    if spec.local_dim != 2 {
        return Err(val_err!("cluster state needs d = 2"));
    }
    let params = SGSParams::new(spec, 1, 2, 1)?;
    let v = spec.cols;
    let amp = real::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let row_tensors: Vec<DenseTensor<T>> = (0..v)
        .map(|c| {
            let dl = if c == 0 { 1 } else { 2 };
            let dr = if c + 1 == v { 1 } else { 2 };
            DenseTensor::from_fn(&[dl, 2, dr], |ix| {
                let (a, i, b) = (ix[0], ix[1], ix[2]);
                if dr == 2 && b != i {
                    return czero();
                }
                let sign = if a * i == 1 { -amp } else { amp };
                crate::scalar::from_real(sign)
            })
        })
        .collect();
    let row = MPSRow::new(row_tensors)?;
    let rows = vec![row; spec.rows];
    let cz = DenseTensor::from_fn(&[4, 4], |ix| {
        if ix[0] != ix[1] {
            czero()
        } else if ix[0] == 3 {
            -cone::<T>()
        } else {
            cone()
        }
    });
    let unitaries = vec![vec![cz; params.unitaries_per_column()]; v];
    SgsState::new(params, rows, unitaries)
}

/// One gate of a preparation sequence: `matrix` acts on `sites` (physical
/// coordinates, first most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct Gate<T: Real = f64> {
    pub matrix: DenseTensor<T>,
    pub sites: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepSequence<T: Real = f64> {
    pub spec: LatticeSpec,
    pub gates: Vec<Gate<T>>,
}

#[derive(Serialize, Deserialize)]
struct GateJson {
    sites: Vec<(usize, usize)>,
    dim: usize,
    /// Row-major `[re, im]` pairs.
    matrix: Vec<[f64; 2]>,
}

impl<T: Real> PrepSequence<T> {
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Applies the gates in order to `|0...0>`.
    pub fn replay(&self) -> Result<DenseTensor<T>> {
        let n = self.spec.sites();
        let d = self.spec.local_dim;
        let dim = self.spec.hilbert_dim().filter(|&x| x <= STATEVECTOR_CAP).ok_or_else(|| Error::Resource("replay exceeds statevector cap".into()))?;
        let mut psi = vec![czero::<T>(); dim];
        psi[0] = cone();
        for g in &self.gates {
            let sites: Vec<usize> = g.sites.iter().map(|&(r, c)| self.spec.index(r, c)).collect();
            statevec::apply_gate(&mut psi, n, d, &sites, &g.matrix)?;
        }
        DenseTensor::from_vec(&[dim], psi)
    }

    pub fn to_json(&self) -> Result<String> {
        let gates: Vec<GateJson> = self
            .gates
            .iter()
            .map(|g| GateJson {
                sites: g.sites.clone(),
                dim: g.matrix.rows(),
                matrix: g.matrix.data().iter().map(|z| [crate::scalar::to_f64(z.re), crate::scalar::to_f64(z.im)]).collect(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&serde_json::json!({ "spec": self.spec, "gates": gates }))?)
    }
}

/// Gate-level preparation: staircase gates on `k+1` sites per row (from the
/// right-canonical row MPS, `k` the least power with `d^k ≥` the row bond,
/// so `k = M` when `D = d^M`), then `H-M` gates per column. A row with
/// `V ≤ k` is prepared by one gate on the whole row.
pub fn prepare_sequence<T: Real>(s: &SgsState<T>) -> Result<PrepSequence<T>> {
    let p = &s.params;
    let (h, v, d, n) = (p.rows(), p.cols(), p.local_dim(), p.block);
    let phys = |rr: usize, c: usize| -> Vec<(usize, usize)> { (0..n).map(|k| (rr * n + k, c)).collect() };
    let mut gates = Vec::new();
    for (rr, row) in s.rows.iter().enumerate() {
        let k = (1..).find(|&k| d.pow(k) >= row.max_bond()).expect("finite bond") as usize;
        let can = mps::canonicalize(row, 0)?;
        for (c0, g) in row_gates(&can, k)? {
            let span = g.rows().ilog(d) as usize;
            let sites = (c0..c0 + span).flat_map(|c| phys(rr, c)).collect();
            gates.push(Gate { matrix: g, sites });
        }
    }
    for c in 0..v {
        for b in p.unitary_rows() {
            let sites = s.unitary_span(b).flat_map(|r| phys(r, c)).collect();
            gates.push(Gate { matrix: s.unitary(b, c).clone(), sites });
        }
    }
    debug_assert!(h > 0);
    Ok(PrepSequence { spec: p.spec, gates })
}

/// Staircase gates `(first site, unitary)` for a row canonical at site 0.
fn row_gates<T: Real>(row: &MPSRow<T>, m: usize) -> Result<Vec<(usize, DenseTensor<T>)>> {
    let v = row.len();
    let d = row.phys_dim();
    if v <= m {
        let psi = row.statevector();
        let n = psi.len();
        let iso = psi.into_reshaped(&[n, 1])?.scale_real(T::one() / row.norm());
        return Ok(vec![(0, linalg::complete_unitary(&iso)?)]);
    }
    let dm = d.pow(m as u32);
    let gdim = dm * d;
    let mut out = Vec::with_capacity(v - m);
    for k in 0..v - m {
        let a = &row.tensors[k];
        let (dl, dr) = (a.shape()[0], a.shape()[2]);
        // isometry columns indexed by α; rows by (i, β) with β padded to d^M
        let last = k == v - m - 1;
        let body: DenseTensor<T> = if last {
            // absorb the tail sites k+1..V-1: T[β, tail]
            let mut tail = DenseTensor::<T>::identity(dr).into_reshaped(&[dr, 1, dr])?;
            for a2 in &row.tensors[k + 1..] {
                let t = contract(&tail, &[2], a2, &[0])?;
                let s = t.shape().to_vec();
                tail = t.into_reshaped(&[s[0], s[1] * s[2], s[3]])?;
            }
            let tail = tail.into_reshaped(&[dr, dm])?;
            let t = contract(a, &[2], &tail, &[0])?; // (α, i, tails)
            t.into_reshaped(&[dl, d * dm])?
        } else {
            let mut padded = DenseTensor::<T>::zeros(&[dl, d, dm]);
            for al in 0..dl {
                for i in 0..d {
                    for be in 0..dr {
                        padded.set(&[al, i, be], a.get(&[al, i, be]));
                    }
                }
            }
            padded.into_reshaped(&[dl, d * dm])?
        };
        let scale = if k == 0 { T::one() / row.norm() } else { T::one() };
        let iso = body.transpose().scale_real(scale); // (d·d^M) × dl
        let q = linalg::complete_unitary(&iso)?;
        // column α of the isometry must sit at input index α·d (last site |0>)
        let mut gate = DenseTensor::<T>::zeros(&[gdim, gdim]);
        let mut used = vec![false; gdim];
        for al in 0..dl {
            used[al * d] = true;
        }
        let mut free = (0..gdim).filter(|x| !used[*x]);
        for j in 0..gdim {
            let target = if j < dl { j * d } else { free.next().expect("enough columns") };
            for i in 0..gdim {
                *gate.at_mut(i, target) = q.at(i, j);
            }
        }
        out.push((k, gate));
    }
    Ok(out)
}

/// Regroups a plain SGS into a B-SGS with blocks of `n` rows.
///
/// Effective rows are Kronecker products of the `n` physical row MPS (bond
/// `D^n`). Each plain unitary is assigned to the effective unitary of the
/// block containing its bottom row; effective unitaries span
/// `min(ceil(M/n), H/n - 1) + 1` blocks. Plain unitaries inside the topmost blocks are folded
/// into the topmost effective unitary, or into the row tensors when there is
/// no effective unitary at all.
pub fn block_rows<T: Real>(s: &SgsState<T>, n: usize) -> Result<SgsState<T>> {
    let p = s.params;
    if p.block != 1 {
        return Err(val_err!("block_rows expects a plain SGS"));
    }
    if n == 0 || p.spec.rows % n != 0 {
        return Err(val_err!("{} rows are not divisible into blocks of {n}", p.spec.rows));
    }
    if n == 1 {
        return Ok(s.clone());
    }
    let d = p.spec.local_dim;
    let hb = p.spec.rows / n;
    let m_eff = if hb >= 2 { p.m.div_ceil(n).min(hb - 1) } else { p.m.div_ceil(n) };
    let bond_eff = p.bond.checked_pow(n as u32).ok_or_else(|| Error::Resource("blocked bond overflows".into()))?;
    let params = SGSParams { spec: p.spec, m: m_eff, bond: bond_eff, block: n };
    params.validate()?;
    let de = params.local_dim();
    let mut rows = Vec::with_capacity(hb);
    for rr in 0..hb {
        let mut ts = Vec::with_capacity(p.cols());
        for c in 0..p.cols() {
            let mut t = DenseTensor::<T>::scalar(cone()).into_reshaped(&[1, 1, 1])?;
            for k in 0..n {
                let a = &s.rows[rr * n + k].tensors[c];
                let (l0, p0, r0) = (t.shape()[0], t.shape()[1], t.shape()[2]);
                let (l1, p1, r1) = (a.shape()[0], a.shape()[1], a.shape()[2]);
                t = t.outer(a).permute(&[0, 3, 1, 4, 2, 5]).into_reshaped(&[l0 * l1, p0 * p1, r0 * r1])?;
            }
            ts.push(t);
        }
        rows.push(MPSRow::new(ts)?);
    }
    let span_eff = m_eff + 1;
    let total_eff = span_eff * n;
    let mut unitaries = Vec::with_capacity(p.cols());
    for c in 0..p.cols() {
        let mut col = Vec::new();
        if hb > m_eff {
            for rb in (m_eff..hb).rev() {
                let top_row = (rb - m_eff) * n;
                let mut u = DenseTensor::<T>::identity(de.pow(span_eff as u32));
                let lowest_block = if rb == m_eff { 0 } else { rb };
                for b in p.unitary_rows().filter(|b| b / n >= lowest_block && b / n <= rb) {
                    let pos: Vec<usize> = s.unitary_span(b).map(|r| r - top_row).collect();
                    let g = statevec::embed_operator(s.unitary(b, c), d, &pos, total_eff)?;
                    u = g.matmul(&u)?;
                }
                col.push(u);
            }
        } else {
            // no effective unitaries: apply the whole column to the row tensor
            let mut w = DenseTensor::<T>::identity(d.pow(p.spec.rows as u32));
            for b in p.unitary_rows() {
                let pos: Vec<usize> = s.unitary_span(b).collect();
                let g = statevec::embed_operator(s.unitary(b, c), d, &pos, p.spec.rows)?;
                w = g.matmul(&w)?;
            }
            let a = &rows[0].tensors[c];
            rows[0].tensors[c] = contract(&w, &[1], a, &[1])?.permute(&[1, 0, 2]);
        }
        unitaries.push(col);
    }
    let mut out = SgsState::new(params, rows, unitaries)?;
    out.seed = s.seed;
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    library_version: String,
    scalar: String,
    params: SGSParams,
    conventions: String,
    seed: Option<u64>,
    row_shapes: Vec<Vec<Vec<usize>>>,
    #[serde(default)]
    row_centers: Vec<Option<usize>>,
    unitary_dim: usize,
}

impl<T: Real> SgsState<T> {
    /// Versioned binary form: magic, format version, JSON header length and
    /// header, then all tensors as little-endian complex128 (rows in order,
    /// then unitaries column by column in application-index order).
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: FORMAT_VERSION,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            scalar: "complex128".into(),
            params: self.params,
            conventions: CONVENTIONS.into(),
            seed: self.seed,
            row_shapes: self.rows.iter().map(|r| r.tensors.iter().map(|t| t.shape().to_vec()).collect()).collect(),
            row_centers: self.rows.iter().map(|r| r.center).collect(),
            unitary_dim: self.params.unitary_dim(),
        };
        let hjson = serde_json::to_vec(&header)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(hjson.len() as u64).to_le_bytes());
        out.extend_from_slice(&hjson);
        let mut put = |t: &DenseTensor<T>| {
            for z in t.data() {
                out.extend_from_slice(&crate::scalar::to_f64(z.re).to_le_bytes());
                out.extend_from_slice(&crate::scalar::to_f64(z.im).to_le_bytes());
            }
        };
        for r in &self.rows {
            r.tensors.iter().for_each(&mut put);
        }
        for col in &self.unitaries {
            col.iter().for_each(&mut put);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |m: &str| Error::Format(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(fmt("missing SGS state magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(fmt(&format!("unsupported format version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let hend = 20usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| fmt("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[20..hend])?;
        let mut pos = hend;
        let mut take = |shape: &[usize]| -> Result<DenseTensor<T>> {
            let n: usize = shape.iter().product();
            let end = pos.checked_add(16 * n).filter(|&e| e <= bytes.len()).ok_or_else(|| fmt("truncated payload"))?;
            let data = bytes[pos..end]
                .chunks_exact(16)
                .map(|ch| {
                    let re = f64::from_le_bytes(ch[..8].try_into().expect("8 bytes"));
                    let im = f64::from_le_bytes(ch[8..].try_into().expect("8 bytes"));
                    C::new(real::<T>(re), real::<T>(im))
                })
                .collect();
            pos = end;
            DenseTensor::from_vec(shape, data)
        };
        let params = header.params;
        let mut rows = Vec::new();
        for (k, shapes) in header.row_shapes.iter().enumerate() {
            let ts = shapes.iter().map(|s| take(s)).collect::<Result<Vec<_>>>()?;
            let mut row = MPSRow::new(ts)?;
            row.center = header.row_centers.get(k).copied().flatten();
            rows.push(row);
        }
        let ud = params.unitary_dim();
        let mut unitaries = Vec::new();
        for _ in 0..params.cols() {
            let col = (0..params.unitaries_per_column()).map(|_| take(&[ud, ud])).collect::<Result<Vec<_>>>()?;
            unitaries.push(col);
        }
        if pos != bytes.len() {
            return Err(fmt("trailing bytes after payload"));
        }
        let mut s = SgsState::new_unchecked(params, rows, unitaries)?;
        s.seed = header.seed;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{pauli_x, pauli_z};

    type S = SgsState<f64>;

    fn params(h: usize, v: usize, m: usize, bond: usize) -> SGSParams {
        SGSParams::new(LatticeSpec::qubits(h, v), m, bond, 1).unwrap()
    }

    #[test]
    fn identity_unitaries_give_product_of_rows() {
        let p = params(2, 3, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<MPSRow<f64>> = (0..2).map(|_| mps::random_mps_with(3, 2, 2, &mut rng).unwrap()).collect();
        let s = S::with_identity_unitaries(p, rows.clone()).unwrap();
        let want = rows[0].statevector().outer(&rows[1].statevector()).into_reshaped(&[64]).unwrap();
        assert!(s.to_statevector().unwrap().max_abs_diff(&want) < 1e-14);
        assert!(S::zero_state(p).unwrap().to_statevector().unwrap().data()[0] == cone());
    }

    #[test]
    fn rejects_non_unitary() {
        let s = S::random(params(3, 2, 1, 2), 2).unwrap();
        let mut bad = s.unitaries.clone();
        let u = &mut bad[0][0];
        *u.at_mut(0, 0) += crate::scalar::cplx(1e-3, 0.0);
        assert!(matches!(S::new(s.params, s.rows.clone(), bad), Err(Error::Validation(_))));
        let mut short = s.unitaries.clone();
        short[1].pop();
        assert!(matches!(S::new(s.params, s.rows.clone(), short), Err(Error::Dimension(_))));
    }

    #[test]
    fn random_state_is_normalized() {
        for seed in 0..5 {
            let s = S::random(params(3, 3, 1, 2), seed).unwrap();
            let psi = s.to_statevector().unwrap();
            assert!((psi.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_row_is_its_mps() {
        let s = S::random(params(1, 4, 1, 2), 3).unwrap();
        assert_eq!(s.params.unitaries_per_column(), 0);
        assert!(s.to_statevector().unwrap().max_abs_diff(&s.rows[0].statevector()) < 1e-15);
    }

    #[test]
    fn statevector_cap() {
        let s = S::random(params(3, 3, 1, 2), 3).unwrap();
        assert!(matches!(s.to_statevector_capped(100), Err(Error::Resource(_))));
    }

    #[test]
    fn replay_matches_statevector() {
        for (h, v) in [(3, 3), (2, 2), (3, 4), (2, 1), (1, 3)] {
            let s = S::random(params(h, v, 1, 2), 11).unwrap();
            let seq = prepare_sequence(&s).unwrap();
            let psi = s.to_statevector().unwrap();
            let rep = seq.replay().unwrap();
            assert!((rep.inner(&psi).norm() - 1.0).abs() < 1e-9, "{h}x{v}");
            assert!(rep.max_abs_diff(&psi) < 1e-9);
        }
        let s = S::random(params(2, 2, 1, 2), 5).unwrap();
        assert_eq!(prepare_sequence(&s).unwrap().len(), 4);
        let s = S::random(params(4, 5, 2, 4), 5).unwrap();
        let seq = prepare_sequence(&s).unwrap();
        assert_eq!(seq.len(), 4 * 3 + 5 * 2);
        assert!(seq.replay().unwrap().max_abs_diff(&s.to_statevector().unwrap()) < 1e-9);
        let s = S::random(params(3, 4, 1, 4), 6).unwrap();
        let seq = prepare_sequence(&s).unwrap();
        assert_eq!(seq.len(), 3 * 2 + 4 * 2);
        assert!(seq.replay().unwrap().max_abs_diff(&s.to_statevector().unwrap()) < 1e-9);
        let z = S::zero_state(params(2, 3, 1, 2)).unwrap();
        let rep = prepare_sequence(&z).unwrap().replay().unwrap();
        assert!((rep.data()[0] - cone()).norm() < 1e-12);
    }

    #[test]
    fn bulk_peps_tensor_matches_formula() {
        let s = S::random(params(4, 2, 1, 2), 8).unwrap();
        let peps = to_peps(&s).unwrap();
        let (r, c) = (2, 1);
        let u = s.unitary(r, c);
        let a = &s.rows[r - 1].tensors[c];
        let b = &peps.tensors[r][c];
        let sh = b.shape().to_vec();
        assert_eq!(sh[1], 2);
        assert_eq!(sh[3], 2);
        for l in 0..sh[0] {
            for up in 0..2 {
                for rr in 0..sh[2] {
                    for dn in 0..2 {
                        for i in 0..2 {
                            let mut want = czero();
                            for j in 0..2 {
                                want += u.at(up * 2 + i, j * 2 + dn) * a.get(&[l, j, rr]);
                            }
                            assert!((b.get(&[l, up, rr, dn, i]) - want).norm() < 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn peps_contraction_matches_statevector() {
        for (h, v, m, bond) in [(3, 3, 1, 2), (2, 3, 1, 2), (3, 4, 1, 4), (4, 2, 1, 2), (3, 2, 2, 4), (4, 2, 2, 4), (1, 3, 1, 2)] {
            let s = S::random(params(h, v, m, bond), 21).unwrap();
            let peps = to_peps(&s).unwrap();
            let got = peps.contract_all(STATEVECTOR_CAP).unwrap();
            let want = s.to_statevector().unwrap();
            assert!(got.max_abs_diff(&want) < 1e-9, "{h}x{v} M={m}");
        }
    }

    #[test]
    fn identity_unitaries_give_direct_peps() {
        let p = params(3, 3, 1, 2);
        let rows: Vec<MPSRow<f64>> = (0..3).map(|k| mps::random_mps(3, 2, 2, k).unwrap()).collect();
        let s = S::with_identity_unitaries(p, rows).unwrap();
        let peps = to_peps(&s).unwrap();
        assert_eq!(peps.max_vertical_bond(), 1);
        assert!(peps.contract_all(STATEVECTOR_CAP).unwrap().max_abs_diff(&s.to_statevector().unwrap()) < 1e-12);
    }

    #[test]
    fn cluster_stabilizers() {
        for (h, v) in [(1, 2), (2, 2), (2, 3), (3, 3)] {
            let spec = LatticeSpec::qubits(h, v);
            let s: S = cluster_state(spec).unwrap();
            let psi = s.to_statevector().unwrap();
            let n = spec.sites();
            for r in 0..h {
                for c in 0..v {
                    let mut sites = vec![spec.index(r, c)];
                    let mut op = pauli_x::<f64>();
                    let nbrs = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
                    for (nr, nc) in nbrs {
                        if nr < h && nc < v {
                            sites.push(spec.index(nr, nc));
                            op = op.kron(&pauli_z());
                        }
                    }
                    let e = statevec::expectation(psi.data(), n, 2, &sites, &op).unwrap();
                    assert!((e - cone()).norm() < 1e-10);
                    let z = statevec::expectation(psi.data(), n, 2, &[spec.index(r, c)], &pauli_z()).unwrap();
                    assert!(z.norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn blocking_preserves_state() {
        let s = S::random(params(4, 3, 1, 2), 4).unwrap();
        let b = block_rows(&s, 2).unwrap();
        assert_eq!(b.params.effective(), LatticeSpec { rows: 2, cols: 3, local_dim: 4 });
        assert!(b.to_statevector().unwrap().max_abs_diff(&s.to_statevector().unwrap()) < 1e-10);
        let whole = block_rows(&s, 4).unwrap();
        assert_eq!(whole.params.rows(), 1);
        assert_eq!(whole.rows[0].phys_dim(), 16);
        assert!(whole.to_statevector().unwrap().max_abs_diff(&s.to_statevector().unwrap()) < 1e-10);
        assert_eq!(block_rows(&s, 1).unwrap(), s);
        assert!(matches!(block_rows(&s, 3), Err(Error::Validation(_))));
        let s = S::random(params(3, 2, 1, 2), 4).unwrap();
        let b = block_rows(&s, 3).unwrap();
        assert!(b.to_statevector().unwrap().max_abs_diff(&s.to_statevector().unwrap()) < 1e-10);
    }

    #[test]
    fn bsgs_peps_and_replay() {
        let p = SGSParams::new(LatticeSpec::qubits(4, 3), 1, 4, 2).unwrap();
        let s = S::random(p, 6).unwrap();
        let want = s.to_statevector().unwrap();
        let peps = to_peps(&s).unwrap();
        assert_eq!(peps.rows(), 4);
        assert!(peps.contract_all(STATEVECTOR_CAP).unwrap().max_abs_diff(&want) < 1e-9);
        let seq = prepare_sequence(&s).unwrap();
        assert_eq!(seq.len(), 2 * (3 - 1) + 3 * (2 - 1));
        assert!(seq.replay().unwrap().max_abs_diff(&want) < 1e-9);
    }

    #[test]
    fn binary_roundtrip() {
        let s = S::random(params(3, 2, 1, 2), 7).unwrap();
        let back = S::from_bytes(&s.to_bytes().unwrap()).unwrap();
        assert_eq!(back, s);
        let mut bytes = s.to_bytes().unwrap();
        bytes.pop();
        assert!(matches!(S::from_bytes(&bytes), Err(Error::Format(_))));
    }
}
