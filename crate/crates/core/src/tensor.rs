//! Dense complex tensors stored as a single row-major buffer.
//!
//! Contractions go through permute -> matricize -> matrix multiply. Rank-2
//! tensors double as matrices for the routines in [`crate::linalg`].

use std::fmt;

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{dim_err, Result};
use crate::scalar::{cone, czero, real, Real, C};

#[derive(Clone, PartialEq)]
pub struct DenseTensor<T: Real = f64> {
    shape: Vec<usize>,
    data: Vec<C<T>>,
    labels: Option<Vec<String>>,
}

impl<T: Real> fmt::Debug for DenseTensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseTensor")
            .field("shape", &self.shape)
            .field("labels", &self.labels)
            .field("len", &self.data.len())
            .finish()
    }
}

/// Row-major strides for a shape.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

impl<T: Real> DenseTensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        DenseTensor { shape: shape.to_vec(), data: vec![czero(); n], labels: None }
    }

    pub fn from_vec(shape: &[usize], data: Vec<C<T>>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(dim_err!("shape {:?} needs {} values, got {}", shape, n, data.len()));
        }
        Ok(DenseTensor { shape: shape.to_vec(), data, labels: None })
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C<T>) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for v in t.data.iter_mut() {
            *v = f(&idx);
            increment(&mut idx, shape);
        }
        t
    }

    /// Rank-0 tensor.
    pub fn scalar(z: C<T>) -> Self {
        DenseTensor { shape: vec![], data: vec![z], labels: None }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = cone();
        }
        t
    }

    /// Matrix from nested real/imaginary `f64` pairs.
    pub fn from_rows(rows: &[&[(f64, f64)]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let data = rows
            .iter()
            .flat_map(|row| row.iter().map(|&(a, b)| Complex::new(real(a), real(b))))
            .collect();
        DenseTensor { shape: vec![r, c], data, labels: None }
    }

    /// Entries i.i.d. standard complex Gaussian (unit variance per entry).
    pub fn random_gaussian<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Self {
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let mut t = Self::zeros(shape);
        for v in t.data.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *v = Complex::new(real(re * half), real(im * half));
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C<T>> {
        self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: &[&str]) -> Result<Self> {
        if labels.len() != self.rank() {
            return Err(dim_err!("{} labels for rank-{} tensor", labels.len(), self.rank()));
        }
        self.labels = Some(labels.iter().map(|s| s.to_string()).collect());
        Ok(self)
    }

    /// Position of a labelled mode.
    pub fn mode(&self, label: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == label)
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[k]);
            off = off * self.shape[k] + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> C<T> {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: C<T>) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    /// Result mode `k` is input mode `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rank(), "permutation length");
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return self.clone();
        }
        let in_strides = strides(&self.shape);
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let mapped: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; new_shape.len()];
        let mut off = 0usize;
        let rank = new_shape.len();
        for _ in 0..self.data.len() {
            out.push(self.data[off]);
            // odometer increment tracking the input offset
            let mut k = rank;
            while k > 0 {
                k -= 1;
                idx[k] += 1;
                off += mapped[k];
                if idx[k] < new_shape[k] {
                    break;
                }
                off -= mapped[k] * new_shape[k];
                idx[k] = 0;
            }
        }
        let labels = self.labels.as_ref().map(|l| perm.iter().map(|&p| l[p].clone()).collect());
        DenseTensor { shape: new_shape, data: out, labels }
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(dim_err!("cannot reshape {:?} into {:?}", self.shape, shape));
        }
        Ok(DenseTensor { shape: shape.to_vec(), data: self.data.clone(), labels: None })
    }

    pub fn into_reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(dim_err!("cannot reshape {:?} into {:?}", self.shape, shape));
        }
        self.shape = shape.to_vec();
        self.labels = None;
        Ok(self)
    }

    pub fn conj(&self) -> Self {
        let data = self.data.iter().map(|z| z.conj()).collect();
        DenseTensor { shape: self.shape.clone(), data, labels: self.labels.clone() }
    }

    pub fn scale(&self, s: C<T>) -> Self {
        let data = self.data.iter().map(|z| z * s).collect();
        DenseTensor { shape: self.shape.clone(), data, labels: self.labels.clone() }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    pub fn map(&self, f: impl Fn(C<T>) -> C<T>) -> Self {
        let data = self.data.iter().map(|&z| f(z)).collect();
        DenseTensor { shape: self.shape.clone(), data, labels: self.labels.clone() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(DenseTensor { shape: self.shape.clone(), data, labels: self.labels.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseTensor { shape: self.shape.clone(), data, labels: self.labels.clone() })
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: C<T>, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * b;
        }
        Ok(())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(dim_err!("shape mismatch {:?} vs {:?}", self.shape, other.shape));
        }
        Ok(())
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(T::zero(), T::max)
    }

    /// Sum of entrywise products without conjugation.
    pub fn dot(&self, other: &Self) -> C<T> {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// `<self|other>` with `self` conjugated.
    pub fn inner(&self, other: &Self) -> C<T> {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    // ---- matrix helpers (rank 2) ----

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn is_square(&self) -> bool {
        self.rank() == 2 && self.shape[0] == self.shape[1]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C<T> {
        self.data[i * self.shape[1] + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut C<T> {
        let c = self.shape[1];
        &mut self.data[i * c + j]
    }

    /// Conjugate transpose of a matrix.
    pub fn dagger(&self) -> Self {
        assert_eq!(self.rank(), 2, "dagger needs a matrix");
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = Self::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        assert_eq!(self.rank(), 2, "transpose needs a matrix");
        self.permute(&[1, 0])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(dim_err!("matmul of {:?} and {:?}", self.shape, other.shape));
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![czero::<T>(); m * n];
        gemm(&self.data, &other.data, &mut out, m, k, n);
        Ok(DenseTensor { shape: vec![m, n], data: out, labels: None })
    }

    pub fn trace(&self) -> C<T> {
        assert!(self.is_square(), "trace needs a square matrix");
        (0..self.shape[0]).map(|i| self.at(i, i)).sum()
    }

    /// Kronecker product of two matrices.
    pub fn kron(&self, other: &Self) -> Self {
        assert!(self.rank() == 2 && other.rank() == 2, "kron needs matrices");
        let (a, b) = (self.shape[0], self.shape[1]);
        let (c, d) = (other.shape[0], other.shape[1]);
        let mut out = Self::zeros(&[a * c, b * d]);
        for i in 0..a {
            for j in 0..b {
                let s = self.at(i, j);
                if s == czero() {
                    continue;
                }
                for k in 0..c {
                    for l in 0..d {
                        *out.at_mut(i * c + k, j * d + l) = s * other.at(k, l);
                    }
                }
            }
        }
        out
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> T {
        assert!(self.is_square(), "hermiticity needs a square matrix");
        let n = self.shape[0];
        let mut worst = T::zero();
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `max |U†U - 1|` entrywise.
    pub fn unitarity_defect(&self) -> T {
        let g = self.dagger().matmul(self).expect("square");
        g.max_abs_diff(&Self::identity(self.cols()))
    }

    /// `(H + H†)/2`
    pub fn hermitian_part(&self) -> Self {
        let d = self.dagger();
        let half = Complex::new(real::<T>(0.5), T::zero());
        self.add(&d).expect("square").scale(half)
    }

    /// Matricizes with the given row and column mode groups.
    pub fn matricize(&self, row_modes: &[usize], col_modes: &[usize]) -> Result<Self> {
        let mut perm: Vec<usize> = row_modes.to_vec();
        perm.extend_from_slice(col_modes);
        check_partition(&perm, self.rank())?;
        let r: usize = row_modes.iter().map(|&m| self.shape[m]).product();
        let c: usize = col_modes.iter().map(|&m| self.shape[m]).product();
        self.permute(&perm).into_reshaped(&[r, c])
    }

    /// Outer (tensor) product; result modes are those of `self` then `other`.
    pub fn outer(&self, other: &Self) -> Self {
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        let mut data = Vec::with_capacity(self.data.len() * other.data.len());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        DenseTensor { shape, data, labels: None }
    }
}

fn check_partition(perm: &[usize], rank: usize) -> Result<()> {
    let mut seen = vec![false; rank];
    if perm.len() != rank {
        return Err(dim_err!("modes {:?} do not partition rank {}", perm, rank));
    }
    for &p in perm {
        if p >= rank || seen[p] {
            return Err(dim_err!("modes {:?} do not partition rank {}", perm, rank));
        }
        seen[p] = true;
    }
    Ok(())
}

fn increment(idx: &mut [usize], shape: &[usize]) {
    let mut k = idx.len();
    while k > 0 {
        k -= 1;
        idx[k] += 1;
        if idx[k] < shape[k] {
            return;
        }
        idx[k] = 0;
    }
}

/// `out += a (m×k) * b (k×n)`, all row-major.
pub(crate) fn gemm<T: Real>(a: &[C<T>], b: &[C<T>], out: &mut [C<T>], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let s = a[i * k + p];
            if s.re == T::zero() && s.im == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o = *o + s * bv;
            }
        }
    }
}

/// Contracts `modes_a` of `a` with `modes_b` of `b` pairwise.
///
/// Result modes are the free modes of `a` followed by the free modes of `b`,
/// each in original order.
pub fn contract<T: Real>(
    a: &DenseTensor<T>,
    modes_a: &[usize],
    b: &DenseTensor<T>,
    modes_b: &[usize],
) -> Result<DenseTensor<T>> {
    if modes_a.len() != modes_b.len() {
        return Err(dim_err!("{} modes paired with {}", modes_a.len(), modes_b.len()));
    }
    for (&ma, &mb) in modes_a.iter().zip(modes_b) {
        if ma >= a.rank() || mb >= b.rank() {
            return Err(dim_err!("mode index out of range ({ma}, {mb})"));
        }
        if a.shape[ma] != b.shape[mb] {
            return Err(dim_err!(
                "extent mismatch: mode {} of {:?} vs mode {} of {:?}",
                ma,
                a.shape,
                mb,
                b.shape
            ));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|m| !modes_a.contains(m)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|m| !modes_b.contains(m)).collect();
    if free_a.len() + modes_a.len() != a.rank() || free_b.len() + modes_b.len() != b.rank() {
        return Err(dim_err!("repeated contraction mode"));
    }
    let m: usize = free_a.iter().map(|&x| a.shape[x]).product();
    let k: usize = modes_a.iter().map(|&x| a.shape[x]).product();
    let n: usize = free_b.iter().map(|&x| b.shape[x]).product();

    let mut pa = free_a.clone();
    pa.extend_from_slice(modes_a);
    let mut pb = modes_b.to_vec();
    pb.extend_from_slice(&free_b);
    let am = a.permute(&pa);
    let bm = b.permute(&pb);

    let mut out = vec![czero::<T>(); m * n];
    gemm(&am.data, &bm.data, &mut out, m, k, n);
    let mut shape: Vec<usize> = free_a.iter().map(|&x| a.shape[x]).collect();
    shape.extend(free_b.iter().map(|&x| b.shape[x]));
    let labels = match (&a.labels, &b.labels) {
        (Some(la), Some(lb)) => {
            let mut l: Vec<String> = free_a.iter().map(|&x| la[x].clone()).collect();
            l.extend(free_b.iter().map(|&x| lb[x].clone()));
            Some(l)
        }
        _ => None,
    };
    Ok(DenseTensor { shape, data: out, labels })
}

/// Contracts by mode labels: every label present in both tensors is summed.
pub fn contract_labeled<T: Real>(a: &DenseTensor<T>, b: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let (la, lb) = match (a.labels(), b.labels()) {
        (Some(la), Some(lb)) => (la, lb),
        _ => return Err(dim_err!("contract_labeled needs labelled tensors")),
    };
    let mut ma = Vec::new();
    let mut mb = Vec::new();
    for (i, l) in la.iter().enumerate() {
        if let Some(j) = lb.iter().position(|x| x == l) {
            ma.push(i);
            mb.push(j);
        }
    }
    contract(a, &ma, b, &mb)
}
