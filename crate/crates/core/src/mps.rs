//! Open-boundary matrix product states for single lattice rows.
//!
//! Site tensors have modes `(left, phys, right)`; both boundary bonds have
//! extent 1. Transfer matrices pair the bra bond before the ket bond.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_err, val_err, Result};
use crate::linalg;
use crate::scalar::{cone, czero, from_real, Real, C};
use crate::tensor::{contract, DenseTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct MPSRow<T: Real = f64> {
    pub tensors: Vec<DenseTensor<T>>,
    /// Orthogonality center, if the row is known to be in mixed-canonical form.
    pub center: Option<usize>,
}

impl<T: Real> MPSRow<T> {
    pub fn new(tensors: Vec<DenseTensor<T>>) -> Result<Self> {
        let m = MPSRow { tensors, center: None };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tensors.is_empty() {
            return Err(val_err!("empty MPS"));
        }
        let d = self.tensors[0].shape().get(1).copied().unwrap_or(0);
        let mut left = 1;
        for (k, t) in self.tensors.iter().enumerate() {
            if t.rank() != 3 {
                return Err(dim_err!("site {k} tensor has rank {}", t.rank()));
            }
            let s = t.shape();
            if s[0] != left || s[1] != d || s[1] == 0 || s[2] == 0 {
                return Err(dim_err!("site {k} shape {:?} does not continue bond {left}, phys {d}", s));
            }
            left = s[2];
        }
        if left != 1 {
            return Err(dim_err!("right boundary bond is {left}"));
        }
        Ok(())
    }

    /// Product state from one amplitude vector per site.
    pub fn product(vectors: &[Vec<C<T>>]) -> Result<Self> {
        let ts = vectors
            .iter()
            .map(|v| DenseTensor::from_vec(&[1, v.len(), 1], v.clone()))
            .collect::<Result<Vec<_>>>()?;
        MPSRow::new(ts)
    }

    /// `|k k ... k>` for a basis index `k`.
    pub fn basis(len: usize, d: usize, k: usize) -> Self {
        let mut v = vec![czero::<T>(); d];
        v[k] = cone();
        MPSRow::product(&vec![v; len]).expect("consistent shapes")
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn phys_dim(&self) -> usize {
        self.tensors[0].shape()[1]
    }

    /// Bond extents at the `len+1` cuts, boundaries included.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut b = vec![1];
        b.extend(self.tensors.iter().map(|t| t.shape()[2]));
        b
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Left environments: `L[k]` contracts sites `0..k`, shape `(bra, ket)`.
    pub fn left_envs(&self) -> Vec<DenseTensor<T>> {
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(DenseTensor::identity(1));
        for (k, a) in self.tensors.iter().enumerate() {
            let next = transfer_left(&out[k], a, None);
            out.push(next);
        }
        out
    }

    /// Right environments: `R[k]` contracts sites `k..len`, shape `(bra, ket)`.
    pub fn right_envs(&self) -> Vec<DenseTensor<T>> {
        let n = self.len();
        let mut out = vec![DenseTensor::identity(1); n + 1];
        for k in (0..n).rev() {
            out[k] = transfer_right(&out[k + 1], &self.tensors[k], None);
        }
        out
    }

    pub fn norm_sqr(&self) -> T {
        let l = self.left_envs();
        l[self.len()].data()[0].re
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, s: C<T>) -> Self {
        let mut m = self.clone();
        let k = m.center.unwrap_or(0);
        m.tensors[k] = m.tensors[k].scale(s);
        m
    }

    /// Canonical at `site`, rescaled to unit norm.
    pub fn normalized(&self, site: usize) -> Result<Self> {
        let mut m = canonicalize(self, site)?;
        let n = m.tensors[site].norm();
        if n == T::zero() {
            return Err(crate::error::Error::Numerical("cannot normalize the zero state".into()));
        }
        m.tensors[site] = m.tensors[site].scale_real(T::one() / n);
        Ok(m)
    }

    /// Amplitudes over all sites, first site most significant.
    pub fn statevector(&self) -> DenseTensor<T> {
        let mut psi = DenseTensor::<T>::identity(1);
        for a in &self.tensors {
            let t = contract(&psi, &[1], a, &[0]).expect("bonds match");
            let s = t.shape().to_vec();
            psi = t.into_reshaped(&[s[0] * s[1], s[2]]).expect("same size");
        }
        let n = psi.len();
        psi.into_reshaped(&[n]).expect("right bond is 1")
    }

    /// Reduced density matrix on increasing `sites`, shape `(d^k, d^k)`.
    /// Unnormalized: its trace is the squared norm.
    pub fn reduced_density(&self, sites: &[usize]) -> Result<DenseTensor<T>> {
        let l = self.left_envs();
        let r = self.right_envs();
        self.reduced_density_with(sites, &l, &r)
    }

    pub fn reduced_density_with(
        &self,
        sites: &[usize],
        left: &[DenseTensor<T>],
        right: &[DenseTensor<T>],
    ) -> Result<DenseTensor<T>> {
        if sites.is_empty() || sites.windows(2).any(|w| w[0] >= w[1]) || *sites.last().unwrap() >= self.len() {
            return Err(val_err!("sites {:?} must be increasing and inside the row", sites));
        }
        let d = self.phys_dim();
        let first = sites[0];
        let last = *sites.last().unwrap();
        // x modes: (bra, ket, i1, j1, i2, j2, ...)
        let mut x = left[first].clone();
        let mut open = 0usize;
        for k in first..=last {
            let a = &self.tensors[k];
            if sites.contains(&k) {
                // (bra, ket, opens..) x A(ket,i,β) -> (bra, opens.., i, β)
                let t = contract(&x, &[1], a, &[0])?;
                // x conj(A)(bra, j, β') -> (opens.., i, β, j, β')
                let t = contract(&t, &[0], &a.conj(), &[0])?;
                let n = 2 * open;
                let mut perm: Vec<usize> = vec![n + 3, n + 1];
                perm.extend(0..n);
                perm.extend([n, n + 2]);
                x = t.permute(&perm);
                open += 1;
            } else {
                let t = contract(&x, &[1], a, &[0])?;
                // (bra, opens.., i, β) with conj(A)(bra, i, β')
                let n = 2 * open;
                let t = contract(&t, &[0, n + 1], &a.conj(), &[0, 1])?;
                // (opens.., β, β')
                let mut perm = vec![n + 1, n];
                perm.extend(0..n);
                x = t.permute(&perm);
            }
        }
        // close with R(bra, ket)
        let t = contract(&x, &[0, 1], &right[last + 1], &[0, 1])?;
        // modes (i1, j1, i2, j2, ...) -> (i1, i2, ..., j1, j2, ...)
        let k = sites.len();
        let perm: Vec<usize> = (0..k).map(|s| 2 * s).chain((0..k).map(|s| 2 * s + 1)).collect();
        let dim = d.pow(k as u32);
        t.permute(&perm).into_reshaped(&[dim, dim])
    }

    /// Expectation `<φ| ⊗ O_k |φ>` (not divided by the norm).
    pub fn expectation_chain(&self, ops: &BTreeMap<usize, DenseTensor<T>>) -> Result<C<T>> {
        let d = self.phys_dim();
        for (&k, o) in ops {
            if k >= self.len() {
                return Err(val_err!("site {k} outside row of length {}", self.len()));
            }
            if o.shape() != [d, d] {
                return Err(dim_err!("observable at {k} has shape {:?}", o.shape()));
            }
        }
        let mut v = DenseTensor::<T>::identity(1);
        for (k, a) in self.tensors.iter().enumerate() {
            v = transfer_left(&v, a, ops.get(&k));
        }
        Ok(v.data()[0])
    }
}

/// `v'[β',β] = Σ v[α',α] O[i',i] conj(A[α',i',β']) A[α,i,β]`.
pub fn transfer_left<T: Real>(v: &DenseTensor<T>, a: &DenseTensor<T>, o: Option<&DenseTensor<T>>) -> DenseTensor<T> {
    let t = contract(v, &[1], a, &[0]).expect("bond"); // (α', i, β)
    let t = match o {
        Some(o) => contract(o, &[1], &t, &[1]).expect("phys").permute(&[1, 0, 2]), // (α', i', β)
        None => t,
    };
    contract(&a.conj(), &[0, 1], &t, &[0, 1]).expect("bond") // (β', β)
}

/// `w'[α',α] = Σ O[i',i] conj(A[α',i',β']) A[α,i,β] w[β',β]`.
pub fn transfer_right<T: Real>(w: &DenseTensor<T>, a: &DenseTensor<T>, o: Option<&DenseTensor<T>>) -> DenseTensor<T> {
    let t = contract(a, &[2], w, &[1]).expect("bond"); // (α, i, β')
    let t = match o {
        Some(o) => contract(o, &[1], &t, &[1]).expect("phys").permute(&[1, 0, 2]), // (α, i', β')
        None => t,
    };
    contract(&a.conj(), &[1, 2], &t, &[1, 2]).expect("bond") // (α', α)
}

/// Seeded random row, normalized and canonical at site 0.
///
/// Bond extents are `min(D, d^k, d^(V-k))` at cut `k`.
pub fn random_mps<T: Real>(len: usize, d: usize, bond: usize, seed: u64) -> Result<MPSRow<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_mps_with(len, d, bond, &mut rng)
}

pub fn random_mps_with<T: Real, R: rand::Rng + ?Sized>(len: usize, d: usize, bond: usize, rng: &mut R) -> Result<MPSRow<T>> {
    if len == 0 || d == 0 || bond == 0 {
        return Err(val_err!("random_mps needs V, d, D >= 1"));
    }
    let dims = bond_profile(len, d, bond);
    let tensors = (0..len).map(|k| DenseTensor::random_gaussian(&[dims[k], d, dims[k + 1]], rng)).collect();
    MPSRow::new(tensors)?.normalized(0)
}

/// Maximal bond extents `min(D, d^k, d^(V-k))` for an open row.
pub fn bond_profile(len: usize, d: usize, bond: usize) -> Vec<usize> {
    let cap = |k: usize| -> usize {
        let mut p = 1usize;
        for _ in 0..k {
            p = p.saturating_mul(d);
            if p >= bond {
                return bond;
            }
        }
        p.min(bond)
    };
    (0..=len).map(|k| cap(k).min(cap(len - k))).collect()
}

/// Mixed-canonical form at `site` by QR sweeps from both ends.
///
/// Sites left of `site` become left isometries, sites right of it right
/// isometries; the first nonzero entry of the center is made real and
/// non-negative. The norm is kept.
pub fn canonicalize<T: Real>(m: &MPSRow<T>, site: usize) -> Result<MPSRow<T>> {
    if site >= m.len() {
        return Err(val_err!("site {site} outside row of length {}", m.len()));
    }
    let mut ts = m.tensors.clone();
    for k in 0..site {
        let (dl, d, dr) = dims3(&ts[k]);
        let mat = ts[k].reshape(&[dl * d, dr])?;
        let (q, r) = linalg::qr(&mat)?;
        let kk = q.cols();
        ts[k] = q.into_reshaped(&[dl, d, kk])?;
        ts[k + 1] = contract(&r, &[1], &ts[k + 1], &[0])?;
    }
    for k in (site + 1..ts.len()).rev() {
        let (dl, d, dr) = dims3(&ts[k]);
        let mat = ts[k].reshape(&[dl, d * dr])?;
        let (q, r) = linalg::qr(&mat.dagger())?;
        let kk = q.cols();
        ts[k] = q.dagger().into_reshaped(&[kk, d, dr])?;
        ts[k - 1] = contract(&ts[k - 1], &[2], &r.dagger(), &[0])?;
    }
    fix_phase(&mut ts[site]);
    Ok(MPSRow { tensors: ts, center: Some(site) })
}

fn dims3<T: Real>(t: &DenseTensor<T>) -> (usize, usize, usize) {
    let s = t.shape();
    (s[0], s[1], s[2])
}

/// Rotates the global phase so the first entry above round-off is real and non-negative.
pub fn fix_phase<T: Real>(t: &mut DenseTensor<T>) {
    let scale = t.data().iter().map(|z| z.norm()).fold(T::zero(), T::max);
    let floor = scale * crate::scalar::real::<T>(1e-12);
    if let Some(z) = t.data().iter().find(|z| z.norm() > floor).copied() {
        let ph = z.conj() / from_real(z.norm());
        *t = t.scale(ph);
    }
}

/// Left-isometry defect `‖Σ_i A^i† A^i - 1‖`.
pub fn left_isometry_defect<T: Real>(a: &DenseTensor<T>) -> T {
    let (dl, d, dr) = dims3(a);
    a.reshape(&[dl * d, dr]).expect("size").unitarity_defect()
}

/// Right-isometry defect `‖Σ_i A^i A^i† - 1‖`.
pub fn right_isometry_defect<T: Real>(a: &DenseTensor<T>) -> T {
    let (dl, d, dr) = dims3(a);
    a.reshape(&[dl, d * dr]).expect("size").dagger().unitarity_defect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix<T: Real = f64> {
    pub matrix: DenseTensor<T>,
    pub label: String,
}

/// `E_O = Σ_{i,i'} <i'|O|i> conj(A^{i'}) ⊗ A^i`, rows `(α',α)`, columns `(β',β)`.
pub fn transfer_matrix<T: Real>(a: &DenseTensor<T>, o: &DenseTensor<T>) -> Result<TransferMatrix<T>> {
    transfer_matrix_labeled(a, o, "O")
}

pub fn transfer_matrix_labeled<T: Real>(a: &DenseTensor<T>, o: &DenseTensor<T>, label: &str) -> Result<TransferMatrix<T>> {
    if a.rank() != 3 {
        return Err(dim_err!("site tensor must have rank 3"));
    }
    let (dl, d, dr) = dims3(a);
    if o.shape() != [d, d] {
        return Err(dim_err!("observable {:?} for physical dimension {d}", o.shape()));
    }
    // O(i',i) A(α,i,β) -> (i', α, β)
    let oa = contract(o, &[1], a, &[1])?;
    // conj(A)(α',i',β') with (i',α,β) -> (α',β',α,β)
    let e = contract(&a.conj(), &[1], &oa, &[0])?;
    let matrix = e.permute(&[0, 2, 1, 3]).into_reshaped(&[dl * dl, dr * dr])?;
    Ok(TransferMatrix { matrix, label: label.to_string() })
}
