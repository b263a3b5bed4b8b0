//! Single-site variational sweeps for one row against its row Hamiltonian.

use crate::contraction::RowHamiltonian;
use crate::error::{dim_err, Result};
use crate::linalg::{self, LanczosOptions, Which};
use crate::mps::{canonicalize, MPSRow};
use crate::scalar::{cone, from_real, tol, Real};
use crate::tensor::{contract, DenseTensor};

/// Local problems up to this dimension are diagonalized densely.
pub const DENSE_SITE_LIMIT: usize = 512;

/// Lower-triangular MPO. Site tensors have modes `(wl, wr, out, in)`; channel
/// 0 is "nothing placed yet" and the last channel is "complete".
#[derive(Debug, Clone)]
pub struct Mpo<T: Real = f64> {
    pub sites: Vec<DenseTensor<T>>,
}

impl<T: Real> Mpo<T> {
    pub fn from_row_hamiltonian(h: &RowHamiltonian<T>) -> Result<Self> {
        let n = h.onsite.len();
        if n == 0 {
            return Err(dim_err!("empty row Hamiltonian"));
        }
        let d = h.onsite[0].rows();
        // operator Schmidt decomposition of each bond term
        let mut splits: Vec<Vec<(DenseTensor<T>, DenseTensor<T>)>> = Vec::with_capacity(n.saturating_sub(1));
        for b in &h.bonds {
            let t = b.reshape(&[d, d, d, d])?;
            let s = linalg::svd(&t, &[0, 2], &[1, 3], None)?;
            let cut = s.singular_values.first().copied().unwrap_or(T::zero()) * tol::<T>(1e-14);
            let mut parts = Vec::new();
            for (k, &sv) in s.singular_values.iter().enumerate() {
                if sv <= cut || sv == T::zero() {
                    continue;
                }
                let w = sv.sqrt();
                let a = DenseTensor::from_fn(&[d, d], |ix| s.left_isometry.at(ix[0] * d + ix[1], k) * w);
                let bb = DenseTensor::from_fn(&[d, d], |ix| s.right_isometry.at(k, ix[0] * d + ix[1]) * w);
                parts.push((a, bb));
            }
            splits.push(parts);
        }
        let dims: Vec<usize> = (0..=n)
            .map(|k| if k == 0 || k == n { 2 } else { 2 + splits[k - 1].len() })
            .collect();
        let share = h.constant / crate::scalar::real::<T>(n as f64);
        let id = DenseTensor::<T>::identity(d);
        let mut sites = Vec::with_capacity(n);
        for c in 0..n {
            let (wl, wr) = (dims[c], dims[c + 1]);
            let mut w = DenseTensor::<T>::zeros(&[wl, wr, d, d]);
            let mut put = |a: usize, b: usize, op: &DenseTensor<T>| {
                for i in 0..d {
                    for j in 0..d {
                        w.set(&[a, b, i, j], w.get(&[a, b, i, j]) + op.at(i, j));
                    }
                }
            };
            put(0, 0, &id);
            put(wl - 1, wr - 1, &id);
            let local = h.onsite[c].add(&id.scale(from_real(share)))?;
            put(0, wr - 1, &local);
            if c + 1 < n {
                for (k, (a, _)) in splits[c].iter().enumerate() {
                    put(0, 1 + k, a);
                }
            }
            if c > 0 {
                for (k, (_, b)) in splits[c - 1].iter().enumerate() {
                    put(1 + k, wr - 1, b);
                }
            }
            sites.push(w);
        }
        Ok(Mpo { sites })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    fn left_boundary(&self) -> DenseTensor<T> {
        let mut l = DenseTensor::zeros(&[1, self.sites[0].shape()[0], 1]);
        l.set(&[0, 0, 0], cone());
        l
    }

    fn right_boundary(&self) -> DenseTensor<T> {
        let w = self.sites[self.len() - 1].shape()[1];
        let mut r = DenseTensor::zeros(&[1, w, 1]);
        r.set(&[0, w - 1, 0], cone());
        r
    }
}

/// `L'[b',w',b] = Σ L[a',w,a] A*[a',i',b'] W[w,w',i',i] A[a,i,b]`.
fn grow_left<T: Real>(l: &DenseTensor<T>, a: &DenseTensor<T>, w: &DenseTensor<T>) -> DenseTensor<T> {
    let t = contract(l, &[2], a, &[0]).expect("env shapes");
    let t = contract(&t, &[1, 2], w, &[0, 3]).expect("env shapes");
    let t = contract(&t, &[0, 3], &a.conj(), &[0, 1]).expect("env shapes");
    t.permute(&[2, 1, 0])
}

fn grow_right<T: Real>(r: &DenseTensor<T>, a: &DenseTensor<T>, w: &DenseTensor<T>) -> DenseTensor<T> {
    let t = contract(a, &[2], r, &[2]).expect("env shapes");
    let t = contract(&t, &[1, 3], w, &[3, 1]).expect("env shapes");
    let t = contract(&t, &[1, 3], &a.conj(), &[2, 1]).expect("env shapes");
    t.permute(&[2, 1, 0])
}

/// MPO environments of a row; `left[k]` covers sites `0..k`, `right[k]` sites `k..`.
pub struct Environments<T: Real> {
    pub left: Vec<Option<DenseTensor<T>>>,
    pub right: Vec<Option<DenseTensor<T>>>,
}

impl<T: Real> Environments<T> {
    /// Environments valid around `site`.
    pub fn build(row: &MPSRow<T>, mpo: &Mpo<T>, site: usize) -> Self {
        let n = row.len();
        let mut left = vec![None; n + 1];
        let mut right = vec![None; n + 1];
        left[0] = Some(mpo.left_boundary());
        right[n] = Some(mpo.right_boundary());
        for k in 0..site {
            left[k + 1] = Some(grow_left(left[k].as_ref().unwrap(), &row.tensors[k], &mpo.sites[k]));
        }
        for k in (site + 1..n).rev() {
            right[k] = Some(grow_right(right[k + 1].as_ref().unwrap(), &row.tensors[k], &mpo.sites[k]));
        }
        Environments { left, right }
    }

    /// Dense effective operator on the flattened tensor at `site`.
    pub fn site_matrix(&self, row: &MPSRow<T>, mpo: &Mpo<T>, site: usize) -> Result<DenseTensor<T>> {
        let l = self.left[site].as_ref().ok_or_else(|| dim_err!("left environment missing"))?;
        let r = self.right[site + 1].as_ref().ok_or_else(|| dim_err!("right environment missing"))?;
        let t = contract(l, &[1], &mpo.sites[site], &[0])?;
        let t = contract(&t, &[2], r, &[1])?;
        let n = row.tensors[site].len();
        t.permute(&[0, 2, 4, 1, 3, 5]).into_reshaped(&[n, n])
    }

    fn apply(&self, mpo: &Mpo<T>, site: usize, x: &DenseTensor<T>) -> DenseTensor<T> {
        let l = self.left[site].as_ref().expect("left environment");
        let r = self.right[site + 1].as_ref().expect("right environment");
        let t = contract(l, &[2], x, &[0]).expect("shapes");
        let t = contract(&t, &[1, 2], &mpo.sites[site], &[0, 3]).expect("shapes");
        contract(&t, &[1, 2], r, &[2, 1]).expect("shapes")
    }
}

/// Lowest eigenvector of the effective site problem, shaped like the site tensor.
fn solve_site<T: Real>(env: &Environments<T>, mpo: &Mpo<T>, row: &MPSRow<T>, site: usize) -> Result<(T, DenseTensor<T>)> {
    let shape = row.tensors[site].shape().to_vec();
    let n = row.tensors[site].len();
    if n <= DENSE_SITE_LIMIT {
        let h = env.site_matrix(row, mpo, site)?.hermitian_part();
        let (e, v) = linalg::herm_eig_extreme(&h, Which::Smallest)?;
        return Ok((e, v.into_reshaped(&shape)?));
    }
    let apply = |v: &[crate::scalar::C<T>]| {
        let x = DenseTensor::from_vec(&shape, v.to_vec()).expect("size");
        env.apply(mpo, site, &x).into_data()
    };
    let (e, v, _) = linalg::lanczos_ground(n, apply, &LanczosOptions::default())?;
    Ok((e, DenseTensor::from_vec(&shape, v)?))
}

/// One left-to-right and one right-to-left single-site sweep. Bond
/// dimensions are kept. Returns the final energy and the normalized row,
/// canonical at site 0.
pub fn sweep<T: Real>(row: &MPSRow<T>, mpo: &Mpo<T>) -> Result<(T, MPSRow<T>)> {
    let n = row.len();
    let mut row = canonicalize(row, 0)?;
    let c0 = row.tensors[0].norm();
    row.tensors[0] = row.tensors[0].scale_real(T::one() / c0);
    let mut env = Environments::build(&row, mpo, 0);
    let mut energy = T::zero();
    for site in 0..n {
        let (e, x) = solve_site(&env, mpo, &row, site)?;
        energy = e;
        if site + 1 < n {
            let s = x.shape().to_vec();
            let (q, r) = linalg::qr(&x.reshape(&[s[0] * s[1], s[2]])?)?;
            let k = q.cols();
            row.tensors[site] = q.into_reshaped(&[s[0], s[1], k])?;
            row.tensors[site + 1] = contract(&r, &[1], &row.tensors[site + 1], &[0])?;
            env.left[site + 1] = Some(grow_left(env.left[site].as_ref().unwrap(), &row.tensors[site], &mpo.sites[site]));
        } else {
            row.tensors[site] = x;
        }
    }
    for site in (0..n).rev() {
        let (e, x) = solve_site(&env, mpo, &row, site)?;
        energy = e;
        if site > 0 {
            let s = x.shape().to_vec();
            let (q, r) = linalg::qr(&x.reshape(&[s[0], s[1] * s[2]])?.dagger())?;
            let k = q.cols();
            row.tensors[site] = q.dagger().into_reshaped(&[k, s[1], s[2]])?;
            row.tensors[site - 1] = contract(&row.tensors[site - 1], &[2], &r.dagger(), &[0])?;
            env.right[site] = Some(grow_right(env.right[site + 1].as_ref().unwrap(), &row.tensors[site], &mpo.sites[site]));
        } else {
            row.tensors[site] = x;
        }
    }
    crate::mps::fix_phase(&mut row.tensors[0]);
    row.center = Some(0);
    Ok((energy, row))
}
