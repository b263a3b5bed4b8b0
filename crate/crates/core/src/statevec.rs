//! Brute-force statevector routines over `n` sites of uniform local dimension.
//!
//! Site 0 is the most significant digit of the basis index. These routines
//! back the exact-diagonalization path and the oracle checks; they scale as
//! `d^n` and are only used at desk scale.

use crate::error::{dim_err, Result};
use crate::scalar::{czero, Real, C};
use crate::tensor::DenseTensor;

fn site_strides(n: usize, d: usize) -> Vec<usize> {
    let mut s = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        s[k] = s[k + 1] * d;
    }
    s
}

fn check(state_len: usize, n: usize, d: usize, sites: &[usize], op: &DenseTensor<impl Real>) -> Result<usize> {
    let expect = d.checked_pow(n as u32).ok_or_else(|| dim_err!("d^n overflows"))?;
    if state_len != expect {
        return Err(dim_err!("state length {} but d^n = {}", state_len, expect));
    }
    let k = sites.len();
    let opdim = d.pow(k as u32);
    if !op.is_square() || op.rows() != opdim {
        return Err(dim_err!("operator {:?} on {} sites of dim {}", op.shape(), k, d));
    }
    for (i, &s) in sites.iter().enumerate() {
        if s >= n || sites[..i].contains(&s) {
            return Err(dim_err!("bad site list {:?}", sites));
        }
    }
    Ok(opdim)
}

/// Offsets of the `d^k` local configurations of `sites`, first site most significant.
fn local_offsets(strides: &[usize], sites: &[usize], d: usize) -> Vec<usize> {
    let k = sites.len();
    let total = d.pow(k as u32);
    (0..total)
        .map(|mut loc| {
            let mut off = 0;
            for j in (0..k).rev() {
                off += (loc % d) * strides[sites[j]];
                loc /= d;
            }
            off
        })
        .collect()
}

/// Base indices: all basis states whose digits on `sites` are zero.
fn bases(n: usize, d: usize, sites: &[usize]) -> Vec<usize> {
    let strides = site_strides(n, d);
    let free: Vec<usize> = (0..n).filter(|s| !sites.contains(s)).collect();
    let count = d.pow(free.len() as u32);
    (0..count)
        .map(|mut c| {
            let mut off = 0;
            for j in (0..free.len()).rev() {
                off += (c % d) * strides[free[j]];
                c /= d;
            }
            off
        })
        .collect()
}

/// `out += op_{sites} · state`.
pub fn accumulate_op<T: Real>(
    state: &[C<T>],
    out: &mut [C<T>],
    n: usize,
    d: usize,
    sites: &[usize],
    op: &DenseTensor<T>,
) -> Result<()> {
    let opdim = check(state.len(), n, d, sites, op)?;
    let strides = site_strides(n, d);
    let offs = local_offsets(&strides, sites, d);
    let mut buf = vec![czero::<T>(); opdim];
    for base in bases(n, d, sites) {
        for (b, o) in buf.iter_mut().zip(&offs) {
            *b = state[base + o];
        }
        for i in 0..opdim {
            let mut s = czero::<T>();
            for j in 0..opdim {
                s += op.at(i, j) * buf[j];
            }
            out[base + offs[i]] += s;
        }
    }
    Ok(())
}

/// Applies a gate on `sites` in place.
pub fn apply_gate<T: Real>(state: &mut [C<T>], n: usize, d: usize, sites: &[usize], gate: &DenseTensor<T>) -> Result<()> {
    let opdim = check(state.len(), n, d, sites, gate)?;
    let strides = site_strides(n, d);
    let offs = local_offsets(&strides, sites, d);
    let mut buf = vec![czero::<T>(); opdim];
    for base in bases(n, d, sites) {
        for (b, o) in buf.iter_mut().zip(&offs) {
            *b = state[base + o];
        }
        for i in 0..opdim {
            let mut s = czero::<T>();
            for j in 0..opdim {
                s += gate.at(i, j) * buf[j];
            }
            state[base + offs[i]] = s;
        }
    }
    Ok(())
}

/// `<ψ| O_{sites} |ψ>` (not normalized by the norm of ψ).
pub fn expectation<T: Real>(state: &[C<T>], n: usize, d: usize, sites: &[usize], op: &DenseTensor<T>) -> Result<C<T>> {
    let mut out = vec![czero::<T>(); state.len()];
    accumulate_op(state, &mut out, n, d, sites, op)?;
    Ok(state.iter().zip(&out).map(|(a, b)| a.conj() * b).sum())
}

/// Reduced density matrix on `keep` (in the listed order) of a pure state.
pub fn reduced_density<T: Real>(state: &[C<T>], n: usize, d: usize, keep: &[usize]) -> Result<DenseTensor<T>> {
    let dim = d.pow(keep.len() as u32);
    check(state.len(), n, d, keep, &DenseTensor::<T>::identity(dim))?;
    let strides = site_strides(n, d);
    let offs = local_offsets(&strides, keep, d);
    let mut rho = DenseTensor::<T>::zeros(&[dim, dim]);
    for base in bases(n, d, keep) {
        for i in 0..dim {
            let a = state[base + offs[i]];
            if a == czero() {
                continue;
            }
            for j in 0..dim {
                *rho.at_mut(i, j) += a * state[base + offs[j]].conj();
            }
        }
    }
    Ok(rho)
}

pub fn norm<T: Real>(state: &[C<T>]) -> T {
    state.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Embeds an operator acting on `positions` (of `total` sites, local dim `d`)
/// into the full `d^total` space.
pub fn embed_operator<T: Real>(op: &DenseTensor<T>, d: usize, positions: &[usize], total: usize) -> Result<DenseTensor<T>> {
    let dim = d.pow(total as u32);
    let mut out = DenseTensor::<T>::zeros(&[dim, dim]);
    for j in 0..dim {
        let mut e = vec![czero::<T>(); dim];
        e[j] = crate::scalar::cone();
        let mut col = vec![czero::<T>(); dim];
        accumulate_op(&e, &mut col, total, d, positions, op)?;
        for (i, v) in col.into_iter().enumerate() {
            *out.at_mut(i, j) = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cone;

    #[test]
    fn embedding_matches_kron() {
        let x = DenseTensor::<f64>::from_rows(&[&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (0.0, 0.0)]]);
        let id = DenseTensor::<f64>::identity(2);
        let emb = embed_operator(&x, 2, &[1], 3).unwrap();
        let kron = id.kron(&x).kron(&id);
        assert_eq!(emb.max_abs_diff(&kron), 0.0);
    }

    #[test]
    fn rdm_of_product_state() {
        // |0>|1>
        let mut s = vec![czero::<f64>(); 4];
        s[1] = cone();
        let rho = reduced_density(&s, 2, 2, &[1]).unwrap();
        assert_eq!(rho.at(1, 1), cone());
        assert_eq!(rho.at(0, 0), czero());
    }
}
