//! Two-point correlations of SGS: horizontal correlators against the row
//! transfer spectrum, and the vertical chain obtained by tracing out all but
//! one column, written as a matrix product density operator.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contraction;
use crate::error::{dim_err, val_err, Result};
use crate::lattice::LatticeSpec;
use crate::linalg;
use crate::mps::{transfer_matrix, MPSRow};
use crate::scalar::{cone, czero, from_real, real, to_f64, Real, C};
use crate::sgs::{random_unitary, SGSParams, SgsState};
use crate::tensor::{contract, DenseTensor};

/// Values with modulus below this are left out of decay fits.
pub const FIT_FLOOR: f64 = 1e-13;
/// Fewer usable points than this and no fit is attempted.
pub const MIN_FIT_POINTS: usize = 3;
/// Relative gap below which a spectrum counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSpectrum {
    /// `(re, im)`, descending modulus.
    pub eigenvalues: Vec<(f64, f64)>,
    /// `|λ2/λ1|`, zero when there is no second eigenvalue.
    pub ratio: f64,
    pub degenerate: bool,
}

impl TransferSpectrum {
    /// `ε(Δ) = |λ2/λ1|^(Δ-1)`.
    pub fn epsilon(&self, delta: usize) -> f64 {
        if self.eigenvalues.len() < 2 {
            return 0.0;
        }
        self.ratio.powi(delta as i32 - 1)
    }

    /// `λ2` is real and strictly larger in modulus than `λ3`.
    pub fn subleading_simple(&self) -> bool {
        let modulus = |k: usize| self.eigenvalues.get(k).map_or(0.0, |e: &(f64, f64)| e.0.hypot(e.1));
        let Some(&(re, im)) = self.eigenvalues.get(1) else {
            return false;
        };
        im.abs() <= DEGENERACY_TOL * re.abs().max(f64::MIN_POSITIVE) && modulus(2) < modulus(1) * (1.0 - DEGENERACY_TOL)
    }

    /// `-1/ln|λ2/λ1|`; zero for a product state, infinite when degenerate.
    pub fn correlation_length(&self) -> f64 {
        if self.ratio == 0.0 {
            0.0
        } else if self.ratio >= 1.0 {
            f64::INFINITY
        } else {
            -1.0 / self.ratio.ln()
        }
    }
}

fn sorted_by_modulus<T: Real>(mut v: Vec<C<T>>) -> Vec<C<T>> {
    v.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Spectrum of `E_1 = Σ_i A^i ⊗ conj(A^i)` for a site tensor with modes
/// `(left, phys, right)`. With `normalize`, eigenvalues are divided by `|λ1|`.
pub fn transfer_spectrum<T: Real>(a: &DenseTensor<T>, normalize: bool) -> Result<TransferSpectrum> {
    if a.rank() != 3 || a.shape()[0] != a.shape()[2] {
        return Err(dim_err!("translation-invariant tensor needs shape (D, d, D), got {:?}", a.shape()));
    }
    let e = transfer_matrix(a, &DenseTensor::identity(a.shape()[1]))?;
    let vals = sorted_by_modulus(linalg::eigvals_general(&e.matrix)?);
    let top = vals.first().map(|z| z.norm()).unwrap_or(T::one());
    let scale = if normalize && top > T::zero() { top } else { T::one() };
    let eigenvalues: Vec<(f64, f64)> = vals.iter().map(|z| (to_f64(z.re / scale), to_f64(z.im / scale))).collect();
    let ratio = if vals.len() > 1 && top > T::zero() { to_f64(vals[1].norm() / top) } else { 0.0 };
    Ok(TransferSpectrum { eigenvalues, ratio, degenerate: ratio > 1.0 - DEGENERACY_TOL })
}

/// Translation-invariant SGS: one site tensor `(D, d, D)` for every row and
/// one unitary on `M+1` sites for every column.
#[derive(Debug, Clone, PartialEq)]
pub struct TiDescription<T: Real = f64> {
    pub a: DenseTensor<T>,
    pub u: DenseTensor<T>,
    pub m: usize,
}

impl<T: Real> TiDescription<T> {
    pub fn new(a: DenseTensor<T>, u: DenseTensor<T>, m: usize) -> Result<Self> {
        if a.rank() != 3 || a.shape()[0] != a.shape()[2] {
            return Err(dim_err!("site tensor shape {:?} is not (D, d, D)", a.shape()));
        }
        let d = a.shape()[1];
        if m == 0 || !u.is_square() || u.rows() != d.pow(m as u32 + 1) {
            return Err(dim_err!("unitary {:?} does not act on {} sites of dimension {d}", u.shape(), m + 1));
        }
        if u.unitarity_defect() > crate::scalar::tol::<T>(crate::sgs::UNITARITY_TOL) {
            return Err(val_err!("unitary defect {}", u.unitarity_defect()));
        }
        Ok(TiDescription { a, u, m })
    }

    /// Seeded Gaussian site tensor (scaled so `|λ1| = 1`) and Haar-like unitary.
    pub fn random(d: usize, bond: usize, m: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DenseTensor::<T>::random_gaussian(&[bond, d, bond], &mut rng);
        let lead = transfer_spectrum(&a, false)?.eigenvalues[0];
        let scale = (lead.0.hypot(lead.1)).sqrt();
        let a = a.scale_real(T::one() / real::<T>(scale));
        let u = random_unitary(d.pow(m as u32 + 1), &mut rng)?;
        Self::new(a, u, m)
    }

    pub fn with_unitary(&self, u: DenseTensor<T>) -> Result<Self> {
        Self::new(self.a.clone(), u, self.m)
    }

    pub fn local_dim(&self) -> usize {
        self.a.shape()[1]
    }

    pub fn bond(&self) -> usize {
        self.a.shape()[0]
    }

    /// Open row of length `width` with uniform boundary vectors.
    pub fn row(&self, width: usize) -> Result<MPSRow<T>> {
        if width < 2 {
            return Err(val_err!("row width must be at least 2"));
        }
        let (bd, d) = (self.bond(), self.local_dim());
        let w = from_real(T::one() / real::<T>(bd as f64).sqrt());
        let first = DenseTensor::from_fn(&[1, d, bd], |ix| (0..bd).map(|l| self.a.get(&[l, ix[1], ix[2]])).sum::<C<T>>() * w);
        let last = DenseTensor::from_fn(&[bd, d, 1], |ix| (0..bd).map(|r| self.a.get(&[ix[0], ix[1], r])).sum::<C<T>>() * w);
        let mut ts = vec![first];
        ts.extend((1..width - 1).map(|_| self.a.clone()));
        ts.push(last);
        Ok(crate::mps::canonicalize(&MPSRow::new(ts)?, 0)?.normalized_at_center())
    }

    /// `rows × width` SGS with identical rows and identical unitaries.
    pub fn to_sgs(&self, rows: usize, width: usize) -> Result<SgsState<T>> {
        let row = self.row(width)?;
        let spec = LatticeSpec::new(rows, width, self.local_dim())?;
        let params = SGSParams::new(spec, self.m, self.bond(), 1)?;
        let unitaries = vec![vec![self.u.clone(); params.unitaries_per_column()]; width];
        SgsState::new(params, vec![row; rows], unitaries)
    }
}

trait Normalized<T: Real> {
    fn normalized_at_center(self) -> MPSRow<T>;
}

impl<T: Real> Normalized<T> for MPSRow<T> {
    fn normalized_at_center(mut self) -> MPSRow<T> {
        let c = self.center.unwrap_or(0);
        let n = self.tensors[c].norm();
        self.tensors[c] = self.tensors[c].scale_real(T::one() / n);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub xi: f64,
    pub r2: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least squares on `ln|C|` against `Δ` over points above [`FIT_FLOOR`].
pub fn fit_exponential(deltas: &[usize], values: &[f64]) -> Option<ExpFit> {
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .zip(values)
        .filter(|(_, v)| v.abs() > FIT_FLOOR)
        .map(|(&d, v)| (d as f64, v.abs().ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let xi = if slope < 0.0 { -1.0 / slope } else { f64::INFINITY };
    Some(ExpFit { xi, r2, slope, intercept, points: pts.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub direction: Direction,
    pub deltas: Vec<usize>,
    pub values: Vec<f64>,
    /// `None` when fewer than three points clear the floor.
    pub fit: Option<ExpFit>,
}

impl DecayReport {
    pub fn new(direction: Direction, deltas: Vec<usize>, values: Vec<f64>) -> Self {
        let fit = fit_exponential(&deltas, &values);
        DecayReport { direction, deltas, values, fit }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,value\n");
        for (d, v) in self.deltas.iter().zip(&self.values) {
            out.push_str(&format!("{d},{v:e}\n"));
        }
        out
    }
}

/// Connected `<O1 O2> - <O1><O2>` on two physical sites of an SGS.
pub fn connected<T: Real>(s: &SgsState<T>, o1: &DenseTensor<T>, p1: (usize, usize), o2: &DenseTensor<T>, p2: (usize, usize)) -> Result<f64> {
    let n2 = s.row_norm_product().powi(2);
    let one = |p, o: &DenseTensor<T>| contraction::expect_local(s, &BTreeMap::from([(p, o.clone())]));
    let both = contraction::expect_local(s, &BTreeMap::from([(p1, o1.clone()), (p2, o2.clone())]))?;
    let v = both / n2 - one(p1, o1)? * one(p2, o2)? / (n2 * n2);
    Ok(to_f64(v.re))
}

/// Horizontal connected correlators between `(row, v0)` and `(row, v0+Δ)`.
pub fn horizontal_correlator<T: Real>(
    s: &SgsState<T>,
    o1: &DenseTensor<T>,
    o2: &DenseTensor<T>,
    row: usize,
    v0: usize,
    deltas: &[usize],
) -> Result<DecayReport> {
    let spec = s.params.spec;
    if row >= spec.rows || deltas.iter().any(|&d| d == 0 || v0 + d >= spec.cols) {
        return Err(val_err!("row {row} or distances {:?} from column {v0} do not fit a {}x{} lattice", deltas, spec.rows, spec.cols));
    }
    let values = deltas.iter().map(|&d| connected(s, o1, (row, v0), o2, (row, v0 + d))).collect::<Result<Vec<_>>>()?;
    Ok(DecayReport::new(Direction::Horizontal, deltas.to_vec(), values))
}

/// The single-column state of a TI SGS as a matrix product density operator.
///
/// Site tensors have modes `(left, i, i', right)` with composite bonds
/// `(ket, bra)`; rows run top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalChain<T: Real = f64> {
    pub sites: Vec<DenseTensor<T>>,
    pub local_dim: usize,
}

fn composite(k: usize, b: usize, dim: usize) -> usize {
    k * dim + b
}

/// MPDO of one column of `H` rows, each row contributing the one-site density
/// matrix `rho`.
pub fn vertical_chain<T: Real>(ti: &TiDescription<T>, rho: &DenseTensor<T>, rows: usize) -> Result<VerticalChain<T>> {
    let (d, m) = (ti.local_dim(), ti.m);
    if rows < m + 1 {
        return Err(val_err!("a column needs at least {} rows", m + 1));
    }
    if rho.shape() != [d, d] {
        return Err(dim_err!("density matrix shape {:?}", rho.shape()));
    }
    let dm = d.pow(m as u32);
    let u = &ti.u;
    let mut sites = Vec::with_capacity(rows);
    // top rows split the bond of U[M]: the bond below row j carries digits 0..=j
    for j in 0..m {
        let (l, r) = (d.pow(j as u32), d.pow(j as u32 + 1));
        let mut t = DenseTensor::<T>::zeros(&[l * l, d, d, r * r]);
        for lk in 0..l {
            for lb in 0..l {
                for i in 0..d {
                    for ib in 0..d {
                        t.set(&[composite(lk, lb, l), i, ib, composite(lk * d + i, lb * d + ib, r)], cone());
                    }
                }
            }
        }
        sites.push(t);
    }
    let mut bulk = DenseTensor::<T>::zeros(&[dm * dm, d, d, dm * dm]);
    for a in 0..dm {
        for ab in 0..dm {
            for i in 0..d {
                for ib in 0..d {
                    for b in 0..dm {
                        for bb in 0..dm {
                            let mut acc = czero::<T>();
                            for g in 0..d {
                                for gb in 0..d {
                                    acc += u.at(a * d + i, g * dm + b) * rho.at(g, gb) * u.at(ab * d + ib, gb * dm + bb).conj();
                                }
                            }
                            bulk.set(&[composite(a, ab, dm), i, ib, composite(b, bb, dm)], acc);
                        }
                    }
                }
            }
        }
    }
    for _ in m..rows - 1 {
        sites.push(bulk.clone());
    }
    let mut rho_in = DenseTensor::<T>::identity(1);
    for _ in 0..=m {
        rho_in = rho_in.kron(rho);
    }
    let z = u.matmul(&rho_in)?.matmul(&u.dagger())?;
    let bottom = DenseTensor::from_fn(&[dm * dm, d, d, 1], |ix| {
        let (a, ab) = (ix[0] / dm, ix[0] % dm);
        z.at(a * d + ix[1], ab * d + ix[2])
    });
    sites.push(bottom);
    Ok(VerticalChain { sites, local_dim: d })
}

impl<T: Real> VerticalChain<T> {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// The vectorized MPDO as an MPS of physical dimension `d²`.
    pub fn purification(&self) -> Result<MPSRow<T>> {
        let d = self.local_dim;
        let ts = self
            .sites
            .iter()
            .map(|t| {
                let s = t.shape();
                t.reshape(&[s[0], d * d, s[3]])
            })
            .collect::<Result<Vec<_>>>()?;
        MPSRow::new(ts)
    }

    /// `Tr[Π_r O_r ρ]` with identity on rows without an operator.
    pub fn expectation(&self, ops: &BTreeMap<usize, DenseTensor<T>>) -> Result<C<T>> {
        let d = self.local_dim;
        let id = DenseTensor::<T>::identity(d);
        let mut v = DenseTensor::<T>::from_vec(&[1], vec![cone()])?;
        for (r, t) in self.sites.iter().enumerate() {
            let o = ops.get(&r).unwrap_or(&id);
            if o.shape() != [d, d] {
                return Err(dim_err!("observable at row {r} has shape {:?}", o.shape()));
            }
            // Σ_{i,i'} O[i',i] M^{i i'}
            let e = contract(t, &[1, 2], &o.transpose(), &[0, 1])?;
            v = contract(&v, &[0], &e, &[0])?;
        }
        if ops.keys().any(|&r| r >= self.len()) {
            return Err(val_err!("operator row outside the chain"));
        }
        Ok(v.data()[0])
    }

    pub fn trace(&self) -> C<T> {
        self.expectation(&BTreeMap::new()).expect("identity observables")
    }

    /// The full column density matrix (brute force, small chains only).
    pub fn density_matrix(&self) -> Result<DenseTensor<T>> {
        let d = self.local_dim;
        let mut acc = DenseTensor::<T>::from_vec(&[1, 1, 1], vec![cone()])?;
        // acc modes: (kets.., bras.., bond) flattened as (ket, bra, bond)
        for t in &self.sites {
            let s = t.shape();
            let x = contract(&acc, &[2], t, &[0])?; // (K, B, i, i', r)
            let (k, b) = (x.shape()[0], x.shape()[1]);
            acc = x.permute(&[0, 2, 1, 3, 4]).into_reshaped(&[k * d, b * d, s[3]])?;
        }
        let n = acc.shape()[0];
        acc.into_reshaped(&[n, n])
    }
}

/// Connected correlator between rows `h1 < h2` of the chain.
pub fn vertical_connected<T: Real>(chain: &VerticalChain<T>, o1: &DenseTensor<T>, o2: &DenseTensor<T>, h1: usize, h2: usize) -> Result<f64> {
    if h1 >= h2 || h2 >= chain.len() {
        return Err(val_err!("need h1 < h2 < {}", chain.len()));
    }
    let z = chain.trace();
    let a = chain.expectation(&BTreeMap::from([(h1, o1.clone())]))? / z;
    let b = chain.expectation(&BTreeMap::from([(h2, o2.clone())]))? / z;
    let ab = chain.expectation(&BTreeMap::from([(h1, o1.clone()), (h2, o2.clone())]))? / z;
    Ok(to_f64((ab - a * b).re))
}

pub fn vertical_correlator<T: Real>(chain: &VerticalChain<T>, o1: &DenseTensor<T>, o2: &DenseTensor<T>, h1: usize, deltas: &[usize]) -> Result<DecayReport> {
    let values = deltas.iter().map(|&d| vertical_connected(chain, o1, o2, h1, h1 + d)).collect::<Result<Vec<_>>>()?;
    Ok(DecayReport::new(Direction::Vertical, deltas.to_vec(), values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GMatrixAnalysis {
    pub v1: usize,
    pub v2: usize,
    /// Bulk `G` of the column pair and of each column alone, as `(re, im)` rows.
    pub g: Vec<Vec<(f64, f64)>>,
    pub g1: Vec<Vec<(f64, f64)>>,
    pub g2: Vec<Vec<(f64, f64)>>,
    /// Bottom-boundary vector `G_[H]` of the column pair.
    pub g_bottom: Vec<(f64, f64)>,
    pub leading: (f64, f64),
    pub leading_left: Vec<(f64, f64)>,
    pub leading_right: Vec<(f64, f64)>,
    pub second_modulus: f64,
    pub gap: f64,
    pub degenerate: bool,
    /// `‖G - G1⊗G2‖_F` and the same for the bottom vector.
    pub product_deviation: f64,
    pub bottom_deviation: f64,
    /// `ε(Δ)` of the row transfer spectrum and `product_deviation / ε`.
    pub epsilon: f64,
    pub constant: f64,
}

fn to_pairs<T: Real>(v: &[C<T>]) -> Vec<(f64, f64)> {
    v.iter().map(|z| (to_f64(z.re), to_f64(z.im))).collect()
}

fn matrix_pairs<T: Real>(m: &DenseTensor<T>) -> Vec<Vec<(f64, f64)>> {
    (0..m.rows()).map(|i| to_pairs(&(0..m.cols()).map(|j| m.at(i, j)).collect::<Vec<_>>())).collect()
}

/// `G` for one column: `Σ_i M^{ii}` with the given one-site density matrix.
pub fn g_single<T: Real>(u: &DenseTensor<T>, rho: &DenseTensor<T>, d: usize, m: usize) -> Result<DenseTensor<T>> {
    let dm = d.pow(m as u32);
    let x = u.reshape(&[dm, d, d, dm])?; // (α, i, γ, β)
    let t = contract(&x, &[2], rho, &[0])?; // (α, i, β, γ')
    let t = contract(&t, &[1, 3], &x.conj(), &[1, 2])?; // (α, β, α', β')
    t.permute(&[0, 2, 1, 3]).into_reshaped(&[dm * dm, dm * dm])
}

/// `G` for two columns sharing the two-site density matrix `rho2`.
pub fn g_pair<T: Real>(u: &DenseTensor<T>, rho2: &DenseTensor<T>, d: usize, m: usize) -> Result<DenseTensor<T>> {
    let dm = d.pow(m as u32);
    let x = u.reshape(&[dm, d, d, dm])?;
    let r = rho2.reshape(&[d, d, d, d])?; // (γ1, γ2, γ1', γ2')
    let t = contract(&x, &[2], &r, &[0])?; // (α1, i1, β1, γ2, γ1', γ2')
    let t = contract(&t, &[3], &x, &[2])?; // (α1, i1, β1, γ1', γ2', α2, i2, β2)
    let t = contract(&t, &[1, 3], &x.conj(), &[1, 2])?; // (α1, β1, γ2', α2, i2, β2, α1', β1')
    let t = contract(&t, &[2, 4], &x.conj(), &[2, 1])?; // (α1, β1, α2, β2, α1', β1', α2', β2')
    let n = dm.pow(4);
    t.permute(&[0, 4, 2, 6, 1, 5, 3, 7]).into_reshaped(&[n, n])
}

/// Bottom vector: `Tr_phys[(U⊗U) ρ_in (U⊗U)†]` over the `M+1` rows of the
/// lowest unitaries, ordered `(α1, α1', α2, α2')`.
fn g_bottom<T: Real>(u: &DenseTensor<T>, rho2: &DenseTensor<T>, d: usize, m: usize) -> Result<DenseTensor<T>> {
    let dm = d.pow(m as u32);
    let k = m + 1;
    // rows stacked: site order (row0 c1, row0 c2, row1 c1, ...) -> (c1 rows, c2 rows)
    let mut rin = DenseTensor::<T>::identity(1);
    for _ in 0..k {
        rin = rin.kron(rho2);
    }
    let mut perm: Vec<usize> = (0..k).map(|r| 2 * r).chain((0..k).map(|r| 2 * r + 1)).collect();
    let ket = perm.clone();
    perm.extend(ket.iter().map(|p| p + 2 * k));
    let nsite = 2 * k;
    let rin = rin.reshape(&vec![d; 2 * nsite])?.permute(&perm).into_reshaped(&[d.pow(nsite as u32), d.pow(nsite as u32)])?;
    let uu = u.kron(u);
    let z = uu.matmul(&rin)?.matmul(&uu.dagger())?;
    // z indices: (α1, i1, α2, i2) on each side
    let zt = z.reshape(&[dm, d, dm, d, dm, d, dm, d])?;
    let mut out = DenseTensor::<T>::zeros(&[dm, dm, dm, dm]);
    for a1 in 0..dm {
        for a1b in 0..dm {
            for a2 in 0..dm {
                for a2b in 0..dm {
                    let mut acc = czero::<T>();
                    for i1 in 0..d {
                        for i2 in 0..d {
                            acc += zt.get(&[a1, i1, a2, i2, a1b, i1, a2b, i2]);
                        }
                    }
                    out.set(&[a1, a1b, a2, a2b], acc);
                }
            }
        }
    }
    out.into_reshaped(&[dm.pow(4)])
}

fn g_bottom_single<T: Real>(u: &DenseTensor<T>, rho: &DenseTensor<T>, d: usize, m: usize) -> Result<DenseTensor<T>> {
    let dm = d.pow(m as u32);
    let mut rin = DenseTensor::<T>::identity(1);
    for _ in 0..=m {
        rin = rin.kron(rho);
    }
    let z = u.matmul(&rin)?.matmul(&u.dagger())?;
    Ok(DenseTensor::from_fn(&[dm * dm], |ix| {
        let (a, ab) = (ix[0] / dm, ix[0] % dm);
        (0..d).map(|i| z.at(a * d + i, ab * d + i)).sum()
    }))
}

/// Normalized one- and two-site density matrices of the TI row of `width` sites.
pub fn row_densities<T: Real>(ti: &TiDescription<T>, width: usize, v1: usize, v2: usize) -> Result<(DenseTensor<T>, DenseTensor<T>, DenseTensor<T>)> {
    if v1 >= v2 || v2 >= width {
        return Err(val_err!("need v1 < v2 < {width}"));
    }
    let row = ti.row(width)?;
    let n2 = row.norm_sqr();
    let r1 = row.reduced_density(&[v1])?.scale_real(T::one() / n2);
    let r2 = row.reduced_density(&[v2])?.scale_real(T::one() / n2);
    let r12 = row.reduced_density(&[v1, v2])?.scale_real(T::one() / n2);
    Ok((r1, r2, r12))
}

/// Trace norm of `ρ12 - ρ1⊗ρ2` for a two-site density matrix.
pub fn product_deviation<T: Real>(rho12: &DenseTensor<T>, d: usize) -> Result<f64> {
    let r = rho12.reshape(&[d, d, d, d])?;
    let r1 = DenseTensor::from_fn(&[d, d], |ix| (0..d).map(|k| r.get(&[ix[0], k, ix[1], k])).sum());
    let r2 = DenseTensor::from_fn(&[d, d], |ix| (0..d).map(|k| r.get(&[k, ix[0], k, ix[1]])).sum());
    let diff = rho12.sub(&r1.kron(&r2))?.hermitian_part();
    let (vals, _) = linalg::herm_eig(&diff)?;
    Ok(vals.iter().map(|v| to_f64(v.abs())).sum())
}

/// Bulk `G` analysis of columns `v1 < v2` of a TI SGS on rows of `width` sites.
pub fn g_matrix_analysis<T: Real>(ti: &TiDescription<T>, width: usize, v1: usize, v2: usize) -> Result<GMatrixAnalysis> {
    let (d, m) = (ti.local_dim(), ti.m);
    let (r1, r2, r12) = row_densities(ti, width, v1, v2)?;
    let g = g_pair(&ti.u, &r12, d, m)?;
    let g1 = g_single(&ti.u, &r1, d, m)?;
    let g2 = g_single(&ti.u, &r2, d, m)?;
    let product_deviation = to_f64(g.sub(&g1.kron(&g2))?.norm());
    let gb = g_bottom(&ti.u, &r12, d, m)?;
    let gb1 = g_bottom_single(&ti.u, &r1, d, m)?;
    let gb2 = g_bottom_single(&ti.u, &r2, d, m)?;
    let gbp = gb1.outer(&gb2).into_reshaped(&[gb.len()])?;
    let bottom_deviation = to_f64(gb.sub(&gbp)?.norm());
    let vals = sorted_by_modulus(linalg::eigvals_general(&g)?);
    let mu = vals[0];
    let second = vals.get(1).map(|z| to_f64(z.norm())).unwrap_or(0.0);
    let gap = to_f64(mu.norm()) - second;
    let right = linalg::eigvec_general(&g, mu)?;
    let left = linalg::eigvec_general(&g.transpose(), mu)?;
    let spectrum = transfer_spectrum(&ti.a, true)?;
    let epsilon = spectrum.epsilon(v2 - v1);
    Ok(GMatrixAnalysis {
        v1,
        v2,
        g: matrix_pairs(&g),
        g1: matrix_pairs(&g1),
        g2: matrix_pairs(&g2),
        g_bottom: to_pairs(gb.data()),
        leading: (to_f64(mu.re), to_f64(mu.im)),
        leading_left: to_pairs(&left),
        leading_right: to_pairs(&right),
        second_modulus: second,
        gap,
        degenerate: gap <= DEGENERACY_TOL * to_f64(mu.norm()),
        product_deviation,
        bottom_deviation,
        epsilon,
        constant: if epsilon > 0.0 { product_deviation / epsilon } else { 0.0 },
    })
}

/// Trace-norm distance of the two-site density matrix at `(h, v1), (h, v2)`
/// of an SGS from the product of its marginals.
pub fn column_pair_deviation<T: Real>(s: &SgsState<T>, h: usize, v1: usize, v2: usize) -> Result<f64> {
    let rho = contraction::reduced_density(s, &[(h, v1), (h, v2)])?;
    product_deviation(&rho, s.params.spec.local_dim)
}
