//! Exact evaluation of SGS expectation values.
//!
//! Column unitaries on columns without operators cancel, and so do unitaries
//! whose rows all lie above the operators of their column. What remains is a
//! ladder over at most two columns: row reduced density matrices are fed in
//! bottom-up, each remaining column unitary acts on a window of `M+1` rows,
//! and finished rows are traced out (with their operator, if any). The window
//! density operator never holds more than `2(M+1)` sites, giving the
//! `d²D⁶`-type bulk cost for two-site terms.
//!
//! Every step is linear, so the same plan run backwards (adjoint maps) gives
//! the functional seen by any intermediate object. Row environments for the
//! A-phase and gradients for the U-phase are read off that way.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{dim_err, val_err, Error, Result};
use crate::lattice::{Hamiltonian, HamiltonianTerm};
use crate::mps::MPSRow;
use crate::scalar::{cone, czero, Real, C};
use crate::sgs::SgsState;
use crate::statevec;
use crate::tensor::{contract, DenseTensor};

/// Default limit on operator-bearing sites in one expectation value.
pub const DEFAULT_MAX_SITES: usize = 2;
/// Limit with an explicit resource acknowledgment.
pub const ACK_MAX_SITES: usize = 4;

/// An operator on one or more effective sites; the first site is the most
/// significant factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor<T: Real = f64> {
    pub sites: Vec<(usize, usize)>,
    pub op: DenseTensor<T>,
}

/// A contraction instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    /// Append the reduced density matrix of `row` on `cols`.
    BringIn { row: usize, cols: Vec<usize> },
    /// Apply `U[b, col]` on rows `b-M ..= b`.
    Unitary { b: usize, col: usize },
    /// Trace out `slots`, weighted by factor `factor` if given.
    Close { slots: Vec<(usize, usize)>, factor: Option<usize> },
}

#[derive(Debug, Clone)]
pub struct LadderPlan {
    pub columns: Vec<usize>,
    pub steps: Vec<Step>,
    /// Rows entering only through their squared norm.
    pub norm_rows: Vec<usize>,
    /// Largest window, in sites and in stored values.
    pub peak_sites: usize,
    pub peak_values: usize,
    /// `d² D⁶` with `D = max(bond, d^M)`.
    pub bulk_cost: usize,
}

/// Constant in the peak-size check `peak ≤ c·d²D⁶`.
pub const LADDER_CONSTANT: usize = 4;

impl LadderPlan {
    /// Plans the contraction of `factors` on an effective lattice.
    pub fn build(rows: usize, cols: usize, m: usize, d: usize, bond: usize, factors: &[Factor<impl Real>]) -> Result<Self> {
        let mut colset = BTreeSet::new();
        for f in factors {
            for &(r, c) in &f.sites {
                if r >= rows || c >= cols {
                    return Err(val_err!("site ({r},{c}) outside {rows}x{cols} lattice"));
                }
                colset.insert(c);
            }
        }
        let mut seen = BTreeSet::new();
        for f in factors {
            for s in &f.sites {
                if !seen.insert(*s) {
                    return Err(val_err!("site {:?} carries two operators", s));
                }
            }
        }
        let columns: Vec<usize> = colset.into_iter().collect();
        let has_u = rows > m;
        let op_rows = |c: usize| -> Vec<usize> {
            let mut v: Vec<usize> = factors.iter().flat_map(|f| f.sites.iter()).filter(|s| s.1 == c).map(|s| s.0).collect();
            v.sort();
            v.dedup();
            v
        };
        // per column: window rows, lowest unitary row b_min
        let mut window: BTreeMap<usize, (BTreeSet<usize>, usize)> = BTreeMap::new();
        for &c in &columns {
            let rows_c = op_rows(c);
            if has_u {
                let b_min = m.max(rows_c[0]);
                window.insert(c, (((b_min - m)..rows).collect(), b_min));
            } else {
                window.insert(c, (rows_c.into_iter().collect(), usize::MAX));
            }
        }
        let t_in = |q: usize| if has_u { (q + m).min(rows - 1) } else { q };
        let t_fin = |r: usize, c: usize| if has_u { r.max(window[&c].1) } else { r };
        let all_rows: BTreeSet<usize> = window.values().flat_map(|w| w.0.iter().copied()).collect();
        let norm_rows = (0..rows).filter(|r| !all_rows.contains(r)).collect();
        let t_min = all_rows.iter().next().copied().unwrap_or(0);

        let mut steps = Vec::new();
        let mut open: Vec<(usize, usize)> = Vec::new();
        let mut pending: Vec<bool> = vec![true; factors.len()];
        let mut final_slots: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut peak_sites = 0;
        if !all_rows.is_empty() {
            for t in (t_min..rows).rev() {
                for &q in all_rows.iter().filter(|&&q| t_in(q) == t) {
                    let cs: Vec<usize> = columns.iter().copied().filter(|c| window[c].0.contains(&q)).collect();
                    open.extend(cs.iter().map(|&c| (q, c)));
                    steps.push(Step::BringIn { row: q, cols: cs });
                }
                peak_sites = peak_sites.max(open.len());
                if has_u {
                    for &c in &columns {
                        if window[&c].1 <= t {
                            steps.push(Step::Unitary { b: t, col: c });
                        }
                    }
                }
                for &(r, c) in open.iter() {
                    if t_fin(r, c) == t {
                        final_slots.insert((r, c));
                    }
                }
                for (k, f) in factors.iter().enumerate() {
                    if pending[k] && f.sites.iter().all(|s| final_slots.contains(s)) {
                        pending[k] = false;
                        open.retain(|s| !f.sites.contains(s));
                        steps.push(Step::Close { slots: f.sites.clone(), factor: Some(k) });
                    }
                }
                let plain: Vec<(usize, usize)> = open
                    .iter()
                    .copied()
                    .filter(|s| final_slots.contains(s) && !factors.iter().enumerate().any(|(k, f)| pending[k] && f.sites.contains(s)))
                    .collect();
                if !plain.is_empty() {
                    open.retain(|s| !plain.contains(s));
                    steps.push(Step::Close { slots: plain, factor: None });
                }
            }
        }
        if !open.is_empty() || pending.iter().any(|&p| p) {
            return Err(Error::Numerical("ladder plan left open slots".into()));
        }
        let dv = d.pow(m as u32).max(bond);
        let bulk_cost = d * d * dv.pow(6);
        let peak_values = d.pow(2 * peak_sites as u32);
        Ok(LadderPlan { columns, steps, norm_rows, peak_sites, peak_values, bulk_cost })
    }

    /// Peak window size within `c·d²D⁶` values.
    pub fn within_bulk_scaling(&self) -> bool {
        self.peak_values <= LADDER_CONSTANT * self.bulk_cost
    }
}

/// Density operator (or dual functional) over a list of sites; tensor modes
/// are all ket indices in slot order followed by all bra indices.
#[derive(Debug, Clone)]
struct Window<T: Real> {
    slots: Vec<(usize, usize)>,
    t: DenseTensor<T>,
    d: usize,
}

impl<T: Real> Window<T> {
    fn scalar(v: C<T>, d: usize) -> Self {
        Window { slots: vec![], t: DenseTensor::scalar(v), d }
    }

    fn k(&self) -> usize {
        self.slots.len()
    }

    fn positions(&self, slots: &[(usize, usize)]) -> Vec<usize> {
        slots.iter().map(|s| self.slots.iter().position(|x| x == s).expect("slot open")).collect()
    }

    fn as_op(&self, m: &DenseTensor<T>, n: usize) -> DenseTensor<T> {
        m.reshape(&vec![self.d; 2 * n]).expect("square operator on n sites")
    }

    fn bring_in(&self, new: &[(usize, usize)], rho: &DenseTensor<T>) -> Self {
        let (k, m) = (self.k(), new.len());
        let o = self.t.outer(&self.as_op(rho, m));
        let perm: Vec<usize> = (0..k).chain(2 * k..2 * k + m).chain(k..2 * k).chain(2 * k + m..2 * (k + m)).collect();
        let mut slots = self.slots.clone();
        slots.extend_from_slice(new);
        Window { slots, t: o.permute(&perm), d: self.d }
    }

    /// `g_ket · X · g_bra^T` with gates on the listed positions.
    fn sandwich(&self, pos: &[usize], ket: &DenseTensor<T>, bra: &DenseTensor<T>) -> Self {
        let k = self.k();
        let mut out = self.clone();
        let data = out.t.data_mut();
        statevec::apply_gate(data, 2 * k, self.d, pos, ket).expect("gate fits window");
        let bpos: Vec<usize> = pos.iter().map(|p| p + k).collect();
        statevec::apply_gate(data, 2 * k, self.d, &bpos, bra).expect("gate fits window");
        out
    }

    /// `U X U†`.
    fn apply_unitary(&self, pos: &[usize], u: &DenseTensor<T>) -> Self {
        self.sandwich(pos, u, &u.conj())
    }

    /// `U† F U` (adjoint of [`Self::apply_unitary`]).
    fn adjoint_unitary(&self, pos: &[usize], u: &DenseTensor<T>) -> Self {
        self.sandwich(pos, &u.dagger(), &u.transpose())
    }

    /// `Tr_P[(h ⊗ 1) X]`.
    fn close(&self, slots: &[(usize, usize)], h: &DenseTensor<T>) -> Self {
        let k = self.k();
        let p = slots.len();
        let pos = self.positions(slots);
        let ht = self.as_op(h, p);
        let mut ma: Vec<usize> = pos.clone();
        ma.extend(pos.iter().map(|x| x + k));
        let mb: Vec<usize> = (p..2 * p).chain(0..p).collect();
        let t = contract(&self.t, &ma, &ht, &mb).expect("close shapes");
        let slots = self.slots.iter().copied().filter(|s| !slots.contains(s)).collect();
        Window { slots, t, d: self.d }
    }

    /// Adjoint of [`Self::close`]: `h ⊗ F` laid out over `old` slots.
    fn adjoint_close(&self, old: &[(usize, usize)], closed: &[(usize, usize)], h: &DenseTensor<T>) -> Self {
        let p = closed.len();
        let kr = self.k();
        let o = self.as_op(h, p).outer(&self.t);
        // o modes: h out (p), h in (p), F ket (kr), F bra (kr)
        let mut ket = Vec::with_capacity(old.len());
        let mut bra = Vec::with_capacity(old.len());
        for s in old {
            if let Some(j) = closed.iter().position(|x| x == s) {
                ket.push(j);
                bra.push(p + j);
            } else {
                let i = self.slots.iter().position(|x| x == s).expect("remaining slot");
                ket.push(2 * p + i);
                bra.push(2 * p + kr + i);
            }
        }
        ket.extend(bra);
        Window { slots: old.to_vec(), t: o.permute(&ket), d: self.d }
    }

    /// Adjoint of [`Self::bring_in`]: `Σ F[(x,a),(y,b)] ρ[b,a]`.
    fn adjoint_bring_in(&self, m: usize, rho: &DenseTensor<T>) -> Self {
        let k = self.k();
        let k0 = k - m;
        let rt = self.as_op(rho, m);
        let fa: Vec<usize> = (k0..k).chain(k + k0..2 * k).collect();
        let ra: Vec<usize> = (m..2 * m).chain(0..m).collect();
        let t = contract(&self.t, &fa, &rt, &ra).expect("bring-in shapes");
        Window { slots: self.slots[..k0].to_vec(), t, d: self.d }
    }

    /// `Tr[F X]` where `self` is F.
    fn pair(&self, x: &Window<T>) -> C<T> {
        let k = self.k();
        let fa: Vec<usize> = (0..2 * k).collect();
        let xa: Vec<usize> = (k..2 * k).chain(0..k).collect();
        let xp = x.permuted_like(&self.slots);
        contract(&self.t, &fa, &xp.t, &xa).expect("pair shapes").data()[0]
    }

    fn permuted_like(&self, order: &[(usize, usize)]) -> Self {
        if order == self.slots.as_slice() {
            return self.clone();
        }
        let k = self.k();
        let pos = self.positions(order);
        let perm: Vec<usize> = pos.iter().copied().chain(pos.iter().map(|p| p + k)).collect();
        Window { slots: order.to_vec(), t: self.t.permute(&perm), d: self.d }
    }

    /// `Y[a,b] = Σ F[(x,a),(y,b)] σ[y,x]`, the weight of a freshly brought in block.
    fn bring_in_environment(&self, sigma: &Window<T>, m: usize) -> DenseTensor<T> {
        let k = self.k();
        let k0 = k - m;
        let sp = sigma.permuted_like(&self.slots[..k0]);
        let fa: Vec<usize> = (0..k0).chain(k..k + k0).collect();
        let sa: Vec<usize> = (k0..2 * k0).chain(0..k0).collect();
        let y = contract(&self.t, &fa, &sp.t, &sa).expect("environment shapes");
        let dim = self.d.pow(m as u32);
        y.into_reshaped(&[dim, dim]).expect("square block")
    }

    /// `(Tr_rest[Z F], Tr_rest[F Z])` on positions `pos` of `z`.
    fn gradient_pair(z: &Window<T>, f: &Window<T>, slots: &[(usize, usize)]) -> (DenseTensor<T>, DenseTensor<T>) {
        let f = f.permuted_like(&z.slots);
        let k = z.k();
        let pos = z.positions(slots);
        let rest: Vec<usize> = (0..k).filter(|i| !pos.contains(i)).collect();
        let p = pos.len();
        let dim = z.d.pow(p as u32);
        // Z bra ↔ F ket (all), Z ket rest ↔ F bra rest
        let za: Vec<usize> = (k..2 * k).chain(rest.iter().copied()).collect();
        let fa: Vec<usize> = (0..k).chain(rest.iter().map(|i| i + k)).collect();
        let g = contract(&z.t, &za, &f.t, &fa).expect("gradient shapes");
        // remaining: Z ket pos (ascending), F bra pos (ascending)
        let g = reorder_block(g, &pos, p).into_reshaped(&[dim, dim]).expect("square");
        let g2 = contract(&f.t, &za, &z.t, &fa).expect("gradient shapes");
        let g2 = reorder_block(g2, &pos, p).into_reshaped(&[dim, dim]).expect("square");
        (g, g2)
    }
}

/// Contraction keeps the remaining modes in ascending position order; put
/// them back in the order of `pos` (the gate's row order) on both sides.
fn reorder_block<T: Real>(t: DenseTensor<T>, pos: &[usize], p: usize) -> DenseTensor<T> {
    let mut sorted: Vec<usize> = pos.to_vec();
    sorted.sort();
    let idx: Vec<usize> = pos.iter().map(|x| sorted.iter().position(|y| y == x).expect("member")).collect();
    let perm: Vec<usize> = idx.iter().copied().chain(idx.iter().map(|i| i + p)).collect();
    t.permute(&perm)
}

/// Per-row environments and cached reduced density matrices.
pub struct RowCache<T: Real> {
    pub norm2: T,
    left: Vec<DenseTensor<T>>,
    right: Vec<DenseTensor<T>>,
    one: Vec<DenseTensor<T>>,
    two: Vec<DenseTensor<T>>,
}

impl<T: Real> RowCache<T> {
    pub fn new(row: &MPSRow<T>) -> Self {
        let left = row.left_envs();
        let right = row.right_envs();
        let norm2 = left[row.len()].data()[0].re;
        let one = (0..row.len()).map(|c| row.reduced_density_with(&[c], &left, &right).expect("valid site")).collect();
        let two = (0..row.len().saturating_sub(1)).map(|c| row.reduced_density_with(&[c, c + 1], &left, &right).expect("valid sites")).collect();
        RowCache { norm2, left, right, one, two }
    }

    pub fn rdm(&self, row: &MPSRow<T>, cols: &[usize]) -> DenseTensor<T> {
        match cols {
            [c] => self.one[*c].clone(),
            [a, b] if *b == a + 1 => self.two[*a].clone(),
            _ => row.reduced_density_with(cols, &self.left, &self.right).expect("valid sites"),
        }
    }
}

pub fn row_caches<T: Real>(s: &SgsState<T>) -> Vec<RowCache<T>> {
    s.rows.par_iter().map(RowCache::new).collect()
}

/// Forward pass. Returns the value and the window before every step.
fn forward<T: Real>(
    s: &SgsState<T>,
    caches: &[RowCache<T>],
    plan: &LadderPlan,
    factors: &[Factor<T>],
    keep: bool,
) -> (C<T>, Vec<Window<T>>) {
    let d = s.params.local_dim();
    let mut w = Window::scalar(cone(), d);
    let mut history = Vec::new();
    for step in &plan.steps {
        if keep {
            history.push(w.clone());
        }
        w = apply_step(s, caches, factors, step, &w);
    }
    let mut v = w.t.data()[0];
    for &r in &plan.norm_rows {
        v = v * caches[r].norm2;
    }
    (v, history)
}

fn apply_step<T: Real>(s: &SgsState<T>, caches: &[RowCache<T>], factors: &[Factor<T>], step: &Step, w: &Window<T>) -> Window<T> {
    let m = s.params.m;
    match step {
        Step::BringIn { row, cols } => {
            let rho = caches[*row].rdm(&s.rows[*row], cols);
            let slots: Vec<(usize, usize)> = cols.iter().map(|&c| (*row, c)).collect();
            w.bring_in(&slots, &rho)
        }
        Step::Unitary { b, col } => {
            let slots: Vec<(usize, usize)> = (b - m..=*b).map(|r| (r, *col)).collect();
            w.apply_unitary(&w.positions(&slots), s.unitary(*b, *col))
        }
        Step::Close { slots, factor } => match factor {
            Some(k) => w.close(slots, &factors[*k].op),
            None => w.close(slots, &DenseTensor::identity(w.d.pow(slots.len() as u32))),
        },
    }
}

/// Backward pass: the functional after every step (index-aligned with
/// `plan.steps`), given the windows before each step.
fn backward<T: Real>(
    s: &SgsState<T>,
    caches: &[RowCache<T>],
    plan: &LadderPlan,
    factors: &[Factor<T>],
    history: &[Window<T>],
    norm_factor: T,
) -> Vec<Window<T>> {
    let d = s.params.local_dim();
    let m = s.params.m;
    let n = plan.steps.len();
    let mut after: Vec<Window<T>> = Vec::with_capacity(n);
    let mut f = Window::scalar(crate::scalar::from_real(norm_factor), d);
    for i in (0..n).rev() {
        after.push(f.clone());
        let before_slots = &history[i].slots;
        f = match &plan.steps[i] {
            Step::BringIn { row, cols } => {
                let rho = caches[*row].rdm(&s.rows[*row], cols);
                f.permuted_like(&after_slots(before_slots, *row, cols)).adjoint_bring_in(cols.len(), &rho)
            }
            Step::Unitary { b, col } => {
                let slots: Vec<(usize, usize)> = (b - m..=*b).map(|r| (r, *col)).collect();
                let f2 = f.permuted_like(before_slots);
                f2.adjoint_unitary(&f2.positions(&slots), s.unitary(*b, *col))
            }
            Step::Close { slots, factor } => {
                let h = match factor {
                    Some(k) => factors[*k].op.clone(),
                    None => DenseTensor::identity(d.pow(slots.len() as u32)),
                };
                f.adjoint_close(before_slots, slots, &h)
            }
        };
    }
    after.reverse();
    after
}

fn after_slots(before: &[(usize, usize)], row: usize, cols: &[usize]) -> Vec<(usize, usize)> {
    let mut v = before.to_vec();
    v.extend(cols.iter().map(|&c| (row, c)));
    v
}

/// Converts physical single-site operators into effective-lattice factors.
fn effective_product<T: Real>(s: &SgsState<T>, ops: &BTreeMap<(usize, usize), DenseTensor<T>>) -> Result<Vec<Factor<T>>> {
    let p = &s.params;
    let (n, d) = (p.block, p.spec.local_dim);
    let mut grouped: BTreeMap<(usize, usize), Vec<(usize, &DenseTensor<T>)>> = BTreeMap::new();
    for (&(r, c), o) in ops {
        if r >= p.spec.rows || c >= p.spec.cols {
            return Err(val_err!("site ({r},{c}) outside the lattice"));
        }
        if o.shape() != [d, d] {
            return Err(dim_err!("observable at ({r},{c}) has shape {:?}", o.shape()));
        }
        grouped.entry((r / n, c)).or_default().push((r % n, o));
    }
    grouped
        .into_iter()
        .map(|(site, list)| {
            let mut op = DenseTensor::<T>::identity(1);
            for sub in 0..n {
                let f = list.iter().find(|(k, _)| *k == sub).map(|(_, o)| (*o).clone()).unwrap_or_else(|| DenseTensor::identity(d));
                op = op.kron(&f);
            }
            Ok(Factor { sites: vec![site], op })
        })
        .collect()
}

/// Effective-lattice factors of a physical Hamiltonian, one per distinct
/// site set, with sites in ascending order.
pub fn hamiltonian_factors<T: Real>(s: &SgsState<T>, h: &Hamiltonian<T>) -> Result<Vec<Factor<T>>> {
    if h.spec != s.params.spec {
        return Err(val_err!("Hamiltonian lattice {:?} differs from state lattice {:?}", h.spec, s.params.spec));
    }
    let eff = if s.params.block > 1 { h.blocked(s.params.block)? } else { h.clone() };
    Ok(merge_terms(&eff.terms, eff.spec.local_dim))
}

fn merge_terms<T: Real>(terms: &[HamiltonianTerm<T>], d: usize) -> Vec<Factor<T>> {
    let mut out: Vec<Factor<T>> = Vec::new();
    for t in terms {
        let (sites, op) = if t.sites.len() == 2 && t.sites[0] > t.sites[1] {
            let swapped = t.operator.reshape(&[d, d, d, d]).expect("two-site operator").permute(&[1, 0, 3, 2]);
            (vec![t.sites[1], t.sites[0]], swapped.into_reshaped(&[d * d, d * d]).expect("size"))
        } else {
            (t.sites.clone(), t.operator.clone())
        };
        match out.iter_mut().find(|f| f.sites == sites) {
            Some(f) => f.op = f.op.add(&op).expect("same shape"),
            None => out.push(Factor { sites, op }),
        }
    }
    out
}

fn plan_for<T: Real>(s: &SgsState<T>, factors: &[Factor<T>]) -> Result<LadderPlan> {
    let p = &s.params;
    LadderPlan::build(p.rows(), p.cols(), p.m, p.local_dim(), p.bond, factors)
}

/// `Π_r ‖φ_r‖`: unitaries cancel in the norm.
pub fn norm<T: Real>(s: &SgsState<T>) -> T {
    s.row_norm_product()
}

/// `<Ψ| ⊗ O_site |Ψ>` for at most two operator-bearing physical sites.
pub fn expect_local<T: Real>(s: &SgsState<T>, ops: &BTreeMap<(usize, usize), DenseTensor<T>>) -> Result<C<T>> {
    expect_local_limited(s, ops, false)
}

/// As [`expect_local`]; `ack_large` raises the site limit to four.
pub fn expect_local_limited<T: Real>(s: &SgsState<T>, ops: &BTreeMap<(usize, usize), DenseTensor<T>>, ack_large: bool) -> Result<C<T>> {
    expect_local_capped(s, ops, if ack_large { ACK_MAX_SITES } else { DEFAULT_MAX_SITES })
}

/// As [`expect_local`] with an explicit cap on operator-bearing sites.
pub fn expect_local_capped<T: Real>(s: &SgsState<T>, ops: &BTreeMap<(usize, usize), DenseTensor<T>>, limit: usize) -> Result<C<T>> {
    if ops.len() > limit {
        return Err(Error::Unsupported(format!("{} operator sites exceed the limit of {limit}", ops.len())));
    }
    let factors = effective_product(s, ops)?;
    let caches = row_caches(s);
    evaluate(s, &caches, &factors)
}

/// Normalized reduced density matrix on at most two physical sites, listed
/// most significant first.
pub fn reduced_density<T: Real>(s: &SgsState<T>, sites: &[(usize, usize)]) -> Result<DenseTensor<T>> {
    if sites.is_empty() || sites.len() > DEFAULT_MAX_SITES {
        return Err(Error::Unsupported(format!("reduced density on {} sites", sites.len())));
    }
    let d = s.params.spec.local_dim;
    let k = sites.len();
    let dim = d.pow(k as u32);
    let caches = row_caches(s);
    let n2: T = caches.iter().map(|c| c.norm2).fold(T::one(), |a, b| a * b);
    let mut rho = DenseTensor::<T>::zeros(&[dim, dim]);
    for a in 0..dim {
        for b in 0..dim {
            // ρ[a,b] = <|b><a|>
            let mut ops = BTreeMap::new();
            for (j, site) in sites.iter().enumerate() {
                let shift = d.pow((k - 1 - j) as u32);
                let (aj, bj) = ((a / shift) % d, (b / shift) % d);
                let mut e = DenseTensor::<T>::zeros(&[d, d]);
                *e.at_mut(bj, aj) = cone();
                if ops.insert(*site, e).is_some() {
                    return Err(val_err!("repeated site {:?}", site));
                }
            }
            let v = evaluate(s, &caches, &effective_product(s, &ops)?)?;
            *rho.at_mut(a, b) = v / n2;
        }
    }
    Ok(rho)
}

/// `<Ψ| Π factors |Ψ>` for factors on the effective lattice.
pub fn evaluate<T: Real>(s: &SgsState<T>, caches: &[RowCache<T>], factors: &[Factor<T>]) -> Result<C<T>> {
    let plan = plan_for(s, factors)?;
    Ok(forward(s, caches, &plan, factors, false).0)
}

/// The ladder plan of a physical-site product observable.
pub fn plan_local<T: Real>(s: &SgsState<T>, ops: &BTreeMap<(usize, usize), DenseTensor<T>>) -> Result<LadderPlan> {
    plan_for(s, &effective_product(s, ops)?)
}

/// `<Ψ|H|Ψ> / <Ψ|Ψ>`.
pub fn energy<T: Real>(s: &SgsState<T>, h: &Hamiltonian<T>) -> Result<T> {
    let factors = hamiltonian_factors(s, h)?;
    let caches = row_caches(s);
    energy_of_factors(s, &caches, &factors)
}

/// Energy from pre-blocked factors; terms are evaluated in parallel and
/// summed in list order.
pub fn energy_of_factors<T: Real>(s: &SgsState<T>, caches: &[RowCache<T>], factors: &[Factor<T>]) -> Result<T> {
    let values = term_values(s, caches, factors)?;
    let total: C<T> = values.iter().copied().sum();
    let n2: T = caches.iter().map(|c| c.norm2).fold(T::one(), |a, b| a * b);
    let e = total / n2;
    let scale = values.iter().map(|v| v.norm()).fold(T::one(), T::max) / n2;
    if e.im.abs() > crate::scalar::tol::<T>(1e-9) * scale {
        return Err(Error::Numerical(format!("energy has imaginary part {}", e.im)));
    }
    Ok(e.re)
}

/// `<Ψ|h_t|Ψ>` for each factor (unnormalized).
pub fn term_values<T: Real>(s: &SgsState<T>, caches: &[RowCache<T>], factors: &[Factor<T>]) -> Result<Vec<C<T>>> {
    factors
        .par_iter()
        .map(|f| evaluate(s, caches, std::slice::from_ref(f)))
        .collect()
}

/// One-dimensional Hamiltonian seen by a single row with everything else fixed:
/// `E(φ) = <φ|H_row|φ> / <φ|φ>`.
#[derive(Debug, Clone)]
pub struct RowHamiltonian<T: Real = f64> {
    pub constant: T,
    /// `d×d` per column.
    pub onsite: Vec<DenseTensor<T>>,
    /// `d²×d²` on `(c, c+1)`, first site most significant.
    pub bonds: Vec<DenseTensor<T>>,
}

impl<T: Real> RowHamiltonian<T> {
    pub fn zeros(cols: usize, d: usize) -> Self {
        RowHamiltonian {
            constant: T::zero(),
            onsite: vec![DenseTensor::zeros(&[d, d]); cols],
            bonds: vec![DenseTensor::zeros(&[d * d, d * d]); cols.saturating_sub(1)],
        }
    }

    /// `<φ|H_row|φ>/<φ|φ>` by direct MPS contraction.
    pub fn energy(&self, row: &MPSRow<T>) -> T {
        let l = row.left_envs();
        let r = row.right_envs();
        let n2 = l[row.len()].data()[0].re;
        let mut acc = crate::scalar::from_real(self.constant * n2);
        for (c, o) in self.onsite.iter().enumerate() {
            let rho = row.reduced_density_with(&[c], &l, &r).expect("site");
            acc += o.matmul(&rho).expect("shape").trace();
        }
        for (c, o) in self.bonds.iter().enumerate() {
            let rho = row.reduced_density_with(&[c, c + 1], &l, &r).expect("sites");
            acc += o.matmul(&rho).expect("shape").trace();
        }
        acc.re / n2
    }
}

/// Builds the row Hamiltonian of effective row `r` for nearest-neighbor factors.
pub fn row_hamiltonian<T: Real>(s: &SgsState<T>, caches: &[RowCache<T>], factors: &[Factor<T>], r: usize) -> Result<RowHamiltonian<T>> {
    let d = s.params.local_dim();
    let cols = s.params.cols();
    let others: T = caches.iter().enumerate().filter(|(k, _)| *k != r).map(|(_, c)| c.norm2).fold(T::one(), |a, b| a * b);
    let parts: Vec<(T, Option<(Vec<usize>, DenseTensor<T>)>)> = factors
        .par_iter()
        .map(|f| -> Result<(T, Option<(Vec<usize>, DenseTensor<T>)>)> {
            let fs = std::slice::from_ref(f);
            let plan = plan_for(s, fs)?;
            let idx = plan.steps.iter().position(|st| matches!(st, Step::BringIn { row, .. } if *row == r));
            match idx {
                None => {
                    let (v, _) = forward(s, caches, &plan, fs, false);
                    Ok((v.re / (caches[r].norm2 * others), None))
                }
                Some(i) => {
                    let norm_factor = plan.norm_rows.iter().map(|&q| caches[q].norm2).fold(T::one(), |a, b| a * b);
                    let (_, hist) = forward(s, caches, &plan, fs, true);
                    let after = backward(s, caches, &plan, fs, &hist, norm_factor);
                    let cols_r = match &plan.steps[i] {
                        Step::BringIn { cols, .. } => cols.clone(),
                        _ => unreachable!(),
                    };
                    let f_after = after[i].permuted_like(&after_slots(&hist[i].slots, r, &cols_r));
                    let y = f_after.bring_in_environment(&hist[i], cols_r.len());
                    Ok((T::zero(), Some((cols_r, y.scale_real(T::one() / others)))))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rh = RowHamiltonian::zeros(cols, d);
    for (c0, part) in parts {
        rh.constant += c0;
        if let Some((cs, y)) = part {
            // Tr[Y ρ] = <φ|Y|φ>
            let op = y;
            match cs.as_slice() {
                [c] => rh.onsite[*c] = rh.onsite[*c].add(&op)?,
                [a, b] if *b == a + 1 => rh.bonds[*a] = rh.bonds[*a].add(&op)?,
                _ => return Err(Error::Unsupported("row Hamiltonian needs nearest-neighbor terms".into())),
            }
        }
    }
    for o in rh.onsite.iter_mut().chain(rh.bonds.iter_mut()) {
        *o = o.hermitian_part();
    }
    Ok(rh)
}

/// The energy as a function of a single column unitary `U[b,c]`.
pub struct UnitaryLandscape<T: Real> {
    pub b: usize,
    pub c: usize,
    /// Energy at the current unitary.
    pub energy: T,
    slots: Vec<(usize, usize)>,
    /// `(σ before U, F after U)` for every term that sees `U`.
    pairs: Vec<(Window<T>, Window<T>)>,
    current: DenseTensor<T>,
    norm2: T,
    base: C<T>,
}

impl<T: Real> UnitaryLandscape<T> {
    /// Energy with `U[b,c]` replaced by `u`.
    pub fn energy_at(&self, u: &DenseTensor<T>) -> T {
        let mut acc = self.base;
        for (sigma, f) in &self.pairs {
            let z = sigma.apply_unitary(&sigma.positions(&self.slots), u);
            acc += f.pair(&z);
        }
        acc.re / self.norm2
    }

    /// `Γ` such that `E(exp(iδK)U) = E(U) + 2δ Re[i tr(KΓ)] + O(δ²)`.
    pub fn gamma(&self) -> DenseTensor<T> {
        let dim = self.current.rows();
        let mut g = DenseTensor::<T>::zeros(&[dim, dim]);
        for (sigma, f) in &self.pairs {
            let z = sigma.apply_unitary(&sigma.positions(&self.slots), &self.current);
            let (a, b) = Window::gradient_pair(&z, f, &self.slots);
            // (Γ + Γ̃†)/2 makes the first-order formula exact for non-Hermitian pieces
            let part = a.add(&b.dagger()).expect("shape").scale_real(crate::scalar::real(0.5));
            g.axpy(cone(), &part).expect("shape");
        }
        g.scale_real(T::one() / self.norm2)
    }

    /// Number of terms that depend on this unitary.
    pub fn terms(&self) -> usize {
        self.pairs.len()
    }
}

pub fn unitary_landscape<T: Real>(
    s: &SgsState<T>,
    caches: &[RowCache<T>],
    factors: &[Factor<T>],
    b: usize,
    c: usize,
) -> Result<UnitaryLandscape<T>> {
    unitary_landscape_with(s, caches, factors, b, c, None)
}

/// As [`unitary_landscape`]; with `known_energy`, terms that do not see the
/// unitary are not re-evaluated.
pub fn unitary_landscape_with<T: Real>(
    s: &SgsState<T>,
    caches: &[RowCache<T>],
    factors: &[Factor<T>],
    b: usize,
    c: usize,
    known_energy: Option<T>,
) -> Result<UnitaryLandscape<T>> {
    let p = &s.params;
    if c >= p.cols() || b < p.m || b >= p.rows() {
        return Err(val_err!("no unitary U[{b},{c}]"));
    }
    let norm2: T = caches.iter().map(|x| x.norm2).fold(T::one(), |a, x| a * x);
    let results: Vec<(C<T>, Option<(Window<T>, Window<T>)>)> = factors
        .par_iter()
        .map(|f| -> Result<_> {
            let fs = std::slice::from_ref(f);
            let plan = plan_for(s, fs)?;
            let idx = plan.steps.iter().position(|st| matches!(st, Step::Unitary { b: bb, col } if *bb == b && *col == c));
            match idx {
                None if known_energy.is_some() => Ok((czero(), None)),
                None => Ok((forward(s, caches, &plan, fs, false).0, None)),
                Some(i) => {
                    let (_, hist) = forward(s, caches, &plan, fs, true);
                    let norm_factor = plan.norm_rows.iter().map(|&q| caches[q].norm2).fold(T::one(), |a, x| a * x);
                    let after = backward(s, caches, &plan, fs, &hist, norm_factor);
                    let f_after = after[i].permuted_like(&hist[i].slots);
                    Ok((czero(), Some((hist[i].clone(), f_after))))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut base = czero::<T>();
    let mut pairs = Vec::new();
    for (v, pr) in results {
        base += v;
        if let Some(pr) = pr {
            pairs.push(pr);
        }
    }
    let slots: Vec<(usize, usize)> = (b - p.m..=b).map(|r| (r, c)).collect();
    let mut land = UnitaryLandscape { b, c, energy: T::zero(), slots, pairs, current: s.unitary(b, c).clone(), norm2, base };
    if let Some(e) = known_energy {
        let seen = land.energy_at(&land.current) * norm2;
        land.base = crate::scalar::from_real(e * norm2 - seen);
    }
    land.energy = land.energy_at(&land.current.clone());
    Ok(land)
}

/// Which tensor is removed from the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hole {
    /// Row-MPS tensor at effective `(row, col)`.
    A(usize, usize),
    /// Column unitary `U[b, col]`.
    U(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvironmentKind {
    QuadraticForm,
    Gradient,
}

#[derive(Debug, Clone)]
pub struct Environment<T: Real = f64> {
    pub hole: Hole,
    pub kind: EnvironmentKind,
    /// Quadratic form over the flattened site tensor `(l, phys, r)`, or `Γ`.
    pub tensor: DenseTensor<T>,
    /// For A holes: the row gauged to the hole, whose center tensor `x`
    /// satisfies `E = x† H x / x† x`.
    pub gauged_row: Option<MPSRow<T>>,
}

/// The contraction of the energy network with one tensor removed.
pub fn environment<T: Real>(s: &SgsState<T>, h: &Hamiltonian<T>, hole: Hole) -> Result<Environment<T>> {
    let factors = hamiltonian_factors(s, h)?;
    let caches = row_caches(s);
    match hole {
        Hole::A(r, c) => {
            if r >= s.params.rows() || c >= s.params.cols() {
                return Err(val_err!("no tensor A[{r},{c}]"));
            }
            let rh = row_hamiltonian(s, &caches, &factors, r)?;
            let row = crate::mps::canonicalize(&s.rows[r], c)?;
            let mpo = crate::rowdmrg::Mpo::from_row_hamiltonian(&rh)?;
            let envs = crate::rowdmrg::Environments::build(&row, &mpo, c);
            let tensor = envs.site_matrix(&row, &mpo, c)?;
            Ok(Environment { hole, kind: EnvironmentKind::QuadraticForm, tensor, gauged_row: Some(row) })
        }
        Hole::U(b, c) => {
            let land = unitary_landscape(s, &caches, &factors, b, c)?;
            Ok(Environment { hole, kind: EnvironmentKind::Gradient, tensor: land.gamma(), gauged_row: None })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, pauli_x, pauli_y, pauli_z, LatticeSpec, Model};
    use crate::sgs::{cluster_state, SGSParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type S = SgsState<f64>;

    fn random_state(h: usize, v: usize, seed: u64) -> S {
        S::random(SGSParams::new(LatticeSpec::qubits(h, v), 1, 2, 1).unwrap(), seed).unwrap()
    }

    fn brute(s: &S, ops: &BTreeMap<(usize, usize), DenseTensor<f64>>) -> C<f64> {
        let psi = s.to_statevector().unwrap();
        let spec = s.params.spec;
        let sites: Vec<usize> = ops.keys().map(|&(r, c)| spec.index(r, c)).collect();
        let mut op = DenseTensor::identity(1);
        for o in ops.values() {
            op = op.kron(o);
        }
        if sites.is_empty() {
            return psi.inner(&psi);
        }
        statevec::expectation(psi.data(), spec.sites(), spec.local_dim, &sites, &op).unwrap()
    }

    #[test]
    fn norm_and_empty_expectation() {
        let s = random_state(3, 3, 1);
        assert!((norm(&s) - 1.0).abs() < 1e-10);
        assert!((expect_local(&s, &BTreeMap::new()).unwrap() - cone()).norm() < 1e-10);
        let mut scaled = s.clone();
        scaled.rows[1] = scaled.rows[1].scaled(crate::scalar::cplx(2.0, 0.0));
        let scaled = S::new_unchecked(scaled.params, scaled.rows, scaled.unitaries).unwrap();
        assert!((norm(&scaled) - 2.0).abs() < 1e-10);
        assert!((expect_local(&scaled, &BTreeMap::new()).unwrap().re - 4.0).abs() < 1e-9);
    }

    #[test]
    fn two_site_expectations_match_statevector() {
        for seed in 0..4 {
            let s = random_state(3, 4, seed);
            let cases = [
                vec![((1, 1), pauli_z()), ((2, 3), pauli_x())],
                vec![((0, 0), pauli_y()), ((2, 0), pauli_z())],
                vec![((2, 2), pauli_x())],
                vec![((0, 1), pauli_z()), ((0, 2), pauli_z())],
                vec![((1, 3), pauli_x()), ((2, 3), pauli_y())],
            ];
            for case in cases {
                let ops: BTreeMap<_, _> = case.into_iter().collect();
                let got = expect_local(&s, &ops).unwrap();
                let want = brute(&s, &ops);
                assert!((got - want).norm() < 1e-9, "{:?}", ops.keys().collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn identity_observables_give_one() {
        let s = random_state(3, 3, 2);
        let ops: BTreeMap<_, _> = [((0, 0), DenseTensor::identity(2)), ((2, 2), DenseTensor::identity(2))].into_iter().collect();
        assert!((expect_local(&s, &ops).unwrap() - cone()).norm() < 1e-12);
    }

    #[test]
    fn site_limit() {
        let s = random_state(3, 3, 2);
        let ops: BTreeMap<_, _> = [((0, 0), pauli_z()), ((1, 1), pauli_z()), ((2, 2), pauli_z())].into_iter().collect();
        assert!(matches!(expect_local(&s, &ops), Err(Error::Unsupported(_))));
        let got = expect_local_limited(&s, &ops, true).unwrap();
        assert!((got - brute(&s, &ops)).norm() < 1e-9);
    }

    #[test]
    fn energies_match_statevector() {
        let spec = LatticeSpec::qubits(3, 3);
        for model in [Model::Heisenberg, Model::FrustratedXx, Model::Random2Body] {
            let h = build_hamiltonian::<f64>(model, spec, Some(3)).unwrap();
            let s = random_state(3, 3, 5);
            let e = energy(&s, &h).unwrap();
            let want = h.energy_of(s.to_statevector().unwrap().data()).unwrap();
            assert!((e - want).abs() < 1e-9, "{model:?}");
        }
    }

    #[test]
    fn product_zero_state_heisenberg() {
        let p = SGSParams::new(LatticeSpec::qubits(2, 2), 1, 2, 1).unwrap();
        let s = S::zero_state(p).unwrap();
        let h = build_hamiltonian(Model::Heisenberg, p.spec, None).unwrap();
        assert!((energy(&s, &h).unwrap() - 4.0).abs() < 1e-12);
        let c: S = cluster_state(p.spec).unwrap();
        let want = h.energy_of(c.to_statevector().unwrap().data()).unwrap();
        assert!((energy(&c, &h).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn spec_mismatch_is_validation_error() {
        let s = random_state(2, 2, 1);
        let h = build_hamiltonian::<f64>(Model::Heisenberg, LatticeSpec::qubits(2, 3), None).unwrap();
        assert!(matches!(energy(&s, &h), Err(Error::Validation(_))));
    }

    #[test]
    fn bsgs_energy_matches_statevector() {
        let p = SGSParams::new(LatticeSpec::qubits(4, 3), 1, 4, 2).unwrap();
        let s = S::random(p, 3).unwrap();
        let h = build_hamiltonian::<f64>(Model::Random2Body, p.spec, Some(1)).unwrap();
        let want = h.energy_of(s.to_statevector().unwrap().data()).unwrap();
        assert!((energy(&s, &h).unwrap() - want).abs() < 1e-9);
        let ops: BTreeMap<_, _> = [((1, 0), pauli_z()), ((2, 2), pauli_x())].into_iter().collect();
        assert!((expect_local(&s, &ops).unwrap() - brute(&s, &ops)).norm() < 1e-9);
    }

    #[test]
    fn m2_energy_matches_statevector() {
        let p = SGSParams::new(LatticeSpec::qubits(4, 3), 2, 4, 1).unwrap();
        let s = S::random(p, 4).unwrap();
        let h = build_hamiltonian::<f64>(Model::Random2Body, p.spec, Some(2)).unwrap();
        let want = h.energy_of(s.to_statevector().unwrap().data()).unwrap();
        assert!((energy(&s, &h).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn bulk_plan_scaling() {
        let s = random_state(6, 6, 1);
        let ops: BTreeMap<_, _> = [((3, 2), pauli_z()), ((3, 3), pauli_z())].into_iter().collect();
        let plan = plan_local(&s, &ops).unwrap();
        assert_eq!(plan.columns, vec![2, 3]);
        assert!(plan.within_bulk_scaling());
        assert_eq!(plan.norm_rows, vec![0, 1]);
        assert_eq!(plan.peak_sites, 4);
    }

    #[test]
    fn cancellation_of_uninvolved_unitaries() {
        let s = random_state(3, 4, 7);
        let ops: BTreeMap<_, _> = [((1, 1), pauli_z()), ((1, 2), pauli_x())].into_iter().collect();
        let base = expect_local(&s, &ops).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut t = s.clone();
        t.set_unitary(1, 0, crate::sgs::random_unitary(4, &mut rng).unwrap());
        t.set_unitary(2, 3, crate::sgs::random_unitary(4, &mut rng).unwrap());
        // U[1,1] acts on rows 0..=1 and is not above row 1; U[b,c] with b < 1 does not exist here
        assert!((expect_local(&t, &ops).unwrap() - base).norm() < 1e-10);
        let ops: BTreeMap<_, _> = [((2, 1), pauli_z())].into_iter().collect();
        let base = expect_local(&s, &ops).unwrap();
        let mut t = s.clone();
        t.set_unitary(1, 1, crate::sgs::random_unitary(4, &mut rng).unwrap());
        assert!((expect_local(&t, &ops).unwrap() - base).norm() < 1e-10);
    }

    #[test]
    fn row_hamiltonian_reproduces_energy() {
        let spec = LatticeSpec::qubits(3, 3);
        let h = build_hamiltonian::<f64>(Model::Random2Body, spec, Some(8)).unwrap();
        let s = random_state(3, 3, 9);
        let factors = hamiltonian_factors(&s, &h).unwrap();
        let caches = row_caches(&s);
        let e = energy_of_factors(&s, &caches, &factors).unwrap();
        for r in 0..3 {
            let rh = row_hamiltonian(&s, &caches, &factors, r).unwrap();
            assert!((rh.energy(&s.rows[r]) - e).abs() < 1e-9, "row {r}");
            // and for a different row state
            let other = crate::mps::random_mps(3, 2, 2, 40 + r as u64).unwrap();
            let mut t = s.clone();
            t.rows[r] = other.clone();
            assert!((rh.energy(&other) - energy(&t, &h).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn unitary_landscape_energy_and_gradient() {
        let spec = LatticeSpec::qubits(3, 3);
        let h = build_hamiltonian::<f64>(Model::Heisenberg, spec, None).unwrap();
        let s = random_state(3, 3, 12);
        let factors = hamiltonian_factors(&s, &h).unwrap();
        let caches = row_caches(&s);
        let e0 = energy_of_factors(&s, &caches, &factors).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (b, c) in [(1, 0), (2, 1), (1, 2)] {
            let land = unitary_landscape(&s, &caches, &factors, b, c).unwrap();
            assert!((land.energy - e0).abs() < 1e-10);
            let fast = unitary_landscape_with(&s, &caches, &factors, b, c, Some(e0)).unwrap();
            assert!(fast.terms() == land.terms() && fast.terms() < factors.len());
            let u2 = crate::sgs::random_unitary::<f64, _>(4, &mut rng).unwrap();
            let mut t = s.clone();
            t.set_unitary(b, c, u2.clone());
            assert!((land.energy_at(&u2) - energy(&t, &h).unwrap()).abs() < 1e-9);
            let gamma = land.gamma();
            let k = crate::sgs::random_hermitian::<f64, _>(4, &mut rng);
            let slope = 2.0 * (cplx_i() * k.matmul(&gamma).unwrap().trace()).re;
            let mut errs = vec![];
            for delta in [1e-3, 1e-4] {
                let u = crate::linalg::unitary_exp(&k, delta).unwrap().matmul(s.unitary(b, c)).unwrap();
                let fd = land.energy_at(&u) - land.energy;
                errs.push((fd - delta * slope).abs());
            }
            assert!(errs[1] < errs[0] / 50.0 || errs[0] < 1e-12, "{errs:?}");
        }
    }

    fn cplx_i() -> C<f64> {
        crate::scalar::cplx(0.0, 1.0)
    }

    #[test]
    fn a_environment_reproduces_energy() {
        let spec = LatticeSpec::qubits(3, 3);
        let h = build_hamiltonian::<f64>(Model::Heisenberg, spec, None).unwrap();
        let s = random_state(3, 3, 13);
        let e = energy(&s, &h).unwrap();
        let env = environment(&s, &h, Hole::A(1, 1)).unwrap();
        let row = env.gauged_row.unwrap();
        let x = &row.tensors[1];
        let hx = env.tensor.matmul(&x.reshape(&[x.len(), 1]).unwrap()).unwrap();
        let val = x.inner(&hx.reshape(&[x.len()]).unwrap()).re / x.norm().powi(2);
        assert!((val - e).abs() < 1e-9);
        assert!(env.tensor.hermiticity_defect() < 1e-10);
    }
}
