//! Open-boundary square lattices, the three benchmark Hamiltonians and the
//! exact-diagonalization reference solver.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, val_err, Error, Result};
use crate::linalg::{self, LanczosOptions, Which};
use crate::scalar::{czero, real, Real, C};
use crate::statevec;
use crate::tensor::DenseTensor;

/// Name of the generator used for seeded random instances.
pub const RNG_NAME: &str = "chacha8/rand_chacha-0.9";

/// Dense diagonalization is used up to this Hilbert-space dimension.
pub const DENSE_LIMIT: usize = 256;

/// Default cap on the Hilbert-space dimension for exact solves.
pub const DEFAULT_EXACT_CAP: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    pub local_dim: usize,
}

impl LatticeSpec {
    pub fn new(rows: usize, cols: usize, local_dim: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(val_err!("lattice must have at least one row and column"));
        }
        if local_dim < 2 {
            return Err(val_err!("local dimension must be at least 2"));
        }
        Ok(LatticeSpec { rows, cols, local_dim })
    }

    pub fn qubits(rows: usize, cols: usize) -> Self {
        LatticeSpec { rows, cols, local_dim: 2 }
    }

    pub fn sites(&self) -> usize {
        self.rows * self.cols
    }

    /// Row-major site index.
    pub fn index(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    /// Horizontal edges row by row, then vertical edges row by row.
    pub fn edges(&self) -> Vec<((usize, usize), (usize, usize))> {
        let mut e = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols.saturating_sub(1) {
                e.push(((r, c), (r, c + 1)));
            }
        }
        for r in 0..self.rows.saturating_sub(1) {
            for c in 0..self.cols {
                e.push(((r, c), (r + 1, c)));
            }
        }
        e
    }

    /// `d^(rows·cols)` if it fits in `usize`.
    pub fn hilbert_dim(&self) -> Option<usize> {
        self.local_dim.checked_pow(self.sites() as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Heisenberg,
    FrustratedXx,
    #[serde(rename = "random2body")]
    Random2Body,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Heisenberg => "heisenberg",
            Model::FrustratedXx => "frustrated_xx",
            Model::Random2Body => "random2body",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heisenberg" => Ok(Model::Heisenberg),
            "frustrated_xx" => Ok(Model::FrustratedXx),
            "random2body" => Ok(Model::Random2Body),
            other => Err(val_err!("unknown model '{other}'")),
        }
    }
}

/// Sign convention for the frustrated XX model: an edge carries `J = -1`
/// when its lower coordinate along the edge direction is `3 mod 4`, i.e. on
/// the 4th, 8th, ... edge of each row and column.
pub const FRUSTRATION_CONVENTION: &str = "J=-1 iff (c mod 4 == 3) for (r,c)-(r,c+1) and (r mod 4 == 3) for (r,c)-(r+1,c); 0-based";

pub fn frustrated_coupling(a: (usize, usize), b: (usize, usize)) -> f64 {
    let along = if a.0 == b.0 { a.1.min(b.1) } else { a.0.min(b.0) };
    if along % 4 == 3 {
        -1.0
    } else {
        1.0
    }
}

pub fn pauli_x<T: Real>() -> DenseTensor<T> {
    DenseTensor::from_rows(&[&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (0.0, 0.0)]])
}

pub fn pauli_y<T: Real>() -> DenseTensor<T> {
    DenseTensor::from_rows(&[&[(0.0, 0.0), (0.0, -1.0)], &[(0.0, 1.0), (0.0, 0.0)]])
}

pub fn pauli_z<T: Real>() -> DenseTensor<T> {
    DenseTensor::from_rows(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]])
}

/// `σx σx + σy σy + σz σz`
pub fn heisenberg_bond<T: Real>() -> DenseTensor<T> {
    let xx = pauli_x::<T>().kron(&pauli_x());
    let yy = pauli_y::<T>().kron(&pauli_y());
    let zz = pauli_z::<T>().kron(&pauli_z());
    xx.add(&yy).and_then(|s| s.add(&zz)).expect("same shapes")
}

/// `J (σx σx + σy σy)`
pub fn xx_bond<T: Real>(j: f64) -> DenseTensor<T> {
    let xx = pauli_x::<T>().kron(&pauli_x());
    let yy = pauli_y::<T>().kron(&pauli_y());
    xx.add(&yy).expect("same shapes").scale_real(real(j))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerm<T: Real = f64> {
    /// One or two lattice coordinates; the first is the most significant
    /// factor of `operator`.
    pub sites: Vec<(usize, usize)>,
    pub operator: DenseTensor<T>,
}

impl<T: Real> HamiltonianTerm<T> {
    pub fn is_two_site(&self) -> bool {
        self.sites.len() == 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian<T: Real = f64> {
    pub spec: LatticeSpec,
    pub terms: Vec<HamiltonianTerm<T>>,
    pub model: Option<Model>,
    pub seed: Option<u64>,
}

impl<T: Real> Hamiltonian<T> {
    /// Validates term shapes, Hermiticity and nearest-neighbor support.
    pub fn new(spec: LatticeSpec, terms: Vec<HamiltonianTerm<T>>) -> Result<Self> {
        let h = Hamiltonian { spec, terms, model: None, seed: None };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.spec.local_dim;
        for (k, t) in self.terms.iter().enumerate() {
            let n = t.sites.len();
            if n == 0 || n > 2 {
                return Err(val_err!("term {k} acts on {n} sites"));
            }
            for &(r, c) in &t.sites {
                if r >= self.spec.rows || c >= self.spec.cols {
                    return Err(val_err!("term {k} site ({r},{c}) outside lattice"));
                }
            }
            let dim = d.pow(n as u32);
            if !t.operator.is_square() || t.operator.rows() != dim {
                return Err(dim_err!("term {k} operator {:?} for {} sites of dim {}", t.operator.shape(), n, d));
            }
            let scale = t.operator.norm().max(T::one());
            if t.operator.hermiticity_defect() > crate::scalar::tol::<T>(1e-12) * scale {
                return Err(val_err!("term {k} is not Hermitian"));
            }
            if n == 2 {
                let (a, b) = (t.sites[0], t.sites[1]);
                let dist = a.0.abs_diff(b.0) + a.1.abs_diff(b.1);
                if dist != 1 {
                    return Err(val_err!("term {k} couples non-neighbors {:?} and {:?}", a, b));
                }
            }
        }
        Ok(())
    }

    /// Global Hamiltonian matrix built by embedding every term with identities.
    pub fn full_matrix(&self) -> Result<DenseTensor<T>> {
        let dim = self.spec.hilbert_dim().ok_or_else(|| Error::Resource("Hilbert dimension overflow".into()))?;
        let n = self.spec.sites();
        let d = self.spec.local_dim;
        let mut out = DenseTensor::<T>::zeros(&[dim, dim]);
        for t in &self.terms {
            let pos: Vec<usize> = t.sites.iter().map(|&(r, c)| self.spec.index(r, c)).collect();
            let emb = statevec::embed_operator(&t.operator, d, &pos, n)?;
            out.axpy(crate::scalar::cone(), &emb)?;
        }
        Ok(out)
    }

    /// `H |ψ>` on the full statevector.
    pub fn apply(&self, state: &[C<T>]) -> Result<Vec<C<T>>> {
        let n = self.spec.sites();
        let d = self.spec.local_dim;
        let mut out = vec![czero::<T>(); state.len()];
        for t in &self.terms {
            let pos: Vec<usize> = t.sites.iter().map(|&(r, c)| self.spec.index(r, c)).collect();
            statevec::accumulate_op(state, &mut out, n, d, &pos, &t.operator)?;
        }
        Ok(out)
    }

    /// `<ψ|H|ψ>/<ψ|ψ>` for a full statevector.
    pub fn energy_of(&self, state: &[C<T>]) -> Result<T> {
        let hs = self.apply(state)?;
        let num: C<T> = state.iter().zip(&hs).map(|(a, b)| a.conj() * b).sum();
        let den: T = state.iter().map(|z| z.norm_sqr()).sum();
        Ok(num.re / den)
    }

    /// Rewrites the Hamiltonian on the lattice of `n`-row vertical blocks.
    ///
    /// Effective site `(R, c)` holds physical rows `nR .. nR+n-1` of column
    /// `c`, top row most significant. Couplings inside a block become one-site
    /// terms, the rest become nearest-neighbor terms between blocks.
    pub fn blocked(&self, n: usize) -> Result<Hamiltonian<T>> {
        if n == 0 || self.spec.rows % n != 0 {
            return Err(val_err!("{} rows cannot be split into blocks of {}", self.spec.rows, n));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        let d = self.spec.local_dim;
        let eff = LatticeSpec { rows: self.spec.rows / n, cols: self.spec.cols, local_dim: d.pow(n as u32) };
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let mut blocks: Vec<(usize, usize)> = Vec::new();
            for &(r, c) in &t.sites {
                let b = (r / n, c);
                if !blocks.contains(&b) {
                    blocks.push(b);
                }
            }
            blocks.sort();
            let positions: Vec<usize> = t
                .sites
                .iter()
                .map(|&(r, c)| {
                    let bi = blocks.iter().position(|&b| b == (r / n, c)).expect("block listed");
                    bi * n + r % n
                })
                .collect();
            let op = statevec::embed_operator(&t.operator, d, &positions, blocks.len() * n)?;
            terms.push(HamiltonianTerm { sites: blocks, operator: op });
        }
        Ok(Hamiltonian { spec: eff, terms, model: self.model, seed: self.seed })
    }
}

/// Builds one of the benchmark Hamiltonians on an open-boundary lattice.
pub fn build_hamiltonian<T: Real>(model: Model, spec: LatticeSpec, seed: Option<u64>) -> Result<Hamiltonian<T>> {
    LatticeSpec::new(spec.rows, spec.cols, spec.local_dim)?;
    if spec.local_dim != 2 && model != Model::Random2Body {
        return Err(val_err!("model {} requires local dimension 2", model.name()));
    }
    let edges = spec.edges();
    let terms = match model {
        Model::Heisenberg => {
            let bond = heisenberg_bond::<T>();
            edges.into_iter().map(|(a, b)| HamiltonianTerm { sites: vec![a, b], operator: bond.clone() }).collect()
        }
        Model::FrustratedXx => edges
            .into_iter()
            .map(|(a, b)| HamiltonianTerm { sites: vec![a, b], operator: xx_bond(frustrated_coupling(a, b)) })
            .collect(),
        Model::Random2Body => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
            let dim = spec.local_dim * spec.local_dim;
            edges
                .into_iter()
                .map(|(a, b)| {
                    let m = DenseTensor::<T>::random_gaussian(&[dim, dim], &mut rng);
                    HamiltonianTerm { sites: vec![a, b], operator: m.hermitian_part() }
                })
                .collect()
        }
    };
    Ok(Hamiltonian { spec, terms, model: Some(model), seed: if model == Model::Random2Body { Some(seed.unwrap_or(0)) } else { None } })
}

#[derive(Debug, Clone)]
pub struct ExactGround<T: Real = f64> {
    pub energy: T,
    /// Unit-norm ground state over all sites, row-major site order.
    pub state: DenseTensor<T>,
    pub residual: T,
    pub method: &'static str,
}

/// Ground energy and state of the full Hamiltonian.
///
/// Dense diagonalization up to [`DENSE_LIMIT`], restarted Lanczos above.
pub fn exact_ground<T: Real>(h: &Hamiltonian<T>, cap: usize) -> Result<ExactGround<T>> {
    let dim = h
        .spec
        .hilbert_dim()
        .filter(|&d| d <= cap)
        .ok_or_else(|| Error::Resource(format!("Hilbert dimension exceeds exact-solver cap {cap}")))?;
    if dim <= DENSE_LIMIT {
        let m = h.full_matrix()?;
        let (e, v) = linalg::herm_eig_extreme(&m, Which::Smallest)?;
        let hv = h.apply(v.data())?;
        let res = hv.iter().zip(v.data()).map(|(a, b)| (a - b * e).norm_sqr()).sum::<T>().sqrt();
        return Ok(ExactGround { energy: e, state: v, residual: res, method: "dense" });
    }
    let opts = LanczosOptions { residual_tol: 1e-9, ..Default::default() };
    let apply = |x: &[C<T>]| h.apply(x).expect("validated Hamiltonian");
    let (e, v, res) = linalg::lanczos_ground(dim, apply, &opts)?;
    Ok(ExactGround { energy: e, state: DenseTensor::from_vec(&[dim], v)?, residual: res, method: "lanczos" })
}

/// A Hamiltonian of one-site terms `coef · op` on every site (used for
/// separable test cases).
pub fn uniform_field<T: Real>(spec: LatticeSpec, op: &DenseTensor<T>, coef: f64) -> Result<Hamiltonian<T>> {
    let op = op.scale(Complex::new(real(coef), T::zero()));
    let terms = (0..spec.rows)
        .flat_map(|r| (0..spec.cols).map(move |c| (r, c)))
        .map(|s| HamiltonianTerm { sites: vec![s], operator: op.clone() })
        .collect();
    Hamiltonian::new(spec, terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    type H = Hamiltonian<f64>;

    #[test]
    fn heisenberg_edge_spectrum() {
        let h: H = build_hamiltonian(Model::Heisenberg, LatticeSpec::qubits(2, 2), None).unwrap();
        assert_eq!(h.terms.len(), 4);
        for t in &h.terms {
            let (ev, _) = linalg::herm_eig(&t.operator).unwrap();
            let expect = [-3.0, 1.0, 1.0, 1.0];
            for (a, b) in ev.iter().zip(expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frustrated_single_edge_is_ferro_sign_free() {
        let h: H = build_hamiltonian(Model::FrustratedXx, LatticeSpec::qubits(1, 2), None).unwrap();
        assert_eq!(h.terms.len(), 1);
        assert!(h.terms[0].operator.max_abs_diff(&xx_bond(1.0)) < 1e-15);
    }

    #[test]
    fn frustration_pattern_every_fourth_edge() {
        let h: H = build_hamiltonian(Model::FrustratedXx, LatticeSpec::qubits(5, 5), None).unwrap();
        let neg: Vec<_> = h
            .terms
            .iter()
            .filter(|t| t.operator.max_abs_diff(&xx_bond(-1.0)) < 1e-15)
            .map(|t| (t.sites[0], t.sites[1]))
            .collect();
        // 5 rows with horizontal edge c=3, 5 columns with vertical edge r=3
        assert_eq!(neg.len(), 10);
        assert!(neg.contains(&((0, 3), (0, 4))));
        assert!(neg.contains(&((3, 2), (4, 2))));
    }

    #[test]
    fn random_model_is_deterministic() {
        let spec = LatticeSpec::qubits(3, 3);
        let a: H = build_hamiltonian(Model::Random2Body, spec, Some(5)).unwrap();
        let b: H = build_hamiltonian(Model::Random2Body, spec, Some(5)).unwrap();
        let c: H = build_hamiltonian(Model::Random2Body, spec, Some(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.terms.len(), 12);
    }

    #[test]
    fn unsupported_model_dimension() {
        let spec = LatticeSpec { rows: 2, cols: 2, local_dim: 3 };
        assert!(matches!(build_hamiltonian::<f64>(Model::Heisenberg, spec, None), Err(Error::Validation(_))));
    }

    #[test]
    fn exact_small_targets() {
        let h: H = build_hamiltonian(Model::Heisenberg, LatticeSpec::qubits(1, 2), None).unwrap();
        let g = exact_ground(&h, DEFAULT_EXACT_CAP).unwrap();
        assert!((g.energy + 3.0).abs() < 1e-12);
        let (ev, _) = linalg::herm_eig(&h.full_matrix().unwrap()).unwrap();
        for (a, b) in ev.iter().zip([-3.0, 1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let h: H = build_hamiltonian(Model::Heisenberg, LatticeSpec::qubits(2, 2), None).unwrap();
        let g = exact_ground(&h, DEFAULT_EXACT_CAP).unwrap();
        assert!((g.energy + 8.0).abs() < 1e-10);
        assert!(g.residual < 1e-8);
    }

    #[test]
    fn empty_lattice_energy_zero() {
        for m in [Model::Heisenberg, Model::FrustratedXx, Model::Random2Body] {
            let h: H = build_hamiltonian(m, LatticeSpec::qubits(1, 1), Some(1)).unwrap();
            assert!(h.terms.is_empty());
            assert_eq!(exact_ground(&h, DEFAULT_EXACT_CAP).unwrap().energy, 0.0);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let h: H = build_hamiltonian(Model::Heisenberg, LatticeSpec::qubits(3, 3), None).unwrap();
        assert!(matches!(exact_ground(&h, 256), Err(Error::Resource(_))));
    }

    #[test]
    fn lanczos_path_agrees_with_dense_on_3x3() {
        let h: H = build_hamiltonian(Model::Random2Body, LatticeSpec::qubits(3, 3), Some(2)).unwrap();
        let g = exact_ground(&h, DEFAULT_EXACT_CAP).unwrap();
        assert_eq!(g.method, "lanczos");
        let (ev, _) = linalg::herm_eig(&h.full_matrix().unwrap()).unwrap();
        assert!((g.energy - ev[0]).abs() < 1e-9);
        assert!(g.residual < 1e-8);
    }

    #[test]
    fn blocking_preserves_spectrum() {
        let h: H = build_hamiltonian(Model::Heisenberg, LatticeSpec::qubits(2, 2), None).unwrap();
        let b = h.blocked(2).unwrap();
        assert_eq!(b.spec, LatticeSpec { rows: 1, cols: 2, local_dim: 4 });
        let e1 = exact_ground(&h, DEFAULT_EXACT_CAP).unwrap().energy;
        let e2 = exact_ground(&b, DEFAULT_EXACT_CAP).unwrap().energy;
        assert!((e1 - e2).abs() < 1e-10);
        assert!(h.blocked(3).is_err());
    }
}
