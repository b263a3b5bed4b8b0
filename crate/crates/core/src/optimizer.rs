//! Two-phase variational ground-state search: row sweeps over the `A`
//! tensors, then line-searched unitary rotations `U → exp(iδK) U`.

use std::io::Write;

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contraction::{hamiltonian_factors, row_caches, row_hamiltonian, unitary_landscape_with, Factor, RowCache};
use crate::error::{val_err, Error, Result};
use crate::lattice::Hamiltonian;
use crate::linalg;
use crate::rowdmrg::{self, Mpo};
use crate::scalar::{cplx, real, to_f64, Real};
use crate::sgs::{SGSParams, SgsState};
use crate::tensor::DenseTensor;

/// Frobenius norm of the unitary generator `K`.
pub const K_NORM: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    pub max_outer_iterations: usize,
    /// Stop when the relative energy change over one outer iteration is below this.
    pub tolerance: f64,
    pub delta0: f64,
    pub delta_min: f64,
    /// Single-site sweep pairs per row in each A-phase.
    pub row_sweeps: usize,
    /// Line-searched rotations per unitary in each U-phase.
    pub unitary_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Scale of the random Hermitian generator for the initial unitaries.
    pub init_perturbation: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            max_outer_iterations: 60,
            tolerance: 1e-8,
            delta0: 0.25,
            delta_min: 1e-6,
            row_sweeps: 1,
            unitary_iterations: 3,
            restarts: 1,
            seed: 0,
            init_perturbation: 0.1,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(val_err!("tolerance must be positive"));
        }
        if !(self.delta_min > 0.0 && self.delta0 > self.delta_min) {
            return Err(val_err!("need delta0 > delta_min > 0, got {} and {}", self.delta0, self.delta_min));
        }
        if self.max_outer_iterations == 0 || self.row_sweeps == 0 || self.restarts == 0 {
            return Err(val_err!("iteration caps and restart count must be at least 1"));
        }
        if !(self.init_perturbation >= 0.0) {
            return Err(val_err!("init_perturbation must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Init,
    ASweep,
    UPhase,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub restart: usize,
    pub iteration: usize,
    pub phase: Phase,
    /// Row for A-sweeps, `(b, c)` for unitaries.
    pub location: Option<(usize, usize)>,
    pub energy: f64,
    pub accepted: bool,
    /// Accepted `δ`, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// `‖Herm(iΓ)‖_F` for unitary steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub records: Vec<TraceRecord>,
}

impl EnergyTrace {
    fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    /// Energies of accepted steps, per restart, in order.
    pub fn accepted_energies(&self, restart: usize) -> Vec<f64> {
        self.records.iter().filter(|r| r.restart == restart && r.accepted).map(|r| r.energy).collect()
    }

    /// Largest increase between consecutive accepted energies of any restart.
    pub fn max_increase(&self) -> f64 {
        let restarts: std::collections::BTreeSet<usize> = self.records.iter().map(|r| r.restart).collect();
        restarts
            .into_iter()
            .flat_map(|k| {
                let e = self.accepted_energies(k);
                e.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.max_increase() <= tol
    }

    pub fn converged(&self) -> bool {
        self.records.iter().rev().find_map(|r| r.converged).unwrap_or(false)
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.records.last().map(|r| r.energy)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Self> {
        let records = text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(EnergyTrace { records })
    }
}

/// Mutable optimization state: the SGS, its row caches and blocked terms.
struct Run<'a, T: Real> {
    s: SgsState<T>,
    factors: &'a [Factor<T>],
    caches: Vec<RowCache<T>>,
    energy: T,
    trace: EnergyTrace,
    restart: usize,
    iteration: usize,
}

impl<'a, T: Real> Run<'a, T> {
    fn new(s: SgsState<T>, factors: &'a [Factor<T>], restart: usize) -> Result<Self> {
        let caches = row_caches(&s);
        let energy = crate::contraction::energy_of_factors(&s, &caches, factors)?;
        let mut run = Run { s, factors, caches, energy, trace: EnergyTrace::default(), restart, iteration: 0 };
        run.record(Phase::Init, None, true, None, None, None);
        Ok(run)
    }

    fn record(&mut self, phase: Phase, location: Option<(usize, usize)>, accepted: bool, delta: Option<f64>, gradient_norm: Option<f64>, converged: Option<bool>) {
        self.trace.push(TraceRecord {
            restart: self.restart,
            iteration: self.iteration,
            phase,
            location,
            energy: to_f64(self.energy),
            accepted,
            delta,
            gradient_norm,
            converged,
        });
    }

    fn resync(&mut self) -> Result<()> {
        self.caches = row_caches(&self.s);
        self.energy = crate::contraction::energy_of_factors(&self.s, &self.caches, self.factors)?;
        Ok(())
    }

    fn sweep_row(&mut self, r: usize, opts: &OptimizerOptions) -> Result<()> {
        let rh = row_hamiltonian(&self.s, &self.caches, self.factors, r)?;
        let before = rh.energy(&self.s.rows[r]).min(self.energy);
        let mpo = Mpo::from_row_hamiltonian(&rh)?;
        let mut row = self.s.rows[r].clone();
        for _ in 0..opts.row_sweeps {
            match rowdmrg::sweep(&row, &mpo) {
                Ok((_, next)) => row = next,
                Err(e) => {
                    debug!("row {r}: eigensolve failed ({e}); step skipped");
                    break;
                }
            }
        }
        let after = rh.energy(&row);
        if after <= before {
            self.s.rows[r] = row;
            self.caches[r] = RowCache::new(&self.s.rows[r]);
            self.energy = after;
            self.record(Phase::ASweep, Some((r, 0)), true, None, None, None);
        } else {
            self.record(Phase::ASweep, Some((r, 0)), false, None, None, None);
        }
        Ok(())
    }

    /// One line-searched rotation of `U[b,c]`; returns whether it was accepted.
    fn rotate_unitary(&mut self, b: usize, c: usize, opts: &OptimizerOptions) -> Result<bool> {
        let land = unitary_landscape_with(&self.s, &self.caches, self.factors, b, c, Some(self.energy))?;
        let gamma = land.gamma();
        let g = gamma.scale(cplx(0.0, 1.0)).hermitian_part();
        let gnorm = g.norm();
        debug!("U[{b},{c}]: |Herm(iΓ)| = {:e}", to_f64(gnorm));
        let stationary = gnorm <= T::epsilon() * real::<T>(16.0) * (T::one() + land.energy.abs());
        if land.terms() == 0 || stationary {
            self.record(Phase::UPhase, Some((b, c)), false, None, Some(to_f64(gnorm)), None);
            return Ok(false);
        }
        let k = g.scale_real(-real::<T>(K_NORM) / gnorm);
        let u0 = self.s.unitary(b, c).clone();
        let mut delta = opts.delta0;
        while delta >= opts.delta_min {
            let u = polar(&linalg::unitary_exp(&k, real::<T>(delta))?.matmul(&u0)?)?;
            let e = land.energy_at(&u);
            if e < self.energy {
                self.s.set_unitary(b, c, u);
                self.energy = e;
                self.record(Phase::UPhase, Some((b, c)), true, Some(delta), Some(to_f64(gnorm)), None);
                return Ok(true);
            }
            delta *= 0.5;
        }
        self.record(Phase::UPhase, Some((b, c)), false, None, Some(to_f64(gnorm)), None);
        Ok(false)
    }

    fn a_phase(&mut self, opts: &OptimizerOptions) -> Result<()> {
        for r in 0..self.s.params.rows() {
            self.sweep_row(r, opts)?;
        }
        Ok(())
    }

    fn u_phase(&mut self, opts: &OptimizerOptions) -> Result<()> {
        let p = self.s.params;
        for c in 0..p.cols() {
            for b in p.unitary_rows() {
                for _ in 0..opts.unitary_iterations {
                    if !self.rotate_unitary(b, c, opts)? {
                        break;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Nearest unitary (polar factor) of an almost unitary matrix.
fn polar<T: Real>(u: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let s = linalg::svd_matrix(u, None)?;
    if s.rank() != u.rows() {
        return Err(Error::Numerical("rank-deficient unitary".into()));
    }
    s.left_isometry.matmul(&s.right_isometry)
}

fn factors_for<T: Real>(s: &SgsState<T>, h: &Hamiltonian<T>) -> Result<Vec<Factor<T>>> {
    hamiltonian_factors(s, h)
}

/// Variational optimization from `s0`.
pub fn optimize<T: Real>(s0: &SgsState<T>, h: &Hamiltonian<T>, opts: &OptimizerOptions) -> Result<(SgsState<T>, EnergyTrace)> {
    opts.validate()?;
    let factors = factors_for(s0, h)?;
    let run = optimize_run(s0.clone(), &factors, opts, 0)?;
    Ok((run.s, run.trace))
}

fn optimize_run<'a, T: Real>(s0: SgsState<T>, factors: &'a [Factor<T>], opts: &OptimizerOptions, restart: usize) -> Result<Run<'a, T>> {
    let mut run = Run::new(s0, factors, restart)?;
    let mut converged = false;
    for it in 1..=opts.max_outer_iterations {
        run.iteration = it;
        let start = run.energy;
        run.a_phase(opts)?;
        run.u_phase(opts)?;
        let tracked = run.energy;
        run.resync()?;
        debug!("restart {restart} iteration {it}: tracked-to-exact drift {:e}", to_f64(run.energy - tracked));
        let change = (start - run.energy).abs() / run.energy.abs().max(T::min_positive_value());
        info!("restart {restart} iteration {it}: E = {:.12}", to_f64(run.energy));
        if change < real::<T>(opts.tolerance) {
            converged = true;
            break;
        }
    }
    run.record(Phase::Done, None, false, None, None, Some(converged));
    Ok(run)
}

/// Row sweeps over all rows. Returns the updated state and its energy.
pub fn sweep_rows<T: Real>(s: &SgsState<T>, h: &Hamiltonian<T>, opts: &OptimizerOptions) -> Result<(SgsState<T>, T)> {
    opts.validate()?;
    let factors = factors_for(s, h)?;
    let mut run = Run::new(s.clone(), &factors, 0)?;
    run.a_phase(opts)?;
    Ok((run.s, run.energy))
}

/// Line-searched rotations of `U[b,c]`, at most `opts.unitary_iterations`.
pub fn optimize_unitary<T: Real>(s: &SgsState<T>, h: &Hamiltonian<T>, location: (usize, usize), opts: &OptimizerOptions) -> Result<(SgsState<T>, T)> {
    opts.validate()?;
    let factors = factors_for(s, h)?;
    let (b, c) = location;
    let p = s.params;
    if c >= p.cols() || b < p.m || b >= p.rows() {
        return Err(val_err!("no unitary U[{b},{c}]"));
    }
    let mut run = Run::new(s.clone(), &factors, 0)?;
    for _ in 0..opts.unitary_iterations.max(1) {
        if !run.rotate_unitary(b, c, opts)? {
            break;
        }
    }
    Ok((run.s, run.energy))
}

/// Starting state of restart `k`: seeded random rows and near-identity unitaries.
pub fn initial_state<T: Real>(params: SGSParams, seed: u64, restart: usize, perturbation: f64) -> Result<SgsState<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(restart as u64 + 1)));
    let mut s = SgsState::random_with(params, &mut rng, Some(perturbation))?;
    s.seed = Some(seed);
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct RestartOutcome<T: Real = f64> {
    pub best: SgsState<T>,
    pub best_energy: T,
    pub best_restart: usize,
    pub energies: Vec<T>,
    pub trace: EnergyTrace,
}

/// `opts.restarts` independent runs from seeded starts; best of k.
pub fn optimize_restarts<T: Real>(params: SGSParams, h: &Hamiltonian<T>, opts: &OptimizerOptions) -> Result<RestartOutcome<T>> {
    opts.validate()?;
    let mut best: Option<(SgsState<T>, T, usize)> = None;
    let mut energies = Vec::new();
    let mut trace = EnergyTrace::default();
    for k in 0..opts.restarts {
        let s0 = initial_state::<T>(params, opts.seed, k, opts.init_perturbation)?;
        let factors = factors_for(&s0, h)?;
        let run = optimize_run(s0, &factors, opts, k)?;
        energies.push(run.energy);
        trace.records.extend(run.trace.records);
        if best.as_ref().is_none_or(|b| run.energy < b.1) {
            best = Some((run.s, run.energy, k));
        }
    }
    let (best, best_energy, best_restart) = best.expect("at least one restart");
    Ok(RestartOutcome { best, best_energy, best_restart, energies, trace })
}
