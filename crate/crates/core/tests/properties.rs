use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgs_core::contraction::{energy, expect_local, plan_local};
use sgs_core::correlations::{fit_exponential, product_deviation, row_densities, transfer_spectrum, TiDescription};
use sgs_core::lattice::{build_hamiltonian, exact_ground, pauli_x, pauli_z, LatticeSpec, Model, DEFAULT_EXACT_CAP};
use sgs_core::linalg::{svd, unitary_exp};
use sgs_core::mps::{canonicalize, random_mps, transfer_matrix};
use sgs_core::optimizer::{optimize, OptimizerOptions};
use sgs_core::scalar::cplx;
use sgs_core::sgs::{prepare_sequence, random_hermitian, random_unitary, to_peps, SGSParams, SgsState, STATEVECTOR_CAP};
use sgs_core::{contract, Tensor};

const MODELS: [Model; 3] = [Model::Heisenberg, Model::FrustratedXx, Model::Random2Body];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn lattice() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3, 1usize..=4).prop_filter("at least two sites", |(h, v)| h * v >= 2)
}

fn sgs_params() -> impl Strategy<Value = SGSParams> {
    (2usize..=3, 2usize..=4, prop_oneof![Just(2usize), Just(4)]).prop_map(|(h, v, bond)| SGSParams::new(LatticeSpec::qubits(h, v), 1, bond, 1).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn contraction_is_bilinear(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let mut r = rng(seed);
        let a = Tensor::random_gaussian(&[3, 4, 2], &mut r);
        let a2 = Tensor::random_gaussian(&[3, 4, 2], &mut r);
        let b = Tensor::random_gaussian(&[4, 5, 3], &mut r);
        let (al, be) = (cplx(re, im), cplx(im, -re));
        let lhs = contract(&a.scale(al).add(&a2.scale(be)).unwrap(), &[0, 1], &b, &[2, 0]).unwrap();
        let rhs = contract(&a, &[0, 1], &b, &[2, 0]).unwrap().scale(al).add(&contract(&a2, &[0, 1], &b, &[2, 0]).unwrap().scale(be)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn svd_preserves_frobenius_norm(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..7) {
        let t = Tensor::random_gaussian(&[rows, 2, cols], &mut rng(seed));
        let s = svd(&t, &[0, 1], &[2], None).unwrap();
        let sum: f64 = s.singular_values.iter().map(|x| x * x).sum();
        prop_assert!((sum - t.norm().powi(2)).abs() < 1e-10 * (1.0 + sum));
    }

    #[test]
    fn unitary_exp_inverts(seed in any::<u64>(), dim in 1usize..9, delta in -3.0f64..3.0) {
        let k = random_hermitian::<f64, _>(dim, &mut rng(seed));
        let p = unitary_exp(&k, delta).unwrap().matmul(&unitary_exp(&k, -delta).unwrap()).unwrap();
        prop_assert!(p.max_abs_diff(&Tensor::identity(dim)) < 1e-12);
    }

    #[test]
    fn hamiltonians_are_hermitian((h, v) in lattice(), seed in any::<u64>()) {
        for model in MODELS {
            let ham = build_hamiltonian::<f64>(model, LatticeSpec::qubits(h, v), Some(seed)).unwrap();
            let m = ham.full_matrix().unwrap();
            prop_assert!(m.max_abs_diff(&m.dagger()) < 1e-12);
        }
    }

    #[test]
    fn ground_energy_ignores_term_order((h, v) in lattice(), seed in any::<u64>()) {
        for model in MODELS {
            let ham = build_hamiltonian::<f64>(model, LatticeSpec::qubits(h, v), Some(seed)).unwrap();
            let mut shuffled = ham.clone();
            shuffled.terms.shuffle(&mut rng(seed ^ 1));
            let a = exact_ground(&ham, DEFAULT_EXACT_CAP).unwrap().energy;
            let b = exact_ground(&shuffled, DEFAULT_EXACT_CAP).unwrap().energy;
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_chain_is_squared_norm(seed in any::<u64>(), len in 1usize..7, bond in 1usize..5) {
        let m = random_mps::<f64>(len, 2, bond, seed).unwrap().scaled(cplx(1.3, 0.4));
        let ops: BTreeMap<usize, Tensor> = (0..len).map(|i| (i, Tensor::identity(2))).collect();
        let e = m.expectation_chain(&ops).unwrap();
        prop_assert!((e.re - m.norm_sqr()).abs() < 1e-10 * m.norm_sqr() && e.im.abs() < 1e-10);
    }

    #[test]
    fn left_canonical_transfer_spectrum(seed in any::<u64>(), bond in 1usize..5) {
        let u = random_unitary::<f64, _>(2 * bond, &mut rng(seed)).unwrap();
        // A[l, i, r] = U[(i, r), l]: an isometry from the left bond
        let a = Tensor::from_fn(&[bond, 2, bond], |ix| u.at(ix[1] * bond + ix[2], ix[0]));
        let tm = transfer_matrix(&a, &Tensor::identity(2)).unwrap();
        let vals = sgs_core::linalg::eigvals_general(&tm.matrix).unwrap();
        let moduli: Vec<f64> = vals.iter().map(|z| z.norm()).collect();
        let lead = vals.iter().copied().max_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap()).unwrap();
        prop_assert!((lead - cplx(1.0, 0.0)).norm() < 1e-10, "{lead}");
        prop_assert!(moduli.iter().all(|&x| x <= 1.0 + 1e-10));
    }

    #[test]
    fn two_site_rdm_traces_to_one_site(seed in any::<u64>(), len in 2usize..6, bond in 1usize..4, c1 in 0usize..6, c2 in 0usize..6) {
        let (c1, c2) = ((c1 % len).min(c2 % len), (c1 % len).max(c2 % len));
        prop_assume!(c1 != c2);
        let m = random_mps::<f64>(len, 2, bond, seed).unwrap();
        let r12 = m.reduced_density(&[c1, c2]).unwrap().reshape(&[2, 2, 2, 2]).unwrap();
        let r1 = m.reduced_density(&[c1]).unwrap();
        let r2 = m.reduced_density(&[c2]).unwrap();
        let t1 = Tensor::from_fn(&[2, 2], |ix| (0..2).map(|k| r12.get(&[ix[0], k, ix[1], k])).sum());
        let t2 = Tensor::from_fn(&[2, 2], |ix| (0..2).map(|k| r12.get(&[k, ix[0], k, ix[1]])).sum());
        prop_assert!(t1.max_abs_diff(&r1) < 1e-10 && t2.max_abs_diff(&r2) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn contraction_norm_is_one(p in sgs_params(), seed in any::<u64>()) {
        let s = SgsState::<f64>::random(p, seed).unwrap();
        prop_assert!((sgs_core::contraction::norm(&s) - 1.0).abs() < 1e-10);
        let e = expect_local(&s, &BTreeMap::new()).unwrap();
        prop_assert!((e.re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn peps_matches_statevector(p in sgs_params(), seed in any::<u64>()) {
        let s = SgsState::<f64>::random(p, seed).unwrap();
        let peps = to_peps(&s).unwrap();
        prop_assert!(peps.contract_all(STATEVECTOR_CAP).unwrap().max_abs_diff(&s.to_statevector().unwrap()) < 1e-9);
    }

    #[test]
    fn peps_bulk_tensors_have_rank_at_most_d(h in 4usize..=5, v in 2usize..=3, bond in prop_oneof![Just(2usize), Just(4)], seed in any::<u64>()) {
        let p = SGSParams::new(LatticeSpec::qubits(h, v), 1, bond, 1).unwrap();
        let s = SgsState::<f64>::random(p, seed).unwrap();
        let peps = to_peps(&s).unwrap();
        let bulk: Vec<_> = peps.tensors.iter().take(p.rows() - 1).skip(p.m + 1).flatten().collect();
        prop_assert_eq!(bulk.len(), (h - 3) * v);
        for t in bulk {
            let sv = svd(t, &[0, 2], &[1, 3, 4], None).unwrap().singular_values;
            prop_assert!(sv.iter().skip(2).all(|&x| x < 1e-10 * sv[0].max(1.0)), "{sv:?}");
        }
    }

    #[test]
    fn gate_count_is_exact(h in 2usize..=4, v in 2usize..=5, seed in any::<u64>()) {
        let p = SGSParams::new(LatticeSpec::qubits(h, v), 1, 2, 1).unwrap();
        let s = SgsState::<f64>::random(p, seed).unwrap();
        prop_assert_eq!(prepare_sequence(&s).unwrap().len(), h * (v - 1) + v * (h - 1));
    }

    #[test]
    fn uninvolved_unitaries_cancel(p in sgs_params(), seed in any::<u64>(), sites in (0usize..12, 0usize..12)) {
        let s = SgsState::<f64>::random(p, seed).unwrap();
        let all: Vec<(usize, usize)> = (0..p.rows()).flat_map(|r| (0..p.cols()).map(move |c| (r, c))).collect();
        let (a, b) = (all[sites.0 % all.len()], all[sites.1 % all.len()]);
        prop_assume!(a != b);
        let ops = BTreeMap::from([(a, pauli_z::<f64>()), (b, pauli_x())]);
        let base = expect_local(&s, &ops).unwrap();
        let mut r = rng(seed ^ 7);
        for c in 0..p.cols() {
            let top = ops.keys().filter(|k| k.1 == c).map(|k| k.0).min();
            let mut t = s.clone();
            let mut changed = false;
            for bb in p.unitary_rows() {
                if top.is_none_or(|row| bb < row) {
                    t.set_unitary(bb, c, random_unitary(p.unitary_dim(), &mut r).unwrap());
                    changed = true;
                }
            }
            if changed {
                prop_assert!((expect_local(&t, &ops).unwrap() - base).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn gauge_moves_leave_energy_invariant(p in sgs_params(), seed in any::<u64>(), row in 0usize..3, site in 0usize..4) {
        let s = SgsState::<f64>::random(p, seed).unwrap();
        let h = build_hamiltonian::<f64>(Model::Heisenberg, p.spec, None).unwrap();
        let mut t = s.clone();
        let r = row % p.rows();
        t.rows[r] = canonicalize(&s.rows[r], site % p.cols()).unwrap();
        prop_assert!((energy(&s, &h).unwrap() - energy(&t, &h).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn energy_ignores_term_order(p in sgs_params(), seed in any::<u64>()) {
        let s = SgsState::<f64>::random(p, seed).unwrap();
        let h = build_hamiltonian::<f64>(Model::Random2Body, p.spec, Some(seed)).unwrap();
        let mut shuffled = h.clone();
        shuffled.terms.shuffle(&mut rng(seed ^ 3));
        prop_assert!((energy(&s, &h).unwrap() - energy(&s, &shuffled).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn ladder_peak_within_bulk_scaling(p in sgs_params(), sites in (0usize..12, 0usize..12)) {
        let all: Vec<(usize, usize)> = (0..p.rows()).flat_map(|r| (0..p.cols()).map(move |c| (r, c))).collect();
        let (a, b) = (all[sites.0 % all.len()], all[sites.1 % all.len()]);
        prop_assume!(a != b);
        let s = SgsState::<f64>::random(p, 0).unwrap();
        let plan = plan_local(&s, &BTreeMap::from([(a, pauli_z::<f64>()), (b, pauli_z())])).unwrap();
        prop_assert!(plan.within_bulk_scaling(), "{} > c·{}", plan.peak_values, plan.bulk_cost);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn optimizer_is_monotone_unitary_and_deterministic(seed in any::<u64>(), model in 0usize..3) {
        let p = SGSParams::new(LatticeSpec::qubits(3, 3), 1, 2, 1).unwrap();
        let h = build_hamiltonian::<f64>(MODELS[model], p.spec, Some(seed)).unwrap();
        let s0 = SgsState::<f64>::random(p, seed).unwrap();
        let opts = OptimizerOptions { max_outer_iterations: 4, ..Default::default() };
        let (s, trace) = optimize(&s0, &h, &opts).unwrap();
        prop_assert!(trace.is_monotone(1e-12), "{}", trace.max_increase());
        prop_assert!(s.max_unitarity_defect() < 1e-10);
        let (s2, trace2) = optimize(&s0, &h, &opts).unwrap();
        prop_assert_eq!(trace, trace2);
        prop_assert_eq!(s.unitaries, s2.unitaries);
    }

    #[test]
    fn saved_state_reloads_with_same_energy(p in sgs_params(), seed in any::<u64>()) {
        let s = SgsState::<f64>::random(p, seed).unwrap();
        let h = build_hamiltonian::<f64>(Model::Heisenberg, p.spec, None).unwrap();
        let back = SgsState::<f64>::from_bytes(&s.to_bytes().unwrap()).unwrap();
        prop_assert!((energy(&s, &h).unwrap() - energy(&back, &h).unwrap()).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn single_exponential_fit_is_exact(xi in 0.3f64..20.0, amp in 1e-3f64..10.0, sign in prop::bool::ANY) {
        let deltas: Vec<usize> = (1..=6).collect();
        let values: Vec<f64> = deltas.iter().map(|&d| if sign { amp } else { -amp } * (-(d as f64) / xi).exp()).collect();
        let f = fit_exponential(&deltas, &values).unwrap();
        prop_assert!((f.xi - xi).abs() < 1e-10 * xi);
    }

    #[test]
    fn row_product_closeness_follows_transfer_ratio(seed in 0u64..200) {
        let ti = TiDescription::<f64>::random(2, 2, 1, seed).unwrap();
        let sp = transfer_spectrum(&ti.a, true).unwrap();
        prop_assume!(!sp.degenerate && sp.subleading_simple() && sp.ratio > 1e-3);
        let width = 24;
        let dev = |delta: usize| {
            let (v1, v2) = (width / 2 - delta / 2 - 1, width / 2 - delta / 2 - 1 + delta);
            product_deviation(&row_densities(&ti, width, v1, v2).unwrap().2, 2).unwrap()
        };
        // constant fitted on the first distances, checked on the later ones
        let c = (1..=3).map(|d| dev(d) / sp.epsilon(d)).fold(0.0f64, f64::max);
        for d in 4..=8 {
            prop_assert!(dev(d) <= 2.0 * c * sp.epsilon(d) + 1e-12, "Δ={d}: {} vs c·ε = {}", dev(d), c * sp.epsilon(d));
        }
    }
}

#[test]
fn heisenberg_pair_spectrum() {
    let h = build_hamiltonian::<f64>(Model::Heisenberg, LatticeSpec::qubits(1, 2), None).unwrap();
    let (mut vals, _) = sgs_core::linalg::herm_eig(&h.full_matrix().unwrap()).unwrap();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (v, want) in vals.iter().zip([-3.0, 1.0, 1.0, 1.0]) {
        assert!((v - want).abs() < 1e-12);
    }
}
