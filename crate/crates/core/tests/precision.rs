use std::collections::BTreeMap;

use sgs_core::contraction::{energy, expect_local, norm};
use sgs_core::lattice::{build_hamiltonian, exact_ground, pauli_x, pauli_z, LatticeSpec, Model};
use sgs_core::optimizer::{optimize_restarts, OptimizerOptions};
use sgs_core::sgs::SGSParams;
use sgs_core::{statevec, Ham32, State, State32};

#[test]
fn single_precision_contraction_matches_statevector() {
    let spec = LatticeSpec::qubits(3, 3);
    let p = SGSParams::new(spec, 1, 2, 1).unwrap();
    let s = State32::random(p, 5).unwrap();
    assert!((norm(&s) - 1.0).abs() < 1e-5);
    let psi = s.to_statevector().unwrap();
    let (x, z) = (pauli_x::<f32>(), pauli_z::<f32>());
    for (a, b) in [((0, 0), (0, 1)), ((1, 1), (2, 1)), ((0, 2), (2, 0))] {
        let got = expect_local(&s, &BTreeMap::from([(a, x.clone()), (b, z.clone())])).unwrap();
        let want = statevec::expectation(psi.data(), 9, 2, &[spec.index(a.0, a.1), spec.index(b.0, b.1)], &x.kron(&z)).unwrap();
        assert!((got - want).norm() < 1e-5, "{a:?} {b:?}: {got} vs {want}");
    }
}

#[test]
fn single_precision_energies_track_double_precision() {
    let spec = LatticeSpec::qubits(2, 2);
    let h32: Ham32 = build_hamiltonian(Model::Heisenberg, spec, None).unwrap();
    let e0 = exact_ground(&h32, 1 << 10).unwrap().energy;
    assert!((e0 + 8.0).abs() < 1e-4, "{e0}");

    let p = SGSParams::new(spec, 1, 2, 1).unwrap();
    let opts = OptimizerOptions { max_outer_iterations: 20, ..Default::default() };
    let out = optimize_restarts(p, &h32, &opts).unwrap();
    let e = energy(&out.best, &h32).unwrap();
    assert!(e >= e0 - 1e-4 && e < -7.5, "{e}");

    let s64 = State::random(p, 3).unwrap();
    let s32 = State32::from_bytes(&s64.to_bytes().unwrap()).unwrap();
    let h64 = build_hamiltonian::<f64>(Model::Heisenberg, spec, None).unwrap();
    let (a, b) = (energy(&s64, &h64).unwrap(), energy(&s32, &h32).unwrap());
    assert!((a - b as f64).abs() < 1e-4, "{a} vs {b}");
}
