mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use weakcoupling::operators::*;
use weakcoupling::spectral::*;
use weakcoupling::Matrix;

fn sum(ms: impl Iterator<Item = Matrix>, d: usize) -> Matrix {
    ms.fold(DMatrix::zeros(d, d), |a, b| a + b)
}

fn three_level() -> (EigenDecomposition, Vec<HermitianOperator>) {
    let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.5]);
    let s = herm(DMatrix::from_fn(3, 3, |a, b| c64(if a == b { 0.0 } else { 1.0 }, 0.0)));
    (decompose(&h, DEFAULT_TAU_DEG), vec![s])
}

#[test]
fn identity_has_one_level() {
    let eig = decompose(&herm(identity(4)), DEFAULT_TAU_DEG);
    assert_eq!(eig.energies, vec![1.0]);
    assert!((&eig.projectors[0] - identity(4)).norm() < 1e-14);
}

#[test]
fn near_degenerate_levels_merge() {
    let eig = decompose(&HermitianOperator::from_real_diagonal(&[1.0, 1.0 + 1e-15, 2.0]), 1e-9);
    assert_eq!(eig.energies.len(), 2);
    assert!((eig.energies[0] - 1.0).abs() < 1e-14);
    assert!((eig.energies[1] - 2.0).abs() < 1e-14);
    assert!((eig.projectors[0].trace().re - 2.0).abs() < 1e-14);
}

#[test]
fn random_hamiltonian_is_reconstructed() {
    let mut r = rng(5);
    let h = herm(random_hermitian(&mut r, 5));
    let eig = decompose(&h, DEFAULT_TAU_DEG);
    let rebuilt = sum(
        eig.energies.iter().zip(&eig.projectors).map(|(e, p)| p * c64(*e, 0.0)),
        5,
    );
    assert!((rebuilt - h.matrix()).norm() <= 1e-12 * h.norm());
    assert!((sum(eig.projectors.iter().cloned(), 5) - identity(5)).norm() < 1e-12);
    for (a, p) in eig.projectors.iter().enumerate() {
        for (b, q) in eig.projectors.iter().enumerate() {
            let expect = if a == b { p.clone() } else { DMatrix::zeros(5, 5) };
            assert!((p * q - expect).norm() < 1e-12);
        }
    }
}

#[test]
fn qubit_jumps_are_ladder_operators() {
    let h = herm(pauli_z() * c64(0.5, 0.0));
    let eig = decompose(&h, DEFAULT_TAU_DEG);
    let j = jump_operators(&eig, &[herm(pauli_x())]).unwrap();
    assert_eq!(j.frequencies, vec![-1.0, 1.0]);
    // Index 0 is the excited level (+½), index 1 the ground level.
    let lowering = basis_op(2, 1, 0);
    assert!((&j.operators[1][0] - &lowering).norm() < 1e-15);
    assert!((&j.operators[0][0] - lowering.adjoint()).norm() < 1e-15);
    assert!(j.warnings.is_empty());
}

#[test]
fn commuting_coupling_gives_only_zero_frequency() {
    let h = herm(pauli_z() * c64(0.5, 0.0));
    let eig = decompose(&h, DEFAULT_TAU_DEG);
    let j = jump_operators(&eig, &[herm(pauli_z())]).unwrap();
    assert_eq!(j.frequencies, vec![0.0]);
    assert_eq!(j.warnings.len(), 1);
}

#[test]
fn three_level_bohr_set() {
    let (eig, s) = three_level();
    let j = jump_operators(&eig, &s).unwrap();
    let expect = [-2.5, -1.5, -1.0, 1.0, 1.5, 2.5];
    assert_eq!(j.len(), 6);
    for (w, e) in j.frequencies.iter().zip(expect) {
        assert!((w - e).abs() < 1e-14);
    }
    for (f, ops) in j.operators.iter().enumerate() {
        let nonzero: Vec<(usize, usize)> = (0..3)
            .flat_map(|a| (0..3).map(move |b| (a, b)))
            .filter(|&(a, b)| ops[0][(a, b)].norm() > 1e-14)
            .collect();
        assert_eq!(nonzero.len(), 1);
        let (a, b) = nonzero[0];
        // S(ω) maps level b to level a with ε_b − ε_a = ω.
        let levels = [0.0, 1.0, 2.5];
        assert!((levels[b] - levels[a] - j.frequencies[f]).abs() < 1e-14);
        assert!((ops[0][(a, b)] - c64(1.0, 0.0)).norm() < 1e-14);
    }
}

#[test]
fn jump_operators_validate_inputs() {
    let eig = decompose(&HermitianOperator::from_real_diagonal(&[0.0, 1.0]), DEFAULT_TAU_DEG);
    assert!(jump_operators(&eig, &[]).is_err());
    assert!(jump_operators(&eig, &[herm(identity(3))]).is_err());
}

#[test]
fn qubit_residuals_vanish() {
    let h = herm(pauli_z() * c64(0.5, 0.0));
    let s = vec![herm(pauli_x())];
    let eig = decompose(&h, DEFAULT_TAU_DEG);
    let j = jump_operators(&eig, &s).unwrap();
    assert!(verify_eigenoperator(&eig, &j, &s).max() <= 1e-13);
}

#[test]
fn corrupted_operator_is_detected() {
    let (eig, s) = three_level();
    let mut j = jump_operators(&eig, &s).unwrap();
    let f = j.frequencies.iter().position(|&w| (w - 1.5).abs() < 1e-12).unwrap();
    let eps = 1e-3;
    // A perturbation inside the ω = 1 block: [H, X] = −X there, so the
    // first-kind residual is eps·|1 − 1.5|.
    j.operators[f][0][(0, 1)] += c64(eps, 0.0);
    let r = verify_eigenoperator(&eig, &j, &s);
    assert!((r.first_kind - eps * 0.5).abs() < 1e-12, "{}", r.first_kind);
}

#[test]
fn random_six_level_residuals() {
    let mut r = rng(6);
    let h = herm(random_hermitian(&mut r, 6));
    let s = vec![herm(random_hermitian(&mut r, 6)), herm(random_hermitian(&mut r, 6))];
    let eig = decompose(&h, DEFAULT_TAU_DEG);
    let j = jump_operators(&eig, &s).unwrap();
    assert!(verify_eigenoperator(&eig, &j, &s).max() <= 1e-12 * h.norm());
}

#[test]
fn block_diagonal_keeps_commuting_part() {
    let (eig, s) = three_level();
    assert!(eig.block_diagonal(s[0].matrix()).norm() < 1e-15);
    let h = eig.hamiltonian().clone();
    assert!((eig.block_diagonal(&h) - h).norm() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn completeness_conjugation_and_interaction_picture(seed in 0u64..10_000, d in 2usize..6, t in 0.0f64..1.0) {
        let mut r = rng(seed);
        let h = herm(random_hermitian(&mut r, d));
        let s = vec![herm(random_hermitian(&mut r, d))];
        let eig = decompose(&h, DEFAULT_TAU_DEG);
        let j = jump_operators(&eig, &s).unwrap();
        let res = verify_eigenoperator(&eig, &j, &s);
        prop_assert!(res.completeness < 1e-12);
        prop_assert!(res.conjugation < 1e-12);
        let wmin = j.frequencies.iter().filter(|w| **w > 0.0).cloned().fold(f64::INFINITY, f64::min);
        let t = t * 10.0 / wmin;
        let u = matrix_exponential(&(h.matrix() * c64(0.0, t))).unwrap();
        let direct = &u * s[0].matrix() * u.adjoint();
        prop_assert!((direct - j.interaction_picture(0, t)).norm() < 1e-11);
    }
}
