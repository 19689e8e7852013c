mod common;

use common::*;
use nalgebra::DMatrix;
use weakcoupling::bath::{BathModel, SpectralDensity};
use weakcoupling::operators::*;
use weakcoupling::oracle::*;
use weakcoupling::Matrix;

fn qubit_model(m: usize, n_max: usize, lambda: f64) -> OracleModel {
    let tb = discretize_bath(&ohmic(), m, 60.0, n_max).unwrap();
    OracleModel::new(herm(pauli_z() * c64(0.5, 0.0)), herm(pauli_x()), tb, lambda).unwrap()
}

fn coherent_state() -> DensityMatrix {
    DensityMatrix::new(DMatrix::from_row_slice(
        2,
        2,
        &[c64(0.5, 0.0), c64(0.5, 0.0), c64(0.5, 0.0), c64(0.5, 0.0)],
    ))
    .unwrap()
}

#[test]
fn silent_density_gives_uncoupled_modes() {
    let tb = discretize_bath(&SpectralDensity::ohmic(1.0, 10.0, 0.0), 4, 60.0, 2).unwrap();
    assert!(tb.couplings.iter().all(|g| g.norm() == 0.0));
}

#[test]
fn single_mode_coupling() {
    let sd = ohmic();
    let tb = discretize_bath(&sd, 1, 2.0, 3).unwrap();
    assert_eq!(tb.frequencies, vec![1.0]);
    let expect = (sd.j(1.0) * 2.0 / (2.0 * std::f64::consts::PI)).sqrt();
    assert!((tb.couplings[0].re - expect).abs() < 1e-15);
    assert_eq!(tb.dim(), 4);
    assert_eq!(tb.recurrence_time(), f64::INFINITY);
}

#[test]
fn discretization_validates() {
    assert!(discretize_bath(&ohmic(), 0, 60.0, 2).is_err());
    assert!(discretize_bath(&ohmic(), 3, -1.0, 2).is_err());
    assert!(discretize_bath(&ohmic(), 3, 60.0, 0).is_err());
    let lines = SpectralDensity::Discrete {
        modes: vec![1.0],
        weights: vec![0.1],
    };
    assert!(discretize_bath(&lines, 3, 60.0, 2).is_err());
    assert!(TruncatedBath::new(vec![1.0, -1.0], vec![c64(0.1, 0.0); 2], 2).is_err());
    assert!(TruncatedBath::new(vec![1.0], vec![], 2).is_err());
}

#[test]
fn discrete_correlation_tracks_continuum() {
    // The line sum revives completely at 2π/Δω; compare up to the same
    // fraction of it that the dynamics comparisons use.
    let beta = 1.0;
    let tb = discretize_bath(&ohmic(), 20, 60.0, 1).unwrap();
    let cont = BathModel::single(beta, ohmic()).unwrap();
    let horizon = 0.6 * tb.recurrence_time();
    assert!((tb.recurrence_time() - 2.0 * std::f64::consts::PI * 20.0 / 60.0).abs() < 1e-12);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=1000 {
        let tau = horizon * k as f64 / 1000.0;
        let c = cont.correlation(0, 0, tau).unwrap();
        num += (tb.correlation(beta, tau) - c).norm_sqr();
        den += c.norm_sqr();
    }
    assert!((num / den).sqrt() <= 0.05, "{}", (num / den).sqrt());
    let lines = BathModel::single(beta, tb.spectral_density()).unwrap();
    for tau in [0.0, 0.3, 2.0] {
        assert!((lines.correlation(0, 0, tau).unwrap() - tb.correlation(beta, tau)).norm() < 1e-12);
    }
}

#[test]
fn uncoupled_spectrum_is_sum_of_parts() {
    let model = qubit_model(2, 2, 0.0);
    let (e, _) = model.total_hamiltonian().unwrap().eigh();
    let mut expect = Vec::new();
    for s in [-0.5, 0.5] {
        for n1 in 0..=2 {
            for n2 in 0..=2 {
                expect.push(s + n1 as f64 * model.bath.frequencies[0] + n2 as f64 * model.bath.frequencies[1]);
            }
        }
    }
    expect.sort_by(f64::total_cmp);
    for (a, b) in e.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn single_mode_two_level_hamiltonian() {
    let (w, g, lambda) = (1.3, c64(0.2, 0.1), 0.7);
    let tb = TruncatedBath::new(vec![w], vec![g], 1).unwrap();
    let model = OracleModel::new(herm(pauli_z() * c64(0.5, 0.0)), herm(pauli_x()), tb, lambda).unwrap();
    let h = model.total_hamiltonian().unwrap();
    // Basis |s, n⟩ ordered (e,0), (e,1), (g,0), (g,1); B = ḡ b + g b†.
    let b = DMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), g.conj(), g, c64(0.0, 0.0)]);
    let mut expect = Matrix::zeros(4, 4);
    let diag = [0.5, 0.5 + w, -0.5, -0.5 + w];
    for k in 0..4 {
        expect[(k, k)] = c64(diag[k], 0.0);
    }
    for (r, c) in [(0usize, 1usize), (1, 0), (0, 0), (1, 1)] {
        expect[(r, 2 + c)] += b[(r, c)] * lambda;
        expect[(2 + r, c)] += b[(r, c)] * lambda;
    }
    assert!((h.matrix() - expect).norm() < 1e-15);
    assert!(hermitian_defect(h.matrix()) < 1e-13);
}

#[test]
fn dimension_guards() {
    let tb = discretize_bath(&ohmic(), 6, 60.0, 4).unwrap();
    let model = OracleModel::new(herm(pauli_z()), herm(pauli_x()), tb, 0.1).unwrap();
    assert!(model.total_hamiltonian().is_err());
    let huge = discretize_bath(&ohmic(), 12, 60.0, 4).unwrap();
    assert!(OracleModel::new(herm(pauli_z()), herm(pauli_x()), huge, 0.1).is_err());
}

#[test]
fn zero_time_and_zero_coupling() {
    let model = qubit_model(3, 2, 0.0);
    let rho0 = coherent_state();
    let times = [0.0, 0.4, 1.1];
    let tr = exact_reduced_evolution(&model, &rho0, 1.0, &times, None, &PropagationOptions::default()).unwrap();
    assert!((&tr.states[0] - rho0.matrix()).norm() < 1e-14);
    for (t, s) in times.iter().zip(&tr.states) {
        let u = matrix_exponential(&(model.h_s.matrix() * c64(0.0, -t))).unwrap();
        assert!((s - &u * rho0.matrix() * u.adjoint()).norm() < 1e-12);
    }
}

#[test]
fn reduced_dynamics_matches_dense_propagation() {
    let model = qubit_model(2, 3, 0.3);
    let beta = 1.0;
    let rho0 = coherent_state();
    let t = 0.3;
    let tr = exact_reduced_evolution(&model, &rho0, beta, &[t], None, &PropagationOptions::default()).unwrap();
    // Dense Schrödinger-picture propagation of ρ_S ⊗ ρ_R.
    let h = model.total_hamiltonian().unwrap();
    let dr = model.bath.dim();
    let mut rho_r = Matrix::zeros(dr, dr);
    let mut z = 0.0;
    for r in 0..dr {
        let (n1, n2) = (r % 4, r / 4);
        let e = n1 as f64 * model.bath.frequencies[0] + n2 as f64 * model.bath.frequencies[1];
        rho_r[(r, r)] = c64((-beta * e).exp(), 0.0);
        z += (-beta * e).exp();
    }
    rho_r /= c64(z, 0.0);
    let full = rho0.matrix().kronecker(&rho_r);
    let u = matrix_exponential(&(h.matrix() * c64(0.0, -t))).unwrap();
    let out = &u * full * u.adjoint();
    let reduced = partial_trace_second(&out, 2, dr).unwrap();
    assert!((&tr.states[0] - reduced).norm() < 1e-10);
    assert!((tr.states[0].trace().re - 1.0).abs() < 1e-10);
    assert!(DensityMatrix::with_tolerance(tr.states[0].clone(), 1e-10, 1e-10).is_ok());
}

#[test]
fn evolution_validates_inputs() {
    let model = qubit_model(2, 2, 0.1);
    let o = PropagationOptions::default();
    assert!(exact_reduced_evolution(&model, &DensityMatrix::maximally_mixed(3), 1.0, &[0.1], None, &o).is_err());
    assert!(exact_reduced_evolution(&model, &coherent_state(), 0.0, &[0.1], None, &o).is_err());
    assert!(exact_reduced_evolution(&model, &coherent_state(), 1.0, &[0.2, 0.1], None, &o).is_err());
}

#[test]
fn truncation_is_converged_for_standard_model() {
    let rho0 = coherent_state();
    let horizon = 0.6 * qubit_model(5, 4, 0.05).bath.recurrence_time();
    let times: Vec<f64> = (1..=5).map(|k| horizon * k as f64 / 5.0).collect();
    let run = |n_max: usize| {
        exact_reduced_evolution(
            &qubit_model(5, n_max, 0.05),
            &rho0,
            1.0,
            &times,
            None,
            &PropagationOptions::default(),
        )
        .unwrap()
    };
    let (a, b) = (run(4), run(5));
    assert!(a.warnings.is_empty(), "{:?}", a.warnings);
    for (x, y) in a.states.iter().zip(&b.states) {
        assert!(trace_distance(x, y) <= 1e-6);
    }
}

#[test]
fn mean_force_limits() {
    let model = qubit_model(3, 3, 0.0);
    let rho = exact_mean_force(&model, 1.3).unwrap();
    let g = gibbs_state(&model.h_s, 1.3).unwrap();
    assert!(rho.trace_distance(&g) < 1e-12);
    let hot = exact_mean_force(&qubit_model(3, 3, 0.2), 0.0).unwrap();
    assert!((hot.matrix() - identity(2).scale(0.5)).norm() < 1e-12);
    assert!(exact_mean_force(&model, -1.0).is_err());
}
