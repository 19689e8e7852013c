mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use weakcoupling::bath::{BathModel, SpectralDensity};
use weakcoupling::cumulant::*;
use weakcoupling::generators::{
    davies_generator, lamb_stark_hamiltonian, redfield_generator, GeneratorOptions, Picture,
};
use weakcoupling::operators::*;
use weakcoupling::system::OpenSystem;
use weakcoupling::Matrix;

fn qubit_at(omega0: f64, beta: f64, lambda: f64) -> OpenSystem {
    let bath = BathModel::single(beta, ohmic()).unwrap();
    OpenSystem::new(
        herm(pauli_z() * c64(0.5 * omega0, 0.0)),
        vec![herm(pauli_x())],
        bath,
        lambda,
        1e-9,
    )
    .unwrap()
}

fn rel(a: weakcoupling::C64, b: weakcoupling::C64) -> f64 {
    (a - b).norm() / b.norm()
}

/// Orthonormal Hermitian basis: I/√d first, then traceless generators.
fn hs_basis(d: usize) -> Vec<Matrix> {
    let mut out = vec![identity(d).scale(1.0 / (d as f64).sqrt())];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..d {
        for b in a + 1..d {
            out.push((basis_op(d, a, b) + basis_op(d, b, a)).scale(s));
            out.push((basis_op(d, a, b) * c64(0.0, -1.0) + basis_op(d, b, a) * c64(0.0, 1.0)).scale(s));
        }
    }
    for k in 1..d {
        let mut m = DMatrix::zeros(d, d);
        for a in 0..k {
            m[(a, a)] = c64(1.0, 0.0);
        }
        m[(k, k)] = c64(-(k as f64), 0.0);
        out.push(m.scale(1.0 / ((k * (k + 1)) as f64).sqrt()));
    }
    out
}

/// Traceless Hamiltonian part of a generator written as Σ c_kl F_k ρ F_l†.
fn hamiltonian_part(l: &Superoperator) -> Matrix {
    let d = l.dim();
    let f = hs_basis(d);
    // vec(A ρ B†) = (conj(B) ⊗ A) vec(ρ) with column-major vec.
    let coef = |k: usize, m: usize| {
        let x = f[m].map(|z| z.conj()).kronecker(&f[k]);
        (x.adjoint() * l.matrix()).trace()
    };
    let mut big_f = DMatrix::zeros(d, d);
    for k in 1..f.len() {
        big_f += &f[k] * (coef(k, 0) / (d as f64).sqrt());
    }
    (&big_f - big_f.adjoint()) * c64(0.0, 0.5)
}

#[test]
fn kernel_vanishes_at_zero_time() {
    let sys = v_system(1.0, 0.3);
    let k = gamma_kernel(&sys, 0.0).unwrap();
    assert_eq!(k.gamma.norm(), 0.0);
    assert_eq!(k.xi.norm(), 0.0);
    let map = cumulant_superoperator(&sys, &k).exp().unwrap();
    assert!((map.matrix() - Superoperator::identity(3).matrix()).norm() < 1e-15);
    assert!(gamma_kernel(&sys, -1.0).is_err());
    assert!(gamma_kernel(&sys, f64::NAN).is_err());
}

#[test]
fn kernel_is_hermitian_psd_with_real_diagonal() {
    let sys = v_system(0.7, 0.3);
    for t in [0.05, 0.4, 2.0, 9.0, 40.0] {
        let k = gamma_kernel(&sys, t).unwrap();
        let scale = k.gamma.norm();
        assert!(k.hermitian_defect() < 1e-10 * scale);
        assert!(k.psd_ratio() > -1e-9, "t = {t}: {}", k.psd_ratio());
        for a in 0..k.gamma.nrows() {
            assert!(k.gamma[(a, a)].re >= 0.0);
            assert!(k.gamma[(a, a)].im.abs() < 1e-12 * scale);
        }
    }
}

#[test]
fn kernel_matches_double_integral() {
    for (omega0, t) in [(1.0, 5.0), (0.7, 3.0), (1.6, 2.0)] {
        let sys = qubit_at(omega0, 1.0, 0.1);
        let k = gamma_kernel(&sys, t).unwrap();
        for (f, &w) in sys.jumps.frequencies.iter().enumerate() {
            for (g, &wp) in sys.jumps.frequencies.iter().enumerate() {
                let direct = gamma_kernel_direct(&sys.bath, 0, 0, w, wp, t, 60).unwrap();
                let fast = k.gamma[(k.index(f, 0), k.index(g, 0))];
                assert!(rel(fast, direct) < 1e-6, "ω {w} ω′ {wp} t {t}: {fast} vs {direct}");
            }
        }
    }
}

#[test]
fn direct_kernel_guards_grid_size() {
    let b = BathModel::single(1.0, ohmic()).unwrap();
    assert_eq!(gamma_kernel_direct(&b, 0, 0, 1.0, 1.0, 0.0, 10).unwrap().norm(), 0.0);
    assert!(gamma_kernel_direct(&b, 0, 0, 1.0, 1.0, 1.0, 251).is_err());
    assert!(gamma_kernel_direct(&b, 0, 0, 1.0, 1.0, 1.0, 0).is_err());
}

#[test]
fn short_memory_bath_grows_linearly() {
    // Broad flat spectrum: the diagonal kernel is t·γ(ω) plus a constant.
    let bath = BathModel::single(0.01, SpectralDensity::ohmic(1.0, 200.0, 0.01)).unwrap();
    let sys = OpenSystem::new(herm(pauli_z() * c64(0.5, 0.0)), vec![herm(pauli_x())], bath, 1.0, 1e-9).unwrap();
    let ts: Vec<f64> = (1..=10).map(|k| k as f64).collect();
    let ys: Vec<f64> = ts
        .iter()
        .map(|&t| gamma_kernel(&sys, t).unwrap().gamma[(1, 1)].re)
        .collect();
    let n = ts.len() as f64;
    let (mx, my) = (ts.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = ts.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = ts.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.999, "{r2}");
    let slope = sxy / sxx;
    let rate = sys.bath.gamma_rate(0, 0, sys.jumps.frequencies[1]).re;
    assert!((slope / rate - 1.0).abs() < 1e-3);
}

#[test]
fn xi_matches_integrated_derivative() {
    let sys = v_system(1.0, 0.2);
    assert_eq!(sys.jumps.len(), 4);
    let t = 3.0;
    let k = gamma_kernel(&sys, t).unwrap();
    for (f, g, i, j) in [(0, 0, 0, 0), (1, 3, 0, 1), (3, 2, 1, 1), (2, 2, 1, 0)] {
        let oracle = xi_kernel_integrated(&sys, f, g, i, j, t, 40);
        let fast = k.xi[(k.index(f, i), k.index(g, j))];
        assert!(
            (fast - oracle).norm() < 1e-8 * (1.0 + oracle.norm()),
            "{fast} vs {oracle}"
        );
    }
}

#[test]
fn silent_bath_kernels_vanish() {
    let sys = silent_qubit(1.0);
    let k = gamma_kernel(&sys, 2.0).unwrap();
    assert_eq!(k.gamma.norm(), 0.0);
    assert_eq!(k.xi.norm(), 0.0);
    assert_eq!(second_correction(&sys, Time::At(2.0)).unwrap().norm(), 0.0);
    assert_eq!(second_correction(&sys, Time::Infinite).unwrap().norm(), 0.0);
    assert_eq!(br_consistency(&sys, 1.0, 1e-3).unwrap(), 0.0);
}

#[test]
fn xi_diagonal_slope_is_lamb_shift() {
    let sys = qubit(1.0, 0.1);
    let f = 1;
    let w = sys.jumps.frequencies[f];
    let ts: Vec<f64> = (0..=10).map(|k| 5.0 + 0.5 * k as f64).collect();
    let xs: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let k = gamma_kernel(&sys, t).unwrap();
            k.xi[(f, f)].re
        })
        .collect();
    let slope = (xs[10] - xs[0]) / (ts[10] - ts[0]);
    let s = sys.bath.lamb_shift(0, 0, w).unwrap().re;
    assert!((slope / s - 1.0).abs() < 0.01, "{slope} vs {s}");
    let asym = xi_longtime_diagonal(&sys.bath, 0, 0, w, 10.0).unwrap();
    assert!((xs[10] - asym.re).abs() / asym.norm() < 0.01);
}

#[test]
fn longtime_diagonal_slope_is_rate() {
    let sys = qubit(1.0, 0.1);
    let b = &sys.bath;
    let a = gamma_longtime_entry(b, 0, 0, 1.0, 1.0, 10.0).unwrap();
    let c = gamma_longtime_entry(b, 0, 0, 1.0, 1.0, 20.0).unwrap();
    assert!(((c - a) / 10.0 - b.gamma_rate(0, 0, 1.0)).norm() < 1e-12);
    // Off-diagonal entries stay bounded and oscillate at ω − ω′.
    let p = std::f64::consts::PI;
    let x = gamma_longtime_entry(b, 0, 0, 1.0, -1.0, 50.0).unwrap();
    let y = gamma_longtime_entry(b, 0, 0, 1.0, -1.0, 50.0 + p).unwrap();
    assert!((x - y).norm() < 1e-12);
    let table = gamma_kernel_longtime(&sys, 50.0).unwrap();
    let fi = |w: f64| sys.jumps.frequencies.iter().position(|&x| x == w).unwrap();
    assert!((table.gamma[(fi(1.0), fi(-1.0))] - x).norm() < 1e-10);
}

#[test]
fn kernel_approaches_longtime_form_quadratically() {
    let sys = qubit(1.0, 0.1);
    let fits = longtime_kernel_orders(&sys, &[100.0, 200.0]).unwrap();
    assert!(!fits.is_empty());
    for (_, _, fit) in fits {
        let factor = fit.envelope[0] / fit.envelope[1];
        assert!(factor >= 3.5, "{factor}");
    }
}

#[test]
fn secular_counterterm_is_lamb_stark() {
    let sys = v_system(1.0, 0.2);
    let hc = second_correction(&sys, Time::Infinite).unwrap();
    let hls = lamb_stark_hamiltonian(&sys).unwrap();
    let secular = sys.eig.block_diagonal(hc.matrix());
    assert!((secular - hls.matrix()).norm() < 1e-10 * hls.norm());
}

#[test]
fn counterterm_is_derivative_of_xi_hamiltonian() {
    let sys = v_system(1.0, 0.2);
    let (t, h) = (2.5, 1e-4);
    let lp = xi_hamiltonian(&sys, &gamma_kernel(&sys, t + h).unwrap()).unwrap();
    let lm = xi_hamiltonian(&sys, &gamma_kernel(&sys, t - h).unwrap()).unwrap();
    let fd = (lp.matrix() - lm.matrix()) / c64(2.0 * h, 0.0);
    let hc = second_correction_interaction(&sys, t).unwrap();
    assert!((fd - hc.matrix()).norm() < 1e-6 * hc.norm());
    assert!(second_correction(&sys, Time::At(-1.0)).is_err());
}

#[test]
fn cumulant_map_is_cptp_at_inverse_rate() {
    let sys = qubit(1.0, 0.5);
    let rate = sys.lambda.powi(2) * sys.bath.gamma_rate(0, 0, 1.0).re;
    let (map, rep) = cumulant_map(&sys, 1.0 / rate).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!(rep.min_choi_eig >= -1e-9 && rep.trace_defect <= 1e-10);
    let k = cumulant_superoperator(&sys, &gamma_kernel(&sys, 1.0 / rate).unwrap());
    let x = random_matrix(&mut rng(3), 2);
    assert!(k.apply(&x).trace().norm() < 1e-12 * k.norm());
    assert!(map.norm().is_finite());
}

#[test]
fn silent_schrodinger_evolution_is_unitary() {
    let sys = silent_qubit(1.0);
    let rho0 = DensityMatrix::new(DMatrix::from_row_slice(
        2,
        2,
        &[c64(0.5, 0.0), c64(0.5, 0.0), c64(0.5, 0.0), c64(0.5, 0.0)],
    ))
    .unwrap();
    let t = 1.7;
    let out = evolve_cumulant(&sys, &rho0, &[t], Picture::Schrodinger).unwrap();
    let u = matrix_exponential(&(sys.hamiltonian.matrix() * c64(0.0, -t))).unwrap();
    let expect = &u * rho0.matrix() * u.adjoint();
    assert!((&out[0].rho - expect).norm() < 1e-13);
    assert!(evolve_cumulant(&sys, &DensityMatrix::maximally_mixed(3), &[t], Picture::Schrodinger).is_err());
}

#[test]
fn cumulant_relaxes_towards_gibbs() {
    let sys = qubit(1.0, 0.05);
    let rate = sys.lambda.powi(2) * (sys.bath.gamma_rate(0, 0, 1.0).re + sys.bath.gamma_rate(0, 0, -1.0).re);
    let rho0 = DensityMatrix::basis_state(2, 0);
    let times: Vec<f64> = [1.0, 5.0, 20.0, 50.0].iter().map(|k| k / rate).collect();
    let out = evolve_cumulant(&sys, &rho0, &times, Picture::Schrodinger).unwrap();
    let gibbs = gibbs_state(&sys.hamiltonian, 1.0).unwrap();
    let d: Vec<f64> = out.iter().map(|p| trace_distance(&p.rho, gibbs.matrix())).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    assert!(d[3] <= 1e-4, "{d:?}");
    assert!(out.iter().all(|p| p.cptp.passed));
}

#[test]
fn schrodinger_approximation_is_cptp() {
    let sys = v_system(1.0, 0.4);
    for t in [0.5, 3.0, 12.0] {
        let k = schrodinger_cumulant(&sys, &gamma_kernel(&sys, t).unwrap());
        let rep = is_cptp(&k.exp().unwrap(), 1e-9);
        assert!(rep.passed, "t = {t}: {rep:?}");
    }
}

#[test]
fn finite_difference_of_cumulant_is_redfield() {
    let sys = qubit(1.0, 0.3);
    assert!(br_consistency(&sys, 2.0, 1e-4).unwrap() <= 1e-6);
    let v = v_system(0.8, 0.3);
    for t in [0.3, 1.0, 4.0, 9.0] {
        assert!(br_consistency(&v, t, 1e-4).unwrap() <= 1e-6);
    }
    assert!(br_consistency(&sys, 1e-5, 1e-4).is_err());
    assert!(redfield_generator(&sys, 0.0).unwrap().norm() == 0.0);
}

#[test]
fn series_edge_cases() {
    let sys = v_system(1.0, 0.3);
    let dk = redfield_generator(&sys, 1.0).unwrap();
    let zero = Superoperator::zeros(3);
    let r = cumulant_ode_rhs(&zero, &dk, 8).unwrap();
    assert!((r.value.matrix() - dk.matrix()).norm() == 0.0);
    let r = cumulant_ode_rhs(&dk.scaled(c64(2.0, 0.0)), &dk, 8).unwrap();
    assert!((r.value.matrix() - dk.matrix()).norm() < 1e-14 * dk.norm());
    assert!(cumulant_ode_rhs(&dk.scaled(c64(1e3, 0.0)), &dk, 8).is_err());
}

#[test]
fn exact_cumulant_flow_reproduces_exponential() {
    let sys = qubit(1.0, 0.4);
    let rho0 = DensityMatrix::new(DMatrix::from_row_slice(
        2,
        2,
        &[c64(0.7, 0.0), c64(0.2, 0.3), c64(0.2, -0.3), c64(0.3, 0.0)],
    ))
    .unwrap();
    let t_end = 2.0;
    let k_at = |t: f64| cumulant_superoperator(&sys, &gamma_kernel(&sys, t).unwrap());
    let rhs = |t: f64, x: &Matrix| -> Matrix {
        let dk = redfield_generator(&sys, t).unwrap();
        cumulant_ode_rhs(&k_at(t), &dk, 12).unwrap().value.apply(x)
    };
    let n = 200;
    let h = t_end / n as f64;
    let mut x = rho0.matrix().clone();
    for s in 0..n {
        let t = s as f64 * h;
        let k1 = rhs(t, &x);
        let k2 = rhs(t + h / 2.0, &(&x + &k1 * c64(h / 2.0, 0.0)));
        let k3 = rhs(t + h / 2.0, &(&x + &k2 * c64(h / 2.0, 0.0)));
        let k4 = rhs(t + h, &(&x + &k3 * c64(h, 0.0)));
        x += (k1 + k2 * c64(2.0, 0.0) + k3 * c64(2.0, 0.0) + k4) * c64(h / 6.0, 0.0);
    }
    let direct = k_at(t_end).exp().unwrap().apply(rho0.matrix());
    assert!(trace_distance(&x, &direct) < 1e-7);
}

#[test]
fn detailed_balance_improves_with_time() {
    let sys = qubit(1.0, 0.1);
    let bal = |beta: f64, t: f64| kernel_detailed_balance(&qubit(beta, 0.1), t).unwrap();
    let series: Vec<f64> = [5.0, 10.0, 20.0, 40.0].iter().map(|&t| bal(0.5, t)).collect();
    assert!(series.windows(2).all(|w| w[1] < w[0]), "{series:?}");
    assert!(series[2] < 1e-2);
    assert!(kernel_detailed_balance(&sys, 1000.0).unwrap() < 1e-3);
}

#[test]
fn cumulant_over_time_approaches_davies() {
    let sys = qubit(1.0, 0.3);
    let fit = davies_limit_order(&sys, &geometric_times(20.0, 200.0, 5)).unwrap();
    assert!(fit.order > 0.9, "{}", fit.order);
    let c: Vec<f64> = fit.times.iter().zip(&fit.envelope).map(|(t, e)| t * e).collect();
    let (lo, hi) = c
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 1.5, "{c:?}");
}

#[test]
fn renormalized_cumulant_has_no_hamiltonian_part() {
    let sys = v_system(1.0, 0.3);
    for t in [0.5, 4.0, 25.0] {
        let kernel = gamma_kernel(&sys, t).unwrap();
        let k = cumulant_superoperator(&sys, &kernel);
        assert!(hamiltonian_part(&k).norm() <= 1e-9 * k.norm());
        let bare = bare_cumulant_superoperator(&sys, &kernel).unwrap();
        let lam = xi_hamiltonian(&sys, &kernel).unwrap();
        let traceless = lam.matrix() - identity(3) * (lam.matrix().trace() / 3.0);
        let expect = traceless * c64(sys.lambda.powi(2), 0.0);
        assert!((hamiltonian_part(&bare) - expect).norm() <= 1e-9 * bare.norm());
    }
}

#[test]
fn decay_fit_helpers() {
    let ts = geometric_times(2.0, 200.0, 7);
    assert_eq!(ts.len(), 7);
    assert!((ts[0] - 2.0).abs() < 1e-15 && (ts[6] - 200.0).abs() < 1e-12);
    let vs: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-1.7)).collect();
    assert!((fit_decay_order(&ts, &vs) - 1.7).abs() < 1e-12);
    assert!(fit_decay_order(&[1.0], &[1.0]).is_nan());
    let p = oscillation_period(&v_system(1.0, 0.1));
    assert!((p - 2.0 * std::f64::consts::PI / 0.3).abs() < 1e-9);
    assert_eq!(oscillation_period(&qubit(1.0, 0.1)), 2.0 * std::f64::consts::PI);
}

#[test]
fn davies_generator_is_kernel_slope() {
    // Secular entries of γ(ω,ω,t) grow like t·γ(ω); compare generator norms.
    let sys = qubit(1.0, 0.3);
    let opts = GeneratorOptions {
        include_lamb_stark: false,
        picture: Picture::Interaction,
        renormalized: true,
    };
    let ld = davies_generator(&sys, &opts).unwrap();
    let t = 400.0;
    let k = cumulant_superoperator(&sys, &gamma_kernel(&sys, t).unwrap()).scaled(c64(1.0 / t, 0.0));
    assert!(k.minus(&ld).norm() < 0.02 * ld.norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cumulant_maps_are_cptp(t in 0.01f64..30.0, beta in 0.3f64..3.0, lambda in 0.05f64..0.8) {
        let sys = v_system(beta, lambda);
        let k = gamma_kernel(&sys, t).unwrap();
        prop_assert!(k.psd_ratio() >= -1e-9);
        let rep = is_cptp(&cumulant_superoperator(&sys, &k).exp().unwrap(), 1e-9);
        prop_assert!(rep.min_choi_eig >= -1e-9 && rep.trace_defect <= 1e-10);
    }
}
