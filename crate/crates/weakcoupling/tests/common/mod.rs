#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weakcoupling::bath::{BathModel, SpectralDensity};
use weakcoupling::operators::{c64, pauli_x, pauli_z, HermitianOperator};
use weakcoupling::system::OpenSystem;
use weakcoupling::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, d: usize) -> Matrix {
    DMatrix::from_fn(d, d, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut impl Rng, d: usize) -> Matrix {
    let a = random_matrix(rng, d);
    (&a + a.adjoint()).scale(0.5)
}

pub fn random_density(rng: &mut impl Rng, d: usize) -> Matrix {
    let a = random_matrix(rng, d);
    let m = &a * a.adjoint();
    let tr = m.trace();
    m / tr
}

pub fn herm(m: Matrix) -> HermitianOperator {
    HermitianOperator::new(m).unwrap()
}

pub fn ohmic() -> SpectralDensity {
    SpectralDensity::ohmic(1.0, 10.0, 1.0)
}

/// Qubit H = σz/2 coupled through σx to an Ohmic bath with ω_c = 10.
pub fn qubit(beta: f64, lambda: f64) -> OpenSystem {
    let bath = BathModel::single(beta, ohmic()).unwrap();
    OpenSystem::new(
        herm(pauli_z() * c64(0.5, 0.0)),
        vec![herm(pauli_x())],
        bath,
        lambda,
        1e-9,
    )
    .unwrap()
}

pub fn basis_op(d: usize, a: usize, b: usize) -> Matrix {
    let mut m = DMatrix::zeros(d, d);
    m[(a, b)] = c64(1.0, 0.0);
    m
}

/// V system: ground level 0 coupled to levels 1 and 2 through two
/// correlated channels.
pub fn v_system(beta: f64, lambda: f64) -> OpenSystem {
    let h = herm(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        c64(0.0, 0.0),
        c64(1.0, 0.0),
        c64(1.3, 0.0),
    ])));
    let s1 = herm(basis_op(3, 0, 1) + basis_op(3, 1, 0));
    let s2 = herm(basis_op(3, 0, 2) + basis_op(3, 2, 0));
    let c = DMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.5, 0.0), c64(0.5, 0.0), c64(1.0, 0.0)]);
    let bath = BathModel::new(beta, ohmic(), c, vec![0.0, 0.0]).unwrap();
    OpenSystem::new(h, vec![s1, s2], bath, lambda, 1e-9).unwrap()
}

/// Empty bath: κ = 0.
pub fn silent_qubit(beta: f64) -> OpenSystem {
    let bath = BathModel::single(beta, SpectralDensity::ohmic(1.0, 10.0, 0.0)).unwrap();
    OpenSystem::new(herm(pauli_z() * c64(0.5, 0.0)), vec![herm(pauli_x())], bath, 0.1, 1e-9).unwrap()
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
