//! Dense complex linear algebra: Hermitian operators, density matrices,
//! superoperators in column-major vectorization, and channel tests.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Matrix, Result, C64};

const HERMITIAN_TOL: f64 = 1e-12;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> Matrix {
    DMatrix::identity(d, d)
}

pub fn dagger(m: &Matrix) -> Matrix {
    m.adjoint()
}

pub fn commutator(a: &Matrix, b: &Matrix) -> Matrix {
    a * b - b * a
}

pub fn anticommutator(a: &Matrix, b: &Matrix) -> Matrix {
    a * b + b * a
}

/// Frobenius norm.
pub fn norm(m: &Matrix) -> f64 {
    m.norm()
}

pub fn trace(m: &Matrix) -> C64 {
    m.trace()
}

pub fn hermitian_defect(m: &Matrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// Eigenvalues in ascending order with the matching eigenvectors as columns.
/// The input is symmetrized before decomposition.
pub fn hermitian_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &Matrix) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut v: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Trace distance ½‖a − b‖₁ of two Hermitian matrices.
pub fn trace_distance(a: &Matrix, b: &Matrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

/// Conjugate `m` into the basis given by the columns of `v`: v† m v.
pub fn to_basis(m: &Matrix, v: &Matrix) -> Matrix {
    v.adjoint() * m * v
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: Matrix,
}

impl HermitianOperator {
    /// Symmetrizes when the defect is roundoff-sized, rejects otherwise.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Validation(format!(
                "operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("operator has non-finite entries".into()));
        }
        let defect = hermitian_defect(&m);
        let scale = m.norm().max(1e-300);
        if defect > HERMITIAN_TOL * scale && defect > 1e-14 {
            return Err(Error::Validation(format!(
                "operator is not Hermitian (defect {defect:.3e}, norm {scale:.3e})"
            )));
        }
        Ok(Self {
            m: (&m + m.adjoint()).scale(0.5),
        })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            m: DMatrix::zeros(d, d),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| c64(x, 0.0)));
        Self {
            m: DMatrix::from_diagonal(&v),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix {
        self.m
    }

    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn eigh(&self) -> (Vec<f64>, Matrix) {
        hermitian_eigen(&self.m)
    }

    pub fn add(&self, other: &HermitianOperator) -> HermitianOperator {
        HermitianOperator { m: &self.m + &other.m }
    }

    pub fn scale(&self, s: f64) -> HermitianOperator {
        HermitianOperator { m: self.m.scale(s) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: Matrix,
}

impl DensityMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        Self::with_tolerance(m, 1e-12, 1e-10)
    }

    /// `tol` bounds the trace and Hermiticity defects, `neg_tol` the most
    /// negative admissible eigenvalue.
    pub fn with_tolerance(m: Matrix, tol: f64, neg_tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Validation("density matrix must be square".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("density matrix has non-finite entries".into()));
        }
        let tr = m.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::Validation(format!("density matrix trace {tr} differs from 1")));
        }
        if hermitian_defect(&m) > tol {
            return Err(Error::Validation("density matrix is not Hermitian".into()));
        }
        let h = (&m + m.adjoint()).scale(0.5);
        let min = hermitian_eigenvalues(&h)[0];
        if min < -neg_tol {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { m: h })
    }

    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::Validation("zero state vector".into()));
        }
        let v = psi / C64::new(n, 0.0);
        Self::new(&v * v.adjoint())
    }

    pub fn basis_state(d: usize, k: usize) -> Self {
        let mut m = DMatrix::zeros(d, d);
        m[(k, k)] = c64(1.0, 0.0);
        Self { m }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            m: identity(d).scale(1.0 / d as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix {
        self.m
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.m)[0]
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        trace_distance(&self.m, &other.m)
    }
}

/// Column-major vectorization: entry (k, l) goes to index k + d·l.
pub fn vectorize(m: &Matrix) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &DVector<C64>, d: usize) -> Matrix {
    DMatrix::from_column_slice(d, d, v.as_slice())
}

/// Linear map on d×d operators, stored as a d²×d² matrix acting on
/// column-major vectorizations.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    m: Matrix,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, m: Matrix) -> Result<Self> {
        if m.nrows() != dim * dim || m.ncols() != dim * dim {
            return Err(Error::Validation("superoperator shape mismatch".into()));
        }
        Ok(Self { dim, m })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            m: DMatrix::zeros(dim * dim, dim * dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            m: identity(dim * dim),
        }
    }

    /// ρ ↦ a ρ b, using vec(AXB) = (Bᵀ ⊗ A) vec(X).
    pub fn sandwich(a: &Matrix, b: &Matrix) -> Self {
        Self {
            dim: a.nrows(),
            m: b.transpose().kronecker(a),
        }
    }

    pub fn left(a: &Matrix) -> Self {
        Self {
            dim: a.nrows(),
            m: identity(a.nrows()).kronecker(a),
        }
    }

    pub fn right(b: &Matrix) -> Self {
        Self {
            dim: b.nrows(),
            m: b.transpose().kronecker(&identity(b.nrows())),
        }
    }

    /// ρ ↦ −i[h, ρ].
    pub fn hamiltonian(h: &Matrix) -> Self {
        let d = h.nrows();
        let id = identity(d);
        let m = id.kronecker(h) - h.transpose().kronecker(&id);
        Self {
            dim: d,
            m: m * c64(0.0, -1.0),
        }
    }

    /// ρ ↦ a ρ b† − ½{b† a, ρ}.
    pub fn dissipator(a: &Matrix, b: &Matrix) -> Self {
        let d = a.nrows();
        let id = identity(d);
        let bd = b.adjoint();
        let ba = &bd * a;
        let m = bd.transpose().kronecker(a) - (id.kronecker(&ba) + ba.transpose().kronecker(&id)).scale(0.5);
        Self { dim: d, m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix {
        self.m
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        unvectorize(&(&self.m * vectorize(x)), self.dim)
    }

    pub fn add_scaled(&mut self, other: &Superoperator, s: C64) {
        self.m += &other.m * s;
    }

    pub fn scaled(&self, s: C64) -> Superoperator {
        Superoperator {
            dim: self.dim,
            m: &self.m * s,
        }
    }

    pub fn plus(&self, other: &Superoperator) -> Superoperator {
        Superoperator {
            dim: self.dim,
            m: &self.m + &other.m,
        }
    }

    pub fn minus(&self, other: &Superoperator) -> Superoperator {
        Superoperator {
            dim: self.dim,
            m: &self.m - &other.m,
        }
    }

    /// Composition self ∘ other.
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator {
            dim: self.dim,
            m: &self.m * &other.m,
        }
    }

    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn exp(&self) -> Result<Superoperator> {
        Ok(Superoperator {
            dim: self.dim,
            m: matrix_exponential(&self.m)?,
        })
    }
}

/// Gibbs state e^{−βH}/Z through the eigendecomposition of H, with energies
/// shifted by the ground energy before exponentiation.
pub fn gibbs_state(h: &HermitianOperator, beta: f64) -> Result<DensityMatrix> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Validation(format!(
            "beta must be finite and positive, got {beta}"
        )));
    }
    let (e, v) = h.eigh();
    let e0 = e[0];
    let w: Vec<f64> = e.iter().map(|&x| (-beta * (x - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    let d = h.dim();
    let mut m = DMatrix::zeros(d, d);
    for (k, wk) in w.iter().enumerate() {
        let col = v.column(k);
        m += (&col * col.adjoint()) * c64(wk / z, 0.0);
    }
    let m = (&m + m.adjoint()).scale(0.5);
    let tr = m.trace().re;
    DensityMatrix::new(m.scale(1.0 / tr))
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn matrix_exponential(a: &Matrix) -> Result<Matrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::Validation("matrix exponential needs a square matrix".into()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("matrix exponential of non-finite matrix".into()));
    }
    if a.nrows() == 0 {
        return Ok(a.clone());
    }
    let e = a.exp();
    if e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("matrix exponential overflowed".into()));
    }
    Ok(e)
}

/// Tr_B of an operator on C^{d_A} ⊗ C^{d_B} (A is the slow index).
pub fn partial_trace_second(rho: &Matrix, da: usize, db: usize) -> Result<Matrix> {
    if rho.nrows() != da * db || rho.ncols() != da * db {
        return Err(Error::Validation(format!(
            "partial trace: operator is {}x{}, expected {}",
            rho.nrows(),
            rho.ncols(),
            da * db
        )));
    }
    Ok(DMatrix::from_fn(da, da, |a, b| {
        (0..db).map(|k| rho[(a * db + k, b * db + k)]).sum()
    }))
}

/// C = Σ_{kl} W(|k⟩⟨l|) ⊗ |k⟩⟨l|.
pub fn choi_matrix(w: &Superoperator) -> Matrix {
    let d = w.dim();
    let mut c = DMatrix::zeros(d * d, d * d);
    for l in 0..d {
        for k in 0..d {
            let col = w.matrix().column(k + d * l);
            for b in 0..d {
                for a in 0..d {
                    c[(a * d + k, b * d + l)] = col[a + d * b];
                }
            }
        }
    }
    c
}

#[derive(Clone, Debug, PartialEq)]
pub struct CptpReport {
    pub min_choi_eig: f64,
    pub trace_defect: f64,
    pub passed: bool,
}

pub fn is_cptp(w: &Superoperator, tol: f64) -> CptpReport {
    let d = w.dim();
    let min_choi_eig = hermitian_eigenvalues(&choi_matrix(w))[0];
    let mut trace_defect: f64 = 0.0;
    for l in 0..d {
        for k in 0..d {
            let col = w.matrix().column(k + d * l);
            let tr: C64 = (0..d).map(|a| col[a + d * a]).sum();
            let expected = if k == l { 1.0 } else { 0.0 };
            trace_defect = trace_defect.max((tr - c64(expected, 0.0)).norm());
        }
    }
    CptpReport {
        min_choi_eig,
        trace_defect,
        passed: min_choi_eig >= -tol * d as f64 && trace_defect <= tol,
    }
}

pub fn pauli_x() -> Matrix {
    DMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
}

pub fn pauli_y() -> Matrix {
    DMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(0., -1.), c64(0., 1.), c64(0., 0.)])
}

pub fn pauli_z() -> Matrix {
    DMatrix::from_row_slice(2, 2, &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(-1., 0.)])
}
