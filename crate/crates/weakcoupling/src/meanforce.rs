//! Mean-force Hamiltonian to second order and the truncated Zassenhaus
//! expansion behind it.

use nalgebra::DMatrix;

use crate::bath::BathModel;
use crate::cumulant::{second_correction, Time};
use crate::generators::centering_correction;
use crate::operators::{commutator, gibbs_state, identity, matrix_exponential, DensityMatrix, HermitianOperator};
use crate::system::OpenSystem;
use crate::{Error, Matrix, Result, C64};

const ZASSENHAUS_CAP: usize = 60;
const ZASSENHAUS_TOL: f64 = 1e-14;
/// β|ω′ − ω| below which Υ uses its coincident limit.
const COINCIDENT: f64 = 1e-6;

/// e^{A+B} ≈ [1 + Σ_{p ≤ p_max} Σ_{m_1..m_p} c(m) B_{m_p} ⋯ B_{m_1}] e^{A}
/// with B_m = ad_A^{m−1}(B)/m! and c(m) = Π_k m_k / (m_1 + … + m_k).
/// This is the expansion of e^{A+B}e^{−A} in powers of B.
pub fn zassenhaus_truncated(a: &Matrix, b: &Matrix, p_max: usize) -> Result<Matrix> {
    if !(1..=2).contains(&p_max) {
        return Err(Error::Validation(format!("p_max must be 1 or 2, got {p_max}")));
    }
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::Validation(
            "Zassenhaus operands must be square and equal-sized".into(),
        ));
    }
    let mut terms: Vec<Matrix> = Vec::new();
    let mut ad = b.clone();
    let mut fact = 1.0;
    let mut running = 0.0;
    let mut converged = false;
    for m in 1..=ZASSENHAUS_CAP {
        if m > 1 {
            ad = commutator(a, &ad);
            fact *= m as f64;
        }
        let bm = ad.scale(1.0 / fact);
        let nrm = bm.norm();
        running += nrm;
        terms.push(bm);
        if nrm <= ZASSENHAUS_TOL * running {
            converged = true;
            break;
        }
    }
    if !converged && running > 0.0 {
        return Err(Error::Numerical(format!(
            "Zassenhaus inner sum did not converge in {ZASSENHAUS_CAP} terms (|A| = {:.3e})",
            a.norm()
        )));
    }
    let d = a.nrows();
    let mut u = identity(d);
    for bm in &terms {
        u += bm;
    }
    if p_max == 2 {
        for (k1, b1) in terms.iter().enumerate() {
            let m1 = (k1 + 1) as f64;
            for (k2, b2) in terms.iter().enumerate() {
                let m2 = (k2 + 1) as f64;
                u += (b2 * b1).scale(m1 / (m1 + m2));
            }
        }
    }
    Ok(u * matrix_exponential(a)?)
}

/// H_mf,C⁽¹⁾ = Σ_i S_i ⟨R_i⟩; the centering correction.
pub fn mf_correction_1(
    h0: &HermitianOperator,
    couplings: &[HermitianOperator],
    offsets: &[f64],
) -> Result<HermitianOperator> {
    Ok(centering_correction(h0, couplings, offsets)?.0)
}

fn upsilon_formula(beta: f64, w: f64, wp: f64, s_w: C64, s_wp: C64, s_neg_wp: C64, s_neg_w: C64) -> C64 {
    let x = beta * (wp - w);
    let e = x.exp();
    (s_w * e - s_wp - (s_neg_wp - s_neg_w) * (beta * wp).exp()) / x.exp_m1()
}

fn upsilon_limit(beta: f64, w: f64, s: C64, ds: C64, ds_neg: C64) -> C64 {
    // ds_neg is S′_ji evaluated at −ω.
    s - (ds - ds_neg * (beta * w).exp()) / beta
}

/// Υ⁽²⁾_ij(ω, ω′) evaluated directly from the bath.
pub fn upsilon2(bath: &BathModel, i: usize, j: usize, w: f64, wp: f64) -> Result<C64> {
    let beta = bath.beta;
    if (beta * (wp - w)).abs() < COINCIDENT {
        return Ok(upsilon_limit(
            beta,
            w,
            bath.lamb_shift(i, j, w)?,
            bath.lamb_shift_derivative(i, j, w)?,
            bath.lamb_shift_derivative(j, i, -w)?,
        ));
    }
    Ok(upsilon_formula(
        beta,
        w,
        wp,
        bath.lamb_shift(i, j, w)?,
        bath.lamb_shift(i, j, wp)?,
        bath.lamb_shift(j, i, -wp)?,
        bath.lamb_shift(j, i, -w)?,
    ))
}

fn negative_index(sys: &OpenSystem, f: usize) -> Result<usize> {
    sys.jumps
        .negative(f)
        .ok_or_else(|| Error::Numerical("Bohr frequency set is not symmetric".into()))
}

/// Table Υ⁽²⁾_ij(ω_f, ω_g) indexed like the cumulant kernel (f·n + i, g·n + j).
pub fn upsilon2_table(sys: &OpenSystem) -> Result<Matrix> {
    let nf = sys.jumps.len();
    let n = sys.channels();
    let beta = sys.bath.beta;
    let w = &sys.jumps.frequencies;
    let s: Vec<Matrix> = (0..nf).map(|f| sys.shift(f)).collect();
    let ds: Vec<Matrix> = (0..nf).map(|f| sys.shift_derivative(f)).collect();
    let neg: Vec<usize> = (0..nf).map(|f| negative_index(sys, f)).collect::<Result<_>>()?;
    let mut table = DMatrix::zeros(nf * n, nf * n);
    for f in 0..nf {
        for g in 0..nf {
            for i in 0..n {
                for j in 0..n {
                    let v = if (beta * (w[g] - w[f])).abs() < COINCIDENT {
                        upsilon_limit(beta, w[f], s[f][(i, j)], ds[f][(i, j)], ds[neg[f]][(j, i)])
                    } else {
                        upsilon_formula(
                            beta,
                            w[f],
                            w[g],
                            s[f][(i, j)],
                            s[g][(i, j)],
                            s[neg[g]][(j, i)],
                            s[neg[f]][(j, i)],
                        )
                    };
                    table[(f * n + i, g * n + j)] = v;
                }
            }
        }
    }
    Ok(table)
}

/// H_mf,C⁽²⁾ = Σ Υ⁽²⁾_ij(ω, ω′) S_i†(ω) S_j(ω′), without λ². `sys` must be
/// built on H_S⁽¹⁾ with a centered bath.
pub fn mf_correction_2(sys: &OpenSystem) -> Result<HermitianOperator> {
    let table = upsilon2_table(sys)?;
    let nf = sys.jumps.len();
    let n = sys.channels();
    let d = sys.dim();
    let mut m = DMatrix::zeros(d, d);
    for f in 0..nf {
        for g in 0..nf {
            for i in 0..n {
                for j in 0..n {
                    m += sys.jumps.operators[f][i].adjoint()
                        * &sys.jumps.operators[g][j]
                        * table[(f * n + i, g * n + j)];
                }
            }
        }
    }
    HermitianOperator::new(m)
}

#[derive(Clone, Debug)]
pub struct MeanForceResult {
    pub h_c1: HermitianOperator,
    pub h_c2: HermitianOperator,
    /// H_S⁽⁰⁾ + λ H_mf,C⁽¹⁾ + λ² H_mf,C⁽²⁾.
    pub h_mf: HermitianOperator,
    pub gibbs: DensityMatrix,
    /// ‖[H_S⁽¹⁾, H_mf,C⁽²⁾]‖.
    pub commutator_norm: f64,
    pub upsilon: Matrix,
}

/// Second-order mean-force Hamiltonian. `sys` carries H_S⁽⁰⁾; the bath
/// offsets are applied as the first-order correction and the jump
/// operators are rebuilt on H_S⁽¹⁾.
pub fn mean_force(sys: &OpenSystem) -> Result<MeanForceResult> {
    let lambda = sys.lambda;
    let offsets: Vec<f64> = sys.bath.offsets.clone();
    let h_c1 = mf_correction_1(&sys.hamiltonian, &sys.couplings, &offsets)?;
    let h1 = sys.hamiltonian.add(&h_c1.scale(lambda));
    let sys1 = OpenSystem::new(
        h1.clone(),
        sys.couplings.clone(),
        sys.bath.clone(),
        lambda,
        sys.eig.tau_deg,
    )?;
    let h_c2 = mf_correction_2(&sys1)?;
    let upsilon = upsilon2_table(&sys1)?;
    let h_mf = h1.add(&h_c2.scale(lambda * lambda));
    let gibbs = gibbs_state(&h_mf, sys.bath.beta)?;
    let commutator_norm = commutator(h1.matrix(), h_c2.matrix()).norm();
    Ok(MeanForceResult {
        h_c1,
        h_c2,
        h_mf,
        gibbs,
        commutator_norm,
        upsilon,
    })
}

#[derive(Clone, Debug)]
pub struct Discrepancy {
    /// −(1/β) Σ_ω Σ_ij (S′_ij(ω) − e^{βω} S′_ji(−ω)) S_i†(ω) S_j(ω).
    pub closed_form: HermitianOperator,
    /// Block-diagonal part of H_mf,C⁽²⁾ − H_C⁽²⁾(∞) in the H_S⁽¹⁾ eigenbasis.
    pub direct: HermitianOperator,
}

pub fn correction_discrepancy(sys: &OpenSystem) -> Result<Discrepancy> {
    let beta = sys.bath.beta;
    let n = sys.channels();
    let d = sys.dim();
    let nf = sys.jumps.len();
    let mut m = DMatrix::zeros(d, d);
    for f in 0..nf {
        let w = sys.jumps.frequencies[f];
        let ds = sys.shift_derivative(f);
        let dsn = sys.shift_derivative(negative_index(sys, f)?);
        for i in 0..n {
            for j in 0..n {
                let c = -(ds[(i, j)] - dsn[(j, i)] * (beta * w).exp()) / beta;
                m += sys.jumps.operators[f][i].adjoint() * &sys.jumps.operators[f][j] * c;
            }
        }
    }
    let closed_form = HermitianOperator::new(m)?;
    let diff = mf_correction_2(sys)?.matrix() - second_correction(sys, Time::Infinite)?.matrix();
    let direct = HermitianOperator::new(sys.eig.block_diagonal(&diff))?;
    Ok(Discrepancy { closed_form, direct })
}
