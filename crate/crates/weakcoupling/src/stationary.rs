//! Steady states of generators, the Bloch–Redfield stationary-state
//! correction δH, and coherence diagnostics.

use nalgebra::DMatrix;

use crate::operators::{
    hermitian_eigen, to_basis, trace_distance, unvectorize, DensityMatrix, HermitianOperator, Superoperator,
};
use crate::system::OpenSystem;
use crate::{Error, Matrix, Result, C64};

/// Singular values below this fraction of the largest span the kernel.
const NULL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SteadyState {
    /// The unit-trace steady state when the kernel is one-dimensional.
    pub state: Option<DensityMatrix>,
    pub kernel_dim: usize,
    /// Kernel basis as operators.
    pub basis: Vec<Matrix>,
    /// Smallest singular value outside the kernel, relative to the largest.
    pub gap: f64,
    pub warnings: Vec<String>,
}

impl SteadyState {
    pub fn unique(&self) -> Result<&DensityMatrix> {
        self.state.as_ref().ok_or_else(|| {
            Error::Numerical(format!(
                "steady state is not unique (kernel dimension {})",
                self.kernel_dim
            ))
        })
    }
}

pub fn steady_state(l: &Superoperator) -> Result<SteadyState> {
    let d = l.dim();
    let svd = l.matrix().clone().svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let thresh = NULL_TOL * smax.max(1e-300);
    let null: Vec<usize> = order.iter().copied().take_while(|&k| sv[k] <= thresh).collect();
    let kernel_dim = null.len().max(1);
    let null = if null.is_empty() { vec![order[0]] } else { null };
    let gap = order.get(kernel_dim).map_or(0.0, |&k| sv[k] / smax);
    let basis: Vec<Matrix> = null
        .iter()
        .map(|&k| {
            let row = v_t.row(k).adjoint();
            unvectorize(&row, d)
        })
        .collect();
    let mut warnings = Vec::new();
    let state = if kernel_dim == 1 {
        let m = &basis[0];
        let tr = m.trace();
        if tr.norm() < 1e-300 {
            return Err(Error::Numerical("steady-state kernel vector is traceless".into()));
        }
        let m = m / tr;
        let m = (&m + m.adjoint()).scale(0.5);
        Some(DensityMatrix::with_tolerance(m, 1e-9, 1e-9)?)
    } else {
        warnings.push(format!(
            "generator kernel has dimension {kernel_dim}; the dynamics is not ergodic"
        ));
        None
    };
    Ok(SteadyState {
        state,
        kernel_dim,
        basis,
        gap,
        warnings,
    })
}

/// f_ij(ω,ω′) coefficients of δH for ω ≠ ω′, using
/// γ^BR_ij(ω,ω′) = Γ_ji(ω) + Γ*_ij(ω′).
pub fn redfield_delta_h(sys: &OpenSystem) -> Result<HermitianOperator> {
    let nf = sys.jumps.len();
    let n = sys.channels();
    let d = sys.dim();
    let beta = sys.bath.beta;
    let w = &sys.jumps.frequencies;
    let half: Vec<Matrix> = (0..nf).map(|f| sys.half(f)).collect();
    let gbr = |f: usize, g: usize, i: usize, j: usize| half[f][(j, i)] + half[g][(i, j)].conj();
    let neg: Vec<usize> = (0..nf)
        .map(|f| {
            sys.jumps
                .negative(f)
                .ok_or_else(|| Error::Numerical("asymmetric Bohr set".into()))
        })
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(d, d);
    for f in 0..nf {
        for g in 0..nf {
            if f == g {
                continue;
            }
            let x = beta * (w[g] - w[f]);
            for i in 0..n {
                for j in 0..n {
                    let c = gbr(neg[g], neg[f], j, i) * (beta * w[g]).exp()
                        - gbr(f, g, i, j) * 0.5 * ((beta * (w[g] - w[f])).exp() + 1.0);
                    let coef = C64::new(0.0, 1.0) * c / x.exp_m1();
                    m += sys.jumps.operators[g][j].adjoint() * &sys.jumps.operators[f][i] * coef;
                }
            }
        }
    }
    HermitianOperator::new(m)
}

/// e^{−β(H + λ² δH)}/Z for the system Hamiltonian of `sys`.
pub fn redfield_candidate(sys: &OpenSystem) -> Result<DensityMatrix> {
    let dh = redfield_delta_h(sys)?;
    let l2 = sys.lambda * sys.lambda;
    crate::operators::gibbs_state(&sys.hamiltonian.add(&dh.scale(l2)), sys.bath.beta)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceReport {
    /// Σ_{k≠l} |ρ_kl| in the eigenbasis of the reference Hamiltonian.
    pub coherence: f64,
    /// Diagonal of ρ in that basis, ascending energy.
    pub populations: Vec<f64>,
}

pub fn coherence_report(rho: &Matrix, h: &HermitianOperator) -> CoherenceReport {
    let (_, v) = hermitian_eigen(h.matrix());
    let r = to_basis(rho, &v);
    let d = r.nrows();
    let mut coherence = 0.0;
    for k in 0..d {
        for l in 0..d {
            if k != l {
                coherence += r[(k, l)].norm();
            }
        }
    }
    CoherenceReport {
        coherence,
        populations: (0..d).map(|k| r[(k, k)].re).collect(),
    }
}

#[derive(Clone, Debug)]
pub struct SteadyStateReport {
    pub steady: DensityMatrix,
    pub reference: DensityMatrix,
    pub trace_distance: f64,
    /// max |p_k − q_k| over populations in the eigenbasis of `basis`.
    pub population_distance: f64,
    pub coherence: f64,
    pub basis: String,
}

/// Compares a steady state with a reference state in the eigenbasis of `h`.
pub fn compare_states(
    steady: &DensityMatrix,
    reference: &DensityMatrix,
    h: &HermitianOperator,
    basis: &str,
) -> SteadyStateReport {
    let a = coherence_report(steady.matrix(), h);
    let b = coherence_report(reference.matrix(), h);
    let population_distance = a
        .populations
        .iter()
        .zip(&b.populations)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    SteadyStateReport {
        steady: steady.clone(),
        reference: reference.clone(),
        trace_distance: trace_distance(steady.matrix(), reference.matrix()),
        population_distance,
        coherence: a.coherence,
        basis: basis.to_string(),
    }
}
