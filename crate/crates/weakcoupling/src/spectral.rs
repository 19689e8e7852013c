//! Eigenstructure of a system Hamiltonian: merged energy levels, Bohr
//! frequencies and the jump operators S_i(ω) = Σ_{ε′−ε=ω} Π(ε) S_i Π(ε′).

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::operators::{commutator, HermitianOperator};
use crate::{Error, Matrix, Result, C64};

pub const DEFAULT_TAU_DEG: f64 = 1e-9;

/// Relative norm below which a jump operator counts as absent.
const ZERO_JUMP: f64 = 1e-14;
/// Relative norm of S_i(0) above which a warning is emitted.
const DIAGONAL_WARN: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Merged level energies, ascending.
    pub energies: Vec<f64>,
    /// Orthogonal projectors onto the merged eigenspaces.
    pub projectors: Vec<Matrix>,
    pub tau_deg: f64,
    hamiltonian: Matrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &Matrix {
        &self.hamiltonian
    }

    /// Absolute merge tolerance τ_deg·(ε_max − ε_min).
    pub fn tolerance(&self) -> f64 {
        let spread = self.energies.last().unwrap_or(&0.0) - self.energies.first().unwrap_or(&0.0);
        self.tau_deg * spread
    }

    /// Σ_ε Π(ε) X Π(ε): the block-diagonal part of X in this eigenbasis.
    pub fn block_diagonal(&self, x: &Matrix) -> Matrix {
        self.projectors
            .iter()
            .map(|p| p * x * p)
            .fold(DMatrix::zeros(x.nrows(), x.ncols()), |a, b| a + b)
    }
}

pub fn decompose(h: &HermitianOperator, tau_deg: f64) -> EigenDecomposition {
    let (values, vectors) = h.eigh();
    let d = h.dim();
    let spread = values[d - 1] - values[0];
    let tol = tau_deg * spread;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..d {
        match groups.last_mut() {
            Some(g) if values[k] - values[g[0]] <= tol => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    let mut energies = Vec::with_capacity(groups.len());
    let mut projectors = Vec::with_capacity(groups.len());
    for g in &groups {
        energies.push(g.iter().map(|&k| values[k]).sum::<f64>() / g.len() as f64);
        let mut p = DMatrix::zeros(d, d);
        for &k in g {
            let v = vectors.column(k);
            p += &v * v.adjoint();
        }
        projectors.push(p);
    }
    EigenDecomposition {
        energies,
        projectors,
        tau_deg,
        hamiltonian: h.matrix().clone(),
    }
}

#[derive(Clone, Debug)]
pub struct JumpOperatorSet {
    /// Bohr frequencies, ascending; ω and −ω are exact negatives.
    pub frequencies: Vec<f64>,
    /// operators[f][i] = S_i(frequencies[f]).
    pub operators: Vec<Vec<Matrix>>,
    pub warnings: Vec<String>,
}

impl JumpOperatorSet {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn coupling_count(&self) -> usize {
        self.operators.first().map_or(0, |v| v.len())
    }

    pub fn dim(&self) -> usize {
        self.operators.first().and_then(|v| v.first()).map_or(0, |m| m.nrows())
    }

    /// Index of −ω for the frequency at index f.
    pub fn negative(&self, f: usize) -> Option<usize> {
        let w = -self.frequencies[f];
        self.frequencies.iter().position(|&x| x == w)
    }

    /// Σ_ω e^{−iωt} S_i(ω): the coupling operator in the interaction picture.
    pub fn interaction_picture(&self, i: usize, t: f64) -> Matrix {
        let d = self.dim();
        self.frequencies
            .iter()
            .zip(&self.operators)
            .fold(DMatrix::zeros(d, d), |acc, (&w, ops)| {
                acc + &ops[i] * C64::from_polar(1.0, -w * t)
            })
    }
}

pub fn jump_operators(eig: &EigenDecomposition, couplings: &[HermitianOperator]) -> Result<JumpOperatorSet> {
    let d = eig.dim();
    if couplings.is_empty() {
        return Err(Error::Validation("at least one coupling operator is required".into()));
    }
    if let Some(s) = couplings.iter().find(|s| s.dim() != d) {
        return Err(Error::Validation(format!(
            "coupling operator has dimension {}, Hamiltonian has {d}",
            s.dim()
        )));
    }
    let levels = eig.energies.len();
    let tol = eig.tolerance();

    // Cluster positive level differences; the set of Bohr frequencies is
    // {−c, 0, +c} over cluster representatives c.
    let mut diffs: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..levels {
        for b in 0..levels {
            let w = eig.energies[b] - eig.energies[a];
            if w > 0.0 {
                diffs.push((w, a, b));
            }
        }
    }
    diffs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut clusters: Vec<Vec<(f64, usize, usize)>> = Vec::new();
    for item in diffs {
        match clusters.last_mut() {
            Some(c) if item.0 - c[0].0 <= tol => c.push(item),
            _ => clusters.push(vec![item]),
        }
    }

    let blocks = |pairs: &[(usize, usize)]| -> Vec<Matrix> {
        couplings
            .par_iter()
            .map(|s| {
                pairs.iter().fold(DMatrix::zeros(d, d), |acc, &(a, b)| {
                    acc + &eig.projectors[a] * s.matrix() * &eig.projectors[b]
                })
            })
            .collect()
    };
    let smax = couplings.iter().map(|s| s.norm()).fold(0.0, f64::max);
    let present = |ops: &[Matrix]| ops.iter().any(|m| m.norm() > ZERO_JUMP * smax);

    let mut entries: Vec<(f64, Vec<Matrix>)> = Vec::new();
    for c in &clusters {
        let w = c.iter().map(|x| x.0).sum::<f64>() / c.len() as f64;
        // S(ω) with ε′ − ε = ω: left projector on the lower level.
        let pos: Vec<(usize, usize)> = c.iter().map(|&(_, a, b)| (a, b)).collect();
        let ops = blocks(&pos);
        if present(&ops) {
            let neg: Vec<Matrix> = ops.iter().map(|m| m.adjoint()).collect();
            entries.push((w, ops));
            entries.push((-w, neg));
        }
    }

    let mut warnings = Vec::new();
    let diag: Vec<(usize, usize)> = (0..levels).map(|a| (a, a)).collect();
    let zero = blocks(&diag);
    for (i, (m, s)) in zero.iter().zip(couplings).enumerate() {
        if m.norm() > DIAGONAL_WARN * s.norm() {
            warnings.push(format!(
                "coupling {i} has a component commuting with H (|S_{i}(0)| = {:.3e}); \
                 the theory assumes it vanishes",
                m.norm()
            ));
        }
    }
    if present(&zero) {
        entries.push((0.0, zero));
    }
    entries.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (frequencies, operators) = entries.into_iter().unzip();
    Ok(JumpOperatorSet {
        frequencies,
        operators,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenoperatorResiduals {
    /// max ‖[H, S_i(ω)] + ω S_i(ω)‖
    pub first_kind: f64,
    /// max ‖[H, S_i†(ω) S_j(ω′)] − (ω − ω′) S_i†(ω) S_j(ω′)‖
    pub second_kind: f64,
    /// max_i ‖Σ_ω S_i(ω) − S_i‖
    pub completeness: f64,
    /// max ‖S_i(−ω) − S_i(ω)†‖
    pub conjugation: f64,
}

impl EigenoperatorResiduals {
    pub fn max(&self) -> f64 {
        self.first_kind
            .max(self.second_kind)
            .max(self.completeness)
            .max(self.conjugation)
    }
}

pub fn verify_eigenoperator(
    eig: &EigenDecomposition,
    jset: &JumpOperatorSet,
    couplings: &[HermitianOperator],
) -> EigenoperatorResiduals {
    let h = eig.hamiltonian();
    let n = jset.coupling_count();
    let mut first: f64 = 0.0;
    for (w, ops) in jset.frequencies.iter().zip(&jset.operators) {
        for s in ops {
            first = first.max((commutator(h, s) + s * C64::new(*w, 0.0)).norm());
        }
    }
    let pairs: Vec<(usize, usize)> = (0..jset.len())
        .flat_map(|a| (0..jset.len()).map(move |b| (a, b)))
        .collect();
    let second = pairs
        .par_iter()
        .map(|&(a, b)| {
            let dw = jset.frequencies[a] - jset.frequencies[b];
            let mut r: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let x = jset.operators[a][i].adjoint() * &jset.operators[b][j];
                    r = r.max((commutator(h, &x) - &x * C64::new(dw, 0.0)).norm());
                }
            }
            r
        })
        .reduce(|| 0.0, f64::max);
    let mut completeness: f64 = 0.0;
    for (i, s) in couplings.iter().enumerate().take(n) {
        let sum = jset
            .operators
            .iter()
            .fold(DMatrix::zeros(s.dim(), s.dim()), |acc, ops| acc + &ops[i]);
        completeness = completeness.max((sum - s.matrix()).norm());
    }
    let mut conjugation: f64 = 0.0;
    for f in 0..jset.len() {
        match jset.negative(f) {
            Some(g) => {
                for i in 0..n {
                    conjugation = conjugation.max((&jset.operators[g][i] - jset.operators[f][i].adjoint()).norm());
                }
            }
            None => conjugation = f64::INFINITY,
        }
    }
    EigenoperatorResiduals {
        first_kind: first,
        second_kind: second,
        completeness,
        conjugation,
    }
}
