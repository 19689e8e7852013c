//! A system Hamiltonian with its couplings, bath and coupling strength,
//! plus bath transforms cached at every Bohr frequency.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bath::{BathModel, Parity, Transform};
use crate::operators::HermitianOperator;
use crate::spectral::{decompose, jump_operators, EigenDecomposition, JumpOperatorSet};
use crate::{Error, Matrix, Result, C64};

#[derive(Clone, Debug)]
struct FrequencyTransforms {
    even: Transform,
    even_d: Transform,
    odd: Option<(Transform, Transform)>,
}

#[derive(Clone, Debug)]
pub struct OpenSystem {
    /// Hamiltonian whose Bohr frequencies index the jump operators.
    pub hamiltonian: HermitianOperator,
    pub couplings: Vec<HermitianOperator>,
    pub bath: BathModel,
    pub lambda: f64,
    pub eig: EigenDecomposition,
    pub jumps: JumpOperatorSet,
    transforms: Vec<FrequencyTransforms>,
}

impl OpenSystem {
    pub fn new(
        hamiltonian: HermitianOperator,
        couplings: Vec<HermitianOperator>,
        bath: BathModel,
        lambda: f64,
        tau_deg: f64,
    ) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::Validation(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if couplings.len() != bath.count() {
            return Err(Error::Validation(format!(
                "{} coupling operators but the bath has {} channels",
                couplings.len(),
                bath.count()
            )));
        }
        let eig = decompose(&hamiltonian, tau_deg);
        let jumps = jump_operators(&eig, &couplings)?;
        let complex = bath.has_complex_coupling();
        let transforms = jumps
            .frequencies
            .par_iter()
            .map(|&w| -> Result<FrequencyTransforms> {
                let odd = if complex {
                    Some((bath.transform(w, Parity::Odd, 0)?, bath.transform(w, Parity::Odd, 1)?))
                } else {
                    None
                };
                Ok(FrequencyTransforms {
                    even: bath.transform(w, Parity::Even, 0)?,
                    even_d: bath.transform(w, Parity::Even, 1)?,
                    odd,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            hamiltonian,
            couplings,
            bath,
            lambda,
            eig,
            jumps,
            transforms,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn channels(&self) -> usize {
        self.couplings.len()
    }

    /// Same system with a different coupling strength.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    fn assemble(&self, even: C64, odd: C64) -> Matrix {
        let n = self.channels();
        DMatrix::from_fn(n, n, |i, j| {
            let c = self.bath.coupling[(i, j)];
            even * c.re + odd * C64::new(0.0, c.im)
        })
    }

    fn with<F: Fn(&Transform) -> C64>(&self, f: usize, deriv: bool, op: F) -> Matrix {
        let tr = &self.transforms[f];
        let even = op(if deriv { &tr.even_d } else { &tr.even });
        let odd = tr
            .odd
            .as_ref()
            .map_or(C64::new(0.0, 0.0), |(o, od)| op(if deriv { od } else { o }));
        self.assemble(even, odd)
    }

    /// γ_ij(ω_f).
    pub fn gamma(&self, f: usize) -> Matrix {
        let w = self.jumps.frequencies[f];
        let n = self.channels();
        DMatrix::from_fn(n, n, |i, j| self.bath.gamma_rate(i, j, w))
    }

    /// ∂_ω γ_ij(ω_f).
    pub fn gamma_derivative(&self, f: usize) -> Matrix {
        let w = self.jumps.frequencies[f];
        let n = self.channels();
        DMatrix::from_fn(n, n, |i, j| self.bath.gamma_rate_derivative(i, j, w))
    }

    /// S_ij(ω_f).
    pub fn shift(&self, f: usize) -> Matrix {
        self.with(f, false, |t| C64::new(t.shift(), 0.0))
    }

    /// ∂_ω S_ij(ω_f).
    pub fn shift_derivative(&self, f: usize) -> Matrix {
        self.with(f, true, |t| C64::new(t.shift(), 0.0))
    }

    /// Γ_ij(ω_f) = ½γ_ij + i S_ij.
    pub fn half(&self, f: usize) -> Matrix {
        self.gamma(f).scale(0.5) + self.shift(f) * C64::new(0.0, 1.0)
    }

    /// ∂_ω Γ_ij(ω_f).
    pub fn half_derivative(&self, f: usize) -> Matrix {
        self.gamma_derivative(f).scale(0.5) + self.shift_derivative(f) * C64::new(0.0, 1.0)
    }

    /// Γ⁽ᵗ⁾_ij(ω_f).
    pub fn finite(&self, f: usize, t: f64) -> Matrix {
        self.with(f, false, |tr| tr.finite(t))
    }

    /// ∂_ω Γ⁽ᵗ⁾_ij(ω_f).
    pub fn finite_derivative(&self, f: usize, t: f64) -> Matrix {
        self.with(f, true, |tr| tr.finite(t))
    }
}
