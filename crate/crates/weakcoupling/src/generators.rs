//! Davies (secular GKSL), Lamb–Stark and Bloch–Redfield generators, and the
//! simplified renormalization recipe.
//!
//! Bath-induced terms carry an explicit factor λ². Returned Hamiltonian
//! corrections (H_LS and friends) are the bare second-order coefficients,
//! without λ².

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cumulant::second_correction_interaction;
use crate::operators::{identity, DensityMatrix, HermitianOperator, Superoperator};
use crate::system::OpenSystem;
use crate::{Error, Matrix, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Picture {
    Interaction,
    Schrodinger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorOptions {
    pub include_lamb_stark: bool,
    pub picture: Picture,
    /// Use the renormalized Hamiltonian and drop H_LS.
    pub renormalized: bool,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            include_lamb_stark: false,
            picture: Picture::Schrodinger,
            renormalized: true,
        }
    }
}

impl GeneratorOptions {
    pub fn validate(&self) -> Result<()> {
        if self.renormalized && self.include_lamb_stark {
            return Err(Error::Validation(
                "renormalized generators never include the Lamb-Stark term".into(),
            ));
        }
        Ok(())
    }
}

/// Σ_k c_k (a_k ρ b_k† − ½{b_k† a_k, ρ}) as a superoperator.
pub fn dissipator_sum<'a>(d: usize, terms: impl IntoIterator<Item = (C64, &'a Matrix, &'a Matrix)>) -> Superoperator {
    let mut jump = DMatrix::zeros(d * d, d * d);
    let mut m = DMatrix::zeros(d, d);
    for (c, a, b) in terms {
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        let bc = b.map(|z| z.conj());
        jump += bc.kronecker(a) * c;
        m += b.adjoint() * a * c;
    }
    let id = identity(d);
    let anti = (id.kronecker(&m) + m.transpose().kronecker(&id)).scale(0.5);
    Superoperator::from_matrix(d, jump - anti).expect("dimensions agree")
}

/// H_C⁽¹⁾ = Σ_i S_i ⟨R_i⟩ and H_S⁽¹⁾ = H_S⁽⁰⁾ + H_C⁽¹⁾.
pub fn centering_correction(
    h0: &HermitianOperator,
    couplings: &[HermitianOperator],
    offsets: &[f64],
) -> Result<(HermitianOperator, HermitianOperator)> {
    if couplings.len() != offsets.len() {
        return Err(Error::Validation(format!(
            "{} couplings but {} reservoir expectations",
            couplings.len(),
            offsets.len()
        )));
    }
    let mut hc = HermitianOperator::zeros(h0.dim());
    for (s, &r) in couplings.iter().zip(offsets) {
        if s.dim() != h0.dim() {
            return Err(Error::Validation("coupling dimension differs from Hamiltonian".into()));
        }
        hc = hc.add(&s.scale(r));
    }
    let h1 = h0.add(&hc);
    Ok((hc, h1))
}

/// H_LS = Σ_ω Σ_ij S_ij(ω) S_i†(ω) S_j(ω).
pub fn lamb_stark_hamiltonian(sys: &OpenSystem) -> Result<HermitianOperator> {
    let d = sys.dim();
    let n = sys.channels();
    let mut h = DMatrix::zeros(d, d);
    for f in 0..sys.jumps.len() {
        let s = sys.shift(f);
        let ops = &sys.jumps.operators[f];
        for i in 0..n {
            for j in 0..n {
                h += ops[i].adjoint() * &ops[j] * s[(i, j)];
            }
        }
    }
    HermitianOperator::new(h)
}

/// Davies generator −i[H + λ²H_LS, ·] + λ² Σ_ω Σ_ij γ_ij(ω) D[S_j(ω), S_i(ω)].
/// The −i[H, ·] part is present only in the Schrödinger picture.
pub fn davies_generator(sys: &OpenSystem, opts: &GeneratorOptions) -> Result<Superoperator> {
    opts.validate()?;
    let d = sys.dim();
    let n = sys.channels();
    let l2 = sys.lambda * sys.lambda;
    let rates: Vec<Matrix> = (0..sys.jumps.len()).map(|f| sys.gamma(f)).collect();
    let mut terms = Vec::new();
    for (f, g) in rates.iter().enumerate() {
        let ops = &sys.jumps.operators[f];
        for i in 0..n {
            for j in 0..n {
                terms.push((g[(i, j)] * l2, &ops[j], &ops[i]));
            }
        }
    }
    let mut l = dissipator_sum(d, terms);
    let mut h = DMatrix::zeros(d, d);
    if opts.picture == Picture::Schrodinger {
        h += sys.hamiltonian.matrix();
    }
    if opts.include_lamb_stark {
        h += lamb_stark_hamiltonian(sys)?.matrix() * C64::new(l2, 0.0);
    }
    if h.norm() > 0.0 {
        l = l.plus(&Superoperator::hamiltonian(&h));
    }
    Ok(l)
}

/// Interaction-picture Bloch–Redfield generator
/// λ² Σ e^{i(ω′−ω)t} (Γ⁽ᵗ⁾_ji(ω) + Γ⁽ᵗ⁾*_ij(ω′)) D[S_i(ω), S_j(ω′)].
pub fn redfield_generator(sys: &OpenSystem, t: f64) -> Result<Superoperator> {
    if !(t >= 0.0) {
        return Err(Error::Validation(format!("Redfield generator needs t >= 0, got {t}")));
    }
    let gt: Vec<Matrix> = (0..sys.jumps.len()).map(|f| sys.finite(f, t)).collect();
    Ok(redfield_from(sys, &gt, Some(t)))
}

/// Long-time Bloch–Redfield generator with Γ in place of Γ⁽ᵗ⁾. In the
/// Schrödinger picture it is time independent and includes −i[H, ·].
pub fn redfield_generator_asymptotic(sys: &OpenSystem) -> Superoperator {
    let g: Vec<Matrix> = (0..sys.jumps.len()).map(|f| sys.half(f)).collect();
    let diss = redfield_from(sys, &g, None);
    diss.plus(&Superoperator::hamiltonian(sys.hamiltonian.matrix()))
}

fn redfield_from(sys: &OpenSystem, gamma_t: &[Matrix], t: Option<f64>) -> Superoperator {
    let d = sys.dim();
    let n = sys.channels();
    let l2 = sys.lambda * sys.lambda;
    let w = &sys.jumps.frequencies;
    let mut terms = Vec::new();
    for f in 0..w.len() {
        for g in 0..w.len() {
            let phase = t.map_or(C64::new(1.0, 0.0), |t| C64::from_polar(1.0, (w[g] - w[f]) * t));
            for i in 0..n {
                for j in 0..n {
                    let c = (gamma_t[f][(j, i)] + gamma_t[g][(i, j)].conj()) * phase * l2;
                    terms.push((c, &sys.jumps.operators[f][i], &sys.jumps.operators[g][j]));
                }
            }
        }
    }
    dissipator_sum(d, terms)
}

/// Simplified renormalization: the physical Hamiltonian is H_S⁽⁰⁾ plus the
/// centering correction, and the Lamb–Stark term is dropped.
pub fn renormalize_simplified(
    h0: &HermitianOperator,
    couplings: &[HermitianOperator],
    offsets: &[f64],
    picture: Picture,
) -> Result<(HermitianOperator, GeneratorOptions)> {
    let (_, h1) = centering_correction(h0, couplings, offsets)?;
    Ok((
        h1,
        GeneratorOptions {
            include_lamb_stark: false,
            picture,
            renormalized: true,
        },
    ))
}

/// Tolerances of the adaptive Redfield integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeTolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

/// Interaction-picture Redfield trajectory dρ̃/dt = L_BR(t) ρ̃ on `times`,
/// integrated with an adaptive Dormand–Prince 5(4) scheme. Without
/// renormalization the generator also carries −iλ²[H̃_C⁽²⁾(t), ·].
pub fn evolve_redfield(
    sys: &OpenSystem,
    rho0: &DensityMatrix,
    times: &[f64],
    renormalized: bool,
    tol: OdeTolerance,
) -> Result<Vec<Matrix>> {
    if rho0.dim() != sys.dim() {
        return Err(Error::Validation("initial state dimension differs from system".into()));
    }
    let l2 = sys.lambda * sys.lambda;
    let rhs = |t: f64, x: &Matrix| -> Result<Matrix> {
        let mut l = redfield_generator(sys, t)?;
        if !renormalized {
            let hc = second_correction_interaction(sys, t)?;
            l = l.plus(&Superoperator::hamiltonian(&(hc.matrix() * C64::new(l2, 0.0))));
        }
        Ok(l.apply(x))
    };
    dopri5(rhs, rho0.matrix().clone(), times, tol)
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn dopri5(
    f: impl Fn(f64, &Matrix) -> Result<Matrix>,
    y0: Matrix,
    times: &[f64],
    tol: OdeTolerance,
) -> Result<Vec<Matrix>> {
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut y = y0;
    let mut h: f64 = 1e-3;
    for &target in times {
        if !(target >= t) {
            return Err(Error::Validation(
                "time grid must be non-negative and non-decreasing".into(),
            ));
        }
        let mut guard = 0usize;
        while t < target {
            guard += 1;
            if guard > 10_000_000 {
                return Err(Error::Numerical("Redfield integrator exceeded its step budget".into()));
            }
            let step = h.min(target - t);
            let mut k: Vec<Matrix> = Vec::with_capacity(7);
            for s in 0..7 {
                let mut ys = y.clone();
                for (a, kk) in DP_A[s].iter().zip(&k) {
                    if *a != 0.0 {
                        ys += kk * C64::new(a * step, 0.0);
                    }
                }
                k.push(f(t + DP_C[s] * step, &ys)?);
            }
            let mut y_new = y.clone();
            let mut err = Matrix::zeros(y.nrows(), y.ncols());
            for s in 0..7 {
                y_new += &k[s] * C64::new(DP_B[s] * step, 0.0);
                err += &k[s] * C64::new(DP_E[s] * step, 0.0);
            }
            let scale = tol.atol + tol.rtol * y.norm().max(y_new.norm());
            let ratio = err.norm() / scale;
            if !ratio.is_finite() {
                return Err(Error::Numerical(
                    "Redfield integrator produced non-finite values".into(),
                ));
            }
            if ratio <= 1.0 {
                t += step;
                y = y_new;
                if target - t < 1e-14 * target.max(1.0) {
                    t = target;
                }
            }
            let factor = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (step * factor).max(1e-12);
        }
        out.push(y.clone());
    }
    Ok(out)
}
