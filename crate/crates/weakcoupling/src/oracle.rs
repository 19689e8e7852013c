//! Brute-force reference: the system coupled to a few truncated harmonic
//! oscillators.
//!
//! Dynamics is propagated in the interaction picture of the free bath
//! Hamiltonian, where the state obeys
//! H̃(t) = (H_S + c(t)) ⊗ I + λ S ⊗ B̃(t), B̃(t) = Σ_k (ḡ_k e^{−iω_k t} b_k + h.c.).
//! The reduced state is unchanged by that rotation. Each pure component of
//! ρ_S(0) ⊗ ρ_R is stepped with a fourth-order Magnus integrator whose
//! exponential is applied by a truncated Taylor series, so no total-space
//! matrix is ever formed.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bath::SpectralDensity;
use crate::operators::{c64, hermitian_eigen, DensityMatrix, HermitianOperator};
use crate::{Error, Matrix, Result, C64};

/// Largest total dimension for dense paths.
pub const DENSE_LIMIT: usize = 4096;
/// Largest total dimension for matrix-free propagation.
pub const SPARSE_LIMIT: usize = 1 << 20;
/// Fock-edge population above which a truncation warning is issued.
pub const EDGE_WARNING: f64 = 1e-6;
/// Thermal configurations lighter than this are dropped.
const THERMAL_CUTOFF: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedBath {
    pub frequencies: Vec<f64>,
    pub couplings: Vec<C64>,
    pub n_max: usize,
    /// Constant added to the bath operator, B + r.
    pub offset: f64,
}

impl TruncatedBath {
    pub fn new(frequencies: Vec<f64>, couplings: Vec<C64>, n_max: usize) -> Result<Self> {
        if frequencies.is_empty() || frequencies.len() != couplings.len() {
            return Err(Error::Validation("truncated bath needs one coupling per mode".into()));
        }
        if frequencies.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Validation("mode frequencies must be > 0".into()));
        }
        if n_max == 0 {
            return Err(Error::Validation("n_max must be >= 1".into()));
        }
        Ok(Self {
            frequencies,
            couplings,
            n_max,
            offset: 0.0,
        })
    }

    pub fn modes(&self) -> usize {
        self.frequencies.len()
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1).pow(self.modes() as u32)
    }

    /// The same oscillators as a line spectral density, |g_k|² per line.
    pub fn spectral_density(&self) -> SpectralDensity {
        SpectralDensity::Discrete {
            modes: self.frequencies.clone(),
            weights: self.couplings.iter().map(|g| g.norm_sqr()).collect(),
        }
    }

    /// Recurrence time 2π/Δω of an equidistant grid.
    pub fn recurrence_time(&self) -> f64 {
        let m = self.modes();
        if m < 2 {
            return f64::INFINITY;
        }
        2.0 * std::f64::consts::PI / (self.frequencies[1] - self.frequencies[0])
    }

    /// Σ_k |g_k|² [(N_k + 1) e^{−iω_k τ} + N_k e^{iω_k τ}].
    pub fn correlation(&self, beta: f64, tau: f64) -> C64 {
        self.frequencies
            .iter()
            .zip(&self.couplings)
            .map(|(&w, g)| {
                let n = 1.0 / (beta * w).exp_m1();
                (C64::from_polar(n + 1.0, -w * tau) + C64::from_polar(n, w * tau)) * g.norm_sqr()
            })
            .sum()
    }

    fn stride(&self, k: usize) -> usize {
        (self.n_max + 1).pow(k as u32)
    }

    fn occupation(&self, r: usize, k: usize) -> usize {
        (r / self.stride(k)) % (self.n_max + 1)
    }

    /// Product of truncated Boltzmann weights for every Fock configuration.
    fn thermal_weights(&self, beta: f64) -> Vec<f64> {
        let per_mode: Vec<Vec<f64>> = self
            .frequencies
            .iter()
            .map(|&w| {
                let p: Vec<f64> = (0..=self.n_max).map(|n| (-beta * w * n as f64).exp()).collect();
                let z: f64 = p.iter().sum();
                p.into_iter().map(|x| x / z).collect()
            })
            .collect();
        (0..self.dim())
            .map(|r| (0..self.modes()).map(|k| per_mode[k][self.occupation(r, k)]).product())
            .collect()
    }

    /// out += (B̃(t) + r) v on the bath factor, for one system row block.
    fn apply_b(&self, t: f64, v: &[C64], out: &mut [C64]) {
        let dim = self.dim();
        for k in 0..self.modes() {
            let stride = self.stride(k);
            let g = self.couplings[k];
            let down = g.conj() * C64::from_polar(1.0, -self.frequencies[k] * t);
            let up = g * C64::from_polar(1.0, self.frequencies[k] * t);
            for r in 0..dim {
                let n = self.occupation(r, k);
                if n > 0 {
                    // b|n⟩ = √n|n−1⟩ and b†|n−1⟩ = √n|n⟩.
                    let s = (n as f64).sqrt();
                    out[r - stride] += down * s * v[r];
                    out[r] += up * s * v[r - stride];
                }
            }
        }
        if self.offset != 0.0 {
            for r in 0..dim {
                out[r] += v[r] * self.offset;
            }
        }
    }

    /// Σ_k ω_k n_k on the Fock basis.
    fn free_energy(&self, r: usize) -> f64 {
        (0..self.modes())
            .map(|k| self.frequencies[k] * self.occupation(r, k) as f64)
            .sum()
    }
}

/// Equidistant midpoint modes ω_k = (k − ½)Δω on (0, ω_max] with
/// |g_k|² = J(ω_k)Δω/2π and real couplings.
pub fn discretize_bath(spectral: &SpectralDensity, m: usize, omega_max: f64, n_max: usize) -> Result<TruncatedBath> {
    if m == 0 {
        return Err(Error::Validation("mode count must be >= 1".into()));
    }
    if !(omega_max.is_finite() && omega_max > 0.0) {
        return Err(Error::Validation(format!("omega_max must be > 0, got {omega_max}")));
    }
    if spectral.is_discrete() {
        return Err(Error::Validation(
            "a discrete spectral density is already a mode set".into(),
        ));
    }
    spectral.validate()?;
    let dw = omega_max / m as f64;
    let freqs: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) * dw).collect();
    let g = freqs
        .iter()
        .map(|&w| c64((spectral.j(w) * dw / (2.0 * std::f64::consts::PI)).sqrt(), 0.0))
        .collect();
    TruncatedBath::new(freqs, g, n_max)
}

/// A system Hamiltonian, one coupling operator and a truncated bath.
#[derive(Clone, Debug)]
pub struct OracleModel {
    pub h_s: HermitianOperator,
    pub coupling: HermitianOperator,
    pub bath: TruncatedBath,
    pub lambda: f64,
}

impl OracleModel {
    pub fn new(h_s: HermitianOperator, coupling: HermitianOperator, bath: TruncatedBath, lambda: f64) -> Result<Self> {
        if h_s.dim() != coupling.dim() {
            return Err(Error::Validation("coupling dimension differs from Hamiltonian".into()));
        }
        if !lambda.is_finite() {
            return Err(Error::Validation("lambda must be finite".into()));
        }
        let total = h_s.dim().checked_mul(bath.dim()).unwrap_or(usize::MAX);
        if total > SPARSE_LIMIT {
            return Err(Error::Validation(format!(
                "oracle dimension {total} exceeds {SPARSE_LIMIT}"
            )));
        }
        Ok(Self {
            h_s,
            coupling,
            bath,
            lambda,
        })
    }

    pub fn system_dim(&self) -> usize {
        self.h_s.dim()
    }

    pub fn dim(&self) -> usize {
        self.system_dim() * self.bath.dim()
    }

    /// H_S ⊗ I + I ⊗ Σ ω_k b_k†b_k + λ S ⊗ (B + r), system index major.
    pub fn total_hamiltonian(&self) -> Result<HermitianOperator> {
        let d = self.dim();
        if d > DENSE_LIMIT {
            return Err(Error::Validation(format!(
                "dense oracle dimension {d} exceeds {DENSE_LIMIT}"
            )));
        }
        let ds = self.system_dim();
        let dr = self.bath.dim();
        let mut b = DMatrix::zeros(dr, dr);
        for c in 0..dr {
            let mut e = vec![c64(0.0, 0.0); dr];
            e[c] = c64(1.0, 0.0);
            let mut col = vec![c64(0.0, 0.0); dr];
            self.bath.apply_b(0.0, &e, &mut col);
            for r in 0..dr {
                b[(r, c)] = col[r];
            }
        }
        let hr = DMatrix::from_diagonal(&DVector::from_fn(dr, |r, _| c64(self.bath.free_energy(r), 0.0)));
        let id_r = DMatrix::<C64>::identity(dr, dr);
        let id_s = DMatrix::<C64>::identity(ds, ds);
        let h = self.h_s.matrix().kronecker(&id_r)
            + id_s.kronecker(&hr)
            + self.coupling.matrix().kronecker(&b) * c64(self.lambda, 0.0);
        HermitianOperator::new(h)
    }

    /// y = H̃(t) v with the extra system term `c`.
    fn apply(&self, t: f64, hs: &Matrix, v: &[C64], y: &mut [C64], scratch: &mut [C64]) {
        let ds = self.system_dim();
        let dr = self.bath.dim();
        y.iter_mut().for_each(|z| *z = c64(0.0, 0.0));
        for a in 0..ds {
            for b in 0..ds {
                let h = hs[(a, b)];
                if h != c64(0.0, 0.0) {
                    let (ya, vb) = (a * dr, b * dr);
                    for r in 0..dr {
                        y[ya + r] += h * v[vb + r];
                    }
                }
            }
        }
        if self.lambda == 0.0 {
            return;
        }
        let s = self.coupling.matrix();
        for b in 0..ds {
            scratch.iter_mut().for_each(|z| *z = c64(0.0, 0.0));
            self.bath.apply_b(t, &v[b * dr..(b + 1) * dr], scratch);
            for a in 0..ds {
                let c = s[(a, b)] * self.lambda;
                if c != c64(0.0, 0.0) {
                    for r in 0..dr {
                        y[a * dr + r] += c * scratch[r];
                    }
                }
            }
        }
    }

    fn norm_bound(&self) -> f64 {
        let gsum: f64 = self.bath.couplings.iter().map(|g| g.norm()).sum();
        self.h_s.norm()
            + self.lambda.abs()
                * self.coupling.norm()
                * (2.0 * gsum * (self.bath.n_max as f64).sqrt() + self.bath.offset.abs())
    }
}

/// Extra system Hamiltonian c(t), e.g. a second-order counterterm.
pub type SystemDrive<'a> = &'a (dyn Fn(f64) -> Result<Matrix> + Sync);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationOptions {
    /// Upper bound on ω_top·h, where ω_top is the fastest bath frequency.
    pub phase_step: f64,
    /// Upper bound on the step itself.
    pub max_step: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            phase_step: 0.1,
            max_step: 0.01,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleTrajectory {
    pub times: Vec<f64>,
    /// Reduced states in the Schrödinger picture.
    pub states: Vec<Matrix>,
    /// Largest weight found on any n = n_max Fock level.
    pub edge_population: f64,
    /// Thermal weight of configurations left out of the initial mixture.
    pub dropped_weight: f64,
    pub warnings: Vec<String>,
}

struct Step {
    t0: f64,
    h: f64,
    record: Option<usize>,
}

/// Magnus steps covering `times`, recording after the last step to each.
fn schedule(times: &[f64], h_max: f64) -> Result<Vec<Step>> {
    let mut steps = Vec::new();
    let mut t = 0.0;
    for (idx, &target) in times.iter().enumerate() {
        if !(target.is_finite() && target >= t) {
            return Err(Error::Validation(
                "oracle time grid must be non-negative and non-decreasing".into(),
            ));
        }
        let n = ((target - t) / h_max).ceil() as usize;
        if n == 0 {
            steps.push(Step {
                t0: t,
                h: 0.0,
                record: Some(idx),
            });
            continue;
        }
        let h = (target - t) / n as f64;
        for k in 0..n {
            steps.push(Step {
                t0: t + k as f64 * h,
                h,
                record: (k + 1 == n).then_some(idx),
            });
        }
        t = target;
    }
    Ok(steps)
}

/// ρ_S(t) = Tr_R[U(t) ρ_S(0) ⊗ ρ_R U†(t)] for the thermal truncated bath.
pub fn exact_reduced_evolution(
    model: &OracleModel,
    rho_s0: &DensityMatrix,
    beta: f64,
    times: &[f64],
    drive: Option<SystemDrive<'_>>,
    opts: &PropagationOptions,
) -> Result<OracleTrajectory> {
    if rho_s0.dim() != model.system_dim() {
        return Err(Error::Validation("initial state dimension differs from system".into()));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Validation(format!("beta must be > 0, got {beta}")));
    }
    if !(opts.phase_step > 0.0 && opts.max_step > 0.0) {
        return Err(Error::Validation("propagation steps must be > 0".into()));
    }
    let top = model.bath.frequencies.iter().cloned().fold(0.0, f64::max);
    let h_max = opts.max_step.min(opts.phase_step / top.max(1e-300));
    let steps = schedule(times, h_max)?;

    // Gauss nodes of each step and the system Hamiltonian there.
    let root = 3f64.sqrt() / 6.0;
    let hs_at = |t: f64| -> Result<Matrix> {
        let mut h = model.h_s.matrix().clone();
        if let Some(f) = drive {
            h += f(t)?;
        }
        Ok(h)
    };
    let nodes: Vec<(Matrix, Matrix)> = steps
        .iter()
        .map(|s| Ok((hs_at(s.t0 + s.h * (0.5 - root))?, hs_at(s.t0 + s.h * (0.5 + root))?)))
        .collect::<Result<_>>()?;

    let weights = model.bath.thermal_weights(beta);
    let kept: Vec<usize> = (0..weights.len()).filter(|&r| weights[r] > THERMAL_CUTOFF).collect();
    let kept_weight: f64 = kept.iter().map(|&r| weights[r]).sum();
    let (p, u) = hermitian_eigen(rho_s0.matrix());
    let mut components = Vec::new();
    for (s, &q) in p.iter().enumerate() {
        if q > 1e-15 {
            for &r in &kept {
                components.push((q * weights[r] / kept_weight, s, r));
            }
        }
    }

    let ds = model.system_dim();
    let dr = model.bath.dim();
    let bound = model.norm_bound();
    let results: Vec<(Vec<Matrix>, f64)> = components
        .par_iter()
        .map(|&(w, s, r)| {
            let mut psi = vec![c64(0.0, 0.0); ds * dr];
            for a in 0..ds {
                psi[a * dr + r] = u[(a, s)];
            }
            let mut out = vec![Matrix::zeros(ds, ds); times.len()];
            let mut edge: f64 = 0.0;
            let mut work = Workspace::new(ds * dr, dr);
            for (step, (h1, h2)) in steps.iter().zip(&nodes) {
                if step.h > 0.0 {
                    magnus_step(model, step, h1, h2, bound, &mut psi, &mut work);
                }
                if let Some(idx) = step.record {
                    out[idx] = reduce(&psi, ds, dr) * c64(w, 0.0);
                    edge = edge.max(edge_population(&model.bath, &psi, ds));
                }
            }
            (out, edge * w)
        })
        .collect();

    let mut states = vec![Matrix::zeros(ds, ds); times.len()];
    let mut edge_population = 0.0;
    for (traj, e) in &results {
        for (acc, m) in states.iter_mut().zip(traj) {
            *acc += m;
        }
        edge_population += e;
    }
    let mut warnings = Vec::new();
    if edge_population > EDGE_WARNING {
        warnings.push(format!(
            "Fock truncation: weight {edge_population:.2e} on n = {} exceeds {EDGE_WARNING:.0e}",
            model.bath.n_max
        ));
    }
    Ok(OracleTrajectory {
        times: times.to_vec(),
        states,
        edge_population,
        dropped_weight: 1.0 - kept_weight,
        warnings,
    })
}

struct Workspace {
    a: Vec<C64>,
    b: Vec<C64>,
    c: Vec<C64>,
    term: Vec<C64>,
    next: Vec<C64>,
    scratch: Vec<C64>,
}

impl Workspace {
    fn new(n: usize, dr: usize) -> Self {
        let z = || vec![c64(0.0, 0.0); n];
        Self {
            a: z(),
            b: z(),
            c: z(),
            term: z(),
            next: z(),
            scratch: vec![c64(0.0, 0.0); dr],
        }
    }
}

/// y = Ω v with Ω = −i h/2 (H₁ + H₂) + (√3/12) h² [H₁, H₂].
fn apply_omega(
    model: &OracleModel,
    step: &Step,
    h1: &Matrix,
    h2: &Matrix,
    v: &[C64],
    y: &mut [C64],
    w: &mut Workspace,
) {
    let root = 3f64.sqrt() / 6.0;
    let (t1, t2) = (step.t0 + step.h * (0.5 - root), step.t0 + step.h * (0.5 + root));
    let h = step.h;
    model.apply(t1, h1, v, &mut w.a, &mut w.scratch);
    model.apply(t2, h2, v, &mut w.b, &mut w.scratch);
    for k in 0..y.len() {
        y[k] = (w.a[k] + w.b[k]) * c64(0.0, -h / 2.0);
    }
    let coef = 3f64.sqrt() / 12.0 * h * h;
    // H₁H₂v − H₂H₁v.
    model.apply(t1, h1, &w.b, &mut w.c, &mut w.scratch);
    for k in 0..y.len() {
        y[k] += w.c[k] * coef;
    }
    model.apply(t2, h2, &w.a, &mut w.c, &mut w.scratch);
    for k in 0..y.len() {
        y[k] -= w.c[k] * coef;
    }
}

fn magnus_step(
    model: &OracleModel,
    step: &Step,
    h1: &Matrix,
    h2: &Matrix,
    bound: f64,
    psi: &mut [C64],
    w: &mut Workspace,
) {
    let extra = h1.norm().max(h2.norm());
    let theta = step.h * (bound + extra) + step.h * step.h * (bound + extra).powi(2);
    let sub = (theta / 0.5).ceil().max(1.0) as usize;
    let scale = 1.0 / sub as f64;
    let mut term = std::mem::take(&mut w.term);
    let mut next = std::mem::take(&mut w.next);
    for _ in 0..sub {
        term.copy_from_slice(psi);
        for k in 1..=40 {
            apply_omega(model, step, h1, h2, &term, &mut next, w);
            let f = scale / k as f64;
            let mut nrm = 0.0;
            for (x, y) in next.iter_mut().zip(psi.iter_mut()) {
                *x *= f;
                *y += *x;
                nrm += x.norm_sqr();
            }
            std::mem::swap(&mut term, &mut next);
            if nrm.sqrt() < 1e-17 {
                break;
            }
        }
    }
    w.term = term;
    w.next = next;
}

fn reduce(psi: &[C64], ds: usize, dr: usize) -> Matrix {
    Matrix::from_fn(ds, ds, |a, b| {
        (0..dr).map(|r| psi[a * dr + r] * psi[b * dr + r].conj()).sum()
    })
}

fn edge_population(bath: &TruncatedBath, psi: &[C64], ds: usize) -> f64 {
    let dr = bath.dim();
    let mut p = 0.0;
    for r in 0..dr {
        if (0..bath.modes()).any(|k| bath.occupation(r, k) == bath.n_max) {
            p += (0..ds).map(|a| psi[a * dr + r].norm_sqr()).sum::<f64>();
        }
    }
    p
}

/// Tr_R[e^{−βH}]/Tr[e^{−βH}] for the dense total Hamiltonian.
pub fn exact_mean_force(model: &OracleModel, beta: f64) -> Result<DensityMatrix> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::Validation(format!("beta must be >= 0, got {beta}")));
    }
    let h = model.total_hamiltonian()?;
    let m = h.matrix();
    let ds = model.system_dim();
    let dr = model.bath.dim();
    let real = m.iter().all(|z| z.im == 0.0);
    let (energies, vectors): (Vec<f64>, Matrix) = if real {
        let eig = m.map(|z| z.re).symmetric_eigen();
        (
            eig.eigenvalues.iter().cloned().collect(),
            eig.eigenvectors.map(|x| c64(x, 0.0)),
        )
    } else {
        let (e, v) = hermitian_eigen(m);
        (e.iter().cloned().collect(), v)
    };
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let boltz: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = boltz.iter().sum();
    let mut rho = Matrix::zeros(ds, ds);
    for (k, &p) in boltz.iter().enumerate() {
        if p < 1e-18 * z {
            continue;
        }
        let col = vectors.column(k);
        for a in 0..ds {
            for b in 0..ds {
                let mut acc = c64(0.0, 0.0);
                for r in 0..dr {
                    acc += col[a * dr + r] * col[b * dr + r].conj();
                }
                rho[(a, b)] += acc * (p / z);
            }
        }
    }
    let rho = (&rho + rho.adjoint()).scale(0.5);
    DensityMatrix::with_tolerance(rho, 1e-9, 1e-9)
}
