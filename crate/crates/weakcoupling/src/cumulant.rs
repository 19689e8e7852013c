//! Second-order cumulant equation ρ̃(t) = e^{K⁽²⁾(t)} ρ̃(0).
//!
//! The kernels are evaluated in closed form from the finite-time transforms
//! Γ⁽ᵗ⁾(ω). With Δ = ω′ − ω,
//!
//!   P_ij = [e^{iΔt} Γ⁽ᵗ⁾_ji(ω) − Γ⁽ᵗ⁾_ji(ω′)] / (iΔ)
//!   Q_ij = [e^{iΔt} Γ⁽ᵗ⁾*_ij(ω′) − Γ⁽ᵗ⁾*_ij(ω)] / (iΔ)
//!
//! give γ_ij(ω,ω′,t) = P + Q and Ξ_ij(ω,ω′,t) = (P − Q)/2i, whose time
//! derivatives are e^{iΔt}(Γ⁽ᵗ⁾_ji(ω) ± Γ⁽ᵗ⁾*_ij(ω′)) up to the 1/2i.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bath::BathModel;
use crate::generators::{dissipator_sum, Picture};
use crate::operators::{
    hermitian_eigenvalues, is_cptp, matrix_exponential, CptpReport, DensityMatrix, HermitianOperator, Superoperator,
};
use crate::quadrature::unit_rule;
use crate::system::OpenSystem;
use crate::{Error, Matrix, Result, C64};

/// |Δ|t below which the coincident-frequency branch is used.
const COINCIDENT: f64 = 1e-6;

/// γ_ij(ω,ω′,t) and Ξ_ij(ω,ω′,t) with rows (ω,i) and columns (ω′,j),
/// flattened as index f·n + i.
#[derive(Clone, Debug)]
pub struct CumulantKernel {
    pub t: f64,
    pub frequencies: Vec<f64>,
    pub channels: usize,
    pub gamma: Matrix,
    pub xi: Matrix,
}

impl CumulantKernel {
    pub fn index(&self, f: usize, i: usize) -> usize {
        f * self.channels + i
    }

    /// Smallest eigenvalue relative to the largest.
    pub fn psd_ratio(&self) -> f64 {
        let ev = hermitian_eigenvalues(&self.gamma);
        let max = ev.last().copied().unwrap_or(0.0);
        if max <= 0.0 {
            return 0.0;
        }
        ev[0] / max
    }

    pub fn hermitian_defect(&self) -> f64 {
        (&self.gamma - self.gamma.adjoint()).norm()
    }
}

fn kernel_entries(sys: &OpenSystem, t: f64, gt: &[Matrix], dgt: &[Option<Matrix>]) -> (Matrix, Matrix) {
    let w = &sys.jumps.frequencies;
    let n = sys.channels();
    let size = w.len() * n;
    let mut gamma = DMatrix::zeros(size, size);
    let mut xi = DMatrix::zeros(size, size);
    if t == 0.0 {
        return (gamma, xi);
    }
    let i_unit = C64::new(0.0, 1.0);
    for f in 0..w.len() {
        for g in 0..w.len() {
            let delta = w[g] - w[f];
            for i in 0..n {
                for j in 0..n {
                    let (p, q) = if (delta * t).abs() < COINCIDENT {
                        let d = dgt[f].as_ref().expect("derivative at coincident frequency");
                        let p = gt[f][(j, i)] * t + i_unit * d[(j, i)];
                        let q = gt[f][(i, j)].conj() * t - i_unit * d[(i, j)].conj();
                        (p, q)
                    } else {
                        let e = C64::from_polar(1.0, delta * t);
                        let den = i_unit * delta;
                        let p = (e * gt[f][(j, i)] - gt[g][(j, i)]) / den;
                        let q = (e * gt[g][(i, j)].conj() - gt[f][(i, j)].conj()) / den;
                        (p, q)
                    };
                    gamma[(f * n + i, g * n + j)] = p + q;
                    xi[(f * n + i, g * n + j)] = (p - q) / (2.0 * i_unit);
                }
            }
        }
    }
    (gamma, xi)
}

fn needs_derivative(sys: &OpenSystem, f: usize, t: f64) -> bool {
    let w = &sys.jumps.frequencies;
    w.iter().any(|&x| ((x - w[f]) * t).abs() < COINCIDENT)
}

/// γ_ij(ω,ω′,t) and Ξ_ij(ω,ω′,t) on the Bohr frequencies of `sys`.
pub fn gamma_kernel(sys: &OpenSystem, t: f64) -> Result<CumulantKernel> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Validation(format!(
            "kernel time must be finite and >= 0, got {t}"
        )));
    }
    let nf = sys.jumps.len();
    let gt: Vec<Matrix> = (0..nf).into_par_iter().map(|f| sys.finite(f, t)).collect();
    let dgt: Vec<Option<Matrix>> = (0..nf)
        .into_par_iter()
        .map(|f| needs_derivative(sys, f, t).then(|| sys.finite_derivative(f, t)))
        .collect();
    let (gamma, xi) = kernel_entries(sys, t, &gt, &dgt);
    check_finite(&gamma, "cumulant kernel")?;
    Ok(CumulantKernel {
        t,
        frequencies: sys.jumps.frequencies.clone(),
        channels: sys.channels(),
        gamma,
        xi,
    })
}

/// Large-t form of the kernels built from γ(ω), S(ω) and their derivatives.
pub fn gamma_kernel_longtime(sys: &OpenSystem, t: f64) -> Result<CumulantKernel> {
    if !(t > 0.0) {
        return Err(Error::Validation("long-time kernel needs t > 0".into()));
    }
    let nf = sys.jumps.len();
    let half: Vec<Matrix> = (0..nf).map(|f| sys.half(f)).collect();
    let dhalf: Vec<Option<Matrix>> = (0..nf)
        .map(|f| needs_derivative(sys, f, t).then(|| sys.half_derivative(f)))
        .collect();
    let (gamma, xi) = kernel_entries(sys, t, &half, &dhalf);
    Ok(CumulantKernel {
        t,
        frequencies: sys.jumps.frequencies.clone(),
        channels: sys.channels(),
        gamma,
        xi,
    })
}

/// Single entry of the long-time kernel in the explicit real form:
/// off-diagonal i(e^{−i(ω−ω′)t} − 1)·½(γ_ji(ω)+γ_ji(ω′))/(ω−ω′)
/// − (e^{−i(ω−ω′)t} + 1)(S_ji(ω) − S_ji(ω′))/(ω−ω′); diagonal
/// t γ_ji(ω) − 2∂_ω S_ji(ω).
pub fn gamma_longtime_entry(bath: &BathModel, i: usize, j: usize, w: f64, wp: f64, t: f64) -> Result<C64> {
    let d = w - wp;
    if (d * t).abs() < COINCIDENT {
        let g = bath.gamma_rate(j, i, w);
        let ds = bath.lamb_shift_derivative(j, i, w)?;
        return Ok(g * t - ds * 2.0);
    }
    let a = (bath.gamma_rate(j, i, w) + bath.gamma_rate(j, i, wp)) * 0.5;
    let b = bath.lamb_shift(j, i, w)? - bath.lamb_shift(j, i, wp)?;
    let e = C64::from_polar(1.0, -d * t);
    Ok(C64::new(0.0, 1.0) * (e - 1.0) * a / d - (e + 1.0) * b / d)
}

/// Diagonal long-time Ξ: t S_ji(ω) + ½ ∂_ω γ_ji(ω).
pub fn xi_longtime_diagonal(bath: &BathModel, i: usize, j: usize, w: f64, t: f64) -> Result<C64> {
    Ok(bath.lamb_shift(j, i, w)? * t + bath.gamma_rate_derivative(j, i, w) * 0.5)
}

/// γ_ij(ω,ω′,t) = ∫₀ᵗ∫₀ᵗ ds du e^{i(ω′s − ωu)} C_ji(s − u), by a tensor
/// Gauss–Legendre rule with `panels` panels per axis. Reference only.
pub fn gamma_kernel_direct(
    bath: &BathModel,
    i: usize,
    j: usize,
    w: f64,
    wp: f64,
    t: f64,
    panels: usize,
) -> Result<C64> {
    if t == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let rule = unit_rule();
    let points = panels * rule.len();
    if points > 2000 || panels == 0 {
        return Err(Error::Validation(format!(
            "direct kernel grid {points} outside 1..=2000 points"
        )));
    }
    let corr = bath.correlator()?;
    let h = t / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| rule.iter().map(move |&(x, wt)| ((p as f64 + x) * h, wt * h)))
        .collect();
    let total: C64 = nodes
        .par_iter()
        .map(|&(s, ws)| {
            nodes
                .iter()
                .map(|&(u, wu)| C64::from_polar(ws * wu, wp * s - w * u) * corr.value(j, i, s - u))
                .sum::<C64>()
        })
        .sum();
    Ok(total)
}

/// Ξ_ij(ω,ω′,t) by integrating dΞ/dt = e^{iΔt}(Γ⁽ˢ⁾_ji(ω) − Γ⁽ˢ⁾*_ij(ω′))/2i
/// with composite Gauss–Legendre over `panels` panels. Reference only.
pub fn xi_kernel_integrated(sys: &OpenSystem, f: usize, g: usize, i: usize, j: usize, t: f64, panels: usize) -> C64 {
    let w = &sys.jumps.frequencies;
    let delta = w[g] - w[f];
    let rule = unit_rule();
    let h = t / panels.max(1) as f64;
    (0..panels.max(1))
        .into_par_iter()
        .map(|p| {
            rule.iter()
                .map(|&(x, wt)| {
                    let s = (p as f64 + x) * h;
                    let a = sys.finite(f, s)[(j, i)];
                    let b = sys.finite(g, s)[(i, j)].conj();
                    C64::from_polar(wt * h, delta * s) * (a - b) / C64::new(0.0, 2.0)
                })
                .sum::<C64>()
        })
        .sum()
}

/// K⁽²⁾(ρ) = λ² Σ γ_ij(ω,ω′,t) (S_i(ω) ρ S_j†(ω′) − ½{S_j†(ω′) S_i(ω), ρ}).
pub fn cumulant_superoperator(sys: &OpenSystem, kernel: &CumulantKernel) -> Superoperator {
    weighted_dissipator(sys, &kernel.gamma)
}

fn weighted_dissipator(sys: &OpenSystem, weights: &Matrix) -> Superoperator {
    let n = sys.channels();
    let l2 = sys.lambda * sys.lambda;
    let nf = sys.jumps.len();
    let mut terms = Vec::with_capacity(nf * nf * n * n);
    for f in 0..nf {
        for g in 0..nf {
            for i in 0..n {
                for j in 0..n {
                    let c = weights[(f * n + i, g * n + j)] * l2;
                    terms.push((c, &sys.jumps.operators[f][i], &sys.jumps.operators[g][j]));
                }
            }
        }
    }
    dissipator_sum(sys.dim(), terms)
}

/// Λ(t) = Σ Ξ_ij(ω,ω′,t) S_j†(ω′) S_i(ω), without λ². The unrenormalized
/// cumulant is K⁽²⁾ − iλ²[Λ, ·].
pub fn xi_hamiltonian(sys: &OpenSystem, kernel: &CumulantKernel) -> Result<HermitianOperator> {
    let n = sys.channels();
    let d = sys.dim();
    let mut m = DMatrix::zeros(d, d);
    for f in 0..sys.jumps.len() {
        for g in 0..sys.jumps.len() {
            for i in 0..n {
                for j in 0..n {
                    let c = kernel.xi[(f * n + i, g * n + j)];
                    m += sys.jumps.operators[g][j].adjoint() * &sys.jumps.operators[f][i] * c;
                }
            }
        }
    }
    HermitianOperator::new(m)
}

/// Cumulant for the Hamiltonian without the second-order counterterm.
pub fn bare_cumulant_superoperator(sys: &OpenSystem, kernel: &CumulantKernel) -> Result<Superoperator> {
    let l2 = sys.lambda * sys.lambda;
    let lam = xi_hamiltonian(sys, kernel)?;
    Ok(cumulant_superoperator(sys, kernel).plus(&Superoperator::hamiltonian(&(lam.matrix() * C64::new(l2, 0.0)))))
}

/// Time argument of the counterterm: finite t or the t → ∞ limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Time {
    At(f64),
    Infinite,
}

/// H_C⁽²⁾(t) = Σ (Γ⁽ᵗ⁾_ij(ω′) − Γ⁽ᵗ⁾*_ji(ω))/2i · S_i†(ω) S_j(ω′), without λ²,
/// in the Schrödinger picture.
pub fn second_correction(sys: &OpenSystem, t: Time) -> Result<HermitianOperator> {
    let nf = sys.jumps.len();
    let g: Vec<Matrix> = match t {
        Time::At(t) if t < 0.0 => return Err(Error::Validation("counterterm needs t >= 0".into())),
        Time::At(t) => (0..nf).map(|f| sys.finite(f, t)).collect(),
        Time::Infinite => (0..nf).map(|f| sys.half(f)).collect(),
    };
    let n = sys.channels();
    let d = sys.dim();
    let mut m = DMatrix::zeros(d, d);
    for f in 0..nf {
        for h in 0..nf {
            for i in 0..n {
                for j in 0..n {
                    let c = (g[h][(i, j)] - g[f][(j, i)].conj()) / C64::new(0.0, 2.0);
                    m += sys.jumps.operators[f][i].adjoint() * &sys.jumps.operators[h][j] * c;
                }
            }
        }
    }
    HermitianOperator::new(m)
}

/// Interaction-picture counterterm e^{iHt} H_C⁽²⁾(t) e^{−iHt}, without λ².
/// It equals dΛ/dt.
pub fn second_correction_interaction(sys: &OpenSystem, t: f64) -> Result<HermitianOperator> {
    let hc = second_correction(sys, Time::At(t))?;
    let u = matrix_exponential(&(sys.hamiltonian.matrix() * C64::new(0.0, -t)))?;
    HermitianOperator::new(u.adjoint() * hc.matrix() * u)
}

/// Schrödinger-picture approximation −it[H, ·] + λ² Σ γ̄ D with
/// γ̄_ij(ω,ω′,t) = e^{−it(ω′−ω)/2} γ_ij(ω,ω′,t).
pub fn schrodinger_cumulant(sys: &OpenSystem, kernel: &CumulantKernel) -> Superoperator {
    let n = sys.channels();
    let w = &kernel.frequencies;
    let t = kernel.t;
    let bar = DMatrix::from_fn(kernel.gamma.nrows(), kernel.gamma.ncols(), |r, c| {
        let (f, g) = (r / n, c / n);
        kernel.gamma[(r, c)] * C64::from_polar(1.0, -t * (w[g] - w[f]) / 2.0)
    });
    let h = sys.hamiltonian.matrix() * C64::new(t, 0.0);
    weighted_dissipator(sys, &bar).plus(&Superoperator::hamiltonian(&h))
}

/// One point of a cumulant trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub rho: Matrix,
    pub cptp: CptpReport,
}

/// ρ(t) = e^{K(t)} ρ₀ on a time grid, interaction or Schrödinger picture.
pub fn evolve_cumulant(
    sys: &OpenSystem,
    rho0: &DensityMatrix,
    times: &[f64],
    picture: Picture,
) -> Result<Vec<TrajectoryPoint>> {
    if rho0.dim() != sys.dim() {
        return Err(Error::Validation("initial state dimension differs from system".into()));
    }
    times
        .par_iter()
        .map(|&t| {
            let kernel = gamma_kernel(sys, t)?;
            let k = match picture {
                Picture::Interaction => cumulant_superoperator(sys, &kernel),
                Picture::Schrodinger => schrodinger_cumulant(sys, &kernel),
            };
            let map = k.exp()?;
            let rho = map.apply(rho0.matrix());
            let cptp = is_cptp(&map, 1e-9);
            Ok(TrajectoryPoint { t, rho, cptp })
        })
        .collect()
}

/// ‖(K(t+h) − K(t−h))/2h − L_BR(t)‖ / ‖L_BR(t)‖.
pub fn br_consistency(sys: &OpenSystem, t: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && t - h >= 0.0) {
        return Err(Error::Validation("need 0 < h <= t".into()));
    }
    let kp = cumulant_superoperator(sys, &gamma_kernel(sys, t + h)?);
    let km = cumulant_superoperator(sys, &gamma_kernel(sys, t - h)?);
    let fd = kp.minus(&km).scaled(C64::new(0.5 / h, 0.0));
    let lbr = crate::generators::redfield_generator(sys, t)?;
    let norm = lbr.norm();
    let diff = fd.minus(&lbr).norm();
    Ok(if norm > 0.0 { diff / norm } else { diff })
}

#[derive(Clone, Debug)]
pub struct SeriesResult {
    pub value: Superoperator,
    /// Norm of the last retained term.
    pub tail: f64,
}

/// Σ_{k=0}^{n_max} ad_K^k(dK)/(k+1)!: the generator of the exact cumulant
/// flow, dρ/dt = [(e^{ad_K} − 1)/ad_K](dK/dt) ρ.
pub fn cumulant_ode_rhs(k: &Superoperator, dk: &Superoperator, n_max: usize) -> Result<SeriesResult> {
    if k.norm() > 20.0 {
        return Err(Error::Numerical(format!(
            "cumulant series does not converge reliably for |K| = {:.3e} > 20",
            k.norm()
        )));
    }
    let mut term = dk.clone();
    let mut sum = dk.clone();
    let mut fact = 1.0;
    let mut tail = dk.norm();
    for n in 1..=n_max {
        term = k.compose(&term).minus(&term.compose(k));
        fact *= (n + 1) as f64;
        let scaled = term.scaled(C64::new(1.0 / fact, 0.0));
        tail = scaled.norm();
        sum = sum.plus(&scaled);
    }
    Ok(SeriesResult { value: sum, tail })
}

/// e^{K} for the cumulant at time t, with its CPTP report.
pub fn cumulant_map(sys: &OpenSystem, t: f64) -> Result<(Superoperator, CptpReport)> {
    let k = cumulant_superoperator(sys, &gamma_kernel(sys, t)?);
    let map = Superoperator::from_matrix(sys.dim(), matrix_exponential(k.matrix())?)?;
    let rep = is_cptp(&map, 1e-9);
    Ok((map, rep))
}

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Decay of a non-negative quantity along a geometric time sequence.
#[derive(Clone, Debug)]
pub struct DecayFit {
    /// −d ln E / d ln t from a least-squares line.
    pub order: f64,
    pub times: Vec<f64>,
    pub envelope: Vec<f64>,
}

/// Negated least-squares slope of ln v against ln t.
pub fn fit_decay_order(times: &[f64], values: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t > 0.0 && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

/// `points` geometrically spaced times in [t_lo, t_hi].
pub fn geometric_times(t_lo: f64, t_hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![t_lo];
    }
    (0..points)
        .map(|k| t_lo * (t_hi / t_lo).powf(k as f64 / (points - 1) as f64))
        .collect()
}

/// Longest oscillation period 2π/|ν| over nonzero Bohr frequencies and
/// their differences; zero when there are none.
pub fn oscillation_period(sys: &OpenSystem) -> f64 {
    let w = &sys.jumps.frequencies;
    let mut smallest = f64::INFINITY;
    for &a in w {
        for &b in w.iter().chain(std::iter::once(&0.0)) {
            let d = (a - b).abs();
            if d > 1e-12 {
                smallest = smallest.min(d);
            }
        }
    }
    if smallest.is_finite() {
        2.0 * std::f64::consts::PI / smallest
    } else {
        0.0
    }
}

const ENVELOPE_SAMPLES: usize = 32;

fn envelope_of(period: f64, t: f64, mut f: impl FnMut(f64) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
    let samples = if period > 0.0 { ENVELOPE_SAMPLES } else { 1 };
    let mut env: Vec<f64> = Vec::new();
    for k in 0..samples {
        let v = f(t + period * k as f64 / samples as f64)?;
        if env.is_empty() {
            env = v;
        } else {
            env.iter_mut().zip(v).for_each(|(e, x)| *e = e.max(x));
        }
    }
    Ok(env)
}

/// Per-entry decay order of |γ(t) − γ_long(t)|, using the maximum over one
/// oscillation period at each time. Entries whose envelope never exceeds
/// 1e-12 of the largest one are omitted. Returns (row, column, fit).
pub fn longtime_kernel_orders(sys: &OpenSystem, times: &[f64]) -> Result<Vec<(usize, usize, DecayFit)>> {
    let period = oscillation_period(sys);
    let env: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| {
            envelope_of(period, t, |s| {
                let a = gamma_kernel(sys, s)?;
                let b = gamma_kernel_longtime(sys, s)?;
                Ok((&a.gamma - &b.gamma).iter().map(|z| z.norm()).collect())
            })
        })
        .collect::<Result<_>>()?;
    let m = sys.jumps.len() * sys.channels();
    let top = env.iter().flatten().cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    for k in 0..m * m {
        let series: Vec<f64> = env.iter().map(|e| e[k]).collect();
        if series.iter().cloned().fold(0.0, f64::max) <= 1e-12 * top || top == 0.0 {
            continue;
        }
        // Column-major flattening of the kernel matrix.
        let (r, c) = (k % m, k / m);
        let order = fit_decay_order(times, &series);
        out.push((
            r,
            c,
            DecayFit {
                order,
                times: times.to_vec(),
                envelope: series,
            },
        ));
    }
    Ok(out)
}

/// Decay order of ‖K(t)/t − L_Davies‖ with interaction-picture renormalized
/// generators, using the envelope over one oscillation period.
pub fn davies_limit_order(sys: &OpenSystem, times: &[f64]) -> Result<DecayFit> {
    let opts = crate::generators::GeneratorOptions {
        include_lamb_stark: false,
        picture: Picture::Interaction,
        renormalized: true,
    };
    let ld = crate::generators::davies_generator(sys, &opts)?;
    let period = oscillation_period(sys);
    let envelope: Vec<f64> = times
        .par_iter()
        .map(|&t| {
            Ok(envelope_of(period, t, |s| {
                let k = cumulant_superoperator(sys, &gamma_kernel(sys, s)?);
                Ok(vec![k.scaled(C64::new(1.0 / s, 0.0)).minus(&ld).norm()])
            })?[0])
        })
        .collect::<Result<_>>()?;
    Ok(DecayFit {
        order: fit_decay_order(times, &envelope),
        times: times.to_vec(),
        envelope,
    })
}

/// |γ_ji(−ω,−ω,t)/γ_ij(ω,ω,t) − e^{−βω}| / e^{−βω}, maximized over positive
/// Bohr frequencies and channel pairs with nonzero rates.
pub fn kernel_detailed_balance(sys: &OpenSystem, t: f64) -> Result<f64> {
    let k = gamma_kernel(sys, t)?;
    let n = sys.channels();
    let beta = sys.bath.beta;
    let mut worst: f64 = 0.0;
    for f in 0..sys.jumps.len() {
        let w = sys.jumps.frequencies[f];
        if w <= 0.0 {
            continue;
        }
        let g = sys
            .jumps
            .negative(f)
            .ok_or_else(|| Error::Numerical("asymmetric Bohr set".into()))?;
        for i in 0..n {
            for j in 0..n {
                let up = k.gamma[(k.index(f, i), k.index(f, j))];
                let down = k.gamma[(k.index(g, j), k.index(g, i))];
                if up.norm() < 1e-300 {
                    continue;
                }
                let target = (-beta * w).exp();
                worst = worst.max(((down / up).norm() - target).abs() / target);
            }
        }
    }
    Ok(worst)
}
