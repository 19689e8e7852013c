//! Thermal bosonic bath: spectral densities, rates γ_ij(ω), principal-value
//! shifts S_ij(ω), half-line transforms Γ_ij(ω), finite-time transforms
//! Γ⁽ᵗ⁾_ij(ω) and correlation functions C_ij(τ).
//!
//! Conventions: C_ij(τ) = ⟨R̃_i(τ) R_j⟩ = (1/2π) ∫ dΩ e^{−iΩτ} γ_ij(Ω),
//! Γ_ij(ω) = ∫₀^∞ e^{iωs} C_ij(s) ds = ½γ_ij(ω) + i S_ij(ω).
//!
//! All scalar work is done on the profile g(Ω) = γ(Ω)/2π of a unit
//! coupling. The cross-coupling matrix c enters as
//! γ_ij = 2π [Re c_ij g(Ω) + i Im c_ij sgn(Ω) g(Ω)], which keeps
//! γ_ij(−ω) = e^{−βω} γ_ji(ω) for complex Hermitian c.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::operators::hermitian_eigenvalues;
use crate::quadrature::{log_minus_ci, si, unit_rule, PanelExpansion};
use crate::{Error, Matrix, Result, C64};

const EXPANSION_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SpectralDensity {
    /// J(ω) = κ ω^s ω_c^{1−s} e^{−ω/ω_c}.
    OhmicExp { s: f64, cutoff: f64, kappa: f64 },
    /// Piecewise linear J through (omega, j) pairs, zero outside the table.
    Tabulated { omega: Vec<f64>, j: Vec<f64> },
    /// J(ω) = 2π Σ_k w_k δ(ω − ω_k): a finite set of oscillators with
    /// squared couplings w_k = |g_k|².
    Discrete { modes: Vec<f64>, weights: Vec<f64> },
}

impl SpectralDensity {
    pub fn ohmic(s: f64, cutoff: f64, kappa: f64) -> Self {
        SpectralDensity::OhmicExp { s, cutoff, kappa }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralDensity::OhmicExp { s, cutoff, kappa } => {
                if !(s.is_finite() && *s >= 0.0) {
                    return Err(Error::Validation(format!("exponent s must be >= 0, got {s}")));
                }
                if !(cutoff.is_finite() && *cutoff > 0.0) {
                    return Err(Error::Validation(format!("cutoff must be > 0, got {cutoff}")));
                }
                if !(kappa.is_finite() && *kappa >= 0.0) {
                    return Err(Error::Validation(format!("kappa must be >= 0, got {kappa}")));
                }
            }
            SpectralDensity::Tabulated { omega, j } => {
                if omega.len() < 2 || omega.len() != j.len() {
                    return Err(Error::Validation(
                        "tabulated density needs >= 2 (omega, J) pairs".into(),
                    ));
                }
                if omega[0] < 0.0 || omega.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Validation(
                        "tabulated omega must be non-negative and strictly increasing".into(),
                    ));
                }
                if j.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Validation("tabulated J must be finite and >= 0".into()));
                }
            }
            SpectralDensity::Discrete { modes, weights } => {
                if modes.len() != weights.len() || modes.is_empty() {
                    return Err(Error::Validation("discrete density needs modes and weights".into()));
                }
                if modes.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::Validation("discrete modes must be > 0".into()));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::Validation("discrete weights must be >= 0".into()));
                }
            }
        }
        Ok(())
    }

    /// J(ω) for ω ≥ 0; zero for the discrete family away from its lines.
    pub fn j(&self, w: f64) -> f64 {
        let x = w.abs();
        match self {
            SpectralDensity::OhmicExp { s, cutoff, kappa } => {
                if x == 0.0 {
                    if *s == 0.0 {
                        *kappa * cutoff
                    } else {
                        0.0
                    }
                } else {
                    kappa * x.powf(*s) * cutoff.powf(1.0 - s) * (-x / cutoff).exp()
                }
            }
            SpectralDensity::Tabulated { omega, j } => interpolate(omega, j, x),
            SpectralDensity::Discrete { .. } => 0.0,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, SpectralDensity::Discrete { .. })
    }

    /// Frequency scale beyond which J is negligible.
    pub fn scale(&self) -> f64 {
        match self {
            SpectralDensity::OhmicExp { cutoff, .. } => *cutoff,
            SpectralDensity::Tabulated { omega, .. } => *omega.last().unwrap_or(&1.0),
            SpectralDensity::Discrete { modes, .. } => modes.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// q(x) = J(x)/x and its first two derivatives, x > 0.
    fn q(&self, x: f64) -> [f64; 3] {
        match self {
            SpectralDensity::OhmicExp { s, cutoff, kappa } => {
                if x == 0.0 {
                    let q0 = if *s == 1.0 {
                        *kappa
                    } else if *s > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    let q1 = if *s == 1.0 { -kappa / cutoff } else { 0.0 };
                    return [q0, q1, 0.0];
                }
                let q = kappa * cutoff.powf(1.0 - s) * x.powf(s - 1.0) * (-x / cutoff).exp();
                let a = (s - 1.0) / x - 1.0 / cutoff;
                [q, q * a, q * (a * a - (s - 1.0) / (x * x))]
            }
            SpectralDensity::Tabulated { omega, j } => {
                let n = omega.len();
                if x < omega[0] || x > omega[n - 1] {
                    return [0.0; 3];
                }
                let k = match omega.binary_search_by(|v| v.total_cmp(&x)) {
                    Ok(k) => k.min(n - 2),
                    Err(k) => k.saturating_sub(1).min(n - 2),
                };
                let slope = (j[k + 1] - j[k]) / (omega[k + 1] - omega[k]);
                let icpt = j[k] - slope * omega[k];
                if x == 0.0 {
                    return if icpt == 0.0 {
                        [slope, 0.0, 0.0]
                    } else {
                        [f64::INFINITY, 0.0, 0.0]
                    };
                }
                [icpt / x + slope, -icpt / (x * x), 2.0 * icpt / (x * x * x)]
            }
            SpectralDensity::Discrete { .. } => [0.0; 3],
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self {
            SpectralDensity::Tabulated { omega, .. } => omega.clone(),
            _ => Vec::new(),
        }
    }

    fn min_feature(&self) -> f64 {
        match self {
            SpectralDensity::Tabulated { omega, .. } => {
                omega.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
            }
            _ => self.scale(),
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x < xs[0] || x > xs[n - 1] {
        return 0.0;
    }
    let k = match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(k) => return ys[k],
        Err(k) => k - 1,
    };
    let f = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + f * (ys[k + 1] - ys[k])
}

/// Bose–Einstein occupation 1/(e^{βω} − 1); negative for ω < 0.
pub fn occupation(beta: f64, omega: f64) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::Validation("occupation is singular at omega = 0".into()));
    }
    Ok(1.0 / (beta * omega).exp_m1())
}

/// B_2k/(2k)! for k = 1..12.
const BERNOULLI_SCALED: [f64; 12] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
    43867.0 / 5109094217170944000.0,
    -174611.0 / 802857662698291200000.0,
    77683.0 / 14101100039391805440000.0,
    -236364091.0 / 1693824136731743669452800000.0,
];

/// H(y) = y/(1 − e^{−y}) and its first two derivatives.
fn thermal_factor(y: f64) -> [f64; 3] {
    if y.abs() < 1.0 {
        let (mut h0, mut h1, mut h2) = (1.0 + 0.5 * y, 0.5, 0.0);
        let mut pow = 1.0; // y^{2k-2}
        for (k, b) in (1..).zip(BERNOULLI_SCALED) {
            let n = (2 * k) as f64;
            h2 += b * n * (n - 1.0) * pow;
            h1 += b * n * pow * y;
            h0 += b * pow * y * y;
            pow *= y * y;
        }
        return [h0, h1, h2];
    }
    if y > 0.0 {
        let e = (-y).exp();
        let d = -(-y).exp_m1();
        [
            y / d,
            1.0 / d - y * e / (d * d),
            (y - 2.0) * e / (d * d) + 2.0 * y * e * e / (d * d * d),
        ]
    } else {
        let u = y.exp();
        let um1 = y.exp_m1();
        [
            y * u / um1,
            u / um1 - y * u / (um1 * um1),
            (y - 2.0) * u / (um1 * um1) + 2.0 * y * u / (um1 * um1 * um1),
        ]
    }
}

/// Which scalar profile a transform acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BathModel {
    pub beta: f64,
    pub spectral: SpectralDensity,
    /// Hermitian PSD weights c_ij with J_ij = c_ij J.
    pub coupling: Matrix,
    /// Reservoir expectations ⟨R_i⟩ before centering.
    pub offsets: Vec<f64>,
}

impl BathModel {
    pub fn new(beta: f64, spectral: SpectralDensity, coupling: Matrix, offsets: Vec<f64>) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Validation(format!("beta must be finite and > 0, got {beta}")));
        }
        spectral.validate()?;
        let n = coupling.nrows();
        if n == 0 || coupling.ncols() != n {
            return Err(Error::Validation("coupling matrix must be square and non-empty".into()));
        }
        if offsets.len() != n {
            return Err(Error::Validation(format!(
                "expected {n} reservoir offsets, got {}",
                offsets.len()
            )));
        }
        let defect = (&coupling - coupling.adjoint()).norm();
        if defect > 1e-12 * coupling.norm().max(1.0) {
            return Err(Error::Validation("coupling matrix must be Hermitian".into()));
        }
        let ev = hermitian_eigenvalues(&coupling);
        let max = ev.iter().cloned().fold(0.0, f64::max);
        if ev[0] < -1e-12 * max.max(1e-300) {
            return Err(Error::Validation(
                "coupling matrix must be positive semidefinite".into(),
            ));
        }
        let coupling = (&coupling + coupling.adjoint()).scale(0.5);
        Ok(Self {
            beta,
            spectral,
            coupling,
            offsets,
        })
    }

    /// One bath operator with unit weight and zero offset.
    pub fn single(beta: f64, spectral: SpectralDensity) -> Result<Self> {
        Self::new(
            beta,
            spectral,
            Matrix::from_element(1, 1, C64::new(1.0, 0.0)),
            vec![0.0],
        )
    }

    pub fn count(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn has_complex_coupling(&self) -> bool {
        self.coupling.iter().any(|z| z.im != 0.0)
    }

    /// Integration window half-width W = max(50·scale, |ω| + 40/β).
    pub fn window(&self, omega: f64) -> f64 {
        let base = match self.spectral {
            SpectralDensity::Tabulated { .. } => 1.0001 * self.spectral.scale(),
            _ => 50.0 * self.spectral.scale(),
        };
        base.max(omega.abs() + 40.0 / self.beta)
    }

    /// Derivative `order` (0..=2) of the unit-coupling profile g = γ/2π.
    pub fn profile(&self, w: f64, parity: Parity, order: usize) -> f64 {
        let x = w.abs();
        let sg = if w > 0.0 {
            1.0
        } else if w < 0.0 {
            -1.0
        } else {
            0.0
        };
        let q = self.spectral.q(x);
        let h = thermal_factor(self.beta * w);
        let b = self.beta;
        let (h0, h1, h2) = (h[0] / b, h[1], h[2] * b);
        let g = match order {
            0 => {
                if q[0] == 0.0 {
                    0.0
                } else {
                    q[0] * h0
                }
            }
            1 => sg * q[1] * h0 + q[0] * h1,
            _ => q[2] * h0 + 2.0 * sg * q[1] * h1 + q[0] * h2,
        };
        let g = g / (2.0 * PI);
        match parity {
            Parity::Even => g,
            Parity::Odd => sg * g,
        }
    }

    /// Discrete lines (Ω_l, w_l) of the profile for the discrete family.
    fn lines(&self, parity: Parity) -> Vec<(f64, f64)> {
        match &self.spectral {
            SpectralDensity::Discrete { modes, weights } => {
                let mut out = Vec::with_capacity(2 * modes.len());
                for (&w, &g2) in modes.iter().zip(weights) {
                    let n = 1.0 / (self.beta * w).exp_m1();
                    out.push((w, g2 * (n + 1.0)));
                    let s = if parity == Parity::Odd { -1.0 } else { 1.0 };
                    out.push((-w, s * g2 * n));
                }
                out
            }
            _ => Vec::new(),
        }
    }

    fn combine(&self, i: usize, j: usize, even: C64, odd: impl FnOnce() -> C64) -> C64 {
        let c = self.coupling[(i, j)];
        let mut v = even * c.re;
        if c.im != 0.0 {
            v += odd() * C64::new(0.0, c.im);
        }
        v
    }

    /// Unit-coupling scalar rate 2π g(ω).
    pub fn scalar_rate(&self, omega: f64, parity: Parity) -> f64 {
        if self.spectral.is_discrete() {
            return 0.0;
        }
        2.0 * PI * self.profile(omega, parity, 0)
    }

    /// γ_ij(ω). Zero for the discrete family away from its lines.
    pub fn gamma_rate(&self, i: usize, j: usize, omega: f64) -> C64 {
        self.combine(i, j, C64::new(self.scalar_rate(omega, Parity::Even), 0.0), || {
            C64::new(self.scalar_rate(omega, Parity::Odd), 0.0)
        })
    }

    /// ∂_ω γ_ij(ω).
    pub fn gamma_rate_derivative(&self, i: usize, j: usize, omega: f64) -> C64 {
        if self.spectral.is_discrete() {
            return C64::new(0.0, 0.0);
        }
        let e = 2.0 * PI * self.profile(omega, Parity::Even, 1);
        let o = 2.0 * PI * self.profile(omega, Parity::Odd, 1);
        self.combine(i, j, C64::new(e, 0.0), || C64::new(o, 0.0))
    }

    pub fn transform(&self, omega: f64, parity: Parity, order: usize) -> Result<Transform> {
        if self.spectral.is_discrete() {
            return Ok(Transform::Lines {
                x: omega,
                order,
                lines: self.lines(parity),
            });
        }
        Ok(Transform::Continuum(Resolvent::new(self, omega, parity, order)?))
    }

    fn pair(&self, omega: f64, order: usize) -> Result<(Transform, Option<Transform>)> {
        let even = self.transform(omega, Parity::Even, order)?;
        let odd = if self.has_complex_coupling() {
            Some(self.transform(omega, Parity::Odd, order)?)
        } else {
            None
        };
        Ok((even, odd))
    }

    /// S_ij(ω) = (1/2π) PV ∫ dΩ γ_ij(Ω)/(ω − Ω).
    pub fn lamb_shift(&self, i: usize, j: usize, omega: f64) -> Result<C64> {
        let (e, o) = self.pair(omega, 0)?;
        Ok(self.combine(i, j, C64::new(e.shift(), 0.0), || {
            C64::new(o.as_ref().map_or(0.0, |t| t.shift()), 0.0)
        }))
    }

    /// ∂_ω S_ij(ω).
    pub fn lamb_shift_derivative(&self, i: usize, j: usize, omega: f64) -> Result<C64> {
        let (e, o) = self.pair(omega, 1)?;
        Ok(self.combine(i, j, C64::new(e.shift(), 0.0), || {
            C64::new(o.as_ref().map_or(0.0, |t| t.shift()), 0.0)
        }))
    }

    /// Γ_ij(ω) = ½γ_ij(ω) + i S_ij(ω).
    pub fn half_fourier(&self, i: usize, j: usize, omega: f64) -> Result<C64> {
        let (e, o) = self.pair(omega, 0)?;
        Ok(self.combine(i, j, e.half(), || o.as_ref().map_or(C64::new(0.0, 0.0), |t| t.half())))
    }

    /// Γ⁽ᵗ⁾_ij(ω) = ∫₀ᵗ du e^{iωu} C_ij(u).
    pub fn finite_time_gamma(&self, i: usize, j: usize, omega: f64, t: f64) -> Result<C64> {
        if t < 0.0 {
            return Err(Error::Validation("finite-time transform needs t >= 0".into()));
        }
        let (e, o) = self.pair(omega, 0)?;
        Ok(self.combine(i, j, e.finite(t), || {
            o.as_ref().map_or(C64::new(0.0, 0.0), |tr| tr.finite(t))
        }))
    }

    /// C_ij(τ) = ⟨R̃_i(τ) R_j⟩.
    pub fn correlation(&self, i: usize, j: usize, tau: f64) -> Result<C64> {
        let c = self.correlator()?;
        Ok(c.value(i, j, tau))
    }

    /// max_ij |γ_ij(−ω) − e^{−βω} γ_ji(ω)| / max_ij |γ_ij(ω)| over `omegas`;
    /// frequencies where every rate vanishes are skipped.
    pub fn kms_defect(&self, omegas: &[f64]) -> f64 {
        let n = self.count();
        let mut worst: f64 = 0.0;
        for &w in omegas {
            let mut scale: f64 = 0.0;
            let mut dev: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    scale = scale.max(self.gamma_rate(i, j, w).norm());
                    dev =
                        dev.max((self.gamma_rate(i, j, -w) - self.gamma_rate(j, i, w) * (-self.beta * w).exp()).norm());
                }
            }
            if scale > 0.0 {
                worst = worst.max(dev / scale);
            }
        }
        worst
    }

    /// Precomputed representation of C_ij(τ) for repeated evaluation.
    pub fn correlator(&self) -> Result<Correlator<'_>> {
        if self.spectral.is_discrete() {
            return Ok(Correlator {
                bath: self,
                even: CorrelatorKind::Lines(self.lines(Parity::Even)),
                odd: CorrelatorKind::Lines(self.lines(Parity::Odd)),
            });
        }
        let w = self.window(0.0);
        let mut breaks = vec![-w, 0.0, w];
        for k in self.spectral.kinks() {
            if k < w {
                breaks.push(k);
                breaks.push(-k);
            }
        }
        let even = PanelExpansion::build(&|x| self.profile(x, Parity::Even, 0), &breaks, EXPANSION_TOL)?;
        let odd = if self.has_complex_coupling() {
            PanelExpansion::build(&|x| self.profile(x, Parity::Odd, 0), &breaks, EXPANSION_TOL)?
        } else {
            PanelExpansion::build(&|_| 0.0, &[-1.0, 1.0], EXPANSION_TOL)?
        };
        Ok(Correlator {
            bath: self,
            even: CorrelatorKind::Panels(even),
            odd: CorrelatorKind::Panels(odd),
        })
    }
}

enum CorrelatorKind {
    Panels(PanelExpansion),
    Lines(Vec<(f64, f64)>),
}

impl CorrelatorKind {
    fn at(&self, tau: f64) -> C64 {
        match self {
            CorrelatorKind::Panels(p) => p.fourier(tau),
            CorrelatorKind::Lines(l) => l.iter().map(|&(w, a)| C64::from_polar(a, -w * tau)).sum(),
        }
    }
}

pub struct Correlator<'a> {
    bath: &'a BathModel,
    even: CorrelatorKind,
    odd: CorrelatorKind,
}

impl Correlator<'_> {
    pub fn value(&self, i: usize, j: usize, tau: f64) -> C64 {
        self.bath.combine(i, j, self.even.at(tau), || self.odd.at(tau))
    }
}

/// Frequency-resolved transforms of one scalar profile at one frequency.
#[derive(Clone, Debug)]
pub enum Transform {
    Continuum(Resolvent),
    Lines {
        x: f64,
        order: usize,
        lines: Vec<(f64, f64)>,
    },
}

impl Transform {
    /// PV ∫ p(Ω)/(x − Ω) dΩ.
    pub fn shift(&self) -> f64 {
        match self {
            Transform::Continuum(r) => r.shift(),
            Transform::Lines { x, order, lines } => lines
                .iter()
                .filter(|(w, _)| w != x)
                .map(|&(w, a)| {
                    let y = x - w;
                    if *order == 0 {
                        a / y
                    } else {
                        -a / (y * y)
                    }
                })
                .sum(),
        }
    }

    /// π p(x) + i PV ∫ p(Ω)/(x − Ω) dΩ.
    pub fn half(&self) -> C64 {
        match self {
            Transform::Continuum(r) => C64::new(PI * r.px, r.shift()),
            Transform::Lines { .. } => C64::new(0.0, self.shift()),
        }
    }

    /// ∫ p(Ω) (e^{i(x−Ω)t} − 1)/(i(x−Ω)) dΩ; for `order` 1 this is the
    /// x-derivative of the order-0 transform.
    pub fn finite(&self, t: f64) -> C64 {
        if t == 0.0 {
            return C64::new(0.0, 0.0);
        }
        match self {
            Transform::Continuum(r) => r.finite(t),
            Transform::Lines { x, order, lines } => lines
                .iter()
                .map(|&(w, a)| {
                    let y = x - w;
                    if *order == 0 {
                        line_kernel(y, t) * a
                    } else {
                        line_kernel_derivative(y, t) * a
                    }
                })
                .sum(),
        }
    }
}

/// E_t(y) = ∫₀ᵗ e^{iyu} du.
pub fn line_kernel(y: f64, t: f64) -> C64 {
    let z = 0.5 * y * t;
    let sinc = if z.abs() < 1e-4 { 1.0 - z * z / 6.0 } else { z.sin() / z };
    C64::from_polar(t * sinc, z)
}

/// ∂_y E_t(y) = ∫₀ᵗ iu e^{iyu} du.
pub fn line_kernel_derivative(y: f64, t: f64) -> C64 {
    let z = y * t;
    if z.abs() < 1e-2 {
        // i Σ_n (iz)^n t²/(n!(n+2))
        let mut term = C64::new(1.0, 0.0);
        let mut sum = C64::new(0.5, 0.0);
        for n in 1..20 {
            term *= C64::new(0.0, z) / n as f64;
            sum += term / (n + 2) as f64;
        }
        return C64::new(0.0, 1.0) * sum * t * t;
    }
    let e = C64::from_polar(1.0, z);
    (e * (y * t) + C64::new(0.0, 1.0) * (e - 1.0)) / (y * y)
}

/// Singularity-subtracted representation around one frequency:
/// p(Ω) = p(x) + (x − Ω) φ(Ω) on [−W, W].
#[derive(Clone, Debug)]
pub struct Resolvent {
    x: f64,
    w: f64,
    px: f64,
    phi: PanelExpansion,
    phi_integral: f64,
}

impl Resolvent {
    fn new(bath: &BathModel, x: f64, parity: Parity, order: usize) -> Result<Self> {
        let w = bath.window(x);
        let px = bath.profile(x, parity, order);
        // Close to x the difference quotient loses digits; there φ is minus
        // the mean of p′ along [x, Ω], evaluated by Gauss–Legendre.
        let near = 0.5 * (1.0 / bath.beta).min(bath.spectral.min_feature());
        let rule = unit_rule();
        let phi = |om: f64| -> f64 {
            let d = om - x;
            let crosses = x != 0.0 && om.signum() != x.signum();
            if d.abs() < near && !crosses {
                -rule
                    .iter()
                    .map(|(s, wt)| wt * bath.profile(x + s * d, parity, order + 1))
                    .sum::<f64>()
            } else {
                (bath.profile(om, parity, order) - px) / (x - om)
            }
        };
        let mut breaks = vec![-w, 0.0, x, w];
        for k in bath.spectral.kinks() {
            if k < w {
                breaks.push(k);
                breaks.push(-k);
            }
        }
        let phi = PanelExpansion::build(&phi, &breaks, EXPANSION_TOL)
            .map_err(|e| Error::Numerical(format!("bath transform at omega = {x}: {e}")))?;
        let phi_integral = phi.integral();
        Ok(Self {
            x,
            w,
            px,
            phi,
            phi_integral,
        })
    }

    fn log_term(&self) -> f64 {
        ((self.w + self.x) / (self.w - self.x)).ln()
    }

    fn shift(&self) -> f64 {
        self.phi_integral + self.px * self.log_term()
    }

    fn finite(&self, t: f64) -> C64 {
        let (a, b) = (self.w - self.x, self.w + self.x);
        let re = self.px * (si(b * t) + si(a * t));
        let im = self.px * log_minus_ci(a, b, t) + self.phi_integral;
        let osc = C64::from_polar(1.0, self.x * t) * self.phi.fourier(t);
        C64::new(re, im) - C64::new(0.0, 1.0) * osc
    }
}
