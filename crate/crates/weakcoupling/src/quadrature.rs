//! Piecewise Legendre expansions of smooth real functions.
//!
//! A function is resolved once on an adaptive panel partition; the
//! expansion then gives its integral and its Fourier transform at any
//! frequency. The Fourier moments of Legendre polynomials are spherical
//! Bessel functions, so the cost and accuracy do not depend on how fast the
//! exponential oscillates.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::{Error, Result, C64};

/// Nodes per panel.
pub const ORDER: usize = 24;
const MAX_DEPTH: usize = 64;
const MAX_PANELS: usize = 20_000;
/// Tails below this fraction of the scale that stop shrinking under
/// bisection are round-off and accepted.
const NOISE_TOL: f64 = 1e-11;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
    /// legendre[k][m] = P_k(nodes[m])
    legendre: [[f64; ORDER]; ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let gl = GaussLegendre::new(NonZeroUsize::new(ORDER).expect("nonzero"));
        let mut pairs: Vec<(f64, f64)> = gl.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        for (m, (x, w)) in pairs.into_iter().enumerate() {
            nodes[m] = x;
            weights[m] = w;
        }
        let mut legendre = [[0.0; ORDER]; ORDER];
        for m in 0..ORDER {
            let x = nodes[m];
            let (mut p0, mut p1) = (1.0, x);
            legendre[0][m] = p0;
            legendre[1][m] = p1;
            for k in 1..ORDER - 1 {
                let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                legendre[k + 1][m] = p2;
                p0 = p1;
                p1 = p2;
            }
        }
        Rule {
            nodes,
            weights,
            legendre,
        }
    })
}

/// 8-point Gauss–Legendre rule on [0, 1] as (node, weight) pairs.
pub fn unit_rule() -> &'static [(f64, f64)] {
    static UNIT: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    UNIT.get_or_init(|| {
        let gl = GaussLegendre::new(NonZeroUsize::new(8).expect("nonzero"));
        gl.as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect()
    })
}

#[derive(Clone, Debug)]
struct Panel {
    mid: f64,
    half: f64,
    coef: [f64; ORDER],
}

impl Panel {
    fn sample(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (Panel, f64) {
        let r = rule();
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut vals = [0.0; ORDER];
        let mut vmax: f64 = 0.0;
        for m in 0..ORDER {
            vals[m] = f(mid + half * r.nodes[m]);
            vmax = vmax.max(vals[m].abs());
        }
        let mut coef = [0.0; ORDER];
        for (k, c) in coef.iter_mut().enumerate() {
            let s: f64 = (0..ORDER).map(|m| r.weights[m] * vals[m] * r.legendre[k][m]).sum();
            *c = 0.5 * (2 * k + 1) as f64 * s;
        }
        (Panel { mid, half, coef }, vmax)
    }

    fn tail(&self) -> f64 {
        self.coef[ORDER - 3..].iter().map(|c| c.abs()).sum()
    }
}

/// Piecewise Legendre representation of a real function on an interval.
#[derive(Clone, Debug)]
pub struct PanelExpansion {
    panels: Vec<Panel>,
}

impl PanelExpansion {
    /// Resolves `f` on [min(breaks), max(breaks)], splitting at every
    /// breakpoint and bisecting panels until the trailing Legendre
    /// coefficients fall below `rel_tol` times the largest sampled value.
    pub fn build(f: &dyn Fn(f64) -> f64, breaks: &[f64], rel_tol: f64) -> Result<Self> {
        let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| x.is_finite()).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
        if pts.len() < 2 {
            return Err(Error::Numerical("panel expansion needs a non-empty interval".into()));
        }
        let mut pending: Vec<(f64, f64, usize, Panel, f64, f64)> = Vec::new();
        let mut scale: f64 = 0.0;
        for w in pts.windows(2) {
            let (p, vmax) = Panel::sample(f, w[0], w[1]);
            scale = scale.max(vmax);
            pending.push((w[0], w[1], 0, p, vmax, f64::INFINITY));
        }
        let mut done = Vec::new();
        let budget = MAX_PANELS + 4 * pts.len();
        while let Some((a, b, depth, p, vmax, parent)) = pending.pop() {
            if !vmax.is_finite() || p.coef.iter().any(|c| !c.is_finite()) {
                return Err(Error::Numerical(format!("non-finite integrand on [{a:.6e}, {b:.6e}]")));
            }
            let tiny = (b - a) <= 1e-13 * (1.0 + a.abs().max(b.abs()));
            let tail = p.tail();
            let noise = tail <= NOISE_TOL * scale && tail > 0.5 * parent;
            if tail <= rel_tol * scale || noise || depth >= MAX_DEPTH || tiny {
                done.push(p);
            } else {
                let m = 0.5 * (a + b);
                let (pl, vl) = Panel::sample(f, a, m);
                let (pr, vr) = Panel::sample(f, m, b);
                scale = scale.max(vl).max(vr);
                pending.push((a, m, depth + 1, pl, vl, tail));
                pending.push((m, b, depth + 1, pr, vr, tail));
            }
            if done.len() + pending.len() > budget {
                return Err(Error::Numerical(
                    "panel expansion did not converge (panel budget exhausted)".into(),
                ));
            }
        }
        done.sort_by(|x, y| x.mid.total_cmp(&y.mid));
        Ok(Self { panels: done })
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    pub fn integral(&self) -> f64 {
        self.panels.iter().map(|p| 2.0 * p.half * p.coef[0]).sum()
    }

    /// ∫ f(Ω) e^{−iΩt} dΩ over the expansion interval.
    pub fn fourier(&self, t: f64) -> C64 {
        if t == 0.0 {
            return C64::new(self.integral(), 0.0);
        }
        let mut j = [0.0; ORDER];
        let mut total = C64::new(0.0, 0.0);
        for p in &self.panels {
            let nu = p.half * t;
            spherical_bessel(nu.abs(), &mut j);
            // ∫_{-1}^{1} P_k(u) e^{-iνu} du = 2 (−i)^k j_k(ν); j_k(−ν) = (−1)^k j_k(ν)
            let sign = if nu < 0.0 { -1.0 } else { 1.0 };
            let (mut re, mut im) = (0.0, 0.0);
            for k in 0..ORDER {
                let s = if k % 2 == 1 { sign } else { 1.0 };
                let v = 2.0 * p.coef[k] * j[k] * s;
                match k % 4 {
                    0 => re += v,
                    1 => im -= v,
                    2 => re -= v,
                    _ => im += v,
                }
            }
            let phase = C64::from_polar(1.0, -p.mid * t);
            total += phase * C64::new(re, im) * p.half;
        }
        total
    }
}

/// Spherical Bessel functions j_0..j_{n−1} at x ≥ 0.
pub fn spherical_bessel(x: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    if x < 1.0 {
        let x2 = -0.5 * x * x;
        let mut lead = 1.0;
        for (k, o) in out.iter_mut().enumerate() {
            if k > 0 {
                lead *= x / (2 * k + 1) as f64;
            }
            let mut term = 1.0;
            let mut sum = 1.0;
            for m in 1..30 {
                term *= x2 / (m as f64 * (2 * k + 2 * m + 1) as f64);
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            *o = lead * sum;
        }
        return;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    if x > n as f64 {
        out[0] = j0;
        if n > 1 {
            out[1] = j1;
        }
        for k in 1..n.saturating_sub(1) {
            out[k + 1] = (2 * k + 1) as f64 / x * out[k] - out[k - 1];
        }
        return;
    }
    // Miller's downward recursion, normalized against j0 or j1.
    let start = n + 40 + x as usize;
    let (mut next, mut cur) = (0.0f64, 1e-30f64);
    for k in (1..=start).rev() {
        let prev = (2 * k + 1) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if k - 1 < n {
            out[k - 1] = cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            for o in out.iter_mut() {
                *o *= 1e-250;
            }
        }
    }
    let norm = if j0.abs() >= j1.abs() || n < 2 {
        j0 / out[0]
    } else {
        j1 / out[1]
    };
    for o in out.iter_mut() {
        *o *= norm;
    }
}

/// Sine and cosine integrals Si(x), Ci(x) for x > 0.
pub fn sici(x: f64) -> (f64, f64) {
    const EULER: f64 = 0.577_215_664_901_532_9;
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;
    debug_assert!(x > 0.0);
    if x < 1e-150 {
        return (x, x.ln() + EULER);
    }
    if x > 2.0 {
        let mut b = C64::new(1.0, x);
        let mut c = C64::new(1.0 / FPMIN, 0.0);
        let mut d = C64::new(1.0, 0.0) / b;
        let mut h = d;
        for i in 2..10_000 {
            let a = -((i - 1) * (i - 1)) as f64;
            b += C64::new(2.0, 0.0);
            d = C64::new(1.0, 0.0) / (d * a + b);
            c = b + C64::new(a, 0.0) / c;
            let del = c * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < EPS {
                break;
            }
        }
        let (s, co) = x.sin_cos();
        h *= C64::new(co, -s);
        return (std::f64::consts::FRAC_PI_2 + h.im, -h.re);
    }
    let (mut sum, mut sums, mut sumc) = (0.0f64, 0.0f64, 0.0f64);
    let mut sign = 1.0;
    let mut fact = 1.0;
    let mut odd = true;
    for k in 1..200 {
        fact *= x / k as f64;
        let term = fact / k as f64;
        sum += sign * term;
        let err = term / sum.abs();
        if odd {
            sign = -sign;
            sums = sum;
            sum = sumc;
        } else {
            sumc = sum;
            sum = sums;
        }
        if err < EPS {
            break;
        }
        odd = !odd;
    }
    (sums, sumc + x.ln() + EULER)
}

/// Si(x) for any real x.
pub fn si(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x > 0.0 {
        sici(x).0
    } else {
        -sici(-x).0
    }
}

/// ∫_a^b (1 − cos(yt))/y dy for 0 < a ≤ b, t > 0, without cancellation
/// when the two cosine integrals nearly agree.
pub fn log_minus_ci(a: f64, b: f64, t: f64) -> f64 {
    let (_, cb) = sici(b * t);
    let (_, ca) = sici(a * t);
    (b / a).ln() - (cb - ca)
}
