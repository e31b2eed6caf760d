//! Time amplitudes built from products of two Duhamel factors.
//!
//! Every factor is an exact finite sum of complex exponentials in u, so the
//! amplitude against a time kernel reduces to kernel transforms Q(Omega, b)
//! evaluated at the pairwise sums of the factor frequencies.

use num_complex::Complex64;
use std::sync::OnceLock;

use crate::levy::TimeTestFunction;
use crate::quadrature::GaussLegendre;
use crate::spectral::{duhamel_untruncated, norm};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Below this distance a coefficient of the exponential expansion is treated as singular.
const NEAR: f64 = 1e-2;
/// Below this value of (|xi| + a) t the energy is integrated directly.
const DIRECT_BAND: f64 = 40.0;
/// Node spacing of the fallback interpolation; nodes sit at half-integer offsets.
const H_NODE: f64 = 4e-2;
/// Half-integer node offsets in units of the spacing.
const OFFSETS: [f64; 8] = [-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5];

/// Weights of the Lagrange rule on `OFFSETS` evaluated at 0.
fn lagrange_weights() -> [f64; 8] {
    let mut w = [1.0; 8];
    for (i, wi) in w.iter_mut().enumerate() {
        for (j, &oj) in OFFSETS.iter().enumerate() {
            if i != j {
                *wi *= oj / (oj - OFFSETS[i]);
            }
        }
    }
    w
}

/// Nodes x + k h for the first spacing whose nodes all stay NEAR/2 away from `bad`.
fn nodes(x: f64, bad: &[f64]) -> Vec<(f64, f64)> {
    let w = lagrange_weights();
    let h = [1.0, 1.17, 1.33, 1.51, 1.73]
        .iter()
        .map(|s| s * H_NODE)
        .find(|h| {
            OFFSETS
                .iter()
                .all(|k| bad.iter().all(|b| (x + k * h - b).abs() >= 0.5 * NEAR))
        })
        .unwrap_or(H_NODE);
    OFFSETS.iter().zip(w).map(|(k, wk)| (x + k * h, wk)).collect()
}

/// A finite sum of terms c e^{i w u}.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ExpSum {
    terms: [(f64, Complex64); 3],
    len: usize,
}

impl ExpSum {
    fn iter(&self) -> impl Iterator<Item = &(f64, Complex64)> {
        self.terms[..self.len].iter()
    }
}

/// Linear combination of exponential sums representing one factor.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    parts: Vec<(f64, ExpSum)>,
}

/// e^{i xi u} D(u; xi, a) without degeneracy checks.
fn duhamel_sum(xi: f64, a: f64) -> ExpSum {
    ExpSum {
        terms: [
            (a, Complex64::new(-1.0 / (2.0 * a * (a - xi)), 0.0)),
            (-a, Complex64::new(-1.0 / (2.0 * a * (a + xi)), 0.0)),
            (xi, Complex64::new(1.0 / ((a - xi) * (a + xi)), 0.0)),
        ],
        len: 3,
    }
}

impl Factor {
    /// e^{i xi u} D(u; xi, a), a = |eta| >= 0.
    pub(crate) fn duhamel(xi: f64, a: f64) -> Self {
        if a < NEAR || (xi.abs() - a).abs() < NEAR {
            // entire and even in a, so the nodes may cross zero
            let bad = [0.0, xi.abs(), -xi.abs()];
            let parts = nodes(a, &bad)
                .into_iter()
                .map(|(x, w)| (w, duhamel_sum(xi, x)))
                .collect();
            return Self { parts };
        }
        Self {
            parts: vec![(1.0, duhamel_sum(xi, a))],
        }
    }

    /// e^{i xi u} E(z, u) with E the phase integral.
    pub(crate) fn phase(xi: f64, z: f64) -> Self {
        let sum = |z: f64| {
            let c = 1.0 / (I * z);
            ExpSum {
                terms: [(xi + z, c), (xi, -c), (0.0, ZERO)],
                len: 2,
            }
        };
        if z.abs() < NEAR {
            let parts = nodes(z, &[0.0]).into_iter().map(|(x, w)| (w, sum(x))).collect();
            return Self { parts };
        }
        Self {
            parts: vec![(1.0, sum(z))],
        }
    }
}

/// Time kernel against which the product of two factors is integrated.
#[derive(Debug, Clone, Copy)]
pub(crate) enum TimeKernel<'a> {
    /// int_0^t S_b(t - u) (.) du at a fixed time t.
    Point(f64),
    /// int phi(t) int_0^t S_b(t - u) (.) du dt.
    Test(&'a TimeTestFunction),
}

/// Precomputed kernel data for one spatial frequency b.
struct KernelAt<'a> {
    kernel: TimeKernel<'a>,
    b: f64,
    cb: f64,
    sb: f64,
}

impl<'a> KernelAt<'a> {
    fn new(kernel: TimeKernel<'a>, b: f64) -> Self {
        let (cb, sb) = match kernel {
            TimeKernel::Test(phi) => phi.cos_sin_moments(b),
            TimeKernel::Point(_) => (0.0, 0.0),
        };
        Self { kernel, b, cb, sb }
    }

    /// Q(Omega) = kernel applied to e^{i Omega u}.
    fn q(&self, omega: f64) -> Complex64 {
        let b = self.b;
        match self.kernel {
            TimeKernel::Point(t) => Complex64::from_polar(1.0, omega * t) * duhamel_untruncated(t, omega, b),
            TimeKernel::Test(phi) => {
                if b < 1e-2 && omega.abs() < 1e-2 {
                    return phi
                        .weighted_nodes()
                        .map(|(t, w)| Complex64::from_polar(w, omega * t) * duhamel_untruncated(t, omega, b))
                        .sum();
                }
                let w0 = if omega >= 0.0 { b } else { -b };
                let delta = omega - w0;
                if delta.abs() < 1e-3 {
                    // g(Omega) vanishes at Omega = +-b; expand g / delta around the root
                    let mut g = -I * self.sb;
                    let mut pow = 1.0;
                    let mut fact = 1.0;
                    let mut im = Complex64::new(1.0, 0.0);
                    for m in 1..6 {
                        fact *= m as f64;
                        im *= I;
                        g += im * phi.ft_tpow(m, w0) * (pow / fact);
                        pow *= delta;
                    }
                    return -g / (omega + w0);
                }
                (phi.ft(omega) - self.cb - I * omega * self.sb) / ((b - omega) * (b + omega))
            }
        }
    }
}

fn combine(k: &KernelAt<'_>, f1: &Factor, f2: &Factor) -> Complex64 {
    let mut total = ZERO;
    for (w1, s1) in &f1.parts {
        for (w2, s2) in &f2.parts {
            let mut acc = ZERO;
            for &(o1, c1) in s1.iter() {
                for &(o2, c2) in s2.iter() {
                    acc += c1 * c2 * k.q(o1 + o2);
                }
            }
            total += acc * (w1 * w2);
        }
    }
    total
}

/// Kernel amplitude of e^{iu(xi + xi2)} D(u; xi, a) D(u; xi2, a2) at spatial frequency b, untruncated.
pub(crate) fn duhamel_pair(kernel: TimeKernel<'_>, b: f64, xi: f64, a: f64, xi2: f64, a2: f64) -> Complex64 {
    let k = KernelAt::new(kernel, b);
    combine(&k, &Factor::duhamel(xi, a), &Factor::duhamel(xi2, a2))
}

fn radii(n: u32, eta: &[f64], eta2: &[f64]) -> Option<(f64, f64, f64)> {
    let a = norm(eta);
    let a2 = norm(eta2);
    let b = eta.iter().zip(eta2).map(|(x, y)| (x + y) * (x + y)).sum::<f64>().sqrt();
    let cut = n as f64;
    if a > cut || a2 > cut || b > cut {
        None
    } else {
        Some((a, a2, b))
    }
}

/// U^n = int phi(t) int_0^t e^{iu(xi+xi2)} G^n_{t-u}(eta+eta2) D^n(u;xi,eta) D^n(u;xi2,eta2) du dt.
pub fn wave_amplitude(phi: &TimeTestFunction, n: u32, xi: f64, eta: &[f64], xi2: f64, eta2: &[f64]) -> Complex64 {
    if phi.is_zero() {
        return ZERO;
    }
    match radii(n, eta, eta2) {
        Some((a, a2, b)) => duhamel_pair(TimeKernel::Test(phi), b, xi, a, xi2, a2),
        None => ZERO,
    }
}

/// T^n = int_0^t G^n_{t-s}(eta+eta2) e^{is(xi+xi2)} D^n(s;xi,eta) D^n(s;xi2,eta2) ds.
pub fn point_amplitude(t: f64, n: u32, xi: f64, eta: &[f64], xi2: f64, eta2: &[f64]) -> Complex64 {
    if t <= 0.0 {
        return ZERO;
    }
    match radii(n, eta, eta2) {
        Some((a, a2, b)) => duhamel_pair(TimeKernel::Point(t), b, xi, a, xi2, a2),
        None => ZERO,
    }
}

/// int_0^t (t - s) |D(s; xi, a)|^2 ds, untruncated.
pub fn duhamel_energy(t: f64, xi: f64, a: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let span = (xi.abs() + a) * t;
    if span < DIRECT_BAND {
        // the expansion cancels badly here, so integrate the stable pointwise form
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        let rule = RULE.get_or_init(|| GaussLegendre::new(16));
        let panels = (span / 4.0).ceil().max(1.0) as usize;
        return rule
            .composite(0.0, t, panels)
            .iter()
            .map(|&(s, w)| w * (t - s) * duhamel_untruncated(s, xi, a).norm_sqr())
            .sum();
    }
    let k = KernelAt::new(TimeKernel::Point(t), 0.0);
    let raw = |a: f64| {
        let f1 = Factor {
            parts: vec![(1.0, duhamel_sum(xi, a))],
        };
        let f2 = Factor {
            parts: vec![(1.0, duhamel_sum(-xi, a))],
        };
        combine(&k, &f1, &f2).re
    };
    if a < NEAR || (xi.abs() - a).abs() < NEAR {
        // the energy is even and smooth in a, so interpolate the scalar directly
        return nodes(a, &[0.0, xi.abs(), -xi.abs()])
            .into_iter()
            .map(|(x, w)| w * raw(x.abs()))
            .sum();
    }
    raw(a)
}

/// Resonant part of U^n keeping only the co-rotating sine halves:
/// (1/(4 a a2)) int phi int_0^t S_b(t-u) e^{iu(xi+xi2)} E(a - xi, u) E(-xi2 - a2, u) du dt.
pub fn resonant_amplitude(phi: &TimeTestFunction, n: u32, xi: f64, eta: &[f64], xi2: f64, eta2: &[f64]) -> Complex64 {
    if phi.is_zero() {
        return ZERO;
    }
    let Some((a, a2, b)) = radii(n, eta, eta2) else {
        return ZERO;
    };
    if a == 0.0 || a2 == 0.0 {
        return ZERO;
    }
    let k = KernelAt::new(TimeKernel::Test(phi), b);
    combine(&k, &Factor::phase(xi, a - xi), &Factor::phase(xi2, -xi2 - a2)) / (4.0 * a * a2)
}
