//! Scalar building blocks: spectral densities, mollifier transforms,
//! wave-kernel transforms and the closed-form Duhamel time integrals.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{domain, Result};
use crate::quadrature::gauss::GaussLegendre;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Hurst index H = (H0, H1, ..., Hd) of a fractional noise on R x R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstVector {
    h: Vec<f64>,
}

impl HurstVector {
    /// Validates 0 < H0 < 1 and 0 < Hi < 3/4 for the spatial indices.
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.len() < 2 {
            return domain("a Hurst vector needs a temporal and at least one spatial index");
        }
        if !(h[0] > 0.0 && h[0] < 1.0) {
            return domain(format!("h[0] = {} must lie in (0, 1)", h[0]));
        }
        for (i, &v) in h.iter().enumerate().skip(1) {
            if !(v > 0.0 && v < 0.75) {
                return domain(format!("h[{i}] = {v} must lie in (0, 3/4)"));
            }
        }
        Ok(Self { h })
    }

    /// Same index repeated in every coordinate.
    pub fn uniform(d: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; d + 1])
    }

    pub fn d(&self) -> usize {
        self.h.len() - 1
    }

    pub fn h0(&self) -> f64 {
        self.h[0]
    }

    pub fn spatial(&self) -> &[f64] {
        &self.h[1..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.h
    }

    pub fn h_plus(&self) -> f64 {
        self.spatial().iter().sum()
    }

    /// H0 + H+.
    pub fn sum(&self) -> f64 {
        self.h0() + self.h_plus()
    }
}

/// Density of the spectral measure mu_H at (xi, eta).
pub fn mu_density(h: &HurstVector, xi: f64, eta: &[f64]) -> Result<f64> {
    if eta.len() != h.d() {
        return domain(format!("eta has {} coordinates, expected {}", eta.len(), h.d()));
    }
    if xi == 0.0 || eta.contains(&0.0) {
        return domain("the spectral density is singular on coordinate hyperplanes");
    }
    let mut v = xi.abs().powf(1.0 - 2.0 * h.h0());
    for (&e, &hi) in eta.iter().zip(h.spatial()) {
        v *= e.abs().powf(1.0 - 2.0 * hi);
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MollifierKind {
    /// Product Gaussian with transform exp(-scale^2 |k|^2 / 2).
    GaussianProduct,
    /// Product of compactly supported bumps c exp(-1/(1 - s^2)) on (-scale, scale).
    CompactBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub kind: MollifierKind,
    pub scale: f64,
}

impl Default for MollifierSpec {
    fn default() -> Self {
        Self {
            kind: MollifierKind::GaussianProduct,
            scale: 1.0,
        }
    }
}

impl MollifierSpec {
    pub fn new(kind: MollifierKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return domain(format!("mollifier scale {scale} must be positive"));
        }
        Ok(Self { kind, scale })
    }

    /// Transform of the unscaled mollifier at the frequency vector k.
    pub fn transform(&self, k: &[f64]) -> f64 {
        match self.kind {
            MollifierKind::GaussianProduct => {
                let r2: f64 = k.iter().map(|x| x * x).sum();
                (-0.5 * self.scale * self.scale * r2).exp()
            }
            MollifierKind::CompactBump => k.iter().map(|&x| bump_transform_1d(self.scale * x)).product(),
        }
    }

    /// Squared modulus of the transform of rho_n, used as the mollifier weight.
    pub fn weight(&self, n: u32, xi: f64, eta: &[f64]) -> f64 {
        let v = mollifier_ft(self, n, xi, eta);
        v * v
    }
}

struct BumpTable {
    rule: Vec<(f64, f64)>,
}

fn bump_table() -> &'static BumpTable {
    static TABLE: OnceLock<BumpTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let gl = GaussLegendre::new(16);
        let panels = 32;
        let mut rule = Vec::with_capacity(panels * 16);
        let mut mass = 0.0;
        for p in 0..panels {
            let a = p as f64 / panels as f64;
            let b = (p + 1) as f64 / panels as f64;
            for (x, w) in gl.mapped(a, b) {
                let v = (-1.0 / (1.0 - x * x)).exp();
                rule.push((x, w * v));
                mass += 2.0 * w * v;
            }
        }
        for r in rule.iter_mut() {
            r.1 /= mass;
        }
        BumpTable { rule }
    })
}

/// Cosine transform of the normalized even bump on (-1, 1).
fn bump_transform_1d(k: f64) -> f64 {
    let t = bump_table();
    2.0 * t.rule.iter().map(|&(x, w)| w * (k * x).cos()).sum::<f64>()
}

/// Transform of rho_n at (xi, eta), i.e. the unscaled transform at 2^-n (xi, eta).
pub fn mollifier_ft(spec: &MollifierSpec, n: u32, xi: f64, eta: &[f64]) -> f64 {
    let s = (-(n as f64)).exp2();
    let mut k = Vec::with_capacity(eta.len() + 1);
    k.push(s * xi);
    k.extend(eta.iter().map(|e| s * e));
    spec.transform(&k)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// sin(b t) / b with the limit t at b = 0.
pub fn sin_kernel(b: f64, t: f64) -> f64 {
    let x = b * t;
    if x.abs() < 1e-4 {
        t * (1.0 - x * x / 6.0 + x * x * x * x / 120.0)
    } else {
        x.sin() / b
    }
}

/// Spatial transform of the wave kernel, sin(t|eta|)/|eta|, optionally truncated at |eta| <= n.
pub fn wave_kernel_ft(t: f64, eta: &[f64], cutoff: Option<u32>) -> f64 {
    let a = norm(eta);
    if let Some(n) = cutoff {
        if a > n as f64 {
            return 0.0;
        }
    }
    sin_kernel(a, t)
}

/// E(z, s) = int_0^s e^{izr} dr.
pub fn phase_integral(z: f64, s: f64) -> Complex64 {
    let x = z * s;
    if x.abs() < 1e-4 {
        let ix = I * x;
        let series = Complex64::new(1.0, 0.0) + ix / 2.0 + ix * ix / 6.0 + ix * ix * ix / 24.0;
        return series * s;
    }
    let h = (0.5 * x).sin();
    // (e^{ix} - 1) / (iz) with e^{ix} - 1 = -2 sin^2(x/2) + i sin x
    Complex64::new(x.sin() / z, 2.0 * h * h / z)
}

/// M_k(z, s) = int_0^s r^k e^{izr} dr.
pub fn phase_moment(k: u32, z: f64, s: f64) -> Complex64 {
    if k == 0 {
        return phase_integral(z, s);
    }
    let x = z * s;
    if x.abs() <= (k as f64 + 1.0).max(2.0) {
        // power series in iz
        let mut term = Complex64::new(s.powi(k as i32 + 1), 0.0);
        let mut sum = term / (k as f64 + 1.0);
        for j in 1..80 {
            term = term * I * x / j as f64;
            let add = term / (j as f64 + k as f64 + 1.0);
            sum += add;
            if add.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        return sum;
    }
    let e = Complex64::from_polar(1.0, x);
    let iz = I * z;
    let mut m = phase_integral(z, s);
    let mut sk = 1.0;
    for j in 1..=k {
        sk *= s;
        m = (e * sk - m * j as f64) / iz;
    }
    m
}

/// Evaluator of D^n(s; xi, eta) = int_0^s e^{-i xi r} sin(r|eta|)/|eta| 1_{|eta|<=n} dr.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuhamelEvaluator {
    pub n: u32,
}

impl DuhamelEvaluator {
    pub fn new(n: u32) -> Self {
        Self { n }
    }

    /// Evaluation from the frequency modulus a = |eta|.
    pub fn eval_radial(&self, s: f64, xi: f64, a: f64) -> Complex64 {
        if s == 0.0 || a > self.n as f64 {
            return Complex64::new(0.0, 0.0);
        }
        duhamel_untruncated(s, xi, a)
    }

    pub fn eval(&self, s: f64, xi: f64, eta: &[f64]) -> Complex64 {
        self.eval_radial(s, xi, norm(eta))
    }
}

/// D(s; xi, a) without spectral truncation.
pub fn duhamel_untruncated(s: f64, xi: f64, a: f64) -> Complex64 {
    if s == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    if a == 0.0 {
        return phase_moment(1, -xi, s);
    }
    if a < 1e-3 {
        // sin(ar)/a = r - a^2 r^3/6 + a^4 r^5/120
        let a2 = a * a;
        return phase_moment(1, -xi, s) - phase_moment(3, -xi, s) * (a2 / 6.0)
            + phase_moment(5, -xi, s) * (a2 * a2 / 120.0);
    }
    if (xi.abs() - a).abs() >= 1.0 {
        let amp = 1.0 / ((a - xi) * (a + xi));
        let w = Complex64::new((a * s).cos(), xi * sin_kernel(a, s));
        return (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -xi * s) * w) * amp;
    }
    (phase_integral(a - xi, s) - phase_integral(-(a + xi), s)) / (2.0 * I * a)
}

/// Free-function form of the Duhamel evaluator.
pub fn duhamel(n: u32, s: f64, xi: f64, eta: &[f64]) -> Complex64 {
    DuhamelEvaluator::new(n).eval(s, xi, eta)
}
