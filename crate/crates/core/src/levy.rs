//! Second moment of the mollified fractional Levy area, its M/R split and the
//! H = 1/4 breakup experiment.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{domain, FrontierError, Result};
use crate::quadrature::{geometric_breaks, integrate_breakpoints, AdaptiveOptions, GaussLegendre, QuadratureResult};
use crate::spectral::MollifierSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Spacing of the frequency grid of the transform table.
const TABLE_STEP: f64 = 0.25;
/// Number of shifted moments stored per grid frequency.
const TABLE_ORDER: usize = 14;
/// Raw moments kept for small-frequency series.
const RAW_MOMENTS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeTestKind {
    /// exp(-1/((t - lo)(hi - t))) on (lo, hi), normalized to unit integral.
    BumpOn01,
}

/// Quadrature rule, transform table and moments of a unit-mass bump.
#[derive(Debug)]
struct PhiTable {
    center: f64,
    /// (t, weight * phi(t)) with the weights summing to one.
    rule: Vec<(f64, f64)>,
    omega_max: f64,
    half: usize,
    /// shifted[k][m] = int phi(t) (t - c)^m e^{i w_k t} dt with w_k = (k - half) * step.
    shifted: Vec<[Complex64; TABLE_ORDER]>,
    /// raw[j] = int phi(t) t^j dt.
    raw: Vec<f64>,
}

fn bump_raw(lo: f64, hi: f64, t: f64) -> f64 {
    if t <= lo || t >= hi {
        0.0
    } else {
        (-1.0 / ((t - lo) * (hi - t))).exp()
    }
}

impl PhiTable {
    fn build(lo: f64, hi: f64) -> Self {
        let gl = GaussLegendre::new(16);
        let mut rule = gl.composite(lo, hi, 64);
        let mut mass = 0.0;
        for r in rule.iter_mut() {
            r.1 *= bump_raw(lo, hi, r.0);
            mass += r.1;
        }
        for r in rule.iter_mut() {
            r.1 /= mass;
        }
        let center = 0.5 * (lo + hi);
        // transform decay is governed by the support width
        let omega_max = 400.0 / (hi - lo);
        let half = (omega_max / TABLE_STEP).ceil() as usize;
        let shifted: Vec<[Complex64; TABLE_ORDER]> = (0..=2 * half)
            .into_par_iter()
            .map(|k| {
                let w = (k as f64 - half as f64) * TABLE_STEP;
                let mut acc = [Complex64::new(0.0, 0.0); TABLE_ORDER];
                for &(t, wt) in &rule {
                    let e = Complex64::from_polar(wt, w * t);
                    let dt = t - center;
                    let mut p = 1.0;
                    for a in acc.iter_mut() {
                        *a += e * p;
                        p *= dt;
                    }
                }
                acc
            })
            .collect();
        let raw = (0..RAW_MOMENTS)
            .map(|j| rule.iter().map(|&(t, w)| w * t.powi(j as i32)).sum())
            .collect();
        Self {
            center,
            rule,
            omega_max,
            half,
            shifted,
            raw,
        }
    }

    fn cached(lo: f64, hi: f64) -> Arc<PhiTable> {
        type Cache = Mutex<HashMap<(u64, u64), Arc<PhiTable>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (lo.to_bits(), hi.to_bits());
        if let Some(t) = cache.lock().expect("table cache poisoned").get(&key) {
            return t.clone();
        }
        let t = Arc::new(PhiTable::build(lo, hi));
        cache.lock().expect("table cache poisoned").insert(key, t.clone());
        t
    }

    /// int phi(t) (t - c)^m e^{i w t} dt for m < 4 via the Taylor shift from the grid.
    fn shifted_ft(&self, m: usize, w: f64) -> Complex64 {
        if w.abs() > self.omega_max {
            return Complex64::new(0.0, 0.0);
        }
        let kf = (w / TABLE_STEP).round();
        let k = (kf as i64 + self.half as i64) as usize;
        let delta = w - kf * TABLE_STEP;
        let row = &self.shifted[k];
        let mut sum = Complex64::new(0.0, 0.0);
        let mut coef = Complex64::new(1.0, 0.0);
        for j in 0..TABLE_ORDER - m {
            sum += coef * row[m + j];
            coef = coef * I * delta / (j + 1) as f64;
        }
        // e^{i delta t} = e^{i delta c} e^{i delta (t - c)}
        sum * Complex64::from_polar(1.0, delta * self.center)
    }
}

/// Smooth nonnegative time test function supported in (0, 1).
#[derive(Debug, Clone)]
pub struct TimeTestFunction {
    pub kind: TimeTestKind,
    pub support: (f64, f64),
    pub amplitude: f64,
    table: Arc<PhiTable>,
}

impl PartialEq for TimeTestFunction {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.support == other.support && self.amplitude == other.amplitude
    }
}

impl Default for TimeTestFunction {
    fn default() -> Self {
        Self::bump(0.5, 1.0).expect("default support is valid")
    }
}

impl TimeTestFunction {
    /// Unit-mass bump on (lo, hi) with 0 <= lo < hi <= 1.
    pub fn bump(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return domain(format!("bump support ({lo}, {hi}) must lie in [0, 1]"));
        }
        Ok(Self {
            kind: TimeTestKind::BumpOn01,
            support: (lo, hi),
            amplitude: 1.0,
            table: PhiTable::cached(lo, hi),
        })
    }

    /// The same shape multiplied by c >= 0 (c = 0 gives the zero function).
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.amplitude *= c;
        out
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    pub fn value(&self, t: f64) -> f64 {
        let (lo, hi) = self.support;
        let norm = self.raw_mass();
        self.amplitude * bump_raw(lo, hi, t) / norm
    }

    /// Integral of the unnormalized bump.
    fn raw_mass(&self) -> f64 {
        let (lo, hi) = self.support;
        let gl = GaussLegendre::new(16);
        gl.composite(lo, hi, 64)
            .iter()
            .map(|&(t, w)| w * bump_raw(lo, hi, t))
            .sum()
    }

    /// Quadrature nodes with weights already multiplied by phi.
    pub fn weighted_nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.table.rule.iter().map(move |&(t, w)| (t, w * self.amplitude))
    }

    /// int phi(t) t^j dt.
    pub fn moment(&self, j: usize) -> f64 {
        if j < RAW_MOMENTS {
            self.amplitude * self.table.raw[j]
        } else {
            self.weighted_nodes().map(|(t, w)| w * t.powi(j as i32)).sum()
        }
    }

    /// Frequency beyond which the transform is below double precision.
    pub fn omega_max(&self) -> f64 {
        self.table.omega_max
    }

    /// Fourier transform int phi(t) e^{i w t} dt.
    pub fn ft(&self, w: f64) -> Complex64 {
        self.table.shifted_ft(0, w) * self.amplitude
    }

    /// int phi(t) t^m e^{i w t} dt for m < 6.
    pub(crate) fn ft_tpow(&self, m: usize, w: f64) -> Complex64 {
        let c = self.table.center;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut binom = 1.0;
        for j in 0..=m {
            sum += self.table.shifted_ft(j, w) * (binom * c.powi((m - j) as i32));
            binom = binom * (m - j) as f64 / (j + 1) as f64;
        }
        sum * self.amplitude
    }

    /// C_b = int phi cos(bt) dt and int phi sin(bt)/b dt.
    pub(crate) fn cos_sin_moments(&self, b: f64) -> (f64, f64) {
        let f = self.ft(b);
        if b.abs() >= 1e-3 {
            return (f.re, f.im / b);
        }
        let mut s = 0.0;
        let mut term = 1.0;
        for k in 0..8 {
            s += term * self.moment(2 * k + 1);
            term *= -b * b / ((2 * k + 2) * (2 * k + 3)) as f64;
        }
        (f.re, s)
    }

    /// Derivatives of the transform of order 0, 1, 2 at w.
    fn ft_derivs(&self, w: f64) -> [Complex64; 3] {
        let c = self.table.center;
        let p0 = self.table.shifted_ft(0, w);
        let p1 = self.table.shifted_ft(1, w);
        let p2 = self.table.shifted_ft(2, w);
        let t1 = p0 * c + p1;
        let t2 = p0 * (c * c) + p1 * (2.0 * c) + p2;
        [p0 * self.amplitude, I * t1 * self.amplitude, -t2 * self.amplitude]
    }

    /// F(z) = int phi(t) E(z, t) dt with E the phase integral, and its first two z-derivatives.
    pub fn phase_transform_derivs(&self, z: f64) -> [Complex64; 3] {
        if z.abs() <= 1.0 {
            // sum_j (iz)^j m_{j+1} / (j+1)!
            let mut f = [Complex64::new(0.0, 0.0); 3];
            let mut izj = Complex64::new(1.0, 0.0);
            let mut fact = 1.0;
            for j in 0..RAW_MOMENTS - 1 {
                fact *= (j + 1) as f64;
                let c = self.moment(j + 1) / fact;
                f[0] += izj * c;
                if j >= 1 {
                    // d/dz (iz)^j = i j (iz)^{j-1}
                    f[1] += I * j as f64 * ipow(z, j - 1) * c;
                }
                if j >= 2 {
                    f[2] -= (j * (j - 1)) as f64 * ipow(z, j - 2) * c;
                }
                izj *= I * z;
            }
            return f;
        }
        let p = self.ft_derivs(z);
        let p0 = Complex64::new(self.amplitude, 0.0);
        let iz = I * z;
        let f0 = (p[0] - p0) / iz;
        let f1 = p[1] / iz - (p[0] - p0) / (iz * z);
        let f2 = p[2] / iz - p[1] * 2.0 / (iz * z) + (p[0] - p0) * 2.0 / (iz * z * z);
        [f0, f1, f2]
    }

    pub fn phase_transform(&self, z: f64) -> Complex64 {
        if z.abs() <= 1.0 {
            let mut f = Complex64::new(0.0, 0.0);
            let mut izj = Complex64::new(1.0, 0.0);
            let mut fact = 1.0;
            for j in 0..RAW_MOMENTS - 1 {
                fact *= (j + 1) as f64;
                f += izj * (self.moment(j + 1) / fact);
                izj *= I * z;
            }
            return f;
        }
        (self.ft(z) - self.amplitude) / (I * z)
    }
}

/// (iz)^k.
fn ipow(z: f64, k: usize) -> Complex64 {
    let mut v = Complex64::new(1.0, 0.0);
    for _ in 0..k {
        v *= I * z;
    }
    v
}

/// M_phi(xi, xi2) = int phi(t) E(xi + xi2, t) dt.
pub fn m_phi(phi: &TimeTestFunction, xi: f64, xi2: f64) -> Complex64 {
    phi.phase_transform(xi + xi2)
}

/// R_phi(xi) = -int phi(t) E(xi, t) dt.
pub fn r_phi(phi: &TimeTestFunction, xi: f64) -> Complex64 {
    -phi.phase_transform(xi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyAreaConfig {
    pub h: f64,
    pub phi: TimeTestFunction,
    pub mollifier: MollifierSpec,
    pub n_range: (u32, u32),
    pub tol: f64,
}

impl LevyAreaConfig {
    pub fn new(h: f64, n_range: (u32, u32)) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return domain(format!("Hurst index {h} must lie in (0, 1)"));
        }
        if n_range.0 > n_range.1 {
            return domain("empty n range");
        }
        Ok(Self {
            h,
            phi: TimeTestFunction::default(),
            mollifier: MollifierSpec::default(),
            n_range,
            tol: 1e-6,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevyRegime {
    Convergent,
    Divergent,
}

pub fn classify_levy(h: f64) -> Result<LevyRegime> {
    if !(h > 0.0 && h < 1.0) {
        return domain(format!("Hurst index {h} must lie in (0, 1)"));
    }
    Ok(if h > 0.25 {
        LevyRegime::Convergent
    } else {
        LevyRegime::Divergent
    })
}

/// Width of the exact expansion collar around xi2 = 0.
const COLLAR: f64 = 1e-3;

struct LevyIntegrand<'a> {
    cfg: &'a LevyAreaConfig,
    n: u32,
    cutoff: f64,
}

impl<'a> LevyIntegrand<'a> {
    fn new(cfg: &'a LevyAreaConfig, n: u32) -> Self {
        // mollifier weight below 1e-21 beyond this radius
        let cutoff = 7.0 * (n as f64).exp2() / cfg.mollifier.scale;
        Self { cfg, n, cutoff }
    }

    fn moll(&self, x: f64) -> f64 {
        self.cfg.mollifier.weight(self.n, x, &[])
    }

    /// Frequency breakpoints that resolve the transform oscillation near `center`.
    fn resonance_breaks(&self, center: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
        let wmax = self.cfg.phi.omega_max();
        let mut step = 8.0;
        let mut k = 1.0;
        while k * step <= wmax {
            for p in [center - k * step, center + k * step] {
                if p > lo && p < hi {
                    out.push(p);
                }
            }
            k += 1.0;
        }
        step = wmax;
        let mut r = 2.0 * step;
        while r < hi - lo {
            for p in [center - r, center + r] {
                if p > lo && p < hi {
                    out.push(p);
                }
            }
            r *= 2.0;
        }
        if center > lo && center < hi {
            out.push(center);
        }
    }

    /// int over xi2 of |xi2|^{-1-2H} g(xi2) |F(xi + xi2) - F(xi)|^2.
    fn inner(&self, xi: f64, opts: AdaptiveOptions) -> Result<QuadratureResult> {
        let h = self.cfg.h;
        let phi = &self.cfg.phi;
        let fxi = phi.phase_transform_derivs(xi);
        // exact quadratic expansion on the collar |xi2| < COLLAR, both sides
        let e = 2.0 - 2.0 * h;
        let d1 = fxi[1];
        let d2 = fxi[2] * 0.5;
        let collar = 2.0 * (d1.norm_sqr() * COLLAR.powf(e) / e + d2.norm_sqr() * COLLAR.powf(e + 2.0) / (e + 2.0));
        let f = |x: f64| {
            let diff = phi.phase_transform(xi + x) - fxi[0];
            x.abs().powf(-1.0 - 2.0 * h) * self.moll(x) * diff.norm_sqr()
        };
        let l = self.cutoff;
        let mut breaks = geometric_breaks(COLLAR, l, 2.0);
        let mut neg: Vec<f64> = geometric_breaks(COLLAR, l, 2.0).iter().map(|x| -x).collect();
        self.resonance_breaks(-xi, -l, l, &mut breaks);
        neg.retain(|&x| x < -COLLAR);
        let mut all: Vec<f64> = breaks.into_iter().chain(neg).collect();
        all.push(-COLLAR);
        all.sort_by(|a, b| a.total_cmp(b));
        all.dedup();
        let pos: Vec<f64> = all.iter().cloned().filter(|&x| x >= COLLAR).collect();
        let negs: Vec<f64> = all.iter().cloned().filter(|&x| x <= -COLLAR).collect();
        let a = integrate_breakpoints(&f, &pos, opts)?;
        let b = integrate_breakpoints(&f, &negs, opts)?;
        Ok(QuadratureResult {
            value: a.value + b.value + collar,
            abs_error_estimate: a.abs_error_estimate + b.abs_error_estimate,
            evaluations: a.evaluations + b.evaluations,
        })
    }

    fn outer_breaks(&self, lo: f64) -> Vec<f64> {
        let mut b = geometric_breaks(lo, self.cutoff, 2.0);
        let wmax = self.cfg.phi.omega_max();
        let mut x = 8.0;
        while x < wmax.min(self.cutoff) {
            if x > lo {
                b.push(x);
            }
            x += 8.0;
        }
        b.sort_by(|a, c| a.total_cmp(c));
        b.dedup();
        b
    }
}

fn combine(a: QuadratureResult, b: QuadratureResult) -> QuadratureResult {
    QuadratureResult {
        value: a.value + b.value,
        abs_error_estimate: a.abs_error_estimate + b.abs_error_estimate,
        evaluations: a.evaluations + b.evaluations,
    }
}

fn nested_outer<F>(f: &F, breaks: &[f64], tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Result<QuadratureResult>,
{
    let failure = std::cell::RefCell::new(None);
    let evals = std::cell::Cell::new(0usize);
    let g = |x: f64| match f(x) {
        Ok(r) => {
            evals.set(evals.get() + r.evaluations);
            r.value
        }
        Err(e) => {
            *failure.borrow_mut() = Some(e);
            0.0
        }
    };
    let mut r = integrate_breakpoints(&g, breaks, AdaptiveOptions::new(0.0, tol).with_budget(400_000))?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    r.evaluations = evals.get();
    Ok(r)
}

/// A_n by nested adaptive quadrature; `half_domain` integrates xi > 0 and doubles.
pub fn levy_second_moment_with(cfg: &LevyAreaConfig, n: u32, half_domain: bool) -> Result<QuadratureResult> {
    if cfg.phi.is_zero() {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let li = LevyIntegrand::new(cfg, n);
    let inner_opts = AdaptiveOptions::new(0.0, cfg.tol * 0.01).with_budget(400_000);
    let h = cfg.h;
    let outer = |xi: f64| -> Result<QuadratureResult> {
        let r = li.inner(xi, inner_opts)?;
        let w = xi.abs().powf(1.0 - 2.0 * h) * li.moll(xi);
        Ok(QuadratureResult {
            value: w * r.value,
            ..r
        })
    };
    // graded start near xi = 0 handles |xi|^{1-2H}
    let start = 1e-6;
    let head = |xi_abs: f64| -> f64 { xi_abs.powf(2.0 - 2.0 * h) / (2.0 - 2.0 * h) };
    let pos = {
        let breaks = li.outer_breaks(start);
        let body = nested_outer(&outer, &breaks, cfg.tol)?;
        let g0 = li.inner(start, inner_opts)?.value;
        QuadratureResult {
            value: body.value + g0 * head(start),
            ..body
        }
    };
    if half_domain {
        return Ok(QuadratureResult {
            value: 2.0 * pos.value,
            abs_error_estimate: 2.0 * pos.abs_error_estimate,
            evaluations: pos.evaluations,
        });
    }
    let neg = {
        let breaks = li.outer_breaks(start);
        let refl = |xi: f64| outer(-xi);
        let body = nested_outer(&refl, &breaks, cfg.tol)?;
        let g0 = li.inner(-start, inner_opts)?.value;
        QuadratureResult {
            value: body.value + g0 * head(start),
            ..body
        }
    };
    Ok(combine(pos, neg))
}

/// A_n, the second moment of the mollified Levy area tested against phi.
pub fn levy_second_moment(cfg: &LevyAreaConfig, n: u32) -> Result<QuadratureResult> {
    levy_second_moment_with(cfg, n, true)
}

/// Restricted-domain pieces of the lower bound J_n = J_M + J_MR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevySplit {
    pub j_m: QuadratureResult,
    pub j_mr: QuadratureResult,
}

/// J_M and J_MR over xi in (1, inf), xi2 in (xi, 2 xi) with M evaluated at (xi, -xi2).
pub fn levy_m_split(cfg: &LevyAreaConfig, n: u32) -> Result<LevySplit> {
    let zero = QuadratureResult {
        value: 0.0,
        abs_error_estimate: 0.0,
        evaluations: 0,
    };
    if cfg.phi.is_zero() {
        return Ok(LevySplit { j_m: zero, j_mr: zero });
    }
    let li = LevyIntegrand::new(cfg, n);
    let h = cfg.h;
    let phi = &cfg.phi;
    let inner_opts = AdaptiveOptions::new(0.0, cfg.tol * 0.01).with_budget(400_000);
    let piece = |which: u8| {
        let outer = |xi: f64| -> Result<QuadratureResult> {
            let r = phi.phase_transform(xi) * -1.0;
            let f = |z: f64| {
                let x2 = xi + z;
                let m = phi.phase_transform(-z);
                let dens = x2.powf(-1.0 - 2.0 * h) * li.moll(x2);
                let v = if which == 0 {
                    m.norm_sqr()
                } else {
                    2.0 * (m * r.conj()).re + r.norm_sqr()
                };
                dens * v
            };
            let mut breaks = vec![0.0, xi];
            li.resonance_breaks(0.0, 0.0, xi, &mut breaks);
            breaks.extend(geometric_breaks(1.0, xi, 2.0).into_iter().filter(|&x| x < xi));
            breaks.sort_by(|a, b| a.total_cmp(b));
            breaks.dedup();
            let opts = AdaptiveOptions {
                abs_tol: 1e-300,
                ..inner_opts
            };
            let r = integrate_breakpoints(&f, &breaks, opts)?;
            let w = xi.powf(1.0 - 2.0 * h) * li.moll(xi);
            Ok(QuadratureResult {
                value: w * r.value,
                ..r
            })
        };
        let breaks = li.outer_breaks(1.0);
        nested_outer(&outer, &breaks, cfg.tol)
    };
    let j_m = piece(0)?;
    let j_mr = match piece(1) {
        Ok(r) => r,
        // the cross term can vanish to rounding; an absolute floor keeps it finite
        Err(FrontierError::NonConvergence {
            estimate,
            abs_error,
            evaluations,
        }) if abs_error <= cfg.tol * j_m.value.abs() => QuadratureResult {
            value: estimate,
            abs_error_estimate: abs_error,
            evaluations,
        },
        Err(e) => return Err(e),
    };
    Ok(LevySplit { j_m, j_mr })
}

/// One row of a Levy sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyRecord {
    pub n: u32,
    pub a_n: QuadratureResult,
    pub j_m: QuadratureResult,
    pub j_mr: QuadratureResult,
}

/// Evaluates every n of the configured range concurrently, ordered by n.
pub fn levy_scan(cfg: &LevyAreaConfig) -> Vec<Result<LevyRecord>> {
    (cfg.n_range.0..=cfg.n_range.1)
        .into_par_iter()
        .map(|n| {
            let a_n = levy_second_moment(cfg, n)?;
            let split = levy_m_split(cfg, n)?;
            Ok(LevyRecord {
                n,
                a_n,
                j_m: split.j_m,
                j_mr: split.j_mr,
            })
        })
        .collect()
}
