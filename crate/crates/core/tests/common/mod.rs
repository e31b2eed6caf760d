//! Independent numerical oracles shared by the integration tests.
//!
//! Nothing here calls into the library's quadrature or closed forms, so the
//! comparisons test the library against separately written arithmetic.

#![allow(dead_code)]

use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_m.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre rule on [a, b].
pub struct Rule {
    pub nodes: Vec<(f64, f64)>,
}

impl Rule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let base = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for &(x, w) in &base {
                nodes.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
            }
        }
        Self { nodes }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().map(|&(x, w)| w * f(x)).sum()
    }

    pub fn integrate_c(&self, f: impl Fn(f64) -> Complex64) -> Complex64 {
        self.nodes.iter().map(|&(x, w)| f(x) * w).sum()
    }
}

/// int_a^b f by composite Gauss-Legendre with enough panels for frequency `omega`.
pub fn gl_c(a: f64, b: f64, omega: f64, f: impl Fn(f64) -> Complex64) -> Complex64 {
    let panels = ((b - a) * (omega.abs() + 1.0)).ceil().max(8.0) as usize;
    Rule::new(a, b, panels, 20).integrate_c(f)
}

pub fn gl(a: f64, b: f64, omega: f64, f: impl Fn(f64) -> f64) -> f64 {
    let panels = ((b - a) * (omega.abs() + 1.0)).ceil().max(8.0) as usize;
    Rule::new(a, b, panels, 20).integrate(f)
}

/// sin(a r)/a with its limit r at a = 0.
pub fn sinc_kernel(a: f64, r: f64) -> f64 {
    if a == 0.0 {
        r
    } else {
        (a * r).sin() / a
    }
}

/// D(s; xi, a) = int_0^s e^{-i xi r} sin(a r)/a dr by brute-force quadrature.
pub fn duhamel_oracle(s: f64, xi: f64, a: f64) -> Complex64 {
    gl_c(0.0, s, xi.abs() + a, |r| {
        Complex64::from_polar(1.0, -xi * r) * sinc_kernel(a, r)
    })
}

/// Normalized bump exp(-1/((t - lo)(hi - t))) on (lo, hi) by direct quadrature.
pub struct BumpOracle {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

impl BumpOracle {
    pub fn new(lo: f64, hi: f64) -> Self {
        let raw = |t: f64| {
            if t <= lo || t >= hi {
                0.0
            } else {
                (-1.0 / ((t - lo) * (hi - t))).exp()
            }
        };
        let mass = Rule::new(lo, hi, 200, 20).integrate(raw);
        Self { lo, hi, mass }
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= self.lo || t >= self.hi {
            0.0
        } else {
            (-1.0 / ((t - self.lo) * (self.hi - t))).exp() / self.mass
        }
    }

    pub fn rule(&self, panels: usize) -> Vec<(f64, f64)> {
        Rule::new(self.lo, self.hi, panels, 20)
            .nodes
            .into_iter()
            .map(|(t, w)| (t, w * self.value(t)))
            .collect()
    }
}

/// Sample mean and standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Kolmogorov-Smirnov statistic of samples against a continuous CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Small deterministic generator for test inputs (SplitMix64).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
}
