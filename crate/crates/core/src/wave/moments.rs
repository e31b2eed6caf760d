//! Moment functionals of the second-order wave process in the convergent regimes,
//! the K_H double integral and the time-integrated decay probe.

use serde::{Deserialize, Serialize};

use super::amplitude::{duhamel_energy, point_amplitude};
use super::mc::{mc_pair, mc_single, mc_uniform, McBudget};
use super::regime::{classify_regime, valid_exponent_range, RegimeLabel, WeightSpec};
use crate::error::{domain, FrontierError, Result};
use crate::quadrature::{
    geometric_breaks, growth_fit, integrate_breakpoints, integrate_graded, AdaptiveOptions, GrowthFit, McEstimate,
    PowerLaw, QuadratureResult,
};
use crate::spectral::{duhamel_untruncated, norm, HurstVector, MollifierSpec};

/// L(a) = int |xi|^{1-2H0} |D^n(s; xi, a)|^2 dxi over the real line.
pub fn recov_integral(n: u32, h0: f64, s: f64, a: f64) -> Result<QuadratureResult> {
    if !(h0 > 0.0 && h0 < 1.0) {
        return domain(format!("H0 = {h0} must lie in (0, 1)"));
    }
    if s <= 0.0 || a > n as f64 {
        return Ok(QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let e = 1.0 - 2.0 * h0;
    let f = |x: f64| x.powf(e) * duhamel_untruncated(s, x, a).norm_sqr();
    let opts = AdaptiveOptions::new(1e-300, 1e-9).with_budget(4_000_000);
    // |xi|^{1-2H0} is singular at 0 when H0 > 1/2
    let head = integrate_graded(&f, 0.0, 1e-2, (-e).max(0.0), opts)?;
    // beyond this the O(xi^-3) correction to the tail is negligible
    let x_max = 2e3 * a.max(1.0) / s;
    let mut breaks = geometric_breaks(1e-2, x_max, 2.0);
    // resolve the resonance at xi = a and the oscillation of period 2 pi / s
    for k in -4..=4 {
        let p = a + k as f64 * 0.25;
        if p > 1e-2 && p < x_max {
            breaks.push(p);
        }
    }
    let period = 2.0 * std::f64::consts::PI / s;
    let mut x = period;
    while x < (64.0 * period).min(x_max) {
        breaks.push(x);
        x += period;
    }
    breaks.sort_by(|p, q| p.total_cmp(q));
    breaks.dedup();
    let body = integrate_breakpoints(&f, &breaks, opts)?;
    // |D|^2 = S_a(s)^2 / xi^2 + O(xi^-3) beyond the cutoff
    let sa = crate::spectral::sin_kernel(a, s);
    let tail = sa * sa * x_max.powf(-2.0 * h0) / (2.0 * h0);
    Ok(QuadratureResult {
        value: 2.0 * (head.value + body.value + tail),
        abs_error_estimate: 2.0 * (head.abs_error_estimate + body.abs_error_estimate),
        evaluations: head.evaluations + body.evaluations,
    })
}

/// Fitted decay exponent p of L(|eta|) ~ |eta|^-p in log-log scale.
///
/// The returned fit stores p in `slope`; `n_range` holds the magnitude range.
pub fn recov_decay_probe(n: u32, h0: f64, s: f64, eta_magnitudes: &[f64], kappa: f64, eps: f64) -> Result<GrowthFit> {
    if !(kappa >= 0.0 && kappa < h0.min(0.5)) {
        return domain(format!("kappa = {kappa} must lie in [0, min(H0, 1/2))"));
    }
    if !(eps > 0.0 && eps < 0.5 - kappa) {
        return domain(format!("eps = {eps} must lie in (0, 1/2 - kappa)"));
    }
    if eta_magnitudes.iter().any(|&a| !(a > 0.0)) {
        return domain("eta magnitudes must be positive");
    }
    let pts: Vec<(f64, f64)> = eta_magnitudes
        .iter()
        .map(|&a| Ok((a.log2(), recov_integral(n, h0, s, a)?.value)))
        .collect::<Result<_>>()?;
    let fit = growth_fit(&pts)?;
    let lo = eta_magnitudes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eta_magnitudes.iter().cloned().fold(0.0, f64::max);
    Ok(GrowthFit {
        slope: -fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        n_range: (lo, hi),
    })
}

/// Lower bound 1 + 2 H0 - 2 kappa - 2 eps of the decay exponent.
pub fn recov_predicted_exponent(h0: f64, kappa: f64, eps: f64) -> f64 {
    1.0 + 2.0 * h0 - 2.0 * kappa - 2.0 * eps
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CherryIa {
    pub i: f64,
    pub ii: f64,
    pub total: f64,
    /// Standard error of `total` from the sampled parts.
    pub std_error: f64,
}

fn check_h(d: usize, h: &HurstVector) -> Result<()> {
    if h.d() != d {
        return domain(format!("Hurst vector has {} spatial indices, expected {d}", h.d()));
    }
    if d > 2 {
        return domain("deterministic engines support d <= 2");
    }
    Ok(())
}

/// int mu^(n)(dxi, deta) int_0^t (t - s) |D^n(s; xi, eta)|^2 ds.
fn energy_integral(
    d: usize,
    h: &HurstVector,
    t: f64,
    n: u32,
    mollifier: &MollifierSpec,
    budget: &McBudget,
) -> Result<McEstimate> {
    let cut = n as f64;
    if d == 2 {
        return mc_single(h, n, mollifier, budget, |p| {
            let a = norm(p.eta());
            if a > cut {
                0.0
            } else {
                duhamel_energy(t, p.xi, a)
            }
        });
    }
    // d = 1: both integrands are even in xi and eta
    let h0 = h.h0();
    let h1 = h.spatial()[0];
    let x_max = 7.0 * (n as f64).exp2() / mollifier.scale;
    let inner_opts = AdaptiveOptions::new(1e-300, 1e-9).with_budget(400_000);
    let failure = std::cell::RefCell::new(None);
    let inner = |eta: f64| -> f64 {
        let f = |xi: f64| xi.powf(1.0 - 2.0 * h0) * mollifier.weight(n, xi, &[eta]) * duhamel_energy(t, xi, eta);
        let mut breaks = geometric_breaks(1e-3, x_max, 2.0);
        breaks.insert(0, 0.0);
        for k in -4..=4 {
            let p = eta + k as f64 * 0.25;
            if p > 1e-3 && p < x_max {
                breaks.push(p);
            }
        }
        breaks.sort_by(|p, q| p.total_cmp(q));
        breaks.dedup();
        // grading also smooths the cusp of |xi|^{1-2H0} when H0 < 1/2
        let head = integrate_graded(&f, 0.0, 1e-3, (2.0 * h0 - 1.0).max(0.5), inner_opts);
        let body = integrate_breakpoints(&f, &breaks[1..], inner_opts);
        match (head, body) {
            (Ok(a), Ok(b)) => eta.powf(1.0 - 2.0 * h1) * (a.value + b.value),
            (Err(e), _) | (_, Err(e)) => {
                *failure.borrow_mut() = Some(e);
                0.0
            }
        }
    };
    let opts = AdaptiveOptions::new(1e-300, 1e-7).with_budget(20_000);
    let beta = (2.0 * h1 - 1.0).max(0.5);
    let head = integrate_graded(&inner, 0.0, cut.min(1.0), beta, opts)?;
    let body = if cut > 1.0 {
        integrate_breakpoints(&inner, &geometric_breaks(1.0, cut, 2.0), opts)?.value
    } else {
        0.0
    };
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(McEstimate {
        value: 4.0 * (head.value + body),
        std_error: 0.0,
        count: 0,
    })
}

/// Moment decomposition I + 2 II of the regular regime.
#[allow(clippy::too_many_arguments)]
pub fn cherry_moment_ia(
    d: usize,
    h: &HurstVector,
    t: f64,
    gamma: f64,
    n: u32,
    weight: &WeightSpec,
    mollifier: &MollifierSpec,
    budget: &McBudget,
) -> Result<CherryIa> {
    check_h(d, h)?;
    let range = valid_exponent_range(d, h, RegimeLabel::RegularNoRenorm)?;
    if !range.contains(gamma) {
        return domain(format!("gamma = {gamma} outside ({}, {})", range.lo, range.hi));
    }
    if t < 0.0 {
        return domain("t must be nonnegative");
    }
    if t == 0.0 {
        return Ok(CherryIa {
            i: 0.0,
            ii: 0.0,
            total: 0.0,
            std_error: 0.0,
        });
    }
    let wn = weight.l1_norm(d);
    let e = energy_integral(d, h, t, n, mollifier, budget)?;
    let i = wn * e.value * e.value;
    let i_se = wn * 2.0 * e.value.abs() * e.std_error;
    let pair_budget = McBudget {
        seed: budget.seed.wrapping_add(1),
        ..*budget
    };
    let ii = mc_pair(h, n, mollifier, &pair_budget, |p, q| {
        let b2: f64 = p.eta().iter().zip(q.eta()).map(|(x, y)| (x + y) * (x + y)).sum();
        (1.0 + b2).powf(1.0 + gamma) * point_amplitude(t, n, p.xi, p.eta(), q.xi, q.eta()).norm_sqr()
    })?;
    let ii_v = wn * ii.value;
    let ii_se = wn * ii.std_error;
    Ok(CherryIa {
        i,
        ii: ii_v,
        total: i + 2.0 * ii_v,
        std_error: (i_se * i_se + 4.0 * ii_se * ii_se).sqrt(),
    })
}

/// Second moment of the Wick-renormalized process in the Wick regime.
///
/// Only the lower end of the admissible alpha band is enforced.
#[allow(clippy::too_many_arguments)]
pub fn cherry_moment_ib(
    d: usize,
    h: &HurstVector,
    t: f64,
    alpha: f64,
    n: u32,
    weight: &WeightSpec,
    mollifier: &MollifierSpec,
    budget: &McBudget,
) -> Result<McEstimate> {
    check_h(d, h)?;
    let range = valid_exponent_range(d, h, RegimeLabel::WickRenormalizable)?;
    if alpha <= range.lo {
        return domain(format!("alpha = {alpha} must exceed {}", range.lo));
    }
    if t < 0.0 {
        return domain("t must be nonnegative");
    }
    if t == 0.0 {
        return Ok(McEstimate {
            value: 0.0,
            std_error: 0.0,
            count: 0,
        });
    }
    let wn = weight.l1_norm(d);
    let est = mc_pair(h, n, mollifier, budget, |p, q| {
        let b2: f64 = p.eta().iter().zip(q.eta()).map(|(x, y)| (x + y) * (x + y)).sum();
        (1.0 + b2).powf(1.0 - 2.0 * alpha) * point_amplitude(t, n, p.xi, p.eta(), q.xi, q.eta()).norm_sqr()
    })?;
    Ok(McEstimate {
        value: 2.0 * wn * est.value,
        std_error: 2.0 * wn * est.std_error,
        count: est.count,
    })
}

/// K_H(eta) = |eta|-decay factor times prod |eta_i|^{1 - 2 H_i}.
pub fn kh_weight(h: &HurstVector, kappa: f64, eps: f64, eta: &[f64]) -> f64 {
    let p = 1.0 + 2.0 * h.h0() - 2.0 * kappa - 2.0 * eps;
    let r = norm(eta);
    let mut v = 1.0 / (1.0 + r.powf(p));
    for (&e, &hi) in eta.iter().zip(h.spatial()) {
        v *= e.abs().powf(1.0 - 2.0 * hi);
    }
    v
}

/// int int over [-R, R]^{2d} of (1 + |eta - eta2|^2)^{-2 alpha} K_H(eta) K_H(eta2).
///
/// d = 1 uses nested adaptive quadrature; d = 2 uses importance sampling with
/// the error estimate set to three standard errors.
pub fn kh_double_integral(
    d: usize,
    h: &HurstVector,
    alpha: f64,
    kappa: f64,
    eps: f64,
    r: f64,
) -> Result<QuadratureResult> {
    check_h(d, h)?;
    if !(kappa > 0.0 && eps > 0.0) {
        return domain("kappa and eps must be positive");
    }
    if !(r > 1.0) {
        return domain("truncation R must exceed 1");
    }
    if d == 2 {
        return kh_double_mc(h, alpha, kappa, eps, r);
    }
    let h1 = h.spatial()[0];
    let k = |x: f64| kh_weight(h, kappa, eps, &[x]);
    let beta = (2.0 * h1 - 1.0).max(0.0);
    let breaks = geometric_breaks(1.0, r, 2.0);
    let inner_opts = AdaptiveOptions::new(1e-300, 1e-10).with_budget(200_000);
    let failure = std::cell::RefCell::new(None);
    let integrate_axis = |g: &dyn Fn(f64) -> f64, extra: f64| -> f64 {
        let head = integrate_graded(&g, 0.0, 1.0, beta, inner_opts);
        let mut b = breaks.clone();
        for p in [extra - 1.0, extra, extra + 1.0] {
            if p > 1.0 && p < r {
                b.push(p);
            }
        }
        b.sort_by(|p, q| p.total_cmp(q));
        b.dedup();
        let body = integrate_breakpoints(&g, &b, inner_opts);
        match (head, body) {
            (Ok(x), Ok(y)) => x.value + y.value,
            (Err(e), _) | (_, Err(e)) => {
                *failure.borrow_mut() = Some(e);
                0.0
            }
        }
    };
    // K is even, so the square folds onto the positive quadrant
    let outer = |x: f64| -> f64 {
        let g = |y: f64| {
            let kern = (1.0 + (x - y) * (x - y)).powf(-2.0 * alpha) + (1.0 + (x + y) * (x + y)).powf(-2.0 * alpha);
            kern * k(y)
        };
        2.0 * k(x) * integrate_axis(&g, x)
    };
    let opts = AdaptiveOptions::new(1e-300, 1e-8).with_budget(40_000);
    let head = integrate_graded(&outer, 0.0, 1.0, beta, opts)?;
    let body = integrate_breakpoints(&outer, &breaks, opts)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(QuadratureResult {
        value: head.value + body.value,
        abs_error_estimate: head.abs_error_estimate + body.abs_error_estimate,
        evaluations: head.evaluations + body.evaluations,
    })
}

fn kh_double_mc(h: &HurstVector, alpha: f64, kappa: f64, eps: f64, r: f64) -> Result<QuadratureResult> {
    let laws: Vec<PowerLaw> = h
        .spatial()
        .iter()
        .map(|&hi| PowerLaw::new(1.0 - 2.0 * hi, r))
        .collect::<Result<_>>()?;
    let mass: f64 = laws.iter().map(|l| l.mass()).product();
    let p = 1.0 + 2.0 * h.h0() - 2.0 * kappa - 2.0 * eps;
    let count = 1 << 20;
    let est = mc_uniform(count, 0x6b68, 8, |u| {
        let x = [laws[0].sample(u[0], u[1]), laws[1].sample(u[2], u[3])];
        let y = [laws[0].sample(u[4], u[5]), laws[1].sample(u[6], u[7])];
        let dx = norm(&[x[0] - y[0], x[1] - y[1]]);
        mass * mass * (1.0 + dx * dx).powf(-2.0 * alpha) / ((1.0 + norm(&x).powf(p)) * (1.0 + norm(&y).powf(p)))
    });
    Ok(QuadratureResult {
        value: est.value,
        abs_error_estimate: 3.0 * est.std_error,
        evaluations: count,
    })
}

/// Regime check shared by the moment front ends.
pub fn require_regime(d: usize, h: &HurstVector, want: RegimeLabel) -> Result<()> {
    let got = classify_regime(d, h)?;
    if got != want {
        return Err(FrontierError::Domain(format!(
            "expected regime {want:?}, found {got:?}"
        )));
    }
    Ok(())
}
