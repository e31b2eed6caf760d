use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{FrontierError, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

/// Outcome of a deterministic integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

/// Tolerances and budget for the adaptive driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl AdaptiveOptions {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            max_evals: 2_000_000,
        }
    }

    pub fn with_budget(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }
}

/// 21-point Kronrod estimate with the embedded 10-point Gauss error.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = resk * h;
    let resabs = resabs * h.abs();
    let resasc = resasc * h.abs();
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss-Kronrod integration over consecutive breakpoints.
pub fn integrate_breakpoints<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    opts: AdaptiveOptions,
) -> Result<QuadratureResult> {
    if breaks.len() < 2 {
        return Err(FrontierError::Domain("empty integration range".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (v, e) = gk21(f, w[0], w[1]);
        evals += 21;
        total += v;
        total_err += e;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            err: e,
        });
    }
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= target || heap.is_empty() {
            break;
        }
        if evals >= opts.max_evals {
            return Err(FrontierError::NonConvergence {
                estimate: total,
                abs_error: total_err,
                evaluations: evals,
            });
        }
        let seg = heap.pop().expect("heap is nonempty");
        let m = 0.5 * (seg.a + seg.b);
        if m <= seg.a || m >= seg.b {
            // interval exhausted in floating point; accept its estimate
            total_err -= seg.err;
            continue;
        }
        let (v1, e1) = gk21(f, seg.a, m);
        let (v2, e2) = gk21(f, m, seg.b);
        evals += 42;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment {
            a: seg.a,
            b: m,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: m,
            b: seg.b,
            value: v2,
            err: e2,
        });
    }
    // re-sum to limit drift from incremental updates
    let mut value = 0.0;
    let mut err = 0.0;
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    for s in &segs {
        value += s.value;
        err += s.err;
    }
    Ok(QuadratureResult {
        value,
        abs_error_estimate: err,
        evaluations: evals,
    })
}

/// Integral over [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: AdaptiveOptions) -> Result<QuadratureResult> {
    integrate_breakpoints(f, &[a, b], opts)
}

/// Integral over [a, b] of a function with an |x - a|^(-beta) endpoint singularity,
/// using the grading substitution x = a + (b - a) u^p with p = 1/(1 - beta).
pub fn integrate_graded<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    beta: f64,
    opts: AdaptiveOptions,
) -> Result<QuadratureResult> {
    if beta >= 1.0 {
        return Err(FrontierError::Domain(format!(
            "singularity exponent {beta} is not integrable"
        )));
    }
    let p = if beta > 0.0 { 1.0 / (1.0 - beta) } else { 1.0 };
    let len = b - a;
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let x = a + len * u.powf(p);
        f(x) * len * p * u.powf(p - 1.0)
    };
    integrate(&g, 0.0, 1.0, opts)
}

/// Geometric breakpoints lo, lo r, lo r^2, ... up to hi (inclusive).
pub fn geometric_breaks(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    let mut out = vec![lo];
    let mut x = lo;
    while x * ratio < hi {
        x *= ratio;
        out.push(x);
    }
    out.push(hi);
    out
}

/// Integral over [a, infinity) by doubling the cutoff until the increment is below 0.1 tol.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    first_cutoff: f64,
    opts: AdaptiveOptions,
) -> Result<QuadratureResult> {
    let mut r = first_cutoff.max(a + 1.0);
    let mut acc = integrate(f, a, r, opts)?;
    for _ in 0..60 {
        let inc = integrate(f, r, 2.0 * r, opts)?;
        acc.value += inc.value;
        acc.abs_error_estimate += inc.abs_error_estimate;
        acc.evaluations += inc.evaluations;
        r *= 2.0;
        if inc.value.abs() < 0.1 * opts.abs_tol.max(opts.rel_tol * acc.value.abs()) {
            return Ok(acc);
        }
    }
    Err(FrontierError::NonConvergence {
        estimate: acc.value,
        abs_error: acc.abs_error_estimate,
        evaluations: acc.evaluations,
    })
}

/// Axis-aligned box given by per-axis bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Union of disjoint boxes with optional endpoint singularities at coordinate 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationDomain {
    pub dim: usize,
    pub boxes: Vec<IntegrationBox>,
    /// (axis, beta): the integrand behaves like |x_axis|^(-beta) near x_axis = 0.
    pub singular_axes: Vec<(usize, f64)>,
    pub graded: bool,
}

impl IntegrationDomain {
    pub fn single(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            dim: lower.len(),
            boxes: vec![IntegrationBox { lower, upper }],
            singular_axes: Vec::new(),
            graded: false,
        }
    }

    pub fn with_singularity(mut self, axis: usize, beta: f64) -> Self {
        self.singular_axes.push((axis, beta));
        self.graded = true;
        self
    }

    fn beta(&self, axis: usize) -> Option<f64> {
        if !self.graded {
            return None;
        }
        self.singular_axes.iter().find(|(a, _)| *a == axis).map(|&(_, b)| b)
    }
}

/// Iterated adaptive integration of f over a domain of dimension 1 to 3.
///
/// Boxes are integrated concurrently and summed in box order. Axes flagged as
/// singular are split at 0 and graded toward it.
pub fn adaptive_integrate<F>(f: &F, domain: &IntegrationDomain, tol: f64) -> Result<QuadratureResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if domain.boxes.is_empty() || domain.dim == 0 {
        return Err(FrontierError::Domain("empty integration domain".into()));
    }
    for bx in &domain.boxes {
        if bx.lower.len() != domain.dim || bx.upper.len() != domain.dim {
            return Err(FrontierError::Domain("box dimension mismatch".into()));
        }
        if bx.lower.iter().zip(&bx.upper).any(|(l, u)| !(u > l)) {
            return Err(FrontierError::Domain("box with empty extent".into()));
        }
    }
    let per_box = tol / domain.boxes.len() as f64;
    let parts: Vec<Result<QuadratureResult>> = domain
        .boxes
        .par_iter()
        .map(|bx| {
            let mut x = vec![0.0; domain.dim];
            nested(f, domain, bx, 0, &mut x, per_box)
        })
        .collect();
    let mut out = QuadratureResult {
        value: 0.0,
        abs_error_estimate: 0.0,
        evaluations: 0,
    };
    for p in parts {
        let r = p?;
        out.value += r.value;
        out.abs_error_estimate += r.abs_error_estimate;
        out.evaluations += r.evaluations;
    }
    if out.abs_error_estimate > tol {
        return Err(FrontierError::NonConvergence {
            estimate: out.value,
            abs_error: out.abs_error_estimate,
            evaluations: out.evaluations,
        });
    }
    Ok(out)
}

fn nested<F>(
    f: &F,
    domain: &IntegrationDomain,
    bx: &IntegrationBox,
    axis: usize,
    x: &mut [f64],
    tol: f64,
) -> Result<QuadratureResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let lo = bx.lower[axis];
    let hi = bx.upper[axis];
    let last = axis + 1 == domain.dim;
    let inner_tol = tol * 0.1 / (hi - lo).max(1.0);
    let evals = std::cell::Cell::new(0usize);
    let failure = std::cell::RefCell::new(None);
    let x_cell = std::cell::RefCell::new(x.to_vec());
    let g = |t: f64| -> f64 {
        let mut xs = x_cell.borrow_mut();
        xs[axis] = t;
        if last {
            evals.set(evals.get() + 1);
            f(&xs)
        } else {
            let mut local = xs.clone();
            drop(xs);
            match nested(f, domain, bx, axis + 1, &mut local, inner_tol) {
                Ok(r) => {
                    evals.set(evals.get() + r.evaluations);
                    r.value
                }
                Err(FrontierError::NonConvergence {
                    estimate, evaluations, ..
                }) => {
                    evals.set(evals.get() + evaluations);
                    *failure.borrow_mut() = Some(());
                    estimate
                }
                Err(_) => {
                    *failure.borrow_mut() = Some(());
                    0.0
                }
            }
        }
    };
    let opts = AdaptiveOptions::new(tol * 0.5, 0.0).with_budget(200_000);
    let mut pieces: Vec<(f64, f64, Option<f64>)> = Vec::new();
    match domain.beta(axis) {
        Some(beta) if lo < 0.0 && hi > 0.0 => {
            pieces.push((0.0, lo, Some(beta)));
            pieces.push((0.0, hi, Some(beta)));
        }
        Some(beta) if lo == 0.0 => pieces.push((0.0, hi, Some(beta))),
        Some(beta) if hi == 0.0 => pieces.push((0.0, lo, Some(beta))),
        _ => pieces.push((lo, hi, None)),
    }
    let mut out = QuadratureResult {
        value: 0.0,
        abs_error_estimate: 0.0,
        evaluations: 0,
    };
    for (a, b, beta) in pieces {
        let r = match beta {
            Some(beta) => {
                // graded from the singular face at 0 toward b; orientation fixed by sign
                let sign = if b < a { -1.0 } else { 1.0 };
                let res = integrate_graded(&g, a, b, beta, opts)?;
                QuadratureResult {
                    value: sign * res.value,
                    ..res
                }
            }
            None => integrate(&g, a, b, opts)?,
        };
        out.value += r.value;
        out.abs_error_estimate += r.abs_error_estimate;
    }
    out.evaluations = evals.get();
    if failure.borrow().is_some() {
        return Err(FrontierError::NonConvergence {
            estimate: out.value,
            abs_error: out.abs_error_estimate,
            evaluations: out.evaluations,
        });
    }
    Ok(out)
}
