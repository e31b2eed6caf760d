use serde::{Deserialize, Serialize};

use crate::error::{FrontierError, Result};

/// Least-squares line through (n, log2 value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS deviation of log2 values from the fitted line.
    pub residual: f64,
    pub n_range: (f64, f64),
}

pub fn growth_fit(values: &[(f64, f64)]) -> Result<GrowthFit> {
    if values.len() < 3 {
        return Err(FrontierError::DegenerateInput(format!(
            "growth fit needs at least 3 points, got {}",
            values.len()
        )));
    }
    if let Some(&(n, v)) = values.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(FrontierError::DegenerateInput(format!(
            "value {v} at n = {n} is not positive"
        )));
    }
    let k = values.len() as f64;
    let xs: Vec<f64> = values.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = values.iter().map(|p| p.1.log2()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(FrontierError::DegenerateInput("all n values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthFit {
        slope,
        intercept,
        residual: (ss / k).sqrt(),
        n_range: (lo, hi),
    })
}

/// How a sequence indexed by n was judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthVerdict {
    /// Clean geometric growth in n.
    Geometric,
    /// Increments settle at a positive level (logarithmic growth).
    Marginal,
    Bounded,
}

impl GrowthVerdict {
    pub fn diverges(self) -> bool {
        !matches!(self, GrowthVerdict::Bounded)
    }
}

pub const SLOPE_THRESHOLD: f64 = 0.05;
pub const RESIDUAL_THRESHOLD: f64 = 0.1;

/// Divergence rule shared by every experiment.
///
/// A sequence diverges when its log2 slope exceeds 0.05 with RMS residual below
/// 0.1, or when its last four increments are all positive and the final one is
/// at least half the first (increments that do not decay geometrically).
pub fn divergence_verdict(values: &[(f64, f64)]) -> Result<GrowthVerdict> {
    let fit = growth_fit(values)?;
    if fit.slope > SLOPE_THRESHOLD && fit.residual < RESIDUAL_THRESHOLD {
        return Ok(GrowthVerdict::Geometric);
    }
    if marginal_increments(values) {
        return Ok(GrowthVerdict::Marginal);
    }
    Ok(GrowthVerdict::Bounded)
}

/// True when the increments over the last four points stay bounded below by a
/// positive constant.
pub fn marginal_increments(values: &[(f64, f64)]) -> bool {
    if values.len() < 5 {
        return false;
    }
    let tail = &values[values.len() - 5..];
    let diffs: Vec<f64> = tail.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let scale = tail.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    diffs.iter().all(|&d| d > 1e-9 * scale) && diffs[3] >= 0.5 * diffs[0]
}
