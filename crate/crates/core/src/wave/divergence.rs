//! The divergence functional of the ill-posed regime, its resonant split and
//! the empirical threshold scan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::amplitude::{resonant_amplitude, wave_amplitude};
use super::mc::{mc_pair, mc_uniform, McBudget};
use super::regime::{classify_regime, reparametrize_h_prime, ConeCd, RegimeLabel, CONE_MAX, CONE_MIN};
use super::testfn::ClassETestFunction;
use crate::error::{domain, Result};
use crate::quadrature::{divergence_verdict, growth_fit, GrowthFit, GrowthVerdict, McEstimate};
use crate::spectral::{norm, HurstVector, MollifierSpec};

fn check(d: usize, h: &HurstVector, phi: &ClassETestFunction, n: u32) -> Result<()> {
    if h.d() != d || phi.d != d {
        return domain(format!(
            "dimension mismatch: d = {d}, H has {}, Phi has {}",
            h.d(),
            phi.d
        ));
    }
    if d > 2 {
        return domain("the divergence engines support d <= 2");
    }
    if n == 0 {
        return domain("n must be at least 1");
    }
    Ok(())
}

/// Per-n (n, value, std error) rows with their fit and verdict.
type SweepFit = (Vec<(u32, f64, f64)>, GrowthFit, GrowthVerdict);

/// I_n = int mu^(n) int mu^(n) |F psi(eta + eta2)|^2 |U^n|^2.
pub fn divergence_functional(
    d: usize,
    h: &HurstVector,
    phi: &ClassETestFunction,
    n: u32,
    mollifier: &MollifierSpec,
    budget: &McBudget,
) -> Result<McEstimate> {
    check(d, h, phi, n)?;
    if phi.psi_amplitude == 0.0 || phi.phi.is_zero() {
        return Ok(McEstimate {
            value: 0.0,
            std_error: 0.0,
            count: budget.samples,
        });
    }
    mc_pair(h, n, mollifier, budget, |p, q| {
        let s: Vec<f64> = p.eta().iter().zip(q.eta()).map(|(x, y)| x + y).collect();
        let ps = phi.psi_ft(&s);
        if ps == 0.0 {
            return 0.0;
        }
        ps * ps * wave_amplitude(&phi.phi, n, p.xi, p.eta(), q.xi, q.eta()).norm_sqr()
    })
}

/// I_n for every n of a range with draws shared across n.
pub fn divergence_sweep(
    d: usize,
    h: &HurstVector,
    phi: &ClassETestFunction,
    n_range: (u32, u32),
    mollifier: &MollifierSpec,
    budget: &McBudget,
) -> Result<Vec<(u32, McEstimate)>> {
    if n_range.0 > n_range.1 {
        return domain("empty n range");
    }
    let b = budget.common(n_range.1);
    (n_range.0..=n_range.1)
        .map(|n| Ok((n, divergence_functional(d, h, phi, n, mollifier, &b)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSplit {
    pub j_m: McEstimate,
    pub j_r: McEstimate,
    pub j_mr: McEstimate,
}

impl DivergenceSplit {
    pub fn total(&self) -> f64 {
        self.j_m.value + self.j_r.value + self.j_mr.value
    }
}

/// Uniform draws consumed by one restricted-domain sample.
fn split_width(d: usize) -> usize {
    2 + 2 * d
}

/// Restricted-domain pieces J_M, J_R, J_MR with H' exponents.
///
/// The domain is eta in (1, inf)^d within the cone, eta2_i in (eta_i, 2 eta_i),
/// xi in (|eta|, 2|eta|), xi2 in (|eta2|, 2|eta2|), with the second frequency
/// pair entering the amplitude reflected.
pub fn divergence_split(
    d: usize,
    h: &HurstVector,
    phi: &ClassETestFunction,
    n: u32,
    mollifier: &MollifierSpec,
    budget: &McBudget,
) -> Result<DivergenceSplit> {
    check(d, h, phi, n)?;
    let zero = McEstimate {
        value: 0.0,
        std_error: 0.0,
        count: budget.samples,
    };
    let cut = n as f64;
    if phi.psi_amplitude == 0.0 || phi.phi.is_zero() || cut <= 1.0 {
        return Ok(DivergenceSplit {
            j_m: zero,
            j_r: zero,
            j_mr: zero,
        });
    }
    let hp = reparametrize_h_prime(d, h)?;
    let cone = ConeCd::new(d);
    let ln_n = cut.ln();
    // one evaluation returns (|M|^2, |R|^2, 2 Re M conj R) times the weight
    let sample = |u: &[f64]| -> [f64; 3] {
        let r = (u[0] * ln_n).exp();
        let (eta, jac) = if d == 1 {
            (vec![r], r * ln_n)
        } else {
            let th = CONE_MIN + u[1] * (CONE_MAX - CONE_MIN);
            (vec![r * th.cos(), r * th.sin()], r * ln_n * (CONE_MAX - CONE_MIN) * r)
        };
        if eta.iter().any(|&e| e <= 1.0) || !cone.contains(&eta) {
            return [0.0; 3];
        }
        let off = if d == 1 { 1 } else { 2 };
        let eta2: Vec<f64> = eta.iter().enumerate().map(|(i, &e)| e * (1.0 + u[off + i])).collect();
        let a = norm(&eta);
        let a2 = norm(&eta2);
        if a > cut || a2 > cut {
            return [0.0; 3];
        }
        let xi = a * (1.0 + u[off + d]);
        let xi2 = a2 * (1.0 + u[off + d + 1]);
        let vol: f64 = jac * eta.iter().product::<f64>() * a * a2;
        let mut dens = xi.powf(1.0 - 2.0 * hp.h0()) * xi2.powf(1.0 - 2.0 * hp.h0());
        for i in 0..d {
            let e = 1.0 - 2.0 * hp.spatial()[i];
            dens *= eta[i].powf(e) * eta2[i].powf(e);
        }
        let diff: Vec<f64> = eta.iter().zip(&eta2).map(|(x, y)| x - y).collect();
        let ps = phi.psi_ft(&diff);
        let w = vol
            * dens
            * ps
            * ps
            * mollifier.weight(n, -xi, &eta.iter().map(|x| -x).collect::<Vec<_>>())
            * mollifier.weight(n, xi2, &eta2);
        if w == 0.0 {
            return [0.0; 3];
        }
        let neg2: Vec<f64> = eta2.iter().map(|x| -x).collect();
        let u_amp = wave_amplitude(&phi.phi, n, xi, &eta, -xi2, &neg2);
        let m = resonant_amplitude(&phi.phi, n, xi, &eta, -xi2, &neg2);
        let rem = u_amp - m;
        [w * m.norm_sqr(), w * rem.norm_sqr(), w * 2.0 * (m * rem.conj()).re]
    };
    let w = split_width(d);
    let est = |k: usize| mc_uniform(budget.samples, budget.seed, w, |u| sample(u)[k]);
    Ok(DivergenceSplit {
        j_m: est(0),
        j_r: est(1),
        j_mr: est(2),
    })
}

/// One grid point of a threshold scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub h: Vec<f64>,
    pub label: RegimeLabel,
    pub values: Vec<(u32, f64, f64)>,
    pub slope: Option<f64>,
    pub residual: Option<f64>,
    pub verdict: Option<GrowthVerdict>,
    /// Empirical divergence agrees with the label (ill-posed iff divergent).
    pub agrees: Option<bool>,
    pub error: Option<String>,
}

/// Runs a divergence sweep and growth fit for every H, never aborting on a failed point.
pub fn threshold_scan(
    d: usize,
    grid: &[HurstVector],
    phi: &ClassETestFunction,
    n_range: (u32, u32),
    mollifier: &MollifierSpec,
    budget: &McBudget,
) -> Vec<ThresholdPoint> {
    grid.par_iter()
        .enumerate()
        .map(|(i, h)| {
            let label = match classify_regime(d, h) {
                Ok(l) => l,
                Err(e) => {
                    return ThresholdPoint {
                        h: h.as_slice().to_vec(),
                        label: RegimeLabel::IllPosed,
                        values: vec![],
                        slope: None,
                        residual: None,
                        verdict: None,
                        agrees: None,
                        error: Some(e.to_string()),
                    }
                }
            };
            let b = McBudget {
                seed: budget.seed.wrapping_add(i as u64),
                ..*budget
            };
            let run = || -> Result<SweepFit> {
                let sweep = divergence_sweep(d, h, phi, n_range, mollifier, &b)?;
                let pts: Vec<(f64, f64)> = sweep.iter().map(|(n, e)| (*n as f64, e.value)).collect();
                let fit = growth_fit(&pts)?;
                let verdict = divergence_verdict(&pts)?;
                let values = sweep.iter().map(|(n, e)| (*n, e.value, e.std_error)).collect();
                Ok((values, fit, verdict))
            };
            match run() {
                Ok((values, fit, verdict)) => ThresholdPoint {
                    h: h.as_slice().to_vec(),
                    label,
                    values,
                    slope: Some(fit.slope),
                    residual: Some(fit.residual),
                    verdict: Some(verdict),
                    agrees: Some(verdict.diverges() == (label == RegimeLabel::IllPosed)),
                    error: None,
                },
                Err(e) => ThresholdPoint {
                    h: h.as_slice().to_vec(),
                    label,
                    values: vec![],
                    slope: None,
                    residual: None,
                    verdict: None,
                    agrees: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}
