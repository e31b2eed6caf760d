//! Importance sampling of the mollified spectral measure and its square.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quadrature::sampling::{stream_rng, BLOCK};
use crate::quadrature::{McEstimate, PowerLaw};
use crate::spectral::{HurstVector, MollifierSpec};

/// Sample count, seed and proposal radii of a Monte Carlo integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McBudget {
    pub samples: usize,
    pub seed: u64,
    /// Radius of the eta proposal; defaults to the spectral cutoff n.
    pub eta_radius: Option<f64>,
    /// Level whose mollifier scale sets the xi proposal range; defaults to n.
    pub xi_level: Option<u32>,
}

impl McBudget {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            eta_radius: None,
            xi_level: None,
        }
    }

    /// Pins both proposal radii to level `n_max` so that every n shares its draws.
    pub fn common(mut self, n_max: u32) -> Self {
        self.eta_radius = Some(n_max as f64);
        self.xi_level = Some(n_max);
        self
    }
}

/// A point (xi, eta) with d <= 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecPoint {
    pub xi: f64,
    eta: [f64; 2],
    d: usize,
}

impl SpecPoint {
    pub fn new(xi: f64, eta: &[f64]) -> Self {
        let mut e = [0.0; 2];
        e[..eta.len()].copy_from_slice(eta);
        Self {
            xi,
            eta: e,
            d: eta.len(),
        }
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta[..self.d]
    }
}

/// Proposal for one spectral point: power laws in eta, core plus tail in xi.
#[derive(Debug, Clone)]
pub(crate) struct Proposal {
    eta_laws: Vec<PowerLaw>,
    eta_mass: f64,
    xi_core: PowerLaw,
    core_mass: f64,
    tail_mass: f64,
    c: f64,
    x_max: f64,
    e0: f64,
}

/// Uniform draws consumed by one spectral point.
pub(crate) fn draws_per_point(d: usize) -> usize {
    3 + 2 * d
}

impl Proposal {
    pub(crate) fn new(h: &HurstVector, n: u32, mollifier: &MollifierSpec, budget: &McBudget) -> Result<Self> {
        if h.d() > 2 {
            return domain("Monte Carlo engines support d <= 2");
        }
        let radius = budget.eta_radius.unwrap_or(n as f64).max(1e-9);
        let level = budget.xi_level.unwrap_or(n);
        let eta_laws: Vec<PowerLaw> = h
            .spatial()
            .iter()
            .map(|&hi| PowerLaw::new(1.0 - 2.0 * hi, radius))
            .collect::<Result<_>>()?;
        let eta_mass = eta_laws.iter().map(|l| l.mass()).product();
        let h0 = h.h0();
        let c = radius + 1.0;
        // mollifier weight is below e^-36 beyond this frequency
        let x_max = (6.0 * (level as f64).exp2() / mollifier.scale).max(2.0 * c);
        let xi_core = PowerLaw::new(1.0 - 2.0 * h0, c)?;
        let e0 = 2.0 * h0;
        let tail_mass = 2.0 * (c.powf(-e0) - x_max.powf(-e0)) / e0;
        Ok(Self {
            eta_laws,
            eta_mass,
            core_mass: xi_core.mass(),
            xi_core,
            tail_mass,
            c,
            x_max,
            e0,
        })
    }

    /// Point and ratio of the unmollified density to the proposal density.
    pub(crate) fn draw(&self, u: &[f64]) -> (SpecPoint, f64) {
        let (xi, xi_ratio) = if u[0] < 0.5 {
            let x = self.xi_core.sample(u[1], u[2]);
            (x, 2.0 * self.core_mass)
        } else {
            let a = self.c.powf(-self.e0);
            let b = self.x_max.powf(-self.e0);
            let m = (a - u[1] * (a - b)).powf(-1.0 / self.e0);
            let x = if u[2] < 0.5 { -m } else { m };
            // |x|^{1-2H0} / (0.5 |x|^{-1-2H0} / tail_mass)
            (x, 2.0 * self.tail_mass * m * m)
        };
        let mut eta = [0.0; 2];
        for (i, law) in self.eta_laws.iter().enumerate() {
            eta[i] = law.sample(u[3 + 2 * i], u[4 + 2 * i]);
        }
        let p = SpecPoint {
            xi,
            eta,
            d: self.eta_laws.len(),
        };
        (p, xi_ratio * self.eta_mass)
    }
}

/// Mean and standard error of weighted draws, reduced in block order.
fn reduce(blocks: Vec<(f64, f64)>, count: usize) -> McEstimate {
    let (s, s2) = blocks.into_iter().fold((0.0, 0.0), |acc, b| (acc.0 + b.0, acc.1 + b.1));
    let n = count as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
    McEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        count,
    }
}

fn run_blocks<F>(count: usize, seed: u64, width: usize, f: F) -> McEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let blocks = count.div_ceil(BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let len = BLOCK.min(count - b * BLOCK);
            let mut u = vec![0.0; width];
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..len {
                for x in u.iter_mut() {
                    *x = rng.random::<f64>();
                }
                let v = f(&u);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    reduce(sums, count)
}

/// Estimate of int mu^(n)(dxi, deta) f(xi, eta).
pub fn mc_single<F>(h: &HurstVector, n: u32, mollifier: &MollifierSpec, budget: &McBudget, f: F) -> Result<McEstimate>
where
    F: Fn(&SpecPoint) -> f64 + Sync,
{
    if budget.samples < 2 {
        return domain("at least two samples are required");
    }
    let prop = Proposal::new(h, n, mollifier, budget)?;
    let w = draws_per_point(h.d());
    Ok(run_blocks(budget.samples, budget.seed, w, |u| {
        let (p, r) = prop.draw(u);
        let m = mollifier.weight(n, p.xi, p.eta());
        if m == 0.0 {
            return 0.0;
        }
        r * m * f(&p)
    }))
}

/// Estimate of the double integral against mu^(n) x mu^(n).
pub fn mc_pair<F>(h: &HurstVector, n: u32, mollifier: &MollifierSpec, budget: &McBudget, f: F) -> Result<McEstimate>
where
    F: Fn(&SpecPoint, &SpecPoint) -> f64 + Sync,
{
    if budget.samples < 2 {
        return domain("at least two samples are required");
    }
    let prop = Proposal::new(h, n, mollifier, budget)?;
    let w = draws_per_point(h.d());
    Ok(run_blocks(budget.samples, budget.seed, 2 * w, |u| {
        let (p, r) = prop.draw(&u[..w]);
        let (q, s) = prop.draw(&u[w..]);
        let m = mollifier.weight(n, p.xi, p.eta()) * mollifier.weight(n, q.xi, q.eta());
        if m == 0.0 {
            return 0.0;
        }
        r * s * m * f(&p, &q)
    }))
}

/// Generic estimate of the mean of f over uniform draws in [0, 1)^width.
pub(crate) fn mc_uniform<F>(count: usize, seed: u64, width: usize, f: F) -> McEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    run_blocks(count, seed, width, f)
}
