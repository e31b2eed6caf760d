use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::spectral::{HurstVector, MollifierSpec};

/// Samples drawn from one counter-keyed stream block.
pub const BLOCK: usize = 4096;

/// Generator for stream `stream` under master seed `seed`.
///
/// ChaCha keyed by the seed with the stream id selecting the nonce, so the
/// draw index is the position inside the keystream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Symmetric power law with density proportional to |x|^e on [-r, r], e > -1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub exponent: f64,
    pub radius: f64,
}

impl PowerLaw {
    pub fn new(exponent: f64, radius: f64) -> Result<Self> {
        if exponent <= -1.0 {
            return domain(format!("power-law exponent {exponent} is not integrable at 0"));
        }
        if !(radius > 0.0) {
            return domain("power-law radius must be positive");
        }
        Ok(Self { exponent, radius })
    }

    /// Total mass of |x|^e over [-r, r].
    pub fn mass(&self) -> f64 {
        2.0 * self.radius.powf(self.exponent + 1.0) / (self.exponent + 1.0)
    }

    /// CDF of |x|.
    pub fn abs_cdf(&self, x: f64) -> f64 {
        (x.abs() / self.radius).min(1.0).powf(self.exponent + 1.0)
    }

    /// Inverse transform from two uniforms (magnitude and sign).
    pub fn sample(&self, u_mag: f64, u_sign: f64) -> f64 {
        // 1 - u keeps the magnitude strictly positive for u in [0, 1)
        let m = self.radius * (1.0 - u_mag).powf(1.0 / (self.exponent + 1.0));
        if u_sign < 0.5 {
            -m
        } else {
            m
        }
    }
}

/// A weighted sample point (xi, eta_1, ..., eta_d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoint {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// Importance sample of mu_H^(n) restricted to the box [-R, R]^(d+1).
///
/// Each coordinate is drawn from its own power law |x|^(1 - 2 H_i); the weights
/// carry the box mass and the mollifier factor so that the weighted mean of f
/// estimates the integral of f against mu_H^(n) over the box.
pub fn importance_sample_mu(
    h: &HurstVector,
    n: u32,
    mollifier: &MollifierSpec,
    truncation: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<WeightedPoint>> {
    if count == 0 {
        return domain("sample count must be positive");
    }
    let laws: Vec<PowerLaw> = h
        .as_slice()
        .iter()
        .map(|&hi| PowerLaw::new(1.0 - 2.0 * hi, truncation))
        .collect::<Result<_>>()?;
    let mass: f64 = laws.iter().map(|l| l.mass()).product();
    let blocks = count.div_ceil(BLOCK);
    let out: Vec<Vec<WeightedPoint>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let len = BLOCK.min(count - b * BLOCK);
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                let point: Vec<f64> = laws.iter().map(|l| l.sample(rng.random(), rng.random())).collect();
                let w = mollifier.weight(n, point[0], &point[1..]);
                v.push(WeightedPoint {
                    point,
                    weight: mass * w / count as f64,
                });
            }
            v
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// Weighted sum and its standard error for an importance-sampled integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub count: usize,
}

impl McEstimate {
    /// From per-sample contributions c_j = weight_j f(x_j) summing to the estimate.
    pub fn from_contributions(c: &[f64]) -> Self {
        let n = c.len() as f64;
        let total: f64 = c.iter().sum();
        let mean = total / n;
        let var = c.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            value: total,
            std_error: (var * n).sqrt(),
            count: c.len(),
        }
    }
}

/// Uniform draws in [0, 1)^k, one row per sample, from counter-keyed blocks.
pub fn uniform_rows(seed: u64, stream_base: u64, count: usize, k: usize) -> Vec<Vec<f64>> {
    let blocks = count.div_ceil(BLOCK);
    let out: Vec<Vec<Vec<f64>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, stream_base + b as u64);
            let len = BLOCK.min(count - b * BLOCK);
            (0..len)
                .map(|_| (0..k).map(|_| rng.random::<f64>()).collect())
                .collect()
        })
        .collect();
    out.into_iter().flatten().collect()
}
