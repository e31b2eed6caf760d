//! Regime arithmetic of the wave threshold, the H' reparametrization, the
//! angular cone and the spatial weight.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::spectral::HurstVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    RegularNoRenorm,
    WickRenormalizable,
    IllPosed,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::RegularNoRenorm => "regular",
            RegimeLabel::WickRenormalizable => "wick",
            RegimeLabel::IllPosed => "ill-posed",
        }
    }
}

/// The frontier 3d/4 - 1/2.
pub fn frontier(d: usize) -> f64 {
    0.75 * d as f64 - 0.5
}

fn check_dim(d: usize, h: &HurstVector) -> Result<()> {
    if d == 0 {
        return domain("dimension must be at least 1");
    }
    if h.d() != d {
        return domain(format!("Hurst vector has {} spatial indices, expected {d}", h.d()));
    }
    Ok(())
}

pub fn classify_regime(d: usize, h: &HurstVector) -> Result<RegimeLabel> {
    check_dim(d, h)?;
    let s = h.sum();
    let d = d as f64;
    Ok(if s > d - 0.5 {
        RegimeLabel::RegularNoRenorm
    } else if s > 0.75 * d - 0.5 {
        RegimeLabel::WickRenormalizable
    } else {
        RegimeLabel::IllPosed
    })
}

/// Open interval of admissible Sobolev exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentRange {
    pub lo: f64,
    pub hi: f64,
}

impl ExponentRange {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

/// gamma range in the regular regime, alpha range in the Wick regime.
pub fn valid_exponent_range(d: usize, h: &HurstVector, regime: RegimeLabel) -> Result<ExponentRange> {
    let actual = classify_regime(d, h)?;
    if actual != regime {
        return domain(format!("regime {regime:?} does not match {actual:?}"));
    }
    let s = h.sum();
    let df = d as f64;
    match regime {
        RegimeLabel::RegularNoRenorm => Ok(ExponentRange {
            lo: 0.0,
            hi: s - (df - 0.5),
        }),
        RegimeLabel::WickRenormalizable => Ok(ExponentRange {
            lo: (df - 0.5 - s).max((df - 1.0) / 4.0),
            hi: df / 4.0,
        }),
        RegimeLabel::IllPosed => domain("no admissible exponent in the ill-posed regime"),
    }
}

/// Exponents H' >= H on the frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HPrime {
    pub h_prime: Vec<f64>,
}

impl HPrime {
    pub fn h0(&self) -> f64 {
        self.h_prime[0]
    }

    pub fn spatial(&self) -> &[f64] {
        &self.h_prime[1..]
    }
}

/// Lifts H onto the frontier by sharing the deficit in proportion to each coordinate's headroom.
pub fn reparametrize_h_prime(d: usize, h: &HurstVector) -> Result<HPrime> {
    check_dim(d, h)?;
    let target = frontier(d);
    let deficit = target - h.sum();
    if deficit < -1e-12 {
        return domain(format!("H0 + H+ = {} exceeds the frontier {target}", h.sum()));
    }
    let caps: Vec<f64> = (0..=d).map(|i| if i == 0 { 1.0 } else { 0.75 }).collect();
    let room: Vec<f64> = h.as_slice().iter().zip(&caps).map(|(v, c)| c - v).collect();
    let total: f64 = room.iter().sum();
    if deficit > 0.0 && deficit >= total {
        return domain("not enough headroom to reach the frontier");
    }
    let mut hp: Vec<f64> = if deficit <= 0.0 {
        h.as_slice().to_vec()
    } else {
        h.as_slice()
            .iter()
            .zip(&room)
            .map(|(v, r)| v + deficit * r / total)
            .collect()
    };
    // put the rounding residue on the coordinate with the most room
    let resid = target - hp.iter().sum::<f64>();
    let imax = (0..=d).max_by(|&i, &j| room[i].total_cmp(&room[j])).unwrap_or(0);
    if deficit > 0.0 {
        hp[imax] += resid;
    }
    Ok(HPrime { h_prime: hp })
}

/// Sector with every spherical angle in [pi/8, 3pi/8].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeCd {
    pub d: usize,
}

pub const CONE_MIN: f64 = PI / 8.0;
pub const CONE_MAX: f64 = 3.0 * PI / 8.0;

impl ConeCd {
    pub fn new(d: usize) -> Self {
        Self { d }
    }

    /// Point with radius r and angles theta (length d - 1).
    pub fn point(r: f64, theta: &[f64]) -> Vec<f64> {
        let d = theta.len() + 1;
        let mut x = Vec::with_capacity(d);
        let mut s = r;
        for &th in theta {
            x.push(s * th.cos());
            s *= th.sin();
        }
        x.push(s);
        x
    }

    /// Spherical angles of x (length d - 1).
    pub fn angles(x: &[f64]) -> Vec<f64> {
        let d = x.len();
        (0..d.saturating_sub(1))
            .map(|i| {
                let tail: f64 = x[i + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                if i + 2 == d {
                    // the last angle keeps the sign of the last coordinate
                    x[d - 1].atan2(x[d - 2])
                } else {
                    tail.atan2(x[i])
                }
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.d || x.iter().all(|&v| v == 0.0) {
            return false;
        }
        if self.d == 1 {
            return x[0] > 0.0;
        }
        Self::angles(x).iter().all(|&a| (CONE_MIN..=CONE_MAX).contains(&a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    InverseQuadraticProduct,
}

/// Spatial weight w(x) = prod (1 + x_i^2)^-1 scaled by a positive constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub scale: f64,
}

impl Default for WeightSpec {
    fn default() -> Self {
        Self {
            kind: WeightKind::InverseQuadraticProduct,
            scale: 1.0,
        }
    }
}

impl WeightSpec {
    pub fn scaled(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return domain("weight scale must be positive");
        }
        Ok(Self {
            kind: WeightKind::InverseQuadraticProduct,
            scale,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.scale * x.iter().map(|v| 1.0 / (1.0 + v * v)).product::<f64>()
    }

    /// L1 norm, pi^d times the scale.
    pub fn l1_norm(&self, d: usize) -> f64 {
        self.scale * PI.powi(d as i32)
    }
}
