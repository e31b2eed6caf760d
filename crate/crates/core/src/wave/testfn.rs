//! Product test functions phi (time) x psi (space) witnessing divergence.

use crate::error::{domain, FrontierError, Result};
use crate::levy::TimeTestFunction;
use crate::spectral::{MollifierKind, MollifierSpec};

/// Default half-width of the spatial bump.
pub const DEFAULT_PSI_WIDTH: f64 = 0.5;
/// Required ratio of inf over the unit ball of |F psi|^2 to |F psi(0)|^2.
pub const PSI_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassETestFunction {
    pub phi: TimeTestFunction,
    /// Half-width of the even product bump psi.
    pub psi_width: f64,
    pub psi_amplitude: f64,
    pub d: usize,
    /// inf over |theta| <= 1 of |F psi(theta)|^2.
    pub psi_inf: f64,
}

fn psi_spec(width: f64) -> MollifierSpec {
    MollifierSpec {
        kind: MollifierKind::CompactBump,
        scale: width,
    }
}

/// Minimum of |F psi|^2 over the closed unit ball, by a radial and angular scan.
fn unit_ball_inf(spec: &MollifierSpec, d: usize) -> f64 {
    let steps = 64;
    let mut m = f64::INFINITY;
    for i in 0..=steps {
        let r = i as f64 / steps as f64;
        if d == 1 {
            m = m.min(spec.transform(&[r]).powi(2));
            continue;
        }
        for j in 0..=steps {
            let th = std::f64::consts::FRAC_PI_2 * j as f64 / steps as f64;
            let mut k = vec![0.0; d];
            k[0] = r * th.cos();
            k[1] = r * th.sin();
            m = m.min(spec.transform(&k).powi(2));
        }
    }
    m
}

impl ClassETestFunction {
    /// phi x psi with psi of half-width `width`, narrowed until the unit-ball floor holds.
    pub fn new(phi: TimeTestFunction, d: usize, width: f64) -> Result<Self> {
        if d == 0 {
            return domain("dimension must be at least 1");
        }
        if !(width > 0.0 && width.is_finite()) {
            return domain("psi width must be positive");
        }
        let (lo, hi) = phi.support;
        if hi <= 0.75 || lo >= 1.0 || phi.is_zero() {
            return domain("phi must carry mass in (3/4, 1)");
        }
        let mut w = width;
        loop {
            let spec = psi_spec(w);
            let inf = unit_ball_inf(&spec, d);
            if inf > PSI_FLOOR * spec.transform(&vec![0.0; d]).powi(2) {
                return Ok(Self {
                    phi,
                    psi_width: w,
                    psi_amplitude: 1.0,
                    d,
                    psi_inf: inf,
                });
            }
            w *= 0.5;
            if w < 1e-3 {
                return Err(FrontierError::DegenerateInput(
                    "no psi width keeps its transform away from zero on the unit ball".into(),
                ));
            }
        }
    }

    pub fn default_for(d: usize) -> Result<Self> {
        Self::new(TimeTestFunction::default(), d, DEFAULT_PSI_WIDTH)
    }

    /// Same test function with psi multiplied by c.
    pub fn with_psi_scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.psi_amplitude *= c;
        out.psi_inf *= c * c;
        out
    }

    /// Same test function with phi multiplied by c.
    pub fn with_phi_scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.phi = out.phi.scaled(c);
        out
    }

    /// F psi(k).
    pub fn psi_ft(&self, k: &[f64]) -> f64 {
        self.psi_amplitude * psi_spec(self.psi_width).transform(k)
    }

    /// psi(y) for the normalized product bump.
    pub fn psi(&self, y: &[f64]) -> f64 {
        let w = self.psi_width;
        let c = bump_norm();
        self.psi_amplitude
            * y.iter()
                .map(|&v| {
                    let s = v / w;
                    if s.abs() >= 1.0 {
                        0.0
                    } else {
                        (-1.0 / (1.0 - s * s)).exp() / (c * w)
                    }
                })
                .product::<f64>()
    }
}

/// Integral of exp(-1/(1 - s^2)) over (-1, 1).
fn bump_norm() -> f64 {
    let gl = crate::quadrature::GaussLegendre::new(16);
    gl.composite(-1.0, 1.0, 32)
        .iter()
        .map(|&(s, w)| w * (-1.0 / (1.0 - s * s)).exp())
        .sum()
}
