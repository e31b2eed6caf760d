//! Spectral Monte Carlo synthesis of the mollified linear solution, its Wick
//! square and the pairing of the second-order process with a test function.
//!
//! The noise is represented on a finite spectral grid: every cell carries its
//! exact measure mass and one complex Gaussian, with Hermitian symmetry making
//! every synthesized field real. All expectations of the estimators are then
//! finite cell sums, which the tests use as exact oracles.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, FrontierError, Result};
use crate::quadrature::{stream_rng, GaussLegendre};
use crate::spectral::{DuhamelEvaluator, HurstVector, MollifierSpec};
use crate::wave::{wave_amplitude, ClassETestFunction};

/// Upper bound on the number of grid cells.
pub const MAX_CELLS: usize = 1 << 21;
/// Upper bound on the number of cells of a grid used for pairings.
pub const MAX_PAIRING_CELLS: usize = 4096;

/// Partition parameters of a spectral grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cells per frequency axis; even so that the axis is symmetric about 0.
    pub cells_per_axis: usize,
    /// Half-width of the xi axis; defaults to the mollifier range at level n.
    pub xi_radius: Option<f64>,
    /// Half-width of every eta axis; defaults to the kernel cutoff n.
    pub eta_radius: Option<f64>,
    /// Width of the innermost cell on each side of 0.
    pub inner: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cells_per_axis: 64,
            xi_radius: None,
            eta_radius: None,
            inner: 0.05,
        }
    }
}

impl GridSpec {
    pub fn with_cells(cells_per_axis: usize) -> Self {
        Self {
            cells_per_axis,
            ..Self::default()
        }
    }
}

/// Edges 0 = e_0 < e_1 < ... < e_m = r with geometric growth from e_1 = inner.
fn half_axis(m: usize, r: f64, inner: f64) -> Vec<f64> {
    if m == 1 {
        return vec![0.0, r];
    }
    let inner = inner.min(r / m as f64);
    let g = (r / inner).powf(1.0 / (m - 1) as f64);
    let mut e = Vec::with_capacity(m + 1);
    e.push(0.0);
    for k in 0..m {
        e.push(inner * g.powi(k as i32));
    }
    e[m] = r;
    e
}

/// Midpoints and masses of int |x|^e over the symmetric cells of one axis,
/// ordered from the most negative cell to the most positive one.
fn axis_cells(m: usize, r: f64, inner: f64, e: f64) -> Vec<(f64, f64)> {
    let edges = half_axis(m, r, inner);
    let anti = |x: f64| x.powf(e + 1.0) / (e + 1.0);
    let pos: Vec<(f64, f64)> = edges
        .windows(2)
        .map(|w| (0.5 * (w[0] + w[1]), anti(w[1]) - anti(w[0])))
        .collect();
    pos.iter()
        .rev()
        .map(|&(x, w)| (-x, w))
        .chain(pos.iter().copied())
        .collect()
}

/// Tensor-product discretization of the mollified spectral measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    pub d: usize,
    pub n: u32,
    pub h: HurstVector,
    pub mollifier: MollifierSpec,
    pub spec: GridSpec,
    xi: Vec<f64>,
    eta: Vec<f64>,
    mass: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(h: &HurstVector, n: u32, mollifier: &MollifierSpec, spec: &GridSpec) -> Result<Self> {
        let d = h.d();
        let c = spec.cells_per_axis;
        if c < 2 || !c.is_multiple_of(2) {
            return domain(format!("cells per axis must be even and at least 2, got {c}"));
        }
        if !(spec.inner > 0.0 && spec.inner.is_finite()) {
            return domain("inner cell width must be positive");
        }
        let total = c
            .checked_pow(d as u32 + 1)
            .filter(|&t| t <= MAX_CELLS)
            .ok_or_else(|| FrontierError::Domain(format!("grid exceeds {MAX_CELLS} cells")))?;
        let xr = spec.xi_radius.unwrap_or(6.0 * (n as f64).exp2() / mollifier.scale);
        let er = spec.eta_radius.unwrap_or(n as f64);
        if !(xr > 0.0 && er > 0.0 && xr.is_finite() && er.is_finite()) {
            return domain("grid radii must be positive and finite");
        }
        let m = c / 2;
        let mut axes = vec![axis_cells(m, xr, spec.inner, 1.0 - 2.0 * h.h0())];
        for &hi in h.spatial() {
            axes.push(axis_cells(m, er, spec.inner, 1.0 - 2.0 * hi));
        }
        let mut xi = Vec::with_capacity(total);
        let mut eta = Vec::with_capacity(total * d);
        let mut mass = Vec::with_capacity(total);
        let mut idx = vec![0usize; d + 1];
        for _ in 0..total {
            let x = axes[0][idx[0]].0;
            let mut w = axes[0][idx[0]].1;
            let start = eta.len();
            for k in 1..=d {
                let (p, pw) = axes[k][idx[k]];
                eta.push(p);
                w *= pw;
            }
            w *= mollifier.weight(n, x, &eta[start..]);
            xi.push(x);
            mass.push(w);
            // row-major increment, last axis fastest
            for k in (0..=d).rev() {
                idx[k] += 1;
                if idx[k] < c {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Self {
            d,
            n,
            h: h.clone(),
            mollifier: *mollifier,
            spec: *spec,
            xi,
            eta,
            mass,
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Frequency (xi, eta) of cell c.
    pub fn point(&self, c: usize) -> (f64, &[f64]) {
        (self.xi[c], &self.eta[c * self.d..(c + 1) * self.d])
    }

    pub fn mass(&self, c: usize) -> f64 {
        self.mass[c]
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Index of the cell -c.
    pub fn reflect(&self, c: usize) -> usize {
        self.len() - 1 - c
    }

    /// Same construction parameters, hence the same cells.
    pub fn same_as(&self, other: &SpectralGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.n == other.n && self.h == other.h && self.mollifier == other.mollifier && self.spec == other.spec)
    }

    fn check(&self, n: u32) -> Result<()> {
        if n != self.n {
            return Err(FrontierError::GridMismatch(format!(
                "grid built for n = {}, used with n = {n}",
                self.n
            )));
        }
        Ok(())
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(FrontierError::GridMismatch(format!(
                "position has {} coordinates, grid has d = {}",
                x.len(),
                self.d
            )));
        }
        Ok(())
    }

    /// D^n(t; xi_c, eta_c) for every cell.
    fn duhamel_row(&self, t: f64) -> Vec<Complex64> {
        let ev = DuhamelEvaluator::new(self.n);
        (0..self.len())
            .map(|c| {
                let (x, e) = self.point(c);
                ev.eval(t, x, e)
            })
            .collect()
    }

    /// Exact counterterm c_n(t) = sum_c mass_c |D^n(t; c)|^2, the variance of Psi^n(t, x).
    pub fn wick_constant(&self, n: u32, t: f64) -> Result<f64> {
        self.check(n)?;
        let row = self.duhamel_row(t);
        Ok(row.iter().zip(&self.mass).map(|(v, m)| m * v.norm_sqr()).sum())
    }

    /// Exact covariance of Psi^n(t, x) and Psi^n(t2, x2) on this grid.
    pub fn covariance(&self, n: u32, t: f64, x: &[f64], t2: f64, x2: &[f64]) -> Result<f64> {
        self.check(n)?;
        self.check_x(x)?;
        self.check_x(x2)?;
        let r1 = self.duhamel_row(t);
        let r2 = self.duhamel_row(t2);
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..self.len() {
            let (xi, eta) = self.point(c);
            let ph: f64 = xi * (t - t2)
                + eta
                    .iter()
                    .zip(x.iter().zip(x2))
                    .map(|(e, (a, b))| e * (a - b))
                    .sum::<f64>();
            acc += Complex64::from_polar(self.mass[c], ph) * r1[c] * r2[c].conj();
        }
        Ok(acc.re)
    }
}

/// One Hermitian field of complex standard Gaussians on a grid.
#[derive(Debug, Clone)]
pub struct NoiseDraw<'g> {
    pub grid: &'g SpectralGrid,
    pub seed: u64,
    pub stream: u64,
    z: Vec<Complex64>,
}

impl<'g> NoiseDraw<'g> {
    /// Draw keyed by (seed, stream); equal keys give identical coefficients.
    pub fn new(grid: &'g SpectralGrid, seed: u64, stream: u64) -> Self {
        let mut rng = stream_rng(seed, stream);
        let len = grid.len();
        let mut z = vec![Complex64::new(0.0, 0.0); len];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for c in 0..len / 2 {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            z[c] = Complex64::new(s * a, s * b);
            z[len - 1 - c] = z[c].conj();
        }
        Self { grid, seed, stream, z }
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.z
    }
}

/// Psi^n(t, x) as the raw complex cell sum; its imaginary part is rounding residue.
pub fn synthesize_psi_complex(draw: &NoiseDraw<'_>, n: u32, t: f64, x: &[f64]) -> Result<Complex64> {
    let g = draw.grid;
    g.check(n)?;
    g.check_x(x)?;
    let row = g.duhamel_row(t);
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, (&r, &z)) in row.iter().zip(&draw.z).enumerate() {
        let (xi, eta) = g.point(c);
        let ph = xi * t + eta.iter().zip(x).map(|(e, y)| e * y).sum::<f64>();
        acc += Complex64::from_polar(g.mass[c].sqrt(), ph) * z * r;
    }
    Ok(acc)
}

/// Residue of the imaginary part tolerated before it is discarded.
pub const IMAG_TOL: f64 = 1e-10;

/// Psi^n(t, x), the real part of the Hermitian cell sum.
pub fn synthesize_psi(draw: &NoiseDraw<'_>, n: u32, t: f64, x: &[f64]) -> Result<f64> {
    let v = synthesize_psi_complex(draw, n, t, x)?;
    assert!(v.im.abs() < IMAG_TOL, "imaginary residue {} in a Hermitian field", v.im);
    Ok(v.re)
}

/// Psi^n(t, x)^2 - c_n(t) with the exact grid counterterm.
pub fn wick_square(draw: &NoiseDraw<'_>, n: u32, t: f64, x: &[f64]) -> Result<f64> {
    let p = synthesize_psi(draw, n, t, x)?;
    Ok(p * p - draw.grid.wick_constant(n, t)?)
}

/// Counterterm used in a pairing.
#[derive(Clone)]
pub enum CnMode {
    /// The exact grid variance c_n(t).
    StandardWick,
    /// No subtraction.
    None,
    /// An arbitrary deterministic function of time.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for CnMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CnMode::StandardWick => write!(f, "StandardWick"),
            CnMode::None => write!(f, "None"),
            CnMode::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Draw-independent part of the pairing <c^n, Phi> on a grid.
///
/// With A_{c,c'} = sqrt(m_c m_c') F psi(eta_c + eta_c') U^n(c, c') the pairing
/// of a draw is sum A_{c,c'} Z_c Z_c' minus the counterterm contribution.
/// Rows of cells in the second half are conjugate reflections of the first
/// half, so only the first half is stored.
#[derive(Debug, Clone)]
pub struct PairingOperator<'g> {
    pub grid: &'g SpectralGrid,
    pub phi: ClassETestFunction,
    half: usize,
    a: Vec<Complex64>,
    wick: f64,
}

impl<'g> PairingOperator<'g> {
    pub fn new(grid: &'g SpectralGrid, n: u32, phi: &ClassETestFunction) -> Result<Self> {
        grid.check(n)?;
        if phi.d != grid.d {
            return Err(FrontierError::GridMismatch(format!(
                "test function has d = {}, grid has d = {}",
                phi.d, grid.d
            )));
        }
        let len = grid.len();
        if len > MAX_PAIRING_CELLS {
            return domain(format!(
                "pairing grids are limited to {MAX_PAIRING_CELLS} cells, got {len}"
            ));
        }
        let half = len / 2;
        let a: Vec<Complex64> = (0..half)
            .into_par_iter()
            .flat_map_iter(|c| {
                let (x1, e1) = grid.point(c);
                let m1 = grid.mass[c];
                (0..len).map(move |c2| {
                    let (x2, e2) = grid.point(c2);
                    let m = (m1 * grid.mass[c2]).sqrt();
                    if m == 0.0 || phi.psi_amplitude == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let s: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                    let ps = phi.psi_ft(&s);
                    wave_amplitude(&phi.phi, n, x1, e1, x2, e2) * (m * ps)
                })
            })
            .collect();
        // sum over all cells of A_{c,-c}; the two halves are conjugate
        let wick = 2.0 * (0..half).map(|c| a[c * len + (len - 1 - c)].re).sum::<f64>();
        Ok(Self {
            grid,
            phi: phi.clone(),
            half,
            a,
            wick,
        })
    }

    fn row(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.a[c * len..(c + 1) * len]
    }

    /// Pairing of the counterterm: F psi(0) int phi(t) int_0^t (t - s) c(s) ds dt.
    pub fn counterterm(&self, mode: &CnMode) -> f64 {
        match mode {
            CnMode::StandardWick => self.wick,
            CnMode::None => 0.0,
            CnMode::Custom(f) => {
                let gl = GaussLegendre::new(24);
                let inner = |t: f64| -> f64 { gl.mapped(0.0, t).map(|(s, w)| w * (t - s) * f(s)).sum() };
                let zero = vec![0.0; self.grid.d];
                self.phi.psi_ft(&zero) * self.phi.phi.weighted_nodes().map(|(t, w)| w * inner(t)).sum::<f64>()
            }
        }
    }

    /// sum_{c, c'} A_{c,c'} Z_c Z_c' for one draw.
    pub fn quadratic(&self, draw: &NoiseDraw<'_>) -> Result<f64> {
        if !self.grid.same_as(draw.grid) {
            return Err(FrontierError::GridMismatch(
                "draw and operator use different grids".into(),
            ));
        }
        let z = &draw.z;
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..self.half {
            let row = self.row(c);
            let mut s = Complex64::new(0.0, 0.0);
            for (a, zc) in row.iter().zip(z) {
                s += a * zc;
            }
            acc += s * z[c];
        }
        Ok(2.0 * acc.re)
    }

    /// <c^n, Phi> for one draw.
    pub fn pair(&self, draw: &NoiseDraw<'_>, mode: &CnMode) -> Result<f64> {
        Ok(self.quadratic(draw)? - self.counterterm(mode))
    }

    /// sum_{c, c'} |A_{c,c'}|^2, the grid version of the divergence functional.
    pub fn divergence_cell_sum(&self) -> f64 {
        2.0 * self.a.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// Exact E[|<c^n, Phi>|^2] under standard Wick subtraction.
    pub fn exact_wick_moment(&self) -> f64 {
        2.0 * self.divergence_cell_sum()
    }
}

/// <c^n, Phi> for one draw; builds the pairing operator on every call.
pub fn pair_cherry(draw: &NoiseDraw<'_>, n: u32, phi: &ClassETestFunction, mode: &CnMode) -> Result<f64> {
    PairingOperator::new(draw.grid, n, phi)?.pair(draw, mode)
}

/// Replica mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoment {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub seed: u64,
}

impl EmpiricalMoment {
    /// Mean and sample standard deviation over sqrt(replicas).
    pub fn from_samples(values: &[f64], seed: u64) -> Result<Self> {
        if values.len() < 2 {
            return Err(FrontierError::DegenerateInput(
                "at least two replicas are required".into(),
            ));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            mean,
            std_error: (var / n).sqrt(),
            replicas: values.len(),
            seed,
        })
    }
}

/// Everything a pairing simulation needs besides n, replicas and seed.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub h: HurstVector,
    pub grid: GridSpec,
    pub phi: ClassETestFunction,
    pub mollifier: MollifierSpec,
    pub mode: CnMode,
}

/// Draws for replicas 0..replicas, one stream id per replica.
pub fn replica_values<F>(replicas: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    (0..replicas as u64).into_par_iter().map(f).collect()
}

/// Mean of |<c^n, Phi>|^2 over independent draws.
pub fn estimate_pairing_moment(config: &SimConfig, n: u32, replicas: usize, seed: u64) -> Result<EmpiricalMoment> {
    if replicas < 2 {
        return Err(FrontierError::DegenerateInput(
            "at least two replicas are required".into(),
        ));
    }
    if config.h.d() != config.phi.d {
        return domain("Hurst vector and test function dimensions differ");
    }
    let grid = SpectralGrid::new(&config.h, n, &config.mollifier, &config.grid)?;
    let op = PairingOperator::new(&grid, n, &config.phi)?;
    let shift = op.counterterm(&config.mode);
    let values = replica_values(replicas, |r| {
        let draw = NoiseDraw::new(&grid, seed, r);
        let p = op.quadratic(&draw)? - shift;
        Ok(p * p)
    })?;
    EmpiricalMoment::from_samples(&values, seed)
}
