mod common;

use std::sync::Arc;

use common::mean_se;
use frontier_core::field::{
    estimate_pairing_moment, pair_cherry, replica_values, synthesize_psi, synthesize_psi_complex, wick_square, CnMode,
    EmpiricalMoment, GridSpec, NoiseDraw, PairingOperator, SimConfig, SpectralGrid, MAX_PAIRING_CELLS,
};
use frontier_core::spectral::{HurstVector, MollifierSpec};
use frontier_core::wave::{wave_amplitude, ClassETestFunction};
use frontier_core::FrontierError;
use num_complex::Complex64;

const N: u32 = 4;

fn h() -> HurstVector {
    HurstVector::uniform(1, 0.2).unwrap()
}

fn small_spec(cells: usize) -> GridSpec {
    GridSpec {
        cells_per_axis: cells,
        xi_radius: Some(6.0),
        eta_radius: Some(4.0),
        inner: 0.05,
    }
}

fn grid(cells: usize) -> SpectralGrid {
    SpectralGrid::new(&h(), N, &MollifierSpec::default(), &small_spec(cells)).unwrap()
}

#[test]
fn grid_masses_integrate_the_power_law() {
    let m = MollifierSpec::default();
    let g = grid(16);
    assert_eq!(g.len(), 256);
    let e = 1.0 - 2.0 * 0.2;
    // removing the midpoint mollifier factor leaves the exact box integral of |xi|^e |eta|^e
    let raw: f64 = (0..g.len())
        .map(|c| {
            let (x, eta) = g.point(c);
            g.mass(c) / m.weight(N, x, eta)
        })
        .sum();
    let expect = (2.0 * 6f64.powf(e + 1.0) / (e + 1.0)) * (2.0 * 4f64.powf(e + 1.0) / (e + 1.0));
    assert!(((raw - expect) / expect).abs() < 1e-12, "{raw} vs {expect}");
    for c in 0..g.len() {
        assert!(g.mass(c) > 0.0);
        let r = g.reflect(c);
        let (x, eta) = g.point(c);
        let (xr, etar) = g.point(r);
        assert_eq!((xr, etar[0]), (-x, -eta[0]));
        assert_eq!(g.mass(r), g.mass(c));
        assert!(x != 0.0 && eta[0] != 0.0);
    }
}

#[test]
fn invalid_grid_specs_are_rejected() {
    let m = MollifierSpec::default();
    for spec in [
        GridSpec::with_cells(7),
        GridSpec::with_cells(0),
        GridSpec {
            inner: 0.0,
            ..GridSpec::default()
        },
        GridSpec {
            xi_radius: Some(-1.0),
            ..GridSpec::default()
        },
        GridSpec::with_cells(4096),
    ] {
        assert!(
            matches!(SpectralGrid::new(&h(), N, &m, &spec), Err(FrontierError::Domain(_))),
            "{spec:?}"
        );
    }
}

#[test]
fn draws_are_hermitian_unit_variance_and_keyed() {
    let g = grid(16);
    let mut sq = Vec::new();
    for s in 0..200 {
        let d = NoiseDraw::new(&g, 5, s);
        let z = d.coefficients();
        for c in 0..g.len() {
            assert_eq!(z[g.reflect(c)], z[c].conj());
        }
        sq.extend(z.iter().map(|v| v.norm_sqr()));
    }
    let (m, se) = mean_se(&sq);
    assert!(((m - 1.0) / se).abs() < 3.0, "E|Z|^2 = {m} +- {se}");
    let a = NoiseDraw::new(&g, 5, 3);
    let b = NoiseDraw::new(&g, 5, 3);
    assert_eq!(a.coefficients(), b.coefficients());
    assert_ne!(a.coefficients(), NoiseDraw::new(&g, 5, 4).coefficients());
    assert_ne!(a.coefficients(), NoiseDraw::new(&g, 6, 3).coefficients());
}

#[test]
fn field_vanishes_at_time_zero_and_is_real() {
    let g = grid(16);
    for s in 0..20 {
        let d = NoiseDraw::new(&g, 1, s);
        assert_eq!(synthesize_psi(&d, N, 0.0, &[0.3]).unwrap(), 0.0);
        for (t, x) in [(0.4, 0.0), (1.0, 2.5), (2.0, -7.0)] {
            let v = synthesize_psi_complex(&d, N, t, &[x]).unwrap();
            assert!(v.im.abs() < 1e-10 * (1.0 + v.re.abs()));
        }
    }
}

#[test]
fn covariance_rows_agree_with_the_wick_constant() {
    let g = grid(16);
    for t in [0.3, 1.0] {
        let c = g.wick_constant(N, t).unwrap();
        assert!(c > 0.0);
        for x in [0.0, 1.0, -3.3] {
            let v = g.covariance(N, t, &[x], t, &[x]).unwrap();
            assert!(((v - c) / c).abs() < 1e-12);
        }
    }
    // the covariance depends on positions only through x - x2
    let a = g.covariance(N, 0.5, &[1.0], 0.8, &[0.2]).unwrap();
    let b = g.covariance(N, 0.5, &[3.0], 0.8, &[2.2]).unwrap();
    assert!((a - b).abs() < 1e-12 * a.abs().max(1e-300));
}

struct Samples {
    a: Vec<f64>,
    b: Vec<f64>,
}

fn field_samples(g: &SpectralGrid, draws: u64, p: (f64, f64), q: (f64, f64)) -> Samples {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for s in 0..draws {
        let d = NoiseDraw::new(g, 2024, s);
        a.push(synthesize_psi(&d, N, p.0, &[p.1]).unwrap());
        b.push(synthesize_psi(&d, N, q.0, &[q.1]).unwrap());
    }
    Samples { a, b }
}

#[test]
fn empirical_variance_and_covariance_match_cell_sums() {
    let g = grid(16);
    let (p, q) = ((1.0, 0.0), (0.7, 1.0));
    let s = field_samples(&g, 10_000, p, q);
    let var_a: Vec<f64> = s.a.iter().map(|v| v * v).collect();
    let var_b: Vec<f64> = s.b.iter().map(|v| v * v).collect();
    let prod: Vec<f64> = s.a.iter().zip(&s.b).map(|(x, y)| x * y).collect();
    let (m, se) = mean_se(&var_a);
    let exact = g.wick_constant(N, 1.0).unwrap();
    assert!(((m - exact) / se).abs() < 3.0, "Var {m} +- {se} vs {exact}");
    let (m, se) = mean_se(&prod);
    let exact = g.covariance(N, p.0, &[p.1], q.0, &[q.1]).unwrap();
    assert!(((m - exact) / se).abs() < 3.0, "Cov {m} +- {se} vs {exact}");
    // stationarity: the variance at x = 1 matches the one at x = 0
    let s1 = field_samples(&g, 10_000, (1.0, 1.0), (0.7, 1.0));
    let diff: Vec<f64> = var_a.iter().zip(&s1.a).map(|(v, w)| v - w * w).collect();
    let (m, se) = mean_se(&diff);
    assert!((m / se).abs() < 3.0, "Var difference {m} +- {se}");
    assert!(!var_b.is_empty());
}

#[test]
fn wick_square_is_centered_with_wick_covariance() {
    let g = grid(16);
    let (p, q) = ((1.0, 0.0), (0.8, 0.5));
    let mut w1 = Vec::new();
    let mut prod = Vec::new();
    for s in 0..10_000 {
        let d = NoiseDraw::new(&g, 77, s);
        let a = wick_square(&d, N, p.0, &[p.1]).unwrap();
        let b = wick_square(&d, N, q.0, &[q.1]).unwrap();
        w1.push(a);
        prod.push(a * b);
    }
    let (m, se) = mean_se(&w1);
    assert!((m / se).abs() < 3.0, "mean {m} +- {se}");
    let cov = g.covariance(N, p.0, &[p.1], q.0, &[q.1]).unwrap();
    let (m, se) = mean_se(&prod);
    assert!(
        ((m - 2.0 * cov * cov) / se).abs() < 3.0,
        "E[WW] {m} +- {se} vs {}",
        2.0 * cov * cov
    );
}

#[test]
fn mismatched_inputs_raise_grid_mismatch() {
    let g = grid(8);
    let d = NoiseDraw::new(&g, 1, 0);
    assert!(matches!(
        synthesize_psi(&d, N + 1, 1.0, &[0.0]),
        Err(FrontierError::GridMismatch(_))
    ));
    assert!(matches!(
        synthesize_psi(&d, N, 1.0, &[0.0, 1.0]),
        Err(FrontierError::GridMismatch(_))
    ));
    assert!(matches!(
        g.wick_constant(N + 1, 1.0),
        Err(FrontierError::GridMismatch(_))
    ));
    let phi1 = ClassETestFunction::default_for(1).unwrap();
    let phi2 = ClassETestFunction::default_for(2).unwrap();
    assert!(matches!(
        PairingOperator::new(&g, N, &phi2),
        Err(FrontierError::GridMismatch(_))
    ));
    assert!(matches!(
        PairingOperator::new(&g, N + 1, &phi1),
        Err(FrontierError::GridMismatch(_))
    ));
    let other = grid(10);
    let op = PairingOperator::new(&g, N, &phi1).unwrap();
    let foreign = NoiseDraw::new(&other, 1, 0);
    assert!(matches!(op.quadratic(&foreign), Err(FrontierError::GridMismatch(_))));
}

#[test]
fn pairing_grid_limit() {
    let m = MollifierSpec::default();
    let big = SpectralGrid::new(&h(), N, &m, &GridSpec::with_cells(66)).unwrap();
    assert!(big.len() > MAX_PAIRING_CELLS);
    let phi = ClassETestFunction::default_for(1).unwrap();
    assert!(matches!(
        PairingOperator::new(&big, N, &phi),
        Err(FrontierError::Domain(_))
    ));
}

/// A_{c,c'} assembled directly from the library amplitude and the grid cells.
fn amplitude_matrix(g: &SpectralGrid, phi: &ClassETestFunction) -> Vec<Vec<Complex64>> {
    (0..g.len())
        .map(|c| {
            let (x1, e1) = g.point(c);
            (0..g.len())
                .map(|c2| {
                    let (x2, e2) = g.point(c2);
                    let ps = phi.psi_ft(&[e1[0] + e2[0]]);
                    wave_amplitude(&phi.phi, N, x1, e1, x2, e2) * ((g.mass(c) * g.mass(c2)).sqrt() * ps)
                })
                .collect()
        })
        .collect()
}

#[test]
fn pairing_operator_matches_exhaustive_cell_sums() {
    let g = grid(8);
    let phi = ClassETestFunction::default_for(1).unwrap();
    let op = PairingOperator::new(&g, N, &phi).unwrap();
    let a = amplitude_matrix(&g, &phi);
    let len = g.len();
    let sum_sq: f64 = a.iter().flatten().map(|v| v.norm_sqr()).sum();
    assert!(((op.divergence_cell_sum() - sum_sq) / sum_sq).abs() < 1e-12);
    assert!(((op.exact_wick_moment() - 2.0 * sum_sq) / sum_sq).abs() < 1e-12);
    // E[Q] = sum_c A_{c,-c} since E[Z_c Z_c'] is 1 exactly when c' = -c
    let mean_q: Complex64 = (0..len).map(|c| a[c][g.reflect(c)]).sum();
    assert!(mean_q.im.abs() < 1e-12 * mean_q.re.abs());
    let wick = op.counterterm(&CnMode::StandardWick);
    assert!(((wick - mean_q.re) / wick).abs() < 1e-12);
    // the quadratic form of one draw, summed over every ordered pair
    for s in 0..5 {
        let d = NoiseDraw::new(&g, 9, s);
        let z = d.coefficients();
        let mut q = Complex64::new(0.0, 0.0);
        for c in 0..len {
            for c2 in 0..len {
                q += a[c][c2] * z[c] * z[c2];
            }
        }
        let got = op.quadratic(&d).unwrap();
        assert!((got - q.re).abs() < 1e-12 * q.norm(), "{got} vs {q}");
        assert!(q.im.abs() < 1e-10 * q.norm());
    }
}

#[test]
fn wick_counterterm_equals_time_integrated_variance() {
    let g = grid(8);
    let phi = ClassETestFunction::default_for(1).unwrap();
    let op = PairingOperator::new(&g, N, &phi).unwrap();
    let gr = Arc::new(grid(8));
    let cn = {
        let gr = gr.clone();
        CnMode::Custom(Arc::new(move |s: f64| gr.wick_constant(N, s).unwrap()))
    };
    let a = op.counterterm(&CnMode::StandardWick);
    let b = op.counterterm(&cn);
    // the custom path runs a fixed 24-point time rule over the sampled constant
    assert!(((a - b) / a).abs() < 1e-8, "{a} vs {b}");
}

#[test]
fn renormalization_shifts_pairings_by_a_constant() {
    let g = grid(8);
    let phi = ClassETestFunction::default_for(1).unwrap();
    let shift = PairingOperator::new(&g, N, &phi)
        .unwrap()
        .counterterm(&CnMode::StandardWick);
    for s in 0..5 {
        let d = NoiseDraw::new(&g, 3, s);
        let none = pair_cherry(&d, N, &phi, &CnMode::None).unwrap();
        let wick = pair_cherry(&d, N, &phi, &CnMode::StandardWick).unwrap();
        assert!((none - wick - shift).abs() < 1e-10 * shift.abs().max(1.0));
    }
    let zero = phi.with_psi_scale(0.0);
    let d = NoiseDraw::new(&g, 3, 0);
    for mode in [
        CnMode::None,
        CnMode::StandardWick,
        CnMode::Custom(Arc::new(|s: f64| 1.0 + s)),
    ] {
        assert_eq!(pair_cherry(&d, N, &zero, &mode).unwrap(), 0.0);
    }
}

#[test]
fn empirical_moment_formula() {
    let m = EmpiricalMoment::from_samples(&[1.0, 2.0, 3.0, 4.0], 8).unwrap();
    assert_eq!(m.mean, 2.5);
    assert!((m.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    assert_eq!((m.replicas, m.seed), (4, 8));
    assert!(matches!(
        EmpiricalMoment::from_samples(&[1.0], 0),
        Err(FrontierError::DegenerateInput(_))
    ));
}

fn sim(mode: CnMode) -> SimConfig {
    SimConfig {
        h: h(),
        grid: small_spec(8),
        phi: ClassETestFunction::default_for(1).unwrap(),
        mollifier: MollifierSpec::default(),
        mode,
    }
}

#[test]
fn pairing_moment_estimates_are_deterministic_and_validated() {
    let cfg = sim(CnMode::StandardWick);
    let a = estimate_pairing_moment(&cfg, N, 50, 1).unwrap();
    let b = estimate_pairing_moment(&cfg, N, 50, 1).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, estimate_pairing_moment(&cfg, N, 50, 2).unwrap());
    assert!(matches!(
        estimate_pairing_moment(&cfg, N, 1, 1),
        Err(FrontierError::DegenerateInput(_))
    ));
    let mut bad = cfg.clone();
    bad.phi = ClassETestFunction::default_for(2).unwrap();
    assert!(estimate_pairing_moment(&bad, N, 10, 1).is_err());
    // each replica has its own stream
    let v = replica_values(2, |r| Ok(NoiseDraw::new(&grid(8), 1, r).coefficients()[0].re)).unwrap();
    assert_ne!(v[0], v[1]);
}

#[test]
fn pairing_variance_is_identical_under_custom_counterterms() {
    let g = grid(8);
    let phi = ClassETestFunction::default_for(1).unwrap();
    let op = PairingOperator::new(&g, N, &phi).unwrap();
    let modes = [
        CnMode::Custom(Arc::new(|_: f64| 0.5)),
        CnMode::Custom(Arc::new(|s: f64| 10.0 * s * s)),
        CnMode::Custom(Arc::new(|s: f64| (3.0 * s).sin())),
    ];
    let var = |mode: &CnMode| {
        let v: Vec<f64> = (0..400)
            .map(|s| op.pair(&NoiseDraw::new(&g, 4, s), mode).unwrap())
            .collect();
        let (m, _) = mean_se(&v);
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
    };
    let base = var(&modes[0]);
    for m in &modes[1..] {
        assert!(((var(m) - base) / base).abs() < 1e-10);
    }
}

#[test]
fn doubling_replicas_halves_the_squared_standard_error() {
    let g = grid(8);
    let phi = ClassETestFunction::default_for(1).unwrap();
    let op = PairingOperator::new(&g, N, &phi).unwrap();
    let shift = op.counterterm(&CnMode::StandardWick);
    let value = |seed: u64, r: u64| {
        let p = op.quadratic(&NoiseDraw::new(&g, seed, r)).unwrap() - shift;
        p * p
    };
    // averaging squared errors before dividing avoids the bias of a mean of ratios
    let (mut sum_a, mut sum_b) = (0.0, 0.0);
    for rep in 0..50u64 {
        let small: Vec<f64> = (0..200).map(|r| value(1000 + rep, r)).collect();
        let large: Vec<f64> = (0..400).map(|r| value(5000 + rep, r)).collect();
        let a = EmpiricalMoment::from_samples(&small, 0).unwrap().std_error;
        let b = EmpiricalMoment::from_samples(&large, 0).unwrap().std_error;
        sum_a += a * a;
        sum_b += b * b;
    }
    let mean = sum_b / sum_a;
    assert!((mean - 0.5).abs() <= 0.1, "mean ratio {mean}");
}
