mod common;

use common::{duhamel_oracle, gl, gl_c, TestRng};
use frontier_core::spectral::{
    duhamel, duhamel_untruncated, mollifier_ft, mu_density, phase_integral, phase_moment, wave_kernel_ft,
    DuhamelEvaluator, HurstVector, MollifierKind, MollifierSpec,
};
use frontier_core::FrontierError;
use num_complex::Complex64;
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn hurst_vector_rejects_out_of_range_entries() {
    assert!(HurstVector::new(vec![0.3, 0.4]).is_ok());
    for bad in [vec![0.0, 0.3], vec![0.3, 1.0], vec![f64::NAN, 0.2], vec![0.3]] {
        assert!(HurstVector::new(bad).is_err());
    }
    let h = HurstVector::new(vec![0.2, 0.3, 0.4]).unwrap();
    assert_eq!(h.d(), 2);
    assert_eq!(h.h0(), 0.2);
    assert!(close(h.h_plus(), 0.7, 1e-15));
    assert!(close(h.sum(), 0.9, 1e-15));
}

#[test]
fn mu_density_matches_power_product() {
    let h = HurstVector::new(vec![0.25, 0.4]).unwrap();
    let v = mu_density(&h, 4.0, &[9.0]).unwrap();
    // |4|^{1/2} |9|^{1/5}
    assert!(close(v, 2.0 * 9f64.powf(0.2), 1e-14));
    let white = HurstVector::uniform(1, 0.5).unwrap();
    assert_eq!(mu_density(&white, -3.7, &[12.0]).unwrap(), 1.0);
}

#[test]
fn mu_density_errors_on_hyperplanes() {
    let h = HurstVector::uniform(2, 0.3).unwrap();
    assert!(matches!(
        mu_density(&h, 0.0, &[1.0, 1.0]),
        Err(FrontierError::Domain(_))
    ));
    assert!(matches!(
        mu_density(&h, 1.0, &[1.0, 0.0]),
        Err(FrontierError::Domain(_))
    ));
    assert!(matches!(mu_density(&h, 1.0, &[1.0]), Err(FrontierError::Domain(_))));
}

#[test]
fn gaussian_mollifier_examples() {
    let m = MollifierSpec::default();
    // |k|^2 = 2 at n = 0 gives e^{-1}
    assert!(close(mollifier_ft(&m, 0, 1.0, &[1.0]), (-1.0f64).exp(), 1e-15));
    // at n = 10 the frequency 2^10 maps to 1
    assert!(close(mollifier_ft(&m, 10, 1024.0, &[0.0]), (-0.5f64).exp(), 1e-15));
    assert_eq!(mollifier_ft(&m, 3, 0.0, &[0.0, 0.0]), 1.0);
    assert!(MollifierSpec::new(MollifierKind::GaussianProduct, 0.0).is_err());
    assert!(MollifierSpec::new(MollifierKind::CompactBump, -1.0).is_err());
}

#[test]
fn bump_mollifier_matches_direct_cosine_transform() {
    let m = MollifierSpec::new(MollifierKind::CompactBump, 1.0).unwrap();
    let raw = |x: f64| {
        if x.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - x * x)).exp()
        }
    };
    let mass = gl(-1.0, 1.0, 0.0, raw);
    for k in [0.0, 0.5, 2.0, 7.5, 20.0] {
        let expect = gl(-1.0, 1.0, k, |x| raw(x) * (k * x).cos()) / mass;
        let got = m.transform(&[k]);
        assert!((got - expect).abs() < 1e-10, "k = {k}: {got} vs {expect}");
    }
    assert!((m.transform(&[0.0, 0.0]) - 1.0).abs() < 1e-12);
}

#[test]
fn mollifier_weight_increases_to_one() {
    for kind in [MollifierKind::GaussianProduct, MollifierKind::CompactBump] {
        let m = MollifierSpec::new(kind, 1.0).unwrap();
        let (xi, eta) = (3.0, [2.0, -1.5]);
        let mut prev = 0.0;
        for n in 0..40 {
            let w = m.weight(n, xi, &eta);
            assert!(w >= prev - 1e-15 && w <= 1.0 + 1e-12);
            prev = w;
        }
        assert!((prev - 1.0).abs() < 1e-12);
    }
}

#[test]
fn wave_kernel_examples_and_truncation() {
    assert!(close(wave_kernel_ft(1.0, &[3.0, 4.0], None), 5f64.sin() / 5.0, 1e-15));
    assert_eq!(wave_kernel_ft(2.0, &[0.0], None), 2.0);
    assert_eq!(wave_kernel_ft(1.0, &[3.0, 4.0], Some(4)), 0.0);
    assert_ne!(wave_kernel_ft(1.0, &[3.0, 4.0], Some(5)), 0.0);
}

proptest! {
    #[test]
    fn wave_kernel_is_bounded(t in 0.0f64..20.0, e0 in -50.0f64..50.0, e1 in -50.0f64..50.0) {
        let a = (e0 * e0 + e1 * e1).sqrt();
        let v = wave_kernel_ft(t, &[e0, e1], None).abs();
        prop_assert!(v <= t + 1e-12);
        if a > 0.0 {
            prop_assert!(v <= 1.0 / a + 1e-12);
        }
    }
}

#[test]
fn phase_integral_examples() {
    let v = phase_integral(std::f64::consts::PI, 1.0);
    assert!((v - Complex64::new(0.0, 2.0 / std::f64::consts::PI)).norm() < 1e-15);
    assert_eq!(phase_integral(0.0, 2.5), Complex64::new(2.5, 0.0));
}

#[test]
fn phase_integral_is_stable_near_zero() {
    for z in [1e-12, 1e-9, -1e-7, 3e-5, 9.9e-5, 1.01e-4, 1e-3] {
        let expect = gl_c(0.0, 2.0, z, |r| Complex64::from_polar(1.0, z * r));
        let got = phase_integral(z, 2.0);
        assert!(
            (got - expect).norm() <= 1e-12 * expect.norm(),
            "z = {z}: {got} vs {expect}"
        );
    }
}

#[test]
fn phase_moments_match_quadrature() {
    for k in 0..6u32 {
        for z in [0.0, 1e-6, 0.3, -2.0, 7.0, 40.0] {
            let s = 1.7;
            let expect = gl_c(0.0, s, z, |r| Complex64::from_polar(r.powi(k as i32), z * r));
            let got = phase_moment(k, z, s);
            assert!(
                (got - expect).norm() <= 1e-11 * expect.norm().max(1e-3),
                "k = {k}, z = {z}"
            );
        }
    }
}

#[test]
fn duhamel_examples() {
    let pi = std::f64::consts::PI;
    // int_0^pi sin r dr
    assert!((duhamel_untruncated(pi, 0.0, 1.0) - Complex64::new(2.0, 0.0)).norm() < 1e-14);
    assert_eq!(duhamel(8, 0.0, 3.0, &[1.0]), Complex64::new(0.0, 0.0));
    assert_eq!(duhamel(2, 1.0, 3.0, &[2.5]), Complex64::new(0.0, 0.0));
    // eta = 0 reduces to int_0^s r e^{-i xi r} dr
    let expect = gl_c(0.0, 1.3, 2.0, |r| Complex64::from_polar(r, -2.0 * r));
    assert!((duhamel(4, 1.3, 2.0, &[0.0]) - expect).norm() < 1e-13);
}

#[test]
fn duhamel_closed_form_matches_quadrature_on_random_points() {
    let mut rng = TestRng::new(7);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let s = rng.uniform(0.01, 3.0);
        let a = match i % 4 {
            0 => rng.uniform(0.0, 1e-3),
            _ => rng.uniform(0.0, 12.0),
        };
        let xi = match i % 5 {
            // near resonance |xi| = |eta|
            0 => a * (1.0 + rng.uniform(-1e-6, 1e-6)),
            1 => -a + rng.uniform(-1e-3, 1e-3),
            _ => rng.uniform(-15.0, 15.0),
        };
        let got = DuhamelEvaluator::new(20).eval_radial(s, xi, a);
        let expect = duhamel_oracle(s, xi, a);
        let rel = (got - expect).norm() / expect.norm();
        worst = worst.max(rel);
        assert!(rel < 1e-9, "s = {s}, xi = {xi}, a = {a}: {got} vs {expect}");
    }
    assert!(worst < 1e-9);
}

proptest! {
    #[test]
    fn duhamel_conjugation_and_bound(s in 0.0f64..4.0, xi in -30.0f64..30.0, a in 0.0f64..30.0) {
        let d = duhamel_untruncated(s, xi, a);
        let dm = duhamel_untruncated(s, -xi, a);
        prop_assert!((d.conj() - dm).norm() <= 1e-12 * (1.0 + d.norm()));
        prop_assert!(d.norm() <= s * s / 2.0 + 1e-12);
    }
}
