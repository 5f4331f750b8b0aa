mod support;

use nfbeam::airy::{airy_ai, airy_ai_with, airy_envelope, AiryEvalConfig};
use nfbeam::ArrayGeometry;
use proptest::prelude::*;
use support::airy_quadrature::AiryQuadrature;

#[test]
fn oracle_agrees_with_closed_form_at_zero() {
    let q = AiryQuadrature::default();
    let closed = 3f64.powf(-2.0 / 3.0) / puruspe::gamma(2.0 / 3.0);
    assert!((q.ai(0.0) - closed).abs() < 1e-11);
    assert!((airy_ai(0.0).unwrap() - closed).abs() < 1e-15);
}

#[test]
fn oracle_values() {
    let q = AiryQuadrature::default();
    for x in [1.0, -1.0, 2.5, -7.3, -25.0, 6.0] {
        let got = airy_ai(x).unwrap();
        assert!((got - q.ai(x)).abs() < 1e-10, "x = {x}: {got} vs {}", q.ai(x));
    }
}

#[test]
fn first_zero() {
    let q = AiryQuadrature::default();
    let z = q.bisect_zero(-2.5, -2.2);
    assert!((z + 2.338_107_410_459_767).abs() < 1e-9);
    assert!(airy_ai(z).unwrap().abs() < 1e-9);
}

#[test]
fn dense_grid_against_oracle() {
    let q = AiryQuadrature::default();
    let mut worst: f64 = 0.0;
    for i in 0..2000 {
        let x = -60.0 + 70.0 * i as f64 / 1999.0;
        worst = worst.max((airy_ai(x).unwrap() - q.ai(x)).abs());
    }
    assert!(worst <= 1e-10, "worst {worst:e}");
}

#[test]
fn config_bounds() {
    let bad = AiryEvalConfig { series_cutoff: 0.0, ..Default::default() };
    assert!(airy_ai_with(1.0, &bad).is_err());
    let bad = AiryEvalConfig { target_abs_tol: 1e-6, ..Default::default() };
    assert!(airy_ai_with(1.0, &bad).is_err());
    let narrow = AiryEvalConfig { series_cutoff: 3.0, ..Default::default() };
    for x in [-4.0, -2.0, 0.5, 4.0] {
        assert!((airy_ai_with(x, &narrow).unwrap() - airy_ai(x).unwrap()).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn envelope_mirror(s in 0.01f64..1.0, a in -2.0f64..0.0, n in 2usize..64) {
        let g = ArrayGeometry::new(n, 1.5e-3).unwrap();
        let pos = airy_envelope(&g, s, a).unwrap();
        let mut neg = airy_envelope(&g, -s, a).unwrap();
        neg.reverse();
        prop_assert_eq!(pos, neg);
    }

    #[test]
    fn envelope_decay_ratio(s in -0.3f64..-0.05, a in -2.0f64..-0.1) {
        let g = ArrayGeometry::new(32, 1.5e-3).unwrap();
        let env = airy_envelope(&g, s, a).unwrap();
        for n in 0..31 {
            let r0 = env[n] / airy_ai(g.position(n) / s).unwrap();
            let r1 = env[n + 1] / airy_ai(g.position(n + 1) / s).unwrap();
            prop_assert!((r1 / r0 - (a * g.spacing() / s).exp()).abs() < 1e-12);
        }
    }
}
