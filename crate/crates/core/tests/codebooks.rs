use nfbeam::airy::airy_ai;
use nfbeam::codebooks::{
    assemble_codebook, codeword_correlation, sample_axis, Codebook, CodebookSpecs, SamplingSpec,
};
use nfbeam::scenario::{GridSpec, ScenarioConfig};
use nfbeam::waveforms::{make_beam, BeamKind, BeamParams};
use nfbeam::{Error, Scenario, Weights};
use num_complex::Complex64;
use proptest::prelude::*;

fn scenario() -> Scenario {
    ScenarioConfig {
        frequency_hz: 100e9,
        num_elements: 266,
        spacing_over_lambda: 0.5,
        power: 5.0,
        noise_power: 1.0,
        obstacles: vec![],
        grid: GridSpec {
            dx: None,
            dy: None,
            y_halfspan: 0.5,
            x_max: 1.0,
            pad_factor: 2.0,
            absorber_strength: 2.0,
        },
    }
    .validate()
    .unwrap()
}

fn airy(s: &Scenario, theta: f64, r: f64, sc: f64, a: f64) -> Weights {
    make_beam(s, &BeamParams::NfAiry { theta, r, s: sc, a }).unwrap()
}

#[test]
fn self_correlation_is_one() {
    let s = scenario();
    let w = airy(&s, 0.2, 2.0, -0.1, -0.8);
    assert!((codeword_correlation(&w, &w).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn dft_aligned_steered_beams_are_orthogonal() {
    let s = scenario();
    // With d = λ/2, sinθ = 2k/N puts beam k on DFT column k.
    let beam = |k: f64| make_beam(&s, &BeamParams::Steered { theta: (2.0 * k / 266.0).asin() }).unwrap();
    for (a, b) in [(0.0, 1.0), (3.0, 17.0), (-40.0, 40.0)] {
        assert!(codeword_correlation(&beam(a), &beam(b)).unwrap() < 1e-9);
    }
}

#[test]
fn decay_correlation_matches_ratio_of_sums() {
    // Same (θ, r, s): the focused phases cancel and only the envelopes remain.
    let s = scenario();
    let (sc, am, an) = (-0.1, -1.0, -0.8);
    let lib = codeword_correlation(&airy(&s, 0.1, 3.0, sc, am), &airy(&s, 0.1, 3.0, sc, an)).unwrap();
    let g = s.geometry();
    let (mut cross, mut pm, mut pn) = (0.0, 0.0, 0.0);
    for n in 0..g.num_elements() {
        let u = g.position(n) / sc;
        let ai2 = airy_ai(u).unwrap().powi(2);
        cross += ai2 * ((am + an) * u).exp();
        pm += ai2 * (2.0 * am * u).exp();
        pn += ai2 * (2.0 * an * u).exp();
    }
    let direct = cross / (pm * pn).sqrt();
    assert!((lib - direct).abs() < 1e-12, "{lib} vs {direct}");
}

#[test]
fn decay_axis_correlation_is_flat_and_monotone() {
    let s = scenario();
    let decays = sample_axis(&SamplingSpec::Decay { min: -2.0, max: 0.0, count: 10 }).unwrap();
    for sc in [-0.3, -0.1, 0.05, 0.2] {
        let ws: Vec<Weights> = decays.iter().map(|&a| airy(&s, 0.0, 2.0, sc, a)).collect();
        let adj: Vec<f64> = ws
            .windows(2)
            .map(|p| codeword_correlation(&p[0], &p[1]).unwrap())
            .collect();
        let (lo, hi) = adj
            .iter()
            .fold((f64::MAX, f64::MIN), |(l, h), &c| (l.min(c), h.max(c)));
        assert!((hi - lo) / hi < 0.25, "s = {sc}: adjacent correlations {adj:?}");
        for gap in 1..decays.len() - 1 {
            let c0 = codeword_correlation(&ws[0], &ws[gap]).unwrap();
            let c1 = codeword_correlation(&ws[0], &ws[gap + 1]).unwrap();
            assert!(c1 < c0, "s = {sc}: not decreasing at gap {gap}");
        }
    }
}

fn adjacent_spread(s: &Scenario, scales: &[f64], a: f64) -> f64 {
    let ws: Vec<Weights> = scales.iter().map(|&sc| airy(s, 0.0, 2.0, sc, a)).collect();
    let adj: Vec<f64> = ws
        .windows(2)
        .map(|p| codeword_correlation(&p[0], &p[1]).unwrap())
        .collect();
    let max = adj.iter().cloned().fold(f64::MIN, f64::max);
    let min = adj.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

#[test]
fn reciprocal_scale_sampling_is_flatter_than_linear() {
    let s = scenario();
    let recip = sample_axis(&SamplingSpec::Scale { s_min: 0.05, s_max: 0.3, count: 10, symmetric: false }).unwrap();
    let lin = sample_axis(&SamplingSpec::ScaleLinear { s_min: 0.05, s_max: 0.3, count: 10, symmetric: false }).unwrap();
    for a in [-1.6, -1.0, -0.4] {
        let r = adjacent_spread(&s, &recip, a);
        let l = adjacent_spread(&s, &lin, a);
        assert!(r < l, "a = {a}: reciprocal {r} vs linear {l}");
    }
}

#[test]
fn eq_distance_gaps_shrink_toward_the_array() {
    let r = sample_axis(&SamplingSpec::Distance { z: 6.0, m: 12, r_min: 0.0 }).unwrap();
    let gaps: Vec<f64> = r.windows(2).map(|w| w[0] - w[1]).collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]));
}

#[test]
fn assembly_is_deterministic_and_round_trips() {
    let s = scenario();
    let q = std::f64::consts::FRAC_PI_4;
    let specs = CodebookSpecs {
        angle: Some(SamplingSpec::AngleWindow { count: 3, theta_min: -q, theta_max: q }),
        distance: Some(SamplingSpec::DistanceRange { r_min: 1.0, r_max: 6.0, count: 2 }),
        scale: Some(SamplingSpec::Scale { s_min: 0.05, s_max: 0.3, count: 2, symmetric: true }),
        decay: Some(SamplingSpec::Decay { min: -2.0, max: 0.0, count: 2 }),
        curvature: None,
    };
    let mut a = assemble_codebook(BeamKind::NfAiry, &specs).unwrap();
    let b = assemble_codebook(BeamKind::NfAiry, &specs).unwrap();
    assert_eq!(a.entries().collect::<Vec<_>>(), b.entries().collect::<Vec<_>>());
    assert_eq!(a.len(), 3 * 2 * 4 * 2);
    a.materialize(&s).unwrap();

    let mut text = Vec::new();
    a.write_text(&mut text).unwrap();
    let back = Codebook::read_text(text.as_slice(), s.power()).unwrap();
    let mut again = Vec::new();
    back.write_text(&mut again).unwrap();
    assert_eq!(text, again);
    assert_eq!(back.weights().unwrap()[5].coeffs(), a.weights().unwrap()[5].coeffs());

    let tampered = String::from_utf8(text).unwrap().replacen("entries 48", "entries 47", 1);
    assert!(matches!(Codebook::read_text(tampered.as_bytes(), 5.0), Err(Error::Parse(_))));
}

#[test]
fn correlation_errors() {
    let a = Weights::new(vec![Complex64::new(1.0, 0.0); 3], 3.0).unwrap();
    let b = Weights::new(vec![Complex64::new(1.0, 0.0); 4], 4.0).unwrap();
    assert!(matches!(codeword_correlation(&a, &b), Err(Error::Dimension { .. })));
}

proptest! {
    #[test]
    fn correlation_is_bounded_and_symmetric(
        t1 in -0.7f64..0.7, t2 in -0.7f64..0.7, s1 in 0.05f64..0.3, a1 in -2.0f64..0.0
    ) {
        let s = scenario();
        let x = airy(&s, t1, 2.0, s1, a1);
        let y = make_beam(&s, &BeamParams::Focused { theta: t2, r: 3.0 }).unwrap();
        let c = codeword_correlation(&x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!((c - codeword_correlation(&y, &x).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn scale_reciprocals_are_uniform(lo in 0.01f64..0.2, span in 0.01f64..1.0, n in 2usize..30) {
        let v = sample_axis(&SamplingSpec::Scale { s_min: lo, s_max: lo + span, count: n, symmetric: true }).unwrap();
        prop_assert_eq!(v.len(), 2 * n);
        let inv: Vec<f64> = v[n..].iter().map(|s| 1.0 / s).collect();
        let step = inv[0] - inv[1];
        for w in inv.windows(2) {
            prop_assert!(((w[0] - w[1]) - step).abs() <= 1e-9 * inv[0]);
        }
    }
}
