//! Aperture excitations: steered, focused, curved, classic Airy and
//! near-field Airy beams, plus the MRT benchmark.
//!
//! Angles are measured from the array broadside (+x axis). Every generated
//! vector is scaled to the scenario transmit power.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::airy::airy_envelope;
use crate::error::{Error, Result};
use crate::propagation::ChannelVector;
use crate::scenario::{ArrayGeometry, Scenario, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamKind {
    Steered,
    Focused,
    Curved,
    ClassicAiry,
    NfAiry,
}

impl BeamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BeamKind::Steered => "steered",
            BeamKind::Focused => "focused",
            BeamKind::Curved => "curved",
            BeamKind::ClassicAiry => "classic-airy",
            BeamKind::NfAiry => "nf-airy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "steered" => BeamKind::Steered,
            "focused" => BeamKind::Focused,
            "curved" => BeamKind::Curved,
            "classic-airy" => BeamKind::ClassicAiry,
            "nf-airy" => BeamKind::NfAiry,
            other => return Err(Error::Param(format!("unknown beam kind '{other}'"))),
        })
    }
}

impl fmt::Display for BeamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Beam parameters. `theta` in radians, `r` and `s` in meters, `c` in 1/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BeamParams {
    Steered { theta: f64 },
    Focused { theta: f64, r: f64 },
    Curved { theta: f64, r: f64, c: f64 },
    ClassicAiry { s: f64, a: f64 },
    NfAiry { theta: f64, r: f64, s: f64, a: f64 },
}

impl BeamParams {
    pub fn kind(&self) -> BeamKind {
        match self {
            BeamParams::Steered { .. } => BeamKind::Steered,
            BeamParams::Focused { .. } => BeamKind::Focused,
            BeamParams::Curved { .. } => BeamKind::Curved,
            BeamParams::ClassicAiry { .. } => BeamKind::ClassicAiry,
            BeamParams::NfAiry { .. } => BeamKind::NfAiry,
        }
    }

    /// Parameter values in declaration order.
    pub fn values(&self) -> Vec<f64> {
        match *self {
            BeamParams::Steered { theta } => vec![theta],
            BeamParams::Focused { theta, r } => vec![theta, r],
            BeamParams::Curved { theta, r, c } => vec![theta, r, c],
            BeamParams::ClassicAiry { s, a } => vec![s, a],
            BeamParams::NfAiry { theta, r, s, a } => vec![theta, r, s, a],
        }
    }

    /// Inverse of [`BeamParams::values`].
    pub fn from_values(kind: BeamKind, v: &[f64]) -> Result<Self> {
        let want = match kind {
            BeamKind::Steered => 1,
            BeamKind::Focused | BeamKind::ClassicAiry => 2,
            BeamKind::Curved => 3,
            BeamKind::NfAiry => 4,
        };
        if v.len() != want {
            return Err(Error::Param(format!(
                "{kind} takes {want} parameters, got {}",
                v.len()
            )));
        }
        let p = match kind {
            BeamKind::Steered => BeamParams::Steered { theta: v[0] },
            BeamKind::Focused => BeamParams::Focused { theta: v[0], r: v[1] },
            BeamKind::Curved => BeamParams::Curved { theta: v[0], r: v[1], c: v[2] },
            BeamKind::ClassicAiry => BeamParams::ClassicAiry { s: v[0], a: v[1] },
            BeamKind::NfAiry => BeamParams::NfAiry { theta: v[0], r: v[1], s: v[2], a: v[3] },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Param(format!("non-finite parameter in {self:?}")));
        }
        let theta_ok = |t: f64| t.abs() < FRAC_PI_2;
        let ok = match *self {
            BeamParams::Steered { theta } => theta_ok(theta),
            BeamParams::Focused { theta, r } | BeamParams::Curved { theta, r, .. } => {
                theta_ok(theta) && r > 0.0
            }
            BeamParams::ClassicAiry { s, .. } => s != 0.0,
            BeamParams::NfAiry { theta, r, s, .. } => theta_ok(theta) && r > 0.0 && s != 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Param(format!(
                "invalid {}: need |theta| < pi/2, r > 0, s != 0 ({self:?})",
                self.kind()
            )))
        }
    }
}

/// Focused phase `κ(-y sinθ + y² cos²θ / (2r))` per element.
pub fn focused_phase(geometry: &ArrayGeometry, k: f64, theta: f64, r: f64) -> Vec<f64> {
    let (sin, cos) = theta.sin_cos();
    let q = cos * cos / (2.0 * r);
    (0..geometry.num_elements())
        .map(|n| {
            let y = geometry.position(n);
            k * (-y * sin + y * y * q)
        })
        .collect()
}

/// Cubic phase `-(2π c y)³ / 3` added by the curved beam.
pub fn cubic_phase(geometry: &ArrayGeometry, c: f64) -> Vec<f64> {
    (0..geometry.num_elements())
        .map(|n| {
            let u = 2.0 * std::f64::consts::PI * c * geometry.position(n);
            -u * u * u / 3.0
        })
        .collect()
}

fn phase_only(phase: &[f64], power: f64) -> Result<Weights> {
    let amp = (power / phase.len() as f64).sqrt();
    Weights::new(phase.iter().map(|&p| Complex64::from_polar(amp, p)).collect(), power)
}

fn shaped(envelope: &[f64], phase: Option<&[f64]>, power: f64) -> Result<Weights> {
    let norm = envelope.iter().map(|e| e * e).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let g = power.sqrt() / norm;
    let coeffs = match phase {
        Some(ph) => envelope
            .iter()
            .zip(ph)
            .map(|(&e, &p)| Complex64::from_polar(e * g, p))
            .collect(),
        None => envelope.iter().map(|&e| Complex64::new(e * g, 0.0)).collect(),
    };
    Weights::new(coeffs, power)
}

/// Aperture weights for `params` at the scenario power.
pub fn make_beam(scenario: &Scenario, params: &BeamParams) -> Result<Weights> {
    params.validate()?;
    let g = scenario.geometry();
    let k = scenario.wavenumber();
    let p = scenario.power();
    match *params {
        BeamParams::Steered { theta } => {
            let sin = theta.sin();
            let phase: Vec<f64> = (0..g.num_elements())
                .map(|n| -k * g.position(n) * sin)
                .collect();
            phase_only(&phase, p)
        }
        BeamParams::Focused { theta, r } => phase_only(&focused_phase(g, k, theta, r), p),
        BeamParams::Curved { theta, r, c } => {
            let mut phase = focused_phase(g, k, theta, r);
            phase
                .iter_mut()
                .zip(cubic_phase(g, c))
                .for_each(|(a, b)| *a += b);
            phase_only(&phase, p)
        }
        BeamParams::ClassicAiry { s, a } => shaped(&airy_envelope(g, s, a)?, None, p),
        BeamParams::NfAiry { theta, r, s, a } => {
            shaped(&airy_envelope(g, s, a)?, Some(&focused_phase(g, k, theta, r)), p)
        }
    }
}

/// Maximum-ratio transmission `w = √P h / ‖h‖`.
pub fn mrt_beam(h: &ChannelVector, power: f64) -> Result<Weights> {
    let norm = h.norm_sqr().sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroChannel);
    }
    let g = power.sqrt() / norm;
    Weights::new(h.h.iter().map(|c| c * g).collect(), power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{GridSpec, ScenarioConfig};

    fn reference_scene() -> Scenario {
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
                x_max: 2.0,
                pad_factor: 2.0,
                absorber_strength: 2.0,
            },
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn broadside_steered_is_uniform() {
        let s = reference_scene();
        let w = make_beam(&s, &BeamParams::Steered { theta: 0.0 }).unwrap();
        let amp = (5.0f64 / 266.0).sqrt();
        assert!(w.coeffs().iter().all(|c| *c == Complex64::new(amp, 0.0)));
    }

    #[test]
    fn curved_without_curvature_is_focused() {
        let s = reference_scene();
        let f = make_beam(&s, &BeamParams::Focused { theta: 0.3, r: 2.0 }).unwrap();
        let c = make_beam(&s, &BeamParams::Curved { theta: 0.3, r: 2.0, c: 0.0 }).unwrap();
        for (a, b) in f.coeffs().iter().zip(c.coeffs()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn huge_scale_is_nearly_uniform() {
        let s = reference_scene();
        let w = make_beam(
            &s,
            &BeamParams::NfAiry { theta: 0.0, r: 2.0, s: 1e6, a: -0.8 },
        )
        .unwrap();
        let mags: Vec<f64> = w.coeffs().iter().map(|c| c.norm()).collect();
        let mean = mags.iter().sum::<f64>() / mags.len() as f64;
        assert!(mags.iter().all(|m| (m - mean).abs() <= 0.01 * mean));
    }

    #[test]
    fn classic_airy_phase_is_binary() {
        let s = reference_scene();
        let w = make_beam(&s, &BeamParams::ClassicAiry { s: 0.01, a: -0.1 }).unwrap();
        assert!(w.coeffs().iter().all(|c| c.im == 0.0));
        assert!(w.coeffs().iter().any(|c| c.re < 0.0));
    }

    #[test]
    fn airy_peak_side_for_negative_scale() {
        // With s < 0 the envelope's main lobe sits at the +y end of the array.
        let s = reference_scene();
        let w = make_beam(
            &s,
            &BeamParams::NfAiry { theta: 0.0, r: 1.0, s: -0.1, a: -0.8 },
        )
        .unwrap();
        let (peak, _) = w
            .coeffs()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        assert!(peak > 133);
    }

    #[test]
    fn invalid_params() {
        let s = reference_scene();
        for p in [
            BeamParams::Steered { theta: FRAC_PI_2 },
            BeamParams::Focused { theta: 0.0, r: 0.0 },
            BeamParams::NfAiry { theta: 0.0, r: 1.0, s: 0.0, a: 0.0 },
            BeamParams::Curved { theta: 0.0, r: 1.0, c: f64::NAN },
        ] {
            assert!(matches!(make_beam(&s, &p), Err(Error::Param(_))), "{p:?}");
        }
        assert!(matches!(
            make_beam(&s, &BeamParams::ClassicAiry { s: 1e-8, a: 0.0 }),
            Err(Error::DegenerateScale(_))
        ));
        assert!(BeamParams::from_values(BeamKind::Curved, &[0.1, 1.0]).is_err());
    }

    #[test]
    fn mrt_of_unit_vector() {
        let mut h = vec![Complex64::new(0.0, 0.0); 4];
        h[0] = Complex64::new(0.0, 2.0);
        let ch = ChannelVector { h, user: (1.0, 0.0) };
        let w = mrt_beam(&ch, 5.0).unwrap();
        assert!((w.coeffs()[0] - Complex64::new(0.0, 5f64.sqrt())).norm() < 1e-15);
        let zero = ChannelVector { h: vec![Complex64::new(0.0, 0.0); 4], user: (1.0, 0.0) };
        assert!(matches!(mrt_beam(&zero, 1.0), Err(Error::ZeroChannel)));
    }

    #[test]
    fn params_json_round_trip() {
        let p = BeamParams::NfAiry { theta: -0.2, r: 3.0, s: -0.05, a: -1.5 };
        let j = serde_json::to_string(&p).unwrap();
        assert!(j.contains("\"kind\":\"nf-airy\""));
        assert_eq!(serde_json::from_str::<BeamParams>(&j).unwrap(), p);
    }
}
