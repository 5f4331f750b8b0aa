//! Beam training: exhaustive and hierarchical codebook searches, the MRT
//! benchmark, link metrics and the geometric blockage ratio.
//!
//! Codebook entries are scored without building their weight vectors. For a
//! head `(θ, r)` the vector `g_n = conj(h_n) e^{jφ_n}` (focused phase) is
//! formed once; every tail then costs one length-N dot product with a
//! precomputed unit-norm envelope or cubic phasor.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airy::airy_envelope;
use crate::codebooks::{assemble_codebook, sample_axis, Codebook, CodebookSpecs, Tail};
use crate::error::{Error, Result};
use crate::propagation::ChannelVector;
use crate::scenario::{Scenario, Weights};
use crate::waveforms::{cubic_phase, focused_phase, mrt_beam, BeamKind, BeamParams};

/// `|hᴴ w|²`.
pub fn received_power(h: &ChannelVector, w: &Weights) -> Result<f64> {
    if h.len() != w.len() {
        return Err(Error::Dimension {
            expected: h.len(),
            actual: w.len(),
        });
    }
    Ok(h.apply(w.coeffs()).norm_sqr())
}

/// `log2(1 + power / σ²)`.
pub fn spectral_efficiency(power: f64, noise_power: f64) -> Result<f64> {
    if !(noise_power > 0.0) {
        return Err(Error::Param(format!("noise power must be positive, got {noise_power}")));
    }
    Ok((power / noise_power).ln_1p() / std::f64::consts::LN_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageBest {
    pub stage: String,
    pub params: BeamParams,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingResult {
    /// Codebook index for exhaustive searches; position in the probe
    /// sequence for hierarchical ones.
    pub best_index: usize,
    pub best_params: BeamParams,
    pub received_power: f64,
    pub spectral_efficiency: f64,
    pub probes_used: usize,
    pub stage_trace: Vec<StageBest>,
}

fn validate_channel(h: &ChannelVector, scenario: &Scenario) -> Result<()> {
    if h.len() != scenario.num_elements() {
        return Err(Error::Dimension {
            expected: scenario.num_elements(),
            actual: h.len(),
        });
    }
    Ok(())
}

/// Tail data prepared once per codebook and scenario.
enum TailKernel {
    /// Phase-only beam with amplitude √(P/N); phasor multiplies `g`.
    PhaseOnly(Option<Vec<Complex64>>),
    /// Unit-norm real envelope, total amplitude √P.
    Envelope(Vec<f64>),
}

/// Scores codebook entries against channel vectors.
pub struct CodebookScorer<'a> {
    scenario: &'a Scenario,
    book: &'a Codebook,
    tails: Vec<TailKernel>,
}

impl<'a> CodebookScorer<'a> {
    pub fn new(scenario: &'a Scenario, book: &'a Codebook) -> Result<Self> {
        let g = scenario.geometry();
        let tails = book
            .tails()
            .iter()
            .map(|t| -> Result<TailKernel> {
                Ok(match *t {
                    Tail::None => TailKernel::PhaseOnly(None),
                    Tail::Curvature(c) => TailKernel::PhaseOnly(Some(
                        cubic_phase(g, c)
                            .into_iter()
                            .map(|p| Complex64::from_polar(1.0, p))
                            .collect(),
                    )),
                    Tail::Airy { s, a } => {
                        let mut e = airy_envelope(g, s, a)?;
                        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if !(norm > 0.0) || !norm.is_finite() {
                            return Err(Error::ZeroVector);
                        }
                        e.iter_mut().for_each(|v| *v /= norm);
                        TailKernel::Envelope(e)
                    }
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            scenario,
            book,
            tails,
        })
    }

    fn head_vector(&self, h: &ChannelVector, head: (f64, f64)) -> Vec<Complex64> {
        let g = self.scenario.geometry();
        let k = self.scenario.wavenumber();
        let (theta, r) = head;
        let phase = if self.book.kind() == BeamKind::Steered {
            let sin = theta.sin();
            (0..g.num_elements()).map(|n| -k * g.position(n) * sin).collect()
        } else {
            focused_phase(g, k, theta, r)
        };
        h.h.iter()
            .zip(phase)
            .map(|(h, p)| h.conj() * Complex64::from_polar(1.0, p))
            .collect()
    }

    fn tail_power(&self, gvec: &[Complex64], tail: &TailKernel) -> f64 {
        let p = self.scenario.power();
        match tail {
            TailKernel::PhaseOnly(None) => {
                p / gvec.len() as f64 * gvec.iter().sum::<Complex64>().norm_sqr()
            }
            TailKernel::PhaseOnly(Some(ph)) => {
                let s: Complex64 = gvec.iter().zip(ph).map(|(a, b)| a * b).sum();
                p / gvec.len() as f64 * s.norm_sqr()
            }
            TailKernel::Envelope(e) => {
                let s: Complex64 = gvec.iter().zip(e).map(|(a, b)| a * b).sum();
                p * s.norm_sqr()
            }
        }
    }

    /// Received power of entry `i`.
    pub fn power(&self, h: &ChannelVector, i: usize) -> f64 {
        let t = self.tails.len();
        let gvec = self.head_vector(h, self.book.heads()[i / t]);
        self.tail_power(&gvec, &self.tails[i % t])
    }

    /// Powers of all entries in codebook order.
    pub fn all_powers(&self, h: &ChannelVector) -> Vec<f64> {
        self.book
            .heads()
            .par_iter()
            .flat_map_iter(|&head| {
                let gvec = self.head_vector(h, head);
                self.tails
                    .iter()
                    .map(|t| self.tail_power(&gvec, t))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// `(index, power)` of the strongest entry; ties go to the lowest index.
    pub fn best(&self, h: &ChannelVector) -> Option<(usize, f64)> {
        let t = self.tails.len();
        let per_head: Vec<(usize, f64)> = self
            .book
            .heads()
            .par_iter()
            .enumerate()
            .map(|(hi, &head)| {
                let gvec = self.head_vector(h, head);
                let mut best = (hi * t, f64::NEG_INFINITY);
                for (ti, tail) in self.tails.iter().enumerate() {
                    let p = self.tail_power(&gvec, tail);
                    if p > best.1 {
                        best = (hi * t + ti, p);
                    }
                }
                best
            })
            .collect();
        argmax(per_head.into_iter())
    }
}

fn argmax(items: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in items {
        if best.is_none_or(|(_, b)| p > b) {
            best = Some((i, p));
        }
    }
    best
}

fn finish(
    scenario: &Scenario,
    best_index: usize,
    best_params: BeamParams,
    power: f64,
    probes: usize,
    trace: Vec<StageBest>,
) -> Result<TrainingResult> {
    Ok(TrainingResult {
        best_index,
        best_params,
        received_power: power,
        spectral_efficiency: spectral_efficiency(power, scenario.noise_power())?,
        probes_used: probes,
        stage_trace: trace,
    })
}

/// Argmax of received power over every codebook entry. Uses the cached
/// weights when the codebook is materialized.
pub fn exhaustive_search(h: &ChannelVector, book: &Codebook, scenario: &Scenario) -> Result<TrainingResult> {
    validate_channel(h, scenario)?;
    if book.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    let (idx, power) = match book.weights() {
        Some(ws) => {
            let powers = ws
                .iter()
                .map(|w| received_power(h, w))
                .collect::<Result<Vec<_>>>()?;
            argmax(powers.into_iter().enumerate()).expect("non-empty")
        }
        None => CodebookScorer::new(scenario, book)?
            .best(h)
            .expect("non-empty"),
    };
    let params = book.entry(idx).expect("index in range");
    finish(
        scenario,
        idx,
        params,
        power,
        book.len(),
        vec![StageBest {
            stage: "exhaustive".into(),
            params,
            power,
        }],
    )
}

/// Default initial decay for the hierarchical search: the midpoint of the
/// decay range.
pub fn default_a0(specs: &CodebookSpecs) -> Result<f64> {
    let a = sample_axis(
        specs
            .decay
            .as_ref()
            .ok_or_else(|| Error::Spec("missing decay axis".into()))?,
    )?;
    Ok(0.5 * (a[0] + a[a.len() - 1]))
}

fn stage_one(h: &ChannelVector, scenario: &Scenario, specs: &CodebookSpecs) -> Result<(Codebook, usize, f64)> {
    let focused = assemble_codebook(BeamKind::Focused, &specs.for_kind(BeamKind::Focused))?;
    let (i, p) = CodebookScorer::new(scenario, &focused)?
        .best(h)
        .ok_or(Error::EmptyCodebook)?;
    Ok((focused, i, p))
}

fn head_of(p: &BeamParams) -> (f64, f64) {
    match *p {
        BeamParams::Focused { theta, r } => (theta, r),
        _ => unreachable!("stage one yields focused beams"),
    }
}

/// Power of the nf-airy beam `(θ, r, s, a)`.
fn airy_power(h: &ChannelVector, scenario: &Scenario, theta: f64, r: f64, s: f64, a: f64) -> Result<f64> {
    let g = scenario.geometry();
    let e = airy_envelope(g, s, a)?;
    let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let phase = focused_phase(g, scenario.wavenumber(), theta, r);
    let sum: Complex64 = h
        .h
        .iter()
        .zip(e.iter().zip(phase))
        .map(|(h, (e, p))| h.conj() * Complex64::from_polar(*e / norm, p))
        .sum();
    Ok(scenario.power() * sum.norm_sqr())
}

/// Three-stage search: focused `(θ, r)` scan, scale scan at the initial
/// decay `a0` (with the focused beam kept as a fallback probe), then a decay
/// scan at the best scale. Returns the strongest probe overall.
///
/// Probes: `N_θ N_r + N_s + 1 + N_a`.
pub fn hierarchical_airy_search(
    h: &ChannelVector,
    scenario: &Scenario,
    specs: &CodebookSpecs,
    a0: Option<f64>,
) -> Result<TrainingResult> {
    validate_channel(h, scenario)?;
    let specs = specs.for_kind(BeamKind::NfAiry);
    let scales = sample_axis(specs.scale.as_ref().ok_or_else(|| Error::Spec("missing scale axis".into()))?)?;
    let decays = sample_axis(specs.decay.as_ref().ok_or_else(|| Error::Spec("missing decay axis".into()))?)?;
    let a0 = match a0 {
        Some(a) if a.is_finite() => a,
        Some(a) => return Err(Error::Param(format!("a0 must be finite, got {a}"))),
        None => default_a0(&specs)?,
    };

    let (focused, i1, p1) = stage_one(h, scenario, &specs)?;
    let f_params = focused.entry(i1).expect("in range");
    let (theta, r) = head_of(&f_params);
    let mut probes: Vec<(BeamParams, f64)> = Vec::with_capacity(scales.len() + decays.len() + 1);
    let base = focused.len();

    let mut s_best: Option<(f64, f64)> = None;
    for &s in &scales {
        let p = airy_power(h, scenario, theta, r, s, a0)?;
        probes.push((BeamParams::NfAiry { theta, r, s, a: a0 }, p));
        if s_best.is_none_or(|(_, b)| p > b) {
            s_best = Some((s, p));
        }
    }
    probes.push((f_params, p1));
    let (s_star, p2) = s_best.ok_or(Error::EmptyCodebook)?;

    let mut a_best: Option<(f64, f64)> = None;
    for &a in &decays {
        let p = airy_power(h, scenario, theta, r, s_star, a)?;
        probes.push((BeamParams::NfAiry { theta, r, s: s_star, a }, p));
        if a_best.is_none_or(|(_, b)| p > b) {
            a_best = Some((a, p));
        }
    }
    let (a_star, p3) = a_best.ok_or(Error::EmptyCodebook)?;

    let mut best = (i1, f_params, p1);
    for (j, &(params, p)) in probes.iter().enumerate() {
        if p > best.2 {
            best = (base + j, params, p);
        }
    }
    let trace = vec![
        StageBest { stage: "angle-distance".into(), params: f_params, power: p1 },
        StageBest {
            stage: "scale".into(),
            params: BeamParams::NfAiry { theta, r, s: s_star, a: a0 },
            power: p2,
        },
        StageBest {
            stage: "decay".into(),
            params: BeamParams::NfAiry { theta, r, s: s_star, a: a_star },
            power: p3,
        },
    ];
    finish(scenario, best.0, best.1, best.2, base + probes.len(), trace)
}

/// Two-stage search: focused `(θ, r)` scan, then a curvature scan at the
/// best pair. Probes: `N_θ N_r + N_c`.
pub fn hierarchical_curved_search(
    h: &ChannelVector,
    scenario: &Scenario,
    specs: &CodebookSpecs,
) -> Result<TrainingResult> {
    validate_channel(h, scenario)?;
    let specs = specs.for_kind(BeamKind::Curved);
    let curv = sample_axis(
        specs
            .curvature
            .as_ref()
            .ok_or_else(|| Error::Spec("missing curvature axis".into()))?,
    )?;
    let (focused, i1, p1) = stage_one(h, scenario, &specs)?;
    let f_params = focused.entry(i1).expect("in range");
    let (theta, r) = head_of(&f_params);
    let g = scenario.geometry();
    let phase = focused_phase(g, scenario.wavenumber(), theta, r);
    let amp = (scenario.power() / g.num_elements() as f64).sqrt();
    let mut best = (i1, f_params, p1);
    let mut c_best: Option<(BeamParams, f64)> = None;
    for (j, &c) in curv.iter().enumerate() {
        let cub = cubic_phase(g, c);
        let sum: Complex64 = h
            .h
            .iter()
            .zip(phase.iter().zip(&cub))
            .map(|(h, (a, b))| h.conj() * Complex64::from_polar(amp, a + b))
            .sum();
        let p = sum.norm_sqr();
        let params = BeamParams::Curved { theta, r, c };
        if c_best.is_none_or(|(_, b)| p > b) {
            c_best = Some((params, p));
        }
        if p > best.2 {
            best = (focused.len() + j, params, p);
        }
    }
    let (c_params, c_power) = c_best.ok_or(Error::EmptyCodebook)?;
    let trace = vec![
        StageBest { stage: "angle-distance".into(), params: f_params, power: p1 },
        StageBest { stage: "curvature".into(), params: c_params, power: c_power },
    ];
    finish(scenario, best.0, best.1, best.2, focused.len() + curv.len(), trace)
}

/// MRT benchmark power `P ‖h‖²`.
pub fn mrt_power(h: &ChannelVector, scenario: &Scenario) -> Result<f64> {
    validate_channel(h, scenario)?;
    received_power(h, &mrt_beam(h, scenario.power())?)
}

/// Fraction of element-to-user segments that cross an obstacle.
pub fn blockage_ratio(scenario: &Scenario, user: (f64, f64)) -> Result<f64> {
    let (x, y) = user;
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::Range { x, y, reason: "non-finite user".into() });
    }
    if scenario.is_blocked(x, y) {
        return Err(Error::UserInsideObstacle { x, y });
    }
    let g = scenario.geometry();
    let blocked = (0..g.num_elements())
        .filter(|&n| {
            let p0 = (0.0, g.position(n));
            scenario.obstacles().iter().any(|o| o.intersects_segment(p0, user))
        })
        .count();
    Ok(blocked as f64 / g.num_elements() as f64)
}

/// Training schemes compared in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Mrt,
    ExhaustiveSteered,
    ExhaustiveFocused,
    ExhaustiveCurved,
    ExhaustiveAiry,
    HierarchicalCurved,
    HierarchicalAiry,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Mrt,
        Scheme::ExhaustiveSteered,
        Scheme::ExhaustiveFocused,
        Scheme::ExhaustiveCurved,
        Scheme::ExhaustiveAiry,
        Scheme::HierarchicalCurved,
        Scheme::HierarchicalAiry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Mrt => "mrt",
            Scheme::ExhaustiveSteered => "exhaustive-steered",
            Scheme::ExhaustiveFocused => "exhaustive-focused",
            Scheme::ExhaustiveCurved => "exhaustive-curved",
            Scheme::ExhaustiveAiry => "exhaustive-airy",
            Scheme::HierarchicalCurved => "hierarchical-curved",
            Scheme::HierarchicalAiry => "hierarchical-airy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Param(format!("unknown scheme '{s}'")))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Runs `scheme` for channel `h`. MRT reports its power with zero probes
/// and placeholder broadside parameters.
pub fn run_scheme(
    scheme: Scheme,
    h: &ChannelVector,
    scenario: &Scenario,
    specs: &CodebookSpecs,
) -> Result<TrainingResult> {
    let exhaustive = |kind: BeamKind| -> Result<TrainingResult> {
        let book = assemble_codebook(kind, &specs.for_kind(kind))?;
        exhaustive_search(h, &book, scenario)
    };
    match scheme {
        Scheme::Mrt => {
            let p = mrt_power(h, scenario)?;
            let params = BeamParams::Steered { theta: 0.0 };
            finish(scenario, 0, params, p, 0, Vec::new())
        }
        Scheme::ExhaustiveSteered => exhaustive(BeamKind::Steered),
        Scheme::ExhaustiveFocused => exhaustive(BeamKind::Focused),
        Scheme::ExhaustiveCurved => exhaustive(BeamKind::Curved),
        Scheme::ExhaustiveAiry => exhaustive(BeamKind::NfAiry),
        Scheme::HierarchicalCurved => hierarchical_curved_search(h, scenario, specs),
        Scheme::HierarchicalAiry => hierarchical_airy_search(h, scenario, specs, None),
    }
}

/// One CSV row of training output.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub scheme: Scheme,
    pub scenario_id: String,
    pub user: (f64, f64),
    pub blockage_ratio: f64,
    pub power: f64,
    pub spectral_efficiency: f64,
    pub probes: usize,
}

impl TrainingRecord {
    pub const CSV_HEADER: &'static str =
        "scheme,scenario_id,user_x_m,user_y_m,blockage_ratio,received_power,se_bps_per_hz,probes";

    pub fn new(scheme: Scheme, scenario_id: &str, user: (f64, f64), blockage: f64, r: &TrainingResult) -> Self {
        Self {
            scheme,
            scenario_id: scenario_id.to_string(),
            user,
            blockage_ratio: blockage,
            power: r.received_power,
            spectral_efficiency: r.spectral_efficiency,
            probes: r.probes_used,
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.scheme,
            self.scenario_id,
            self.user.0,
            self.user.1,
            self.blockage_ratio,
            self.power,
            self.spectral_efficiency,
            self.probes
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_efficiency_values() {
        assert_eq!(spectral_efficiency(0.0, 2.0).unwrap(), 0.0);
        assert!((spectral_efficiency(2.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((spectral_efficiency(6.0, 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(spectral_efficiency(1.0, 0.0).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(Scheme::parse(s.as_str()).unwrap(), s);
        }
        assert!(Scheme::parse("nope").is_err());
    }
}
