//! Parameter sampling and codebook assembly.
//!
//! A codebook is the Cartesian product of its axes in angle-major order:
//! angle, then distance, then scale, then decay (or curvature). It is stored
//! as a list of `(θ, r)` heads crossed with a list of tails, so entry `i` is
//! head `i / tails.len()` with tail `i % tails.len()`. Large codebooks never
//! need their weights in memory; see [`Codebook::materialize`] for small ones.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Scenario, Weights};
use crate::waveforms::{make_beam, BeamKind, BeamParams};

/// How one parameter axis is sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "kebab-case")]
pub enum SamplingSpec {
    /// `sin θ_n = (2n - N - 1) / N`, n = 1..N.
    Angle { count: usize },
    /// `count` angles with sines uniformly spaced over
    /// `[sin theta_min, sin theta_max]`, endpoints included.
    AngleWindow { count: usize, theta_min: f64, theta_max: f64 },
    /// `r = Z cos²θ / m`, m = 1..M (descending), dropping values below `r_min`.
    Distance { z: f64, m: usize, r_min: f64 },
    /// `count` distances with `1/r` uniform on `[1/r_max, 1/r_min]`,
    /// independent of θ, descending.
    DistanceRange { r_min: f64, r_max: f64, count: usize },
    /// Uniform on `[min, max]`.
    Curvature { min: f64, max: f64, count: usize },
    /// Uniform on `[min, max]`.
    Decay { min: f64, max: f64, count: usize },
    /// `1/s` uniform on `[1/s_max, 1/s_min]`; `symmetric` appends the
    /// mirrored negative values. Output is ascending.
    Scale { s_min: f64, s_max: f64, count: usize, symmetric: bool },
    /// `s` uniform on `[s_min, s_max]`, otherwise as [`SamplingSpec::Scale`].
    ScaleLinear { s_min: f64, s_max: f64, count: usize, symmetric: bool },
}

fn linspace(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![min];
    }
    let step = (max - min) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { max } else { min + step * i as f64 })
        .collect()
}

fn spec_err(msg: impl Into<String>) -> Error {
    Error::Spec(msg.into())
}

impl SamplingSpec {
    pub fn axis_name(&self) -> &'static str {
        match self {
            SamplingSpec::Angle { .. } | SamplingSpec::AngleWindow { .. } => "angle",
            SamplingSpec::Distance { .. } | SamplingSpec::DistanceRange { .. } => "distance",
            SamplingSpec::Curvature { .. } => "curvature",
            SamplingSpec::Decay { .. } => "decay",
            SamplingSpec::Scale { .. } | SamplingSpec::ScaleLinear { .. } => "scale",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let (count, ok) = match *self {
            SamplingSpec::Angle { count } => (count, true),
            SamplingSpec::AngleWindow { count, theta_min, theta_max } => (
                count,
                finite(&[theta_min, theta_max])
                    && theta_min <= theta_max
                    && theta_min > -std::f64::consts::FRAC_PI_2
                    && theta_max < std::f64::consts::FRAC_PI_2,
            ),
            SamplingSpec::Distance { z, m, r_min } => (m, finite(&[z, r_min]) && z > 0.0 && r_min >= 0.0),
            SamplingSpec::DistanceRange { r_min, r_max, count } => {
                (count, finite(&[r_min, r_max]) && 0.0 < r_min && r_min <= r_max)
            }
            SamplingSpec::Curvature { min, max, count } | SamplingSpec::Decay { min, max, count } => {
                (count, finite(&[min, max]) && min <= max)
            }
            SamplingSpec::Scale { s_min, s_max, count, .. }
            | SamplingSpec::ScaleLinear { s_min, s_max, count, .. } => {
                (count, finite(&[s_min, s_max]) && 0.0 < s_min && s_min < s_max)
            }
        };
        if count == 0 {
            return Err(spec_err(format!("{} axis needs count >= 1", self.axis_name())));
        }
        if !ok {
            return Err(spec_err(format!("invalid range in {self:?}")));
        }
        Ok(())
    }
}

/// Sample values of one axis. Distance axes are evaluated at θ = 0; use
/// [`sample_distances`] for other angles.
pub fn sample_axis(spec: &SamplingSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(match *spec {
        SamplingSpec::Angle { count } => {
            let n = count as f64;
            (1..=count)
                .map(|i| ((2.0 * i as f64 - n - 1.0) / n).asin())
                .collect()
        }
        SamplingSpec::AngleWindow { count, theta_min, theta_max } => {
            linspace(theta_min.sin(), theta_max.sin(), count)
                .into_iter()
                .map(f64::asin)
                .collect()
        }
        SamplingSpec::Distance { .. } | SamplingSpec::DistanceRange { .. } => {
            return sample_distances(spec, 0.0)
        }
        SamplingSpec::Curvature { min, max, count } | SamplingSpec::Decay { min, max, count } => {
            linspace(min, max, count)
        }
        SamplingSpec::Scale { s_min, s_max, count, symmetric } => {
            let mut pos: Vec<f64> = linspace(1.0 / s_max, 1.0 / s_min, count)
                .into_iter()
                .map(|u| 1.0 / u)
                .collect();
            pos.reverse();
            mirror(pos, symmetric)
        }
        SamplingSpec::ScaleLinear { s_min, s_max, count, symmetric } => {
            mirror(linspace(s_min, s_max, count), symmetric)
        }
    })
}

fn mirror(pos: Vec<f64>, symmetric: bool) -> Vec<f64> {
    if !symmetric {
        return pos;
    }
    let mut out: Vec<f64> = pos.iter().rev().map(|s| -s).collect();
    out.extend(pos);
    out
}

/// Distance samples for angle `theta`.
pub fn sample_distances(spec: &SamplingSpec, theta: f64) -> Result<Vec<f64>> {
    spec.validate()?;
    match *spec {
        SamplingSpec::Distance { z, m, r_min } => {
            let c2 = theta.cos().powi(2);
            Ok((1..=m)
                .map(|i| z * c2 / i as f64)
                .filter(|&r| r >= r_min)
                .collect())
        }
        SamplingSpec::DistanceRange { r_min, r_max, count } => Ok(linspace(1.0 / r_max, 1.0 / r_min, count)
            .into_iter()
            .map(|u| 1.0 / u)
            .collect()),
        _ => Err(spec_err(format!("{} is not a distance axis", spec.axis_name()))),
    }
}

/// Axis specifications for a codebook. Only the axes its kind uses may be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CodebookSpecs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<SamplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<SamplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<SamplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<SamplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<SamplingSpec>,
}

impl CodebookSpecs {
    /// Angle window [-π/4, π/4] with 90 sine-uniform points, 20 distances
    /// with reciprocal-uniform spacing on [1, 6] m, 20 signed scales from
    /// ±[0.05, 0.3] m, 10 decays on [-2, 0] and 21 curvatures on [-5, 5].
    pub fn reference() -> Self {
        let q = std::f64::consts::FRAC_PI_4;
        Self {
            angle: Some(SamplingSpec::AngleWindow { count: 90, theta_min: -q, theta_max: q }),
            distance: Some(SamplingSpec::DistanceRange { r_min: 1.0, r_max: 6.0, count: 20 }),
            scale: Some(SamplingSpec::Scale { s_min: 0.05, s_max: 0.3, count: 10, symmetric: true }),
            decay: Some(SamplingSpec::Decay { min: -2.0, max: 0.0, count: 10 }),
            curvature: Some(SamplingSpec::Curvature { min: -5.0, max: 5.0, count: 21 }),
        }
    }

    /// The subset of axes used by `kind`.
    pub fn for_kind(&self, kind: BeamKind) -> Self {
        let mut out = Self { angle: self.angle.clone(), ..Self::default() };
        if kind != BeamKind::Steered {
            out.distance = self.distance.clone();
        }
        match kind {
            BeamKind::Curved => out.curvature = self.curvature.clone(),
            BeamKind::NfAiry => {
                out.scale = self.scale.clone();
                out.decay = self.decay.clone();
            }
            _ => {}
        }
        out
    }

    fn require(&self, kind: BeamKind) -> Result<()> {
        let need = |name: &str, s: &Option<SamplingSpec>, axis: &str| -> Result<()> {
            match s {
                None => Err(spec_err(format!("{kind} codebook needs a {name} axis"))),
                Some(s) if s.axis_name() != axis => Err(spec_err(format!(
                    "{name} slot holds a {} axis",
                    s.axis_name()
                ))),
                Some(_) => Ok(()),
            }
        };
        let forbid = |name: &str, s: &Option<SamplingSpec>| -> Result<()> {
            if s.is_some() {
                Err(spec_err(format!("{kind} codebook does not use a {name} axis")))
            } else {
                Ok(())
            }
        };
        need("angle", &self.angle, "angle")?;
        match kind {
            BeamKind::Steered => {
                forbid("distance", &self.distance)?;
                forbid("scale", &self.scale)?;
                forbid("decay", &self.decay)?;
                forbid("curvature", &self.curvature)
            }
            BeamKind::Focused => {
                need("distance", &self.distance, "distance")?;
                forbid("scale", &self.scale)?;
                forbid("decay", &self.decay)?;
                forbid("curvature", &self.curvature)
            }
            BeamKind::Curved => {
                need("distance", &self.distance, "distance")?;
                need("curvature", &self.curvature, "curvature")?;
                forbid("scale", &self.scale)?;
                forbid("decay", &self.decay)
            }
            BeamKind::NfAiry => {
                need("distance", &self.distance, "distance")?;
                need("scale", &self.scale, "scale")?;
                need("decay", &self.decay, "decay")?;
                forbid("curvature", &self.curvature)
            }
            BeamKind::ClassicAiry => Err(spec_err("classic-airy beams have no codebook")),
        }
    }
}

/// Per-entry parameters beyond `(θ, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    None,
    Curvature(f64),
    Airy { s: f64, a: f64 },
}

#[derive(Debug, Clone)]
pub struct Codebook {
    kind: BeamKind,
    specs: CodebookSpecs,
    heads: Vec<(f64, f64)>,
    tails: Vec<Tail>,
    weights: Option<Vec<Weights>>,
}

/// Builds the Cartesian-product codebook of `kind` from `specs`.
pub fn assemble_codebook(kind: BeamKind, specs: &CodebookSpecs) -> Result<Codebook> {
    specs.require(kind)?;
    let thetas = sample_axis(specs.angle.as_ref().expect("checked"))?;
    let mut heads = Vec::new();
    for &t in &thetas {
        match &specs.distance {
            Some(d) => {
                let rs = sample_distances(d, t)?;
                if rs.is_empty() {
                    return Err(spec_err(format!("no distances survive at theta = {t}")));
                }
                heads.extend(rs.into_iter().map(|r| (t, r)));
            }
            None => heads.push((t, f64::INFINITY)),
        }
    }
    let tails = match kind {
        BeamKind::Curved => sample_axis(specs.curvature.as_ref().expect("checked"))?
            .into_iter()
            .map(Tail::Curvature)
            .collect(),
        BeamKind::NfAiry => {
            let ss = sample_axis(specs.scale.as_ref().expect("checked"))?;
            let aa = sample_axis(specs.decay.as_ref().expect("checked"))?;
            ss.iter()
                .flat_map(|&s| aa.iter().map(move |&a| Tail::Airy { s, a }))
                .collect()
        }
        _ => vec![Tail::None],
    };
    Ok(Codebook {
        kind,
        specs: specs.clone(),
        heads,
        tails,
        weights: None,
    })
}

impl Codebook {
    pub fn kind(&self) -> BeamKind {
        self.kind
    }

    pub fn specs(&self) -> &CodebookSpecs {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.heads.len() * self.tails.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(θ, r)` pairs in order; `r` is infinite for steered codebooks.
    pub fn heads(&self) -> &[(f64, f64)] {
        &self.heads
    }

    pub fn tails(&self) -> &[Tail] {
        &self.tails
    }

    pub fn compose(&self, head: (f64, f64), tail: Tail) -> BeamParams {
        let (theta, r) = head;
        match (self.kind, tail) {
            (BeamKind::Steered, _) => BeamParams::Steered { theta },
            (BeamKind::Curved, Tail::Curvature(c)) => BeamParams::Curved { theta, r, c },
            (BeamKind::NfAiry, Tail::Airy { s, a }) => BeamParams::NfAiry { theta, r, s, a },
            _ => BeamParams::Focused { theta, r },
        }
    }

    pub fn entry(&self, i: usize) -> Option<BeamParams> {
        (i < self.len()).then(|| {
            let t = self.tails.len();
            self.compose(self.heads[i / t], self.tails[i % t])
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = BeamParams> + '_ {
        self.heads
            .iter()
            .flat_map(move |&h| self.tails.iter().map(move |&t| self.compose(h, t)))
    }

    /// Computes and caches every codeword. Memory is `len · N` complex values.
    pub fn materialize(&mut self, scenario: &Scenario) -> Result<()> {
        let all: Vec<BeamParams> = self.entries().collect();
        let w = all
            .par_iter()
            .map(|p| make_beam(scenario, p))
            .collect::<Result<Vec<_>>>()?;
        self.weights = Some(w);
        Ok(())
    }

    pub fn weights(&self) -> Option<&[Weights]> {
        self.weights.as_deref()
    }

    /// Plain-text serialization:
    ///
    /// ```text
    /// nfbeam-codebook 1
    /// kind <kind>
    /// specs <json>
    /// entries <count> <values per entry>
    /// <one line per entry, space-separated parameter values>
    /// weights <count> <N>            (only when materialized)
    /// <one line per entry: re0 im0 re1 im1 ...>
    /// ```
    ///
    /// Numbers use the shortest representation that round-trips exactly.
    pub fn write_text(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "nfbeam-codebook 1")?;
        writeln!(out, "kind {}", self.kind)?;
        writeln!(out, "specs {}", serde_json::to_string(&self.specs)?)?;
        let width = self.entry(0).map_or(0, |p| p.values().len());
        writeln!(out, "entries {} {}", self.len(), width)?;
        let mut line = String::new();
        for p in self.entries() {
            line.clear();
            for (i, v) in p.values().iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                write!(line, "{v}").expect("string write");
            }
            writeln!(out, "{line}")?;
        }
        if let Some(ws) = &self.weights {
            writeln!(out, "weights {} {}", ws.len(), ws.first().map_or(0, |w| w.len()))?;
            for w in ws {
                line.clear();
                for (i, c) in w.coeffs().iter().enumerate() {
                    if i > 0 {
                        line.push(' ');
                    }
                    write!(line, "{} {}", c.re, c.im).expect("string write");
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    /// Reads [`Codebook::write_text`] output. The listed entries must match
    /// the ones regenerated from the stored specs.
    pub fn read_text(input: impl BufRead, power: f64) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Parse(format!("missing {what}")))
        };
        let header = next("header")?;
        if header.trim() != "nfbeam-codebook 1" {
            return Err(Error::Parse(format!("unsupported header '{header}'")));
        }
        let field = |line: String, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("expected '{key}' line, got '{line}'")))
        };
        let kind = BeamKind::parse(field(next("kind")?, "kind")?.trim())?;
        let specs: CodebookSpecs = serde_json::from_str(&field(next("specs")?, "specs")?)?;
        let mut book = assemble_codebook(kind, &specs)?;
        let counts = field(next("entries")?, "entries")?;
        let count: usize = counts
            .split_whitespace()
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad entry count '{counts}'")))?;
        if count != book.len() {
            return Err(Error::Parse(format!(
                "file lists {count} entries, specs produce {}",
                book.len()
            )));
        }
        let parse_floats = |l: &str| -> Result<Vec<f64>> {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("'{t}': {e}"))))
                .collect()
        };
        for i in 0..count {
            let vals = parse_floats(&next("entry")?)?;
            let listed = BeamParams::from_values(kind, &vals)?;
            if Some(listed) != book.entry(i) {
                return Err(Error::Parse(format!("entry {i} does not match the specs")));
            }
        }
        if let Some(line) = lines.next().transpose()? {
            let dims = field(line, "weights")?;
            let dims: Vec<usize> = dims
                .split_whitespace()
                .map(|t| t.parse().map_err(|e| Error::Parse(format!("'{t}': {e}"))))
                .collect::<Result<_>>()?;
            if dims.len() != 2 || dims[0] != count {
                return Err(Error::Parse("bad weights header".into()));
            }
            let mut ws = Vec::with_capacity(count);
            for _ in 0..count {
                let line = lines
                    .next()
                    .transpose()?
                    .ok_or_else(|| Error::Parse("missing weights row".into()))?;
                let v = parse_floats(&line)?;
                if v.len() != 2 * dims[1] {
                    return Err(Error::Parse("weights row has the wrong width".into()));
                }
                let c = v.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
                ws.push(Weights::new(c, power)?);
            }
            book.weights = Some(ws);
        }
        Ok(book)
    }
}

/// `|aᴴ b| / (‖a‖ ‖b‖)`.
pub fn codeword_correlation(a: &Weights, b: &Weights) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let na = a.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::ZeroVector);
    }
    let ip: Complex64 = a
        .coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok((ip.norm() / (na * nb)).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_sines() {
        let v = sample_axis(&SamplingSpec::Angle { count: 4 }).unwrap();
        let s: Vec<f64> = v.iter().map(|t| t.sin()).collect();
        for (a, b) in s.iter().zip([-0.75, -0.25, 0.25, 0.75]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn distance_rule() {
        let spec = SamplingSpec::Distance { z: 6.0, m: 3, r_min: 0.0 };
        assert_eq!(sample_axis(&spec).unwrap(), vec![6.0, 3.0, 2.0]);
        let spec = SamplingSpec::Distance { z: 6.0, m: 10, r_min: 1.0 };
        assert_eq!(sample_distances(&spec, 0.0).unwrap().len(), 6);
        let r = sample_distances(&spec, 0.5).unwrap();
        assert!(r.iter().all(|&r| r >= 1.0));
    }

    #[test]
    fn distance_range_endpoints() {
        let r = sample_axis(&SamplingSpec::DistanceRange { r_min: 1.0, r_max: 6.0, count: 20 }).unwrap();
        assert_eq!(r.len(), 20);
        assert!((r[0] - 6.0).abs() < 1e-12 && (r[19] - 1.0).abs() < 1e-12);
        assert!(r.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn scale_and_decay() {
        let s = sample_axis(&SamplingSpec::Scale { s_min: 0.05, s_max: 0.3, count: 10, symmetric: true }).unwrap();
        assert_eq!(s.len(), 20);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        let inv: Vec<f64> = s[10..].iter().map(|s| 1.0 / s).collect();
        assert!((inv[0] - 20.0).abs() < 1e-12 && (inv[9] - 10.0 / 3.0).abs() < 1e-12);
        let gaps: Vec<f64> = inv.windows(2).map(|w| w[0] - w[1]).collect();
        assert!(gaps.iter().all(|g| (g - gaps[0]).abs() < 1e-12));
        for i in 0..10 {
            assert_eq!(s[i], -s[19 - i]);
        }
        let a = sample_axis(&SamplingSpec::Decay { min: -2.0, max: 0.0, count: 10 }).unwrap();
        assert_eq!(a[0], -2.0);
        assert_eq!(a[9], 0.0);
        assert!((a[1] + 16.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn reference_sizes() {
        let specs = CodebookSpecs::reference();
        let size = |k| assemble_codebook(k, &specs.for_kind(k)).unwrap().len();
        assert_eq!(size(BeamKind::Steered), 90);
        assert_eq!(size(BeamKind::Focused), 1800);
        assert_eq!(size(BeamKind::Curved), 37800);
        assert_eq!(size(BeamKind::NfAiry), 360000);
    }

    #[test]
    fn lexicographic_order() {
        let specs = CodebookSpecs::reference().for_kind(BeamKind::NfAiry);
        let b = assemble_codebook(BeamKind::NfAiry, &specs).unwrap();
        let e: Vec<BeamParams> = b.entries().take(12).collect();
        match (e[0], e[1], e[10]) {
            (
                BeamParams::NfAiry { theta: t0, r: r0, s: s0, a: a0 },
                BeamParams::NfAiry { theta: t1, r: r1, s: s1, a: a1 },
                BeamParams::NfAiry { s: s10, .. },
            ) => {
                assert_eq!((t0, r0, s0), (t1, r1, s1));
                assert!(a1 > a0);
                assert!(s10 > s0);
            }
            _ => panic!("wrong kind"),
        }
        assert_eq!(b.entry(359_999), b.entries().last());
        assert_eq!(b.entry(360_000), None);
    }

    #[test]
    fn missing_or_extra_axes() {
        let full = CodebookSpecs::reference();
        assert!(matches!(assemble_codebook(BeamKind::Focused, &full), Err(Error::Spec(_))));
        let mut s = full.for_kind(BeamKind::NfAiry);
        s.decay = None;
        assert!(matches!(assemble_codebook(BeamKind::NfAiry, &s), Err(Error::Spec(_))));
        assert!(sample_axis(&SamplingSpec::Decay { min: 0.0, max: -1.0, count: 3 }).is_err());
        assert!(sample_axis(&SamplingSpec::Scale { s_min: 0.0, s_max: 1.0, count: 3, symmetric: false }).is_err());
    }
}
