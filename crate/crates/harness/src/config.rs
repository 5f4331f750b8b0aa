//! Experiment configuration files.
//!
//! ```json
//! {
//!   "scenario": "region.json",
//!   "kind": "blockage-sweep",
//!   "rng_seed": 7,
//!   "num_users": 200,
//!   "user_region": {"x_min": 1.0, "x_max": 5.0, "y_min": -0.4, "y_max": 0.4},
//!   "sweep": {"bin_edges": [0.0, 0.25, 0.5, 0.75, 1.0]}
//! }
//! ```
//!
//! `scenario` is either a path (relative to the config file) or an inline
//! scenario object. `sweep` holds the axes of the chosen `kind`; omitted
//! fields take their defaults and unknown fields are rejected.

use std::path::{Path, PathBuf};

use nfbeam::codebooks::{CodebookSpecs, SamplingSpec};
use nfbeam::scenario::ScenarioConfig;
use nfbeam::training::Scheme;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{io_err, HarnessError, Result};

pub const DEFAULT_NUM_USERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BeamPattern,
    PowerMap,
    SeVsPower,
    BlockageSweep,
    FrequencySweep,
    CodebookSizeSweep,
    ObstacleSizeSweep,
    HybridGap,
    CorrelationCurves,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BeamPattern => "beam-pattern",
            Self::PowerMap => "power-map",
            Self::SeVsPower => "se-vs-power",
            Self::BlockageSweep => "blockage-sweep",
            Self::FrequencySweep => "frequency-sweep",
            Self::CodebookSizeSweep => "codebook-size-sweep",
            Self::ObstacleSizeSweep => "obstacle-size-sweep",
            Self::HybridGap => "hybrid-gap",
            Self::CorrelationCurves => "correlation-curves",
        }
    }

    /// Kinds that draw Monte-Carlo users.
    pub fn uses_users(self) -> bool {
        matches!(
            self,
            Self::SeVsPower
                | Self::BlockageSweep
                | Self::FrequencySweep
                | Self::CodebookSizeSweep
                | Self::ObstacleSizeSweep
        )
    }
}

/// Rectangle of candidate user positions in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for UserRegion {
    fn default() -> Self {
        Self { x_min: 1.0, x_max: 5.0, y_min: -0.4, y_max: 0.4 }
    }
}

/// Heatmap value mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum HeatmapScale {
    Linear,
    /// `10 log10(v / max)` clamped below at `floor` (negative dB).
    Db { floor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamPatternSweep {
    pub user: [f64; 2],
    /// Keep every `plane_stride`-th x plane in the images.
    pub plane_stride: usize,
    /// Keep every `y_stride`-th y sample in the images.
    pub y_stride: usize,
    pub scale: HeatmapScale,
}

impl Default for BeamPatternSweep {
    fn default() -> Self {
        Self { user: [1.1, 0.17], plane_stride: 4, y_stride: 4, scale: HeatmapScale::Db { floor: -60.0 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerMapSweep {
    pub nx: usize,
    pub ny: usize,
    pub reference: Scheme,
    pub candidate: Scheme,
}

impl Default for PowerMapSweep {
    fn default() -> Self {
        Self { nx: 41, ny: 17, reference: Scheme::ExhaustiveFocused, candidate: Scheme::HierarchicalAiry }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeVsPowerSweep {
    /// Transmit powers `P` (same units as the scenario power).
    pub powers: Vec<f64>,
}

impl Default for SeVsPowerSweep {
    fn default() -> Self {
        Self { powers: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockageSweep {
    /// Ascending bin edges over `[0, 1]`; the last bin is closed.
    pub bin_edges: Vec<f64>,
}

impl Default for BlockageSweep {
    fn default() -> Self {
        Self { bin_edges: (0..=10).map(|i| i as f64 / 10.0).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencySweep {
    /// Carrier frequencies. The aperture stays fixed, so `N` follows `f`.
    pub frequencies_hz: Vec<f64>,
}

impl Default for FrequencySweep {
    fn default() -> Self {
        Self { frequencies_hz: vec![30e9, 60e9, 100e9, 140e9] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookSizeSweep {
    pub angle_counts: Vec<usize>,
    pub distance_counts: Vec<usize>,
}

impl Default for CodebookSizeSweep {
    fn default() -> Self {
        Self {
            angle_counts: (0..7).map(|i| 10 + 20 * i).collect(),
            distance_counts: (1..=7).map(|i| 5 * i).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleSizeSweep {
    /// Obstacle extent along y, centered on `y_center`.
    pub lengths: Vec<f64>,
    pub x_left: f64,
    pub x_right: f64,
    pub y_center: f64,
}

impl Default for ObstacleSizeSweep {
    fn default() -> Self {
        Self { lengths: vec![0.1, 0.2, 0.3, 0.4, 0.5], x_left: 1.0, x_right: 1.2, y_center: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridGapSweep {
    pub user: [f64; 2],
    pub n_rf: Vec<usize>,
    pub bits: Vec<u32>,
    pub oversampling: usize,
    /// Configuration whose per-element responses are written out.
    pub response_n_rf: usize,
    pub response_bits: u32,
}

impl Default for HybridGapSweep {
    fn default() -> Self {
        Self {
            user: [1.1, 0.17],
            n_rf: vec![5, 10, 15, 20, 25, 30, 35, 40],
            bits: vec![1, 2, 3, 4, 5],
            oversampling: 4,
            response_n_rf: 25,
            response_bits: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationSweep {
    pub theta: f64,
    pub r: f64,
    /// Scale held fixed while the decay varies.
    pub s: f64,
    /// Decay held fixed while the scale varies.
    pub a: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub count: usize,
}

impl Default for CorrelationSweep {
    fn default() -> Self {
        Self {
            theta: 0.0,
            r: 2.0,
            s: 0.1,
            a: -1.0,
            s_min: 0.05,
            s_max: 0.3,
            a_min: -2.0,
            a_max: 0.0,
            count: 10,
        }
    }
}

/// Kind plus its sweep axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "sweep", rename_all = "kebab-case")]
pub enum Experiment {
    BeamPattern(BeamPatternSweep),
    PowerMap(PowerMapSweep),
    SeVsPower(SeVsPowerSweep),
    BlockageSweep(BlockageSweep),
    FrequencySweep(FrequencySweep),
    CodebookSizeSweep(CodebookSizeSweep),
    ObstacleSizeSweep(ObstacleSizeSweep),
    HybridGap(HybridGapSweep),
    CorrelationCurves(CorrelationSweep),
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::BeamPattern(_) => ExperimentKind::BeamPattern,
            Self::PowerMap(_) => ExperimentKind::PowerMap,
            Self::SeVsPower(_) => ExperimentKind::SeVsPower,
            Self::BlockageSweep(_) => ExperimentKind::BlockageSweep,
            Self::FrequencySweep(_) => ExperimentKind::FrequencySweep,
            Self::CodebookSizeSweep(_) => ExperimentKind::CodebookSizeSweep,
            Self::ObstacleSizeSweep(_) => ExperimentKind::ObstacleSizeSweep,
            Self::HybridGap(_) => ExperimentKind::HybridGap,
            Self::CorrelationCurves(_) => ExperimentKind::CorrelationCurves,
        }
    }

    fn parse(kind: ExperimentKind, sweep: Option<Value>) -> Result<Self> {
        fn axes<T: serde::de::DeserializeOwned>(kind: ExperimentKind, v: Option<Value>) -> Result<T> {
            let v = v.unwrap_or_else(|| Value::Object(Default::default()));
            serde_json::from_value(v).map_err(|e| HarnessError::Config(format!("sweep for {}: {e}", kind.as_str())))
        }
        Ok(match kind {
            ExperimentKind::BeamPattern => Self::BeamPattern(axes(kind, sweep)?),
            ExperimentKind::PowerMap => Self::PowerMap(axes(kind, sweep)?),
            ExperimentKind::SeVsPower => Self::SeVsPower(axes(kind, sweep)?),
            ExperimentKind::BlockageSweep => Self::BlockageSweep(axes(kind, sweep)?),
            ExperimentKind::FrequencySweep => Self::FrequencySweep(axes(kind, sweep)?),
            ExperimentKind::CodebookSizeSweep => Self::CodebookSizeSweep(axes(kind, sweep)?),
            ExperimentKind::ObstacleSizeSweep => Self::ObstacleSizeSweep(axes(kind, sweep)?),
            ExperimentKind::HybridGap => Self::HybridGap(axes(kind, sweep)?),
            ExperimentKind::CorrelationCurves => Self::CorrelationCurves(axes(kind, sweep)?),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScenarioSource {
    Path(PathBuf),
    Inline(ScenarioConfig),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: ScenarioSource,
    kind: ExperimentKind,
    rng_seed: u64,
    #[serde(default)]
    num_users: Option<usize>,
    #[serde(default)]
    user_region: Option<UserRegion>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    codebooks: Option<CodebookSpecs>,
    #[serde(default)]
    schemes: Option<Vec<Scheme>>,
    #[serde(default)]
    sweep: Option<Value>,
    #[serde(default)]
    channel_cache_dir: Option<PathBuf>,
}

/// A resolved experiment. Serializing it gives the canonical form hashed
/// into the run manifest; paths are not part of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub rng_seed: u64,
    pub num_users: usize,
    pub user_region: UserRegion,
    pub codebooks: CodebookSpecs,
    pub schemes: Vec<Scheme>,
    pub quick: bool,
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
    #[serde(skip)]
    pub channel_cache_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses a config; relative paths resolve against `base_dir`.
    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let scenario = match raw.scenario {
            ScenarioSource::Inline(s) => s,
            ScenarioSource::Path(p) => {
                let p = base_dir.join(p);
                ScenarioConfig::load(&p).map_err(|e| HarnessError::Config(format!("scenario {}: {e}", p.display())))?
            }
        };
        let experiment = Experiment::parse(raw.kind, raw.sweep)?;
        let default_schemes = match &experiment {
            Experiment::PowerMap(m) => vec![m.reference, m.candidate],
            _ => Scheme::ALL.to_vec(),
        };
        let cfg = Self {
            scenario,
            rng_seed: raw.rng_seed,
            num_users: raw.num_users.unwrap_or(DEFAULT_NUM_USERS),
            user_region: raw.user_region.unwrap_or_default(),
            codebooks: raw.codebooks.unwrap_or_else(CodebookSpecs::reference),
            schemes: raw.schemes.unwrap_or(default_schemes),
            quick: false,
            experiment,
            output_dir: raw.output_dir.map(|p| base_dir.join(p)),
            channel_cache_dir: raw.channel_cache_dir.map(|p| base_dir.join(p)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind()
    }

    /// Shrinks every codebook axis by 4 (rounding up).
    pub fn make_quick(&mut self) {
        if !self.quick {
            self.quick = true;
            self.codebooks = shrink_specs(&self.codebooks, 4);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let r = &self.user_region;
        if !(r.x_min < r.x_max && r.y_min < r.y_max) || ![r.x_min, r.x_max, r.y_min, r.y_max].iter().all(|v| v.is_finite()) {
            return bad(format!("user region {r:?} is empty"));
        }
        if r.x_min <= 0.0 {
            return bad("user region must lie in front of the array (x_min > 0)".into());
        }
        if self.kind().uses_users() && self.num_users == 0 {
            return bad("num_users must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return bad("no schemes selected".into());
        }
        for axis in [&self.codebooks.angle, &self.codebooks.distance, &self.codebooks.scale, &self.codebooks.decay, &self.codebooks.curvature]
            .into_iter()
            .flatten()
        {
            axis.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        let positive = |name: &str, v: &[f64]| {
            if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return bad(format!("{name} must be a non-empty list of positive values"));
            }
            Ok(())
        };
        match &self.experiment {
            Experiment::BeamPattern(b) => {
                if b.plane_stride == 0 || b.y_stride == 0 {
                    return bad("strides must be positive".into());
                }
                check_scale(b.scale)?;
            }
            Experiment::PowerMap(m) => {
                if m.nx < 2 || m.ny < 2 {
                    return bad("power map needs at least 2x2 points".into());
                }
            }
            Experiment::SeVsPower(s) => positive("powers", &s.powers)?,
            Experiment::BlockageSweep(b) => {
                let e = &b.bin_edges;
                if e.len() < 2 || e.windows(2).any(|w| w[1] <= w[0]) || e[0] < 0.0 || e[e.len() - 1] > 1.0 {
                    return bad("bin_edges must be strictly ascending within [0, 1]".into());
                }
            }
            Experiment::FrequencySweep(f) => positive("frequencies_hz", &f.frequencies_hz)?,
            Experiment::CodebookSizeSweep(c) => {
                if c.angle_counts.is_empty() || c.distance_counts.is_empty() || c.angle_counts.contains(&0) || c.distance_counts.contains(&0) {
                    return bad("codebook size axes must be non-empty and positive".into());
                }
            }
            Experiment::ObstacleSizeSweep(o) => {
                positive("lengths", &o.lengths)?;
                if !(o.x_left > 0.0 && o.x_right > o.x_left) {
                    return bad("obstacle x range must satisfy 0 < x_left < x_right".into());
                }
            }
            Experiment::HybridGap(h) => {
                if h.n_rf.is_empty() || h.n_rf.contains(&0) || h.response_n_rf == 0 {
                    return bad("n_rf values must be positive".into());
                }
                if h.bits.is_empty() || h.bits.iter().chain([&h.response_bits]).any(|&b| !(1..=16).contains(&b)) {
                    return bad("bits must lie in 1..=16".into());
                }
                if h.oversampling == 0 {
                    return bad("oversampling must be positive".into());
                }
            }
            Experiment::CorrelationCurves(c) => {
                if c.count < 2 || !(c.s_min > 0.0 && c.s_max > c.s_min) || !(c.a_max > c.a_min) || c.r <= 0.0 {
                    return bad("correlation sweep ranges are invalid".into());
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_scale(scale: HeatmapScale) -> Result<()> {
    match scale {
        HeatmapScale::Db { floor } if !(floor.is_finite() && floor < 0.0) => {
            Err(HarnessError::Config(format!("dB floor must be negative, got {floor}")))
        }
        _ => Ok(()),
    }
}

fn shrink(count: usize, factor: usize) -> usize {
    count.div_ceil(factor).max(1)
}

/// Divides every axis count by `factor`, rounding up. Curvature counts are
/// kept odd so `c = 0` stays in the set.
pub fn shrink_specs(specs: &CodebookSpecs, factor: usize) -> CodebookSpecs {
    let one = |s: &SamplingSpec| -> SamplingSpec {
        let mut s = s.clone();
        match &mut s {
            SamplingSpec::Angle { count }
            | SamplingSpec::AngleWindow { count, .. }
            | SamplingSpec::DistanceRange { count, .. }
            | SamplingSpec::Decay { count, .. }
            | SamplingSpec::Scale { count, .. }
            | SamplingSpec::ScaleLinear { count, .. } => *count = shrink(*count, factor),
            SamplingSpec::Distance { m, .. } => *m = shrink(*m, factor),
            SamplingSpec::Curvature { count, .. } => *count = shrink(*count, factor) | 1,
        }
        s
    };
    CodebookSpecs {
        angle: specs.angle.as_ref().map(one),
        distance: specs.distance.as_ref().map(one),
        scale: specs.scale.as_ref().map(one),
        decay: specs.decay.as_ref().map(one),
        curvature: specs.curvature.as_ref().map(one),
    }
}

/// Replaces the angle and distance counts of `specs`.
pub fn with_head_counts(specs: &CodebookSpecs, angles: usize, distances: usize) -> Result<CodebookSpecs> {
    let mut out = specs.clone();
    match out.angle.as_mut() {
        Some(SamplingSpec::Angle { count }) | Some(SamplingSpec::AngleWindow { count, .. }) => *count = angles,
        _ => return Err(HarnessError::Config("codebook has no angle axis".into())),
    }
    match out.distance.as_mut() {
        Some(SamplingSpec::DistanceRange { count, .. }) => *count = distances,
        Some(SamplingSpec::Distance { m, .. }) => *m = distances,
        _ => return Err(HarnessError::Config("codebook has no distance axis".into())),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENARIO: &str = r#"{"frequency_hz": 100e9, "num_elements": 16, "spacing_over_lambda": 0.5,
        "power": 5.0, "grid": {"y_halfspan": 0.1, "x_max": 0.5}}"#;

    fn parse(extra: &str) -> Result<ExperimentConfig> {
        let text = format!(r#"{{"scenario": {SCENARIO}, "rng_seed": 1, {extra}}}"#);
        ExperimentConfig::from_json_str(&text, Path::new("."))
    }

    #[test]
    fn defaults_fill_sweep_axes() {
        let c = parse(r#""kind": "blockage-sweep""#).unwrap();
        assert_eq!(c.num_users, DEFAULT_NUM_USERS);
        assert_eq!(c.experiment, Experiment::BlockageSweep(BlockageSweep::default()));
        assert_eq!(c.schemes.len(), 7);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = format!(r#"{{"scenario": {SCENARIO}, "kind": "power-map"}}"#);
        assert!(matches!(ExperimentConfig::from_json_str(&text, Path::new(".")), Err(HarnessError::Config(_))));
    }

    #[test]
    fn sweep_must_match_kind() {
        let err = parse(r#""kind": "se-vs-power", "sweep": {"bin_edges": [0, 1]}"#).unwrap_err();
        assert!(err.to_string().contains("se-vs-power"), "{err}");
        assert!(parse(r#""kind": "blockage-sweep", "sweep": {"bin_edges": [0.5, 0.2]}"#).is_err());
        assert!(parse(r#""kind": "hybrid-gap", "sweep": {"bits": [0]}"#).is_err());
    }

    #[test]
    fn quick_divides_counts() {
        let mut c = parse(r#""kind": "blockage-sweep""#).unwrap();
        c.make_quick();
        c.make_quick();
        let q = &c.codebooks;
        assert!(matches!(q.angle, Some(SamplingSpec::AngleWindow { count: 23, .. })));
        assert!(matches!(q.distance, Some(SamplingSpec::DistanceRange { count: 5, .. })));
        assert!(matches!(q.scale, Some(SamplingSpec::Scale { count: 3, .. })));
        assert!(matches!(q.decay, Some(SamplingSpec::Decay { count: 3, .. })));
        assert!(matches!(q.curvature, Some(SamplingSpec::Curvature { count: 7, .. })));
    }

    #[test]
    fn canonical_form_is_stable() {
        let a = parse(r#""kind": "power-map", "sweep": {"nx": 3, "ny": 3}"#).unwrap();
        let b = parse(r#""sweep": {"ny": 3, "nx": 3}, "kind": "power-map""#).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let v: Value = serde_json::to_value(&a).unwrap();
        assert_eq!(v["kind"], "power-map");
        assert_eq!(v["sweep"]["nx"], 3);
    }
}
