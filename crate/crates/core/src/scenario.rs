//! Physical configuration of a simulation: array, obstacles, grid and power budget.
//!
//! All lengths are meters. Field amplitudes and powers are dimensionless.
//! Everything downstream consumes a [`Scenario`], which can only be obtained
//! through [`ScenarioConfig::validate`].

use std::f64::consts::PI;
use std::ops::Range;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on `‖w‖² = P`.
pub const POWER_RTOL: f64 = 1e-9;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform linear array along y, centered on the origin at x = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    num_elements: usize,
    spacing: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing: f64) -> Result<Self> {
        if num_elements < 2 {
            return Err(Error::Geometry(format!(
                "need at least 2 elements, got {num_elements}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Geometry(format!(
                "element spacing must be positive, got {spacing}"
            )));
        }
        Ok(Self {
            num_elements,
            spacing,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// y coordinate of element `n`, `(n - (N-1)/2) d`.
    pub fn position(&self, n: usize) -> f64 {
        (n as f64 - (self.num_elements as f64 - 1.0) / 2.0) * self.spacing
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.num_elements).map(|n| self.position(n)).collect()
    }

    /// Total aperture `(N-1) d`.
    pub fn aperture(&self) -> f64 {
        (self.num_elements as f64 - 1.0) * self.spacing
    }
}

/// Axis-aligned rectangular obstacle `[x_left, x_right] × [y_down, y_up]`.
///
/// The rectangle is closed: boundary points count as blocked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x_left: f64,
    pub x_right: f64,
    pub y_down: f64,
    pub y_up: f64,
}

impl Obstacle {
    pub fn new(x_left: f64, x_right: f64, y_down: f64, y_up: f64) -> Result<Self> {
        let all_finite = [x_left, x_right, y_down, y_up].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Obstacle("non-finite coordinate".into()));
        }
        if x_left <= 0.0 {
            return Err(Error::Obstacle(format!(
                "x_left = {x_left} must be strictly in front of the aperture (x > 0)"
            )));
        }
        if x_left >= x_right {
            return Err(Error::Obstacle(format!(
                "x_left = {x_left} must be below x_right = {x_right}"
            )));
        }
        if y_down >= y_up {
            return Err(Error::Obstacle(format!(
                "y_down = {y_down} must be below y_up = {y_up}"
            )));
        }
        Ok(Self {
            x_left,
            x_right,
            y_down,
            y_up,
        })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.spans_x(x) && y >= self.y_down && y <= self.y_up
    }

    pub fn spans_x(&self, x: f64) -> bool {
        x >= self.x_left && x <= self.x_right
    }

    /// Whether the closed segment `p0 → p1` touches the closed rectangle.
    ///
    /// Liang–Barsky parametric clipping.
    pub fn intersects_segment(&self, p0: (f64, f64), p1: (f64, f64)) -> bool {
        let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        let edges = [
            (-dx, p0.0 - self.x_left),
            (dx, self.x_right - p0.0),
            (-dy, p0.1 - self.y_down),
            (dy, self.y_up - p0.1),
        ];
        for (p, q) in edges {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Simulation grid. `dx` is the plane step, `dy` the transverse pitch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub dx: f64,
    pub dy: f64,
    pub y_halfspan: f64,
    pub x_max: f64,
    pub pad_factor: f64,
    /// Per-step attenuation exponent at the outer edge of the padding band.
    /// Zero disables the absorbing layer.
    pub absorber_strength: f64,
}

/// Transverse sample layout of the padded FFT window.
///
/// Sample `j` sits at `y_j = (j - center) * dy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleWindow {
    pub len: usize,
    pub center: usize,
    pub dy: f64,
    /// Half-width of the physical scene; samples beyond it are padding.
    pub y_halfspan: f64,
}

impl SampleWindow {
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 - self.center as f64) * self.dy
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.y(j)).collect()
    }

    /// Index of the sample nearest to `y`, if it falls inside the window.
    pub fn nearest_index(&self, y: f64) -> Option<usize> {
        let j = (y / self.dy).round() + self.center as f64;
        (j >= 0.0 && j < self.len as f64).then_some(j as usize)
    }

    /// Sample indices with `lo <= y_j <= hi`.
    pub fn index_range(&self, lo: f64, hi: f64) -> Range<usize> {
        let c = self.center as f64;
        let first = ((lo / self.dy) + c).ceil().max(0.0);
        let last = ((hi / self.dy) + c).floor().min(self.len as f64 - 1.0);
        if last < first {
            return 0..0;
        }
        // Re-check the endpoints exactly against the sample coordinates.
        let mut a = first as usize;
        let mut b = last as usize + 1;
        while a < b && self.y(a) < lo {
            a += 1;
        }
        while b > a && self.y(b - 1) > hi {
            b -= 1;
        }
        a..b
    }

    /// Indices of the unpadded scene window `|y| <= y_halfspan`.
    pub fn scene_range(&self) -> Range<usize> {
        self.index_range(-self.y_halfspan, self.y_halfspan)
    }

    pub fn width(&self) -> f64 {
        self.len as f64 * self.dy
    }
}

/// Smallest even 5-smooth integer `>= n`.
fn fast_fft_len(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        if m % 2 == 0 {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

/// Validated, immutable scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    frequency: f64,
    wavelength: f64,
    wavenumber: f64,
    power: f64,
    noise_power: f64,
    geometry: ArrayGeometry,
    obstacles: Vec<Obstacle>,
    grid: GridConfig,
    window: SampleWindow,
}

impl Scenario {
    pub fn frequency(&self) -> f64 {
        self.frequency
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    /// κ = 2π/λ.
    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }
    pub fn power(&self) -> f64 {
        self.power
    }
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }
    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }
    pub fn grid(&self) -> &GridConfig {
        &self.grid
    }
    pub fn window(&self) -> &SampleWindow {
        &self.window
    }
    pub fn num_elements(&self) -> usize {
        self.geometry.num_elements
    }

    /// Number of propagation steps from the aperture to `x_max`.
    pub fn num_steps(&self) -> usize {
        (self.grid.x_max / self.grid.dx).round() as usize
    }

    pub fn plane_x(&self, index: usize) -> f64 {
        index as f64 * self.grid.dx
    }

    pub fn is_blocked(&self, x: f64, y: f64) -> bool {
        self.obstacles.iter().any(|o| o.contains(x, y))
    }

    /// Sample ranges zeroed by obstacles on the plane at `x`.
    pub fn blocked_ranges(&self, x: f64) -> impl Iterator<Item = Range<usize>> + '_ {
        self.obstacles
            .iter()
            .filter(move |o| o.spans_x(x))
            .map(|o| self.window.index_range(o.y_down, o.y_up))
    }

    /// Binary transmission mask `B(x, y_j)` over the padded sample grid:
    /// 0 inside any obstacle, 1 elsewhere.
    pub fn blockage_mask(&self, x: f64) -> Result<Vec<u8>> {
        if !(x.is_finite() && x >= 0.0 && x <= self.grid.x_max) {
            return Err(Error::Range {
                x,
                y: 0.0,
                reason: format!("plane must lie in [0, {}]", self.grid.x_max),
            });
        }
        let mut mask = vec![1u8; self.window.len];
        for r in self.blocked_ranges(x) {
            mask[r].fill(0);
        }
        Ok(mask)
    }

    /// Raw configuration this scenario was validated from.
    pub fn to_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            frequency_hz: self.frequency,
            num_elements: self.geometry.num_elements,
            spacing_over_lambda: self.geometry.spacing / self.wavelength,
            power: self.power,
            noise_power: self.noise_power,
            obstacles: self
                .obstacles
                .iter()
                .map(|o| [o.x_left, o.x_right, o.y_down, o.y_up])
                .collect(),
            grid: GridSpec {
                dx: Some(self.grid.dx),
                dy: Some(self.grid.dy),
                y_halfspan: self.grid.y_halfspan,
                x_max: self.grid.x_max,
                pad_factor: self.grid.pad_factor,
                absorber_strength: self.grid.absorber_strength,
            },
        }
    }
}

fn default_noise_power() -> f64 {
    1.0
}
fn default_pad_factor() -> f64 {
    2.0
}
fn default_absorber() -> f64 {
    DEFAULT_ABSORBER
}

/// Default [`GridConfig::absorber_strength`].
pub const DEFAULT_ABSORBER: f64 = 2.0;

/// Grid section of the JSON configuration. `dx` and `dy` default to λ and λ/4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dy: Option<f64>,
    pub y_halfspan: f64,
    pub x_max: f64,
    #[serde(default = "default_pad_factor")]
    pub pad_factor: f64,
    #[serde(default = "default_absorber")]
    pub absorber_strength: f64,
}

/// Unvalidated scenario as read from a JSON file.
///
/// ```json
/// {
///   "frequency_hz": 100e9,
///   "num_elements": 266,
///   "spacing_over_lambda": 0.5,
///   "power": 5.0,
///   "noise_power": 1.0,
///   "obstacles": [[1.0, 1.2, -0.1, 0.1]],
///   "grid": {"y_halfspan": 0.5, "x_max": 5.0, "pad_factor": 2.0}
/// }
/// ```
///
/// Obstacles are `[x_left, x_right, y_down, y_up]` in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub frequency_hz: f64,
    pub num_elements: usize,
    pub spacing_over_lambda: f64,
    pub power: f64,
    #[serde(default = "default_noise_power")]
    pub noise_power: f64,
    #[serde(default)]
    pub obstacles: Vec<[f64; 4]>,
    pub grid: GridSpec,
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<Scenario> {
        let f = self.frequency_hz;
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::Scenario(format!("frequency must be positive, got {f}")));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::Scenario(format!(
                "power must be positive, got {}",
                self.power
            )));
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return Err(Error::Scenario(format!(
                "noise power must be positive, got {}",
                self.noise_power
            )));
        }
        let wavelength = SPEED_OF_LIGHT / f;
        let wavenumber = 2.0 * PI / wavelength;
        let geometry =
            ArrayGeometry::new(self.num_elements, self.spacing_over_lambda * wavelength)?;

        let g = &self.grid;
        let dx = g.dx.unwrap_or(wavelength);
        let dy = g.dy.unwrap_or(wavelength / 4.0);
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::Grid(format!("dx must be positive, got {dx}")));
        }
        if !(dy.is_finite() && dy > 0.0) {
            return Err(Error::Grid(format!("dy must be positive, got {dy}")));
        }
        if dy > wavelength / 2.0 * (1.0 + 1e-12) {
            return Err(Error::Grid(format!(
                "dy = {dy} exceeds λ/2 = {}",
                wavelength / 2.0
            )));
        }
        if !(g.pad_factor.is_finite() && g.pad_factor >= 1.0) {
            return Err(Error::Grid(format!(
                "pad_factor must be >= 1, got {}",
                g.pad_factor
            )));
        }
        if !(g.absorber_strength.is_finite() && g.absorber_strength >= 0.0) {
            return Err(Error::Grid("absorber_strength must be >= 0".into()));
        }
        if !(g.x_max.is_finite() && g.x_max >= dx) {
            return Err(Error::Grid(format!(
                "x_max = {} must be at least one step dx = {dx}",
                g.x_max
            )));
        }
        if !(g.y_halfspan.is_finite() && g.y_halfspan >= geometry.aperture() / 2.0 + dy) {
            return Err(Error::Grid(format!(
                "y_halfspan = {} does not cover the aperture half-width {}",
                g.y_halfspan,
                geometry.aperture() / 2.0
            )));
        }

        let mut obstacles = Vec::with_capacity(self.obstacles.len());
        for r in &self.obstacles {
            let o = Obstacle::new(r[0], r[1], r[2], r[3])?;
            if o.x_left > g.x_max || o.y_down < -g.y_halfspan || o.y_up > g.y_halfspan {
                return Err(Error::Obstacle(format!(
                    "obstacle {r:?} lies outside the grid window"
                )));
            }
            obstacles.push(o);
        }

        let half_cells = (g.y_halfspan / dy).floor() as usize;
        let target = (g.pad_factor * 2.0 * g.y_halfspan / dy).ceil() as usize;
        let len = fast_fft_len(target.max(2 * half_cells + 2));
        let window = SampleWindow {
            len,
            center: len / 2,
            dy,
            y_halfspan: g.y_halfspan,
        };

        Ok(Scenario {
            frequency: f,
            wavelength,
            wavenumber,
            power: self.power,
            noise_power: self.noise_power,
            geometry,
            obstacles,
            grid: GridConfig {
                dx,
                dy,
                y_halfspan: g.y_halfspan,
                x_max: g.x_max,
                pad_factor: g.pad_factor,
                absorber_strength: g.absorber_strength,
            },
            window,
        })
    }
}

/// Complex aperture excitation with `‖w‖₂² = P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    coeffs: Vec<Complex64>,
    power: f64,
}

impl Weights {
    /// Accepts `coeffs` only if their squared norm is `power` within [`POWER_RTOL`].
    pub fn new(coeffs: Vec<Complex64>, power: f64) -> Result<Self> {
        let actual: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if !(power > 0.0) || ((actual - power) / power).abs() > POWER_RTOL {
            return Err(Error::Power {
                expected: power,
                actual,
            });
        }
        Ok(Self { coeffs, power })
    }

    /// Rescales `coeffs` to squared norm `power`.
    pub fn normalized(mut coeffs: Vec<Complex64>, power: f64) -> Result<Self> {
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::Param(format!("power must be positive, got {power}")));
        }
        let norm2: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if !(norm2.is_finite() && norm2 > 0.0) {
            return Err(Error::ZeroVector);
        }
        let scale = (power / norm2).sqrt();
        coeffs.iter_mut().for_each(|c| *c *= scale);
        Ok(Self { coeffs, power })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
    pub fn power(&self) -> f64 {
        self.power
    }
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `index,re,im` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,re,im\n");
        for (i, c) in self.coeffs.iter().enumerate() {
            out.push_str(&format!("{i},{},{}\n", c.re, c.im));
        }
        out
    }

    pub fn from_csv(text: &str, power: f64) -> Result<Self> {
        let mut coeffs = Vec::new();
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected 3 fields",
                    lineno + 1
                )));
            }
            let idx: usize = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if idx != coeffs.len() {
                return Err(Error::Parse(format!(
                    "line {}: index {idx} out of order",
                    lineno + 1
                )));
            }
            coeffs.push(Complex64::new(parse(fields[1])?, parse(fields[2])?));
        }
        Self::new(coeffs, power)
    }
}
