//! Obstructed scalar propagation in the (x, y) plane.
//!
//! The production path is the angular spectrum stepper ([`Propagator`]):
//! each step transforms the current plane to spatial frequencies, applies
//! `H(κ_y) = exp(-j dx sqrt(κ² - κ_y²))` (pure decay for evanescent
//! components), transforms back and multiplies by the obstacle mask of the
//! new plane. [`rs_reference`] evaluates the Rayleigh–Sommerfeld integral
//! directly and serves as a slow oracle.
//!
//! Transverse samples live on the padded window described by
//! [`SampleWindow`]. Outside the scene half-width the padding band carries a
//! graded absorber so that energy leaving the scene does not wrap around
//! through the periodic transform.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scenario::{SampleWindow, Scenario, Weights};

/// Complex field samples along y at a fixed plane `x = index · dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPlane {
    pub index: usize,
    pub x: f64,
    pub dy: f64,
    pub samples: Vec<Complex64>,
}

impl FieldPlane {
    /// Σ |E|² dy over the whole window.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.dy
    }
}

/// Which planes [`Propagator::propagate`] keeps.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordPolicy {
    All,
    /// Every `k`-th plane, starting at the aperture.
    Every(usize),
    /// The planes nearest to the given x coordinates.
    AtX(Vec<f64>),
    /// Only the final plane at `x_max`.
    Last,
}

/// Recorded planes of one propagation run, ordered by x.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    planes: Vec<FieldPlane>,
    window: SampleWindow,
    dx: f64,
}

impl FieldGrid {
    pub fn planes(&self) -> &[FieldPlane] {
        &self.planes
    }

    pub fn window(&self) -> &SampleWindow {
        &self.window
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Field at `(x, y)`: nearest recorded plane in x, linear in y.
    pub fn field_at(&self, x: f64, y: f64) -> Result<Complex64> {
        let out_of_range = |reason: &str| Error::Range {
            x,
            y,
            reason: reason.to_string(),
        };
        if !(x.is_finite() && y.is_finite()) {
            return Err(out_of_range("non-finite point"));
        }
        let (first, last) = match (self.planes.first(), self.planes.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(out_of_range("no recorded planes")),
        };
        let half = 0.5 * self.dx;
        if x < first.x - half || x > last.x + half {
            return Err(out_of_range("x outside the recorded planes"));
        }
        let target = (x / self.dx).round() as usize;
        let pos = self.planes.partition_point(|p| p.index < target);
        let plane = match (pos.checked_sub(1), self.planes.get(pos)) {
            (Some(i), Some(p)) => {
                if (self.planes[i].x - x).abs() <= (p.x - x).abs() {
                    &self.planes[i]
                } else {
                    p
                }
            }
            (None, Some(p)) => p,
            (Some(i), None) => &self.planes[i],
            (None, None) => unreachable!(),
        };
        interpolate_y(&plane.samples, &self.window, y).ok_or_else(|| out_of_range("y outside window"))
    }

    /// |E| over the scene window: `rows[j][i]` is sample `j` (y ascending) on
    /// recorded plane `i` (x ascending).
    pub fn magnitude_map(&self) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let scene = self.window.scene_range();
        let ys: Vec<f64> = scene.clone().map(|j| self.window.y(j)).collect();
        let xs: Vec<f64> = self.planes.iter().map(|p| p.x).collect();
        let rows = scene
            .map(|j| self.planes.iter().map(|p| p.samples[j].norm()).collect())
            .collect();
        (xs, ys, rows)
    }

    /// CSV with columns `x_m,y_m,re,im,abs` over the scene window, x-major.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "x_m,y_m,re,im,abs")?;
        for p in &self.planes {
            for j in self.window.scene_range() {
                let e = p.samples[j];
                writeln!(out, "{},{},{},{},{}", p.x, self.window.y(j), e.re, e.im, e.norm())?;
            }
        }
        Ok(())
    }
}

fn interpolate_y(samples: &[Complex64], window: &SampleWindow, y: f64) -> Option<Complex64> {
    let f = y / window.dy + window.center as f64;
    if f < 0.0 || f > (window.len - 1) as f64 {
        return None;
    }
    let j0 = (f.floor() as usize).min(window.len - 2);
    let t = f - j0 as f64;
    Some(samples[j0] * (1.0 - t) + samples[j0 + 1] * t)
}

/// Angular-spectrum stepper bound to one scenario.
///
/// Construction plans the transforms and tabulates the transfer function, so
/// one instance should be reused across runs. It is `Sync`; independent runs
/// may share it across threads.
pub struct Propagator<'a> {
    scenario: &'a Scenario,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// H(κ_y) with the inverse-transform 1/M folded in.
    transfer: Vec<Complex64>,
    absorber: Vec<f64>,
    taper: Vec<f64>,
    scratch_len: usize,
}

impl<'a> Propagator<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let w = *scenario.window();
        let m = w.len;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let ifft = planner.plan_fft_inverse(m);
        let scratch_len = fft
            .get_inplace_scratch_len()
            .max(ifft.get_inplace_scratch_len());

        let k = scenario.wavenumber();
        let dx = scenario.grid().dx;
        let inv_m = 1.0 / m as f64;
        let transfer = (0..m)
            .map(|j| {
                let f = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
                let ky = 2.0 * PI * f / (m as f64 * w.dy);
                let kx2 = k * k - ky * ky;
                let h = if kx2 >= 0.0 {
                    Complex64::from_polar(1.0, -dx * kx2.sqrt())
                } else {
                    Complex64::new((-dx * (-kx2).sqrt()).exp(), 0.0)
                };
                h * inv_m
            })
            .collect();

        let pad = 0.5 * w.width() - w.y_halfspan;
        let strength = scenario.grid().absorber_strength;
        let absorber = (0..m)
            .map(|j| {
                let depth = w.y(j).abs() - w.y_halfspan;
                if depth <= 0.0 || pad <= 0.0 || strength == 0.0 {
                    1.0
                } else {
                    let u = (depth / pad).min(1.0);
                    (-strength * u * u).exp()
                }
            })
            .collect();

        let edge = ((0.1 * m as f64).round() as usize).max(1);
        let taper = (0..m)
            .map(|j| {
                let from_edge = j.min(m - 1 - j);
                if from_edge >= edge {
                    1.0
                } else {
                    0.5 * (1.0 - (PI * from_edge as f64 / edge as f64).cos())
                }
            })
            .collect();

        Self {
            scenario,
            fft,
            ifft,
            transfer,
            absorber,
            taper,
            scratch_len,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    fn scratch(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.scratch_len]
    }

    /// Plane at x = 0 carrying `w_n` in the cell nearest each element.
    pub fn aperture_plane(&self, coeffs: &[Complex64]) -> Result<FieldPlane> {
        let geom = self.scenario.geometry();
        if coeffs.len() != geom.num_elements() {
            return Err(Error::Dimension {
                expected: geom.num_elements(),
                actual: coeffs.len(),
            });
        }
        let w = self.scenario.window();
        let mut samples = vec![Complex64::new(0.0, 0.0); w.len];
        let mut last: Option<usize> = None;
        for (n, &c) in coeffs.iter().enumerate() {
            let j = w.nearest_index(geom.position(n)).ok_or_else(|| {
                Error::Grid(format!("element {n} falls outside the sample window"))
            })?;
            if last.is_some_and(|l| l >= j) {
                return Err(Error::Grid(format!(
                    "elements {} and {n} map to the same cell; dy = {} is too coarse for d = {}",
                    n - 1,
                    w.dy,
                    geom.spacing()
                )));
            }
            last = Some(j);
            samples[j] = c;
        }
        Ok(FieldPlane {
            index: 0,
            x: 0.0,
            dy: w.dy,
            samples,
        })
    }

    /// Aperture plane with the raised-cosine window edge taper applied.
    pub fn launch(&self, coeffs: &[Complex64]) -> Result<FieldPlane> {
        let mut plane = self.aperture_plane(coeffs)?;
        plane
            .samples
            .iter_mut()
            .zip(&self.taper)
            .for_each(|(s, t)| *s *= t);
        Ok(plane)
    }

    /// Advances `plane` by one step `dx`, then applies the obstacle mask and
    /// the padding absorber of the new plane.
    pub fn step(&self, plane: &mut FieldPlane, scratch: &mut [Complex64]) {
        self.fft.process_with_scratch(&mut plane.samples, scratch);
        plane
            .samples
            .iter_mut()
            .zip(&self.transfer)
            .for_each(|(s, h)| *s *= h);
        self.ifft.process_with_scratch(&mut plane.samples, scratch);
        plane.index += 1;
        plane.x = self.scenario.plane_x(plane.index);
        plane
            .samples
            .iter_mut()
            .zip(&self.absorber)
            .for_each(|(s, a)| *s *= a);
        for r in self.scenario.blocked_ranges(plane.x) {
            plane.samples[r].fill(Complex64::new(0.0, 0.0));
        }
    }

    /// Steps from the aperture to `x_max`, keeping planes per `policy`.
    pub fn propagate(&self, coeffs: &[Complex64], policy: &RecordPolicy) -> Result<FieldGrid> {
        let steps = self.scenario.num_steps();
        let keep: Box<dyn Fn(usize) -> bool> = match policy {
            RecordPolicy::All => Box::new(|_| true),
            RecordPolicy::Every(k) => {
                let k = (*k).max(1);
                Box::new(move |i| i % k == 0)
            }
            RecordPolicy::Last => Box::new(move |i| i == steps),
            RecordPolicy::AtX(xs) => {
                let dx = self.scenario.grid().dx;
                let mut wanted = Vec::with_capacity(xs.len());
                for &x in xs {
                    if !(x.is_finite() && x >= 0.0 && x <= self.scenario.grid().x_max + 0.5 * dx) {
                        return Err(Error::Range {
                            x,
                            y: 0.0,
                            reason: "requested plane outside [0, x_max]".into(),
                        });
                    }
                    wanted.push(((x / dx).round() as usize).min(steps));
                }
                wanted.sort_unstable();
                wanted.dedup();
                Box::new(move |i| wanted.binary_search(&i).is_ok())
            }
        };
        let mut scratch = self.scratch();
        let mut plane = self.launch(coeffs)?;
        let mut planes = Vec::new();
        if keep(0) {
            planes.push(plane.clone());
        }
        for i in 1..=steps {
            self.step(&mut plane, &mut scratch);
            if keep(i) {
                planes.push(plane.clone());
            }
        }
        Ok(FieldGrid {
            planes,
            window: *self.scenario.window(),
            dx: self.scenario.grid().dx,
        })
    }

    /// Field at each of `points`, evaluated with the same rule as
    /// [`FieldGrid::field_at`] but without storing planes.
    pub fn sample_points(&self, coeffs: &[Complex64], points: &[(f64, f64)]) -> Result<Vec<Complex64>> {
        let dx = self.scenario.grid().dx;
        let steps = self.scenario.num_steps();
        let w = self.scenario.window();
        let mut order: Vec<(usize, usize)> = Vec::with_capacity(points.len());
        for (k, &(x, y)) in points.iter().enumerate() {
            let i = (x / dx).round();
            if !(x.is_finite() && i >= 0.0 && (i as usize) <= steps) {
                return Err(Error::Range {
                    x,
                    y,
                    reason: "x outside [0, x_max]".into(),
                });
            }
            if interpolate_y(&vec![Complex64::new(0.0, 0.0); w.len], w, y).is_none() {
                return Err(Error::Range {
                    x,
                    y,
                    reason: "y outside window".into(),
                });
            }
            order.push((i as usize, k));
        }
        order.sort_unstable();
        let mut out = vec![Complex64::new(0.0, 0.0); points.len()];
        let mut scratch = self.scratch();
        let mut plane = self.launch(coeffs)?;
        let mut next = 0;
        let last_needed = order.last().map_or(0, |&(i, _)| i);
        loop {
            while next < order.len() && order[next].0 == plane.index {
                let k = order[next].1;
                out[k] = interpolate_y(&plane.samples, w, points[k].1).expect("checked above");
                next += 1;
            }
            if plane.index >= last_needed {
                break;
            }
            self.step(&mut plane, &mut scratch);
        }
        Ok(out)
    }
}

/// Aperture plane for `weights`.
pub fn aperture_plane(scenario: &Scenario, weights: &Weights) -> Result<FieldPlane> {
    Propagator::new(scenario).aperture_plane(weights.coeffs())
}

/// One ASM step from `plane` to `x_next = plane.x + dx`.
pub fn asm_step(plane: &FieldPlane, scenario: &Scenario, x_next: f64) -> Result<FieldPlane> {
    let dx = scenario.grid().dx;
    if (x_next - (plane.x + dx)).abs() > 1e-9 * dx.max(x_next.abs()) {
        return Err(Error::Range {
            x: x_next,
            y: 0.0,
            reason: format!("next plane must be {} + dx", plane.x),
        });
    }
    if plane.samples.len() != scenario.window().len {
        return Err(Error::Dimension {
            expected: scenario.window().len,
            actual: plane.samples.len(),
        });
    }
    let prop = Propagator::new(scenario);
    let mut next = plane.clone();
    prop.step(&mut next, &mut prop.scratch());
    Ok(next)
}

pub fn propagate(scenario: &Scenario, weights: &Weights, policy: &RecordPolicy) -> Result<FieldGrid> {
    Propagator::new(scenario).propagate(weights.coeffs(), policy)
}

/// Kernel used by [`rs_reference`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RsKernel {
    /// Exact two-dimensional kernel `-(jκ Δx / 2r) H₁⁽²⁾(κr)`, the impulse
    /// response of the angular-spectrum transfer function.
    #[default]
    Cylindrical,
    /// Point-source kernel `e^{-jκr} Δx (jκ + 1/r) / (2π r²)` integrated
    /// along y only.
    PointSource,
}

impl RsKernel {
    /// Kernel value for transverse offset `dy` and axial gap `gap`.
    pub fn eval(self, k: f64, gap: f64, dy: f64) -> Complex64 {
        let r = (dy * dy + gap * gap).sqrt();
        match self {
            RsKernel::Cylindrical => {
                let z = k * r;
                let h = Complex64::new(puruspe::Jn(1, z), -puruspe::Yn(1, z));
                Complex64::new(0.0, -k * gap / (2.0 * r)) * h
            }
            RsKernel::PointSource => {
                Complex64::from_polar(1.0, -k * r) * Complex64::new(1.0 / r, k) * gap
                    / (2.0 * PI * r * r)
            }
        }
    }
}

/// Direct quadrature of the Rayleigh–Sommerfeld integral from `source` to
/// each target: `Σ_j E_j K(x - x_src, y - y_j) dy`. Targets inside an
/// obstacle are zero.
pub fn rs_reference(
    source: &FieldPlane,
    scenario: &Scenario,
    targets: &[(f64, f64)],
    kernel: RsKernel,
) -> Result<Vec<Complex64>> {
    let w = scenario.window();
    let support: Vec<(f64, Complex64)> = source
        .samples
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm_sqr() > 0.0)
        .map(|(j, &c)| (w.y(j), c))
        .collect();
    if support.is_empty() {
        return Err(Error::Quadrature("source plane has empty support".into()));
    }
    let k = scenario.wavenumber();
    targets
        .par_iter()
        .map(|&(x, y)| {
            let gap = x - source.x;
            if !(gap > 0.0) {
                return Err(Error::Range {
                    x,
                    y,
                    reason: format!("target must lie beyond the source plane x = {}", source.x),
                });
            }
            if scenario.is_blocked(x, y) {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let sum: Complex64 = support
                .iter()
                .map(|&(ys, e)| e * kernel.eval(k, gap, y - ys))
                .sum();
            Ok(sum * source.dy)
        })
        .collect()
}

/// Equivalent channel at one user point: `E(user) = hᴴ w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub h: Vec<Complex64>,
    pub user: (f64, f64),
}

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// `hᴴ w`.
    pub fn apply(&self, w: &[Complex64]) -> Complex64 {
        self.h.iter().zip(w).map(|(h, w)| h.conj() * w).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.iter().map(|c| c.norm_sqr()).sum()
    }
}

fn check_user(scenario: &Scenario, (x, y): (f64, f64)) -> Result<()> {
    let g = scenario.grid();
    if !(x.is_finite() && y.is_finite() && x > 0.0 && x <= g.x_max && y.abs() <= g.y_halfspan) {
        return Err(Error::Range {
            x,
            y,
            reason: "user must lie in (0, x_max] × [-y_halfspan, y_halfspan]".into(),
        });
    }
    if scenario.is_blocked(x, y) {
        return Err(Error::UserInsideObstacle { x, y });
    }
    Ok(())
}

/// Channel vectors for `users`, one propagation per unit-excited element.
///
/// `h_n` is the conjugate of the field observed at the user when only
/// element `n` is driven with unit amplitude.
pub fn equivalent_channel(scenario: &Scenario, users: &[(f64, f64)]) -> Result<Vec<ChannelVector>> {
    for &u in users {
        check_user(scenario, u)?;
    }
    let prop = Propagator::new(scenario);
    let n = scenario.num_elements();
    let per_element: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|e| {
            let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
            coeffs[e] = Complex64::new(1.0, 0.0);
            prop.sample_points(&coeffs, users)
        })
        .collect::<Result<_>>()?;
    Ok(users
        .iter()
        .enumerate()
        .map(|(u, &user)| ChannelVector {
            h: per_element.iter().map(|f| f[u].conj()).collect(),
            user,
        })
        .collect())
}
