//! Airy function `Ai(x)` on the real line and the Airy aperture envelope.
//!
//! Evaluation regions:
//!
//! * `-series_cutoff <= x <= max(series_cutoff, 5)`: Maclaurin series.
//! * beyond that on the positive side: decaying asymptotic expansion.
//! * `-20 <= x < -series_cutoff`: Taylor expansion about the nearest node of a
//!   precomputed table (nodes every 0.5, obtained by Taylor-stepping from 0).
//!   Neither the Maclaurin series nor the oscillatory expansion reaches
//!   1e-10 absolute accuracy in this band.
//! * `x < -20`: oscillatory asymptotic expansion.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scenario::ArrayGeometry;

/// Ai(0) = 3^(-2/3) / Γ(2/3).
const AI0: f64 = 0.355_028_053_887_817_239_26;
/// Ai'(0) = -3^(-1/3) / Γ(1/3).
const AIP0: f64 = -0.258_819_403_792_806_798_41;

/// The decaying asymptotic expansion is never used below this point,
/// whatever the configured cutoff.
const MIN_ASYMPTOTIC: f64 = 5.0;

const TABLE_STEP: f64 = 0.5;
const TABLE_END: f64 = 20.0;

/// Smallest |s| (meters) accepted by [`airy_envelope`].
pub const MIN_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryEvalConfig {
    /// |x| threshold between the Maclaurin series and the other methods.
    pub series_cutoff: f64,
    /// Truncation tolerance for the series.
    pub target_abs_tol: f64,
}

impl Default for AiryEvalConfig {
    fn default() -> Self {
        Self {
            series_cutoff: 5.0,
            target_abs_tol: 1e-17,
        }
    }
}

impl AiryEvalConfig {
    fn check(&self) -> Result<()> {
        if !(self.series_cutoff > 0.0 && self.series_cutoff <= TABLE_END) {
            return Err(Error::Param(format!(
                "series_cutoff must be in (0, {TABLE_END}], got {}",
                self.series_cutoff
            )));
        }
        if !(self.target_abs_tol > 0.0 && self.target_abs_tol <= 1e-10) {
            return Err(Error::Param(format!(
                "target_abs_tol must be in (0, 1e-10], got {}",
                self.target_abs_tol
            )));
        }
        Ok(())
    }
}

/// Ai(x) with the default configuration.
pub fn airy_ai(x: f64) -> Result<f64> {
    airy_ai_with(x, &AiryEvalConfig::default())
}

pub fn airy_ai_with(x: f64, cfg: &AiryEvalConfig) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(x));
    }
    cfg.check()?;
    Ok(eval(x, cfg))
}

fn eval(x: f64, cfg: &AiryEvalConfig) -> f64 {
    if x > cfg.series_cutoff.max(MIN_ASYMPTOTIC) {
        asymptotic_positive(x)
    } else if x >= -cfg.series_cutoff {
        taylor(0.0, AI0, AIP0, x, cfg.target_abs_tol).0
    } else if x >= -TABLE_END {
        let table = node_table();
        let k = ((-x) / TABLE_STEP).round() as usize;
        let (ai, aip) = table[k];
        let x0 = -(k as f64) * TABLE_STEP;
        taylor(x0, ai, aip, x - x0, cfg.target_abs_tol).0
    } else {
        asymptotic_negative(-x)
    }
}

/// Taylor expansion of the Airy equation `y'' = x y` about `x0`.
///
/// Returns `(y, y')` at `x0 + t`.
fn taylor(x0: f64, y0: f64, yp0: f64, t: f64, tol: f64) -> (f64, f64) {
    // y = Σ a_n t^n with (n+2)(n+1) a_{n+2} = x0 a_n + a_{n-1}.
    let (mut a_m1, mut a_n, mut a_p1) = (0.0, y0, yp0);
    let (mut y, mut yp) = (0.0, 0.0);
    let (mut t_n, mut t_nm1) = (1.0, 0.0);
    let mut quiet = 0;
    for n in 0..500usize {
        let nf = n as f64;
        let term_y = a_n * t_n;
        let term_yp = nf * a_n * t_nm1;
        y += term_y;
        yp += term_yp;
        let scale = 1.0_f64.max(y.abs()).max(yp.abs());
        // At x0 = 0 every third coefficient vanishes, so require a run of
        // small terms before stopping.
        if term_y.abs() < tol * scale && term_yp.abs() < tol * scale {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        let a_p2 = (x0 * a_n + a_m1) / ((nf + 2.0) * (nf + 1.0));
        a_m1 = a_n;
        a_n = a_p1;
        a_p1 = a_p2;
        t_nm1 = t_n;
        t_n *= t;
    }
    (y, yp)
}

fn node_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let count = (TABLE_END / TABLE_STEP).round() as usize + 1;
        let mut nodes = Vec::with_capacity(count);
        let (mut ai, mut aip) = (AI0, AIP0);
        nodes.push((ai, aip));
        for k in 1..count {
            let x0 = -((k - 1) as f64) * TABLE_STEP;
            (ai, aip) = taylor(x0, ai, aip, -TABLE_STEP, 1e-20);
            nodes.push((ai, aip));
        }
        nodes
    })
}

/// Coefficients `u_k` of the Airy asymptotic expansions, up to where they
/// stop being useful for the requested ζ.
fn u_coeff(k: usize, prev: f64) -> f64 {
    let k = k as f64;
    prev * (6.0 * k - 5.0) * (6.0 * k - 3.0) * (6.0 * k - 1.0) / ((2.0 * k - 1.0) * 216.0 * k)
}

fn asymptotic_positive(x: f64) -> f64 {
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let mut sum = 1.0;
    let mut u = 1.0;
    let mut zk = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        u = u_coeff(k, u);
        zk *= zeta;
        let term = u / zk;
        if term >= last {
            break;
        }
        last = term;
        sum += if k % 2 == 1 { -term } else { term };
        if term < 1e-17 {
            break;
        }
    }
    (-zeta).exp() / (2.0 * PI.sqrt() * x.powf(0.25)) * sum
}

fn asymptotic_negative(z: f64) -> f64 {
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    let mut p = 1.0;
    let mut q = 0.0;
    let mut u = 1.0;
    let mut zk = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        u = u_coeff(k, u);
        zk *= zeta;
        let term = u / zk;
        if term >= last {
            break;
        }
        last = term;
        // k odd feeds Q with sign (-1)^((k-1)/2); k even feeds P with (-1)^(k/2).
        if k % 2 == 1 {
            q += if (k / 2) % 2 == 0 { term } else { -term };
        } else {
            p += if (k / 2) % 2 == 1 { -term } else { term };
        }
        if term < 1e-17 {
            break;
        }
    }
    let phase = zeta + PI / 4.0;
    (phase.sin() * p - phase.cos() * q) / (PI.sqrt() * z.powf(0.25))
}

/// Unnormalized Airy aperture envelope `Ai(y_n / s) · exp(a · y_n / s)`.
pub fn airy_envelope(geometry: &ArrayGeometry, s: f64, a: f64) -> Result<Vec<f64>> {
    if !s.is_finite() || s.abs() < MIN_SCALE {
        return Err(Error::DegenerateScale(s.abs()));
    }
    if !a.is_finite() {
        return Err(Error::Domain(a));
    }
    let cfg = AiryEvalConfig::default();
    (0..geometry.num_elements())
        .map(|n| {
            let u = geometry.position(n) / s;
            let v = eval(u, &cfg) * (a * u).exp();
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::DegenerateScale(s.abs()))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((airy_ai(0.0).unwrap() - 0.355_028_053_887_817_2).abs() < 1e-15);
        assert!((airy_ai(1.0).unwrap() - 0.135_292_416_312_881_4).abs() < 1e-14);
        // First zero.
        assert!(airy_ai(-2.338_107_410_459_767).unwrap().abs() < 1e-12);
        // Ai(-1) and Ai(2) from standard tables.
        assert!((airy_ai(-1.0).unwrap() - 0.535_560_883_292_352_1).abs() < 1e-13);
        assert!((airy_ai(2.0).unwrap() - 0.034_924_130_423_274_38).abs() < 1e-14);
    }

    #[test]
    fn matches_reference_table() {
        let table = [
            (-20.1, -0.245_361_739_252_998_84),
            (-19.9, -0.072_738_820_111_011_39),
            (-12.0, -0.066_555_175_054_373_13),
            (-8.0, -0.052_705_050_356_386_2),
            (-6.0, -0.329_145_173_629_823_1),
            (-5.5, 0.017_781_541_276_574_976),
            (-5.0, 0.350_761_009_024_114_3),
            (4.9, 1.359_921_170_150_674_3e-4),
            (5.1, 8.613_242_706_478_852e-5),
        ];
        for (x, v) in table {
            let got = airy_ai(x).unwrap();
            assert!((got - v).abs() < 1e-12, "Ai({x}) = {got}, want {v}");
        }
    }

    #[test]
    fn continuous_across_region_boundaries() {
        let cfg = AiryEvalConfig::default();
        for b in [cfg.series_cutoff.max(MIN_ASYMPTOTIC), -cfg.series_cutoff, -TABLE_END] {
            let lo = airy_ai(b - 1e-13).unwrap();
            let hi = airy_ai(b + 1e-13).unwrap();
            assert!((lo - hi).abs() < 1e-11, "jump at {b}: {lo} vs {hi}");
        }
    }

    #[test]
    fn satisfies_airy_equation() {
        let h = 1e-3;
        let mut x = -5.0;
        while x <= 2.0 {
            let d2 = (airy_ai(x + h).unwrap() - 2.0 * airy_ai(x).unwrap()
                + airy_ai(x - h).unwrap())
                / (h * h);
            assert!((d2 - x * airy_ai(x).unwrap()).abs() < 1e-5, "x = {x}");
            x += 0.01;
        }
    }

    #[test]
    fn monotone_decay_on_positive_side() {
        let mut prev = airy_ai(1.2).unwrap();
        let mut x = 1.2;
        while x < 30.0 {
            x += 0.01;
            let v = airy_ai(x).unwrap();
            assert!(v <= prev && v >= 0.0, "x = {x}");
            prev = v;
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(airy_ai(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(airy_ai(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn envelope_mirror_symmetry() {
        let g = ArrayGeometry::new(266, 1.5e-3).unwrap();
        let pos = airy_envelope(&g, 0.1, -0.8).unwrap();
        let neg = airy_envelope(&g, -0.1, -0.8).unwrap();
        for (p, q) in pos.iter().rev().zip(&neg) {
            assert_eq!(p, q);
        }
        let two = ArrayGeometry::new(2, 0.01).unwrap();
        let e = airy_envelope(&two, 0.02, 0.0).unwrap();
        assert_eq!(e, vec![airy_ai(-0.25).unwrap(), airy_ai(0.25).unwrap()]);
    }

    #[test]
    fn envelope_exponential_ratio() {
        // With the Ai factor held out, adjacent elements differ by exp(a d / s).
        let g = ArrayGeometry::new(64, 1.5e-3).unwrap();
        let (s, a) = (-0.1, -0.8);
        let env = airy_envelope(&g, s, a).unwrap();
        let ratio = (a * g.spacing() / s).exp();
        for n in 0..63 {
            let r0 = env[n] / airy_ai(g.position(n) / s).unwrap();
            let r1 = env[n + 1] / airy_ai(g.position(n + 1) / s).unwrap();
            assert!((r1 / r0 - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_scale() {
        let g = ArrayGeometry::new(4, 1.0).unwrap();
        assert!(matches!(
            airy_envelope(&g, 1e-7, 0.0),
            Err(Error::DegenerateScale(_))
        ));
    }
}
