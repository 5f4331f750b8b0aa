//! Slow reference for Ai(x) straight from the oscillatory integral
//! `Ai(x) = (1/π) Re ∫₀^∞ exp(i(t³/3 + x t)) dt`.
//!
//! The integral is split at `T`: `[0, T]` uses composite 20-point
//! Gauss–Legendre panels sized so that the phase advances by at most a few
//! radians per panel, and `[T, ∞)` uses three terms of repeated integration
//! by parts, `e^{iφ(T)} (-ψ + ψψ' - ψ(ψψ')')` with `ψ = -i/φ'`.

#![allow(dead_code)]

use std::f64::consts::PI;

const ORDER: usize = 20;

fn legendre_rule() -> ([f64; ORDER], [f64; ORDER]) {
    let mut x = [0.0; ORDER];
    let mut w = [0.0; ORDER];
    let n = ORDER as f64;
    for i in 0..ORDER {
        let mut z = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=ORDER {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

pub struct AiryQuadrature {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
    cut: f64,
}

impl Default for AiryQuadrature {
    fn default() -> Self {
        let (nodes, weights) = legendre_rule();
        Self {
            nodes,
            weights,
            cut: 15.0,
        }
    }
}

impl AiryQuadrature {
    pub fn ai(&self, x: f64) -> f64 {
        let phi = |t: f64| t * t * t / 3.0 + x * t;
        let dphi = |t: f64| t * t + x;
        // Cut well past the stationary point so the tail expansion converges.
        let t_end = self.cut.max(2.0 * (-x).max(0.0).sqrt() + 10.0);
        let mut sum = 0.0;
        let mut a = 0.0;
        while a < t_end {
            let slope = dphi(a).abs().max(dphi(a + 0.25).abs()).max(1.0);
            let b = (a + (4.0 / slope).min(0.25)).min(t_end);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            let mut s = 0.0;
            for (z, w) in self.nodes.iter().zip(&self.weights) {
                s += w * phi(mid + half * z).cos();
            }
            sum += s * half;
            a = b;
        }
        let t = t_end;
        let d1 = dphi(t);
        // ψ = -i/φ', ψψ' = 2t/φ'³, (ψψ')' = 2/φ'³ - 12t²/φ'⁴.
        let psi = (0.0, -1.0 / d1);
        let psi_psip = 2.0 * t / d1.powi(3);
        let dpsi_psip = 2.0 / d1.powi(3) - 12.0 * t * t / d1.powi(4);
        // -ψ + ψψ' - ψ(ψψ')'
        let re = -psi.0 + psi_psip - psi.0 * dpsi_psip;
        let im = -psi.1 - psi.1 * dpsi_psip;
        let (c, s) = (phi(t).cos(), phi(t).sin());
        let tail = c * re - s * im;
        (sum + tail) / PI
    }

    /// Root of the oracle in `[lo, hi]` by bisection.
    pub fn bisect_zero(&self, mut lo: f64, mut hi: f64) -> f64 {
        let mut flo = self.ai(lo);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let fm = self.ai(mid);
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
