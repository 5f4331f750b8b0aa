//! Hybrid analog/digital factorization of a fully digital beam by orthogonal
//! matching pursuit over an oversampled steering dictionary, followed by
//! B-bit phase quantization of the analog precoder.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenario::Weights;

/// Atoms `a(ψ_l) = [1, e^{jπψ_l}, …, e^{jπ(N-1)ψ_l}]ᵀ / √N` with
/// `ψ_l = -1 + 2l/L`, `L = K_os·N`.
#[derive(Debug, Clone)]
pub struct SteeringDictionary {
    atoms: DMatrix<Complex64>,
    psi: Vec<f64>,
    oversampling: usize,
}

impl SteeringDictionary {
    pub fn atoms(&self) -> &DMatrix<Complex64> {
        &self.atoms
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    pub fn num_elements(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn build_dictionary(n: usize, k_os: usize) -> Result<SteeringDictionary> {
    if n < 2 || k_os < 1 {
        return Err(Error::Param(format!(
            "dictionary needs N >= 2 and K_os >= 1, got N = {n}, K_os = {k_os}"
        )));
    }
    let l = k_os * n;
    let psi: Vec<f64> = (0..l).map(|i| -1.0 + 2.0 * i as f64 / l as f64).collect();
    let amp = 1.0 / (n as f64).sqrt();
    let atoms = DMatrix::from_fn(n, l, |row, col| {
        Complex64::from_polar(amp, PI * psi[col] * row as f64)
    });
    Ok(SteeringDictionary {
        atoms,
        psi,
        oversampling: k_os,
    })
}

/// Greedy selection with least-squares refits, before quantization.
#[derive(Debug, Clone)]
pub struct OmpStage {
    pub analog: DMatrix<Complex64>,
    pub digital: DVector<Complex64>,
    pub selected: Vec<usize>,
    /// `‖w - W_RF w_BB‖` after each round, preceded by `‖w‖`.
    pub residuals: Vec<f64>,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone)]
pub struct HybridFactorization {
    /// Quantized analog precoder, entries `e^{j 2π k / 2^B} / √N`.
    pub analog: DMatrix<Complex64>,
    /// Phase indices `k` of [`HybridFactorization::analog`].
    pub phase_index: DMatrix<u32>,
    pub digital: DVector<Complex64>,
    pub selected: Vec<usize>,
    pub residuals: Vec<f64>,
    pub bits: u32,
    pub power: f64,
    /// Set when a refit hit a numerically rank-deficient atom set and fell
    /// back to a regularized solve.
    pub rank_deficient: bool,
}

/// Least-squares `min ‖w - A x‖` via QR, or via regularized normal equations
/// (regularizer `1e-10 · trace(AᴴA)`) when `A` is numerically rank deficient.
fn least_squares(a: &DMatrix<Complex64>, w: &DVector<Complex64>) -> (DVector<Complex64>, bool) {
    let qr = a.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let full_rank = a.ncols() <= a.nrows() && diag.iter().all(|&d| d > 1e-10 * max);
    if full_rank {
        let rhs = qr.q().adjoint() * w;
        if let Some(x) = r.solve_upper_triangular(&rhs) {
            return (x, false);
        }
    }
    let g = a.adjoint() * a;
    let eps = 1e-10 * g.trace().re;
    let reg = &g + DMatrix::<Complex64>::identity(g.nrows(), g.ncols()) * Complex64::new(eps, 0.0);
    let rhs = a.adjoint() * w;
    let x = reg
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(a.ncols()));
    (x, true)
}

fn check_inputs(w: &Weights, n_rf: usize, dict: &SteeringDictionary) -> Result<()> {
    if w.len() != dict.num_elements() {
        return Err(Error::Dimension {
            expected: dict.num_elements(),
            actual: w.len(),
        });
    }
    if n_rf == 0 || n_rf > dict.len() {
        return Err(Error::Param(format!(
            "N_RF must be in 1..={}, got {n_rf}",
            dict.len()
        )));
    }
    Ok(())
}

/// Greedy atom selection: each round picks the unselected atom most
/// correlated with the residual (ties to the lowest index) and refits all
/// digital coefficients.
pub fn omp_select(w: &Weights, n_rf: usize, dict: &SteeringDictionary) -> Result<OmpStage> {
    check_inputs(w, n_rf, dict)?;
    let target = DVector::from_column_slice(w.coeffs());
    let atoms = dict.atoms();
    let mut residual = target.clone();
    let mut selected: Vec<usize> = Vec::with_capacity(n_rf);
    let mut taken = vec![false; dict.len()];
    let mut residuals = vec![residual.norm()];
    let mut rank_deficient = false;
    let mut digital = DVector::zeros(0);
    for _ in 0..n_rf {
        let corr = atoms.adjoint() * &residual;
        let mut best: Option<(usize, f64)> = None;
        for (l, c) in corr.iter().enumerate() {
            let m = c.norm();
            if !taken[l] && best.is_none_or(|(_, b)| m > b) {
                best = Some((l, m));
            }
        }
        let (l, _) = best.expect("n_rf <= L leaves an unselected atom");
        taken[l] = true;
        selected.push(l);
        let sub = atoms.select_columns(&selected);
        let (x, deficient) = least_squares(&sub, &target);
        rank_deficient |= deficient;
        residual = &target - &sub * &x;
        residuals.push(residual.norm());
        digital = x;
    }
    Ok(OmpStage {
        analog: atoms.select_columns(&selected),
        digital,
        selected,
        residuals,
        rank_deficient,
    })
}

/// Index `k` of the grid point `2πk / 2^bits` nearest to `phase`; exact
/// midpoints go to the smaller angle.
pub fn quantize_phase(phase: f64, bits: u32) -> u32 {
    let levels = 1u64 << bits;
    let step = 2.0 * PI / levels as f64;
    let q = phase.rem_euclid(2.0 * PI) / step;
    let lo = q.floor();
    let k = if q - lo > 0.5 { lo + 1.0 } else { lo };
    (k as u64 % levels) as u32
}

/// Full factorization: selection, phase quantization, refit against the
/// quantized analog matrix, and rescaling so that `‖W_RF w_BB‖² = P`.
pub fn omp_hybrid(
    w: &Weights,
    n_rf: usize,
    dict: &SteeringDictionary,
    bits: u32,
) -> Result<HybridFactorization> {
    if !(1..=16).contains(&bits) {
        return Err(Error::Param(format!("bits must be in 1..=16, got {bits}")));
    }
    let stage = omp_select(w, n_rf, dict)?;
    let n = dict.num_elements();
    let amp = 1.0 / (n as f64).sqrt();
    let step = 2.0 * PI / (1u64 << bits) as f64;
    let phase_index = stage.analog.map(|c| quantize_phase(c.arg(), bits));
    let analog = phase_index.map(|k| Complex64::from_polar(amp, step * k as f64));
    let target = DVector::from_column_slice(w.coeffs());
    let (mut digital, deficient) = least_squares(&analog, &target);
    let eff_norm = (&analog * &digital).norm();
    if !(eff_norm > 0.0) {
        return Err(Error::ZeroVector);
    }
    digital *= Complex64::new(w.power().sqrt() / eff_norm, 0.0);
    Ok(HybridFactorization {
        analog,
        phase_index,
        digital,
        selected: stage.selected,
        residuals: stage.residuals,
        bits,
        power: w.power(),
        rank_deficient: stage.rank_deficient || deficient,
    })
}

/// `W_RF w_BB` as a power-P weight vector.
pub fn effective_weights(f: &HybridFactorization) -> Result<Weights> {
    let v = &f.analog * &f.digital;
    Weights::normalized(v.iter().copied().collect(), f.power)
}

impl HybridFactorization {
    pub fn num_rf(&self) -> usize {
        self.digital.len()
    }

    /// Plain-text form:
    ///
    /// ```text
    /// nfbeam-hybrid 1
    /// shape <N> <N_RF> <bits> <power>
    /// selected <i_1> ... <i_NRF>
    /// <N lines of N_RF phase indices>
    /// <N_RF lines: re im>
    /// ```
    pub fn write_text(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "nfbeam-hybrid 1")?;
        writeln!(
            out,
            "shape {} {} {} {}",
            self.analog.nrows(),
            self.num_rf(),
            self.bits,
            self.power
        )?;
        let sel: Vec<String> = self.selected.iter().map(|i| i.to_string()).collect();
        writeln!(out, "selected {}", sel.join(" "))?;
        for row in self.phase_index.row_iter() {
            let r: Vec<String> = row.iter().map(|k| k.to_string()).collect();
            writeln!(out, "{}", r.join(" "))?;
        }
        for c in self.digital.iter() {
            writeln!(out, "{} {}", c.re, c.im)?;
        }
        Ok(())
    }

    /// Reads [`HybridFactorization::write_text`] output. Residual history
    /// is not stored and comes back empty.
    pub fn read_text(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Parse("unexpected end of hybrid file".into()))
        };
        if next()?.trim() != "nfbeam-hybrid 1" {
            return Err(Error::Parse("unsupported hybrid header".into()));
        }
        let bad = |what: &str| Error::Parse(format!("bad {what}"));
        let shape = next()?;
        let f: Vec<&str> = shape.split_whitespace().collect();
        if f.len() != 5 || f[0] != "shape" {
            return Err(bad("shape line"));
        }
        let n: usize = f[1].parse().map_err(|_| bad("N"))?;
        let n_rf: usize = f[2].parse().map_err(|_| bad("N_RF"))?;
        let bits: u32 = f[3].parse().map_err(|_| bad("bits"))?;
        let power: f64 = f[4].parse().map_err(|_| bad("power"))?;
        let sel_line = next()?;
        let selected = sel_line
            .strip_prefix("selected")
            .ok_or_else(|| bad("selected line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("selected index")))
            .collect::<Result<Vec<usize>>>()?;
        if selected.len() != n_rf {
            return Err(bad("selected count"));
        }
        let mut idx = Vec::with_capacity(n * n_rf);
        for _ in 0..n {
            let row = next()?
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| bad("phase index")))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != n_rf || row.iter().any(|&k| k as u64 >= 1u64 << bits) {
                return Err(bad("phase row"));
            }
            idx.extend(row);
        }
        let phase_index = DMatrix::from_row_slice(n, n_rf, &idx);
        let mut digital = Vec::with_capacity(n_rf);
        for _ in 0..n_rf {
            let v = next()?
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad("digital coefficient")))
                .collect::<Result<Vec<_>>>()?;
            if v.len() != 2 {
                return Err(bad("digital coefficient"));
            }
            digital.push(Complex64::new(v[0], v[1]));
        }
        let amp = 1.0 / (n as f64).sqrt();
        let step = 2.0 * PI / (1u64 << bits) as f64;
        Ok(Self {
            analog: phase_index.map(|k| Complex64::from_polar(amp, step * k as f64)),
            phase_index,
            digital: DVector::from_vec(digital),
            selected,
            residuals: Vec::new(),
            bits,
            power,
            rank_deficient: false,
        })
    }
}
