//! Grayscale heatmaps.
//!
//! `grid[r][c]` becomes pixel row `r`, column `c` (row 0 at the top of the
//! image). Field maps pass rows in ascending y and columns in ascending x.
//! Linear scale maps `[min, max]` onto `[0, 255]` and a constant grid to
//! all zeros. dB scale maps `[floor, 0]` dB relative to the grid maximum
//! onto `[0, 255]`; zeros land on the floor.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat};

use crate::config::{check_scale, HeatmapScale};
use crate::error::{io_err, HarnessError, Result};

/// Row and column coordinates written to the sidecar CSV.
#[derive(Debug, Clone, Copy)]
pub struct Axes<'a> {
    pub rows: &'a [f64],
    pub row_name: &'a str,
    pub cols: &'a [f64],
    pub col_name: &'a str,
}

/// 8-bit levels for `grid` under `scale`.
pub fn to_levels(grid: &[Vec<f64>], scale: HeatmapScale) -> Result<Vec<u8>> {
    check_scale(scale).map_err(|e| HarnessError::Heatmap(e.to_string()))?;
    let width = grid.first().map_or(0, Vec::len);
    if width == 0 || grid.iter().any(|r| r.len() != width) {
        return Err(HarnessError::Heatmap("grid must be non-empty and rectangular".into()));
    }
    let values = grid.iter().flatten().copied();
    match scale {
        HeatmapScale::Linear => {
            if let Some(v) = values.clone().find(|v| !v.is_finite()) {
                return Err(HarnessError::Heatmap(format!("non-finite value {v}")));
            }
            let (lo, hi) = values.clone().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(v), h.max(v)));
            let span = hi - lo;
            Ok(values
                .map(|v| if span > 0.0 { (255.0 * (v - lo) / span).round() as u8 } else { 0 })
                .collect())
        }
        HeatmapScale::Db { floor } => {
            if let Some(v) = values.clone().find(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(HarnessError::Heatmap(format!("dB scale needs finite non-negative values, got {v}")));
            }
            let peak = values.clone().fold(0.0, f64::max);
            Ok(values
                .map(|v| {
                    let db = if peak > 0.0 && v > 0.0 { (10.0 * (v / peak).log10()).max(floor) } else { floor };
                    (255.0 * (db - floor) / -floor).round() as u8
                })
                .collect())
        }
    }
}

/// Writes `path` (PNG) and its sidecar `path.csv` of raw values. Returns
/// both paths.
pub fn export_heatmap(
    grid: &[Vec<f64>],
    path: &Path,
    scale: HeatmapScale,
    value_name: &str,
    axes: Option<Axes<'_>>,
) -> Result<[PathBuf; 2]> {
    let levels = to_levels(grid, scale)?;
    let (h, w) = (grid.len(), grid[0].len());
    if let Some(a) = axes {
        if a.rows.len() != h || a.cols.len() != w {
            return Err(HarnessError::Heatmap("axis lengths do not match the grid".into()));
        }
    }
    let img = GrayImage::from_raw(w as u32, h as u32, levels).expect("buffer sized from grid");
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|source| HarnessError::Image { path: path.to_path_buf(), source })?;

    let mut csv = String::new();
    match axes {
        Some(a) => writeln!(csv, "row,col,{},{},{value_name}", a.row_name, a.col_name),
        None => writeln!(csv, "row,col,{value_name}"),
    }
    .expect("string write");
    for (r, row) in grid.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            match axes {
                Some(a) => writeln!(csv, "{r},{c},{},{},{v}", a.rows[r], a.cols[c]),
                None => writeln!(csv, "{r},{c},{v}"),
            }
            .expect("string write");
        }
    }
    let sidecar = path.with_extension("csv");
    std::fs::write(&sidecar, csv).map_err(io_err(&sidecar))?;
    Ok([path.to_path_buf(), sidecar])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_floor_clamps() {
        let g = vec![vec![1.0, 0.1, 1e-9, 0.0]];
        let l = to_levels(&g, HeatmapScale::Db { floor: -60.0 }).unwrap();
        assert_eq!(l, vec![255, 213, 0, 0]);
        assert!(to_levels(&[vec![-1.0]], HeatmapScale::Db { floor: -60.0 }).is_err());
        assert!(to_levels(&[vec![1.0]], HeatmapScale::Db { floor: 10.0 }).is_err());
    }

    #[test]
    fn linear_rejects_nan_and_ragged() {
        assert!(to_levels(&[vec![f64::NAN]], HeatmapScale::Linear).is_err());
        assert!(to_levels(&[vec![1.0, 2.0], vec![1.0]], HeatmapScale::Linear).is_err());
        assert!(to_levels(&[], HeatmapScale::Linear).is_err());
        assert_eq!(to_levels(&[vec![-3.0, -1.0, 1.0]], HeatmapScale::Linear).unwrap(), vec![0, 128, 255]);
    }
}
