use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a cell can carry a foot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    Solid,
    /// Bottomless pit or gap: never provides support.
    Void,
}

/// Result of a terrain lookup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Height {
    Solid(f64),
    Void,
}

impl Height {
    pub fn solid(self) -> Option<f64> {
        match self {
            Height::Solid(h) => Some(h),
            Height::Void => None,
        }
    }

    pub fn is_void(self) -> bool {
        matches!(self, Height::Void)
    }
}

/// World-frame elevation grid.
///
/// Cell `(row, col)` is centered at `origin + (col, row) * resolution`, so rows
/// run along world y and columns along world x. A query point maps to the
/// nearest cell center; the field covers half a cell beyond the outermost
/// centers on every side.
#[derive(Clone, Debug, PartialEq)]
pub struct Heightfield {
    origin: [f64; 2],
    resolution: f64,
    rows: usize,
    cols: usize,
    heights: Vec<f64>,
    cell_kind: Vec<CellKind>,
}

impl Heightfield {
    pub fn new(
        origin: [f64; 2],
        resolution: f64,
        rows: usize,
        cols: usize,
        heights: Vec<f64>,
        cell_kind: Vec<CellKind>,
    ) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "heightfield needs at least one cell, got {rows}x{cols}"
            )));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("heightfield origin"));
        }
        let n = rows * cols;
        if heights.len() != n {
            return Err(Error::shape("heightfield heights", n, heights.len()));
        }
        if cell_kind.len() != n {
            return Err(Error::shape("heightfield cell kinds", n, cell_kind.len()));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(Error::Numeric("heightfield heights"));
        }
        let mut heights = heights;
        for (h, k) in heights.iter_mut().zip(&cell_kind) {
            if *k == CellKind::Void {
                *h = 0.0;
            }
        }
        Ok(Heightfield {
            origin,
            resolution,
            rows,
            cols,
            heights,
            cell_kind,
        })
    }

    /// A solid, level field at height 0.
    pub fn flat(origin: [f64; 2], resolution: f64, rows: usize, cols: usize) -> Result<Self> {
        Self::new(
            origin,
            resolution,
            rows,
            cols,
            vec![0.0; rows * cols],
            vec![CellKind::Solid; rows * cols],
        )
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn cell_kinds(&self) -> &[CellKind] {
        &self.cell_kind
    }

    /// World xy of a cell center.
    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin[0] + col as f64 * self.resolution,
            self.origin[1] + row as f64 * self.resolution,
        ]
    }

    pub fn cell(&self, row: usize, col: usize) -> Height {
        let i = row * self.cols + col;
        match self.cell_kind[i] {
            CellKind::Solid => Height::Solid(self.heights[i]),
            CellKind::Void => Height::Void,
        }
    }

    /// Inclusive world-frame bounds `([x_min, y_min], [x_max, y_max])`.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let half = 0.5 * self.resolution;
        (
            [self.origin[0] - half, self.origin[1] - half],
            [
                self.origin[0] + (self.cols as f64 - 0.5) * self.resolution,
                self.origin[1] + (self.rows as f64 - 0.5) * self.resolution,
            ],
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (lo, hi) = self.bounds();
        x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1]
    }

    /// Index `(row, col)` of the cell nearest to a world point.
    pub fn cell_index(&self, x: f64, y: f64) -> Result<(usize, usize)> {
        if !self.contains(x, y) {
            return Err(Error::OutOfBounds { x, y });
        }
        let col = ((x - self.origin[0]) / self.resolution + 0.5).floor().max(0.0) as usize;
        let row = ((y - self.origin[1]) / self.resolution + 0.5).floor().max(0.0) as usize;
        Ok((row.min(self.rows - 1), col.min(self.cols - 1)))
    }

    /// Nearest-cell terrain lookup. Never extrapolates past the field.
    pub fn height_at(&self, x: f64, y: f64) -> Result<Height> {
        let (row, col) = self.cell_index(x, y)?;
        Ok(self.cell(row, col))
    }

    /// Serializes to the `HF v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.heights.len() * 8 + 64);
        let _ = writeln!(
            out,
            "HF v1 {} {} {} {} {}",
            self.rows, self.cols, self.resolution, self.origin[0], self.origin[1]
        );
        for row in 0..self.rows {
            for col in 0..self.cols {
                if col > 0 {
                    out.push(' ');
                }
                match self.cell(row, col) {
                    Height::Solid(h) => {
                        let _ = write!(out, "{h}");
                    }
                    Height::Void => out.push_str("void"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty heightfield file".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse { line: 1, message };
        if fields.len() != 7 || fields[0] != "HF" || fields[1] != "v1" {
            return Err(parse_err(format!(
                "expected `HF v1 rows cols resolution origin_x origin_y`, got `{header}`"
            )));
        }
        let rows: usize = fields[2]
            .parse()
            .map_err(|e| parse_err(format!("rows: {e}")))?;
        let cols: usize = fields[3]
            .parse()
            .map_err(|e| parse_err(format!("cols: {e}")))?;
        let mut nums = [0.0f64; 3];
        for (slot, tok) in nums.iter_mut().zip(&fields[4..]) {
            *slot = tok
                .parse()
                .map_err(|e| parse_err(format!("`{tok}`: {e}")))?;
        }
        let [resolution, ox, oy] = nums;

        let n = rows * cols;
        let mut heights = Vec::with_capacity(n);
        let mut kinds = Vec::with_capacity(n);
        let mut last_line = 1;
        for (idx, line) in lines {
            last_line = idx + 1;
            for tok in line.split_whitespace() {
                if heights.len() == n {
                    return Err(Error::Parse {
                        line: last_line,
                        message: format!("more than {n} values"),
                    });
                }
                if tok == "void" {
                    heights.push(0.0);
                    kinds.push(CellKind::Void);
                } else {
                    let h: f64 = tok.parse().map_err(|e| Error::Parse {
                        line: last_line,
                        message: format!("`{tok}`: {e}"),
                    })?;
                    heights.push(h);
                    kinds.push(CellKind::Solid);
                }
            }
        }
        if heights.len() != n {
            return Err(Error::Parse {
                line: last_line,
                message: format!("expected {n} values, found {}", heights.len()),
            });
        }
        Heightfield::new([ox, oy], resolution, rows, cols, heights, kinds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Heightfield {
        // 3 rows x 4 cols, height = 10*row + col, one void cell.
        let heights = (0..12).map(|i| (10 * (i / 4) + i % 4) as f64).collect();
        let mut kinds = vec![CellKind::Solid; 12];
        kinds[5] = CellKind::Void;
        Heightfield::new([1.0, -1.0], 0.5, 3, 4, heights, kinds).unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Heightfield::flat([0.0, 0.0], 0.0, 2, 2).is_err());
        assert!(Heightfield::flat([0.0, 0.0], 0.1, 0, 2).is_err());
        let bad = Heightfield::new([0.0; 2], 0.1, 1, 2, vec![0.0, f64::NAN], vec![CellKind::Solid; 2]);
        assert!(matches!(bad, Err(Error::Numeric(_))));
        let short = Heightfield::new([0.0; 2], 0.1, 2, 2, vec![0.0; 3], vec![CellKind::Solid; 4]);
        assert!(matches!(short, Err(Error::Shape { .. })));
    }

    #[test]
    fn cell_center_lookup_is_identity() {
        let hf = ramp();
        for row in 0..3 {
            for col in 0..4 {
                let [x, y] = hf.cell_center(row, col);
                assert_eq!(hf.height_at(x, y).unwrap(), hf.cell(row, col));
            }
        }
        assert_eq!(hf.height_at(1.5, -0.5).unwrap(), Height::Void);
    }

    #[test]
    fn nearest_cell_rounding() {
        let hf = ramp();
        // Just short of the midpoint between columns 0 and 1.
        assert_eq!(hf.height_at(1.2499, -1.0).unwrap(), Height::Solid(0.0));
        assert_eq!(hf.height_at(1.2501, -1.0).unwrap(), Height::Solid(1.0));
        // Outer half-cell borders are inside.
        assert_eq!(hf.height_at(0.75, -1.25).unwrap(), Height::Solid(0.0));
        assert_eq!(hf.height_at(2.75, 0.25).unwrap(), Height::Solid(23.0));
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let hf = ramp();
        assert!(matches!(
            hf.height_at(0.7, -1.0),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(hf.height_at(1.0, 0.3).is_err());
        assert!(hf.height_at(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let hf = ramp();
        let text = hf.to_text();
        assert!(text.starts_with("HF v1 3 4 0.5 1 -1\n"));
        assert!(text.contains("void"));
        assert_eq!(Heightfield::from_text(&text).unwrap(), hf);
    }

    #[test]
    fn text_parse_errors_carry_lines() {
        let err = Heightfield::from_text("HF v2 1 1 0.1 0 0\n0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = Heightfield::from_text("HF v1 2 2 0.1 0 0\n0 0\n0 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = Heightfield::from_text("HF v1 2 2 0.1 0 0\n0 0\n0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}
