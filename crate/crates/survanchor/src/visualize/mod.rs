//! Figure construction and rendering. Every figure is computed into a
//! serializable data table (the JSON sidecar) and rendered from that table
//! alone, so saved sidecars re-render to byte-identical SVG.

pub mod figures;
pub mod pca;
pub mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use figures::{
    average_projection_heatmap, bin_sample_table, pca_scatter, raw_feature_heatmap,
    scatter_feature_vs_projection, survival_heatmap, violin_data, BinSampleTable, PcaScatter,
    ScatterPlot, ViolinPlot,
};

/// Version stamp carried by every figure sidecar.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum VisError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 rows, got {0}")]
    TooFewRows(usize),
    #[error("need at least 2 dimensions, got {0}")]
    TooFewDimensions(usize),
    #[error("rows have inconsistent widths")]
    RaggedRows,
    #[error("group {0:?} has no rows")]
    EmptyGroup(String),
    #[error("bad time grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Anchor(#[from] crate::anchors::AnchorError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorMap {
    /// Light-to-dark ramp for probabilities.
    Sequential,
    /// Signed blue-white-red ramp centered on zero.
    Diverging,
}

/// A complete heatmap: values, labels, and styling hints. Cells are either
/// a value inside `[value_min, value_max]` or an explicit `None` marker —
/// never a silent default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatmapSpec {
    pub schema_version: u32,
    pub title: String,
    pub color_map: ColorMap,
    pub value_min: f64,
    pub value_max: f64,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
    /// Indices `r` such that a heavy separator is drawn below row `r`
    /// (feature-block boundaries).
    pub row_separators: Vec<usize>,
    /// Render row 0 at the bottom (time axes grow upward).
    pub flip_rows: bool,
}

impl HeatmapSpec {
    pub fn validate(&self) -> Result<(), VisError> {
        if self.cells.len() != self.row_labels.len() {
            return Err(VisError::LengthMismatch(
                self.cells.len(),
                self.row_labels.len(),
            ));
        }
        for row in &self.cells {
            if row.len() != self.col_labels.len() {
                return Err(VisError::LengthMismatch(row.len(), self.col_labels.len()));
            }
            for cell in row.iter().flatten() {
                if !cell.is_finite()
                    || *cell < self.value_min - 1e-9
                    || *cell > self.value_max + 1e-9
                {
                    return Err(VisError::BadGrid(format!(
                        "cell value {cell} outside [{}, {}]",
                        self.value_min, self.value_max
                    )));
                }
            }
        }
        Ok(())
    }

    /// Per-block column sums (blocks delimited by `row_separators`).
    /// A column whose block contains an empty marker sums to `None`.
    pub fn block_column_sums(&self) -> Vec<Vec<Option<f64>>> {
        let mut bounds = vec![0];
        for &r in &self.row_separators {
            bounds.push(r + 1);
        }
        bounds.push(self.cells.len());
        bounds.dedup();
        let mut out = Vec::new();
        for w in bounds.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if lo >= hi {
                continue;
            }
            let sums = (0..self.col_labels.len())
                .map(|c| {
                    let mut total = 0.0;
                    for row in &self.cells[lo..hi] {
                        match row[c] {
                            Some(v) => total += v,
                            None => return None,
                        }
                    }
                    Some(total)
                })
                .collect();
            out.push(sums);
        }
        out
    }

    /// True when every column is nonincreasing in ascending row order —
    /// the defining property of a survival heatmap.
    pub fn columns_nonincreasing(&self) -> bool {
        for c in 0..self.col_labels.len() {
            let mut prev: Option<f64> = None;
            for row in &self.cells {
                if let Some(v) = row[c] {
                    if let Some(p) = prev {
                        if v > p + 1e-12 {
                            return false;
                        }
                    }
                    prev = Some(v);
                }
            }
        }
        true
    }

    fn color_of(&self, v: f64) -> String {
        let span = self.value_max - self.value_min;
        let t = if span > 0.0 {
            (v - self.value_min) / span
        } else {
            0.5
        };
        match self.color_map {
            ColorMap::Sequential => svg::sequential_color(t),
            ColorMap::Diverging => svg::diverging_color(2.0 * t - 1.0),
        }
    }

    pub fn to_svg(&self) -> String {
        let nrows = self.cells.len();
        let ncols = self.col_labels.len();
        let cell_h = (420.0 / nrows.max(1) as f64).clamp(6.0, 22.0);
        let cell_w = (520.0 / ncols.max(1) as f64).clamp(16.0, 44.0);
        let left = 180.0;
        let top = 40.0;
        let bottom = 50.0;
        let right = 20.0;
        let width = left + ncols as f64 * cell_w + right;
        let height = top + nrows as f64 * cell_h + bottom;
        let mut s = svg::Svg::new(width, height);
        s.text(width / 2.0, 22.0, 14.0, svg::TextAnchor::Middle, &self.title);

        let row_y = |i: usize| -> f64 {
            if self.flip_rows {
                top + (nrows - 1 - i) as f64 * cell_h
            } else {
                top + i as f64 * cell_h
            }
        };

        for (i, row) in self.cells.iter().enumerate() {
            let y = row_y(i);
            for (j, cell) in row.iter().enumerate() {
                let fill = match cell {
                    Some(v) => self.color_of(*v),
                    None => svg::EMPTY_FILL.to_string(),
                };
                s.rect(left + j as f64 * cell_w, y, cell_w, cell_h, &fill);
            }
        }

        // Row labels; thin out dense axes so text stays legible.
        let label_every = (nrows / 20).max(1);
        for (i, label) in self.row_labels.iter().enumerate() {
            if i % label_every != 0 {
                continue;
            }
            s.text(
                left - 6.0,
                row_y(i) + cell_h / 2.0 + 3.5,
                10.0,
                svg::TextAnchor::End,
                label,
            );
        }
        for (j, label) in self.col_labels.iter().enumerate() {
            s.text(
                left + j as f64 * cell_w + cell_w / 2.0,
                top + nrows as f64 * cell_h + 16.0,
                10.0,
                svg::TextAnchor::Middle,
                label,
            );
        }

        // Feature-block separators.
        for &r in &self.row_separators {
            let y = if self.flip_rows { row_y(r) } else { row_y(r) + cell_h };
            s.line(left, y, left + ncols as f64 * cell_w, y, "#000000", 2.0);
        }
        // Outer frame.
        s.line(left, top, left + ncols as f64 * cell_w, top, "#000000", 1.0);
        let base = top + nrows as f64 * cell_h;
        s.line(left, base, left + ncols as f64 * cell_w, base, "#000000", 1.0);
        s.line(left, top, left, base, "#000000", 1.0);
        s.line(
            left + ncols as f64 * cell_w,
            top,
            left + ncols as f64 * cell_w,
            base,
            "#000000",
            1.0,
        );
        s.finish()
    }
}
