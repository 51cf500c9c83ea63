//! The figure families: violin k-selection, raw-feature and survival
//! probability heatmaps, feature-vs-projection scatter, per-bin sample
//! tables, average-projection heatmaps, and the 2D PCA baseline.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::pca::principal_axes;
use super::svg::{self, Svg, TextAnchor};
use super::{ColorMap, HeatmapSpec, VisError, SCHEMA_VERSION};
use crate::anchors::ProjectionBinning;
use crate::clusterlib::KSelectionReport;
use crate::coxnet::derive_subseed;
use crate::coxnet::EmbeddingBundle;
use crate::data::{
    discretize_feature, quantile_type7, DiscretizeRule, FeatureKind, FeatureSchema,
};
use crate::survstats::SurvivalCurve;

/// P-values are floored here before taking log10 so degenerate zeros stay
/// plottable.
pub const P_FLOOR: f64 = 1e-300;
/// Display grid resolution for survival heatmaps.
pub const SURVIVAL_GRID_POINTS: usize = 50;
const KDE_GRID_POINTS: usize = 64;

// ---------------------------------------------------------------------------
// Violin plot of pairwise separation p-values per candidate k.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViolinEntry {
    pub k: usize,
    /// log10 of each pairwise p-value, floored at `P_FLOOR`.
    pub points_log10: Vec<f64>,
    /// Kernel-density silhouette; empty for degenerate (single-point or
    /// zero-bandwidth) entries, which render as markers instead.
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViolinPlot {
    pub schema_version: u32,
    pub title: String,
    pub threshold_log10: f64,
    pub selected: Option<usize>,
    pub entries: Vec<ViolinEntry>,
}

fn sample_std(points: &[f64]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mean: f64 = points.iter().sum::<f64>() / n as f64;
    let var: f64 = points.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    var.sqrt()
}

/// Silverman's rule of thumb: 0.9 min(sd, IQR/1.34) n^(-1/5).
fn silverman_bandwidth(points: &[f64]) -> f64 {
    let std = sample_std(points);
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_type7(&sorted, 0.75) - quantile_type7(&sorted, 0.25);
    let a = if iqr > 0.0 {
        std.min(iqr / 1.34)
    } else {
        std
    };
    0.9 * a * (points.len() as f64).powf(-0.2)
}

fn gaussian_kde(points: &[f64], h: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (points.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&g| {
            norm * points
                .iter()
                .map(|&p| (-0.5 * ((g - p) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect()
}

/// Density silhouettes of the per-k pairwise separation p-values.
pub fn violin_data(report: &KSelectionReport, title: &str) -> ViolinPlot {
    let mut entries = Vec::new();
    for e in &report.entries {
        let points_log10: Vec<f64> = e
            .pairwise_p
            .iter()
            .map(|&p| p.max(P_FLOOR).log10())
            .collect();
        let h = silverman_bandwidth(&points_log10);
        let (grid, density) = if points_log10.len() < 2 || h <= 0.0 {
            (Vec::new(), Vec::new())
        } else {
            let lo = points_log10.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * h;
            let hi = points_log10
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
                + 3.0 * h;
            let grid: Vec<f64> = (0..KDE_GRID_POINTS)
                .map(|i| lo + (hi - lo) * i as f64 / (KDE_GRID_POINTS - 1) as f64)
                .collect();
            let density = gaussian_kde(&points_log10, h, &grid);
            (grid, density)
        };
        entries.push(ViolinEntry {
            k: e.k,
            points_log10,
            grid,
            density,
        });
    }
    ViolinPlot {
        schema_version: SCHEMA_VERSION,
        title: title.to_string(),
        threshold_log10: report.threshold.log10(),
        selected: report.selected,
        entries,
    }
}

impl ViolinPlot {
    pub fn to_svg(&self) -> String {
        let slots = self.entries.len().max(1);
        let slot_w = 70.0;
        let left = 70.0;
        let top = 40.0;
        let plot_h = 320.0;
        let bottom = 50.0;
        let width = left + slots as f64 * slot_w + 30.0;
        let height = top + plot_h + bottom;

        // Vertical range over every point plus the threshold line.
        let mut lo = self.threshold_log10;
        let mut hi = self.threshold_log10;
        for e in &self.entries {
            for &p in &e.points_log10 {
                lo = lo.min(p);
                hi = hi.max(p);
            }
            for &g in &e.grid {
                lo = lo.min(g);
                hi = hi.max(g);
            }
        }
        let pad = 0.05 * (hi - lo).max(1.0);
        lo -= pad;
        hi += pad;
        let y_of = |v: f64| top + (hi - v) / (hi - lo) * plot_h;

        let mut s = Svg::new(width, height);
        s.text(width / 2.0, 22.0, 14.0, TextAnchor::Middle, &self.title);
        s.vtext(
            18.0,
            top + plot_h / 2.0,
            12.0,
            TextAnchor::Middle,
            "log10 p-value",
        );

        // Axis ticks on integer log10 levels.
        let tick_lo = lo.ceil() as i64;
        let tick_hi = hi.floor() as i64;
        let step = (((tick_hi - tick_lo) / 8).max(1)) as usize;
        let mut t = tick_lo;
        while t <= tick_hi {
            let y = y_of(t as f64);
            s.line(left - 4.0, y, left, y, "#222222", 1.0);
            s.text(left - 7.0, y + 3.5, 10.0, TextAnchor::End, &format!("{t}"));
            t += step as i64;
        }

        s.dashed_line(
            left,
            y_of(self.threshold_log10),
            left + slots as f64 * slot_w,
            y_of(self.threshold_log10),
            "#b2182b",
            1.0,
        );

        for (i, e) in self.entries.iter().enumerate() {
            let cx = left + (i as f64 + 0.5) * slot_w;
            if !e.density.is_empty() {
                let dmax = e.density.iter().cloned().fold(0.0, f64::max).max(1e-300);
                let half = slot_w * 0.42;
                let mut outline: Vec<(f64, f64)> = e
                    .grid
                    .iter()
                    .zip(&e.density)
                    .map(|(&g, &d)| (cx - half * d / dmax, y_of(g)))
                    .collect();
                let back: Vec<(f64, f64)> = e
                    .grid
                    .iter()
                    .zip(&e.density)
                    .rev()
                    .map(|(&g, &d)| (cx + half * d / dmax, y_of(g)))
                    .collect();
                outline.extend(back);
                s.polygon(&outline, "#9ecae1", "#4292c6");
            }
            for &p in &e.points_log10 {
                s.circle(cx, y_of(p), 2.0, "#08306b");
            }
            let label = match self.selected {
                Some(sel) if sel == e.k => format!("k={}*", e.k),
                _ => format!("k={}", e.k),
            };
            s.text(
                cx,
                top + plot_h + 20.0,
                11.0,
                TextAnchor::Middle,
                &label,
            );
        }
        s.line(left, top + plot_h, left + slots as f64 * slot_w, top + plot_h, "#222222", 1.0);
        s.line(left, top, left, top + plot_h, "#222222", 1.0);
        s.finish()
    }
}

// ---------------------------------------------------------------------------
// Raw-feature probability heatmap.

/// Fraction of each projection bin's rows at each feature level, one row
/// block per feature. Empty bins show as explicit empty columns.
pub fn raw_feature_heatmap(
    binning: &ProjectionBinning,
    schema: &FeatureSchema,
    feature_columns: &[Vec<f64>],
    title: &str,
) -> Result<HeatmapSpec, VisError> {
    if schema.features.len() != feature_columns.len() {
        return Err(VisError::LengthMismatch(
            schema.features.len(),
            feature_columns.len(),
        ));
    }
    let n = binning.assignments.len();
    for col in feature_columns {
        if col.len() != n {
            return Err(VisError::LengthMismatch(col.len(), n));
        }
    }

    let mut row_labels = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    let mut row_separators = Vec::new();

    for (spec, values) in schema.features.iter().zip(feature_columns) {
        let rule = match spec.kind {
            FeatureKind::Continuous => DiscretizeRule::Quartiles,
            _ => DiscretizeRule::Identity,
        };
        let d = discretize_feature(values, &rule)?;
        // Categorical identity labels are numeric codes; swap in the
        // schema's level names where they exist.
        let labels: Vec<String> = if spec.kind == FeatureKind::Categorical {
            (0..d.n_bins)
                .map(|b| {
                    let i = d.bins.iter().position(|&bin| bin == b).unwrap();
                    let code = values[i] as usize;
                    spec.levels
                        .get(code)
                        .cloned()
                        .unwrap_or_else(|| format!("level_{code}"))
                })
                .collect()
        } else {
            d.labels.clone()
        };

        for (level, label) in labels.iter().enumerate() {
            let mut row = Vec::with_capacity(binning.m);
            for members in &binning.members {
                if members.is_empty() {
                    row.push(None);
                } else {
                    let count = members.iter().filter(|&&r| d.bins[r] == level).count();
                    row.push(Some(count as f64 / members.len() as f64));
                }
            }
            row_labels.push(format!("{} = {}", spec.name, label));
            cells.push(row);
        }
        row_separators.push(cells.len() - 1);
    }
    row_separators.pop(); // no separator after the final block

    let col_labels = binning
        .midpoints
        .iter()
        .map(|m| format!("{m:.3}"))
        .collect();
    let spec = HeatmapSpec {
        schema_version: SCHEMA_VERSION,
        title: title.to_string(),
        color_map: ColorMap::Sequential,
        value_min: 0.0,
        value_max: 1.0,
        row_labels,
        col_labels,
        cells,
        row_separators,
        flip_rows: false,
    };
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Survival probability heatmap.

/// Per-bin average survival evaluated on an even display grid between the
/// given time bounds (usually the training min/max observed times). Bins
/// without a curve become explicit empty columns.
pub fn survival_heatmap(
    curves: &[Option<SurvivalCurve>],
    t_lo: f64,
    t_hi: f64,
    points: usize,
    title: &str,
) -> Result<HeatmapSpec, VisError> {
    if curves.is_empty() {
        return Err(VisError::EmptyInput);
    }
    if !(t_hi > t_lo) || !t_lo.is_finite() || !t_hi.is_finite() {
        return Err(VisError::BadGrid(format!("[{t_lo}, {t_hi}]")));
    }
    if points < 2 {
        return Err(VisError::BadGrid(format!("{points} grid points")));
    }

    let grid: Vec<f64> = (0..points)
        .map(|i| t_lo + (t_hi - t_lo) * i as f64 / (points - 1) as f64)
        .collect();
    let mut cells = Vec::with_capacity(points);
    for &t in &grid {
        let row: Vec<Option<f64>> = curves
            .iter()
            .map(|c| c.as_ref().map(|curve| curve.value_at(t)))
            .collect();
        cells.push(row);
    }
    let row_labels = grid.iter().map(|t| format!("{t:.2}")).collect();
    let col_labels = (0..curves.len()).map(|j| format!("bin {j}")).collect();
    let spec = HeatmapSpec {
        schema_version: SCHEMA_VERSION,
        title: title.to_string(),
        color_map: ColorMap::Sequential,
        value_min: 0.0,
        value_max: 1.0,
        row_labels,
        col_labels,
        cells,
        row_separators: Vec::new(),
        flip_rows: true,
    };
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Feature-vs-projection scatter.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatterPlot {
    pub schema_version: u32,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Running median of y over an x-sorted window of n/10 points.
    pub running_median: Vec<(f64, f64)>,
}

fn padded_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span > 0.0 {
        (lo - 0.02 * span, hi + 0.02 * span)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn median_of(window: &[f64]) -> f64 {
    let mut w = window.to_vec();
    w.sort_by(f64::total_cmp);
    let n = w.len();
    if n % 2 == 1 {
        w[n / 2]
    } else {
        0.5 * (w[n / 2 - 1] + w[n / 2])
    }
}

/// Scatter of a raw feature against anchor projections, with a running
/// median to make distribution shifts visible.
pub fn scatter_feature_vs_projection(
    projections: &[f64],
    values: &[f64],
    x_label: &str,
    y_label: &str,
    title: &str,
) -> Result<ScatterPlot, VisError> {
    if projections.len() != values.len() {
        return Err(VisError::LengthMismatch(projections.len(), values.len()));
    }
    if projections.is_empty() {
        return Err(VisError::EmptyInput);
    }
    let n = projections.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        projections[a]
            .partial_cmp(&projections[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let window = (n / 10).max(1);
    let mut running_median = Vec::with_capacity(n);
    let sorted_y: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    for (pos, &i) in order.iter().enumerate() {
        let lo = pos.saturating_sub(window / 2);
        let hi = (lo + window).min(n);
        let lo = hi.saturating_sub(window);
        running_median.push((projections[i], median_of(&sorted_y[lo..hi])));
    }
    Ok(ScatterPlot {
        schema_version: SCHEMA_VERSION,
        title: title.to_string(),
        x_label: x_label.to_string(),
        y_label: y_label.to_string(),
        x: projections.to_vec(),
        y: values.to_vec(),
        x_range: padded_range(projections),
        y_range: padded_range(values),
        running_median,
    })
}

impl ScatterPlot {
    pub fn to_svg(&self) -> String {
        let left = 70.0;
        let top = 40.0;
        let plot_w = 460.0;
        let plot_h = 320.0;
        let width = left + plot_w + 30.0;
        let height = top + plot_h + 60.0;
        let x_of =
            |v: f64| left + (v - self.x_range.0) / (self.x_range.1 - self.x_range.0) * plot_w;
        let y_of =
            |v: f64| top + (self.y_range.1 - v) / (self.y_range.1 - self.y_range.0) * plot_h;

        let mut s = Svg::new(width, height);
        s.text(width / 2.0, 22.0, 14.0, TextAnchor::Middle, &self.title);
        for (&x, &y) in self.x.iter().zip(&self.y) {
            s.circle(x_of(x), y_of(y), 2.0, "#4292c6");
        }
        if self.running_median.len() > 1 {
            let pts: Vec<(f64, f64)> = self
                .running_median
                .iter()
                .map(|&(x, y)| (x_of(x), y_of(y)))
                .collect();
            s.polyline(&pts, "#b2182b", 1.5);
        }
        s.line(left, top + plot_h, left + plot_w, top + plot_h, "#222222", 1.0);
        s.line(left, top, left, top + plot_h, "#222222", 1.0);
        // Range annotations at the axis extremes.
        s.text(
            left,
            top + plot_h + 16.0,
            10.0,
            TextAnchor::Middle,
            &format!("{:.2}", self.x_range.0),
        );
        s.text(
            left + plot_w,
            top + plot_h + 16.0,
            10.0,
            TextAnchor::Middle,
            &format!("{:.2}", self.x_range.1),
        );
        s.text(
            left - 6.0,
            top + plot_h + 3.0,
            10.0,
            TextAnchor::End,
            &format!("{:.2}", self.y_range.0),
        );
        s.text(
            left - 6.0,
            top + 3.0,
            10.0,
            TextAnchor::End,
            &format!("{:.2}", self.y_range.1),
        );
        s.text(
            left + plot_w / 2.0,
            top + plot_h + 36.0,
            12.0,
            TextAnchor::Middle,
            &self.x_label,
        );
        s.vtext(18.0, top + plot_h / 2.0, 12.0, TextAnchor::Middle, &self.y_label);
        s.finish()
    }
}

// ---------------------------------------------------------------------------
// Per-bin random sample table.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinSample {
    pub bin: usize,
    pub midpoint: f64,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinSampleTable {
    pub schema_version: u32,
    pub title: String,
    pub sample_size: usize,
    pub seed: u64,
    pub bins: Vec<BinSample>,
}

/// Up to `s` row ids sampled without replacement from each projection bin,
/// reproducible from the seed.
pub fn bin_sample_table(
    binning: &ProjectionBinning,
    ids: &[String],
    s: usize,
    seed: u64,
    title: &str,
) -> Result<BinSampleTable, VisError> {
    if ids.len() != binning.assignments.len() {
        return Err(VisError::LengthMismatch(ids.len(), binning.assignments.len()));
    }
    if s == 0 {
        return Err(VisError::EmptyInput);
    }
    let mut bins = Vec::with_capacity(binning.m);
    for (j, members) in binning.members.iter().enumerate() {
        let mut pool: Vec<usize> = members.clone();
        let take = s.min(pool.len());
        let mut rng = ChaCha20Rng::seed_from_u64(derive_subseed(seed, j as u64));
        // Partial Fisher-Yates: the first `take` slots become the sample.
        for i in 0..take {
            let pick = i + (rand::Rng::random_range(&mut rng, 0..(pool.len() - i) as u64)) as usize;
            pool.swap(i, pick);
        }
        bins.push(BinSample {
            bin: j,
            midpoint: binning.midpoints[j],
            ids: pool[..take].iter().map(|&r| ids[r].clone()).collect(),
        });
    }
    Ok(BinSampleTable {
        schema_version: SCHEMA_VERSION,
        title: title.to_string(),
        sample_size: s,
        seed,
        bins,
    })
}

impl BinSampleTable {
    pub fn to_svg(&self) -> String {
        let col_w = 110.0;
        let row_h = 18.0;
        let left = 20.0;
        let top = 50.0;
        let max_rows = self.bins.iter().map(|b| b.ids.len()).max().unwrap_or(0);
        let width = left + self.bins.len() as f64 * col_w + 20.0;
        let height = top + (max_rows + 2) as f64 * row_h + 20.0;
        let mut s = Svg::new(width, height);
        s.text(width / 2.0, 22.0, 14.0, TextAnchor::Middle, &self.title);
        for (j, bin) in self.bins.iter().enumerate() {
            let x = left + j as f64 * col_w + col_w / 2.0;
            s.text(
                x,
                top,
                11.0,
                TextAnchor::Middle,
                &format!("bin {} ({:.3})", bin.bin, bin.midpoint),
            );
            s.line(
                left + j as f64 * col_w + 4.0,
                top + 6.0,
                left + (j + 1) as f64 * col_w - 4.0,
                top + 6.0,
                "#222222",
                1.0,
            );
            for (r, id) in bin.ids.iter().enumerate() {
                s.text(x, top + (r + 1) as f64 * row_h + 6.0, 10.0, TextAnchor::Middle, id);
            }
            if bin.ids.is_empty() {
                s.text(x, top + row_h + 6.0, 10.0, TextAnchor::Middle, "(empty)");
            }
        }
        s.finish()
    }
}

// ---------------------------------------------------------------------------
// Average projection heatmap.

/// Mean projection of each labeled group onto each anchor, on a signed
/// color scale.
pub fn average_projection_heatmap(
    group_names: &[String],
    labels: &[usize],
    anchor_names: &[String],
    projections: &[Vec<f64>],
    title: &str,
) -> Result<HeatmapSpec, VisError> {
    if anchor_names.len() != projections.len() {
        return Err(VisError::LengthMismatch(anchor_names.len(), projections.len()));
    }
    if projections.is_empty() {
        return Err(VisError::EmptyInput);
    }
    for p in projections {
        if p.len() != labels.len() {
            return Err(VisError::LengthMismatch(p.len(), labels.len()));
        }
    }
    let mut cells = Vec::with_capacity(group_names.len());
    for (g, name) in group_names.iter().enumerate() {
        let rows: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == g)
            .map(|(i, _)| i)
            .collect();
        if rows.is_empty() {
            return Err(VisError::EmptyGroup(name.clone()));
        }
        let row: Vec<Option<f64>> = projections
            .iter()
            .map(|p| {
                let mean = rows.iter().map(|&i| p[i]).sum::<f64>() / rows.len() as f64;
                Some(mean)
            })
            .collect();
        cells.push(row);
    }
    let spec = HeatmapSpec {
        schema_version: SCHEMA_VERSION,
        title: title.to_string(),
        color_map: ColorMap::Diverging,
        value_min: -1.0,
        value_max: 1.0,
        row_labels: group_names.to_vec(),
        col_labels: anchor_names.to_vec(),
        cells,
        row_separators: Vec::new(),
        flip_rows: false,
    };
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// 2D PCA baseline.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaScatter {
    pub schema_version: u32,
    pub title: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Per-point color values (for example median predicted survival).
    pub colors: Vec<f64>,
    pub color_label: String,
    pub eigenvalues: Vec<f64>,
    /// Fewer than two nonzero-variance directions were available; `ys`
    /// (or both coordinates) are zero-filled.
    pub rank_deficient: bool,
}

/// Project a bundle's embeddings onto their top two principal axes.
pub fn pca_scatter(
    bundle: &EmbeddingBundle,
    colors: &[f64],
    color_label: &str,
    title: &str,
) -> Result<PcaScatter, VisError> {
    if colors.len() != bundle.n {
        return Err(VisError::LengthMismatch(colors.len(), bundle.n));
    }
    let pca = principal_axes(&bundle.embeddings, 2)?;
    let mut xs = Vec::with_capacity(bundle.n);
    let mut ys = Vec::with_capacity(bundle.n);
    for row in &bundle.embeddings {
        let coords = pca.project(row);
        xs.push(coords.first().copied().unwrap_or(0.0));
        ys.push(coords.get(1).copied().unwrap_or(0.0));
    }
    Ok(PcaScatter {
        schema_version: SCHEMA_VERSION,
        title: title.to_string(),
        xs,
        ys,
        colors: colors.to_vec(),
        color_label: color_label.to_string(),
        eigenvalues: pca.eigenvalues.clone(),
        rank_deficient: pca.axes.len() < 2,
    })
}

impl PcaScatter {
    pub fn to_svg(&self) -> String {
        let left = 60.0;
        let top = 40.0;
        let plot = 380.0;
        let width = left + plot + 40.0;
        let height = top + plot + 60.0;
        let (x_lo, x_hi) = padded_range(&self.xs);
        let (y_lo, y_hi) = padded_range(&self.ys);
        let c_lo = self.colors.iter().cloned().fold(f64::INFINITY, f64::min);
        let c_hi = self.colors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let x_of = |v: f64| left + (v - x_lo) / (x_hi - x_lo) * plot;
        let y_of = |v: f64| top + (y_hi - v) / (y_hi - y_lo) * plot;

        let mut s = Svg::new(width, height);
        s.text(width / 2.0, 22.0, 14.0, TextAnchor::Middle, &self.title);
        for i in 0..self.xs.len() {
            let t = if c_hi > c_lo {
                (self.colors[i] - c_lo) / (c_hi - c_lo)
            } else {
                0.5
            };
            s.circle(x_of(self.xs[i]), y_of(self.ys[i]), 2.5, &svg::sequential_color(t));
        }
        s.line(left, top + plot, left + plot, top + plot, "#222222", 1.0);
        s.line(left, top, left, top + plot, "#222222", 1.0);
        let x_label = match self.eigenvalues.first() {
            Some(l) => format!("pc1 (var {l:.4})"),
            None => "pc1".to_string(),
        };
        let y_label = match self.eigenvalues.get(1) {
            Some(l) => format!("pc2 (var {l:.4})"),
            None => "pc2 (degenerate)".to_string(),
        };
        s.text(
            left + plot / 2.0,
            top + plot + 30.0,
            12.0,
            TextAnchor::Middle,
            &x_label,
        );
        s.vtext(16.0, top + plot / 2.0, 12.0, TextAnchor::Middle, &y_label);
        s.text(
            left + plot / 2.0,
            top + plot + 48.0,
            10.0,
            TextAnchor::Middle,
            &format!("color: {} [{:.3}, {:.3}]", self.color_label, c_lo, c_hi),
        );
        s.finish()
    }
}
