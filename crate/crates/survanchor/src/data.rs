//! Dataset ingestion and preparation: CSV loading against a declared feature
//! schema, seeded role splits, feature discretization, train-split
//! standardization, and the synthetic survival data generator used by tests
//! and the `synth` subcommand.

use std::io::Read;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}, column {column:?}: cannot parse {value:?}")]
    UnparseableCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: negative time {value}")]
    NegativeTime { row: usize, value: f64 },
    #[error("row {row}: event flag {value:?} is not 0 or 1")]
    BadEventFlag { row: usize, value: String },
    #[error("dataset contains no rows")]
    EmptyDataset,
    #[error("bad split fractions: {0}")]
    BadFractions(String),
    #[error("feature is degenerate: {0}")]
    DegenerateFeature(String),
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("bad synthetic spec: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Ordinal,
    Categorical,
    Indicator,
}

impl std::str::FromStr for FeatureKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "continuous" => Ok(FeatureKind::Continuous),
            "ordinal" => Ok(FeatureKind::Ordinal),
            "categorical" => Ok(FeatureKind::Categorical),
            "indicator" => Ok(FeatureKind::Indicator),
            other => Err(format!("unknown feature kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Categorical level strings in code order (empty for other kinds).
    #[serde(default)]
    pub levels: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Right-censored survival dataset with row-major features.
#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    pub schema: FeatureSchema,
    pub ids: Vec<String>,
    pub features: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub times: Vec<f64>,
    pub events: Vec<u8>,
}

impl SurvivalDataset {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.features[i * self.dim + j]).collect()
    }
}

/// Column bindings for `load_csv`: which columns hold time/event/id and the
/// declared kind of each feature column.
#[derive(Debug, Clone)]
pub struct CsvSpec {
    pub time_column: String,
    pub event_column: String,
    pub id_column: Option<String>,
    pub features: Vec<(String, FeatureKind)>,
}

/// Loads a CSV with named columns against the declared schema. Missing
/// values are rejected; categorical levels get stable integer codes in
/// lexicographic order of the level string.
pub fn load_csv(path: &Path, spec: &CsvSpec) -> Result<SurvivalDataset, DataError> {
    let mut raw = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut raw))
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
    load_csv_str(&raw, spec)
}

fn load_csv_str(raw: &str, spec: &CsvSpec) -> Result<SurvivalDataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());
    let headers = reader.headers()?.clone();
    let col_idx = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };

    let time_idx = col_idx(&spec.time_column)?;
    let event_idx = col_idx(&spec.event_column)?;
    let id_idx = match &spec.id_column {
        Some(c) => Some(col_idx(c)?),
        None => None,
    };
    let feat_idx: Vec<usize> = spec
        .features
        .iter()
        .map(|(name, _)| col_idx(name))
        .collect::<Result<_, _>>()?;

    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;
    if records.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let n = records.len();
    let dim = spec.features.len();

    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for (row, rec) in records.iter().enumerate() {
        let cell = |idx: usize| rec.get(idx).unwrap_or("");
        let t: f64 = cell(time_idx).parse().map_err(|_| DataError::UnparseableCell {
            row,
            column: spec.time_column.clone(),
            value: cell(time_idx).to_string(),
        })?;
        if !t.is_finite() {
            return Err(DataError::UnparseableCell {
                row,
                column: spec.time_column.clone(),
                value: cell(time_idx).to_string(),
            });
        }
        if t < 0.0 {
            return Err(DataError::NegativeTime { row, value: t });
        }
        times.push(t);
        let ev_raw = cell(event_idx);
        let ev = match ev_raw.parse::<f64>() {
            Ok(v) if v == 0.0 => 0u8,
            Ok(v) if v == 1.0 => 1u8,
            _ => {
                return Err(DataError::BadEventFlag {
                    row,
                    value: ev_raw.to_string(),
                })
            }
        };
        events.push(ev);
        ids.push(match id_idx {
            Some(idx) => cell(idx).to_string(),
            None => row.to_string(),
        });
    }

    // Categorical columns need a full pass to fix the level -> code map
    // before values can be encoded.
    let mut level_maps: Vec<Vec<String>> = vec![Vec::new(); dim];
    for (j, (name, kind)) in spec.features.iter().enumerate() {
        if *kind != FeatureKind::Categorical {
            continue;
        }
        let mut levels: Vec<String> = Vec::new();
        for (row, rec) in records.iter().enumerate() {
            let v = rec.get(feat_idx[j]).unwrap_or("");
            if v.is_empty() {
                return Err(DataError::UnparseableCell {
                    row,
                    column: name.clone(),
                    value: String::new(),
                });
            }
            if !levels.iter().any(|l| l == v) {
                levels.push(v.to_string());
            }
        }
        levels.sort();
        level_maps[j] = levels;
    }

    let mut features = vec![0.0f64; n * dim];
    for (row, rec) in records.iter().enumerate() {
        for (j, (name, kind)) in spec.features.iter().enumerate() {
            let raw_cell = rec.get(feat_idx[j]).unwrap_or("");
            let bad = || DataError::UnparseableCell {
                row,
                column: name.clone(),
                value: raw_cell.to_string(),
            };
            let value = match kind {
                FeatureKind::Categorical => level_maps[j]
                    .iter()
                    .position(|l| l == raw_cell)
                    .ok_or_else(bad)? as f64,
                FeatureKind::Indicator => match raw_cell.parse::<f64>() {
                    Ok(v) if v == 0.0 || v == 1.0 => v,
                    _ => return Err(bad()),
                },
                _ => {
                    let v: f64 = raw_cell.parse().map_err(|_| bad())?;
                    if !v.is_finite() {
                        return Err(bad());
                    }
                    v
                }
            };
            features[row * dim + j] = value;
        }
    }

    let schema = FeatureSchema {
        features: spec
            .features
            .iter()
            .enumerate()
            .map(|(j, (name, kind))| FeatureSpec {
                name: name.clone(),
                kind: *kind,
                levels: level_maps[j].clone(),
            })
            .collect(),
    };
    Ok(SurvivalDataset {
        schema,
        ids,
        features,
        n,
        dim,
        times,
        events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRole {
    Train,
    Validation,
    AnchorEstimation,
    Visualization,
}

pub const SPLIT_ROLES: [SplitRole; 4] = [
    SplitRole::Train,
    SplitRole::Validation,
    SplitRole::AnchorEstimation,
    SplitRole::Visualization,
];

/// Seeded assignment of every row to exactly one pipeline role.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub fractions: [f64; 4],
    pub counts: [usize; 4],
    pub assignments: Vec<SplitRole>,
}

impl SplitPlan {
    pub fn indices(&self, role: SplitRole) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == role)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Splits `n` rows into the four roles by seeded shuffle + contiguous
/// slicing. Counts are floor(fraction * n) with the remainder distributed
/// by largest fractional part (ties by role order), so each count is within
/// one row of fraction * n.
pub fn make_splits(n: usize, fractions: [f64; 4], seed: u64) -> Result<SplitPlan, DataError> {
    if fractions.iter().any(|f| !(*f > 0.0)) {
        return Err(DataError::BadFractions(format!(
            "all fractions must be positive, got {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(DataError::BadFractions(format!(
            "fractions sum to {total}, expected 1"
        )));
    }
    if n == 0 {
        return Err(DataError::EmptyDataset);
    }

    let mut counts = [0usize; 4];
    let mut fracs: Vec<(usize, f64)> = Vec::with_capacity(4);
    let mut assigned = 0usize;
    for (k, f) in fractions.iter().enumerate() {
        let exact = f * n as f64;
        counts[k] = exact.floor() as usize;
        assigned += counts[k];
        fracs.push((k, exact - exact.floor()));
    }
    fracs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for (k, _) in fracs.iter().take(n - assigned) {
        counts[*k] += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut assignments = vec![SplitRole::Train; n];
    let mut cursor = 0;
    for (role, count) in SPLIT_ROLES.iter().zip(counts) {
        for &idx in &order[cursor..cursor + count] {
            assignments[idx] = *role;
        }
        cursor += count;
    }
    Ok(SplitPlan {
        seed,
        fractions,
        counts,
        assignments,
    })
}

/// Linear-interpolation sample quantile (R type 7) of ascending `sorted`.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiscretizeRule {
    /// Empirical quartiles; requires at least 4 distinct values.
    Quartiles,
    /// Explicit ascending cut points.
    CutPoints(Vec<f64>),
    /// Values are already small non-negative integer codes.
    Identity,
}

#[derive(Debug, Clone)]
pub struct Discretized {
    pub bins: Vec<usize>,
    pub n_bins: usize,
    pub labels: Vec<String>,
}

/// Maps each value to a bin index. For cut-point rules a value equal to a cut
/// goes to the lower bin (right-closed intervals); identity compacts the
/// observed codes in ascending order.
pub fn discretize_feature(values: &[f64], rule: &DiscretizeRule) -> Result<Discretized, DataError> {
    if values.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(DataError::NonFiniteValue(i));
    }
    match rule {
        DiscretizeRule::Identity => {
            let mut distinct: Vec<f64> = values.to_vec();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let bins = values
                .iter()
                .map(|v| distinct.iter().position(|d| d == v).unwrap())
                .collect();
            let labels = distinct.iter().map(|d| format_level(*d)).collect();
            Ok(Discretized {
                bins,
                n_bins: distinct.len(),
                labels,
            })
        }
        DiscretizeRule::CutPoints(cuts) => {
            let mut cuts = cuts.clone();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            if cuts.is_empty() {
                return Err(DataError::DegenerateFeature("no cut points".into()));
            }
            Ok(apply_cuts(values, &cuts))
        }
        DiscretizeRule::Quartiles => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mut distinct = sorted.clone();
            distinct.dedup();
            if distinct.len() < 4 {
                return Err(DataError::DegenerateFeature(format!(
                    "{} distinct values, need at least 4 for quartiles",
                    distinct.len()
                )));
            }
            let mut cuts = vec![
                quantile_type7(&sorted, 0.25),
                quantile_type7(&sorted, 0.5),
                quantile_type7(&sorted, 0.75),
            ];
            cuts.dedup();
            Ok(apply_cuts(values, &cuts))
        }
    }
}

fn apply_cuts(values: &[f64], cuts: &[f64]) -> Discretized {
    let bins: Vec<usize> = values
        .iter()
        .map(|v| cuts.iter().filter(|c| **c < *v).count())
        .collect();
    let n_bins = cuts.len() + 1;
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut labels = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let label = if b == 0 {
            format!("[{}, {}]", format_level(lo), format_level(cuts[0]))
        } else if b == n_bins - 1 {
            format!("({}, {}]", format_level(cuts[b - 1]), format_level(hi))
        } else {
            format!("({}, {}]", format_level(cuts[b - 1]), format_level(cuts[b]))
        };
        labels.push(label);
    }
    Discretized {
        bins,
        n_bins,
        labels,
    }
}

fn format_level(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.4}")
    }
}

/// Per-column affine standardization fitted on a row subset; non-continuous
/// columns pass through unchanged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn fit(dataset: &SurvivalDataset, rows: &[usize]) -> Self {
        let dim = dataset.dim;
        let mut means = vec![0.0; dim];
        let mut stds = vec![1.0; dim];
        if rows.is_empty() {
            return Standardizer { means, stds };
        }
        for (j, spec) in dataset.schema.features.iter().enumerate() {
            if spec.kind != FeatureKind::Continuous {
                continue;
            }
            let vals: Vec<f64> = rows.iter().map(|&i| dataset.features[i * dim + j]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            means[j] = mean;
            stds[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
        Standardizer { means, stds }
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - self.means[j]) / self.stds[j];
        }
    }

    pub fn transform(&self, features: &[f64], dim: usize) -> Vec<f64> {
        let mut out = features.to_vec();
        for chunk in out.chunks_mut(dim) {
            self.apply_row(chunk);
        }
        out
    }
}

/// Synthetic survival data: per-class isotropic feature clusters centered on
/// a hypersphere, Gamma event times with per-class means, and uniform
/// censoring drawn between the minimum event time and a quantile horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub dim: usize,
    pub class_means: Vec<f64>,
    pub time_variance: f64,
    pub center_radius: f64,
    pub feature_spread: f64,
    pub censor_quantile: f64,
    pub seed: u64,
}

/// The default per-class Gamma means; with uniform censoring to the 90th
/// percentile these yield roughly half the subjects censored.
pub const DEFAULT_CLASS_MEANS: [f64; 10] =
    [11.25, 2.25, 5.25, 5.0, 4.75, 8.0, 2.0, 11.0, 1.75, 10.75];

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 1000,
            dim: 10,
            class_means: DEFAULT_CLASS_MEANS.to_vec(),
            time_variance: 1e-3,
            center_radius: 5.0,
            feature_spread: 1.0,
            censor_quantile: 0.9,
            seed: 0,
        }
    }
}

/// Generates a synthetic dataset; returns it together with the true class
/// label of every row.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(SurvivalDataset, Vec<usize>), DataError> {
    if spec.n == 0 {
        return Err(DataError::BadSpec("n must be positive".into()));
    }
    if spec.dim == 0 {
        return Err(DataError::BadSpec("dim must be positive".into()));
    }
    if spec.class_means.is_empty() {
        return Err(DataError::BadSpec("class_means must be nonempty".into()));
    }
    if spec.class_means.iter().any(|m| !(*m > 0.0)) {
        return Err(DataError::BadSpec("class means must be positive".into()));
    }
    if spec.class_means.len() > spec.dim {
        return Err(DataError::BadSpec(format!(
            "{} classes exceed feature dimension {}",
            spec.class_means.len(),
            spec.dim
        )));
    }
    if !(spec.time_variance > 0.0) {
        return Err(DataError::BadSpec("time_variance must be positive".into()));
    }
    if !(spec.censor_quantile > 0.0 && spec.censor_quantile <= 1.0) {
        return Err(DataError::BadSpec(
            "censor_quantile must be in (0, 1]".into(),
        ));
    }
    if !(spec.center_radius > 0.0) || !(spec.feature_spread >= 0.0) {
        return Err(DataError::BadSpec(
            "center_radius must be positive and feature_spread non-negative".into(),
        ));
    }

    let g = spec.class_means.len();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    // Orthonormal class directions via Gram-Schmidt on Gaussian draws, so
    // distinct classes sit a fixed chord apart regardless of seed.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(g);
    while centers.len() < g {
        let mut v: Vec<f64> = (0..spec.dim).map(|_| normal.sample(&mut rng)).collect();
        for c in &centers {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= dot * ci;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        for vi in &mut v {
            *vi /= norm;
        }
        centers.push(v);
    }

    let labels: Vec<usize> = (0..spec.n).map(|i| i % g).collect();

    let mut features = vec![0.0f64; spec.n * spec.dim];
    for (i, &class) in labels.iter().enumerate() {
        for j in 0..spec.dim {
            features[i * spec.dim + j] = spec.center_radius * centers[class][j]
                + spec.feature_spread * normal.sample(&mut rng);
        }
    }

    let mut event_times = Vec::with_capacity(spec.n);
    for &class in &labels {
        let mean = spec.class_means[class];
        let shape = mean * mean / spec.time_variance;
        let scale = spec.time_variance / mean;
        let gamma = Gamma::new(shape, scale)
            .map_err(|e| DataError::BadSpec(format!("gamma parameters: {e}")))?;
        event_times.push(gamma.sample(&mut rng));
    }

    // Censoring horizons depend on the full event-time sample, so censoring
    // is drawn only after every event time exists.
    let mut sorted = event_times.clone();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0];
    let hi = quantile_type7(&sorted, spec.censor_quantile);
    let mut times = Vec::with_capacity(spec.n);
    let mut events = Vec::with_capacity(spec.n);
    for &t in &event_times {
        let c = if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        };
        if t <= c {
            times.push(t);
            events.push(1u8);
        } else {
            times.push(c);
            events.push(0u8);
        }
    }

    let schema = FeatureSchema {
        features: (0..spec.dim)
            .map(|j| FeatureSpec {
                name: format!("f{j}"),
                kind: FeatureKind::Continuous,
                levels: Vec::new(),
            })
            .collect(),
    };
    let ids = (0..spec.n).map(|i| i.to_string()).collect();
    Ok((
        SurvivalDataset {
            schema,
            ids,
            features,
            n: spec.n,
            dim: spec.dim,
            times,
            events,
        },
        labels,
    ))
}

/// The JSON manifest written next to generated or loaded datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n: usize,
    pub dim: usize,
    pub schema: FeatureSchema,
    pub split_counts: [usize; 4],
    pub seed: u64,
    /// Fraction of rows with event flag 0.
    pub censor_rate: f64,
}
