//! Anchor directions in embedding space: cluster- and concept-based
//! estimation, cosine projections, equal-width projection binning, per-bin
//! curve averaging, top-fraction median-survival ranking, and a diagnostic
//! for projections that clump at the extremes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::survstats::{median_from_curve, MedianSurvival, SurvivalCurve};

/// Anchor vectors shorter than this are rejected: their cosine is noise.
pub const ZERO_ANCHOR_TOL: f64 = 1e-10;
/// Centered embeddings shorter than this cannot be projected.
pub const DEGENERATE_EMBEDDING_TOL: f64 = 1e-12;
/// Default width of the "near the extremes" region in the clumping check.
pub const DEFAULT_EDGE_TOL: f64 = 0.01;
pub const DEFAULT_BIN_COUNT: usize = 7;
pub const DEFAULT_TOP_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum AnchorError {
    #[error("empty embedding set")]
    EmptyBundle,
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("anchor direction has near-zero norm {0}")]
    ZeroAnchor(f64),
    #[error("concept set is empty")]
    EmptyConcept,
    #[error("row {0}: centered embedding is numerically zero")]
    DegenerateEmbedding(usize),
    #[error("all projection values are equal; cannot bin")]
    DegenerateProjections,
    #[error("bin count must be at least 1, got {0}")]
    BadBinCount(usize),
    #[error("survival curves do not share a common time grid")]
    GridMismatch,
    #[error("top fraction must be in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("top projection set is empty")]
    EmptyTopSet,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Stats(#[from] crate::survstats::StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AnchorProvenance {
    Cluster { index: usize },
    Concept { name: String },
}

/// A direction in embedding space plus the center of mass it was measured
/// from; projections center rows by the same point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorDirection {
    pub direction: Vec<f64>,
    pub center: Vec<f64>,
    pub provenance: AnchorProvenance,
}

impl AnchorDirection {
    pub fn label(&self) -> String {
        match &self.provenance {
            AnchorProvenance::Cluster { index } => format!("cluster_{index}"),
            AnchorProvenance::Concept { name } => format!("concept_{name}"),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Mean of the embedding rows.
pub fn center_of_mass(embeddings: &[Vec<f64>]) -> Result<Vec<f64>, AnchorError> {
    if embeddings.is_empty() {
        return Err(AnchorError::EmptyBundle);
    }
    let dim = embeddings[0].len();
    let mut center = vec![0.0; dim];
    for row in embeddings {
        if row.len() != dim {
            return Err(AnchorError::DimensionMismatch(row.len(), dim));
        }
        for (c, v) in center.iter_mut().zip(row) {
            *c += v;
        }
    }
    let n = embeddings.len() as f64;
    for c in center.iter_mut() {
        *c /= n;
    }
    Ok(center)
}

fn direction_from_mean(
    mean: Vec<f64>,
    center: &[f64],
    provenance: AnchorProvenance,
) -> Result<AnchorDirection, AnchorError> {
    let direction: Vec<f64> = mean.iter().zip(center).map(|(m, c)| m - c).collect();
    let n = norm(&direction);
    if n < ZERO_ANCHOR_TOL {
        return Err(AnchorError::ZeroAnchor(n));
    }
    Ok(AnchorDirection {
        direction,
        center: center.to_vec(),
        provenance,
    })
}

/// Anchor of one hard cluster: the member mean, centered.
pub fn cluster_anchor(
    embeddings: &[Vec<f64>],
    assignments: &[usize],
    cluster: usize,
    center: &[f64],
) -> Result<AnchorDirection, AnchorError> {
    if embeddings.len() != assignments.len() {
        return Err(AnchorError::LengthMismatch(
            embeddings.len(),
            assignments.len(),
        ));
    }
    let dim = center.len();
    let mut mean = vec![0.0; dim];
    let mut count = 0usize;
    for (row, &a) in embeddings.iter().zip(assignments) {
        if a != cluster {
            continue;
        }
        if row.len() != dim {
            return Err(AnchorError::DimensionMismatch(row.len(), dim));
        }
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
        count += 1;
    }
    if count == 0 {
        return Err(AnchorError::EmptyCluster(cluster));
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }
    direction_from_mean(mean, center, AnchorProvenance::Cluster { index: cluster })
}

/// Anchor from user-chosen concept examples: their embedding mean,
/// centered by the anchor-estimation center of mass.
pub fn concept_anchor(
    name: &str,
    concept_embeddings: &[Vec<f64>],
    center: &[f64],
) -> Result<AnchorDirection, AnchorError> {
    if concept_embeddings.is_empty() {
        return Err(AnchorError::EmptyConcept);
    }
    let mean = center_of_mass(concept_embeddings)?;
    if mean.len() != center.len() {
        return Err(AnchorError::DimensionMismatch(mean.len(), center.len()));
    }
    direction_from_mean(
        mean,
        center,
        AnchorProvenance::Concept {
            name: name.to_string(),
        },
    )
}

/// Concept rows are supposed to be independent of the visualization rows;
/// shared ids are the one overlap this tool can detect. Returns the shared
/// ids (sorted) so callers can warn.
pub fn concept_overlap(concept_ids: &[String], visualization_ids: &[String]) -> Vec<String> {
    let mut viz: Vec<&String> = visualization_ids.iter().collect();
    viz.sort();
    let mut shared: Vec<String> = concept_ids
        .iter()
        .filter(|id| viz.binary_search(id).is_ok())
        .cloned()
        .collect();
    shared.sort();
    shared.dedup();
    shared
}

/// Cosine similarity between one centered embedding and the anchor.
pub fn project_one(embedding: &[f64], anchor: &AnchorDirection) -> Result<f64, AnchorError> {
    if embedding.len() != anchor.center.len() {
        return Err(AnchorError::DimensionMismatch(
            embedding.len(),
            anchor.center.len(),
        ));
    }
    let centered: Vec<f64> = embedding
        .iter()
        .zip(&anchor.center)
        .map(|(e, c)| e - c)
        .collect();
    let cn = norm(&centered);
    if cn < DEGENERATE_EMBEDDING_TOL {
        return Err(AnchorError::DegenerateEmbedding(0));
    }
    let an = norm(&anchor.direction);
    if an < ZERO_ANCHOR_TOL {
        return Err(AnchorError::ZeroAnchor(an));
    }
    Ok((dot(&centered, &anchor.direction) / (cn * an)).clamp(-1.0, 1.0))
}

/// Cosine projections of every row; fails on the first degenerate row.
pub fn project(embeddings: &[Vec<f64>], anchor: &AnchorDirection) -> Result<Vec<f64>, AnchorError> {
    embeddings
        .iter()
        .enumerate()
        .map(|(i, row)| {
            project_one(row, anchor).map_err(|e| match e {
                AnchorError::DegenerateEmbedding(_) => AnchorError::DegenerateEmbedding(i),
                other => other,
            })
        })
        .collect()
}

/// Equal-width bins over the observed projection range. Intervals are
/// half-open with the last closed, so the bins tile `[min, max]` exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionBinning {
    pub m: usize,
    /// `m + 1` edges; first is the observed minimum, last the maximum.
    pub edges: Vec<f64>,
    pub midpoints: Vec<f64>,
    pub assignments: Vec<usize>,
    pub members: Vec<Vec<usize>>,
}

impl ProjectionBinning {
    pub fn counts(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.len()).collect()
    }
}

pub fn bin_projections(projections: &[f64], m: usize) -> Result<ProjectionBinning, AnchorError> {
    if m == 0 {
        return Err(AnchorError::BadBinCount(m));
    }
    if projections.is_empty() {
        return Err(AnchorError::EmptyBundle);
    }
    let lo = projections.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = projections.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(AnchorError::DegenerateProjections);
    }
    let mut edges: Vec<f64> = (0..=m)
        .map(|j| lo + (hi - lo) * j as f64 / m as f64)
        .collect();
    edges[m] = hi; // exact upper edge regardless of rounding
    let midpoints = (0..m).map(|j| (edges[j] + edges[j + 1]) / 2.0).collect();

    let interior = &edges[1..m];
    let mut assignments = Vec::with_capacity(projections.len());
    let mut members = vec![Vec::new(); m];
    for (i, &p) in projections.iter().enumerate() {
        let bin = interior.partition_point(|e| *e <= p);
        assignments.push(bin);
        members[bin].push(i);
    }

    Ok(ProjectionBinning {
        m,
        edges,
        midpoints,
        assignments,
        members,
    })
}

/// Average of the per-row predicted curves inside each bin; empty bins stay
/// explicitly empty. All curves must share one time grid.
pub fn bin_survival(
    binning: &ProjectionBinning,
    curves: &[SurvivalCurve],
) -> Result<Vec<Option<SurvivalCurve>>, AnchorError> {
    if curves.len() != binning.assignments.len() {
        return Err(AnchorError::LengthMismatch(
            curves.len(),
            binning.assignments.len(),
        ));
    }
    let grid = &curves[0].times;
    for c in curves {
        if &c.times != grid {
            return Err(AnchorError::GridMismatch);
        }
    }
    let mut out = Vec::with_capacity(binning.m);
    for members in &binning.members {
        if members.is_empty() {
            out.push(None);
            continue;
        }
        let mut values = vec![0.0; grid.len()];
        for &i in members {
            for (v, cv) in values.iter_mut().zip(&curves[i].values) {
                *v += cv;
            }
        }
        let count = members.len() as f64;
        for v in values.iter_mut() {
            *v /= count;
        }
        out.push(Some(SurvivalCurve {
            times: grid.clone(),
            values,
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorRankEntry {
    pub label: String,
    pub provenance: AnchorProvenance,
    /// Projection threshold: the value at 1-based position
    /// ceil((1 - alpha) * n) of the sorted projections.
    pub threshold: f64,
    pub top_count: usize,
    pub median: MedianSurvival,
    pub average_curve: SurvivalCurve,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorRanking {
    pub alpha: f64,
    pub entries: Vec<AnchorRankEntry>,
}

/// Ranks anchors by the median of the average predicted curve over each
/// anchor's top-alpha projection rows, ascending; curves that never reach
/// one half sort last.
pub fn rank_anchors(
    anchors: &[AnchorDirection],
    projections: &[Vec<f64>],
    curves: &[SurvivalCurve],
    alpha: f64,
) -> Result<AnchorRanking, AnchorError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AnchorError::BadAlpha(alpha));
    }
    if anchors.len() != projections.len() {
        return Err(AnchorError::LengthMismatch(anchors.len(), projections.len()));
    }
    if curves.is_empty() {
        return Err(AnchorError::EmptyTopSet);
    }
    let grid = &curves[0].times;
    for c in curves {
        if &c.times != grid {
            return Err(AnchorError::GridMismatch);
        }
    }

    let mut entries = Vec::with_capacity(anchors.len());
    for (anchor, p) in anchors.iter().zip(projections) {
        if p.len() != curves.len() {
            return Err(AnchorError::LengthMismatch(p.len(), curves.len()));
        }
        if p.is_empty() {
            return Err(AnchorError::EmptyTopSet);
        }
        let mut sorted = p.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut idx = ((1.0 - alpha) * sorted.len() as f64).ceil() as usize;
        if idx == 0 {
            idx = 1;
        }
        let threshold = sorted[idx - 1];
        let top: Vec<usize> = (0..p.len()).filter(|&i| p[i] >= threshold).collect();
        if top.is_empty() {
            return Err(AnchorError::EmptyTopSet);
        }
        let mut values = vec![0.0; grid.len()];
        for &i in &top {
            for (v, cv) in values.iter_mut().zip(&curves[i].values) {
                *v += cv;
            }
        }
        for v in values.iter_mut() {
            *v /= top.len() as f64;
        }
        let average_curve = SurvivalCurve {
            times: grid.clone(),
            values,
        };
        let median = median_from_curve(&average_curve)?;
        entries.push(AnchorRankEntry {
            label: anchor.label(),
            provenance: anchor.provenance.clone(),
            threshold,
            top_count: top.len(),
            median,
            average_curve,
        });
    }

    entries.sort_by(|a, b| {
        let key = |e: &AnchorRankEntry| match e.median {
            MedianSurvival::Time(t) => (0u8, t),
            MedianSurvival::BeyondMaxTime => (1u8, f64::INFINITY),
        };
        let (ka, ta) = key(a);
        let (kb, tb) = key(b);
        ka.cmp(&kb)
            .then(ta.partial_cmp(&tb).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.label.cmp(&b.label))
    });

    Ok(AnchorRanking { alpha, entries })
}

/// Fraction of projections within `edge_tol` of the extremes; high values
/// mean the embedding carries its information in vector magnitudes the
/// cosine cannot see.
pub fn clumping_diagnostic(projections: &[f64], edge_tol: f64) -> f64 {
    if projections.is_empty() {
        return 0.0;
    }
    let cut = 1.0 - edge_tol;
    let near = projections.iter().filter(|p| p.abs() > cut).count();
    near as f64 / projections.len() as f64
}
