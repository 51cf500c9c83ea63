//! Association tests between anchor projections and raw features:
//! chi-squared independence on binned data, Kendall rank correlation,
//! Kruskal-Wallis by ranks, per-anchor feature ranking, and
//! false-discovery-rate thresholding under arbitrary dependence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::bin_projections;
use crate::data::{discretize_feature, DiscretizeRule, FeatureKind, FeatureSchema};
use crate::special::{chi_square_sf, normal_sf};

/// Expected cell counts under this trigger the classical small-sample
/// warning on chi-squared results.
pub const LOW_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Error)]
pub enum AssocError {
    #[error("table degenerates to fewer than 2x2 after pruning empty margins")]
    DegenerateTable,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {0} values")]
    TooFewValues(usize),
    #[error("all values tied; rank correlation undefined")]
    AllTied,
    #[error("need at least 2 nonempty groups, got {0}")]
    TooFewGroups(usize),
    #[error("false discovery rate must be in (0, 1), got {0}")]
    BadQ(f64),
    #[error("p-value {0} outside [0, 1]")]
    BadPValue(f64),
    #[error(transparent)]
    Anchor(#[from] crate::anchors::AnchorError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

/// Counts of feature level (rows) against projection bin (columns).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

impl ContingencyTable {
    pub fn from_codes(
        row_codes: &[usize],
        col_codes: &[usize],
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<ContingencyTable, AssocError> {
        if row_codes.len() != col_codes.len() {
            return Err(AssocError::LengthMismatch(row_codes.len(), col_codes.len()));
        }
        let mut counts = vec![vec![0u64; col_labels.len()]; row_labels.len()];
        for (&r, &c) in row_codes.iter().zip(col_codes) {
            counts[r][c] += 1;
        }
        Ok(ContingencyTable {
            counts,
            row_labels,
            col_labels,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Chi2Result {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Some expected count fell below the classical threshold of 5.
    pub low_expected: bool,
}

/// Pearson's chi-squared test of independence. Empty rows and columns are
/// pruned first so sparse projection bins do not inflate the degrees of
/// freedom.
pub fn chi_squared_independence(table: &ContingencyTable) -> Result<Chi2Result, AssocError> {
    let raw = &table.counts;
    let row_keep: Vec<usize> = (0..raw.len())
        .filter(|&r| raw[r].iter().any(|&v| v > 0))
        .collect();
    let ncols = raw.first().map_or(0, |r| r.len());
    let col_keep: Vec<usize> = (0..ncols)
        .filter(|&c| raw.iter().any(|row| row[c] > 0))
        .collect();
    if row_keep.len() < 2 || col_keep.len() < 2 {
        return Err(AssocError::DegenerateTable);
    }

    let rows = row_keep.len();
    let cols = col_keep.len();
    let mut row_sums = vec![0.0; rows];
    let mut col_sums = vec![0.0; cols];
    let mut total = 0.0;
    for (i, &r) in row_keep.iter().enumerate() {
        for (j, &c) in col_keep.iter().enumerate() {
            let v = raw[r][c] as f64;
            row_sums[i] += v;
            col_sums[j] += v;
            total += v;
        }
    }

    let mut statistic = 0.0;
    let mut low_expected = false;
    for (i, &r) in row_keep.iter().enumerate() {
        for (j, &c) in col_keep.iter().enumerate() {
            let expected = row_sums[i] * col_sums[j] / total;
            if expected < LOW_EXPECTED_COUNT {
                low_expected = true;
            }
            let observed = raw[r][c] as f64;
            statistic += (observed - expected).powi(2) / expected;
        }
    }
    let dof = (rows - 1) * (cols - 1);
    Ok(Chi2Result {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof as f64),
        low_expected,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KendallResult {
    pub tau: f64,
    pub z: f64,
    pub p_value: f64,
}

fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        groups.push(j - i);
        i = j;
    }
    groups
}

/// Kendall's rank correlation with tie corrections (the tau-b form) and a
/// two-sided p-value from the tie-adjusted normal approximation.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<KendallResult, AssocError> {
    if x.len() != y.len() {
        return Err(AssocError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(AssocError::TooFewValues(3));
    }

    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (x[i] - x[j]) * (y[i] - y[j]);
            if s > 0.0 {
                concordant += 1;
            } else if s < 0.0 {
                discordant += 1;
            }
        }
    }
    let s = (concordant - discordant) as f64;

    let tx = tie_groups(x);
    let ty = tie_groups(y);
    let nf = n as f64;
    let n0 = nf * (nf - 1.0) / 2.0;
    let n1: f64 = tx.iter().map(|&t| t as f64 * (t as f64 - 1.0) / 2.0).sum();
    let n2: f64 = ty.iter().map(|&t| t as f64 * (t as f64 - 1.0) / 2.0).sum();
    let denom = (n0 - n1) * (n0 - n2);
    if denom <= 0.0 {
        return Err(AssocError::AllTied);
    }
    let tau = s / denom.sqrt();

    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt: f64 = tx
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * (t - 1.0) * (2.0 * t + 5.0)
        })
        .sum();
    let vu: f64 = ty
        .iter()
        .map(|&u| {
            let u = u as f64;
            u * (u - 1.0) * (2.0 * u + 5.0)
        })
        .sum();
    let sum_t2: f64 = tx.iter().map(|&t| t as f64 * (t as f64 - 1.0)).sum();
    let sum_u2: f64 = ty.iter().map(|&u| u as f64 * (u as f64 - 1.0)).sum();
    let sum_t3: f64 = tx
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * (t - 1.0) * (t - 2.0)
        })
        .sum();
    let sum_u3: f64 = ty
        .iter()
        .map(|&u| {
            let u = u as f64;
            u * (u - 1.0) * (u - 2.0)
        })
        .sum();
    let v1 = sum_t2 * sum_u2 / (2.0 * nf * (nf - 1.0));
    let v2 = sum_t3 * sum_u3 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    let var = (v0 - vt - vu) / 18.0 + v1 + v2;

    let z = s / var.sqrt();
    let p_value = (2.0 * normal_sf(z.abs())).min(1.0);
    Ok(KendallResult { tau, z, p_value })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KruskalResult {
    pub h: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Midranks of the pooled sample, in input order.
fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1..=j
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Kruskal-Wallis by ranks with tie correction; empty groups are dropped.
/// A pooled sample with every value identical yields H = 0, p = 1.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalResult, AssocError> {
    let nonempty: Vec<&Vec<f64>> = groups.iter().filter(|g| !g.is_empty()).collect();
    if nonempty.len() < 2 {
        return Err(AssocError::TooFewGroups(nonempty.len()));
    }
    let n: usize = nonempty.iter().map(|g| g.len()).sum();
    if n < 3 {
        return Err(AssocError::TooFewValues(3));
    }

    let pooled: Vec<f64> = nonempty.iter().flat_map(|g| g.iter().cloned()).collect();
    let ranks = midranks(&pooled);
    let nf = n as f64;

    let mut h = 0.0;
    let mut offset = 0;
    for g in &nonempty {
        let r_sum: f64 = ranks[offset..offset + g.len()].iter().sum();
        h += r_sum * r_sum / g.len() as f64;
        offset += g.len();
    }
    h = 12.0 / (nf * (nf + 1.0)) * h - 3.0 * (nf + 1.0);

    let ties = tie_groups(&pooled);
    let tie_sum: f64 = ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let correction = 1.0 - tie_sum / (nf * nf * nf - nf);
    let dof = nonempty.len() - 1;
    if correction <= 0.0 {
        // Every pooled value identical: no rank information at all.
        return Ok(KruskalResult {
            h: 0.0,
            dof,
            p_value: 1.0,
        });
    }
    let h = h / correction;
    Ok(KruskalResult {
        h,
        dof,
        p_value: chi_square_sf(h, dof as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssocTest {
    Chi2,
    Kendall,
    Kruskal,
}

impl AssocTest {
    pub fn as_str(self) -> &'static str {
        match self {
            AssocTest::Chi2 => "chi2",
            AssocTest::Kendall => "kendall",
            AssocTest::Kruskal => "kruskal",
        }
    }
}

impl std::str::FromStr for AssocTest {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chi2" => Ok(AssocTest::Chi2),
            "kendall" => Ok(AssocTest::Kendall),
            "kruskal" => Ok(AssocTest::Kruskal),
            other => Err(format!("unknown association test {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureRankEntry {
    pub rank: usize,
    pub feature: String,
    pub statistic: f64,
    pub p_value: f64,
    /// Chi-squared only: set when some expected cell count was below 5.
    pub low_expected: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedFeature {
    pub feature: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub anchor: String,
    pub test: AssocTest,
    pub entries: Vec<FeatureRankEntry>,
    pub skipped: Vec<SkippedFeature>,
}

fn chi2_for_feature(
    values: &[f64],
    kind: FeatureKind,
    levels: &[String],
    bin_codes: &[usize],
    bin_labels: &[String],
) -> Result<Chi2Result, AssocError> {
    let (row_codes, row_labels) = match kind {
        FeatureKind::Continuous => {
            let d = discretize_feature(values, &DiscretizeRule::Quartiles)?;
            (d.bins, d.labels)
        }
        FeatureKind::Ordinal => {
            let d = discretize_feature(values, &DiscretizeRule::Identity)?;
            (d.bins, d.labels)
        }
        FeatureKind::Categorical => {
            let d = discretize_feature(values, &DiscretizeRule::Identity)?;
            // Identity compacts observed codes ascending; recover the level
            // name behind each compacted bin.
            let labels = (0..d.n_bins)
                .map(|b| {
                    let i = d.bins.iter().position(|&bin| bin == b).unwrap();
                    let code = values[i] as usize;
                    levels
                        .get(code)
                        .cloned()
                        .unwrap_or_else(|| format!("level_{code}"))
                })
                .collect();
            (d.bins, labels)
        }
        FeatureKind::Indicator => {
            // The indicator row plus its complement row.
            let codes = values.iter().map(|&v| if v == 1.0 { 0 } else { 1 }).collect();
            (codes, vec!["present".to_string(), "absent".to_string()])
        }
    };
    let table = ContingencyTable::from_codes(
        &row_codes,
        bin_codes,
        row_labels,
        bin_labels.to_vec(),
    )?;
    chi_squared_independence(&table)
}

/// Tests every schema feature against one anchor's projections over the
/// same rows and ranks them by ascending p-value (ties broken by feature
/// name). Features a test cannot handle are reported in `skipped` with the
/// reason instead of silently vanishing.
pub fn rank_features(
    schema: &FeatureSchema,
    feature_columns: &[Vec<f64>],
    projections: &[f64],
    anchor_label: &str,
    test: AssocTest,
    bins: usize,
) -> Result<FeatureRanking, AssocError> {
    if schema.features.len() != feature_columns.len() {
        return Err(AssocError::LengthMismatch(
            schema.features.len(),
            feature_columns.len(),
        ));
    }
    for col in feature_columns {
        if col.len() != projections.len() {
            return Err(AssocError::LengthMismatch(col.len(), projections.len()));
        }
    }

    // Binned projections serve the chi-squared path; computed once.
    let binning = if test == AssocTest::Chi2 {
        Some(bin_projections(projections, bins)?)
    } else {
        None
    };

    let mut scored: Vec<(String, f64, f64, bool)> = Vec::new();
    let mut skipped = Vec::new();
    for (spec, values) in schema.features.iter().zip(feature_columns) {
        let outcome: Result<(f64, f64, bool), String> = match test {
            AssocTest::Chi2 => {
                let b = binning.as_ref().unwrap();
                let labels: Vec<String> =
                    (0..b.m).map(|j| format!("bin_{j}")).collect();
                chi2_for_feature(values, spec.kind, &spec.levels, &b.assignments, &labels)
                    .map(|r| (r.statistic, r.p_value, r.low_expected))
                    .map_err(|e| e.to_string())
            }
            AssocTest::Kendall => match spec.kind {
                FeatureKind::Categorical => {
                    Err("categorical levels are unordered; rank correlation undefined".into())
                }
                _ => kendall_tau(values, projections)
                    .map(|r| (r.tau, r.p_value, false))
                    .map_err(|e| e.to_string()),
            },
            AssocTest::Kruskal => {
                let rule = match spec.kind {
                    FeatureKind::Continuous => DiscretizeRule::Quartiles,
                    _ => DiscretizeRule::Identity,
                };
                discretize_feature(values, &rule)
                    .map_err(|e| e.to_string())
                    .and_then(|d| {
                        let mut groups = vec![Vec::new(); d.n_bins];
                        for (&code, &p) in d.bins.iter().zip(projections) {
                            groups[code].push(p);
                        }
                        kruskal_wallis(&groups)
                            .map(|r| (r.h, r.p_value, false))
                            .map_err(|e| e.to_string())
                    })
            }
        };
        match outcome {
            Ok((statistic, p_value, low_expected)) => {
                scored.push((spec.name.clone(), statistic, p_value, low_expected));
            }
            Err(reason) => skipped.push(SkippedFeature {
                feature: spec.name.clone(),
                reason,
            }),
        }
    }

    scored.sort_by(|a, b| {
        a.2.partial_cmp(&b.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    let entries = scored
        .into_iter()
        .enumerate()
        .map(|(i, (feature, statistic, p_value, low_expected))| FeatureRankEntry {
            rank: i + 1,
            feature,
            statistic,
            p_value,
            low_expected,
        })
        .collect();

    Ok(FeatureRanking {
        anchor: anchor_label.to_string(),
        test,
        entries,
        skipped,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FdrResult {
    pub q: f64,
    /// Largest accepted p-value, when anything was accepted.
    pub threshold: Option<f64>,
    /// Indices into the input vector, ascending.
    pub accepted: Vec<usize>,
}

/// Benjamini-Yekutieli step-up control of the false discovery rate under
/// arbitrary dependence: the largest i with p_(i) <= i*q / (m * H_m) sets
/// the threshold, H_m being the m-th harmonic number.
pub fn fdr_threshold(p_values: &[f64], q: f64) -> Result<FdrResult, AssocError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(AssocError::BadQ(q));
    }
    if let Some(&bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(AssocError::BadPValue(bad));
    }
    let m = p_values.len();
    if m == 0 {
        return Ok(FdrResult {
            q,
            threshold: None,
            accepted: Vec::new(),
        });
    }
    let harmonic: f64 = (1..=m).map(|j| 1.0 / j as f64).sum();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).unwrap());

    let mut threshold = None;
    for i in (1..=m).rev() {
        let p = p_values[order[i - 1]];
        if p <= i as f64 * q / (m as f64 * harmonic) {
            threshold = Some(p);
            break;
        }
    }
    let accepted = match threshold {
        None => Vec::new(),
        Some(t) => {
            let mut idx: Vec<usize> =
                (0..m).filter(|&i| p_values[i] <= t).collect();
            idx.sort_unstable();
            idx
        }
    };
    Ok(FdrResult {
        q,
        threshold,
        accepted,
    })
}
