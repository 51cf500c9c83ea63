//! Mixture-model clustering of embeddings: von Mises-Fisher mixtures for
//! unit-norm embeddings, diagonal Gaussian mixtures otherwise, and a
//! survival-separation sweep that picks the number of clusters.

pub mod gaussian;
pub mod vmf;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coxnet::derive_subseed;
use crate::survstats::logrank_test;
use gaussian::GaussianComponent;
use vmf::VmfComponent;

/// Components with less posterior mass than this are considered empty and
/// rescued by re-seeding them from the worst-explained point.
pub const WEIGHT_FLOOR: f64 = 1e-8;
/// Rescues allowed per fit before giving up.
pub const MAX_RESCUES: usize = 3;
/// Hard-assignment refinement rounds applied to sampled seeds before EM.
pub const LLOYD_REFINE_ITERS: usize = 25;
/// Independent seedings per fit; the best final likelihood wins. EM from a
/// single seeding settles into split/merge local optima often enough to
/// matter, and restarts shrink that probability geometrically.
pub const EM_RESTARTS: u64 = 4;

/// Runs `fit_once` with derived per-restart seeds and keeps the highest
/// mean log-likelihood. Errors surface only when every restart fails.
fn best_of_restarts<F>(opts: &EmOptions, mut fit_once: F) -> Result<MixtureFit, ClusterError>
where
    F: FnMut(&EmOptions) -> Result<MixtureFit, ClusterError>,
{
    let mut best: Option<MixtureFit> = None;
    let mut last_err = None;
    for restart in 0..EM_RESTARTS {
        let sub = EmOptions {
            seed: derive_subseed(opts.seed, 0x7e57_0000 + restart),
            ..*opts
        };
        match fit_once(&sub) {
            Ok(fit) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| fit.mean_log_likelihood > b.mean_log_likelihood);
                if better {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(fit) => Ok(fit),
        None => Err(last_err.expect("at least one restart ran")),
    }
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("empty input")]
    EmptyInput,
    #[error("bad component count {k} for {n} points")]
    BadK { k: usize, n: usize },
    #[error("dimension mismatch: row {row} has {got}, expected {expected}")]
    DimensionMismatch {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("row {0} contains a non-finite value")]
    NonFinite(usize),
    #[error("row {row} has norm {norm}, not unit length")]
    NotUnitNorm { row: usize, norm: f64 },
    #[error("spherical mixtures need dimension >= 2, got {0}")]
    BadDimension(usize),
    #[error("components kept collapsing after {0} rescues")]
    EmptyClusterCollapse(usize),
    #[error("k sweep needs k_min <= k_max, got {k_min}..{k_max}")]
    BadSweepRange { k_min: usize, k_max: usize },
    #[error(transparent)]
    Stats(#[from] crate::survstats::StatsError),
}

/// EM stopping rule and seeding.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EmOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iter: 500,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureKind {
    Vmf,
    Gaussian,
}

impl std::str::FromStr for MixtureKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vmf" => Ok(MixtureKind::Vmf),
            "gaussian" => Ok(MixtureKind::Gaussian),
            other => Err(format!("unknown mixture kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family", content = "components")]
pub enum MixtureModel {
    Vmf(Vec<VmfComponent>),
    Gaussian(Vec<GaussianComponent>),
}

impl MixtureModel {
    pub fn k(&self) -> usize {
        match self {
            MixtureModel::Vmf(c) => c.len(),
            MixtureModel::Gaussian(c) => c.len(),
        }
    }
}

/// A fitted mixture plus per-point posteriors and the likelihood history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureFit {
    pub model: MixtureModel,
    pub responsibilities: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub mean_log_likelihood: f64,
    pub ll_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn validate_rows(data: &[Vec<f64>]) -> Result<usize, ClusterError> {
    if data.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    let dim = data[0].len();
    if dim == 0 {
        return Err(ClusterError::EmptyInput);
    }
    for (i, row) in data.iter().enumerate() {
        if row.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                row: i,
                got: row.len(),
                expected: dim,
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite(i));
        }
    }
    Ok(dim)
}

/// Draws an index proportionally to `weights`; uniform if all weights
/// vanish (e.g. duplicated points during seeding).
pub(crate) fn sample_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return rng.random_range(0..weights.len());
    }
    let u = rng.random_range(0.0..total);
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Greedy spread-out seeding: first center uniform, later centers drawn
/// with probability proportional to squared distance to the nearest chosen
/// center.
pub(crate) fn kmeanspp_indices<R: Rng>(
    data: &[Vec<f64>],
    k: usize,
    dist: impl Fn(&[f64], &[f64]) -> f64,
    rng: &mut R,
) -> Vec<usize> {
    let n = data.len();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut best = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let latest = *chosen.last().unwrap();
        for (i, row) in data.iter().enumerate() {
            let d = dist(row, &data[latest]);
            if d < best[i] {
                best[i] = d;
            }
        }
        let weights: Vec<f64> = best.iter().map(|d| d * d).collect();
        chosen.push(sample_weighted(rng, &weights));
    }
    chosen
}

/// Index of the point least explained by any component; used to re-seed a
/// collapsed component.
pub(crate) fn weakest_point(responsibilities: &[Vec<f64>]) -> usize {
    let mut worst = 0;
    let mut worst_max = f64::INFINITY;
    for (i, row) in responsibilities.iter().enumerate() {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m < worst_max {
            worst_max = m;
            worst = i;
        }
    }
    worst
}

pub fn fit_mixture(
    data: &[Vec<f64>],
    k: usize,
    kind: MixtureKind,
    opts: &EmOptions,
) -> Result<MixtureFit, ClusterError> {
    match kind {
        MixtureKind::Vmf => best_of_restarts(opts, |o| vmf::fit_vmf_mixture(data, k, o)),
        MixtureKind::Gaussian => {
            best_of_restarts(opts, |o| gaussian::fit_gaussian_mixture(data, k, o))
        }
    }
}

/// One candidate component count with its pairwise survival separation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KSweepEntry {
    pub k: usize,
    /// Two-group comparison p-values for every cluster pair (i < j order);
    /// 1.0 stands in for pairs an empty cluster made untestable.
    pub pairwise_p: Vec<f64>,
    /// Worst (largest) pairwise p-value.
    pub psi: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KSelectionReport {
    pub k_min: usize,
    pub k_max: usize,
    pub threshold: f64,
    pub entries: Vec<KSweepEntry>,
    /// Largest k whose every candidate up to it separates all cluster
    /// pairs, provided the next candidate fails to; `None` when even the
    /// smallest candidate has an inseparable pair.
    pub selected: Option<usize>,
}

pub const KNEE_THRESHOLD: f64 = 0.01;

/// Worst pairwise survival-separation p-value of a hard clustering.
pub fn max_pairwise_p(
    assignments: &[usize],
    k: usize,
    times: &[f64],
    events: &[u8],
) -> Result<(Vec<f64>, f64), ClusterError> {
    let mut groups: Vec<(Vec<f64>, Vec<u8>)> = vec![(Vec::new(), Vec::new()); k];
    for (i, &a) in assignments.iter().enumerate() {
        groups[a].0.push(times[i]);
        groups[a].1.push(events[i]);
    }
    let mut pairwise = Vec::new();
    let mut psi: f64 = 0.0;
    for a in 0..k {
        for b in (a + 1)..k {
            // An empty group, or a pair with no events at all, carries no
            // evidence of separation; score it as p = 1 rather than
            // aborting the sweep.
            let no_events = groups[a].1.iter().chain(&groups[b].1).all(|&e| e == 0);
            let p = if groups[a].0.is_empty() || groups[b].0.is_empty() || no_events {
                1.0
            } else {
                logrank_test(&groups[a].0, &groups[a].1, &groups[b].0, &groups[b].1)?.p_value
            };
            pairwise.push(p);
            psi = psi.max(p);
        }
    }
    Ok((pairwise, psi))
}

/// Fits every candidate k and keeps the largest k* such that all candidates
/// up to k* separate every cluster pair below the threshold while k*+1 does
/// not. Each candidate gets its own derived seed so fits stay independent
/// yet reproducible.
pub fn k_sweep(
    data: &[Vec<f64>],
    times: &[f64],
    events: &[u8],
    kind: MixtureKind,
    k_min: usize,
    k_max: usize,
    opts: &EmOptions,
) -> Result<KSelectionReport, ClusterError> {
    if k_min == 0 || k_min > k_max {
        return Err(ClusterError::BadSweepRange { k_min, k_max });
    }
    validate_rows(data)?;
    let mut entries = Vec::new();
    for k in k_min..=k_max {
        let sub = EmOptions {
            seed: derive_subseed(opts.seed, k as u64),
            ..*opts
        };
        let fit = fit_mixture(data, k, kind, &sub)?;
        let (pairwise_p, psi) = max_pairwise_p(&fit.assignments, k, times, events)?;
        entries.push(KSweepEntry {
            k,
            pairwise_p,
            psi,
            converged: fit.converged,
        });
    }

    let mut selected = None;
    for (i, entry) in entries.iter().enumerate() {
        if entry.psi > KNEE_THRESHOLD {
            break;
        }
        let next_fails = entries.get(i + 1).map(|e| e.psi > KNEE_THRESHOLD);
        if next_fails != Some(false) {
            // Either the next candidate fails, or this is the last one.
            selected = Some(entry.k);
            break;
        }
    }
    // All candidates passed: walk found no knee, keep the largest k whose
    // whole prefix passed.
    if selected.is_none() && entries.iter().all(|e| e.psi <= KNEE_THRESHOLD) {
        selected = entries.last().map(|e| e.k);
    }

    Ok(KSelectionReport {
        k_min,
        k_max,
        threshold: KNEE_THRESHOLD,
        entries,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, Gamma};

    #[test]
    fn weighted_sampling_respects_zero_weights() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_weighted(&mut rng, &[0.0, 3.5, 0.0]), 1);
        }
        // Degenerate all-zero weights still produce a valid index.
        let i = sample_weighted(&mut rng, &[0.0, 0.0, 0.0]);
        assert!(i < 3);
    }

    #[test]
    fn seeding_spreads_centers() {
        let mut data = Vec::new();
        for i in 0..20 {
            data.push(vec![i as f64 * 0.01, 0.0]);
            data.push(vec![100.0 + i as f64 * 0.01, 0.0]);
        }
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let dist = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let idx = kmeanspp_indices(&data, 2, dist, &mut rng);
        // One center from each far-apart block.
        let blocks: Vec<bool> = idx.iter().map(|&i| data[i][0] > 50.0).collect();
        assert_ne!(blocks[0], blocks[1]);
    }

    fn labeled_caps(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<u8>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let dirs = [
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
        ];
        let gamma_means = [2.0, 8.0, 20.0];
        let mut data = Vec::new();
        let mut times = Vec::new();
        let mut events = Vec::new();
        for (dir, m) in dirs.iter().zip(gamma_means) {
            let gamma = Gamma::new(m * m / 0.2, 0.2 / m).unwrap();
            for _ in 0..60 {
                data.push(vmf::sample_vmf(dir, 80.0, &mut rng));
                times.push(gamma.sample(&mut rng));
                events.push(1u8);
            }
        }
        (data, times, events)
    }

    #[test]
    fn sweep_finds_the_survival_knee() {
        let (data, times, events) = labeled_caps(42);
        let opts = EmOptions {
            seed: 7,
            ..EmOptions::default()
        };
        let report =
            k_sweep(&data, &times, &events, MixtureKind::Vmf, 2, 5, &opts).unwrap();
        assert_eq!(report.entries.len(), 4);
        assert_eq!(report.selected, Some(3), "psis: {:?}", report
            .entries
            .iter()
            .map(|e| e.psi)
            .collect::<Vec<_>>());
        assert!(report.entries[0].psi <= KNEE_THRESHOLD);
        assert!(report.entries[1].psi <= KNEE_THRESHOLD);
        assert!(report.entries[2].psi > KNEE_THRESHOLD);
        // Pair counts are k choose 2.
        for e in &report.entries {
            assert_eq!(e.pairwise_p.len(), e.k * (e.k - 1) / 2);
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let (data, times, events) = labeled_caps(9);
        let opts = EmOptions {
            seed: 3,
            ..EmOptions::default()
        };
        let a = k_sweep(&data, &times, &events, MixtureKind::Vmf, 2, 4, &opts).unwrap();
        let b = k_sweep(&data, &times, &events, MixtureKind::Vmf, 2, 4, &opts).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn sweep_range_is_validated() {
        let (data, times, events) = labeled_caps(1);
        let opts = EmOptions::default();
        assert!(matches!(
            k_sweep(&data, &times, &events, MixtureKind::Vmf, 3, 2, &opts),
            Err(ClusterError::BadSweepRange { .. })
        ));
    }
}
