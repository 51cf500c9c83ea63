//! Diagonal-covariance Gaussian mixtures for embeddings that are not
//! confined to the unit sphere.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{
    kmeanspp_indices, validate_rows, weakest_point, ClusterError, EmOptions, MixtureFit,
    MixtureModel, LLOYD_REFINE_ITERS, MAX_RESCUES, WEIGHT_FLOOR,
};
use crate::special::log_sum_exp;

/// Smallest allowed per-dimension variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
    pub weight: f64,
}

fn log_density(comp: &GaussianComponent, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((m, v), xi) in comp.mean.iter().zip(&comp.variances).zip(x) {
        acc += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (xi - m).powi(2) / (2.0 * v);
    }
    acc
}

fn e_step(components: &[GaussianComponent], data: &[Vec<f64>], resp: &mut [Vec<f64>]) -> f64 {
    let log_ws: Vec<f64> = components.iter().map(|c| c.weight.ln()).collect();
    let mut total = 0.0;
    let mut lp = vec![0.0; components.len()];
    for (i, x) in data.iter().enumerate() {
        for (k, comp) in components.iter().enumerate() {
            lp[k] = log_ws[k] + log_density(comp, x);
        }
        let lse = log_sum_exp(&lp);
        total += lse;
        for (k, r) in resp[i].iter_mut().enumerate() {
            *r = (lp[k] - lse).exp();
        }
    }
    total
}

fn m_step(components: &mut [GaussianComponent], data: &[Vec<f64>], resp: &[Vec<f64>]) {
    let n = data.len();
    let dim = data[0].len();
    for (k, comp) in components.iter_mut().enumerate() {
        let mut rho = 0.0;
        let mut mean = vec![0.0; dim];
        for (i, x) in data.iter().enumerate() {
            let r = resp[i][k];
            rho += r;
            for (mj, xj) in mean.iter_mut().zip(x) {
                *mj += r * xj;
            }
        }
        comp.weight = rho / n as f64;
        if rho <= 1e-12 {
            continue; // weight floor downstream decides the rescue
        }
        for mj in mean.iter_mut() {
            *mj /= rho;
        }
        let mut var = vec![0.0; dim];
        for (i, x) in data.iter().enumerate() {
            let r = resp[i][k];
            for ((vj, mj), xj) in var.iter_mut().zip(&mean).zip(x) {
                *vj += r * (xj - mj).powi(2);
            }
        }
        for vj in var.iter_mut() {
            *vj = (*vj / rho).max(VARIANCE_FLOOR);
        }
        comp.mean = mean;
        comp.variances = var;
    }
}

/// Per-dimension variance of the whole sample, floored; used for fresh and
/// rescued components.
fn global_variances(data: &[Vec<f64>]) -> Vec<f64> {
    let n = data.len() as f64;
    let dim = data[0].len();
    let mut mean = vec![0.0; dim];
    for x in data {
        for (mj, xj) in mean.iter_mut().zip(x) {
            *mj += xj / n;
        }
    }
    let mut var = vec![0.0; dim];
    for x in data {
        for ((vj, mj), xj) in var.iter_mut().zip(&mean).zip(x) {
            *vj += (xj - mj).powi(2) / n;
        }
    }
    var.iter().map(|v| v.max(VARIANCE_FLOOR)).collect()
}

/// EM from explicit starting components; `fit_gaussian_mixture` seeds this.
pub fn fit_gaussian_from(
    mut components: Vec<GaussianComponent>,
    data: &[Vec<f64>],
    opts: &EmOptions,
) -> Result<MixtureFit, ClusterError> {
    let dim = validate_rows(data)?;
    let n = data.len();
    let k = components.len();
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    for c in &components {
        if c.mean.len() != dim || c.variances.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                row: 0,
                got: c.mean.len(),
                expected: dim,
            });
        }
    }

    let rescue_var = global_variances(data);
    let mut resp = vec![vec![0.0; k]; n];
    let mut ll_trace = Vec::new();
    let mut prev_mean_ll = f64::NEG_INFINITY;
    let mut converged = false;
    let mut synced = false;
    let mut rescues = 0usize;

    for _ in 0..opts.max_iter {
        let mean_ll = e_step(&components, data, &mut resp) / n as f64;
        ll_trace.push(mean_ll);
        synced = true;
        if (mean_ll - prev_mean_ll).abs() < opts.tol {
            converged = true;
            break;
        }
        prev_mean_ll = mean_ll;
        m_step(&mut components, data, &resp);

        for k_idx in 0..k {
            if components[k_idx].weight < WEIGHT_FLOOR {
                rescues += 1;
                if rescues > MAX_RESCUES {
                    return Err(ClusterError::EmptyClusterCollapse(MAX_RESCUES));
                }
                let orphan = weakest_point(&resp);
                components[k_idx].mean = data[orphan].clone();
                components[k_idx].variances = rescue_var.clone();
                components[k_idx].weight = 1.0 / n as f64;
                let total: f64 = components.iter().map(|c| c.weight).sum();
                for c in components.iter_mut() {
                    c.weight /= total;
                }
            }
        }
        synced = false;
    }

    if !synced {
        let mean_ll = e_step(&components, data, &mut resp) / n as f64;
        ll_trace.push(mean_ll);
    }

    let assignments = resp
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect();
    let mean_log_likelihood = *ll_trace.last().unwrap();
    let iterations = ll_trace.len();

    Ok(MixtureFit {
        model: MixtureModel::Gaussian(components),
        responsibilities: resp,
        assignments,
        mean_log_likelihood,
        ll_trace,
        iterations,
        converged,
    })
}

/// Fits a k-component diagonal Gaussian mixture, seeded by spread-out
/// sampling under Euclidean distance followed by a few k-means rounds.
pub fn fit_gaussian_mixture(
    data: &[Vec<f64>],
    k: usize,
    opts: &EmOptions,
) -> Result<MixtureFit, ClusterError> {
    let n = data.len();
    let dim = validate_rows(data)?;
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let euclid = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let centers = kmeanspp_indices(data, k, euclid, &mut rng);
    let mut means: Vec<Vec<f64>> = centers.iter().map(|&i| data[i].clone()).collect();

    // Refine the seeds with hard k-means rounds first. Starting EM straight
    // from sampled points under the wide global variances makes the first
    // E-step nearly uninformative, and with unlucky seeds every mean drifts
    // to the grand centroid and the fit converges onto that symmetric
    // stall. The hard rounds pull the means apart before EM begins.
    let mut assign = vec![usize::MAX; n];
    for _ in 0..LLOYD_REFINE_ITERS {
        let mut changed = false;
        for (i, row) in data.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| euclid(row, &means[a]).total_cmp(&euclid(row, &means[b])))
                .unwrap();
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (row, &a) in data.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(row) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its seeded point
            }
            for s in sums[c].iter_mut() {
                *s /= counts[c] as f64;
            }
            std::mem::swap(&mut means[c], &mut sums[c]);
        }
    }

    // Component shapes from the refined hard partition; empty clusters fall
    // back to the global spread so the rescue logic can reseat them.
    let global_var = global_variances(data);
    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        let count = assign.iter().filter(|&&a| a == c).count();
        if count == 0 {
            components.push(GaussianComponent {
                mean: means[c].clone(),
                variances: global_var.clone(),
                weight: 1.0 / n as f64,
            });
            continue;
        }
        let mut var = vec![0.0; dim];
        for (row, _) in data.iter().zip(&assign).filter(|(_, &a)| a == c) {
            for ((vj, mj), xj) in var.iter_mut().zip(&means[c]).zip(row) {
                *vj += (xj - mj).powi(2);
            }
        }
        let variances: Vec<f64> = var
            .iter()
            .map(|v| (v / count as f64).max(VARIANCE_FLOOR))
            .collect();
        components.push(GaussianComponent {
            mean: means[c].clone(),
            variances,
            weight: count as f64 / n as f64,
        });
    }
    let total: f64 = components.iter().map(|c| c.weight).sum();
    for c in components.iter_mut() {
        c.weight /= total;
    }
    fit_gaussian_from(components, data, opts)
}
