//! Von Mises-Fisher mixtures on the unit sphere, fitted by EM with
//! log-space posteriors, plus an exact rejection sampler used by tests and
//! synthetic benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    kmeanspp_indices, validate_rows, weakest_point, ClusterError, EmOptions, MixtureFit,
    MixtureModel, LLOYD_REFINE_ITERS, MAX_RESCUES, WEIGHT_FLOOR,
};
use crate::special::{log_bessel_i, log_sum_exp};

pub const KAPPA_MIN: f64 = 1e-3;
pub const KAPPA_MAX: f64 = 1e4;
/// Concentration assigned to freshly seeded or rescued components.
pub const INIT_KAPPA: f64 = 50.0;
/// Rows must be unit length within this tolerance.
pub const UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VmfComponent {
    pub mean: Vec<f64>,
    pub kappa: f64,
    pub weight: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Log normalization constant of the density on the (d-1)-sphere:
/// `(d/2 - 1) ln k - (d/2) ln 2pi - ln I_{d/2-1}(k)`.
pub fn log_norm_const(dim: usize, kappa: f64) -> f64 {
    let half = dim as f64 / 2.0;
    (half - 1.0) * kappa.ln()
        - half * (2.0 * std::f64::consts::PI).ln()
        - log_bessel_i(half - 1.0, kappa)
}

/// Concentration from the mean resultant length: `r(d - r^2)/(1 - r^2)`,
/// clamped to a safe range.
pub fn estimate_kappa(r_bar: f64, dim: usize) -> f64 {
    if !(r_bar > 0.0) {
        return KAPPA_MIN;
    }
    if r_bar >= 1.0 {
        return KAPPA_MAX;
    }
    let d = dim as f64;
    let k = r_bar * (d - r_bar * r_bar) / (1.0 - r_bar * r_bar);
    k.clamp(KAPPA_MIN, KAPPA_MAX)
}

fn log_density(comp: &VmfComponent, log_c: f64, x: &[f64]) -> f64 {
    log_c + comp.kappa * dot(&comp.mean, x)
}

/// One E-step: fills `resp` with posteriors and returns the total data
/// log-likelihood under the current components.
fn e_step(components: &[VmfComponent], data: &[Vec<f64>], resp: &mut [Vec<f64>]) -> f64 {
    let dim = data[0].len();
    let log_cs: Vec<f64> = components
        .iter()
        .map(|c| log_norm_const(dim, c.kappa))
        .collect();
    let log_ws: Vec<f64> = components.iter().map(|c| c.weight.ln()).collect();
    let mut total = 0.0;
    let mut lp = vec![0.0; components.len()];
    for (i, x) in data.iter().enumerate() {
        for (k, comp) in components.iter().enumerate() {
            lp[k] = log_ws[k] + log_density(comp, log_cs[k], x);
        }
        let lse = log_sum_exp(&lp);
        total += lse;
        for (k, r) in resp[i].iter_mut().enumerate() {
            *r = (lp[k] - lse).exp();
        }
    }
    total
}

fn m_step(components: &mut [VmfComponent], data: &[Vec<f64>], resp: &[Vec<f64>]) {
    let n = data.len();
    let dim = data[0].len();
    for (k, comp) in components.iter_mut().enumerate() {
        let mut rho = 0.0;
        let mut s = vec![0.0; dim];
        for (i, x) in data.iter().enumerate() {
            let r = resp[i][k];
            rho += r;
            for (sj, xj) in s.iter_mut().zip(x) {
                *sj += r * xj;
            }
        }
        comp.weight = rho / n as f64;
        let ns = norm(&s);
        if rho > 1e-12 && ns > 1e-12 {
            for (mj, sj) in comp.mean.iter_mut().zip(&s) {
                *mj = sj / ns;
            }
            comp.kappa = estimate_kappa(ns / rho, dim);
        }
        // Otherwise the component kept no mass (or perfectly antipodal
        // mass); its old direction stands and the weight floor downstream
        // decides whether to rescue it.
    }
}

fn validate_unit_rows(data: &[Vec<f64>]) -> Result<usize, ClusterError> {
    let dim = validate_rows(data)?;
    if dim < 2 {
        return Err(ClusterError::BadDimension(dim));
    }
    for (i, row) in data.iter().enumerate() {
        let n = norm(row);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(ClusterError::NotUnitNorm { row: i, norm: n });
        }
    }
    Ok(dim)
}

/// EM from explicit starting components. Exposed so callers can test or
/// resume from known parameters; `fit_vmf_mixture` seeds this.
pub fn fit_vmf_from(
    mut components: Vec<VmfComponent>,
    data: &[Vec<f64>],
    opts: &EmOptions,
) -> Result<MixtureFit, ClusterError> {
    let dim = validate_unit_rows(data)?;
    let n = data.len();
    let k = components.len();
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    for c in &components {
        if c.mean.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                row: 0,
                got: c.mean.len(),
                expected: dim,
            });
        }
    }

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

        // Re-seed starved components from the worst-explained point.
        for k_idx in 0..k {
            if components[k_idx].weight < WEIGHT_FLOOR {
                rescues += 1;
                if rescues > MAX_RESCUES {
                    return Err(ClusterError::EmptyClusterCollapse(MAX_RESCUES));
                }
                let orphan = weakest_point(&resp);
                components[k_idx].mean = data[orphan].clone();
                components[k_idx].kappa = INIT_KAPPA;
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
        model: MixtureModel::Vmf(components),
        responsibilities: resp,
        assignments,
        mean_log_likelihood,
        ll_trace,
        iterations,
        converged,
    })
}

/// Fits a k-component mixture to unit-norm rows. Components are seeded by
/// spread-out sampling under cosine distance, then refined by EM.
pub fn fit_vmf_mixture(
    data: &[Vec<f64>],
    k: usize,
    opts: &EmOptions,
) -> Result<MixtureFit, ClusterError> {
    let n = data.len();
    validate_unit_rows(data)?;
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let cosine = |a: &[f64], b: &[f64]| (1.0 - dot(a, b)).max(0.0);
    let centers = kmeanspp_indices(data, k, cosine, &mut rng);
    let mut means: Vec<Vec<f64>> = centers.iter().map(|&i| data[i].clone()).collect();

    // Spherical k-means rounds before EM. Raw sampled seeds leave EM free
    // to settle into split/merge local optima (one direction bundle shared
    // by two components while two others merge); hard cosine assignments
    // pull the means onto distinct bundles first.
    let dim = data[0].len();
    let mut assign = vec![usize::MAX; n];
    for _ in 0..LLOYD_REFINE_ITERS {
        let mut changed = false;
        for (i, row) in data.iter().enumerate() {
            let best = (0..k)
                .max_by(|&a, &b| dot(row, &means[a]).total_cmp(&dot(row, &means[b])))
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
        for (row, &a) in data.iter().zip(&assign) {
            for (s, x) in sums[a].iter_mut().zip(row) {
                *s += x;
            }
        }
        for c in 0..k {
            let nv = norm(&sums[c]);
            if nv > 1e-12 {
                means[c] = sums[c].iter().map(|x| x / nv).collect();
            } // empty or cancelled cluster keeps its previous direction
        }
    }

    let mut weights: Vec<f64> = (0..k)
        .map(|c| {
            let count = assign.iter().filter(|&&a| a == c).count();
            if count == 0 {
                1.0 / n as f64
            } else {
                count as f64 / n as f64
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let components = means
        .into_iter()
        .zip(weights)
        .map(|(mean, weight)| VmfComponent {
            mean,
            kappa: INIT_KAPPA,
            weight,
        })
        .collect();
    fit_vmf_from(components, data, opts)
}

/// Uniform direction on the unit sphere in `dim` dimensions.
pub fn sample_uniform_sphere<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let nv = norm(&v);
        if nv > 1e-12 {
            return v.iter().map(|x| x / nv).collect();
        }
    }
}

/// Draws one unit vector concentrated around `mean` by rejection sampling
/// of the cosine component (Wood's method) plus a uniform tangent
/// direction reflected into place.
pub fn sample_vmf<R: Rng>(mean: &[f64], kappa: f64, rng: &mut R) -> Vec<f64> {
    let d = mean.len();
    assert!(d >= 2, "spherical sampling needs dimension >= 2");
    assert!(kappa > 0.0 && kappa.is_finite());
    let mn = norm(mean);
    assert!(mn > 1e-12, "mean direction must be nonzero");
    let mu: Vec<f64> = mean.iter().map(|x| x / mn).collect();

    let dm1 = (d - 1) as f64;
    let b = (-2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt()) / dm1;
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(dm1 / 2.0, dm1 / 2.0).unwrap();

    let w = loop {
        let z: f64 = beta.sample(rng);
        let u: f64 = rng.random_range(0.0..1.0);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        if kappa * w + dm1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };

    // Sample in the frame where the mean is the first axis...
    let tangent = sample_uniform_sphere(d - 1, rng);
    let mut y = vec![0.0; d];
    y[0] = w;
    let scale = (1.0 - w * w).max(0.0).sqrt();
    for (yj, tj) in y[1..].iter_mut().zip(&tangent) {
        *yj = scale * tj;
    }

    // ...then reflect that axis onto the mean.
    let mut axis = vec![0.0; d];
    axis[0] = 1.0;
    let mut u: Vec<f64> = axis.iter().zip(&mu).map(|(a, m)| a - m).collect();
    let un = norm(&u);
    if un < 1e-12 {
        return y;
    }
    for uj in u.iter_mut() {
        *uj /= un;
    }
    let proj = dot(&u, &y);
    y.iter().zip(&u).map(|(yj, uj)| yj - 2.0 * proj * uj).collect()
}
