//! Principal axes by power iteration with deflation on the sample
//! covariance. Dimensions here are small (embedding widths), so the dense
//! covariance is cheap; power iteration keeps the solver dependency-free
//! and bit-reproducible.

use super::VisError;

pub const POWER_TOL: f64 = 1e-10;
const MAX_POWER_ITERS: usize = 10_000;
/// Eigenvalues below this fraction of the largest count as zero variance.
const RANK_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PcaResult {
    pub mean: Vec<f64>,
    /// Orthonormal principal directions, strongest first. May hold fewer
    /// than the requested count when the data has fewer nonzero-variance
    /// directions.
    pub axes: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl PcaResult {
    /// Coordinates of one row in the principal basis.
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        self.axes
            .iter()
            .map(|axis| {
                row.iter()
                    .zip(axis)
                    .zip(&self.mean)
                    .map(|((&x, &a), &m)| (x - m) * a)
                    .sum()
            })
            .collect()
    }
}

fn covariance(data: &[Vec<f64>], mean: &[f64]) -> Vec<Vec<f64>> {
    let n = data.len();
    let d = mean.len();
    let mut cov = vec![vec![0.0; d]; d];
    for row in data {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[i][j] += di * (row[j] - mean[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(&a, &b)| a * b).sum())
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fix the sign so the largest-magnitude component is positive; ties go to
/// the earliest index. Keeps axes reproducible across runs.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Dominant eigenpair of a symmetric PSD matrix, or None when the matrix
/// is (numerically) zero.
fn power_iteration(m: &[Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    let d = m.len();
    // Deterministic start with nonzero overlap with any direction: the
    // normalized all-ones vector, perturbed per coordinate so symmetric
    // matrices with paired eigenvectors cannot trap it.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.01 * (i as f64 + 1.0)).collect();
    let s = norm(&v);
    for x in v.iter_mut() {
        *x /= s;
    }
    let mut lambda = 0.0;
    for _ in 0..MAX_POWER_ITERS {
        let mut w = mat_vec(m, &v);
        let wn = norm(&w);
        if wn < 1e-300 {
            return None;
        }
        for x in w.iter_mut() {
            *x /= wn;
        }
        let new_lambda: f64 = {
            let mv = mat_vec(m, &w);
            w.iter().zip(&mv).map(|(&a, &b)| a * b).sum()
        };
        let delta: f64 = v
            .iter()
            .zip(&w)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max);
        // An eigenvector is defined up to sign; compare against both.
        let delta_neg: f64 = v
            .iter()
            .zip(&w)
            .map(|(&a, &b)| (a + b).abs())
            .fold(0.0, f64::max);
        v = w;
        let moved = delta.min(delta_neg);
        if moved < POWER_TOL && (new_lambda - lambda).abs() < POWER_TOL * new_lambda.abs().max(1.0)
        {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    canonical_sign(&mut v);
    Some((lambda, v))
}

/// Top `k` principal axes of `data`. Fewer may come back when the data has
/// fewer nonzero-variance directions (the rank-deficient fallback).
pub fn principal_axes(data: &[Vec<f64>], k: usize) -> Result<PcaResult, VisError> {
    if data.len() < 3 {
        return Err(VisError::TooFewRows(data.len()));
    }
    let d = data[0].len();
    if d < 2 {
        return Err(VisError::TooFewDimensions(d));
    }
    if data.iter().any(|r| r.len() != d) {
        return Err(VisError::RaggedRows);
    }

    let n = data.len() as f64;
    let mut mean = vec![0.0; d];
    for row in data {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }

    let mut cov = covariance(data, &mean);
    let mut axes = Vec::new();
    let mut eigenvalues = Vec::new();
    for _ in 0..k.min(d) {
        let Some((lambda, v)) = power_iteration(&cov) else {
            break;
        };
        let cutoff = eigenvalues.first().map_or(1e-300, |&l0: &f64| l0 * RANK_EPS);
        if lambda <= cutoff {
            break;
        }
        // Deflate: cov <- cov - lambda v v^T.
        for i in 0..d {
            for j in 0..d {
                cov[i][j] -= lambda * v[i] * v[j];
            }
        }
        eigenvalues.push(lambda);
        axes.push(v);
    }
    Ok(PcaResult {
        mean,
        axes,
        eigenvalues,
    })
}
