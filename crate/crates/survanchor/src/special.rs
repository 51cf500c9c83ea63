//! Scalar special functions backing the statistical tests and mixture models:
//! log-gamma, regularized incomplete gamma, error function, chi-square and
//! normal tail probabilities, and the log modified Bessel function of the
//! first kind. All implemented in-repo and validated against high-precision
//! reference fixtures (see tests/special_fixtures.rs).

/// Machine tolerance used to stop series/continued-fraction iteration.
const CONV_EPS: f64 = 1e-16;
/// Smallest magnitude allowed inside the Lentz continued-fraction recurrence.
const FPMIN: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 8] = [
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function, real arguments excluding non-positive
/// integers. Lanczos approximation with reflection for x < 0.5.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let s = (std::f64::consts::PI * x).sin();
        if s == 0.0 {
            return f64::INFINITY;
        }
        return std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = 0.999_999_999_999_809_93;
    for (i, c) in LANCZOS_COEF.iter().enumerate() {
        acc += c / (z + i as f64 + 1.0);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x) = γ(a, x) / Γ(a).
///
/// Series expansion for x < a + 1, complement of the continued fraction
/// otherwise. Returns NaN outside the domain (a <= 0 or x < 0).
pub fn reg_gamma_p(a: f64, x: f64) -> f64 {
    if !(a > 0.0) || !(x >= 0.0) {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        lower_series(a, x)
    } else {
        1.0 - upper_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x), computed
/// directly by continued fraction when x >= a + 1 so small tails keep
/// relative accuracy.
pub fn reg_gamma_q(a: f64, x: f64) -> f64 {
    if !(a > 0.0) || !(x >= 0.0) {
        return f64::NAN;
    }
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - lower_series(a, x)
    } else {
        upper_cf(a, x)
    }
}

fn lower_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    for n in 1..MAX_ITER {
        term *= x / (a + n as f64);
        sum += term;
        if term.abs() < sum.abs() * CONV_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn upper_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b.max(FPMIN);
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CONV_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Error function, derived from the regularized incomplete gamma at a = 1/2.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= 0.0 {
        reg_gamma_p(0.5, x * x)
    } else {
        -reg_gamma_p(0.5, x * x)
    }
}

/// Complementary error function; uses the upper-tail continued fraction for
/// x > 0 so large arguments keep relative accuracy.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == 0.0 {
        1.0
    } else if x > 0.0 {
        reg_gamma_q(0.5, x * x)
    } else {
        2.0 - reg_gamma_q(0.5, x * x)
    }
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    if !(dof > 0.0) || !(x >= 0.0) {
        return f64::NAN;
    }
    reg_gamma_q(dof / 2.0, x / 2.0)
}

/// Upper tail of the standard normal distribution.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// log I_nu(x) for nu >= 0, x >= 0: log-domain power series for small and
/// moderate arguments, large-argument asymptotic expansion beyond. The
/// series is exact-in-the-limit everywhere but needs O(x) terms, so the
/// crossover is placed where the asymptotic tail is already below 1e-12.
pub fn log_bessel_i(nu: f64, x: f64) -> f64 {
    if !(nu >= 0.0) || !(x >= 0.0) {
        return f64::NAN;
    }
    if x == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let switch = (2.0 * nu * nu + 50.0).max(500.0);
    if x <= switch {
        log_bessel_series(nu, x)
    } else {
        log_bessel_asymptotic(nu, x)
    }
}

fn log_bessel_series(nu: f64, x: f64) -> f64 {
    let lh = (x / 2.0).ln();
    let half_sq = (x / 2.0) * (x / 2.0);
    // Running lnΓ(m+1) and lnΓ(m+ν+1), advanced incrementally so integer
    // factorials stay exact and no per-term Lanczos evaluation is needed.
    let mut lg_m = 0.0;
    let mut lg_mnu = ln_gamma(nu + 1.0);
    let mut log_sum = f64::NEG_INFINITY;
    for m in 0..200_000usize {
        let mf = m as f64;
        let log_term = (2.0 * mf + nu) * lh - lg_m - lg_mnu;
        log_sum = log_add_exp(log_sum, log_term);
        let past_peak = (mf + 1.0) * (mf + nu + 1.0) > half_sq;
        if past_peak && log_term < log_sum - 40.0 {
            break;
        }
        lg_m += (mf + 1.0).ln();
        lg_mnu += (nu + mf + 1.0).ln();
    }
    log_sum
}

fn log_bessel_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=60usize {
        let kf = k as f64;
        let next = term * -(mu - (2.0 * kf - 1.0).powi(2)) / (8.0 * kf * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < sum.abs() * CONV_EPS {
            break;
        }
    }
    x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln()
}

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log Σ exp(x_i) with the max shifted out; −inf for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}
