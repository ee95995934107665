#![allow(dead_code)]

//! Independent reference implementations used as test oracles.

/// `erf(x)` from its Maclaurin series, summed until terms vanish.
/// Accurate to ~1e-15 for |x| <= 4.
pub fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -x * x / k;
        let add = term / (2.0 * k + 1.0);
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf_series(x / std::f64::consts::SQRT_2))
}

/// Normal quantile by bisection on the series CDF.
pub fn normal_quantile_bisect(p: f64) -> f64 {
    let (mut lo, mut hi) = (-6.0, 6.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form mean, variance and skewness of the standard skew-normal.
pub fn skew_normal_moments(alpha: f64) -> (f64, f64, f64) {
    let pi = std::f64::consts::PI;
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    let mean = delta * (2.0 / pi).sqrt();
    let var = 1.0 - 2.0 * delta * delta / pi;
    let skew = (4.0 - pi) / 2.0 * mean.powi(3) / var.powf(1.5);
    (mean, var, skew)
}

/// Sample mean, variance (population) and skewness.
pub fn sample_moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    (mean, m2, m3 / m2.powf(1.5))
}

pub fn brute_picp(y: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut hits = 0usize;
    for i in 0..y.len() {
        if lower[i] <= y[i] && y[i] <= upper[i] {
            hits += 1;
        }
    }
    hits as f64 / y.len() as f64
}

pub fn brute_mpiw(lower: &[f64], upper: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..lower.len() {
        total += upper[i] - lower[i];
    }
    total / lower.len() as f64
}

pub fn brute_mpiw_capt(y: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for i in 0..y.len() {
        if lower[i] <= y[i] && y[i] <= upper[i] {
            total += upper[i] - lower[i];
            count += 1.0;
        }
    }
    total / f64::max(count, 1e-7)
}

/// Symmetric relative error with an absolute floor on the denominator.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
