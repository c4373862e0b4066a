//! Reference implementations used only as test oracles. None of these share
//! code with the library.

#![allow(dead_code)]

/// Φ(x) by Marsaglia's series
/// Φ(x) = ½ + φ(x)·(x + x³/3 + x⁵/(3·5) + …).
///
/// Every term is positive for x > 0, so there is no cancellation; the
/// negative half uses the reflection Φ(−x) = 1 − Φ(x), computed as
/// ½ − φ(x)·S so the absolute error stays near machine epsilon.
pub fn normal_cdf_series(x: f64) -> f64 {
    let ax = x.abs();
    let mut term = ax;
    let mut sum = ax;
    let mut k = 1.0;
    loop {
        term *= ax * ax / (2.0 * k + 1.0);
        sum += term;
        k += 1.0;
        if term <= sum * 1e-18 {
            break;
        }
    }
    let density = (-0.5 * ax * ax).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if x >= 0.0 {
        0.5 + density * sum
    } else {
        0.5 - density * sum
    }
}

/// Inverse of [`normal_cdf_series`] by plain bisection.
pub fn normal_quantile_bisect(q: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf_series(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Kolmogorov survival function from the alternating series with a fixed,
/// generous number of terms.
pub fn kolmogorov_sf_terms(lambda: f64, terms: usize) -> f64 {
    let mut sum = 0.0;
    for k in 1..=terms {
        let k = k as f64;
        let sign = if k as usize % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * (-2.0 * k * k * lambda * lambda).exp();
    }
    2.0 * sum
}

/// sup |F_emp − F_uni| by evaluating both one-sided limits at every jump,
/// counting samples directly instead of using sorted positions.
pub fn ks_d_bruteforce(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mut d: f64 = 0.0;
    for &t in values {
        let at = values.iter().filter(|&&v| v <= t).count() as f64 / n;
        let before = values.iter().filter(|&&v| v < t).count() as f64 / n;
        d = d.max((at - t).abs()).max((before - t).abs());
    }
    d
}

/// Difference in means, Welch-style SE with 1/n variances, z and two-sided
/// p for explicit group vectors (A as control, B as treatment).
pub struct Trace {
    pub mean_a: f64,
    pub mean_b: f64,
    pub ate: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
}

pub fn trace_ztest(a: &[f64], b: &[f64]) -> Trace {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    let (mean_a, mean_b) = (mean(a), mean(b));
    let se = (var(a, mean_a) / a.len() as f64 + var(b, mean_b) / b.len() as f64).sqrt();
    let ate = mean_b - mean_a;
    let (z, p) = if se > 0.0 {
        let z = ate / se;
        (z, 2.0 * (1.0 - normal_cdf_series(z.abs())))
    } else if ate == 0.0 {
        (0.0, 1.0)
    } else {
        (f64::INFINITY * ate.signum(), 0.0)
    };
    Trace {
        mean_a,
        mean_b,
        ate,
        se,
        z,
        p,
    }
}
