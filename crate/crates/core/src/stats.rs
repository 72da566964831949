//! Small statistical helpers shared by the Monte Carlo studies and tests.

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the sample mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn regression(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    let slope = num / den;
    (slope, my - slope * mx)
}

pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

pub fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile(&s, 0.5)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS distance needs nonempty samples"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        let fa = i as f64 / sa.len() as f64;
        let fb = j as f64 / sb.len() as f64;
        d = d.max((fa - fb).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical(alpha: f64, m: usize, n: usize) -> f64 {
    // c(alpha) = sqrt(-ln(alpha/2) / 2)
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((m + n) as f64 / (m as f64 * n as f64)).sqrt()
}

/// Relative change between the first-half estimate and the full estimate.
pub fn half_sample_rel_change(xs: &[f64], stat: impl Fn(&[f64]) -> f64) -> f64 {
    let full = stat(xs);
    let half = stat(&xs[..xs.len() / 2]);
    if full == 0.0 {
        (half - full).abs()
    } else {
        ((half - full) / full).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_recovers_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.5).collect();
        let (s, b) = regression(&xs, &ys);
        assert!((s - 3.0).abs() < 1e-12 && (b + 1.5).abs() < 1e-12);
    }

    #[test]
    fn ks_identical_samples_is_small() {
        let a: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.7133).sin()).collect();
        let d = ks_distance(&a, &a).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn ks_disjoint_samples_is_one() {
        let a = vec![0.0, 1.0, 2.0];
        let b = vec![10.0, 11.0];
        assert!((ks_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_critical_value_magnitude() {
        // 1% level with N = M = 1e4: 1.6276 * sqrt(2/1e4) ≈ 0.0230
        let d = ks_critical(0.01, 10_000, 10_000);
        assert!((d - 0.02302).abs() < 1e-4, "{d}");
    }
}
