//! Small set of classical tests: chi-square goodness of fit, Kolmogorov–Smirnov, least squares.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Statistic and p-value of a hypothesis test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Pearson chi-square test of equal cell probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> TestResult {
    let k = counts.len();
    assert!(k >= 2, "need at least two cells");
    let total: u64 = counts.iter().sum();
    let expect = total as f64 / k as f64;
    let statistic = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("positive degrees of freedom");
    TestResult { statistic, p_value: dist.sf(statistic) }
}

/// Pearson chi-square goodness of fit against the given cell probabilities.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> TestResult {
    assert_eq!(counts.len(), probs.len());
    assert!(counts.len() >= 2, "need at least two cells");
    let total: u64 = counts.iter().sum();
    let statistic = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("positive degrees of freedom");
    TestResult { statistic, p_value: dist.sf(statistic) }
}

/// Kolmogorov distribution tail Pr[K > λ] = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// (including the usual small-sample correction of the argument).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    assert!(!a.is_empty() && !b.is_empty(), "samples must be nonempty");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    TestResult { statistic: d, p_value: kolmogorov_sf(lambda) }
}

/// sup_x |F_n(x) − F(x)| of a sample against a continuous reference CDF.
pub fn ks_statistic_against(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Ordinary least squares fit y ≈ intercept + slope·x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit { slope, intercept, r_squared }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_reference_values() {
        let r = chi_square_uniform(&[100, 100, 100]);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        // 2 degrees of freedom: survival function e^{-x/2}.
        let r = chi_square_uniform(&[110, 100, 90]);
        assert!((r.statistic - 2.0).abs() < 1e-12);
        assert!((r.p_value - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn gof_with_unequal_cells() {
        let r = chi_square_gof(&[50, 30, 20], &[0.5, 0.3, 0.2]);
        assert_eq!(r.statistic, 0.0);
        let r = chi_square_gof(&[60, 40], &[0.5, 0.5]);
        assert!((r.statistic - 4.0).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Standard critical values: Pr[K > 1.358] ≈ 0.05, Pr[K > 1.628] ≈ 0.01.
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 2e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_detects_shift_and_accepts_identity() {
        let a: Vec<f64> = (0..1000).map(|k| k as f64 / 1000.0).collect();
        let same = ks_two_sample(&a, &a);
        assert_eq!(same.statistic, 0.0);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        let r = ks_two_sample(&a, &shifted);
        assert!((r.statistic - 0.2).abs() < 2e-3);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn ks_against_uniform_cdf() {
        let s: Vec<f64> = (0..10).map(|k| (k as f64 + 0.5) / 10.0).collect();
        assert!((ks_statistic_against(&s, |x| x.clamp(0.0, 1.0)) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn exact_line_fit() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = linear_fit(&xs, &ys);
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }
}
