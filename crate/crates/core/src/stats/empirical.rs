//! Empirical distribution helpers shared by the Monte Carlo code and tests.

use crate::rng::RandomStream;

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` and a continuous `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = sorted(samples);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// Empirical CDF of `sorted_samples` at `x`.
pub fn ecdf(sorted_samples: &[f64], x: f64) -> f64 {
    sorted_samples.partition_point(|&s| s <= x) as f64 / sorted_samples.len() as f64
}

/// Quantile of already sorted data, linearly interpolating between order
/// statistics (`h = (n - 1) p`).
pub fn quantile_sorted(sorted_samples: &[f64], p: f64) -> f64 {
    let n = sorted_samples.len();
    assert!(n > 0, "quantile of empty sample");
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted_samples[lo] + (h - lo as f64) * (sorted_samples[hi] - sorted_samples[lo])
}

pub fn quantile(samples: &[f64], p: f64) -> f64 {
    quantile_sorted(&sorted(samples), p)
}

/// Bootstrap standard error of the `p`-quantile.
pub fn bootstrap_quantile_se(samples: &[f64], p: f64, resamples: usize, stream: &mut RandomStream) -> f64 {
    let n = samples.len();
    let mut buf = vec![0.0; n];
    let estimates: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = samples[(stream.next_u64() % n as u64) as usize];
            }
            quantile(&buf, p)
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / resamples as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let s = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert_eq!(quantile(&s, 1.0), 4.0);
        assert!((quantile(&s, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile(&s, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn ks_of_uniform_grid() {
        let s: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_one_sample(&s, |x| x) - 0.005).abs() < 1e-12);
        let mut r = RandomStream::new(4);
        let u: Vec<f64> = (0..10_000).map(|_| r.uniform()).collect();
        assert!(ks_one_sample(&u, |x| x) < 0.02);
    }

    #[test]
    fn two_sample_ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&a, &[4.0, 5.0]), 1.0);
    }

    #[test]
    fn ecdf_counts_ties() {
        let s = [1.0, 2.0, 2.0, 3.0];
        assert_eq!(ecdf(&s, 2.0), 0.75);
        assert_eq!(ecdf(&s, 0.0), 0.0);
    }

    #[test]
    fn bootstrap_se_of_median_is_reasonable() {
        let mut r = RandomStream::new(9);
        let u: Vec<f64> = (0..2000).map(|_| r.uniform()).collect();
        let se = bootstrap_quantile_se(&u, 0.5, 200, &mut r);
        // Asymptotic value sqrt(p(1-p)/n) / f = 0.5 / sqrt(2000).
        assert!((se - 0.0112).abs() < 0.004, "{se}");
    }
}
