//! Sampler diagnostics: Kolmogorov-Smirnov and chi-square goodness-of-fit
//! helpers, batch-means standard errors and the adjusted Rand index.

use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value
/// (with Stephens' small-sample adjustment).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        let t = x.min(y);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_sf(lambda))
}

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Chi-square goodness-of-fit p-value of `xs` against the standard normal,
/// using `bins` equal-probability bins.
pub fn chi_square_gof_normal(xs: &[f64], bins: usize) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let edges: Vec<f64> = (1..bins)
        .map(|k| normal.inverse_cdf(k as f64 / bins as f64))
        .collect();
    chi_square_gof(xs, &edges, bins)
}

/// Chi-square p-value for counts of `xs` in the bins delimited by `edges`
/// (equal expected probability per bin).
pub fn chi_square_gof(xs: &[f64], edges: &[f64], bins: usize) -> f64 {
    assert_eq!(edges.len() + 1, bins);
    let mut counts = vec![0.0f64; bins];
    for &x in xs {
        let k = edges.partition_point(|&e| e < x);
        counts[k] += 1.0;
    }
    let expected = xs.len() as f64 / bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|c| (c - expected) * (c - expected) / expected)
        .sum();
    chi_square_sf(stat, (bins - 1) as f64)
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    use statrs::distribution::ChiSquared;
    if x <= 0.0 {
        return 1.0;
    }
    let d = ChiSquared::new(dof).unwrap();
    1.0 - d.cdf(x)
}

/// Mean and batch-means standard error of a (possibly autocorrelated) trace.
pub fn batch_means_se(xs: &[f64], n_batches: usize) -> (f64, f64) {
    assert!(n_batches >= 2 && xs.len() >= n_batches);
    let b = xs.len() / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|k| xs[k * b..(k + 1) * b].iter().sum::<f64>() / b as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
        / (n_batches - 1) as f64;
    (grand, (var / n_batches as f64).sqrt())
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |&m| m + 1);
    let kb = b.iter().max().map_or(0, |&m| m + 1);
    let mut table = vec![0u64; ka * kb];
    let mut ra = vec![0u64; ka];
    let mut rb = vec![0u64; kb];
    for i in 0..n {
        table[a[i] * kb + b[i]] += 1;
        ra[a[i]] += 1;
        rb[b[i]] += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_table: f64 = table.iter().map(|&x| choose2(x)).sum();
    let sum_a: f64 = ra.iter().map(|&x| choose2(x)).sum();
    let sum_b: f64 = rb.iter().map(|&x| choose2(x)).sum();
    let total = choose2(n as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_table - expected) / (max - expected)
}
