//! Small statistics helpers for Monte-Carlo validation.

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS distance `d` from `n` samples.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = (-2.0 * (j as f64 * lambda).powi(2)).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `(D, p)` of a one-sample KS test.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let d = ks_statistic(samples, cdf);
    (d, kolmogorov_p_value(d, samples.len()))
}

/// Standard error of a proportion `p` estimated from `n` draws.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

/// Pooled two-proportion z statistic of `e1/n1` against `e2/n2`.
pub fn two_proportion_z(e1: u64, n1: u64, e2: u64, n2: u64) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (e1 + e2) as f64 / (n1f + n2f);
    let var = pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f);
    if var <= 0.0 {
        return 0.0;
    }
    (e1 as f64 / n1f - e2 as f64 / n2f) / var.sqrt()
}

/// SNR where a BER curve first crosses `target`, interpolated linearly in
/// `log10(BER)`. Zero error rates are floored at `floor`.
pub fn snr_at_ber(snr_db: &[f64], ber: &[f64], target: f64, floor: f64) -> Option<f64> {
    let lg = |b: f64| b.max(floor).log10();
    let t = target.log10();
    for i in 0..snr_db.len().saturating_sub(1) {
        let (a, b) = (lg(ber[i]), lg(ber[i + 1]));
        if a >= t && b <= t {
            if a == b {
                return Some(snr_db[i]);
            }
            return Some(snr_db[i] + (a - t) / (a - b) * (snr_db[i + 1] - snr_db[i]));
        }
    }
    None
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_on_uniform_grid() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let (d, p) = ks_test(&xs, |x| x);
        assert!((d - 0.0005).abs() < 1e-12);
        assert!(p > 0.99);
        let (_, p) = ks_test(&xs, |x| x * x);
        assert!(p < 1e-6);
    }

    #[test]
    fn kolmogorov_critical_value() {
        // λ ≈ 1.628 is the 1% critical value of the Kolmogorov distribution.
        let n = 1_000_000;
        let d = 1.6276 / (n as f64).sqrt();
        assert!((kolmogorov_p_value(d, n) - 0.01).abs() < 5e-4);
    }

    #[test]
    fn two_proportions() {
        assert_eq!(two_proportion_z(10, 100, 10, 100), 0.0);
        assert!(two_proportion_z(30, 100, 10, 100) > 3.0);
        assert_eq!(two_proportion_z(0, 100, 0, 100), 0.0);
    }

    #[test]
    fn interpolation_in_log_ber() {
        let snr = [0.0, 10.0];
        let ber = [1e-1, 1e-3];
        assert!((snr_at_ber(&snr, &ber, 1e-2, 1e-12).unwrap() - 5.0).abs() < 1e-12);
        assert!(snr_at_ber(&snr, &ber, 1e-4, 1e-12).is_none());
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, -1.0, -3.0];
        assert!((fit_slope(&x, &y) + 2.0).abs() < 1e-12);
    }
}
