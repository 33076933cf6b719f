//! Interval helpers for acceptance checks.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n` at quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0 && successes <= n, "need 0 <= successes <= n, n > 0");
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Distance from the point estimate down to the Wilson lower bound.
pub fn wilson_lower_slack(successes: u64, n: u64) -> f64 {
    successes as f64 / n as f64 - wilson_interval(successes, n, Z95).0
}

/// Distance from the point estimate up to the Wilson upper bound.
pub fn wilson_upper_slack(successes: u64, n: u64) -> f64 {
    wilson_interval(successes, n, Z95).1 - successes as f64 / n as f64
}

/// `mean + k` standard errors of a Bernoulli(`p`) mean over `n` draws.
pub fn mc_bound(p: f64, n: u64, k: f64) -> f64 {
    p + k * (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // 85 of 100: (0.767164, 0.906940)
        let (lo, hi) = wilson_interval(85, 100, Z95);
        assert!((lo - 0.767_164_404).abs() < 1e-6, "{lo}");
        assert!((hi - 0.906_940_147).abs() < 1e-6, "{hi}");
        let (lo, hi) = wilson_interval(0, 10, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.25 && hi < 0.3);
        let (lo, hi) = wilson_interval(10, 10, Z95);
        assert!(lo > 0.7 && lo < 0.75);
        assert!(hi > 1.0 - 1e-12);
    }

    #[test]
    fn slack_and_bound() {
        assert!(wilson_lower_slack(340, 400) > 0.03);
        assert!(wilson_upper_slack(0, 400) > 0.0);
        let b = mc_bound(0.05, 500, 3.0);
        assert!((b - 0.079_240_4).abs() < 1e-6, "{b}");
    }
}
