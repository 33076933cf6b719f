//! Binomial tail numerics and the Hoeffding-Bentkus p-value.
//!
//! The binomial pmf at the anchor term uses the saddle-point form of
//! Loader (2000):
//! `ln pmf = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, np) - bd0(n - x, nq) - ln(2 pi x (n - x) / n) / 2`,
//! which keeps full relative precision where a log-gamma difference would cancel.
//! The remaining terms of the lower tail come from the pmf ratio recurrence,
//! summed relative to the anchor (log-sum-exp with the anchor as the max).

use crate::error::{Error, Result};

/// `ln(n!) - (n + 1/2) ln n + n - ln(2 pi) / 2` for n = 0..=15.
const STIRLERR_SMALL: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_26,
    0.041_340_695_955_409_3,
    0.027_677_925_684_998_34,
    0.020_790_672_103_765_093,
    0.016_644_691_189_821_192,
    0.013_876_128_823_070_748,
    0.011_896_709_945_891_77,
    0.010_411_265_261_972_096,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_87,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_53,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

fn stirlerr(n: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15 {
        return STIRLERR_SMALL[n as usize];
    }
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / np) + np - x`, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln P(Bin(n, p) = x)` for `0 < p < 1`.
fn ln_pmf(x: u64, n: u64, p: f64, q: f64) -> f64 {
    let nf = n as f64;
    if x == 0 {
        return if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
    }
    if x == n {
        return if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
    }
    let xf = x as f64;
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(xf, nf * p) - bd0(nf - xf, nf * q);
    let lf = std::f64::consts::TAU.ln() + xf.ln() + (-xf / nf).ln_1p();
    lc - 0.5 * lf
}

fn check_binomial_args(n: u64, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("binomial with zero trials"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "binomial probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// `ln P(Bin(n, p) <= k)`.
pub fn ln_binomial_cdf(k: u64, n: u64, p: f64) -> Result<f64> {
    check_binomial_args(n, p)?;
    if k >= n || p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let q = 1.0 - p;
    let mode = (((n + 1) as f64 * p).floor() as u64).min(n);
    let anchor = k.min(mode);

    // Terms relative to the anchor, which is the largest term in [0, k].
    let mut total = 1.0_f64;
    let mut term = 1.0_f64;
    let down = q / p;
    for i in (1..=anchor).rev() {
        term *= i as f64 / (n - i + 1) as f64 * down;
        total += term;
        if term < total * 1e-17 {
            break;
        }
    }
    let up = p / q;
    term = 1.0;
    for i in anchor..k {
        term *= (n - i) as f64 / (i + 1) as f64 * up;
        total += term;
        if term < total * 1e-17 {
            break;
        }
    }
    Ok((ln_pmf(anchor, n, p, q) + total.ln()).min(0.0))
}

/// `P(Bin(n, p) <= k)`; 1 when `k >= n`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> Result<f64> {
    Ok(ln_binomial_cdf(k, n, p)?.exp())
}

/// Bernoulli KL divergence `a ln(a/b) + (1-a) ln((1-a)/(1-b))` with
/// `0 ln 0 = 0`.
pub fn h1(a: f64, b: f64) -> f64 {
    let left = if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    let right = if a == 1.0 {
        0.0
    } else {
        (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln()
    };
    left + right
}

/// Hoeffding-Bentkus p-value for the null "risk >= alpha" given an
/// empirical risk `r_hat` of a [0, 1]-bounded loss over `m` samples:
/// `min(1, exp(-m h1(min(r_hat, alpha), alpha)), e * P(Bin(m, alpha) <= ceil(m r_hat)))`.
pub fn hb_pvalue(r_hat: f64, alpha: f64, m: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r_hat) {
        return Err(Error::invalid(format!(
            "empirical risk {r_hat} outside [0, 1]"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    if m == 0 {
        return Err(Error::invalid("p-value over zero samples"));
    }
    let mf = m as f64;
    let hoeffding = (-mf * h1(r_hat.min(alpha), alpha)).exp();
    // exact integers must not round up past themselves
    let k = ((mf * r_hat - 1e-9).ceil().max(0.0) as u64).min(m);
    let bentkus = std::f64::consts::E * binomial_cdf(k, m, alpha)?;
    Ok(hoeffding.min(bentkus).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stirlerr_table_joins_series() {
        // series at 15 agrees with the table value to ~1e-9
        let n = 15.0_f64;
        let nn = n * n;
        let series = (1.0 / 12.0
            - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / 1188.0 / nn) / nn) / nn) / nn)
            / n;
        assert!((series - STIRLERR_SMALL[15]).abs() < 1e-9);
    }

    #[test]
    fn cdf_edge_cases() {
        assert_eq!(binomial_cdf(10, 10, 0.3).unwrap(), 1.0);
        assert_eq!(binomial_cdf(12, 10, 0.3).unwrap(), 1.0);
        assert_eq!(binomial_cdf(0, 10, 0.0).unwrap(), 1.0);
        assert_eq!(binomial_cdf(9, 10, 1.0).unwrap(), 0.0);
        assert!(binomial_cdf(1, 10, 1.5).is_err());
        assert!(binomial_cdf(1, 10, -0.1).is_err());
        assert!(binomial_cdf(1, 0, 0.5).is_err());
    }

    #[test]
    fn cdf_small_exact_values() {
        // (1 + 3) / 8
        assert!((binomial_cdf(1, 3, 0.5).unwrap() - 0.5).abs() < 1e-15);
        // (0.85)^400, compared in log space
        let ln = ln_binomial_cdf(0, 400, 0.15).unwrap();
        let expected = 400.0 * 0.85_f64.ln();
        assert!(((ln - expected) / expected).abs() < 1e-14);
    }

    #[test]
    fn cdf_large_n_is_normalised() {
        let n = 100_000;
        let p = 0.3;
        let mode = 30_000;
        let below = binomial_cdf(mode, n, p).unwrap();
        assert!(below > 0.49 && below < 0.51);
        // far tail stays finite in log space
        let ln = ln_binomial_cdf(100, n, p).unwrap();
        assert!(ln.is_finite() && ln < -20_000.0);
    }

    #[test]
    fn h1_conventions() {
        assert_eq!(h1(0.3, 0.3), 0.0);
        assert!((h1(1.0, 0.5) - 2.0_f64.ln()).abs() < 1e-15);
        assert!((h1(0.0, 0.15) + 0.85_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn hb_spot_values() {
        // r_hat = alpha: the Hoeffding term is 1
        let p = hb_pvalue(0.15, 0.15, 400).unwrap();
        let b = std::f64::consts::E * binomial_cdf(60, 400, 0.15).unwrap();
        assert!((p - b.min(1.0)).abs() < 1e-15);
        // r_hat = 0: the Hoeffding term (1 - alpha)^m is e times below Bentkus
        let p = hb_pvalue(0.0, 0.15, 400).unwrap();
        let expected = (400.0 * 0.85_f64.ln()).exp();
        assert!(((p - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn hb_floor_for_tiny_sample() {
        // (0.99)^10 ~ 0.904, so nothing can be certified at m = 10
        let p = hb_pvalue(0.0, 0.01, 10).unwrap();
        assert!((p - 0.99_f64.powi(10)).abs() < 1e-15);
        // all losses observed: no evidence that the risk is small
        assert_eq!(hb_pvalue(1.0, 0.5, 10).unwrap(), 1.0);
    }

    #[test]
    fn hb_rejects_bad_inputs() {
        assert!(hb_pvalue(1.2, 0.1, 10).is_err());
        assert!(hb_pvalue(0.1, 0.0, 10).is_err());
        assert!(hb_pvalue(0.1, 1.0, 10).is_err());
        assert!(hb_pvalue(0.1, 0.5, 0).is_err());
    }

    #[test]
    fn hb_ceiling_tolerates_representation_error() {
        // 0.15 * 400 = 60.00000000000001 in floating point
        let a = hb_pvalue(60.0 / 400.0, 0.2, 400).unwrap();
        let b = std::f64::consts::E * binomial_cdf(60, 400, 0.2).unwrap();
        assert!((a - b.min((-400.0 * h1(0.15, 0.2)).exp())).abs() < 1e-15);
    }
}
