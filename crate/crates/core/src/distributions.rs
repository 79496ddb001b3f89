//! Binomial(n, 1/2) and negative-binomial(d, 1/2) distribution functions.
//!
//! Every competition procedure only ever needs fair-coin distributions, so
//! the success probability is fixed at one half. Point masses are evaluated
//! with Loader's saddle-point expansion (`stirlerr` + `bd0`), which keeps a
//! relative error near machine precision even for `n` in the millions, and
//! tails are summed over the lighter side of the distribution by the pmf
//! ratio recurrence.
//!
//! The negative binomial follows the "successes before the d-th failure"
//! convention, `P(X = k) = C(k + d - 1, k) / 2^(k + d)`. It reduces to the
//! binomial through `P(X <= k) = P(B(k + d, 1/2) <= k)`.

use crate::error::{domain, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

// ln(n!) - ((n + 1/2) ln n - n + ln(2 pi) / 2) for n = 0..=15.
#[allow(clippy::excessive_precision)]
const STIRLERR_SMALL: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258,
    0.041_340_695_955_409_294,
    0.027_677_925_684_998_339,
    0.020_790_672_103_765_093,
    0.016_644_691_189_821_192,
    0.013_876_128_823_070_748,
    0.011_896_709_945_891_770,
    0.010_411_265_261_972_096,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_530,
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
            let s1 = s + ej / (2 * j + 1) as f64;
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

/// `P[B(n, 1/2) = x]` for `0 <= x <= n`.
fn binom_pmf(n: u64, x: u64) -> f64 {
    debug_assert!(x <= n);
    if x == 0 || x == n {
        return half_pow(n);
    }
    let nf = n as f64;
    let xf = x as f64;
    let half = nf / 2.0;
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(xf, half) - bd0(nf - xf, half);
    let lf = LN_2PI + xf.ln() + (-xf / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

fn half_pow(n: u64) -> f64 {
    if n > 1100 {
        0.0
    } else {
        0.5f64.powi(n as i32)
    }
}

// Re-anchor the recurrence periodically so rounding drift stays bounded.
const REANCHOR: u64 = 256;

/// `P[B(n, 1/2) <= k]` for `0 <= k` and `2k < n` (the lighter lower tail).
fn lower_tail_sum(n: u64, k: u64) -> f64 {
    let mut term = binom_pmf(n, k);
    let mut sum = term;
    let mut j = k;
    while j > 0 {
        // pmf(j - 1) = pmf(j) * j / (n - j + 1)
        term *= j as f64 / (n - j + 1) as f64;
        j -= 1;
        if (k - j).is_multiple_of(REANCHOR) {
            term = binom_pmf(n, j);
        }
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum.min(1.0)
}

// Up to here the coefficient sums fit in integers and the CDF is a single
// rounding of an exact dyadic rational, so boundary cases like
// `P[B(3, 1/2) <= 1] = 1/2` compare exactly.
const EXACT_MAX_N: u64 = 62;

fn exact_cdf(n: u64, k: u64) -> f64 {
    let (mut c, mut sum) = (1u128, 1u128);
    for j in 0..k {
        c = c * (n - j) as u128 / (j + 1) as u128;
        sum += c;
    }
    sum as f64 * 0.5f64.powi(n as i32)
}

/// Lower CDF `P[B(n, 1/2) <= k]` without argument validation.
pub(crate) fn binom_cdf(n: u64, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as u64;
    if k >= n {
        return 1.0;
    }
    if n <= EXACT_MAX_N {
        exact_cdf(n, k)
    } else if 2 * k + 1 == n {
        // the two halves of an odd row are mirror images
        0.5
    } else if 2 * k < n {
        lower_tail_sum(n, k)
    } else {
        // P[B <= k] = 1 - P[B >= k + 1] = 1 - P[B <= n - k - 1]
        1.0 - lower_tail_sum(n, n - k - 1)
    }
}

/// `P[NB(d, 1/2) <= k]` without argument validation (`d >= 1`).
pub(crate) fn nb_cdf(d: u64, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    binom_cdf(k as u64 + d, k)
}

/// `G_d(k) = P[NB(d, 1/2) >= k]` without argument validation (`d >= 1`).
pub(crate) fn nb_sf_ge(d: u64, k: i64) -> f64 {
    if k <= 0 {
        return 1.0;
    }
    // X >= k  <=>  fewer than d failures among the first k + d - 1 trials
    binom_cdf(k as u64 + d - 1, d as i64 - 1)
}

/// Smallest `i` with `pred(i)` true, for a predicate monotone in `i >= 0`.
fn search_min(start: u64, pred: impl Fn(u64) -> bool) -> u64 {
    if pred(0) {
        return 0;
    }
    let mut lo = 0u64; // pred(lo) is false
    let mut hi = start.max(1);
    while !pred(hi) {
        lo = hi;
        hi = hi.saturating_mul(2).saturating_add(1);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Upper quantile of `NB(d, 1/2)`: the smallest `i` with `P[X > i] <= u`.
///
/// Mathematically this is the `1 - u` quantile; computing it from the upper
/// tail keeps it exact when `u` is far below the spacing of doubles near one.
/// Requires `u > 0`.
pub(crate) fn nb_upper_quantile(d: u64, u: f64) -> u64 {
    debug_assert!(u > 0.0);
    search_min(d, |i| nb_sf_ge(d, i as i64 + 1) <= u)
}

/// `P[B(n, 1/2) <= k]`.
///
/// Returns 0 below the support and 1 at or above `n`.
pub fn binom_cdf_half(n: i64, k: i64) -> Result<f64> {
    if n < 0 {
        return domain(format!("binomial size must be non-negative, got {n}"));
    }
    Ok(binom_cdf(n as u64, k))
}

/// `P[NB(d, 1/2) <= k]`, counting successes before the d-th failure.
pub fn nb_cdf_half(d: i64, k: i64) -> Result<f64> {
    check_d(d)?;
    Ok(nb_cdf(d as u64, k))
}

/// `G_d(k) = P[NB(d, 1/2) >= k] = 1 - F(k - 1)`; equals 1 for `k <= 0`.
pub fn nb_upper_tail(d: i64, k: i64) -> Result<f64> {
    check_d(d)?;
    Ok(nb_sf_ge(d as u64, k))
}

/// `min { i >= 0 : P[NB(d, 1/2) <= i] >= q }` for `q` in (0, 1).
pub fn nb_quantile(d: i64, q: f64) -> Result<u64> {
    check_d(d)?;
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("quantile level must lie in (0, 1), got {q}"));
    }
    let d = d as u64;
    Ok(search_min(d, |i| nb_cdf(d, i as i64) >= q))
}

fn check_d(d: i64) -> Result<()> {
    if d < 1 {
        domain(format!("negative-binomial size must be positive, got {d}"))
    } else {
        Ok(())
    }
}
