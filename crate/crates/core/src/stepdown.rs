//! FDP-SD: FDP control by stepping down the decoy-win counts.
//!
//! For each prefix length `i` the bound `delta(i)` is the largest decoy
//! count `d` in `{-1, 0, ..., i}` for which
//! `P[B(k(i, d) + d, 1/2) <= d] <= gamma`, with `k(i, d) = floor((i - d) alpha) + 1`.
//! If `k(i, d)` or more of the target wins were true nulls the FDP would
//! exceed `alpha`, and the number of true-null target wins among at most
//! `k(i, d) + d` true nulls is stochastically bounded by that binomial.
//!
//! The procedure scans `i = i0, i0 + 1, ...` and stops at the first
//! `D_i > delta(i)`. The randomized variant replaces `delta(i)` by a draw
//! from `{delta(i), delta(i) + 1}` whose mixture attains level `gamma`
//! exactly, coupling consecutive draws so the rejection region stays nested.

use rand::Rng;

use crate::competition::{CompetitionSequence, DiscoveryReport, ProcedureId};
use crate::distributions::binom_cdf;
use crate::error::{check_unit_open, domain, Error, Result};

/// `k(i, d) = floor((i - d) alpha) + 1`; may be zero or negative when `d > i`.
fn k_of(i: usize, d: i64, alpha: f64) -> i64 {
    (((i as i64 - d) as f64) * alpha).floor() as i64 + 1
}

/// `P[B(k(i, d) + d, 1/2) <= d]`.
pub fn bound_cdf(i: usize, d: i64, alpha: f64) -> f64 {
    if d < 0 {
        return 0.0;
    }
    let n = k_of(i, d, alpha) + d;
    if n <= d {
        return 1.0;
    }
    binom_cdf(n as u64, d)
}

fn qualifies(i: usize, d: i64, alpha: f64, gamma: f64) -> bool {
    d < 0 || bound_cdf(i, d, alpha) <= gamma
}

/// Smallest `c` with `2^-c <= gamma`, i.e. `ceil(log2(1 / gamma))`.
fn log2_ceil_inv(gamma: f64) -> i64 {
    let mut c = 0i64;
    let mut p = 1.0f64;
    while p > gamma {
        p *= 0.5;
        c += 1;
    }
    c
}

/// `i0 = max(1, ceil((ceil(log2(1/gamma)) - 1) / alpha))`, the first prefix
/// length whose bound is non-negative.
///
/// The ceiling is resolved with the same floating floor used for `k(i, d)`,
/// so `delta(i) >= 0` holds exactly for `i >= i0`.
pub fn compute_i0(alpha: f64, gamma: f64) -> Result<usize> {
    check_unit_open("alpha", alpha)?;
    check_unit_open("gamma", gamma)?;
    let need = log2_ceil_inv(gamma); // delta(i) >= 0  <=>  k(i, 0) >= need
    let mut i0 = ((need - 1) as f64 / alpha).ceil().max(1.0) as usize;
    while i0 > 1 && k_of(i0 - 1, 0, alpha) >= need {
        i0 -= 1;
    }
    while k_of(i0, 0, alpha) < need {
        i0 += 1;
    }
    Ok(i0)
}

/// The stepdown bounds `delta(1..=m)` for one `(alpha, gamma)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaTable {
    pub alpha: f64,
    pub gamma: f64,
    pub i0: usize,
    delta: Vec<i64>,
}

impl DeltaTable {
    pub fn compute(m: usize, alpha: f64, gamma: f64) -> Result<DeltaTable> {
        if m < 1 {
            return domain("delta table needs m >= 1");
        }
        let i0 = compute_i0(alpha, gamma)?;
        let mut delta = Vec::with_capacity(m);
        let mut d = -1i64;
        for i in 1..=m {
            // delta is non-decreasing in i and the qualifying set is {-1, ..., delta(i)}
            while d < i as i64 && qualifies(i, d + 1, alpha, gamma) {
                d += 1;
            }
            delta.push(d);
        }
        Ok(DeltaTable { alpha, gamma, i0, delta })
    }

    pub fn m(&self) -> usize {
        self.delta.len()
    }

    /// `delta(i)` for `1 <= i <= m`.
    pub fn delta(&self, i: usize) -> i64 {
        self.delta[i - 1]
    }

    pub fn values(&self) -> &[i64] {
        &self.delta
    }
}

/// Deterministic FDP-SD.
///
/// The bounds are computed on the fly and the scan stops at the first
/// violation.
pub fn run_fdp_sd(seq: &CompetitionSequence, alpha: f64, gamma: f64) -> Result<DiscoveryReport> {
    let i0 = compute_i0(alpha, gamma)?;
    let k = stepdown_threshold(seq, i0, alpha, gamma);
    Ok(seq.report(k, ProcedureId::FdpSd, alpha, Some(gamma)))
}

fn stepdown_threshold(seq: &CompetitionSequence, i0: usize, alpha: f64, gamma: f64) -> usize {
    let m = seq.len();
    if i0 > m {
        return 0;
    }
    let mut d = -1i64;
    for i in 1..=m {
        while d < i as i64 && qualifies(i, d + 1, alpha, gamma) {
            d += 1;
        }
        if i >= i0 && seq.decoys_at(i) as i64 > d {
            return if i == i0 { 0 } else { i - 1 };
        }
    }
    m
}

/// Randomized FDP-SD.
pub fn run_fdp_sd_randomized<R: Rng + ?Sized>(
    seq: &CompetitionSequence,
    alpha: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<DiscoveryReport> {
    let plan = StepdownPlan::new(seq.len().max(1), alpha, gamma)?;
    plan.run_randomized(seq, rng)
}

/// Precomputed bounds and randomization weights for sequences of length up
/// to `m`; reusable across replicates with the same `(m, alpha, gamma)`.
#[derive(Clone, Debug)]
pub struct StepdownPlan {
    table: DeltaTable,
    // w_i = P(gamma_i = delta_i), index i - 1
    weights: Vec<f64>,
}

/// Level probabilities `(p0, p1)` at `delta(i)` and `delta(i) + 1`, and the
/// weight `w` with `w p0 + (1 - w) p1 = gamma`.
pub fn randomization_weight(i: usize, delta: i64, alpha: f64, gamma: f64) -> (f64, f64, f64) {
    let p0 = bound_cdf(i, delta, alpha);
    let p1 = bound_cdf(i, delta + 1, alpha);
    let w = if p1 <= gamma { 0.0 } else { ((p1 - gamma) / (p1 - p0)).clamp(0.0, 1.0) };
    (p0, p1, w)
}

impl StepdownPlan {
    pub fn new(m: usize, alpha: f64, gamma: f64) -> Result<StepdownPlan> {
        let table = DeltaTable::compute(m, alpha, gamma)?;
        let weights = (1..=m)
            .map(|i| randomization_weight(i, table.delta(i), alpha, gamma).2)
            .collect();
        Ok(StepdownPlan { table, weights })
    }

    pub fn table(&self) -> &DeltaTable {
        &self.table
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i - 1]
    }

    fn check_len(&self, seq: &CompetitionSequence) -> Result<()> {
        if seq.len() > self.table.m() {
            return domain(format!("sequence of length {} exceeds plan size {}", seq.len(), self.table.m()));
        }
        Ok(())
    }

    pub fn run(&self, seq: &CompetitionSequence) -> Result<DiscoveryReport> {
        self.check_len(seq)?;
        let t = &self.table;
        let m = seq.len();
        let mut k = if t.i0 > m { 0 } else { m };
        for i in t.i0..=m {
            if seq.decoys_at(i) as i64 > t.delta(i) {
                k = if i == t.i0 { 0 } else { i - 1 };
                break;
            }
        }
        Ok(seq.report(k, ProcedureId::FdpSd, t.alpha, Some(t.gamma)))
    }

    pub fn run_randomized<R: Rng + ?Sized>(&self, seq: &CompetitionSequence, rng: &mut R) -> Result<DiscoveryReport> {
        self.check_len(seq)?;
        let t = &self.table;
        let m = seq.len();
        let report = |k| seq.report(k, ProcedureId::FdpSdRandomized, t.alpha, Some(t.gamma));
        if t.i0 > m {
            return Ok(report(0));
        }
        let draw = |rng: &mut R, w: f64, delta: i64| if rng.gen::<f64>() < w { delta } else { delta + 1 };

        let mut level = -1i64; // gamma_{i-1}
        for i in 1..=m {
            let delta = t.delta(i);
            let w = self.weight(i);
            level = if i == 1 || delta > t.delta(i - 1) {
                draw(rng, w, delta)
            } else if level == delta + 1 {
                level
            } else {
                let w_prev = self.weight(i - 1);
                let w_cond = if w_prev > 0.0 {
                    (w / w_prev).clamp(0.0, 1.0)
                } else if w == 0.0 {
                    1.0
                } else {
                    return Err(Error::Internal(format!(
                        "randomized stepdown at i={i}: previous weight is zero but current weight is {w}"
                    )));
                };
                draw(rng, w_cond, delta)
            };
            if i >= t.i0 && seq.decoys_at(i) as i64 > level {
                return Ok(report(if i == t.i0 { 0 } else { i - 1 }));
            }
        }
        Ok(report(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::competition::Label;
    use rand::SeedableRng;

    /// Binomial cdf by exact pmf summation with integer binomial coefficients.
    fn cdf_oracle(n: i64, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        if k >= n {
            return 1.0;
        }
        let mut c = 1.0f64;
        let mut sum = 0.0;
        for j in 0..=k {
            if j > 0 {
                c = c * (n - j + 1) as f64 / j as f64;
            }
            sum += c;
        }
        sum / 2f64.powi(n as i32)
    }

    fn delta_oracle(i: usize, alpha: f64, gamma: f64) -> i64 {
        let mut best = -1;
        for d in 0..=i as i64 {
            let k = (((i as i64 - d) as f64) * alpha).floor() as i64 + 1;
            if cdf_oracle(k + d, d) <= gamma {
                best = d;
            }
        }
        best
    }

    fn labels(v: &[i64]) -> CompetitionSequence {
        let l: Vec<Label> = v.iter().map(|&x| Label::from_int(x).unwrap()).collect();
        CompetitionSequence::from_labels(&l)
    }

    #[test]
    fn i0_values() {
        assert_eq!(compute_i0(0.05, 0.05).unwrap(), 80);
        assert_eq!(compute_i0(0.1, 0.05).unwrap(), 40);
        assert_eq!(compute_i0(0.05, 0.5).unwrap(), 1);
        assert!(compute_i0(0.0, 0.5).is_err());
        assert!(compute_i0(0.5, 1.0).is_err());
    }

    #[test]
    fn delta_values() {
        let t = DeltaTable::compute(100, 0.05, 0.05).unwrap();
        assert_eq!(t.delta(79), -1);
        assert_eq!(t.delta(80), 0);
        assert!((bound_cdf(80, 1, 0.05) - 6.0 / 32.0).abs() < 1e-15);
        let t = DeltaTable::compute(3, 0.5, 0.5).unwrap();
        assert_eq!(t.values(), &[0, 0, 1]);
        assert!(DeltaTable::compute(0, 0.5, 0.5).is_err());
    }

    #[test]
    fn delta_matches_brute_force() {
        let mut rng = crate::seed::Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let i = rng.gen_range(1..=300);
            let alpha = rng.gen_range(0.01..0.5);
            let gamma = rng.gen_range(0.001..0.5);
            let t = DeltaTable::compute(i, alpha, gamma).unwrap();
            assert_eq!(t.delta(i), delta_oracle(i, alpha, gamma), "i={i} alpha={alpha} gamma={gamma}");
        }
    }

    #[test]
    fn delta_table_invariants() {
        for &(a, g) in &[(0.05, 0.05), (0.1, 0.01), (0.3, 0.2), (0.01, 0.001)] {
            let t = DeltaTable::compute(3000, a, g).unwrap();
            let v = t.values();
            assert!(v.windows(2).all(|w| w[0] <= w[1]));
            for i in 1..=3000 {
                assert_eq!(t.delta(i) >= 0, i >= t.i0, "alpha={a} gamma={g} i={i}");
            }
        }
    }

    #[test]
    fn fdp_sd_examples() {
        let r = run_fdp_sd(&labels(&[-1; 200]), 0.05, 0.05).unwrap();
        assert_eq!(r.k, 0);
        let r = run_fdp_sd(&labels(&[1, 1, 1, 1]), 0.5, 0.5).unwrap();
        assert_eq!((r.k, r.num_targets), (4, 4));
        let r = run_fdp_sd(&labels(&[1, 1, -1, -1]), 0.5, 0.5).unwrap();
        assert_eq!((r.k, r.num_targets), (3, 2));
        // i0 beyond m: nothing can be reported
        let r = run_fdp_sd(&labels(&[1; 10]), 0.05, 0.05).unwrap();
        assert_eq!(r.k, 0);
    }

    #[test]
    fn plan_matches_on_the_fly() {
        let mut rng = crate::seed::Rng::seed_from_u64(11);
        let plan = StepdownPlan::new(400, 0.1, 0.05).unwrap();
        for _ in 0..200 {
            let p = rng.gen_range(0.0..0.4);
            let v: Vec<i64> = (0..400).map(|_| if rng.gen::<f64>() < p { -1 } else { 1 }).collect();
            let seq = labels(&v);
            assert_eq!(plan.run(&seq).unwrap().k, run_fdp_sd(&seq, 0.1, 0.05).unwrap().k);
        }
    }

    #[test]
    fn randomized_dominates() {
        let mut rng = crate::seed::Rng::seed_from_u64(12);
        let plan = StepdownPlan::new(500, 0.1, 0.1).unwrap();
        for _ in 0..300 {
            let p = rng.gen_range(0.0..0.5);
            let v: Vec<i64> = (0..500).map(|_| if rng.gen::<f64>() < p { -1 } else { 1 }).collect();
            let seq = labels(&v);
            let det = plan.run(&seq).unwrap().k;
            for _ in 0..3 {
                assert!(plan.run_randomized(&seq, &mut rng).unwrap().k >= det);
            }
        }
        for seed in 0..20 {
            let mut r = crate::seed::Rng::seed_from_u64(seed);
            let k = run_fdp_sd_randomized(&labels(&[-1; 300]), 0.05, 0.05, &mut r).unwrap().k;
            assert_eq!(k, 0);
        }
    }

    #[test]
    fn randomization_is_calibrated() {
        for &(a, g) in &[(0.05, 0.05), (0.1, 0.01), (0.2, 0.1)] {
            let t = DeltaTable::compute(2000, a, g).unwrap();
            for i in 1..=2000 {
                let (p0, p1, w) = randomization_weight(i, t.delta(i), a, g);
                assert!(p0 <= g && p1 > g);
                assert!((w * p0 + (1.0 - w) * p1 - g).abs() < 1e-12);
            }
        }
    }
}
