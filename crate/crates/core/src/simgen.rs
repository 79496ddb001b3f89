//! Seeded data generators with ground truth.
//!
//! `gen_spectrum_id` simulates database search: each spectrum is native
//! (its generating peptide is among the `n` candidates) or foreign. A native
//! spectrum scores `X ~ 1 - Beta(a, b)` against its generating peptide and
//! `Y ~ 1 - Beta(1, n - 1)` against the best of the other `n - 1`
//! candidates; a foreign one only sees random candidates, `Y ~ 1 - Beta(1, n)`.
//! The decoy score is always `1 - Beta(1, n)`. The target score is
//! `max(X, Y)` and the match is incorrect (a true null) when
//! `max(Y, Z~) > X`.
//!
//! `gen_generic_null` produces labels that satisfy the fair-coin
//! assumption exactly, with every false null placed above every true null.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::competition::{Label, LabeledHypothesis, ScorePair, SimulationTruth};
use crate::error::{domain, Error, Result};
use crate::seed;

/// Spectrum-specific Gumbel location and scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationScale {
    pub location: f64,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumIdParams {
    /// Number of spectra.
    pub m: usize,
    /// Fraction of foreign spectra.
    pub pi0: f64,
    pub a: f64,
    pub b: f64,
    /// Candidate peptides per spectrum.
    pub n_candidates: usize,
    pub calibrated: bool,
    /// Per-spectrum Gumbel parameters drawn for uncalibrated scores.
    #[serde(skip)]
    pub location_scale_pool: Vec<LocationScale>,
    pub seed: u64,
}

impl Default for SpectrumIdParams {
    fn default() -> Self {
        SpectrumIdParams {
            m: 2000,
            pi0: 0.5,
            a: 0.05,
            b: 10.0,
            n_candidates: 100,
            calibrated: true,
            location_scale_pool: Vec::new(),
            seed: seed::DEFAULT_SEED,
        }
    }
}

/// Synthetic stand-in for a (location, scale) pool estimated on real data:
/// `size` pairs with location uniform on [20, 40] and scale uniform on [3, 8].
pub fn synthetic_pool(size: usize, seed: u64) -> Vec<LocationScale> {
    let mut rng = seed::Rng::seed_from_u64(seed);
    (0..size)
        .map(|_| LocationScale { location: rng.gen_range(20.0..=40.0), scale: rng.gen_range(3.0..=8.0) })
        .collect()
}

/// Reads a tab-separated `location<TAB>scale` pool file.
pub fn read_pool(path: &Path) -> Result<Vec<LocationScale>> {
    let text = std::fs::read_to_string(path)?;
    let mut pool = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let parse = |c: Option<&str>| -> Result<f64> {
            c.and_then(|c| c.trim().parse().ok())
                .ok_or_else(|| Error::Data(format!("pool line {}: expected location<TAB>scale", n + 1)))
        };
        let location = parse(cols.next())?;
        let scale = parse(cols.next())?;
        pool.push(LocationScale { location, scale });
    }
    Ok(pool)
}

/// Quantile of Gumbel(location, scale) at `1 - b`, taking `b` rather than
/// the probability itself so scores near 1 keep their resolution.
fn gumbel_quantile_of_complement(b: f64, ls: LocationScale) -> f64 {
    // F^{-1}(p) = mu - beta ln(-ln p), with -ln(1 - b) = -ln_1p(-b)
    let b = b.max(f64::MIN_POSITIVE);
    ls.location - ls.scale * (-(-b).ln_1p()).ln()
}

fn check_params(p: &SpectrumIdParams) -> Result<()> {
    if p.m == 0 {
        return domain("m must be positive");
    }
    if !(0.0..=1.0).contains(&p.pi0) {
        return domain(format!("pi0 must lie in [0, 1], got {}", p.pi0));
    }
    if !(p.a > 0.0 && p.b > 0.0) {
        return domain(format!("Beta shapes must be positive, got a={} b={}", p.a, p.b));
    }
    if p.n_candidates < 2 {
        return domain("at least two candidate peptides are required");
    }
    if !p.calibrated {
        if p.location_scale_pool.is_empty() {
            return domain("uncalibrated scores need a non-empty location/scale pool");
        }
        if let Some(ls) = p.location_scale_pool.iter().find(|ls| !ls.scale.is_finite() || ls.scale <= 0.0 || !ls.location.is_finite()) {
            return domain(format!("invalid Gumbel parameters {ls:?}"));
        }
    }
    Ok(())
}

fn sign(a: f64, b: f64) -> i8 {
    if a > b {
        1
    } else if a < b {
        -1
    } else {
        0
    }
}

/// One simulated spectrum-ID dataset.
pub fn gen_spectrum_id(params: &SpectrumIdParams) -> Result<(Vec<ScorePair>, SimulationTruth)> {
    check_params(params)?;
    let mut rng = seed::Rng::seed_from_u64(params.seed);
    // separate stream so calibrated and uncalibrated runs share their draws
    let mut pool_rng = seed::stream(params.seed, 1);
    let native = Beta::new(params.a, params.b).map_err(|e| Error::Domain(e.to_string()))?;
    let others_native = Beta::new(1.0, (params.n_candidates - 1) as f64).map_err(|e| Error::Domain(e.to_string()))?;
    let others_all = Beta::new(1.0, params.n_candidates as f64).map_err(|e| Error::Domain(e.to_string()))?;

    let mut pairs = Vec::with_capacity(params.m);
    let mut truth = Vec::with_capacity(params.m);
    for _ in 0..params.m {
        let foreign = rng.gen::<f64>() < params.pi0;
        // draws as the Beta variates B; the calibrated score is 1 - B
        let (bx, by) = if foreign {
            (None, others_all.sample(&mut rng))
        } else {
            (Some(native.sample(&mut rng)), others_native.sample(&mut rng))
        };
        let bz = others_all.sample(&mut rng);

        let x = bx.map_or(f64::NEG_INFINITY, |b| 1.0 - b);
        let (y, z_decoy) = (1.0 - by, 1.0 - bz);
        truth.push(y.max(z_decoy) > x);

        let pair = if params.calibrated {
            ScorePair { target_score: x.max(y), decoy_score: z_decoy }
        } else {
            let ls = *params.location_scale_pool.choose(&mut pool_rng).expect("pool checked non-empty");
            let gx = bx.map_or(f64::NEG_INFINITY, |b| gumbel_quantile_of_complement(b, ls));
            let gy = gumbel_quantile_of_complement(by, ls);
            let gz = gumbel_quantile_of_complement(bz, ls);
            let mapped = ScorePair { target_score: gx.max(gy), decoy_score: gz };
            // a strictly increasing map can merge values but never reorder them
            let before = sign(x.max(y), z_decoy);
            let after = sign(mapped.target_score, mapped.decoy_score);
            assert!(after == before || after == 0, "Gumbel transform reversed a competition");
            mapped
        };
        pairs.push(pair);
    }
    Ok((pairs, SimulationTruth { is_true_null: truth }))
}

/// Hypotheses satisfying the fair-coin assumption exactly.
///
/// Scores are distinct random values; the `num_false` highest belong to
/// false nulls labeled as target wins, the rest to true nulls with iid fair
/// labels. The output is in random order with `source` equal to position.
pub fn gen_generic_null(m: usize, num_false: usize, seed: u64) -> Result<(Vec<LabeledHypothesis>, SimulationTruth)> {
    if m == 0 {
        return domain("m must be positive");
    }
    if num_false > m {
        return domain(format!("num_false={num_false} exceeds m={m}"));
    }
    let mut rng = seed::Rng::seed_from_u64(seed);
    let mut scores: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    scores.dedup();
    while scores.len() < m {
        // duplicate 53-bit uniforms: redraw the whole set
        scores = (0..m).map(|_| rng.gen::<f64>()).collect();
        scores.sort_by(|a, b| b.total_cmp(a));
        scores.dedup();
    }
    let mut items: Vec<(f64, Label, bool)> = scores
        .iter()
        .enumerate()
        .map(|(rank, &s)| {
            if rank < num_false {
                (s, Label::Target, false)
            } else {
                let label = if rng.gen::<bool>() { Label::Target } else { Label::Decoy };
                (s, label, true)
            }
        })
        .collect();
    items.shuffle(&mut rng);
    let hyps = items
        .iter()
        .enumerate()
        .map(|(source, &(score, label, _))| LabeledHypothesis { score, label, source })
        .collect();
    let truth = SimulationTruth { is_true_null: items.iter().map(|t| t.2).collect() };
    Ok((hyps, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::competition::{build_sequence, compete, TiePolicy};

    #[test]
    fn foreign_only_is_fair() {
        let params = SpectrumIdParams { m: 100_000, pi0: 1.0, seed: 5, ..Default::default() };
        let (pairs, truth) = gen_spectrum_id(&params).unwrap();
        assert!(truth.is_true_null.iter().all(|&t| t));
        assert!(pairs.iter().all(|p| p.target_score.is_finite()));
        let targets = pairs.iter().filter(|p| p.target_score > p.decoy_score).count();
        let se = (0.25 / 100_000f64).sqrt();
        assert!((targets as f64 / 1e5 - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn native_bias_is_conservative() {
        let params = SpectrumIdParams { m: 200_000, pi0: 0.0, seed: 6, ..Default::default() };
        let (pairs, truth) = gen_spectrum_id(&params).unwrap();
        let nulls: Vec<&ScorePair> = pairs.iter().zip(&truth.is_true_null).filter(|(_, &t)| t).map(|(p, _)| p).collect();
        let n = nulls.len() as f64;
        let decoy_wins = nulls.iter().filter(|p| p.target_score < p.decoy_score).count() as f64;
        assert!(decoy_wins / n >= 0.5 - 2.0 * (0.25 / n).sqrt());
        // false nulls are always target wins
        for (p, &t) in pairs.iter().zip(&truth.is_true_null) {
            if !t {
                assert!(p.target_score > p.decoy_score);
            }
        }
    }

    #[test]
    fn uncalibrated_preserves_labels() {
        let pool = synthetic_pool(500, 1);
        let cal = SpectrumIdParams { m: 20_000, pi0: 0.3, seed: 9, ..Default::default() };
        let unc = SpectrumIdParams { calibrated: false, location_scale_pool: pool, ..cal.clone() };
        let (p1, t1) = gen_spectrum_id(&cal).unwrap();
        let (p2, t2) = gen_spectrum_id(&unc).unwrap();
        assert_eq!(t1, t2);
        let mut differ = 0;
        for (a, b) in p1.iter().zip(&p2) {
            let (sa, sb) = (sign(a.target_score, a.decoy_score), sign(b.target_score, b.decoy_score));
            assert!(sa == sb || sb == 0);
            differ += (a.target_score != b.target_score) as usize;
        }
        assert!(differ > 0);
    }

    #[test]
    fn spectrum_id_errors_and_determinism() {
        assert!(gen_spectrum_id(&SpectrumIdParams { pi0: 1.5, ..Default::default() }).is_err());
        assert!(gen_spectrum_id(&SpectrumIdParams { a: 0.0, ..Default::default() }).is_err());
        assert!(gen_spectrum_id(&SpectrumIdParams { calibrated: false, ..Default::default() }).is_err());
        let bad_pool = vec![LocationScale { location: 1.0, scale: -1.0 }];
        assert!(gen_spectrum_id(&SpectrumIdParams { calibrated: false, location_scale_pool: bad_pool, ..Default::default() }).is_err());
        let p = SpectrumIdParams { m: 500, ..Default::default() };
        assert_eq!(gen_spectrum_id(&p).unwrap(), gen_spectrum_id(&p).unwrap());
        let q = SpectrumIdParams { seed: p.seed + 1, ..p.clone() };
        assert_ne!(gen_spectrum_id(&p).unwrap().0, gen_spectrum_id(&q).unwrap().0);
    }

    #[test]
    fn foreign_sentinel_forces_null() {
        let p = SpectrumIdParams { m: 1000, pi0: 1.0, ..Default::default() };
        let (pairs, truth) = gen_spectrum_id(&p).unwrap();
        let mut rng = seed::Rng::seed_from_u64(0);
        let labeled = compete(&pairs, TiePolicy::RandomBreak, &mut rng).unwrap();
        assert_eq!(labeled.len(), 1000);
        assert!(truth.is_true_null.iter().all(|&t| t));
    }

    #[test]
    fn generic_null_structure() {
        let (h, t) = gen_generic_null(100_000, 0, 3).unwrap();
        let plus = h.iter().filter(|x| x.label == Label::Target).count() as f64;
        assert!((plus / 1e5 - 0.5).abs() < 4.0 * (0.25 / 1e5f64).sqrt());
        assert!(t.is_true_null.iter().all(|&x| x));

        let (h, t) = gen_generic_null(50, 50, 3).unwrap();
        assert!(h.iter().all(|x| x.label == Label::Target));
        assert!(t.is_true_null.iter().all(|&x| !x));

        let (h, t) = gen_generic_null(300, 40, 4).unwrap();
        let seq = build_sequence(&h, &mut seed::Rng::seed_from_u64(1)).unwrap();
        let s: Vec<f64> = seq.hypotheses().iter().map(|x| x.score).collect();
        assert!(s.windows(2).all(|w| w[0] > w[1]));
        for (pos, x) in seq.hypotheses().iter().enumerate() {
            assert_eq!(t.is_true_null[x.source], pos >= 40);
        }
        assert!(gen_generic_null(10, 11, 0).is_err());
        assert!(gen_generic_null(0, 0, 0).is_err());
    }

    #[test]
    fn pool_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.tsv");
        std::fs::write(&path, "# location\tscale\n25.0\t4.5\n31\t6\n").unwrap();
        let pool = read_pool(&path).unwrap();
        assert_eq!(pool, vec![LocationScale { location: 25.0, scale: 4.5 }, LocationScale { location: 31.0, scale: 6.0 }]);
        std::fs::write(&path, "25.0\n").unwrap();
        assert!(read_pool(&path).is_err());
    }
}
