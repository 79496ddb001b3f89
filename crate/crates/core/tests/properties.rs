use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;

use fdpband::bands::{bound_tdc_fdp, compute_d_max_tdc, run_tdc, BandSpec, BoundMethod};
use fdpband::competition::{discovery_counts, Label};
use fdpband::distributions::{binom_cdf_half, nb_cdf_half, nb_quantile, nb_upper_tail};
use fdpband::mc_quantiles::{build_tables, DrawMode, StandardizedQuantileTable, UniformQuantileTable};
use fdpband::stepdown::{bound_cdf, randomization_weight, run_fdp_sd, DeltaTable, StepdownPlan};
use fdpband::{build_sequence, true_fdp, CompetitionSequence, LabeledHypothesis, ProcedureId, SimulationTruth};

fn tables() -> &'static (UniformQuantileTable, StandardizedQuantileTable) {
    static TABLES: OnceLock<(UniformQuantileTable, StandardizedQuantileTable)> = OnceLock::new();
    TABLES.get_or_init(|| build_tables(120, &[0.05, 0.01], 20_000, 3).unwrap())
}

fn sequence(labels: &[bool]) -> CompetitionSequence {
    let l: Vec<Label> = labels.iter().map(|&t| if t { Label::Target } else { Label::Decoy }).collect();
    CompetitionSequence::from_labels(&l)
}

fn rng(seed: u64) -> fdpband::seed::Rng {
    fdpband::seed::Rng::seed_from_u64(seed)
}

fn delta_brute(i: usize, alpha: f64, gamma: f64) -> i64 {
    (-1..=i as i64).rev().find(|&d| d < 0 || bound_cdf(i, d, alpha) <= gamma).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn prefix_counts_are_consistent(labels in prop::collection::vec(any::<bool>(), 1..400)) {
        let seq = sequence(&labels);
        prop_assert_eq!(seq.decoys_at(0) + seq.targets_at(0), 0);
        for i in 1..=seq.len() {
            prop_assert_eq!((seq.decoys_at(i) + seq.targets_at(i)) as usize, i);
            let step = seq.decoys_at(i) - seq.decoys_at(i - 1);
            prop_assert!(step <= 1);
        }
    }

    #[test]
    fn sort_is_by_score_and_keeps_labels(
        scores in prop::collection::vec(0u8..20, 1..200),
        targets in prop::collection::vec(any::<bool>(), 200),
        seed in any::<u64>(),
    ) {
        let hyps: Vec<LabeledHypothesis> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| LabeledHypothesis {
                score: s as f64,
                label: if targets[i] { Label::Target } else { Label::Decoy },
                source: i,
            })
            .collect();
        let seq = build_sequence(&hyps, &mut rng(seed)).unwrap();
        let sorted = seq.hypotheses();
        prop_assert!(sorted.windows(2).all(|w| w[0].score >= w[1].score));
        for h in sorted {
            prop_assert_eq!(h.label, hyps[h.source].label);
        }
    }

    #[test]
    fn true_fdp_in_unit_interval(
        labels in prop::collection::vec(any::<bool>(), 1..300),
        nulls in prop::collection::vec(any::<bool>(), 300),
        alpha in 0.01f64..0.5,
    ) {
        let seq = sequence(&labels);
        let truth = SimulationTruth { is_true_null: nulls[..labels.len()].to_vec() };
        let report = run_tdc(&seq, alpha).unwrap();
        let q = true_fdp(&report, &truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        if report.num_targets == 0 {
            prop_assert_eq!(q, 0.0);
        }
        let (f, t) = discovery_counts(&report, &truth).unwrap();
        prop_assert_eq!(f + t, report.num_targets);
    }

    #[test]
    fn cdfs_are_monotone_and_bounded(n in 0i64..3000, d in 1i64..800, k in -2i64..3000) {
        let (a, b) = (binom_cdf_half(n, k).unwrap(), binom_cdf_half(n, k + 1).unwrap());
        prop_assert!((0.0..=1.0).contains(&a) && a <= b);
        let (a, b) = (nb_cdf_half(d, k).unwrap(), nb_cdf_half(d, k + 1).unwrap());
        prop_assert!((0.0..=1.0).contains(&a) && a <= b);
        let g = nb_upper_tail(d, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn nb_quantile_round_trip(d in 1i64..1000, q in 1e-9f64..(1.0 - 1e-9)) {
        let i = nb_quantile(d, q).unwrap() as i64;
        prop_assert!(nb_cdf_half(d, i).unwrap() >= q);
        prop_assert!(nb_cdf_half(d, i - 1).unwrap() < q);
    }

    #[test]
    fn upper_tail_quantile_equivalence(d in 1i64..=500, k_frac in 0.0f64..5.0, u in 1e-12f64..1.0) {
        let k = (k_frac * d as f64) as i64;
        let lhs = nb_upper_tail(d, k).unwrap() <= u;
        let rhs = k as u64 > nb_quantile(d, 1.0 - u).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn delta_matches_definition(i in 1usize..400, alpha in 0.01f64..0.5, gamma in 0.001f64..0.5) {
        let t = DeltaTable::compute(i, alpha, gamma).unwrap();
        prop_assert_eq!(t.delta(i), delta_brute(i, alpha, gamma));
        prop_assert!(t.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn randomized_weight_calibrates(i in 1usize..3000, alpha in 0.01f64..0.5, gamma in 0.001f64..0.5) {
        let t = DeltaTable::compute(i, alpha, gamma).unwrap();
        let d = t.delta(i);
        let (p0, p1, w) = randomization_weight(i, d, alpha, gamma);
        prop_assert!((0.0..=1.0).contains(&w));
        if p1 > p0 {
            prop_assert!((w * p0 + (1.0 - w) * p1 - gamma).abs() <= 1e-12);
        }
    }

    #[test]
    fn randomized_never_below_deterministic(
        labels in prop::collection::vec(prop::bool::weighted(0.85), 1..1500),
        alpha in prop::sample::select(vec![0.05, 0.1, 0.2]),
        gamma in prop::sample::select(vec![0.01, 0.05, 0.1]),
        seed in any::<u64>(),
    ) {
        let seq = sequence(&labels);
        let plan = StepdownPlan::new(seq.len(), alpha, gamma).unwrap();
        let det = plan.run(&seq).unwrap();
        prop_assert_eq!(det.k, run_fdp_sd(&seq, alpha, gamma).unwrap().k);
        prop_assert!(plan.run_randomized(&seq, &mut rng(seed)).unwrap().k >= det.k);
    }

    #[test]
    fn tdc_threshold_is_maximal(
        labels in prop::collection::vec(prop::bool::weighted(0.8), 1..500),
        alpha in 0.01f64..0.3,
    ) {
        let seq = sequence(&labels);
        let r = run_tdc(&seq, alpha).unwrap();
        let ok = |k: usize| seq.targets_at(k) > 0 && (seq.decoys_at(k) as f64 + 1.0) / seq.targets_at(k) as f64 <= alpha;
        if r.k > 0 {
            prop_assert!(ok(r.k));
            prop_assert!(r.num_decoys < compute_d_max_tdc(alpha, seq.len()).unwrap());
        }
        prop_assert!((r.k + 1..=seq.len()).all(|k| !ok(k)));
    }

    #[test]
    fn bounds_in_unit_interval_and_monotone_in_targets(
        t in 1usize..300,
        extra in 1usize..50,
        d in 0usize..8,
        method in prop::sample::select(BoundMethod::ALL.to_vec()),
        gamma in prop::sample::select(vec![0.05, 0.01]),
    ) {
        let (u, s) = tables();
        let spec = BandSpec { kind: fdpband::bands::BandKind::Kr, uniform: Some(u), standardized: Some(s), draw: DrawMode::Conservative };
        let alpha = 0.1;
        let eta = |targets: usize| {
            // T targets, then decoys; m is fixed so d_max is too
            let m = 400 + 12 * (d + 2);
            let labels: Vec<bool> = (0..m).map(|i| i < targets).collect();
            let seq = sequence(&labels);
            let report = seq.report(targets + d, ProcedureId::Tdc, alpha, None);
            bound_tdc_fdp(&seq, &report, gamma, method, &spec, &mut rng(0)).unwrap()
        };
        let (a, b) = (eta(t), eta(t + extra));
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b <= a, "eta({})={} < eta({})={}", t, a, t + extra, b);
    }
}

#[test]
fn table_invariants() {
    let (u, s) = tables();
    for (g, &gamma) in u.gammas.iter().enumerate() {
        for e in &u.entries[g] {
            assert!(e.r <= gamma && gamma <= e.s && e.rho < e.sigma, "{e:?}");
            if e.s > e.r {
                let w = e.weight(gamma);
                assert!((w * e.r + (1.0 - w) * e.s - gamma).abs() <= 1e-12);
            }
        }
        // the uniform level shrinks as more of the path is covered
        assert!(u.entries[g].windows(2).all(|w| w[1].rho <= w[0].sigma));
        assert!(s.z[g].windows(2).all(|w| w[0] <= w[1]));
    }
}
