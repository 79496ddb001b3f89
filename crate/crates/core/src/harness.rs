//! Replicate evaluation: generators x procedures over seeded replicates.
//!
//! Replicate `r` draws everything from `seed::derive(master_seed, r)`, so the
//! results do not depend on how replicates are scheduled across threads. All
//! procedures of a replicate see the same dataset.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::bands::{bound_tdc_fdp, run_tdc, BandKind, BandSpec, BoundMethod, FdpBand};
use crate::competition::{
    build_sequence, compete, discovery_counts, CompetitionSequence, DiscoveryReport, ProcedureId, SimulationTruth,
    TiePolicy,
};
use crate::error::{check_unit_open, domain, Error, Result};
use crate::mc_quantiles::{DrawMode, StandardizedQuantileTable, UniformQuantileTable};
use crate::seed;
use crate::simgen::{gen_generic_null, gen_spectrum_id, SpectrumIdParams};
use crate::stepdown::StepdownPlan;

pub const SUMMARY_VERSION: &str = "fdpband-evaluation v1";
pub const HISTOGRAM_BINS: usize = 50;
pub const MIN_REPLICATES: usize = 100;
const POWER_REGULARIZER: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// The `seed` field is ignored; each replicate supplies its own.
    SpectrumId(SpectrumIdParams),
    GenericNull { m: usize, num_false: usize },
}

impl GeneratorSpec {
    pub fn m(&self) -> usize {
        match self {
            GeneratorSpec::SpectrumId(p) => p.m,
            GeneratorSpec::GenericNull { m, .. } => *m,
        }
    }

    fn sequence(&self, replicate_seed: u64) -> Result<(CompetitionSequence, SimulationTruth)> {
        let mut rng = seed::stream(replicate_seed, 1);
        match self {
            GeneratorSpec::SpectrumId(p) => {
                let params = SpectrumIdParams { seed: seed::derive(replicate_seed, 0), ..p.clone() };
                let (pairs, truth) = gen_spectrum_id(&params)?;
                let labeled = compete(&pairs, TiePolicy::RandomBreak, &mut rng)?;
                Ok((build_sequence(&labeled, &mut rng)?, truth))
            }
            GeneratorSpec::GenericNull { m, num_false } => {
                let (hyps, truth) = gen_generic_null(*m, *num_false, seed::derive(replicate_seed, 0))?;
                Ok((build_sequence(&hyps, &mut rng)?, truth))
            }
        }
    }
}

/// Everything `run_evaluation` needs.
#[derive(Clone, Debug)]
pub struct EvaluationConfig<'a> {
    pub generator: GeneratorSpec,
    pub procedures: Vec<ProcedureId>,
    pub bound_methods: Vec<BoundMethod>,
    pub alpha: f64,
    pub gamma: f64,
    pub replicates: usize,
    pub master_seed: u64,
    pub parallelism: usize,
    pub uniform: Option<&'a UniformQuantileTable>,
    pub standardized: Option<&'a StandardizedQuantileTable>,
    pub draw: DrawMode,
}

/// A binomial proportion with its exact (Clopper-Pearson) 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub count: usize,
    pub trials: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RateEstimate {
    pub fn new(count: usize, trials: usize) -> RateEstimate {
        let (ci_low, ci_high) = clopper_pearson(count, trials, 0.05);
        let rate = if trials == 0 { 0.0 } else { count as f64 / trials as f64 };
        RateEstimate { count, trials, rate, ci_low: ci_low.min(rate), ci_high: ci_high.max(rate) }
    }
}

/// Exact two-sided `1 - level` binomial interval.
pub fn clopper_pearson(count: usize, trials: usize, level: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let (x, n) = (count as f64, trials as f64);
    let lo = if count == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0).map(|b| b.inverse_cdf(level / 2.0)).unwrap_or(0.0)
    };
    let hi = if count >= trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x).map(|b| b.inverse_cdf(1.0 - level / 2.0)).unwrap_or(1.0)
    };
    (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
}

/// `1 - (t + 1e-12) / (t_ref + 1e-12)`.
pub fn relative_power_loss(t: usize, t_ref: usize) -> f64 {
    1.0 - (t as f64 + POWER_REGULARIZER) / (t_ref as f64 + POWER_REGULARIZER)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProcedureSummary {
    pub procedure: ProcedureId,
    pub mean_fdp: f64,
    /// Standard error of `mean_fdp`.
    pub fdp_standard_error: f64,
    pub median_fdp: f64,
    /// `P(Q > alpha)`.
    pub exceedance: RateEstimate,
    /// The interval lies entirely above `gamma`.
    pub exceedance_flagged: bool,
    pub mean_discoveries: f64,
    pub median_discoveries: f64,
    pub mean_true_discoveries: f64,
    pub median_true_discoveries: f64,
    pub median_power_loss_vs_tdc: f64,
    pub median_power_loss_vs_fdp_sd: f64,
    pub fdp_histogram: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundSummary {
    pub method: &'static str,
    /// `P(Q_TDC > eta)`.
    pub violation: RateEstimate,
    pub violation_flagged: bool,
    pub mean_bound: f64,
    pub median_bound: f64,
    pub median_tdc_fdp: f64,
    pub bound_histogram: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationSummary {
    pub version: &'static str,
    pub generator: GeneratorSpec,
    pub alpha: f64,
    pub gamma: f64,
    pub replicates: usize,
    pub master_seed: u64,
    pub histogram_bins: usize,
    pub procedures: Vec<ProcedureSummary>,
    pub bounds: Vec<BoundSummary>,
}

/// One CSV row: a procedure run, or a bound on that replicate's TDC list.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub procedure: &'static str,
    pub k: usize,
    pub num_targets: usize,
    pub num_decoys: usize,
    pub fdp: f64,
    pub bound: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub summary: EvaluationSummary,
    pub rows: Vec<ReplicateRow>,
}

impl Evaluation {
    /// Per-replicate rows as CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "procedure", "k", "T_k", "D_k", "fdp", "bound"])
            .map_err(csv_err)?;
        for r in &self.rows {
            let bound = r.bound.map(|b| b.to_string()).unwrap_or_default();
            w.write_record([
                r.replicate.to_string(),
                r.procedure.to_string(),
                r.k.to_string(),
                r.num_targets.to_string(),
                r.num_decoys.to_string(),
                r.fdp.to_string(),
                bound,
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[derive(Clone, Copy, Debug)]
struct Outcome {
    k: usize,
    targets: usize,
    decoys: usize,
    true_discoveries: usize,
    fdp: f64,
}

impl Outcome {
    fn of(report: &DiscoveryReport, truth: &SimulationTruth) -> Result<Outcome> {
        let (false_d, true_d) = discovery_counts(report, truth)?;
        let fdp = if report.num_targets == 0 { 0.0 } else { false_d as f64 / report.num_targets as f64 };
        Ok(Outcome {
            k: report.k,
            targets: report.num_targets,
            decoys: report.num_decoys,
            true_discoveries: true_d,
            fdp,
        })
    }
}

struct ReplicateResult {
    tdc: Outcome,
    fdp_sd: Outcome,
    procedures: Vec<Outcome>,
    bounds: Vec<f64>,
}

enum Prepared {
    Tdc,
    Stepdown { randomized: bool },
    Band(FdpBand),
}

struct Plans {
    stepdown: StepdownPlan,
    procedures: Vec<Prepared>,
}

fn band_spec<'a>(cfg: &EvaluationConfig<'a>, kind: BandKind) -> BandSpec<'a> {
    BandSpec { kind, uniform: cfg.uniform, standardized: cfg.standardized, draw: cfg.draw }
}

fn prepare(cfg: &EvaluationConfig) -> Result<Plans> {
    let m = cfg.generator.m();
    let stepdown = StepdownPlan::new(m, cfg.alpha, cfg.gamma)?;
    let procedures = cfg
        .procedures
        .iter()
        .map(|&p| {
            Ok(match p {
                ProcedureId::Tdc => Prepared::Tdc,
                ProcedureId::FdpSd => Prepared::Stepdown { randomized: false },
                ProcedureId::FdpSdRandomized => Prepared::Stepdown { randomized: true },
                ProcedureId::FdpUb => Prepared::Band(FdpBand::new(m, cfg.alpha, cfg.gamma, &band_spec(cfg, BandKind::Uniform))?),
                ProcedureId::FdpSb => {
                    Prepared::Band(FdpBand::new(m, cfg.alpha, cfg.gamma, &band_spec(cfg, BandKind::Standardized))?)
                }
                ProcedureId::FdpKrb => Prepared::Band(FdpBand::new(m, cfg.alpha, cfg.gamma, &band_spec(cfg, BandKind::Kr))?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for &method in &cfg.bound_methods {
        let missing = match method {
            BoundMethod::Ub => cfg.uniform.is_none(),
            BoundMethod::Sb => cfg.standardized.is_none(),
            BoundMethod::Krb => false,
        };
        if missing {
            return Err(Error::Config(format!("bound method {} requires a quantile table", method.name())));
        }
    }
    Ok(Plans { stepdown, procedures })
}

fn run_replicate(cfg: &EvaluationConfig, plans: &Plans, r: usize) -> Result<ReplicateResult> {
    let rs = seed::derive(cfg.master_seed, r as u64);
    let (seq, truth) = cfg.generator.sequence(rs)?;
    if seq.len() != cfg.generator.m() {
        return Err(Error::Internal(format!("replicate {r} produced {} hypotheses", seq.len())));
    }
    // fixed stream slots: 2 TDC, 3 FDP-SD reference, 10+ procedures, 100+ bounds
    let tdc_report = run_tdc(&seq, cfg.alpha)?;
    let sd_report = plans.stepdown.run_randomized(&seq, &mut seed::stream(rs, 3))?;
    let tdc = Outcome::of(&tdc_report, &truth)?;
    let fdp_sd = Outcome::of(&sd_report, &truth)?;

    let mut procedures = Vec::with_capacity(plans.procedures.len());
    for (j, prep) in plans.procedures.iter().enumerate() {
        let mut rng = seed::stream(rs, 10 + j as u64);
        let out = match prep {
            Prepared::Tdc => tdc,
            Prepared::Stepdown { randomized: false } => Outcome::of(&plans.stepdown.run(&seq)?, &truth)?,
            Prepared::Stepdown { randomized: true } => {
                Outcome::of(&plans.stepdown.run_randomized(&seq, &mut rng)?, &truth)?
            }
            Prepared::Band(band) => Outcome::of(&band.run(&seq, &mut rng)?, &truth)?,
        };
        procedures.push(out);
    }

    let mut bounds = Vec::with_capacity(cfg.bound_methods.len());
    for (j, &method) in cfg.bound_methods.iter().enumerate() {
        let kind = match method {
            BoundMethod::Ub => BandKind::Uniform,
            BoundMethod::Sb => BandKind::Standardized,
            BoundMethod::Krb => BandKind::Kr,
        };
        let mut rng = seed::stream(rs, 100 + j as u64);
        bounds.push(bound_tdc_fdp(&seq, &tdc_report, cfg.gamma, method, &band_spec(cfg, kind), &mut rng)?);
    }
    Ok(ReplicateResult { tdc, fdp_sd, procedures, bounds })
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// 50 equal bins on [0, 1]; 1 falls in the last bin.
pub fn histogram(values: &[f64]) -> Vec<usize> {
    let mut bins = vec![0; HISTOGRAM_BINS];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        bins[b] += 1;
    }
    bins
}

fn column<T>(results: &[ReplicateResult], f: impl Fn(&ReplicateResult) -> T) -> Vec<T> {
    results.iter().map(f).collect()
}

fn summarize_procedure(
    cfg: &EvaluationConfig,
    procedure: ProcedureId,
    results: &[ReplicateResult],
    j: usize,
) -> ProcedureSummary {
    let r = results.len();
    let fdp = column(results, |x| x.procedures[j].fdp);
    let disc = column(results, |x| x.procedures[j].targets as f64);
    let true_disc = column(results, |x| x.procedures[j].true_discoveries as f64);
    let mut loss_tdc =
        column(results, |x| relative_power_loss(x.procedures[j].true_discoveries, x.tdc.true_discoveries));
    let mut loss_sd =
        column(results, |x| relative_power_loss(x.procedures[j].true_discoveries, x.fdp_sd.true_discoveries));
    let exceed = fdp.iter().filter(|&&q| q > cfg.alpha).count();
    let exceedance = RateEstimate::new(exceed, r);
    let mean_fdp = mean(&fdp);
    let var = fdp.iter().map(|q| (q - mean_fdp).powi(2)).sum::<f64>() / (r as f64 - 1.0);
    ProcedureSummary {
        procedure,
        mean_fdp,
        fdp_standard_error: (var / r as f64).sqrt(),
        median_fdp: median(&mut fdp.clone()),
        exceedance_flagged: exceedance.ci_low > cfg.gamma,
        exceedance,
        mean_discoveries: mean(&disc),
        median_discoveries: median(&mut disc.clone()),
        mean_true_discoveries: mean(&true_disc),
        median_true_discoveries: median(&mut true_disc.clone()),
        median_power_loss_vs_tdc: median(&mut loss_tdc),
        median_power_loss_vs_fdp_sd: median(&mut loss_sd),
        fdp_histogram: histogram(&fdp),
    }
}

fn summarize_bound(cfg: &EvaluationConfig, method: BoundMethod, results: &[ReplicateResult], j: usize) -> BoundSummary {
    let eta = column(results, |x| x.bounds[j]);
    let q = column(results, |x| x.tdc.fdp);
    let violations = eta.iter().zip(&q).filter(|(e, q)| q > e).count();
    let violation = RateEstimate::new(violations, results.len());
    BoundSummary {
        method: method.name(),
        violation_flagged: violation.ci_low > cfg.gamma,
        violation,
        mean_bound: mean(&eta),
        median_bound: median(&mut eta.clone()),
        median_tdc_fdp: median(&mut q.clone()),
        bound_histogram: histogram(&eta),
    }
}

/// Runs every configured procedure and bound over `replicates` datasets.
pub fn run_evaluation(cfg: &EvaluationConfig) -> Result<Evaluation> {
    check_unit_open("alpha", cfg.alpha)?;
    check_unit_open("gamma", cfg.gamma)?;
    if cfg.replicates < MIN_REPLICATES {
        return domain(format!("at least {MIN_REPLICATES} replicates are required, got {}", cfg.replicates));
    }
    if cfg.parallelism == 0 {
        return domain("parallelism must be at least 1");
    }
    let plans = prepare(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let results: Vec<ReplicateResult> = pool.install(|| {
        (0..cfg.replicates).into_par_iter().map(|r| run_replicate(cfg, &plans, r)).collect::<Result<Vec<_>>>()
    })?;

    let procedures = cfg
        .procedures
        .iter()
        .enumerate()
        .map(|(j, &p)| summarize_procedure(cfg, p, &results, j))
        .collect();
    let bounds = cfg
        .bound_methods
        .iter()
        .enumerate()
        .map(|(j, &b)| summarize_bound(cfg, b, &results, j))
        .collect();

    let mut rows = Vec::with_capacity(results.len() * (cfg.procedures.len() + cfg.bound_methods.len()));
    for (r, res) in results.iter().enumerate() {
        for (p, o) in cfg.procedures.iter().zip(&res.procedures) {
            rows.push(ReplicateRow {
                replicate: r,
                procedure: p.name(),
                k: o.k,
                num_targets: o.targets,
                num_decoys: o.decoys,
                fdp: o.fdp,
                bound: None,
            });
        }
        for (b, &eta) in cfg.bound_methods.iter().zip(&res.bounds) {
            let o = res.tdc;
            rows.push(ReplicateRow {
                replicate: r,
                procedure: b.name(),
                k: o.k,
                num_targets: o.targets,
                num_decoys: o.decoys,
                fdp: o.fdp,
                bound: Some(eta),
            });
        }
    }

    let summary = EvaluationSummary {
        version: SUMMARY_VERSION,
        generator: cfg.generator.clone(),
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        replicates: cfg.replicates,
        master_seed: cfg.master_seed,
        histogram_bins: HISTOGRAM_BINS,
        procedures,
        bounds,
    };
    Ok(Evaluation { summary, rows })
}
