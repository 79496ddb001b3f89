//! TDC, upper prediction bands, and the procedures built on them.
//!
//! A band `xi_d` bounds, simultaneously over `d`, the number of true-null
//! target wins seen before the `d`-th decoy win. With `D_i + 1` in place of
//! `d` it turns into a bound on the FDP of every prefix:
//! `eta_i = min(xi_{D_i + 1} / T_i, 1)`. Three bands are provided:
//!
//! * uniform: `xi_d = beta_d^{1-u}`, the `1 - u` quantile of `NB(d, 1/2)`
//!   with one level `u = u_gamma(Delta)` for all `d`,
//! * standardized: `xi_d = z sqrt(2d) + d` with `z` the `1 - gamma` quantile
//!   of the running maximum of `(U_d - d) / sqrt(2d)`,
//! * KR: linear in `d` with slope `-ln(gamma) / ln(2 - gamma)`, valid for all
//!   `d` without precomputation.
//!
//! The uniform and standardized bands only cover `d <= d_max` and are
//! treated as infinite beyond it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::competition::{CompetitionSequence, DiscoveryReport, ProcedureId};
use crate::distributions::nb_upper_quantile;
use crate::error::{check_unit_open, domain, Error, Result};
use crate::mc_quantiles::{draw_u_gamma, z_quantile, DrawMode, StandardizedQuantileTable, UniformQuantileTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandKind {
    Uniform,
    Standardized,
    Kr,
}

impl BandKind {
    pub fn procedure(self) -> ProcedureId {
        match self {
            BandKind::Uniform => ProcedureId::FdpUb,
            BandKind::Standardized => ProcedureId::FdpSb,
            BandKind::Kr => ProcedureId::FdpKrb,
        }
    }
}

/// Which band to use and where its quantiles come from.
#[derive(Clone, Copy, Debug)]
pub struct BandSpec<'a> {
    pub kind: BandKind,
    pub uniform: Option<&'a UniformQuantileTable>,
    pub standardized: Option<&'a StandardizedQuantileTable>,
    pub draw: DrawMode,
}

impl<'a> BandSpec<'a> {
    pub fn kr() -> Self {
        BandSpec { kind: BandKind::Kr, uniform: None, standardized: None, draw: DrawMode::Randomized }
    }

    pub fn uniform(table: &'a UniformQuantileTable, draw: DrawMode) -> Self {
        BandSpec { kind: BandKind::Uniform, uniform: Some(table), standardized: None, draw }
    }

    pub fn standardized(table: &'a StandardizedQuantileTable) -> Self {
        BandSpec { kind: BandKind::Standardized, uniform: None, standardized: Some(table), draw: DrawMode::Randomized }
    }

    fn uniform_table(&self) -> Result<&'a UniformQuantileTable> {
        self.uniform.ok_or_else(|| Error::Config("uniform band requires a uniform quantile table".into()))
    }

    fn standardized_table(&self) -> Result<&'a StandardizedQuantileTable> {
        self.standardized
            .ok_or_else(|| Error::Config("standardized band requires a standardized quantile table".into()))
    }
}

/// Target-decoy competition with the +1 correction:
/// `k = max { k : (D_k + 1) / T_k <= alpha }`, or 0.
pub fn run_tdc(seq: &CompetitionSequence, alpha: f64) -> Result<DiscoveryReport> {
    check_unit_open("alpha", alpha)?;
    let k = (1..=seq.len())
        .rev()
        .find(|&k| {
            let t = seq.targets_at(k);
            t > 0 && (seq.decoys_at(k) as f64 + 1.0) / t as f64 <= alpha
        })
        .unwrap_or(0);
    Ok(seq.report(k, ProcedureId::Tdc, alpha, None))
}

/// Slope of the KR band, `-ln(gamma) / ln(2 - gamma)`.
pub fn kr_constant(gamma: f64) -> Result<f64> {
    check_unit_open("gamma", gamma)?;
    Ok(-gamma.ln() / (2.0 - gamma).ln())
}

/// `floor(alpha (m + 1) / (1 + alpha))`, the largest `D_TDC + 1` TDC can
/// produce with a non-empty list.
pub fn compute_d_max_tdc(alpha: f64, m: usize) -> Result<usize> {
    check_unit_open("alpha", alpha)?;
    if m < 1 {
        return domain("m must be at least 1");
    }
    Ok((alpha * (m as f64 + 1.0) / (1.0 + alpha)).floor() as usize)
}

/// `beta_d^{1-u}`, infinite when `u` is zero.
fn uniform_band_value(d: usize, u: f64) -> f64 {
    if u > 0.0 {
        nb_upper_quantile(d as u64, u) as f64
    } else {
        f64::INFINITY
    }
}

fn standardized_band_value(d: usize, z: f64) -> f64 {
    z * (2.0 * d as f64).sqrt() + d as f64
}

/// `xi^{d0}_{d0}`: the band with `d_max = d0` at its last point, using the
/// conservative level `rho` for the uniform band.
fn diagonal_band_value(band: &BandSpec, gamma: f64, d0: usize) -> Result<f64> {
    match band.kind {
        BandKind::Uniform => {
            let e = band.uniform_table()?.entry(gamma, d0)?;
            Ok(uniform_band_value(d0, e.rho))
        }
        BandKind::Standardized => Ok(standardized_band_value(d0, z_quantile(band.standardized_table()?, d0, gamma)?)),
        BandKind::Kr => domain("d_infinity is only defined for the uniform and standardized bands"),
    }
}

/// Largest `d0 <= m` with `xi^{d0}_{d0} / (m - d0 + 1) <= alpha` (0 always
/// qualifies).
///
/// The scan runs upward from 1 and stops once it is past
/// `ceil(alpha (m + 1) / (1 + alpha))` and 50 consecutive `d0` have failed.
/// Every `d0` the scan visits must be covered by the table.
pub fn compute_d_infty(m: usize, alpha: f64, gamma: f64, band: &BandSpec) -> Result<usize> {
    check_unit_open("alpha", alpha)?;
    check_unit_open("gamma", gamma)?;
    let ceiling = (alpha * (m as f64 + 1.0) / (1.0 + alpha)).ceil() as usize;
    let mut best = 0;
    let mut fails = 0;
    for d0 in 1..=m {
        let covered = match band.kind {
            BandKind::Uniform => band.uniform_table()?.covers(gamma, d0),
            BandKind::Standardized => band.standardized_table()?.covers(gamma, d0),
            BandKind::Kr => return domain("d_infinity is only defined for the uniform and standardized bands"),
        };
        if !covered {
            return Err(Error::Config(format!(
                "quantile table does not cover d0={d0} at gamma={gamma}, required to scan d_infinity for m={m}, alpha={alpha}"
            )));
        }
        let xi = diagonal_band_value(band, gamma, d0)?;
        if xi / (m - d0 + 1) as f64 <= alpha {
            best = d0;
            fails = 0;
        } else {
            fails += 1;
        }
        if d0 > ceiling && fails >= 50 {
            break;
        }
    }
    Ok(best)
}

/// Band values `xi_d` indexed by `d = D + 1`, infinite beyond `d_max`.
#[derive(Clone, Debug, PartialEq)]
enum BandValues {
    /// `values[d - 1]` for `d <= d_max`.
    Finite(Vec<f64>),
    Kr(f64),
}

impl BandValues {
    fn at(&self, d: usize) -> f64 {
        match self {
            BandValues::Finite(v) => v.get(d - 1).copied().unwrap_or(f64::INFINITY),
            // C (1 + D) at d = D + 1
            BandValues::Kr(c) => c * d as f64,
        }
    }
}

/// `tau = max { k : xi_{D_k + 1} / T_k <= alpha }`, or 0.
fn band_threshold(seq: &CompetitionSequence, alpha: f64, band: &BandValues) -> usize {
    (1..=seq.len())
        .rev()
        .find(|&k| {
            let t = seq.targets_at(k);
            t > 0 && band.at(seq.decoys_at(k) as usize + 1) / t as f64 <= alpha
        })
        .unwrap_or(0)
}

/// An FDP-controlling band procedure (FDP-UB, FDP-SB or FDP-KRB) prepared
/// for sequences of length `m`.
///
/// Preparation fixes `d_max = d_infinity` and evaluates the band; for the
/// uniform band in randomized mode both candidate levels are evaluated and
/// each run picks one by a coin flip.
#[derive(Clone, Debug)]
pub struct FdpBand {
    kind: BandKind,
    alpha: f64,
    gamma: f64,
    m: usize,
    d_infty: Option<usize>,
    /// (probability, band); the first candidate is used with that probability
    candidates: Vec<(f64, BandValues)>,
}

impl FdpBand {
    pub fn new(m: usize, alpha: f64, gamma: f64, band: &BandSpec) -> Result<FdpBand> {
        check_unit_open("alpha", alpha)?;
        check_unit_open("gamma", gamma)?;
        let (d_infty, candidates) = match band.kind {
            BandKind::Kr => (None, vec![(1.0, BandValues::Kr(kr_constant(gamma)?))]),
            BandKind::Uniform => {
                let d_inf = compute_d_infty(m, alpha, gamma, band)?;
                if d_inf == 0 {
                    (Some(0), vec![(1.0, BandValues::Finite(Vec::new()))])
                } else {
                    let e = band.uniform_table()?.entry(gamma, d_inf)?;
                    let values = |u: f64| BandValues::Finite((1..=d_inf).map(|d| uniform_band_value(d, u)).collect());
                    let cands = match band.draw {
                        DrawMode::Conservative => vec![(1.0, values(e.rho))],
                        DrawMode::Randomized => vec![(e.weight(gamma), values(e.rho)), (1.0, values(e.sigma))],
                    };
                    (Some(d_inf), cands)
                }
            }
            BandKind::Standardized => {
                let d_inf = compute_d_infty(m, alpha, gamma, band)?;
                let values = if d_inf == 0 {
                    Vec::new()
                } else {
                    let z = z_quantile(band.standardized_table()?, d_inf, gamma)?;
                    (1..=d_inf).map(|d| standardized_band_value(d, z)).collect()
                };
                (Some(d_inf), vec![(1.0, BandValues::Finite(values))])
            }
        };
        Ok(FdpBand { kind: band.kind, alpha, gamma, m, d_infty, candidates })
    }

    /// `d_infinity`; `None` for the KR band, which needs no `d_max`.
    pub fn d_infty(&self) -> Option<usize> {
        self.d_infty
    }

    /// The band value `xi_d` for each candidate level.
    pub fn band_values(&self, d: usize) -> Vec<f64> {
        self.candidates.iter().map(|(_, b)| b.at(d)).collect()
    }

    pub fn run<R: Rng + ?Sized>(&self, seq: &CompetitionSequence, rng: &mut R) -> Result<DiscoveryReport> {
        if seq.len() != self.m {
            return domain(format!("procedure prepared for m={} applied to {} hypotheses", self.m, seq.len()));
        }
        // a single candidate needs no coin
        let band = if self.candidates.len() == 1 || rng.gen::<f64>() < self.candidates[0].0 {
            &self.candidates[0].1
        } else {
            &self.candidates[1].1
        };
        let tau = band_threshold(seq, self.alpha, band);
        if let Some(d_inf) = self.d_infty {
            if tau > 0 && seq.decoys_at(tau) as usize + 1 > d_inf {
                return Err(Error::Internal(format!("band threshold {tau} has D + 1 above d_infinity={d_inf}")));
            }
        }
        Ok(seq.report(tau, self.kind.procedure(), self.alpha, Some(self.gamma)))
    }
}

/// FDP control through an upper prediction band.
pub fn run_fdp_band<R: Rng + ?Sized>(
    seq: &CompetitionSequence,
    alpha: f64,
    gamma: f64,
    band: &BandSpec,
    rng: &mut R,
) -> Result<DiscoveryReport> {
    FdpBand::new(seq.len(), alpha, gamma, band)?.run(seq, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    /// TDC-UB, uniform band.
    Ub,
    /// TDC-SB, standardized band.
    Sb,
    /// TDC-KRB, KR band.
    Krb,
}

impl BoundMethod {
    pub const ALL: [BoundMethod; 3] = [BoundMethod::Ub, BoundMethod::Sb, BoundMethod::Krb];

    pub fn name(self) -> &'static str {
        match self {
            BoundMethod::Ub => "tdc-ub",
            BoundMethod::Sb => "tdc-sb",
            BoundMethod::Krb => "tdc-krb",
        }
    }
}

/// A `1 - gamma` upper prediction bound on the FDP of TDC's discovery list.
///
/// `tdc_report` must come from [`run_tdc`] on `seq`; its `alpha` sets
/// `d_max = floor(alpha (m + 1) / (1 + alpha))` for the uniform and
/// standardized bands.
pub fn bound_tdc_fdp<R: Rng + ?Sized>(
    seq: &CompetitionSequence,
    tdc_report: &DiscoveryReport,
    gamma: f64,
    method: BoundMethod,
    band: &BandSpec,
    rng: &mut R,
) -> Result<f64> {
    check_unit_open("gamma", gamma)?;
    let tau = tdc_report.k;
    if tau > seq.len() {
        return domain(format!("TDC threshold {tau} exceeds sequence length {}", seq.len()));
    }
    let t = seq.targets_at(tau) as f64;
    if t < 1.0 {
        return Ok(0.0);
    }
    let d_bar = seq.decoys_at(tau) as usize + 1;
    let m = seq.len();
    let eta = match method {
        BoundMethod::Krb => kr_constant(gamma)? * d_bar as f64 / t,
        BoundMethod::Ub | BoundMethod::Sb => {
            let d_max = compute_d_max_tdc(tdc_report.alpha, m)?;
            if d_bar > d_max {
                return Err(Error::Internal(format!(
                    "TDC list has D + 1 = {d_bar} above d_max = {d_max}; was the report produced by TDC at alpha={}?",
                    tdc_report.alpha
                )));
            }
            let xi = if method == BoundMethod::Ub {
                let table = band.uniform_table()?;
                let u = draw_u_gamma(table, d_max, gamma, band.draw, rng)?;
                uniform_band_value(d_bar, u)
            } else {
                standardized_band_value(d_bar, z_quantile(band.standardized_table()?, d_max, gamma)?)
            };
            xi / t
        }
    };
    Ok(eta.min(1.0))
}
