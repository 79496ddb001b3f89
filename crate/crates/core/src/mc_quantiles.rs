//! Monte-Carlo quantile tables for the uniform and standardized bands.
//!
//! A path of the decoy-indexed process is a fair-coin sequence read until
//! its `d0`-th failure; `U_d` is the number of successes before the `d`-th
//! failure, so `U_d ~ NB(d, 1/2)` and consecutive increments are iid
//! Geometric(1/2). Along each path we track
//!
//! * `M_d = min_{k <= d} G_k(U_k)`, the running minimum of the
//!   probability-transformed process (uniform band), and
//! * `max_{k <= d} (U_k - k) / sqrt(2k)`, the running maximum of the
//!   standardized process (standardized band).
//!
//! After every step the `gamma`-quantile neighborhood of `M_d` and the
//! `1 - gamma` quantile of the running maximum are extracted by rank
//! selection, so memory stays `O(N)` regardless of `d0`.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::nb_sf_ge;
use crate::error::{domain, Error, Result};
use crate::seed;

pub const TABLE_VERSION: &str = "fdpband-table v1";

/// Paths simulated per RNG stream; fixed so results do not depend on the
/// number of worker threads.
const BLOCK: usize = 4096;

/// Estimated neighborhood of `u_gamma(Delta_d)` for one `(gamma, d)`.
///
/// `rho < sigma` are adjacent attained values of `M_d`; `r` and `s` are the
/// fractions of paths with `M_d <= rho` and `M_d <= sigma`, so
/// `r <= gamma < s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformEntry {
    pub rho: f64,
    pub r: f64,
    pub sigma: f64,
    pub s: f64,
}

impl UniformEntry {
    /// Probability of drawing `rho`, chosen so `w r + (1 - w) s = gamma`.
    pub fn weight(&self, gamma: f64) -> f64 {
        ((self.s - gamma) / (self.s - self.r)).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformQuantileTable {
    pub gammas: Vec<f64>,
    pub d0: usize,
    pub samples: usize,
    pub seed: u64,
    /// `entries[g][d - 1]`
    pub entries: Vec<Vec<UniformEntry>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StandardizedQuantileTable {
    pub gammas: Vec<f64>,
    pub d0: usize,
    pub samples: usize,
    pub seed: u64,
    /// `z[g][d - 1]`, the empirical `1 - gamma` quantile of `max_{k <= d} (U_k - k) / sqrt(2k)`.
    pub z: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrawMode {
    /// Coin flip between `rho` and `sigma` attaining level `gamma`.
    #[default]
    Randomized,
    /// Always `rho`.
    Conservative,
}

fn gamma_index(gammas: &[f64], gamma: f64) -> Option<usize> {
    gammas.iter().position(|&g| (g - gamma).abs() <= 1e-12 * gamma.abs().max(1e-300))
}

fn coverage_gap(kind: &str, gammas: &[f64], d0: usize, gamma: f64, d: usize) -> Error {
    Error::Config(format!(
        "{kind} table has no entry for gamma={gamma}, d={d} (covers gammas {gammas:?}, d <= {d0})"
    ))
}

impl UniformQuantileTable {
    pub fn entry(&self, gamma: f64, d: usize) -> Result<UniformEntry> {
        match gamma_index(&self.gammas, gamma) {
            Some(g) if d >= 1 && d <= self.d0 => Ok(self.entries[g][d - 1]),
            _ => Err(coverage_gap("uniform", &self.gammas, self.d0, gamma, d)),
        }
    }

    pub fn covers(&self, gamma: f64, d: usize) -> bool {
        gamma_index(&self.gammas, gamma).is_some() && d <= self.d0
    }
}

impl StandardizedQuantileTable {
    pub fn covers(&self, gamma: f64, d: usize) -> bool {
        gamma_index(&self.gammas, gamma).is_some() && d <= self.d0
    }
}

/// Draws `u_gamma(Delta_{d_max})` from the table.
pub fn draw_u_gamma<R: Rng + ?Sized>(
    table: &UniformQuantileTable,
    d_max: usize,
    gamma: f64,
    mode: DrawMode,
    rng: &mut R,
) -> Result<f64> {
    let e = table.entry(gamma, d_max)?;
    Ok(match mode {
        DrawMode::Conservative => e.rho,
        DrawMode::Randomized => {
            if rng.gen::<f64>() < e.weight(gamma) {
                e.rho
            } else {
                e.sigma
            }
        }
    })
}

/// `z_{d_max}^{1 - gamma}` from the table.
pub fn z_quantile(table: &StandardizedQuantileTable, d_max: usize, gamma: f64) -> Result<f64> {
    match gamma_index(&table.gammas, gamma) {
        Some(g) if d_max >= 1 && d_max <= table.d0 => Ok(table.z[g][d_max - 1]),
        _ => Err(coverage_gap("standardized", &table.gammas, table.d0, gamma, d_max)),
    }
}

// Rounding guards for rank arithmetic on gamma * N.
fn floor_tol(x: f64) -> usize {
    (x + 1e-9).floor() as usize
}

fn ceil_tol(x: f64) -> usize {
    (x - 1e-9).ceil() as usize
}

/// Geometric(1/2) count of successes before the next failure: the number of
/// trailing one bits of uniform 64-bit words.
fn geometric_half<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    let mut total = 0u64;
    loop {
        let x = rng.next_u64();
        let ones = x.trailing_ones() as u64;
        total += ones;
        if ones < 64 {
            return total;
        }
    }
}

struct PathBlock {
    rng: seed::Rng,
    u: Vec<u64>,
    min_g: Vec<f64>,
    max_std: Vec<f64>,
}

/// `(rho, r, sigma, s)` for sample `values` at level `gamma`.
fn uniform_neighborhood(values: &[f64], scratch: &mut Vec<f64>, gamma: f64) -> UniformEntry {
    let n = values.len();
    let c = floor_tol(gamma * n as f64).min(n - 1);
    scratch.clear();
    scratch.extend_from_slice(values);
    let (below, sigma, _) = scratch.select_nth_unstable_by(c, |a, b| a.total_cmp(b));
    let sigma = *sigma;
    let rho = below.iter().copied().filter(|&v| v < sigma).fold(f64::NEG_INFINITY, f64::max);
    let (lt, le) = values.iter().fold((0usize, 0usize), |(lt, le), &v| {
        (lt + (v < sigma) as usize, le + (v <= sigma) as usize)
    });
    if rho == f64::NEG_INFINITY {
        // no attained value has coverage <= gamma
        return UniformEntry { rho: 0.0, r: 0.0, sigma, s: le as f64 / n as f64 };
    }
    UniformEntry { rho, r: lt as f64 / n as f64, sigma, s: le as f64 / n as f64 }
}

fn upper_order_statistic(values: &[f64], scratch: &mut Vec<f64>, gamma: f64) -> f64 {
    let n = values.len();
    let rank = ceil_tol((1.0 - gamma) * n as f64).clamp(1, n);
    scratch.clear();
    scratch.extend_from_slice(values);
    *scratch.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b)).1
}

/// Simulates `samples` paths up to `d0` decoy wins and extracts both tables.
///
/// Parallel over path blocks on the current rayon pool; the output depends
/// only on the arguments.
pub fn build_tables(
    d0: usize,
    gammas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(UniformQuantileTable, StandardizedQuantileTable)> {
    if d0 < 1 {
        return domain("d0 must be at least 1");
    }
    if samples < 1000 {
        return domain(format!("at least 1000 samples are required, got {samples}"));
    }
    if gammas.is_empty() {
        return domain("at least one gamma is required");
    }
    if let Some(g) = gammas.iter().find(|&&g| !(g > 0.0 && g <= 0.5)) {
        return domain(format!("gamma must lie in (0, 0.5], got {g}"));
    }

    let mut blocks: Vec<PathBlock> = (0..samples.div_ceil(BLOCK))
        .map(|b| {
            let len = BLOCK.min(samples - b * BLOCK);
            PathBlock {
                rng: seed::stream(seed, b as u64),
                u: vec![0; len],
                min_g: vec![1.0; len],
                max_std: vec![f64::NEG_INFINITY; len],
            }
        })
        .collect();

    let mut entries = vec![Vec::with_capacity(d0); gammas.len()];
    let mut z = vec![Vec::with_capacity(d0); gammas.len()];
    let mut all_min = Vec::with_capacity(samples);
    let mut all_max = Vec::with_capacity(samples);
    let mut scratch = Vec::with_capacity(samples);

    for d in 1..=d0 {
        let (lo, hi) = blocks
            .par_iter_mut()
            .map(|blk| {
                let (mut lo, mut hi) = (u64::MAX, 0u64);
                for u in blk.u.iter_mut() {
                    *u += geometric_half(&mut blk.rng);
                    lo = lo.min(*u);
                    hi = hi.max(*u);
                }
                (lo, hi)
            })
            .reduce(|| (u64::MAX, 0), |a, b| (a.0.min(b.0), a.1.max(b.1)));

        // G_d over the observed range of U_d
        let g_vals: Vec<f64> = (lo..=hi).into_par_iter().map(|k| nb_sf_ge(d as u64, k as i64)).collect();
        let scale = (2.0 * d as f64).sqrt();
        let df = d as f64;
        blocks.par_iter_mut().for_each(|blk| {
            for j in 0..blk.u.len() {
                let u = blk.u[j];
                blk.min_g[j] = blk.min_g[j].min(g_vals[(u - lo) as usize]);
                blk.max_std[j] = blk.max_std[j].max((u as f64 - df) / scale);
            }
        });

        all_min.clear();
        all_max.clear();
        for blk in &blocks {
            all_min.extend_from_slice(&blk.min_g);
            all_max.extend_from_slice(&blk.max_std);
        }
        for (g, &gamma) in gammas.iter().enumerate() {
            entries[g].push(uniform_neighborhood(&all_min, &mut scratch, gamma));
            z[g].push(upper_order_statistic(&all_max, &mut scratch, gamma));
        }
    }

    let uniform = UniformQuantileTable { gammas: gammas.to_vec(), d0, samples, seed, entries };
    let standardized = StandardizedQuantileTable { gammas: gammas.to_vec(), d0, samples, seed, z };
    Ok((uniform, standardized))
}

// ---------------------------------------------------------------------------
// Persistence
//
//   fdpband-table v1
//   kind=uniform|standardized
//   seed=<u64> N=<samples> d0=<d0>
//   gammas=<g1>,<g2>,...
//   <gamma>\t<d>\t<fields...>          one line per (gamma, d)
//   checksum=sha256:<hex of every preceding byte>
//
// Reals are written in shortest round-trip scientific notation.

fn header(kind: &str, seed: u64, samples: usize, d0: usize, gammas: &[f64]) -> String {
    let gs: Vec<String> = gammas.iter().map(|g| format!("{g:e}")).collect();
    format!("{TABLE_VERSION}\nkind={kind}\nseed={seed} N={samples} d0={d0}\ngammas={}\n", gs.join(","))
}

fn seal(mut body: String) -> String {
    let digest = Sha256::digest(body.as_bytes());
    body.push_str("checksum=sha256:");
    for b in digest {
        let _ = write!(body, "{b:02x}");
    }
    body.push('\n');
    body
}

impl UniformQuantileTable {
    pub fn to_text(&self) -> String {
        let mut s = header("uniform", self.seed, self.samples, self.d0, &self.gammas);
        for (g, &gamma) in self.gammas.iter().enumerate() {
            for (i, e) in self.entries[g].iter().enumerate() {
                let _ = writeln!(s, "{gamma:e}\t{}\t{:e}\t{:e}\t{:e}\t{:e}", i + 1, e.rho, e.r, e.sigma, e.s);
            }
        }
        seal(s)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let parsed = parse_table(text, "uniform", 4)?;
        let mut entries = vec![Vec::with_capacity(parsed.d0); parsed.gammas.len()];
        for (g, d, f) in parsed.records {
            let e = UniformEntry { rho: f[0], r: f[1], sigma: f[2], s: f[3] };
            let gamma = parsed.gammas[g];
            let ok = e.rho < e.sigma && e.r <= gamma && gamma < e.s && e.r >= 0.0 && e.s <= 1.0 && e.rho >= 0.0 && e.sigma <= 1.0;
            if !ok {
                return Err(Error::Format(format!("uniform entry gamma={gamma} d={d} violates rho < sigma, r <= gamma < s: {e:?}")));
            }
            entries[g].push(e);
        }
        Ok(UniformQuantileTable { gammas: parsed.gammas, d0: parsed.d0, samples: parsed.samples, seed: parsed.seed, entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

impl StandardizedQuantileTable {
    pub fn to_text(&self) -> String {
        let mut s = header("standardized", self.seed, self.samples, self.d0, &self.gammas);
        for (g, &gamma) in self.gammas.iter().enumerate() {
            for (i, z) in self.z[g].iter().enumerate() {
                let _ = writeln!(s, "{gamma:e}\t{}\t{z:e}", i + 1);
            }
        }
        seal(s)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let parsed = parse_table(text, "standardized", 1)?;
        let mut z: Vec<Vec<f64>> = vec![Vec::with_capacity(parsed.d0); parsed.gammas.len()];
        for (g, d, f) in parsed.records {
            if !f[0].is_finite() {
                return Err(Error::Format(format!("standardized entry gamma={} d={d} is not finite", parsed.gammas[g])));
            }
            if let Some(&prev) = z[g].last() {
                if f[0] < prev {
                    return Err(Error::Format(format!(
                        "standardized quantiles decrease at gamma={} d={d}",
                        parsed.gammas[g]
                    )));
                }
            }
            z[g].push(f[0]);
        }
        Ok(StandardizedQuantileTable { gammas: parsed.gammas, d0: parsed.d0, samples: parsed.samples, seed: parsed.seed, z })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

struct ParsedTable {
    gammas: Vec<f64>,
    d0: usize,
    samples: usize,
    seed: u64,
    /// (gamma index, d, fields), validated to be in canonical order
    records: Vec<(usize, usize, Vec<f64>)>,
}

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| fmt_err(format!("cannot parse {what} from '{s}'")))
}

fn parse_table(text: &str, kind: &str, nfields: usize) -> Result<ParsedTable> {
    let marker = "checksum=sha256:";
    let pos = text.rfind(marker).ok_or_else(|| fmt_err("missing checksum line"))?;
    let (body, tail) = text.split_at(pos);
    let expected = tail[marker.len()..].trim();
    let actual: String = Sha256::digest(body.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();

    let mut lines = body.lines();
    let version = lines.next().unwrap_or("");
    if version != TABLE_VERSION {
        return Err(fmt_err(format!("unsupported table version '{version}', expected '{TABLE_VERSION}'")));
    }
    if expected != actual {
        return Err(fmt_err("checksum mismatch: table file is corrupted"));
    }
    let kind_line = lines.next().unwrap_or("");
    if kind_line != format!("kind={kind}") {
        return Err(fmt_err(format!("expected kind={kind}, found '{kind_line}'")));
    }

    let meta = lines.next().ok_or_else(|| fmt_err("missing seed/N/d0 line"))?;
    let (mut seed, mut samples, mut d0) = (None, None, None);
    for field in meta.split_whitespace() {
        match field.split_once('=') {
            Some(("seed", v)) => seed = Some(parse_num::<u64>(v, "seed")?),
            Some(("N", v)) => samples = Some(parse_num::<usize>(v, "N")?),
            Some(("d0", v)) => d0 = Some(parse_num::<usize>(v, "d0")?),
            _ => return Err(fmt_err(format!("unexpected header field '{field}'"))),
        }
    }
    let (seed, samples, d0) = match (seed, samples, d0) {
        (Some(a), Some(b), Some(c)) if c >= 1 => (a, b, c),
        _ => return Err(fmt_err("header must give seed, N and d0 >= 1")),
    };

    let gl = lines.next().and_then(|l| l.strip_prefix("gammas=")).ok_or_else(|| fmt_err("missing gammas line"))?;
    let gammas: Vec<f64> = gl.split(',').map(|g| parse_num(g, "gamma")).collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(gammas.len() * d0);
    for (n, line) in lines.enumerate() {
        let g = n / d0;
        let d = n % d0 + 1;
        if g >= gammas.len() {
            return Err(fmt_err("more records than gammas x d0"));
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != nfields + 2 {
            return Err(fmt_err(format!("record {} has {} columns, expected {}", n + 1, cols.len(), nfields + 2)));
        }
        let gamma: f64 = parse_num(cols[0], "gamma")?;
        let dd: usize = parse_num(cols[1], "d")?;
        if gamma != gammas[g] || dd != d {
            return Err(fmt_err(format!("record {} out of order: expected gamma={} d={d}", n + 1, gammas[g])));
        }
        let fields = cols[2..].iter().map(|c| parse_num(c, "value")).collect::<Result<Vec<f64>>>()?;
        records.push((g, d, fields));
    }
    if records.len() != gammas.len() * d0 {
        return Err(fmt_err(format!("expected {} records, found {}", gammas.len() * d0, records.len())));
    }
    Ok(ParsedTable { gammas, d0, samples, seed, records })
}
