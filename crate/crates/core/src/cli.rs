//! Command-line interface.
//!
//! Score data is tab-separated. A file with a header row may use the columns
//! `target_score`, `decoy_score` (score pairs) or `label`, `score` (already
//! competed, label `1` or `-1`), optionally with `true_null` (`1`/`0`) and
//! `id`. A file without a header holds `target_score<TAB>decoy_score` pairs.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage, 3 data, 4 configuration.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bands::{bound_tdc_fdp, run_tdc, BandKind, BandSpec, BoundMethod, FdpBand};
use crate::competition::{
    build_sequence, compete, true_fdp, CompetitionSequence, DiscoveryReport, Label, LabeledHypothesis, ProcedureId,
    ScorePair, SimulationTruth, TiePolicy,
};
use crate::error::{Error, Result};
use crate::harness::{run_evaluation, EvaluationConfig, GeneratorSpec};
use crate::mc_quantiles::{build_tables, DrawMode, StandardizedQuantileTable, UniformQuantileTable};
use crate::seed::{self, DEFAULT_SEED};
use crate::simgen::{gen_generic_null, gen_spectrum_id, read_pool, synthetic_pool, SpectrumIdParams};
use crate::stepdown::StepdownPlan;

#[derive(Parser, Debug)]
#[command(name = "fdpband", version, about = "FDP control and FDP bounds for target-decoy competition")]
pub struct Cli {
    /// Worker threads for `precompute` and `evaluate` (default: all cores).
    /// Results do not depend on it.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Competes score pairs and writes an `id/label/score` file.
    Compete(CompeteArgs),
    /// Target-decoy competition FDR control.
    Tdc(TdcArgs),
    /// FDP control by the FDP-SD stepdown procedure.
    FdpSd(FdpSdArgs),
    /// FDP control through an upper prediction band.
    FdpBand(FdpBandArgs),
    /// Upper prediction bound on the FDP of TDC's discovery list.
    Bound(BoundArgs),
    /// Monte Carlo quantile tables for the uniform and standardized bands.
    Precompute(PrecomputeArgs),
    /// Writes a simulated dataset.
    Simulate(SimulateArgs),
    /// Runs procedures over seeded simulated replicates.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Tab-separated score file.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Output file (default: standard output).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Seed for tie breaking and randomized procedures.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TieArg::RandomBreak)]
    pub tie_policy: TieArg,
}

#[derive(Args, Debug)]
pub struct CompeteArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Args, Debug)]
pub struct TdcArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub alpha: f64,
}

#[derive(Args, Debug)]
pub struct FdpSdArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub gamma: f64,
    /// Use the randomized stepdown.
    #[arg(long)]
    pub randomized: bool,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    /// Table prefix as written by `precompute --out`.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    /// Uniform band level: randomized between the two neighboring levels, or
    /// always the conservative one.
    #[arg(long, value_enum, default_value_t = DrawArg::Randomized)]
    pub draw: DrawArg,
}

#[derive(Args, Debug)]
pub struct FdpBandArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tables: TableArgs,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, value_enum)]
    pub band: BandArg,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tables: TableArgs,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Report of an earlier `tdc` run on the same input and seed.
    #[arg(long, conflicts_with = "alpha")]
    pub tdc_report: Option<PathBuf>,
    /// TDC level when TDC is run inline.
    #[arg(long, required_unless_present = "tdc_report")]
    pub alpha: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PrecomputeArgs {
    /// Largest number of decoy wins covered.
    #[arg(long)]
    pub d0: usize,
    /// Comma-separated confidence parameters.
    #[arg(long, value_delimiter = ',', required = true)]
    pub gammas: Vec<f64>,
    /// Number of simulated paths.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Writes PREFIX.uniform.tbl and PREFIX.standardized.tbl.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct GeneratorArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Number of hypotheses (spectra).
    #[arg(long, default_value_t = 2000)]
    pub m: usize,
    /// Fraction of foreign spectra.
    #[arg(long, default_value_t = 0.5)]
    pub pi0: f64,
    #[arg(long, default_value_t = 0.05)]
    pub a: f64,
    #[arg(long, default_value_t = 10.0)]
    pub b: f64,
    #[arg(long, default_value_t = 100)]
    pub n_candidates: usize,
    /// Maps scores through per-spectrum Gumbel quantile functions.
    #[arg(long)]
    pub uncalibrated: bool,
    /// `location<TAB>scale` file; without it a synthetic pool is used.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub pool_size: usize,
    /// False nulls for the generic-null model.
    #[arg(long, default_value_t = 0)]
    pub num_false: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[command(flatten)]
    pub tables: TableArgs,
    /// Comma-separated procedure ids.
    #[arg(long, value_delimiter = ',', default_value = "tdc,fdp-sd,fdp-sd-randomized,fdp-krb")]
    pub procedures: Vec<ProcedureId>,
    /// Comma-separated bound methods.
    #[arg(long, value_delimiter = ',', value_enum)]
    pub bounds: Vec<MethodArg>,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// JSON summary path (default: standard output).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Per-replicate CSV path.
    #[arg(long)]
    pub rows: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum TieArg {
    RandomBreak,
    Drop,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum DrawArg {
    Randomized,
    Conservative,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum BandArg {
    Uniform,
    Standardized,
    Kr,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum MethodArg {
    Ub,
    Sb,
    Krb,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModelArg {
    SpectrumId,
    GenericNull,
}

impl From<TieArg> for TiePolicy {
    fn from(t: TieArg) -> Self {
        match t {
            TieArg::RandomBreak => TiePolicy::RandomBreak,
            TieArg::Drop => TiePolicy::Drop,
        }
    }
}

impl From<DrawArg> for DrawMode {
    fn from(d: DrawArg) -> Self {
        match d {
            DrawArg::Randomized => DrawMode::Randomized,
            DrawArg::Conservative => DrawMode::Conservative,
        }
    }
}

impl From<MethodArg> for BoundMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ub => BoundMethod::Ub,
            MethodArg::Sb => BoundMethod::Sb,
            MethodArg::Krb => BoundMethod::Krb,
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) => 2,
        Error::Data(_) | Error::Format(_) | Error::Io(_) => 3,
        Error::Config(_) => 4,
        Error::Internal(_) => 1,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Diagnostics go to `err` as a single line.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("usage error");
                let _ = writeln!(err, "{first}");
            }
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let threads = cli
        .parallelism
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(Error::Domain("--parallelism must be at least 1".into()));
    }
    match cli.command {
        Command::Compete(a) => cmd_compete(a, out),
        Command::Tdc(a) => cmd_tdc(a, out),
        Command::FdpSd(a) => cmd_fdp_sd(a, out),
        Command::FdpBand(a) => cmd_fdp_band(a, out),
        Command::Bound(a) => cmd_bound(a, out),
        Command::Precompute(a) => cmd_precompute(a, threads),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, threads, out),
    }
}

// ---- input ----

enum Records {
    Pairs(Vec<ScorePair>),
    Labeled(Vec<LabeledHypothesis>),
}

struct Dataset {
    records: Records,
    truth: Option<SimulationTruth>,
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("line {line}: cannot parse {what} {field:?}")))
}

fn parse_bool(field: &str, line: usize) -> Result<bool> {
    match field.trim() {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        other => Err(Error::Data(format!("line {line}: cannot parse true_null {other:?}"))),
    }
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut text = String::new();
    File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?
        .read_to_string(&mut text)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec));
    }
    let Some((_, first)) = rows.first() else {
        return Err(Error::Data(format!("{} holds no records", path.display())));
    };
    let has_header = first.iter().any(|f| f.trim().parse::<f64>().is_err());
    let (target_col, decoy_col, label_col, score_col, truth_col) = if has_header {
        let find = |name: &str| first.iter().position(|f| f.trim() == name);
        (find("target_score"), find("decoy_score"), find("label"), find("score"), find("true_null"))
    } else {
        (Some(0), Some(1), None, None, None)
    };
    let body = &rows[usize::from(has_header)..];
    if body.is_empty() {
        return Err(Error::Data(format!("{} holds no records", path.display())));
    }
    let field = |rec: &csv::StringRecord, col: usize, line: usize| -> Result<String> {
        rec.get(col)
            .map(str::to_string)
            .ok_or_else(|| Error::Data(format!("line {line}: expected at least {} columns", col + 1)))
    };
    let truth = match truth_col {
        Some(c) => Some(SimulationTruth {
            is_true_null: body.iter().map(|(l, r)| parse_bool(&field(r, c, *l)?, *l)).collect::<Result<_>>()?,
        }),
        None => None,
    };
    let records = match (target_col, decoy_col, label_col, score_col) {
        (Some(t), Some(d), _, _) => Records::Pairs(
            body.iter()
                .map(|(l, r)| {
                    Ok(ScorePair {
                        target_score: parse_f64(&field(r, t, *l)?, *l, "target score")?,
                        decoy_score: parse_f64(&field(r, d, *l)?, *l, "decoy score")?,
                    })
                })
                .collect::<Result<_>>()?,
        ),
        (_, _, Some(lc), Some(sc)) => Records::Labeled(
            body.iter()
                .enumerate()
                .map(|(source, (l, r))| {
                    let raw = field(r, lc, *l)?;
                    let v: i64 =
                        raw.trim().parse().map_err(|_| Error::Data(format!("line {l}: cannot parse label {raw:?}")))?;
                    let label = Label::from_int(v).map_err(|e| Error::Data(format!("line {l}: {e}")))?;
                    let score = parse_f64(&field(r, sc, *l)?, *l, "score")?;
                    if score.is_nan() {
                        return Err(Error::Data(format!("line {l}: score is NaN")));
                    }
                    Ok(LabeledHypothesis { score, label, source })
                })
                .collect::<Result<_>>()?,
        ),
        _ => {
            return Err(Error::Data(
                "header must name target_score and decoy_score, or label and score".into(),
            ))
        }
    };
    Ok(Dataset { records, truth })
}

fn data_err(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Data(m),
        other => other,
    }
}

/// Reads and competes the input; the rng continues into the procedure.
fn load_sequence(args: &DataArgs) -> Result<(CompetitionSequence, Option<SimulationTruth>, seed::Rng)> {
    let data = read_dataset(&args.input)?;
    let mut rng = seed::stream(args.seed, 0);
    let labeled = match data.records {
        Records::Pairs(p) => compete(&p, args.tie_policy.into(), &mut rng).map_err(data_err)?,
        Records::Labeled(l) => l,
    };
    let seq = build_sequence(&labeled, &mut rng).map_err(data_err)?;
    Ok((seq, data.truth, seed::stream(args.seed, 1)))
}

// ---- output ----

fn open_output<'a>(path: &Option<PathBuf>, out: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(out),
    })
}

fn write_json<T: Serialize>(value: &T, path: &Option<PathBuf>, out: &mut dyn Write) -> Result<()> {
    let mut w = open_output(path, out)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn with_truth(mut report: DiscoveryReport, truth: &Option<SimulationTruth>) -> Result<DiscoveryReport> {
    if let Some(t) = truth {
        report.fdp = Some(true_fdp(&report, t).map_err(data_err)?);
    }
    Ok(report)
}

fn load_tables(args: &TableArgs, uniform: bool, standardized: bool) -> Result<Tables> {
    let path = |suffix: &str| -> Result<PathBuf> {
        let prefix = args
            .tables
            .as_ref()
            .ok_or_else(|| Error::Config("this band needs quantile tables; pass --tables PREFIX".into()))?;
        Ok(PathBuf::from(format!("{}.{suffix}.tbl", prefix.display())))
    };
    let load_err = |p: &Path, e: Error| match e {
        Error::Io(io) => Error::Config(format!("cannot read table {}: {io}", p.display())),
        other => other,
    };
    let u = if uniform {
        let p = path("uniform")?;
        Some(UniformQuantileTable::load(&p).map_err(|e| load_err(&p, e))?)
    } else {
        None
    };
    let s = if standardized {
        let p = path("standardized")?;
        Some(StandardizedQuantileTable::load(&p).map_err(|e| load_err(&p, e))?)
    } else {
        None
    };
    Ok(Tables { uniform: u, standardized: s, draw: args.draw.into() })
}

struct Tables {
    uniform: Option<UniformQuantileTable>,
    standardized: Option<StandardizedQuantileTable>,
    draw: DrawMode,
}

impl Tables {
    fn spec(&self, kind: BandKind) -> BandSpec<'_> {
        BandSpec { kind, uniform: self.uniform.as_ref(), standardized: self.standardized.as_ref(), draw: self.draw }
    }
}

// ---- commands ----

fn cmd_compete(a: CompeteArgs, out: &mut dyn Write) -> Result<()> {
    let data = read_dataset(&a.data.input)?;
    let Records::Pairs(pairs) = data.records else {
        return Err(Error::Data("compete expects target_score/decoy_score pairs".into()));
    };
    let mut rng = seed::stream(a.data.seed, 0);
    let labeled = compete(&pairs, a.data.tie_policy.into(), &mut rng).map_err(data_err)?;
    let mut w = open_output(&a.data.output, out)?;
    match &data.truth {
        Some(_) => writeln!(w, "id\tlabel\tscore\ttrue_null")?,
        None => writeln!(w, "id\tlabel\tscore")?,
    }
    for h in &labeled {
        write!(w, "{}\t{}\t{}", h.source, h.label.as_int(), h.score)?;
        if let Some(t) = &data.truth {
            write!(w, "\t{}", u8::from(t.is_true_null[h.source]))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_tdc(a: TdcArgs, out: &mut dyn Write) -> Result<()> {
    let (seq, truth, _) = load_sequence(&a.data)?;
    let report = with_truth(run_tdc(&seq, a.alpha)?, &truth)?;
    write_json(&report, &a.data.output, out)
}

fn cmd_fdp_sd(a: FdpSdArgs, out: &mut dyn Write) -> Result<()> {
    let (seq, truth, mut rng) = load_sequence(&a.data)?;
    let plan = StepdownPlan::new(seq.len(), a.alpha, a.gamma)?;
    let report = if a.randomized { plan.run_randomized(&seq, &mut rng)? } else { plan.run(&seq)? };
    write_json(&with_truth(report, &truth)?, &a.data.output, out)
}

fn cmd_fdp_band(a: FdpBandArgs, out: &mut dyn Write) -> Result<()> {
    let kind = match a.band {
        BandArg::Uniform => BandKind::Uniform,
        BandArg::Standardized => BandKind::Standardized,
        BandArg::Kr => BandKind::Kr,
    };
    let tables = load_tables(&a.tables, kind == BandKind::Uniform, kind == BandKind::Standardized)?;
    let (seq, truth, mut rng) = load_sequence(&a.data)?;
    let band = FdpBand::new(seq.len(), a.alpha, a.gamma, &tables.spec(kind))?;
    let report = band.run(&seq, &mut rng)?;
    write_json(&with_truth(report, &truth)?, &a.data.output, out)
}

#[derive(Serialize)]
struct BoundReport {
    bound_method: &'static str,
    #[serde(flatten)]
    report: DiscoveryReport,
}

fn cmd_bound(a: BoundArgs, out: &mut dyn Write) -> Result<()> {
    let method: BoundMethod = a.method.into();
    let kind = match method {
        BoundMethod::Ub => BandKind::Uniform,
        BoundMethod::Sb => BandKind::Standardized,
        BoundMethod::Krb => BandKind::Kr,
    };
    let tables = load_tables(&a.tables, kind == BandKind::Uniform, kind == BandKind::Standardized)?;
    let (seq, truth, mut rng) = load_sequence(&a.data)?;
    let tdc = match (&a.tdc_report, a.alpha) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            let r: DiscoveryReport = serde_json::from_str(&text)
                .map_err(|e| Error::Data(format!("cannot parse TDC report {}: {e}", path.display())))?;
            let fresh = run_tdc(&seq, r.alpha)?;
            if r.procedure != ProcedureId::Tdc || r.m != seq.len() || r.k != fresh.k || r.num_decoys != fresh.num_decoys {
                return Err(Error::Data(
                    "TDC report does not match this input; rerun tdc with the same input, seed and tie policy".into(),
                ));
            }
            fresh
        }
        (None, Some(alpha)) => run_tdc(&seq, alpha)?,
        (None, None) => return Err(Error::Domain("either --tdc-report or --alpha is required".into())),
    };
    let eta = bound_tdc_fdp(&seq, &tdc, a.gamma, method, &tables.spec(kind), &mut rng)?;
    let mut report = with_truth(tdc, &truth)?;
    report.gamma = Some(a.gamma);
    report.bound = Some(eta);
    write_json(&BoundReport { bound_method: method.name(), report }, &a.data.output, out)
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::Internal(e.to_string()))
}

fn cmd_precompute(a: PrecomputeArgs, threads: usize) -> Result<()> {
    let (u, s) = thread_pool(threads)?.install(|| build_tables(a.d0, &a.gammas, a.samples, a.seed))?;
    let prefix = a.out.display().to_string();
    u.save(Path::new(&format!("{prefix}.uniform.tbl")))?;
    s.save(Path::new(&format!("{prefix}.standardized.tbl")))?;
    Ok(())
}

fn generator_spec(g: &GeneratorArgs, seed: u64) -> Result<GeneratorSpec> {
    Ok(match g.model {
        ModelArg::GenericNull => GeneratorSpec::GenericNull { m: g.m, num_false: g.num_false },
        ModelArg::SpectrumId => {
            let pool = match (&g.pool, g.uncalibrated) {
                (_, false) => Vec::new(),
                (Some(p), true) => read_pool(p).map_err(|e| match e {
                    Error::Io(io) => Error::Data(format!("cannot read pool {}: {io}", p.display())),
                    other => other,
                })?,
                (None, true) => synthetic_pool(g.pool_size, seed::derive(seed, u64::MAX)),
            };
            GeneratorSpec::SpectrumId(SpectrumIdParams {
                m: g.m,
                pi0: g.pi0,
                a: g.a,
                b: g.b,
                n_candidates: g.n_candidates,
                calibrated: !g.uncalibrated,
                location_scale_pool: pool,
                seed,
            })
        }
    })
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let spec = generator_spec(&a.generator, a.seed)?;
    let mut w = open_output(&a.output, out)?;
    match spec {
        GeneratorSpec::SpectrumId(p) => {
            let (pairs, truth) = gen_spectrum_id(&p)?;
            writeln!(w, "target_score\tdecoy_score\ttrue_null")?;
            for (pair, t) in pairs.iter().zip(&truth.is_true_null) {
                writeln!(w, "{}\t{}\t{}", pair.target_score, pair.decoy_score, u8::from(*t))?;
            }
        }
        GeneratorSpec::GenericNull { m, num_false } => {
            let (hyps, truth) = gen_generic_null(m, num_false, a.seed)?;
            writeln!(w, "label\tscore\ttrue_null")?;
            for (h, t) in hyps.iter().zip(&truth.is_true_null) {
                writeln!(w, "{}\t{}\t{}", h.label.as_int(), h.score, u8::from(*t))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, threads: usize, out: &mut dyn Write) -> Result<()> {
    let methods: Vec<BoundMethod> = a.bounds.iter().map(|&m| m.into()).collect();
    let need_u = a.procedures.contains(&ProcedureId::FdpUb) || methods.contains(&BoundMethod::Ub);
    let need_s = a.procedures.contains(&ProcedureId::FdpSb) || methods.contains(&BoundMethod::Sb);
    let tables = load_tables(&a.tables, need_u, need_s)?;
    let cfg = EvaluationConfig {
        generator: generator_spec(&a.generator, a.seed)?,
        procedures: a.procedures.clone(),
        bound_methods: methods,
        alpha: a.alpha,
        gamma: a.gamma,
        replicates: a.replicates,
        master_seed: a.seed,
        parallelism: threads,
        uniform: tables.uniform.as_ref(),
        standardized: tables.standardized.as_ref(),
        draw: tables.draw,
    };
    let ev = run_evaluation(&cfg)?;
    if let Some(p) = &a.rows {
        ev.write_csv(BufWriter::new(File::create(p)?))?;
    }
    write_json(&ev.summary, &a.output, out)
}
