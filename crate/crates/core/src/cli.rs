//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
//! Data goes to stdout (or `--output`); diagnostics go to stderr.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::datasets::{gen_pair, load_samples, DatasetDefaults, DatasetSpec, Family};
use crate::error::{Error, Result};
use crate::harness::{
    dimension_sweep, min_parameter_difference, min_sample_size, timing_benchmark, write_csv_rows,
    write_jsonl, HarnessConfig, PowerReport, PowerRow,
};
use crate::method::{run_test, MethodStatistic, PValueMode};
use crate::rng::RngSpec;
use crate::types::{Method, TestOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ddks", version, about = "d-dimensional two-sample Kolmogorov-Smirnov tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one two-sample test on CSV files or a generated dataset.
    Test(TestArgs),
    /// Minimum sample size that rejects H0.
    Power(PowerArgs),
    /// Minimum parameter difference that rejects H0 at a fixed n.
    Shrink(ShrinkArgs),
    /// Minimum sample size for each of several dimensions.
    Dims(DimsArgs),
    /// Median time of one statistic evaluation per sample size.
    Timing(TimingArgs),
    /// Write a generated (P, T) pair as CSV files.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct DatasetArgs {
    /// Dataset family: gvm, gvs, dvu, skew or mm.
    #[arg(long, default_value = "gvm")]
    pub dataset: String,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// TOML file overriding the bundled per-family defaults.
    #[arg(long)]
    pub defaults: Option<PathBuf>,
    #[arg(long)]
    pub center: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub sigma1: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub rate1: Option<f64>,
    #[arg(long)]
    pub rate2: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
}

impl DatasetArgs {
    fn resolve(&self, seed: u64) -> Result<DatasetSpec> {
        let family: Family = self.dataset.parse()?;
        if family == Family::File {
            return Err(Error::BadSpec("use --p and --t to read files".into()));
        }
        let defaults = match &self.defaults {
            Some(path) => DatasetDefaults::load(path)?,
            None => DatasetDefaults::builtin(),
        };
        let mut params = defaults.for_family(family);
        let overrides = [
            (&mut params.center, self.center),
            (&mut params.delta, self.delta),
            (&mut params.sigma, self.sigma),
            (&mut params.sigma1, self.sigma1),
            (&mut params.sigma2, self.sigma2),
            (&mut params.rate1, self.rate1),
            (&mut params.rate2, self.rate2),
            (&mut params.noise_fraction, self.noise),
        ];
        for (slot, value) in overrides {
            if let Some(v) = value {
                *slot = v;
            }
        }
        let spec = DatasetSpec::new(family, self.d, RngSpec::new(seed)).with_params(params);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct Common {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write results here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl Common {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::BadSpec(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TestArgs {
    #[arg(long, default_value = "ddks")]
    pub method: String,
    /// CSV file with sample P.
    #[arg(long, requires = "t")]
    pub p: Option<PathBuf>,
    /// CSV file with sample T.
    #[arg(long, requires = "p")]
    pub t: Option<PathBuf>,
    /// Points per sample when generating data instead of reading files.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Permutations for the p-value; 0 skips the p-value.
    #[arg(long, default_value_t = 100)]
    pub perms: usize,
    /// Use the closed-form significance (ddks only).
    #[arg(long)]
    pub analytic: bool,
    /// Report the measured runtime; otherwise runtime_ns is 0 and output
    /// is identical across runs.
    #[arg(long)]
    pub runtime: bool,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long, default_value = "ddks")]
    pub method: String,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Independent draws per candidate.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 100)]
    pub perms: usize,
    #[arg(long)]
    pub analytic: bool,
    #[arg(long, default_value_t = 5000)]
    pub n_max: usize,
    /// Required rejection rate; defaults to 1 - alpha.
    #[arg(long)]
    pub target_rate: Option<f64>,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub common: Common,
}

impl SearchArgs {
    fn harness(&self) -> Result<HarnessConfig> {
        self.common.validate()?;
        let cfg = HarnessConfig {
            alpha: self.common.alpha,
            trials: self.trials,
            repetitions: self.repeats,
            n_max: self.n_max,
            pvalue: pvalue_mode(self.analytic, self.perms)?,
            target_rate: self.target_rate,
            ..HarnessConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PowerArgs {
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ShrinkArgs {
    /// Sample size held fixed.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct DimsArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    pub dims: Vec<usize>,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TimingArgs {
    #[arg(long, default_value = "ddks")]
    pub method: String,
    /// Sample sizes to time.
    #[arg(long, value_delimiter = ',', default_value = "100,1000")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long)]
    pub out_p: PathBuf,
    #[arg(long)]
    pub out_t: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub dataset: DatasetArgs,
}

fn pvalue_mode(analytic: bool, perms: usize) -> Result<PValueMode> {
    Ok(match (analytic, perms) {
        (true, _) => PValueMode::Analytic,
        (false, 0) => PValueMode::None,
        (false, n_perm) => PValueMode::Permutation { n_perm },
    })
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|source| Error::Io { path: p.clone(), source })?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn io_err(source: io::Error) -> Error {
    Error::Io { path: "<output>".into(), source }
}

#[derive(Serialize)]
struct TestRecord<'a> {
    #[serde(flatten)]
    outcome: &'a TestOutcome,
    config: &'a TestArgs,
    dataset: Option<&'a DatasetSpec>,
}

fn cmd_test(args: &TestArgs) -> Result<()> {
    args.common.validate()?;
    let method: Method = args.method.parse()?;
    let mode = pvalue_mode(args.analytic, args.perms)?;
    let (spec, (p, t)) = match (&args.p, &args.t) {
        (Some(p), Some(t)) => (None, load_samples(p, t)?),
        _ => {
            let spec = args.dataset.resolve(args.common.seed)?;
            let pair = gen_pair(&spec, args.n)?;
            (Some(spec), pair)
        }
    };
    let rng = RngSpec::new(args.common.seed);
    let mut outcome = run_test(&MethodStatistic::new(method), &p, &t, mode, rng)?;
    if !args.runtime {
        outcome.runtime_ns = 0;
    }
    let mut out = output(&args.common.output)?;
    match args.common.format {
        Format::Json => {
            let record = TestRecord { outcome: &outcome, config: args, dataset: spec.as_ref() };
            write_jsonl(&mut out, &[record])?;
        }
        Format::Csv => write_csv_rows(&mut out, &[&outcome])?,
    }
    out.flush().map_err(io_err)
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line<'a, C: Serialize> {
    Header { command: &'static str, config: &'a C, harness: Option<&'a HarnessConfig> },
    PowerReport(&'a PowerReport),
    Summary(&'a PowerReport),
}

fn emit_reports<C: Serialize>(
    command: &'static str,
    config: &C,
    cfg: &HarnessConfig,
    common: &Common,
    reports: &[PowerReport],
) -> Result<()> {
    for r in reports {
        eprintln!(
            "{} {} d={} found={:.4} spread=[{:.4}, {:.4}] unreached={}/{}",
            r.method, r.dataset.family, r.dataset.d, r.found, r.spread.min, r.spread.max, r.unreached, r.repetitions
        );
    }
    let mut out = output(&common.output)?;
    match common.format {
        Format::Json => {
            let mut lines = vec![Line::Header { command, config, harness: Some(cfg) }];
            let singles: Vec<PowerReport> = reports.iter().flat_map(PowerReport::per_repetition).collect();
            lines.extend(singles.iter().map(Line::PowerReport));
            lines.extend(reports.iter().map(Line::Summary));
            write_jsonl(&mut out, &lines)?;
        }
        Format::Csv => {
            let rows: Vec<PowerRow> = reports.iter().map(PowerRow::from).collect();
            write_csv_rows(&mut out, &rows)?;
        }
    }
    out.flush().map_err(io_err)
}

fn cmd_power(args: &PowerArgs) -> Result<()> {
    let s = &args.search;
    let cfg = s.harness()?;
    let spec = s.dataset.resolve(s.common.seed)?;
    let stat = MethodStatistic::new(s.method.parse()?);
    let report = min_sample_size(&stat, &spec, &cfg, RngSpec::new(s.common.seed))?;
    emit_reports("power", args, &cfg, &s.common, &[report])
}

fn cmd_shrink(args: &ShrinkArgs) -> Result<()> {
    let s = &args.search;
    let cfg = s.harness()?;
    let spec = s.dataset.resolve(s.common.seed)?;
    let stat = MethodStatistic::new(s.method.parse()?);
    let report = min_parameter_difference(&stat, &spec, args.n, &cfg, RngSpec::new(s.common.seed))?;
    emit_reports("shrink", args, &cfg, &s.common, &[report])
}

fn cmd_dims(args: &DimsArgs) -> Result<()> {
    let s = &args.search;
    let cfg = s.harness()?;
    let spec = s.dataset.resolve(s.common.seed)?;
    let stat = MethodStatistic::new(s.method.parse()?);
    let reports = dimension_sweep(&stat, &spec, &args.dims, &cfg, RngSpec::new(s.common.seed))?;
    emit_reports("dims", args, &cfg, &s.common, &reports)
}

fn cmd_timing(args: &TimingArgs) -> Result<()> {
    let spec = args.dataset.resolve(args.common.seed)?;
    let stat = MethodStatistic::new(args.method.parse()?);
    let rows = timing_benchmark(&stat, &spec, &args.n, args.reps)?;
    for r in &rows {
        eprintln!("{} n={} d={} median {:.6}s", r.method, r.n, r.d, r.median_ns as f64 * 1e-9);
    }
    let mut out = output(&args.common.output)?;
    match args.common.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Header<'a> {
                kind: &'static str,
                command: &'static str,
                config: &'a TimingArgs,
                dataset: &'a DatasetSpec,
            }
            let header = Header { kind: "header", command: "timing", config: args, dataset: &spec };
            write_jsonl(&mut out, &[header])?;
            write_jsonl(&mut out, &rows)?;
        }
        Format::Csv => write_csv_rows(&mut out, &rows)?,
    }
    out.flush().map_err(io_err)
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let spec = args.dataset.resolve(args.seed)?;
    let (p, t) = gen_pair(&spec, args.n)?;
    p.write_csv(&args.out_p)?;
    t.write_csv(&args.out_t)?;
    eprintln!("wrote {} and {} ({} x {})", args.out_p.display(), args.out_t.display(), args.n, spec.d);
    Ok(())
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BadSpec(_) => EXIT_USAGE,
        Error::DimensionMismatch { .. }
        | Error::EmptySample
        | Error::NonFiniteValue { .. }
        | Error::DimensionTooLarge { .. }
        | Error::OutOfRange { .. }
        | Error::GridTooLarge { .. }
        | Error::EmptyList
        | Error::SingularCovariance
        | Error::InsufficientSamples(_)
        | Error::Io { .. }
        | Error::Parse(_) => EXIT_DATA,
        Error::Domain(_) => EXIT_INTERNAL,
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Power(a) => cmd_power(a),
        Command::Shrink(a) => cmd_shrink(a),
        Command::Dims(a) => cmd_dims(a),
        Command::Timing(a) => cmd_timing(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Sizes the worker pool from `DDKS_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("DDKS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
}
