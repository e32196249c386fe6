//! Power analysis and timing.
//!
//! A candidate (sample size or parameter gap) passes when the fraction of
//! rejected trials reaches the target rate, by default `1 − alpha`. Searches
//! bracket by doubling and then bisect; a bisection also stops early once
//! the mean p-value at a passing candidate is within `p_tolerance` of alpha.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{gen_pair, DatasetSpec, Family};
use crate::error::{Error, Result};
use crate::method::{evaluate, MethodStatistic, PValueMode};
use crate::rng::RngSpec;
use crate::significance::TwoSampleStatistic;
use crate::types::Method;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub alpha: f64,
    /// Independent (P, T) draws per candidate.
    pub trials: usize,
    pub repetitions: usize,
    pub n_max: usize,
    pub pvalue: PValueMode,
    /// Required rejection rate; `None` means `1 − alpha`.
    pub target_rate: Option<f64>,
    pub p_tolerance: f64,
    /// Bisection steps for parameter searches.
    pub parameter_steps: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            trials: 100,
            repetitions: 10,
            n_max: 5000,
            pvalue: PValueMode::Permutation { n_perm: 100 },
            target_rate: None,
            p_tolerance: 1e-3,
            parameter_steps: 8,
        }
    }
}

impl HarnessConfig {
    pub fn target(&self) -> f64 {
        self.target_rate.unwrap_or(1.0 - self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::BadSpec(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.trials == 0 || self.repetitions == 0 {
            return Err(Error::BadSpec("trials and repetitions must be positive".into()));
        }
        if self.n_max < 2 {
            return Err(Error::BadSpec("n_max must be at least 2".into()));
        }
        if self.pvalue == PValueMode::None {
            return Err(Error::BadSpec("power analysis needs a p-value mode".into()));
        }
        Ok(())
    }
}

/// Outcome of the trials at one candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub value: f64,
    pub rate: f64,
    pub mean_p: f64,
    pub trials: usize,
}

fn trial_p_value(
    stat: &MethodStatistic,
    spec: &DatasetSpec,
    n: usize,
    mode: PValueMode,
    rng: RngSpec,
) -> Result<f64> {
    let (p, t) = gen_pair(&spec.clone().with_rng(rng.derive(0)), n)?;
    match evaluate(stat, &p, &t, mode, rng.derive(1)) {
        Ok((_, Some(pv))) => Ok(pv),
        Ok((_, None)) => Err(Error::BadSpec("power analysis needs a p-value mode".into())),
        // too few points for a covariance estimate: the test cannot reject
        Err(Error::InsufficientSamples(_) | Error::SingularCovariance) => Ok(1.0),
        Err(e) => Err(e),
    }
}

/// Rejection rate and mean p-value over `cfg.trials` independent draws.
/// Trial i uses stream `rng.derive(i)`.
pub fn trial_summary(
    stat: &MethodStatistic,
    spec: &DatasetSpec,
    n: usize,
    cfg: &HarnessConfig,
    rng: RngSpec,
) -> Result<TrialSummary> {
    cfg.validate()?;
    let ps = (0..cfg.trials)
        .into_par_iter()
        .map(|i| trial_p_value(stat, spec, n, cfg.pvalue, rng.derive(i as u64)))
        .collect::<Result<Vec<f64>>>()?;
    let rejected = ps.iter().filter(|&&pv| pv <= cfg.alpha).count();
    Ok(TrialSummary {
        value: n as f64,
        rate: rejected as f64 / ps.len() as f64,
        mean_p: ps.iter().sum::<f64>() / ps.len() as f64,
        trials: ps.len(),
    })
}

/// Fraction of trials rejecting H0 at `cfg.alpha`.
pub fn rejection_rate(
    stat: &MethodStatistic,
    spec: &DatasetSpec,
    n: usize,
    cfg: &HarnessConfig,
    rng: RngSpec,
) -> Result<f64> {
    Ok(trial_summary(stat, spec, n, cfg, rng)?.rate)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchTarget {
    SampleSize,
    ParameterDifference,
}

/// One repetition of a search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRun {
    /// Found value, or the search bound when `reached` is false.
    pub found: f64,
    pub reached: bool,
    pub evaluations: Vec<TrialSummary>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self { min, mean: mean.clamp(min, max), max }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub method: Method,
    pub dataset: DatasetSpec,
    pub target: SearchTarget,
    pub alpha: f64,
    pub target_rate: f64,
    pub pvalue: PValueMode,
    pub trials: usize,
    /// Sample size held fixed during a parameter search.
    pub n: Option<usize>,
    /// Upper end of the search range.
    pub bound: f64,
    /// Mean found value; unreached repetitions count as `bound`.
    pub found: f64,
    pub repetitions: usize,
    pub spread: Spread,
    pub unreached: usize,
    /// Set when no repetition met the criterion inside the bound.
    pub not_reachable: bool,
    pub runs: Vec<SearchRun>,
}

impl PowerReport {
    fn assemble(
        method: Method,
        dataset: DatasetSpec,
        target: SearchTarget,
        cfg: &HarnessConfig,
        n: Option<usize>,
        bound: f64,
        runs: Vec<SearchRun>,
    ) -> Self {
        let values: Vec<f64> = runs.iter().map(|r| r.found).collect();
        let spread = Spread::of(&values);
        let unreached = runs.iter().filter(|r| !r.reached).count();
        Self {
            method,
            dataset,
            target,
            alpha: cfg.alpha,
            target_rate: cfg.target(),
            pvalue: cfg.pvalue,
            trials: cfg.trials,
            n,
            bound,
            found: spread.mean,
            repetitions: runs.len(),
            spread,
            unreached,
            not_reachable: unreached == runs.len(),
            runs,
        }
    }

    /// One single-repetition report per run.
    pub fn per_repetition(&self) -> Vec<PowerReport> {
        self.runs
            .iter()
            .map(|run| {
                let mut one = self.clone();
                one.runs = vec![run.clone()];
                one.found = run.found;
                one.repetitions = 1;
                one.spread = Spread::of(&[run.found]);
                one.unreached = usize::from(!run.reached);
                one.not_reachable = !run.reached;
                one
            })
            .collect()
    }
}

fn passes(s: &TrialSummary, cfg: &HarnessConfig) -> bool {
    s.rate >= cfg.target()
}

fn settled(s: &TrialSummary, cfg: &HarnessConfig) -> bool {
    passes(s, cfg) && (s.mean_p - cfg.alpha).abs() <= cfg.p_tolerance
}

fn search_n(stat: &MethodStatistic, spec: &DatasetSpec, cfg: &HarnessConfig, rng: RngSpec) -> Result<SearchRun> {
    let mut evaluations = Vec::new();
    let mut eval = |n: usize| -> Result<TrialSummary> {
        let s = trial_summary(stat, spec, n, cfg, rng.derive(n as u64))?;
        evaluations.push(s);
        Ok(s)
    };
    let (mut lo, mut hi) = (1, 2);
    loop {
        let s = eval(hi)?;
        if passes(&s, cfg) {
            if settled(&s, cfg) {
                lo = hi - 1;
            }
            break;
        }
        if hi >= cfg.n_max {
            return Ok(SearchRun { found: cfg.n_max as f64, reached: false, evaluations });
        }
        lo = hi;
        hi = (hi * 2).min(cfg.n_max);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let s = eval(mid)?;
        if passes(&s, cfg) {
            hi = mid;
            if settled(&s, cfg) {
                break;
            }
        } else {
            lo = mid;
        }
    }
    Ok(SearchRun { found: hi as f64, reached: true, evaluations })
}

/// Smallest n in [2, n_max] at which the method meets the rejection target.
/// Repetition r uses stream `rng.derive(r)`; every candidate n draws fresh
/// samples.
pub fn min_sample_size(
    stat: &MethodStatistic,
    spec: &DatasetSpec,
    cfg: &HarnessConfig,
    rng: RngSpec,
) -> Result<PowerReport> {
    cfg.validate()?;
    spec.validate()?;
    let runs = (0..cfg.repetitions)
        .map(|r| search_n(stat, spec, cfg, rng.derive(r as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerReport::assemble(
        stat.method,
        spec.clone(),
        SearchTarget::SampleSize,
        cfg,
        None,
        cfg.n_max as f64,
        runs,
    ))
}

/// Upper end of the parameter-gap search for each family.
pub fn parameter_bound(family: Family) -> Result<f64> {
    match family {
        Family::Gvm | Family::Mm | Family::Gvs => Ok(1.0),
        Family::Skew => Ok(5.0),
        Family::Dvu | Family::File => Err(Error::BadSpec(format!(
            "{family} has no scalar difference parameter"
        ))),
    }
}

/// Smallest gap between the two distributions' parameters detectable at
/// sample size `n`, searched over [0, bound].
pub fn min_parameter_difference(
    stat: &MethodStatistic,
    spec: &DatasetSpec,
    n: usize,
    cfg: &HarnessConfig,
    rng: RngSpec,
) -> Result<PowerReport> {
    cfg.validate()?;
    spec.validate()?;
    let bound = parameter_bound(spec.family)?;
    let runs = (0..cfg.repetitions)
        .map(|r| -> Result<SearchRun> {
            let rng = rng.derive(r as u64);
            let mut evaluations = Vec::new();
            let mut eval = |gap: f64| -> Result<TrialSummary> {
                let shifted = spec.clone().with_params(spec.params.with_difference(spec.family, gap)?);
                let mut s = trial_summary(stat, &shifted, n, cfg, rng.derive(gap.to_bits()))?;
                s.value = gap;
                evaluations.push(s);
                Ok(s)
            };
            if !passes(&eval(bound)?, cfg) {
                return Ok(SearchRun { found: bound, reached: false, evaluations });
            }
            let (mut lo, mut hi) = (0.0, bound);
            for _ in 0..cfg.parameter_steps {
                let mid = 0.5 * (lo + hi);
                let s = eval(mid)?;
                if passes(&s, cfg) {
                    hi = mid;
                    if settled(&s, cfg) {
                        break;
                    }
                } else {
                    lo = mid;
                }
            }
            Ok(SearchRun { found: hi, reached: true, evaluations })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerReport::assemble(
        stat.method,
        spec.clone(),
        SearchTarget::ParameterDifference,
        cfg,
        Some(n),
        bound,
        runs,
    ))
}

/// [`min_sample_size`] for each dimension in `dims`; dimension d uses
/// stream `rng.derive(d)`.
pub fn dimension_sweep(
    stat: &MethodStatistic,
    spec: &DatasetSpec,
    dims: &[usize],
    cfg: &HarnessConfig,
    rng: RngSpec,
) -> Result<Vec<PowerReport>> {
    if dims.is_empty() {
        return Err(Error::EmptyList);
    }
    dims.iter()
        .map(|&d| {
            let mut at_d = spec.clone();
            at_d.d = d;
            min_sample_size(stat, &at_d, cfg, rng.derive(d as u64))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: Method,
    pub n: usize,
    pub d: usize,
    pub reps: usize,
    pub median_ns: u64,
}

/// Median wall-clock time of one statistic evaluation (no p-value) for
/// each sample size, after one untimed warm-up call.
pub fn timing_benchmark(
    stat: &MethodStatistic,
    spec: &DatasetSpec,
    n_list: &[usize],
    reps: usize,
) -> Result<Vec<TimingRow>> {
    if reps < 3 {
        return Err(Error::BadSpec(format!("timing needs at least 3 repetitions, got {reps}")));
    }
    if n_list.is_empty() {
        return Err(Error::EmptyList);
    }
    n_list
        .iter()
        .map(|&n| {
            let (p, t) = gen_pair(spec, n)?;
            stat.compute(&p, &t)?;
            let mut times = (0..reps)
                .map(|_| {
                    let start = Instant::now();
                    stat.compute(&p, &t)?;
                    Ok(start.elapsed().as_nanos() as u64)
                })
                .collect::<Result<Vec<u64>>>()?;
            times.sort_unstable();
            Ok(TimingRow {
                method: stat.method,
                n,
                d: p.d(),
                reps,
                median_ns: times[reps / 2],
            })
        })
        .collect()
}

/// Flat CSV view of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub method: Method,
    pub family: Family,
    pub d: usize,
    pub target: SearchTarget,
    pub alpha: f64,
    pub trials: usize,
    pub n: Option<usize>,
    pub found: f64,
    pub min: f64,
    pub max: f64,
    pub repetitions: usize,
    pub unreached: usize,
    pub not_reachable: bool,
}

impl From<&PowerReport> for PowerRow {
    fn from(r: &PowerReport) -> Self {
        Self {
            method: r.method,
            family: r.dataset.family,
            d: r.dataset.d,
            target: r.target,
            alpha: r.alpha,
            trials: r.trials,
            n: r.n,
            found: r.found,
            min: r.spread.min,
            max: r.spread.max,
            repetitions: r.repetitions,
            unreached: r.unreached,
            not_reachable: r.not_reachable,
        }
    }
}

/// Writes one JSON document per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, items: &[T]) -> Result<()> {
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out, "{line}").map_err(|source| Error::Io { path: "<output>".into(), source })?;
    }
    Ok(())
}

/// Writes rows as CSV with a header.
pub fn write_csv_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush().map_err(|source| Error::Io { path: "<output>".into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> HarnessConfig {
        HarnessConfig {
            trials: 20,
            repetitions: 2,
            n_max: 64,
            pvalue: PValueMode::Permutation { n_perm: 19 },
            ..HarnessConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(HarnessConfig::default().validate().is_ok());
        for bad in [
            HarnessConfig { alpha: 0.0, ..quick() },
            HarnessConfig { trials: 0, ..quick() },
            HarnessConfig { pvalue: PValueMode::None, ..quick() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::BadSpec(_))));
        }
    }

    #[test]
    fn spread_is_ordered() {
        let s = Spread::of(&[3.0, 1.0, 2.0]);
        assert_eq!((s.min, s.mean, s.max), (1.0, 2.0, 3.0));
        let one = Spread::of(&[0.1 + 0.2]);
        assert!(one.min <= one.mean && one.mean <= one.max);
    }

    #[test]
    fn null_rate_is_near_alpha() {
        let mut spec = DatasetSpec::new(Family::Gvm, 2, RngSpec::new(1));
        spec.params.delta = 0.0;
        let cfg = HarnessConfig { trials: 400, ..quick() };
        let rate = rejection_rate(&Method::Onedks.into(), &spec, 20, &cfg, RngSpec::new(2)).unwrap();
        let se = (0.05f64 * 0.95 / 400.0).sqrt();
        assert!((rate - 0.05).abs() <= 3.0 * se, "{rate}");
    }

    #[test]
    fn null_is_not_reachable() {
        let mut spec = DatasetSpec::new(Family::Gvm, 2, RngSpec::new(1));
        spec.params.delta = 0.0;
        let report = min_sample_size(&Method::Rdks.into(), &spec, &quick(), RngSpec::new(3)).unwrap();
        assert!(report.not_reachable);
        assert_eq!(report.found, 64.0);
        assert_eq!(report.per_repetition().len(), 2);
    }

    #[test]
    fn bisection_brackets_tightly() {
        let spec = DatasetSpec::new(Family::Gvm, 2, RngSpec::new(1));
        let cfg = HarnessConfig { p_tolerance: 0.0, ..quick() };
        let stat = MethodStatistic::new(Method::Onedks);
        let report = min_sample_size(&stat, &spec, &cfg, RngSpec::new(4)).unwrap();
        for (r, run) in report.runs.iter().enumerate() {
            assert!(run.reached);
            let n = run.found as usize;
            assert!(n >= 2);
            let rng = RngSpec::new(4).derive(r as u64);
            let at = trial_summary(&stat, &spec, n, &cfg, rng.derive(n as u64)).unwrap();
            assert!(at.rate >= cfg.target());
            if n > 2 {
                let below = trial_summary(&stat, &spec, n - 1, &cfg, rng.derive(n as u64 - 1)).unwrap();
                assert!(below.rate < cfg.target());
            }
        }
        let s = report.spread;
        assert!(s.min <= s.mean && s.mean <= s.max);
    }

    #[test]
    fn reports_are_deterministic() {
        let spec = DatasetSpec::new(Family::Skew, 2, RngSpec::new(1));
        let stat = MethodStatistic::new(Method::Rdks);
        let a = min_sample_size(&stat, &spec, &quick(), RngSpec::new(5)).unwrap();
        let b = min_sample_size(&stat, &spec, &quick(), RngSpec::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parameter_search() {
        let spec = DatasetSpec::new(Family::Gvm, 2, RngSpec::new(1));
        let stat = MethodStatistic::new(Method::Ddks);
        let cfg = HarnessConfig { pvalue: PValueMode::Analytic, ..quick() };
        let report = min_parameter_difference(&stat, &spec, 30, &cfg, RngSpec::new(6)).unwrap();
        assert!(!report.not_reachable);
        assert!(report.found > 0.0 && report.found < 1.0);
        // the upper bound itself must pass
        let first = report.runs[0].evaluations[0];
        assert_eq!(first.value, 1.0);
        assert!(first.rate >= cfg.target());
        let dvu = DatasetSpec::new(Family::Dvu, 2, RngSpec::new(1));
        assert!(matches!(
            min_parameter_difference(&stat, &dvu, 30, &cfg, RngSpec::new(6)),
            Err(Error::BadSpec(_))
        ));
    }

    #[test]
    fn power_grows_with_n() {
        let mut spec = DatasetSpec::new(Family::Gvm, 2, RngSpec::new(1));
        spec.params.delta = 0.08;
        let stat = MethodStatistic::new(Method::Ddks);
        let cfg = HarnessConfig { trials: 100, pvalue: PValueMode::Permutation { n_perm: 50 }, ..quick() };
        let rates: Vec<f64> = [5, 10, 20, 40]
            .iter()
            .map(|&n| rejection_rate(&stat, &spec, n, &cfg, RngSpec::new(n as u64)).unwrap())
            .collect();
        for w in rates.windows(2) {
            let se = (w[0] * (1.0 - w[0]) / 100.0).sqrt().max(0.01);
            assert!(w[1] >= w[0] - 3.0 * se, "{rates:?}");
        }
    }

    #[test]
    fn sweep_and_timing_shapes() {
        let spec = DatasetSpec::new(Family::Dvu, 2, RngSpec::new(1));
        let stat = MethodStatistic::new(Method::Rdks);
        let reports = dimension_sweep(&stat, &spec, &[2, 3], &quick(), RngSpec::new(1)).unwrap();
        assert_eq!(reports.iter().map(|r| r.dataset.d).collect::<Vec<_>>(), vec![2, 3]);
        assert!(dimension_sweep(&stat, &spec, &[], &quick(), RngSpec::new(1)).is_err());
        let rows = timing_benchmark(&stat, &spec, &[10, 20], 3).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![10, 20]);
        assert!(timing_benchmark(&stat, &spec, &[10], 2).is_err());
    }

    #[test]
    fn writers() {
        let spec = DatasetSpec::new(Family::Dvu, 2, RngSpec::new(1));
        let report = min_sample_size(&Method::Rdks.into(), &spec, &quick(), RngSpec::new(1)).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &report.per_repetition()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: PowerReport = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back.repetitions, 1);
        let mut buf = Vec::new();
        write_csv_rows(&mut buf, &[PowerRow::from(&report)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,family,d,target"));
        assert_eq!(text.lines().count(), 2);
    }
}
