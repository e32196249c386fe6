//! Dispatch from a [`Method`] to its statistic and p-value.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    hotelling_t2, kl_divergence, onedks, PooledColumns, PooledHistogram, PooledHotelling,
};
use crate::error::{Error, Result};
use crate::exact::{ddks_statistic_naive, ddks_statistic_with, ExactConfig, PooledOrthants};
use crate::rdks::{rdks_statistic, PooledRadial};
use crate::rng::RngSpec;
use crate::significance::{
    ddks_significance_with, permutation_test, PooledStatistic, SignificanceInput,
    SignificanceOptions, TwoSampleStatistic,
};
use crate::types::{validate_pair, Method, Sample, TestOutcome};
use crate::vdks::{vdks_statistic_with, VdksConfig};

/// A method together with its tuning knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodStatistic {
    pub method: Method,
    pub exact: ExactConfig,
    pub vdks: VdksConfig,
}

impl MethodStatistic {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            exact: ExactConfig::default(),
            vdks: VdksConfig::default(),
        }
    }
}

impl From<Method> for MethodStatistic {
    fn from(method: Method) -> Self {
        Self::new(method)
    }
}

struct Prepared<F>(F);

impl<F: Fn(&[bool]) -> f64 + Sync> PooledStatistic for Prepared<F> {
    fn split(&self, in_p: &[bool]) -> Result<f64> {
        Ok((self.0)(in_p))
    }
}

struct PooledFallible<F>(F);

impl<F: Fn(&[bool]) -> Result<f64> + Sync> PooledStatistic for PooledFallible<F> {
    fn split(&self, in_p: &[bool]) -> Result<f64> {
        (self.0)(in_p)
    }
}

fn boxed<'a, F: Fn(&[bool]) -> f64 + Sync + 'a>(f: F) -> Option<Box<dyn PooledStatistic + 'a>> {
    Some(Box::new(Prepared(f)))
}

impl TwoSampleStatistic for MethodStatistic {
    fn compute(&self, p: &Sample, t: &Sample) -> Result<f64> {
        match self.method {
            Method::Ddks => ddks_statistic_with(p, t, &self.exact),
            Method::DdksNaive => ddks_statistic_naive(p, t),
            Method::Vdks => vdks_statistic_with(p, t, &self.vdks),
            Method::Rdks => rdks_statistic(p, t),
            Method::Onedks => onedks(p, t),
            Method::HotellingT2 => hotelling_t2(p, t),
            Method::KlDiv => kl_divergence(p, t),
        }
    }

    fn prepare(&self, pooled: &Sample) -> Result<Option<Box<dyn PooledStatistic + '_>>> {
        Ok(match self.method {
            Method::Ddks => {
                PooledOrthants::new(pooled, &self.exact)?.and_then(|table| boxed(move |m| table.statistic(m)))
            }
            Method::Rdks => {
                let radial = PooledRadial::new(pooled);
                boxed(move |m| radial.statistic(m))
            }
            Method::Onedks => {
                let cols = PooledColumns::new(pooled);
                boxed(move |m| cols.statistic(m))
            }
            Method::KlDiv => {
                let hist = PooledHistogram::new(pooled)?;
                boxed(move |m| hist.statistic(m))
            }
            Method::HotellingT2 => {
                let hot = PooledHotelling::new(pooled);
                Some(Box::new(PooledFallible(move |m: &[bool]| hot.statistic(m))))
            }
            Method::DdksNaive | Method::Vdks => None,
        })
    }
}

/// How a p-value is attached to a statistic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PValueMode {
    None,
    Permutation { n_perm: usize },
    /// Closed-form significance; exact ddKS only.
    Analytic,
}

/// Statistic plus optional p-value for one pair of samples.
pub fn evaluate(
    stat: &MethodStatistic,
    p: &Sample,
    t: &Sample,
    mode: PValueMode,
    rng: RngSpec,
) -> Result<(f64, Option<f64>)> {
    validate_pair(p, t)?;
    match mode {
        PValueMode::None => Ok((stat.compute(p, t)?, None)),
        PValueMode::Permutation { n_perm } => {
            let r = permutation_test(stat, p, t, n_perm, rng)?;
            Ok((r.statistic, Some(r.p_value)))
        }
        PValueMode::Analytic => {
            if !matches!(stat.method, Method::Ddks | Method::DdksNaive) {
                return Err(Error::BadSpec(format!(
                    "analytical significance is only defined for ddks, not {}",
                    stat.method
                )));
            }
            let mut input = SignificanceInput::from_samples(p, t)?;
            if stat.method == Method::DdksNaive {
                input.statistic = ddks_statistic_naive(p, t)?;
            }
            let s = ddks_significance_with(&input, SignificanceOptions::memoized())?;
            Ok((input.statistic, Some(s)))
        }
    }
}

/// Runs one test and records sizes, seed and wall-clock time.
pub fn run_test(
    stat: &MethodStatistic,
    p: &Sample,
    t: &Sample,
    mode: PValueMode,
    rng: RngSpec,
) -> Result<TestOutcome> {
    let start = Instant::now();
    let (statistic, p_value) = evaluate(stat, p, t, mode, rng)?;
    Ok(TestOutcome {
        method: stat.method,
        statistic,
        p_value,
        n_p: p.n(),
        n_t: t.n(),
        d: p.d(),
        seed: rng.seed,
        runtime_ns: start.elapsed().as_nanos() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn pair(seed: u64, n: usize, d: usize) -> (Sample, Sample) {
        let mut rng = RngSpec::new(seed).rng();
        let mut draw = |s: f64| Sample::new((0..n * d).map(|_| rng.random::<f64>() * s).collect(), d).unwrap();
        (draw(1.0), draw(1.4))
    }

    /// Prepared pooled paths must reproduce the plain statistic exactly,
    /// so permutation p-values agree with the generic path.
    #[test]
    fn prepared_and_generic_p_values_agree() {
        let (p, t) = pair(1, 25, 3);
        for method in [Method::Ddks, Method::Rdks, Method::Onedks, Method::HotellingT2, Method::KlDiv] {
            let stat = MethodStatistic::new(method);
            let plain = |a: &Sample, b: &Sample| stat.compute(a, b);
            let fast = permutation_test(&stat, &p, &t, 60, RngSpec::new(3)).unwrap();
            let slow = permutation_test(&plain, &p, &t, 60, RngSpec::new(3)).unwrap();
            assert_eq!(fast, slow, "{method}");
        }
    }

    #[test]
    fn analytic_only_for_ddks() {
        let (p, t) = pair(2, 10, 2);
        let stat = MethodStatistic::new(Method::Rdks);
        assert!(matches!(
            evaluate(&stat, &p, &t, PValueMode::Analytic, RngSpec::new(0)),
            Err(Error::BadSpec(_))
        ));
        let (_, s) = evaluate(&MethodStatistic::new(Method::Ddks), &p, &t, PValueMode::Analytic, RngSpec::new(0)).unwrap();
        assert!((0.0..=1.0).contains(&s.unwrap()));
    }

    #[test]
    fn outcomes_are_reproducible() {
        let (p, t) = pair(3, 20, 2);
        for method in Method::ALL {
            let stat = MethodStatistic::new(method);
            let mode = PValueMode::Permutation { n_perm: 20 };
            let a = run_test(&stat, &p, &t, mode, RngSpec::new(9)).unwrap();
            let b = run_test(&stat, &p, &t, mode, RngSpec::new(9)).unwrap();
            assert!(a.same_result(&b), "{method}");
            assert!(a.statistic >= 0.0);
            if method.is_ks_family() {
                assert!(a.statistic <= 1.0);
            }
            let pv = a.p_value.unwrap();
            assert!((0.0..=1.0).contains(&pv));
        }
    }
}
