//! Analytical significance of a ddKS distance and the permutation test.
//!
//! Under H₀ every membership cell (test point × orthant) is modelled as a
//! pair of independent binomial draws sharing a rate estimated from T. The
//! significance is one minus the probability that no cell shows a
//! normalized difference above the observed distance.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::exact::{ddks_statistic, membership, MembershipMatrix};
use crate::rng::RngSpec;
use crate::types::{validate_pair, Sample};

/// Slack on the Δ-set boundary so that exactly representable differences
/// are not lost to rounding.
const DELTA_SLACK: f64 = 1e-12;

/// Truncation threshold for the Poisson tail.
const POISSON_TAIL: f64 = 1e-12;

fn check_rate(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("rate {lambda} is not in (0, 1)")));
    }
    Ok(())
}

fn ln_binomial_pmf(n: u64, m: u64, lambda: f64) -> f64 {
    ln_factorial(m) - ln_factorial(n) - ln_factorial(m - n)
        + n as f64 * lambda.ln()
        + (m - n) as f64 * (-lambda).ln_1p()
}

/// C(m, n) λⁿ (1 − λ)^(m − n), evaluated in log space.
pub fn binomial_pmf(n: u64, m: u64, lambda: f64) -> Result<f64> {
    check_rate(lambda)?;
    if n > m {
        return Err(Error::Domain(format!("{n} successes out of {m} trials")));
    }
    Ok(ln_binomial_pmf(n, m, lambda).exp())
}

fn binomial_pmfs(m: usize, lambda: f64) -> Vec<f64> {
    (0..=m as u64)
        .map(|n| ln_binomial_pmf(n, m as u64, lambda).exp())
        .collect()
}

/// Poisson(mean) pmf from 0 until the remaining upper tail drops below
/// [`POISSON_TAIL`].
fn poisson_pmfs(mean: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut cum = 0.0;
    let mut k = 0u64;
    loop {
        let pmf = (k as f64 * mean.ln() - mean - ln_factorial(k)).exp();
        out.push(pmf);
        cum += pmf;
        if k as f64 > mean && 1.0 - cum < POISSON_TAIL {
            return out;
        }
        k += 1;
    }
}

fn check_delta_args(delta: f64, n_p: usize, n_t: usize, lambda: f64) -> Result<()> {
    check_rate(lambda)?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!("difference {delta} is not in [0, 1]")));
    }
    if n_p == 0 || n_t == 0 {
        return Err(Error::Domain("sample sizes must be at least 1".into()));
    }
    Ok(())
}

/// For each n₁, the half-open range of n₂ with |n₁/n_p − n₂/n_t| ≤ δ
/// (plus slack), handed to `visit(n₁, lo, hi)`.
fn for_each_delta_band(
    delta: f64,
    n_p: usize,
    len_p: usize,
    n_t: usize,
    len_t: usize,
    mut visit: impl FnMut(usize, usize, usize),
) {
    let c = delta + DELTA_SLACK;
    let (fp, ft) = (n_p as f64, n_t as f64);
    let (mut lo, mut hi) = (0usize, 0usize);
    for n1 in 0..len_p {
        let a = n1 as f64 / fp;
        while lo < len_t && a - lo as f64 / ft > c {
            lo += 1;
        }
        hi = hi.max(lo);
        while hi < len_t && hi as f64 / ft - a <= c {
            hi += 1;
        }
        visit(n1, lo, hi);
    }
}

/// Probability that |n₁/n_p − n₂/n_t| exceeds δ for independent
/// n₁ ~ Bi(n_p, λ) and n₂ ~ Bi(n_t, λ).
fn binomial_tail(delta: f64, n_p: usize, n_t: usize, lambda: f64) -> f64 {
    let pp = binomial_pmfs(n_p, lambda);
    let pt = binomial_pmfs(n_t, lambda);
    // below[k] = Σ_{j<k} pt[j], above[k] = Σ_{j≥k} pt[j]
    let mut below = vec![0.0; n_t + 2];
    for k in 0..=n_t {
        below[k + 1] = below[k] + pt[k];
    }
    let mut above = vec![0.0; n_t + 2];
    for k in (0..=n_t).rev() {
        above[k] = above[k + 1] + pt[k];
    }
    let mut tail = 0.0;
    for_each_delta_band(delta, n_p, n_p + 1, n_t, n_t + 1, |n1, lo, hi| {
        tail += pp[n1] * (below[lo] + above[hi]);
    });
    tail.clamp(0.0, 1.0)
}

/// p(d ≤ δ) for the normalized difference of two binomial counts with a
/// shared rate.
pub fn delta_cdf(delta: f64, n_p: usize, n_t: usize, lambda: f64) -> Result<f64> {
    check_delta_args(delta, n_p, n_t, lambda)?;
    Ok(1.0 - binomial_tail(delta, n_p, n_t, lambda))
}

/// [`delta_cdf`] with each binomial replaced by a Poisson of mean m·λ.
pub fn delta_cdf_poisson(delta: f64, n_p: usize, n_t: usize, lambda: f64) -> Result<f64> {
    check_delta_args(delta, n_p, n_t, lambda)?;
    Ok(poisson_inside(delta, n_p, n_t, lambda))
}

fn poisson_inside(delta: f64, n_p: usize, n_t: usize, lambda: f64) -> f64 {
    let pp = poisson_pmfs(n_p as f64 * lambda);
    let pt = poisson_pmfs(n_t as f64 * lambda);
    let mut cum = vec![0.0; pt.len() + 1];
    for (k, v) in pt.iter().enumerate() {
        cum[k + 1] = cum[k] + v;
    }
    let mut inside = 0.0;
    for_each_delta_band(delta, n_p, pp.len(), n_t, pt.len(), |n1, lo, hi| {
        inside += pp[n1] * (cum[hi] - cum[lo]);
    });
    inside.clamp(0.0, 1.0)
}

/// Where the per-cell binomial rate comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RateSource {
    /// λ̂ = (M_T + 1) / (N_T + 2), treating T as the reference sample.
    #[default]
    Reference,
    /// λ̂ = (M_P + M_T + 1) / (N_P + N_T + 2).
    Pooled,
}

/// Bayes rate estimate under a uniform prior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub lambda_hat: f64,
    pub source_count: usize,
    pub source_n: usize,
}

impl RateEstimate {
    pub fn new(source_count: usize, source_n: usize) -> Result<Self> {
        if source_count > source_n {
            return Err(Error::Domain(format!(
                "count {source_count} exceeds sample size {source_n}"
            )));
        }
        Ok(Self {
            lambda_hat: (source_count as f64 + 1.0) / (source_n as f64 + 2.0),
            source_count,
            source_n,
        })
    }
}

/// Observed distance plus the membership counts around every pooled point.
#[derive(Clone, Debug)]
pub struct SignificanceInput {
    pub statistic: f64,
    pub n_p: usize,
    pub n_t: usize,
    /// Counts of T around each of the n_p + n_t pooled test points.
    pub counts_t: MembershipMatrix,
    /// Counts of P, needed only for [`RateSource::Pooled`].
    pub counts_p: Option<MembershipMatrix>,
}

impl SignificanceInput {
    /// Computes the exact ddKS distance and both membership matrices.
    pub fn from_samples(p: &Sample, t: &Sample) -> Result<Self> {
        validate_pair(p, t)?;
        let pooled = p.concat(t)?;
        Ok(Self {
            statistic: ddks_statistic(p, t)?,
            n_p: p.n(),
            n_t: t.n(),
            counts_t: membership(t, &pooled)?,
            counts_p: Some(membership(p, &pooled)?),
        })
    }

    /// Same counts, different distance.
    pub fn with_statistic(&self, statistic: f64) -> Self {
        Self {
            statistic,
            ..self.clone()
        }
    }

    fn validate(&self, rates: RateSource) -> Result<()> {
        if !(0.0..=1.0).contains(&self.statistic) {
            return Err(Error::Domain(format!(
                "distance {} is not in [0, 1]",
                self.statistic
            )));
        }
        if self.n_p == 0 || self.n_t == 0 {
            return Err(Error::Domain("sample sizes must be at least 1".into()));
        }
        let check = |m: &MembershipMatrix, n: usize| -> Result<()> {
            if m.source_n() != n || m.n_test_points() != self.n_p + self.n_t {
                return Err(Error::Domain(format!(
                    "membership matrix of {} test points over {} points does not match n_p={}, n_t={}",
                    m.n_test_points(),
                    m.source_n(),
                    self.n_p,
                    self.n_t
                )));
            }
            Ok(())
        };
        check(&self.counts_t, self.n_t)?;
        match (rates, &self.counts_p) {
            (RateSource::Pooled, None) => Err(Error::Domain(
                "pooled rates need the membership counts of P".into(),
            )),
            (RateSource::Pooled, Some(m)) => check(m, self.n_p),
            _ => Ok(()),
        }
    }

    /// Per-cell (count, denominator) feeding the rate estimator.
    fn cell_counts(&self, rates: RateSource) -> (Vec<usize>, usize) {
        match (rates, &self.counts_p) {
            (RateSource::Pooled, Some(mp)) => (
                mp.as_slice()
                    .iter()
                    .zip(self.counts_t.as_slice())
                    .map(|(&a, &b)| (a + b) as usize)
                    .collect(),
                self.n_p + self.n_t,
            ),
            _ => (
                self.counts_t.as_slice().iter().map(|&c| c as usize).collect(),
                self.n_t,
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SignificanceOptions {
    pub rates: RateSource,
    /// Share one p(d ≤ D) evaluation among cells with equal counts.
    pub memoize: bool,
}

impl SignificanceOptions {
    pub fn memoized() -> Self {
        Self {
            rates: RateSource::Reference,
            memoize: true,
        }
    }
}

fn uses_poisson(n_p: usize, n_t: usize, lambda: f64) -> bool {
    n_p + n_t > 2000 || lambda < 1e-3
}

/// ln p(d ≤ D) for one cell.
fn ln_cell(statistic: f64, n_p: usize, n_t: usize, lambda: f64) -> f64 {
    if uses_poisson(n_p, n_t, lambda) {
        poisson_inside(statistic, n_p, n_t, lambda).ln()
    } else {
        (-binomial_tail(statistic, n_p, n_t, lambda)).ln_1p()
    }
}

/// Significance S of a ddKS distance, with memoization.
pub fn ddks_significance(input: &SignificanceInput) -> Result<f64> {
    ddks_significance_with(input, SignificanceOptions::memoized())
}

pub fn ddks_significance_with(
    input: &SignificanceInput,
    options: SignificanceOptions,
) -> Result<f64> {
    input.validate(options.rates)?;
    let (counts, denom) = input.cell_counts(options.rates);
    let rate = |c: usize| (c as f64 + 1.0) / (denom as f64 + 2.0);
    let (d, n_p, n_t) = (input.statistic, input.n_p, input.n_t);

    let log_sum = if options.memoize {
        let mut needed = vec![false; denom + 1];
        for &c in &counts {
            needed[c] = true;
        }
        let table: Vec<f64> = needed
            .par_iter()
            .enumerate()
            .map(|(c, &need)| if need { ln_cell(d, n_p, n_t, rate(c)) } else { 0.0 })
            .collect();
        counts.iter().fold(-0.0, |acc, &c| acc + table[c])
    } else {
        counts
            .iter()
            .fold(-0.0, |acc, &c| acc + ln_cell(d, n_p, n_t, rate(c)))
    };
    Ok((-log_sum.exp_m1()).clamp(0.0, 1.0))
}

/// Exact ddKS distance and its analytical significance.
pub fn analytic_test(p: &Sample, t: &Sample) -> Result<(f64, f64)> {
    let input = SignificanceInput::from_samples(p, t)?;
    Ok((input.statistic, ddks_significance(&input)?))
}

/// A two-sample statistic usable in a permutation test.
pub trait TwoSampleStatistic: Sync {
    fn compute(&self, p: &Sample, t: &Sample) -> Result<f64>;

    /// Optional precomputation on the pooled sample, letting each
    /// relabelling be scored without rebuilding samples.
    fn prepare(&self, _pooled: &Sample) -> Result<Option<Box<dyn PooledStatistic + '_>>> {
        Ok(None)
    }
}

/// A statistic bound to a pooled sample, scored from a membership mask.
pub trait PooledStatistic: Sync {
    fn split(&self, in_p: &[bool]) -> Result<f64>;
}

impl<F> TwoSampleStatistic for F
where
    F: Fn(&Sample, &Sample) -> Result<f64> + Sync,
{
    fn compute(&self, p: &Sample, t: &Sample) -> Result<f64> {
        self(p, t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PermutationResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_perm: usize,
    /// Permuted statistics at or above the observed one.
    pub exceedances: usize,
}

/// Permutation p-value (1 + #{permuted ≥ observed}) / (1 + n_perm).
///
/// Permutation i shuffles the pool with stream `rng.derive(i)`, so the
/// result does not depend on thread scheduling.
pub fn permutation_test<S: TwoSampleStatistic + ?Sized>(
    statistic: &S,
    p: &Sample,
    t: &Sample,
    n_perm: usize,
    rng: RngSpec,
) -> Result<PermutationResult> {
    if n_perm == 0 {
        return Err(Error::Domain("at least one permutation is required".into()));
    }
    validate_pair(p, t)?;
    let observed = statistic.compute(p, t)?;
    let pooled = p.concat(t)?;
    let prepared = statistic.prepare(&pooled)?;
    let (n_p, n) = (p.n(), pooled.n());
    // permuted values equal to the observed one up to summation order count
    let threshold = observed - 1e-12 * observed.abs().max(1e-3);

    let exceed = (0..n_perm)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng.derive(i as u64).rng());
            let value = match &prepared {
                Some(pre) => {
                    let mut in_p = vec![false; n];
                    for &k in &order[..n_p] {
                        in_p[k] = true;
                    }
                    pre.split(&in_p)?
                }
                None => statistic.compute(
                    &pooled.select(&order[..n_p])?,
                    &pooled.select(&order[n_p..])?,
                )?,
            };
            Ok(value >= threshold)
        })
        .collect::<Result<Vec<bool>>>()?;
    let exceedances = exceed.iter().filter(|&&b| b).count();
    Ok(PermutationResult {
        statistic: observed,
        p_value: (1 + exceedances) as f64 / (1 + n_perm) as f64,
        n_perm,
        exceedances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ddks_statistic;
    use rand::Rng;

    /// ln C(m, n) by summing logarithms, independent of the gamma function
    /// used in the implementation.
    fn ln_choose_by_sum(n: u64, m: u64) -> f64 {
        let ln_fact = |k: u64| (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
        ln_fact(m) - ln_fact(n) - ln_fact(m - n)
    }

    /// Direct double sum over all success pairs.
    fn delta_cdf_direct(delta: f64, n_p: usize, n_t: usize, lambda: f64) -> f64 {
        let mut total = 0.0;
        for a in 0..=n_p {
            for b in 0..=n_t {
                if (a as f64 / n_p as f64 - b as f64 / n_t as f64).abs() <= delta + 1e-12 {
                    total += binomial_pmf(a as u64, n_p as u64, lambda).unwrap()
                        * binomial_pmf(b as u64, n_t as u64, lambda).unwrap();
                }
            }
        }
        total
    }

    #[test]
    fn binomial_examples() {
        assert!((binomial_pmf(1, 2, 0.5).unwrap() - 0.5).abs() < 1e-15);
        for (m, l) in [(7u64, 0.3), (40, 0.01), (1000, 0.9)] {
            let want = (1.0f64 - l).powi(m as i32);
            assert!((binomial_pmf(0, m, l).unwrap() - want).abs() <= 1e-12 * want);
        }
        let oracle = (ln_choose_by_sum(500, 1000) + 1000.0 * 0.5f64.ln()).exp();
        let got = binomial_pmf(500, 1000, 0.5).unwrap();
        assert!(((got - oracle) / oracle).abs() < 1e-10);
        assert!(binomial_pmf(10, 1_000_000, 1e-5).unwrap().is_finite());
    }

    #[test]
    fn binomial_domain_errors() {
        assert!(matches!(binomial_pmf(3, 2, 0.5), Err(Error::Domain(_))));
        assert!(matches!(binomial_pmf(1, 2, 0.0), Err(Error::Domain(_))));
        assert!(matches!(binomial_pmf(1, 2, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn delta_cdf_four_outcomes() {
        assert_eq!(delta_cdf(0.0, 1, 1, 0.5).unwrap(), 0.5);
        assert_eq!(delta_cdf(0.999, 1, 1, 0.5).unwrap(), 0.5);
        assert_eq!(delta_cdf(1.0, 1, 1, 0.5).unwrap(), 1.0);
        assert_eq!(delta_cdf(1.0, 17, 5, 0.23).unwrap(), 1.0);
        assert!(delta_cdf(1.5, 1, 1, 0.5).is_err());
    }

    #[test]
    fn delta_cdf_matches_double_sum() {
        let mut rng = RngSpec::new(12).rng();
        for _ in 0..300 {
            let n_p = rng.random_range(1..40);
            let n_t = rng.random_range(1..40);
            let lambda = rng.random_range(0.01..0.99);
            let delta = rng.random::<f64>();
            let got = delta_cdf(delta, n_p, n_t, lambda).unwrap();
            assert!((got - delta_cdf_direct(delta, n_p, n_t, lambda)).abs() < 1e-12);
        }
        // exactly representable boundary differences are included
        let got = delta_cdf(0.25, 4, 8, 0.4).unwrap();
        assert!((got - delta_cdf_direct(0.25, 4, 8, 0.4)).abs() < 1e-14);
    }

    #[test]
    fn delta_cdf_monotone_in_delta() {
        let mut prev = 0.0;
        for i in 0..=100 {
            let v = delta_cdf(i as f64 / 100.0, 23, 31, 0.37).unwrap();
            assert!(v >= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn poisson_regimes() {
        assert!(delta_cdf_poisson(1.0, 30, 30, 0.2).unwrap() >= 1.0 - 1e-9);
        // Bin(1000, 0.01) against Poisson(10): worst gap is about 2.2e-3 near δ = 0.005
        let mut worst: f64 = 0.0;
        for i in 0..=100 {
            let delta = i as f64 / 1000.0;
            let exact = delta_cdf(delta, 1000, 1000, 0.01).unwrap();
            let approx = delta_cdf_poisson(delta, 1000, 1000, 0.01).unwrap();
            worst = worst.max((exact - approx).abs());
            if delta >= 0.02 || delta == 0.0 {
                assert!((exact - approx).abs() < 1e-3, "δ={delta}: {exact} vs {approx}");
            }
        }
        assert!(worst < 2.5e-3, "{worst}");
        let exact = delta_cdf(0.1, 20, 20, 0.4).unwrap();
        let approx = delta_cdf_poisson(0.1, 20, 20, 0.4).unwrap();
        assert!((exact - approx).abs() > 1e-3);
    }

    #[test]
    fn rate_estimate() {
        let r = RateEstimate::new(0, 50).unwrap();
        assert_eq!(r.lambda_hat, 1.0 / 52.0);
        assert_eq!(RateEstimate::new(50, 50).unwrap().lambda_hat, 51.0 / 52.0);
        assert!(RateEstimate::new(51, 50).is_err());
    }

    fn random_pair(seed: u64, n: usize, d: usize) -> (Sample, Sample) {
        let mut rng = RngSpec::new(seed).rng();
        let mut draw = || Sample::new((0..n * d).map(|_| rng.random()).collect(), d).unwrap();
        (draw(), draw())
    }

    #[test]
    fn significance_edges() {
        let (p, t) = random_pair(1, 20, 3);
        let input = SignificanceInput::from_samples(&p, &t).unwrap();
        assert_eq!(ddks_significance(&input.with_statistic(1.0)).unwrap(), 0.0);
        assert!(ddks_significance(&input.with_statistic(0.0)).unwrap() > 0.9);
        let bad = SignificanceInput {
            n_t: 21,
            ..input.clone()
        };
        assert!(ddks_significance(&bad).is_err());
        let no_p = SignificanceInput {
            counts_p: None,
            ..input.clone()
        };
        let pooled = SignificanceOptions {
            rates: RateSource::Pooled,
            memoize: true,
        };
        assert!(ddks_significance_with(&no_p, pooled).is_err());
        let s = ddks_significance_with(&input, pooled).unwrap();
        assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn memoized_equals_unmemoized() {
        for seed in 0..5 {
            let (p, t) = random_pair(seed, 15, 2);
            let input = SignificanceInput::from_samples(&p, &t).unwrap();
            let a = ddks_significance_with(&input, SignificanceOptions::memoized()).unwrap();
            let b = ddks_significance_with(&input, SignificanceOptions::default()).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn significance_nonincreasing_in_distance() {
        let (p, t) = random_pair(4, 12, 2);
        let input = SignificanceInput::from_samples(&p, &t).unwrap();
        let mut prev = 1.0;
        for i in 0..=24 {
            let s = ddks_significance(&input.with_statistic(i as f64 / 24.0)).unwrap();
            assert!(s <= prev);
            prev = s;
        }
    }

    #[test]
    fn permutation_disjoint_clusters() {
        let mut rng = RngSpec::new(3).rng();
        let p = Sample::new((0..20).map(|_| rng.random::<f64>()).collect(), 1).unwrap();
        let t = Sample::new((0..20).map(|_| 5.0 + rng.random::<f64>()).collect(), 1).unwrap();
        for seed in 0..50 {
            let r = permutation_test(&ddks_statistic, &p, &t, 100, RngSpec::new(seed)).unwrap();
            assert_eq!(r.statistic, 1.0);
            assert_eq!(r.p_value, 1.0 / 101.0);
        }
    }

    #[test]
    fn permutation_identical_samples() {
        let (p, _) = random_pair(6, 15, 2);
        let r = permutation_test(&ddks_statistic, &p, &p, 50, RngSpec::new(1)).unwrap();
        assert_eq!(r.statistic, 0.0);
        // every permuted value is ≥ 0
        assert_eq!(r.p_value, 1.0);
        assert!(permutation_test(&ddks_statistic, &p, &p, 0, RngSpec::new(1)).is_err());
    }

    #[test]
    fn permutation_is_deterministic() {
        let (p, t) = random_pair(8, 10, 2);
        let a = permutation_test(&ddks_statistic, &p, &t, 40, RngSpec::new(5)).unwrap();
        let b = permutation_test(&ddks_statistic, &p, &t, 40, RngSpec::new(5)).unwrap();
        assert_eq!(a, b);
    }
}
