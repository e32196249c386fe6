//! Comparison statistics: per-dimension KS, Hotelling's T² and a
//! histogram Kullback-Leibler divergence.

use nalgebra::{DMatrix, DVector};

use crate::ecdf::{sort_values, sorted_gap, SortedPool};
use crate::error::{Error, Result};
use crate::types::{validate_pair, Sample};

/// Classical two-sample KS statistic.
pub fn ks_1d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyList);
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    sort_values(&mut a);
    sort_values(&mut b);
    sorted_gap(&a, &b)
}

/// Largest 1-D KS statistic over the coordinate axes.
pub fn onedks(p: &Sample, t: &Sample) -> Result<f64> {
    validate_pair(p, t)?;
    (0..p.d()).try_fold(0.0f64, |acc, m| Ok(acc.max(ks_1d(&p.column(m), &t.column(m))?)))
}

/// Per-column rankings of a pooled sample for repeated [`onedks`] splits.
#[derive(Clone, Debug)]
pub struct PooledColumns {
    pools: Vec<SortedPool>,
}

impl PooledColumns {
    pub fn new(pooled: &Sample) -> Self {
        Self {
            pools: (0..pooled.d())
                .map(|m| SortedPool::new(&pooled.column(m)))
                .collect(),
        }
    }

    pub fn statistic(&self, in_p: &[bool]) -> f64 {
        let n_p = in_p.iter().filter(|&&b| b).count();
        let n_t = in_p.len() - n_p;
        self.pools
            .iter()
            .map(|pool| pool.gap(in_p, n_p, n_t))
            .fold(0.0, f64::max)
    }
}

fn mean_and_scatter(s: &Sample) -> (DVector<f64>, DMatrix<f64>) {
    let d = s.d();
    let mut mean = DVector::zeros(d);
    for row in s.rows() {
        mean += DVector::from_column_slice(row);
    }
    mean /= s.n() as f64;
    let mut scatter = DMatrix::zeros(d, d);
    for row in s.rows() {
        let c = DVector::from_column_slice(row) - &mean;
        scatter.syger(1.0, &c, &c, 1.0);
    }
    (mean, scatter)
}

/// Hotelling's two-sample T² with the unbiased pooled covariance.
pub fn hotelling_t2(p: &Sample, t: &Sample) -> Result<f64> {
    validate_pair(p, t)?;
    let d = p.d();
    let (n_p, n_t) = (p.n(), t.n());
    if n_p + n_t <= d + 1 {
        return Err(Error::InsufficientSamples(format!(
            "need n_p + n_t > d + 1, got {} with d={d}",
            n_p + n_t
        )));
    }
    let (mean_p, scatter_p) = mean_and_scatter(p);
    let (mean_t, scatter_t) = mean_and_scatter(t);
    t2_from_scatter(scatter_p + scatter_t, mean_p - mean_t, n_p, n_t)
}

fn t2_from_scatter(within: DMatrix<f64>, diff: DVector<f64>, n_p: usize, n_t: usize) -> Result<f64> {
    let d = diff.len();
    let mut pooled = within / (n_p + n_t - 2) as f64;
    pooled.fill_upper_triangle_with_lower_triangle();
    let trace = pooled.trace();
    if !(trace > 0.0) {
        return Err(Error::SingularCovariance);
    }
    let ridge = 1e-12 * trace / d as f64;
    for i in 0..d {
        pooled[(i, i)] += ridge;
    }
    let chol = pooled.cholesky().ok_or(Error::SingularCovariance)?;
    let l = chol.l_dirty();
    if (0..d).any(|i| l[(i, i)] * l[(i, i)] <= 10.0 * ridge) {
        return Err(Error::SingularCovariance);
    }
    let solved = chol.solve(&diff);
    let scale = (n_p * n_t) as f64 / (n_p + n_t) as f64;
    Ok((scale * diff.dot(&solved)).max(0.0))
}

/// Pooled scatter for repeated [`hotelling_t2`] splits.
///
/// The within-group scatter of a split is the total scatter minus the
/// between-group term, so each split only needs the P-group sum.
/// Agrees with [`hotelling_t2`] up to rounding.
#[derive(Clone, Debug)]
pub struct PooledHotelling {
    data: Vec<f64>,
    d: usize,
    total: DVector<f64>,
    scatter: DMatrix<f64>,
}

impl PooledHotelling {
    pub fn new(pooled: &Sample) -> Self {
        let (mean, scatter) = mean_and_scatter(pooled);
        Self {
            data: pooled.as_slice().to_vec(),
            d: pooled.d(),
            total: mean * pooled.n() as f64,
            scatter,
        }
    }

    pub fn statistic(&self, in_p: &[bool]) -> Result<f64> {
        let n = in_p.len();
        let n_p = in_p.iter().filter(|&&b| b).count();
        let n_t = n - n_p;
        if n_p == 0 || n_t == 0 {
            return Err(Error::EmptySample);
        }
        if n <= self.d + 1 {
            return Err(Error::InsufficientSamples(format!(
                "need n_p + n_t > d + 1, got {n} with d={}",
                self.d
            )));
        }
        let mut sum_p = DVector::zeros(self.d);
        for (row, _) in self.data.chunks_exact(self.d).zip(in_p).filter(|(_, &b)| b) {
            sum_p += DVector::from_column_slice(row);
        }
        let mean_p = &sum_p / n_p as f64;
        let mean_t = (&self.total - sum_p) / n_t as f64;
        let diff = mean_p - mean_t;
        let mut within = self.scatter.clone();
        within.syger(-((n_p * n_t) as f64 / n as f64), &diff, &diff, 1.0);
        t2_from_scatter(within, diff, n_p, n_t)
    }
}

/// Regular bins along one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisBins {
    pub min: f64,
    pub width: f64,
    pub count: usize,
}

impl AxisBins {
    #[inline]
    pub fn index(&self, x: f64) -> usize {
        if self.count == 1 {
            return 0;
        }
        (((x - self.min) / self.width).floor().max(0.0) as usize).min(self.count - 1)
    }

    pub fn edges(&self) -> Vec<f64> {
        if self.width > 0.0 {
            (0..=self.count)
                .map(|i| self.min + i as f64 * self.width)
                .collect()
        } else {
            vec![self.min - 0.5, self.min + 0.5]
        }
    }
}

/// Multivariate Scott bin width 3.49 σ n^(−1/(d+2)).
pub fn scott_width(sd: f64, n: usize, d: usize) -> f64 {
    3.49 * sd * (n as f64).powf(-1.0 / (d as f64 + 2.0))
}

/// Per-axis bins from Scott's rule; the nominal width is rounded so a whole
/// number of bins spans the observed range.
pub fn scott_bins(s: &Sample) -> Result<Vec<AxisBins>> {
    let n = s.n();
    if n < 2 {
        return Err(Error::InsufficientSamples(
            "Scott's rule needs at least two points".into(),
        ));
    }
    let d = s.d();
    Ok((0..d)
        .map(|m| {
            let col = s.column(m);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = max - min;
            if !(sd > 0.0) || !(range > 0.0) {
                return AxisBins {
                    min,
                    width: 0.0,
                    count: 1,
                };
            }
            let h = scott_width(sd, n, d);
            let count = ((range / h).ceil() as usize).max(1);
            AxisBins {
                min,
                width: range / count as f64,
                count,
            }
        })
        .collect())
}

/// Bin-count cap for histogram grids.
pub const MAX_HISTOGRAM_BINS: u128 = 1 << 24;

fn flat_bins(axes: &[AxisBins]) -> Result<usize> {
    let cells = axes
        .iter()
        .try_fold(1u128, |acc, a| acc.checked_mul(a.count as u128))
        .unwrap_or(u128::MAX);
    if cells > MAX_HISTOGRAM_BINS {
        return Err(Error::GridTooLarge {
            cells,
            limit: MAX_HISTOGRAM_BINS,
        });
    }
    Ok(cells as usize)
}

fn bin_of(axes: &[AxisBins], row: &[f64]) -> usize {
    let mut index = 0;
    let mut stride = 1;
    for (a, &x) in axes.iter().zip(row) {
        index += a.index(x) * stride;
        stride *= a.count;
    }
    index
}

/// Normalized d-dimensional histogram on a regular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
}

impl Histogram {
    pub fn build(s: &Sample, axes: &[AxisBins]) -> Result<Self> {
        if axes.len() != s.d() {
            return Err(Error::DimensionMismatch {
                expected: axes.len(),
                found: s.d(),
            });
        }
        let mut masses = vec![0.0; flat_bins(axes)?];
        let w = 1.0 / s.n() as f64;
        for row in s.rows() {
            masses[bin_of(axes, row)] += w;
        }
        Ok(Self {
            bin_edges: axes.iter().map(AxisBins::edges).collect(),
            masses,
        })
    }
}

/// Σ q ln(q / r) after mixing each histogram with a uniform pseudo-mass of
/// 1/B per bin.
fn smoothed_kl(q: &[f64], r: &[f64]) -> f64 {
    let pseudo = 1.0 / q.len() as f64;
    q.iter()
        .zip(r)
        .map(|(&q, &r)| {
            let (q, r) = ((q + pseudo) / 2.0, (r + pseudo) / 2.0);
            q * (q / r).ln()
        })
        .sum::<f64>()
        .max(0.0)
}

/// KL(T ‖ P) in nats between smoothed histograms on a common Scott grid
/// fitted to the pooled sample.
pub fn kl_divergence(p: &Sample, t: &Sample) -> Result<f64> {
    validate_pair(p, t)?;
    let axes = scott_bins(&p.concat(t)?)?;
    let hp = Histogram::build(p, &axes)?;
    let ht = Histogram::build(t, &axes)?;
    Ok(smoothed_kl(&ht.masses, &hp.masses))
}

/// Pooled bin assignment for repeated [`kl_divergence`] splits.
#[derive(Clone, Debug)]
pub struct PooledHistogram {
    bins: Vec<usize>,
    n_bins: usize,
}

impl PooledHistogram {
    pub fn new(pooled: &Sample) -> Result<Self> {
        let axes = scott_bins(pooled)?;
        let n_bins = flat_bins(&axes)?;
        Ok(Self {
            bins: pooled.rows().map(|r| bin_of(&axes, r)).collect(),
            n_bins,
        })
    }

    pub fn statistic(&self, in_p: &[bool]) -> f64 {
        let n_p = in_p.iter().filter(|&&b| b).count();
        let n_t = in_p.len() - n_p;
        let (wp, wt) = (1.0 / n_p as f64, 1.0 / n_t as f64);
        let mut hp = vec![0.0; self.n_bins];
        let mut ht = vec![0.0; self.n_bins];
        for (&b, &is_p) in self.bins.iter().zip(in_p) {
            if is_p {
                hp[b] += wp;
            } else {
                ht[b] += wt;
            }
        }
        smoothed_kl(&ht, &hp)
    }
}
