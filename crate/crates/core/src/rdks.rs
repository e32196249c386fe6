//! Radial approximation of ddKS.
//!
//! After rescaling into the unit cube, every point is ranked by its distance
//! to each of d+1 corners (the origin and the unit point on every axis). The
//! statistic is the largest 1-D two-sample KS gap among those rankings, so
//! the cost is O((d+1)·N log N).

use rayon::prelude::*;

use crate::ecdf::{sort_values, sorted_gap, SortedPool};
use crate::error::{Error, Result};
use crate::types::{validate_pair, Sample};
use crate::vdks::normalize_pair;

/// Origin plus the d unit-axis corners of [0, 1]^d.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerSet {
    corners: Vec<Vec<f64>>,
}

impl CornerSet {
    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }

    pub fn corner(&self, i: usize) -> &[f64] {
        &self.corners[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.corners.iter().map(Vec::as_slice)
    }
}

pub fn identify_corners(d: usize) -> Result<CornerSet> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let corners = std::iter::once(vec![0.0; d])
        .chain((0..d).map(|m| {
            let mut c = vec![0.0; d];
            c[m] = 1.0;
            c
        }))
        .collect();
    Ok(CornerSet { corners })
}

/// 1-D two-sample KS statistic of two ascending lists.
pub fn merged_max_diff(a: &[f64], b: &[f64]) -> Result<f64> {
    sorted_gap(a, b)
}

/// Squared distances from every row of a unit-cube sample to every corner,
/// laid out corner-major: `out[c * n + i]`.
///
/// Uses |x - e_m|² = |x|² - 2·x_m + 1, so the whole table costs O(N·d).
fn corner_distances(s: &Sample) -> Vec<f64> {
    let (n, d) = (s.n(), s.d());
    let mut out = vec![0.0; (d + 1) * n];
    for (i, row) in s.rows().enumerate() {
        let norm: f64 = row.iter().map(|x| x * x).sum();
        out[i] = norm;
        for (m, &x) in row.iter().enumerate() {
            out[(m + 1) * n + i] = norm - 2.0 * x + 1.0;
        }
    }
    out
}

pub fn rdks_statistic(p: &Sample, t: &Sample) -> Result<f64> {
    validate_pair(p, t)?;
    let (np, nt, _) = normalize_pair(p, t)?;
    let dp = corner_distances(&np);
    let dt = corner_distances(&nt);
    let (n_p, n_t) = (p.n(), t.n());
    Ok((0..=p.d())
        .into_par_iter()
        .map_init(
            || (vec![0.0; n_p], vec![0.0; n_t]),
            |(a, b), c| {
                a.copy_from_slice(&dp[c * n_p..(c + 1) * n_p]);
                b.copy_from_slice(&dt[c * n_t..(c + 1) * n_t]);
                sort_values(a);
                sort_values(b);
                sorted_gap(a, b).expect("samples are nonempty")
            },
        )
        .reduce(|| 0.0, f64::max))
}

/// Corner rankings of a pooled sample, for scoring many relabellings.
///
/// The joint rescaling depends only on the pool, so every split of the pool
/// shares the same rankings.
#[derive(Clone, Debug)]
pub struct PooledRadial {
    pools: Vec<SortedPool>,
}

impl PooledRadial {
    pub fn new(pooled: &Sample) -> Self {
        let (scaled, _, _) = normalize_pair(pooled, pooled).expect("pooled sample is valid");
        let n = pooled.n();
        let dist = corner_distances(&scaled);
        let pools = dist.par_chunks(n).map(SortedPool::new).collect();
        Self { pools }
    }

    pub fn statistic(&self, in_p: &[bool]) -> f64 {
        let n_p = in_p.iter().filter(|&&b| b).count();
        let n_t = in_p.len() - n_p;
        self.pools
            .par_iter()
            .map(|pool| pool.gap(in_p, n_p, n_t))
            .reduce(|| 0.0, f64::max)
    }
}
