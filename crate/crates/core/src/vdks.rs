//! Voxel-grid approximation of ddKS.
//!
//! Both samples are rescaled into the unit cube and binned on a regular grid
//! of `k` cells per dimension. Orthant sums of the occupancy difference are
//! then read off a d-dimensional prefix-sum table, split at the lower corner
//! of every nonempty voxel.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ddks_statistic;
use crate::types::{validate_pair, Sample};

/// Per-dimension affine map onto [0, 1], fitted on the joint range of a pair.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl AffineMap {
    pub fn fit(p: &Sample, t: &Sample) -> Result<Self> {
        validate_pair(p, t)?;
        let d = p.d();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in p.rows().chain(t.rows()) {
            for m in 0..d {
                min[m] = min[m].min(row[m]);
                max[m] = max[m].max(row[m]);
            }
        }
        Ok(Self { min, max })
    }

    /// Constant dimensions map to 0.5.
    pub fn apply(&self, s: &Sample) -> Sample {
        s.map(|_, m, v| {
            let range = self.max[m] - self.min[m];
            if range > 0.0 {
                ((v - self.min[m]) / range).clamp(0.0, 1.0)
            } else {
                0.5
            }
        })
        .expect("rescaled values are finite")
    }
}

/// Rescales both samples into [0, 1]^d using their joint per-dimension range.
pub fn normalize_pair(p: &Sample, t: &Sample) -> Result<(Sample, Sample, AffineMap)> {
    let map = AffineMap::fit(p, t)?;
    Ok((map.apply(p), map.apply(t), map))
}

/// Flat index of the voxel holding `point`; cells are half-open except the
/// last one in each dimension, which is closed.
pub fn voxel_index(point: &[f64], k: usize) -> Result<usize> {
    const TOL: f64 = 1e-12;
    if k == 0 {
        return Err(Error::Domain("voxels per dimension must be at least 1".into()));
    }
    let mut index = 0usize;
    let mut stride = 1usize;
    for &x in point {
        if !(-TOL..=1.0 + TOL).contains(&x) {
            return Err(Error::OutOfRange { value: x });
        }
        index += cell(x, k) * stride;
        stride *= k;
    }
    Ok(index)
}

#[inline]
fn cell(x: f64, k: usize) -> usize {
    ((x.max(0.0) * k as f64).floor() as usize).min(k - 1)
}

/// Smallest k with k^(d+1) ≥ n, clamped to [2, 32].
pub fn default_voxels_per_dim(n: usize, d: usize) -> usize {
    let mut k = 1usize;
    while (k as u128).pow(d as u32 + 1) < n as u128 && k < 32 {
        k += 1;
    }
    k.clamp(2, 32)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VdksConfig {
    /// Voxels per dimension; `None` uses [`default_voxels_per_dim`].
    pub voxels_per_dim: Option<usize>,
    /// Re-run exact ddKS inside voxels holding more than 10% of either sample.
    pub refine: bool,
    pub memory_budget: usize,
}

impl Default for VdksConfig {
    fn default() -> Self {
        Self {
            voxels_per_dim: None,
            refine: false,
            memory_budget: 1 << 30,
        }
    }
}

/// Per-class proportional occupancy on a k^d grid.
#[derive(Clone, Debug)]
pub struct VoxelGrid {
    pub voxels_per_dim: usize,
    pub d: usize,
    pub occupancy_p: Vec<f64>,
    pub occupancy_t: Vec<f64>,
    /// Sorted indices of voxels holding at least one point of either class.
    pub filled: Vec<usize>,
}

impl VoxelGrid {
    /// Bins two samples already rescaled into the unit cube.
    pub fn build(p: &Sample, t: &Sample, k: usize, memory_budget: usize) -> Result<Self> {
        validate_pair(p, t)?;
        let d = p.d();
        let cells = grid_cells(k, d, memory_budget)?;
        let mut occupancy_p = vec![0.0; cells];
        let mut occupancy_t = vec![0.0; cells];
        let mut hit = vec![false; cells];
        for (sample, occ) in [(p, &mut occupancy_p), (t, &mut occupancy_t)] {
            let w = 1.0 / sample.n() as f64;
            for row in sample.rows() {
                let i = voxel_index(row, k)?;
                occ[i] += w;
                hit[i] = true;
            }
        }
        let filled = hit
            .iter()
            .enumerate()
            .filter_map(|(i, &h)| h.then_some(i))
            .collect();
        Ok(Self {
            voxels_per_dim: k,
            d,
            occupancy_p,
            occupancy_t,
            filled,
        })
    }

    /// Largest absolute orthant sum of `occupancy_t - occupancy_p` over all
    /// filled voxels.
    pub fn max_orthant_gap(&self) -> f64 {
        let k = self.voxels_per_dim;
        let d = self.d;
        let mut prefix: Vec<f64> = self
            .occupancy_t
            .iter()
            .zip(&self.occupancy_p)
            .map(|(t, p)| t - p)
            .collect();
        let mut stride = 1;
        for _ in 0..d {
            for i in 0..prefix.len() {
                if (i / stride) % k != 0 {
                    prefix[i] += prefix[i - stride];
                }
            }
            stride *= k;
        }
        self.filled
            .par_iter()
            .map_init(
                || vec![0.0; 1 << d],
                |sums, &v| {
                    orthant_sums(&prefix, v, k, d, sums);
                    sums.iter().fold(0.0f64, |a, s| a.max(s.abs()))
                },
            )
            .reduce(|| 0.0, f64::max)
    }
}

fn grid_cells(k: usize, d: usize, memory_budget: usize) -> Result<usize> {
    let cells = (k as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    // three f64 grids plus a fill mask
    let limit = (memory_budget / 25) as u128;
    if cells > limit {
        return Err(Error::GridTooLarge { cells, limit });
    }
    Ok(cells as usize)
}

/// The 2^d orthant sums around the lower corner of voxel `v`, via
/// inclusion-exclusion on the inclusive prefix table. Bit m of the orthant
/// index selects cells at or above the corner along dimension m.
fn orthant_sums(prefix: &[f64], v: usize, k: usize, d: usize, out: &mut [f64]) {
    let mut coords = vec![0usize; d];
    let mut rest = v;
    for c in coords.iter_mut() {
        *c = rest % k;
        rest /= k;
    }
    for (s, slot) in out.iter_mut().enumerate() {
        // bit m set: prefix up to k-1 along m, else up to c_m - 1
        let mut index = 0;
        let mut stride = 1;
        let mut empty = false;
        for (m, &c) in coords.iter().enumerate() {
            let upto = if s >> m & 1 == 1 {
                k - 1
            } else if c == 0 {
                empty = true;
                break;
            } else {
                c - 1
            };
            index += upto * stride;
            stride *= k;
        }
        *slot = if empty { 0.0 } else { prefix[index] };
    }
    for m in 0..d {
        let bit = 1 << m;
        for s in 0..out.len() {
            if s & bit != 0 {
                out[s] -= out[s ^ bit];
            }
        }
    }
}

/// vdKS with `k` voxels per dimension.
pub fn vdks_statistic(p: &Sample, t: &Sample, k: usize) -> Result<f64> {
    vdks_statistic_with(
        p,
        t,
        &VdksConfig {
            voxels_per_dim: Some(k),
            ..VdksConfig::default()
        },
    )
}

pub fn vdks_statistic_with(p: &Sample, t: &Sample, config: &VdksConfig) -> Result<f64> {
    let (np, nt, _) = normalize_pair(p, t)?;
    let k = config
        .voxels_per_dim
        .unwrap_or_else(|| default_voxels_per_dim(p.n() + t.n(), p.d()));
    if k == 0 {
        return Err(Error::Domain("voxels per dimension must be at least 1".into()));
    }
    let grid = VoxelGrid::build(&np, &nt, k, config.memory_budget)?;
    let coarse = grid.max_orthant_gap();
    if !config.refine {
        return Ok(coarse);
    }
    refine(&np, &nt, &grid, coarse)
}

fn refine(p: &Sample, t: &Sample, grid: &VoxelGrid, coarse: f64) -> Result<f64> {
    let k = grid.voxels_per_dim;
    let total = (p.n() + t.n()) as f64;
    let mut best = coarse;
    for &v in &grid.filled {
        if grid.occupancy_p[v] <= 0.1 && grid.occupancy_t[v] <= 0.1 {
            continue;
        }
        let members = |s: &Sample| -> Result<Vec<usize>> {
            let mut out = Vec::new();
            for (i, row) in s.rows().enumerate() {
                if voxel_index(row, k)? == v {
                    out.push(i);
                }
            }
            Ok(out)
        };
        let (ip, it) = (members(p)?, members(t)?);
        if ip.is_empty() || it.is_empty() {
            continue;
        }
        let inner = ddks_statistic(&p.select(&ip)?, &t.select(&it)?)?;
        best = best.max(inner * (ip.len() + it.len()) as f64 / total);
    }
    Ok(best)
}
