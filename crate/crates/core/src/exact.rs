//! Exact ddKS statistic.
//!
//! For every test point x drawn from P ∪ T, the 2^d orthants around x are
//! encoded as d-bit integers: bit m is set iff `point[m] >= x[m]`. The
//! statistic is the largest gap between the two samples' normalized orthant
//! occupations over all test points and orthants.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{validate_pair, Sample};

/// Limits for the batched path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactConfig {
    /// Upper bound on the working set of one block of test points, in bytes.
    pub memory_budget: usize,
    pub max_dim: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            memory_budget: 1 << 30,
            max_dim: 20,
        }
    }
}

/// Orthant of `point` relative to `test_point`.
pub fn orthant_index(test_point: &[f64], point: &[f64]) -> Result<usize> {
    if test_point.len() != point.len() {
        return Err(Error::DimensionMismatch {
            expected: test_point.len(),
            found: point.len(),
        });
    }
    if test_point.len() >= usize::BITS as usize {
        return Err(Error::DimensionTooLarge {
            d: test_point.len(),
            max: usize::BITS as usize - 1,
        });
    }
    Ok(orthant_unchecked(test_point, point))
}

#[inline]
fn orthant_unchecked(test_point: &[f64], point: &[f64]) -> usize {
    test_point
        .iter()
        .zip(point)
        .enumerate()
        .fold(0, |acc, (m, (t, x))| acc | (usize::from(x >= t) << m))
}

/// Per-test-point orthant occupation counts of one sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipMatrix {
    counts: Vec<u32>,
    orthants: usize,
    source_n: usize,
}

impl MembershipMatrix {
    /// Wraps raw row-major counts, `orthants` per test point.
    pub fn from_counts(counts: Vec<u32>, orthants: usize, source_n: usize) -> Result<Self> {
        if orthants < 2 || !orthants.is_power_of_two() {
            return Err(Error::Domain(format!("{orthants} is not a valid orthant count")));
        }
        if counts.is_empty() || counts.len() % orthants != 0 {
            return Err(Error::Domain(format!(
                "{} counts do not split into rows of {orthants}",
                counts.len()
            )));
        }
        if let Some(&c) = counts.iter().find(|&&c| c as usize > source_n) {
            return Err(Error::Domain(format!("count {c} exceeds sample size {source_n}")));
        }
        Ok(Self { counts, orthants, source_n })
    }

    pub fn n_test_points(&self) -> usize {
        self.counts.len() / self.orthants
    }

    pub fn orthants(&self) -> usize {
        self.orthants
    }

    pub fn source_n(&self) -> usize {
        self.source_n
    }

    /// Counts of every orthant around test point `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.counts[i * self.orthants..(i + 1) * self.orthants]
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.orthants + j]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.counts
    }
}

fn check_dim(d: usize, config: &ExactConfig) -> Result<()> {
    if d > config.max_dim || d >= 32 {
        return Err(Error::DimensionTooLarge {
            d,
            max: config.max_dim.min(31),
        });
    }
    Ok(())
}

/// Orthant counts of `counted` around each row of `test_points`.
pub fn membership(counted: &Sample, test_points: &Sample) -> Result<MembershipMatrix> {
    membership_with(counted, test_points, &ExactConfig::default())
}

pub fn membership_with(
    counted: &Sample,
    test_points: &Sample,
    config: &ExactConfig,
) -> Result<MembershipMatrix> {
    validate_pair(counted, test_points)?;
    let d = counted.d();
    check_dim(d, config)?;
    let orthants = 1usize << d;
    let columns = counted.columns();
    let mut counts = vec![0u32; test_points.n() * orthants];
    counts
        .par_chunks_mut(orthants)
        .enumerate()
        .for_each_init(
            || vec![0u32; counted.n()],
            |idx, (i, row)| {
                orthant_codes(&columns, test_points.row(i), idx);
                for &j in idx.iter() {
                    row[j as usize] += 1;
                }
            },
        );
    Ok(MembershipMatrix {
        counts,
        orthants,
        source_n: counted.n(),
    })
}

/// Writes the orthant code of every point (given column-major) relative to `x`.
#[inline]
fn orthant_codes(columns: &[Vec<f64>], x: &[f64], out: &mut [u32]) {
    out.fill(0);
    for (m, (col, &xm)) in columns.iter().zip(x).enumerate() {
        for (o, &v) in out.iter_mut().zip(col) {
            *o |= u32::from(v >= xm) << m;
        }
    }
}

#[inline]
fn max_gap(cp: &[u32], ct: &[u32], n_p: f64, n_t: f64) -> f64 {
    cp.iter().zip(ct).fold(0.0, |acc, (&a, &b)| {
        let gap = (f64::from(a) / n_p - f64::from(b) / n_t).abs();
        if gap > acc {
            gap
        } else {
            acc
        }
    })
}

/// Reference double loop, O(2^d · N² · d). Used as the oracle for
/// [`ddks_statistic`].
pub fn ddks_statistic_naive(p: &Sample, t: &Sample) -> Result<f64> {
    validate_pair(p, t)?;
    let d = p.d();
    check_dim(d, &ExactConfig::default())?;
    let orthants = 1usize << d;
    let (n_p, n_t) = (p.n() as f64, t.n() as f64);
    let mut best = 0.0f64;
    for x in p.rows().chain(t.rows()) {
        for j in 0..orthants {
            let cp = p.rows().filter(|y| orthant_unchecked(x, y) == j).count() as u32;
            let ct = t.rows().filter(|y| orthant_unchecked(x, y) == j).count() as u32;
            let gap = max_gap(&[cp], &[ct], n_p, n_t);
            if gap > best {
                best = gap;
            }
        }
    }
    Ok(best)
}

/// Exact ddKS statistic with the default [`ExactConfig`].
pub fn ddks_statistic(p: &Sample, t: &Sample) -> Result<f64> {
    ddks_statistic_with(p, t, &ExactConfig::default())
}

/// Batched exact statistic: test points are processed in blocks whose
/// working set stays within `config.memory_budget`, each block in parallel.
pub fn ddks_statistic_with(p: &Sample, t: &Sample, config: &ExactConfig) -> Result<f64> {
    validate_pair(p, t)?;
    let d = p.d();
    check_dim(d, config)?;
    let orthants = 1usize << d;
    let per_point = 4 * (p.n() + t.n()) + 8 * orthants;
    if per_point > config.memory_budget {
        return Err(Error::DimensionTooLarge {
            d,
            max: config.max_dim.min((config.memory_budget / 8).ilog2() as usize),
        });
    }
    let block = (config.memory_budget / per_point).max(1);
    let (cols_p, cols_t) = (p.columns(), t.columns());
    let (n_p, n_t) = (p.n() as f64, t.n() as f64);

    let test_points: Vec<&[f64]> = p.rows().chain(t.rows()).collect();
    let mut best = 0.0f64;
    for chunk in test_points.chunks(block) {
        let block_best = chunk
            .par_iter()
            .map_init(
                || Workspace::new(p.n(), t.n(), orthants),
                |ws, x| ws.gap_at(x, &cols_p, &cols_t, n_p, n_t),
            )
            .reduce(|| 0.0, f64::max);
        best = best.max(block_best);
    }
    Ok(best)
}

struct Workspace {
    idx_p: Vec<u32>,
    idx_t: Vec<u32>,
    cp: Vec<u32>,
    ct: Vec<u32>,
}

impl Workspace {
    fn new(n_p: usize, n_t: usize, orthants: usize) -> Self {
        Self {
            idx_p: vec![0; n_p],
            idx_t: vec![0; n_t],
            cp: vec![0; orthants],
            ct: vec![0; orthants],
        }
    }

    fn gap_at(
        &mut self,
        x: &[f64],
        cols_p: &[Vec<f64>],
        cols_t: &[Vec<f64>],
        n_p: f64,
        n_t: f64,
    ) -> f64 {
        orthant_codes(cols_p, x, &mut self.idx_p);
        orthant_codes(cols_t, x, &mut self.idx_t);
        self.cp.fill(0);
        self.ct.fill(0);
        for &j in &self.idx_p {
            self.cp[j as usize] += 1;
        }
        for &j in &self.idx_t {
            self.ct[j as usize] += 1;
        }
        max_gap(&self.cp, &self.ct, n_p, n_t)
    }
}

/// Orthant codes of a pooled sample relative to each of its own points.
///
/// Test points of the statistic are always the pooled points, so any
/// relabelling of the pool into (P, T) can be scored from this table in
/// O(N² + N·2^d) without recomputing comparisons.
#[derive(Clone, Debug)]
pub struct PooledOrthants {
    codes: Codes,
    n: usize,
    orthants: usize,
}

#[derive(Clone, Debug)]
enum Codes {
    Narrow(Vec<u8>),
    Wide(Vec<u32>),
}

impl PooledOrthants {
    /// Returns `None` when the N² table would not fit in `config.memory_budget`.
    pub fn new(pooled: &Sample, config: &ExactConfig) -> Result<Option<Self>> {
        let d = pooled.d();
        check_dim(d, config)?;
        let n = pooled.n();
        let orthants = 1usize << d;
        let width = if d <= 8 { 1 } else { 4 };
        if n.saturating_mul(n).saturating_mul(width) > config.memory_budget {
            return Ok(None);
        }
        let columns = pooled.columns();
        let mut wide = vec![0u32; n * n];
        wide.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| orthant_codes(&columns, pooled.row(i), row));
        let codes = if d <= 8 {
            Codes::Narrow(wide.into_iter().map(|c| c as u8).collect())
        } else {
            Codes::Wide(wide)
        };
        Ok(Some(Self { codes, n, orthants }))
    }

    /// Statistic for the split where `in_p[k]` marks pooled point k as a
    /// member of P.
    pub fn statistic(&self, in_p: &[bool]) -> f64 {
        assert_eq!(in_p.len(), self.n);
        let n_p = in_p.iter().filter(|&&b| b).count();
        let n_t = self.n - n_p;
        let (fp, ft) = (n_p as f64, n_t as f64);
        (0..self.n)
            .into_par_iter()
            .map_init(
                || (vec![0u32; self.orthants], vec![0u32; self.orthants]),
                |(cp, ct), i| {
                    cp.fill(0);
                    ct.fill(0);
                    let row = i * self.n..(i + 1) * self.n;
                    match &self.codes {
                        Codes::Narrow(c) => tally(&c[row], in_p, cp, ct),
                        Codes::Wide(c) => tally(&c[row], in_p, cp, ct),
                    }
                    max_gap(cp, ct, fp, ft)
                },
            )
            .reduce(|| 0.0, f64::max)
    }
}

#[inline]
fn tally<C: Copy + Into<u32>>(codes: &[C], in_p: &[bool], cp: &mut [u32], ct: &mut [u32]) {
    for (&c, &is_p) in codes.iter().zip(in_p) {
        let j = c.into() as usize;
        if is_p {
            cp[j] += 1;
        } else {
            ct[j] += 1;
        }
    }
}
