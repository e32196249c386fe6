//! Two-sample ECDF sweeps shared by the 1-D and radial statistics.

use crate::error::{Error, Result};

#[inline]
fn gap(i: usize, na: f64, j: usize, nb: f64) -> f64 {
    (i as f64 / na - j as f64 / nb).abs()
}

/// Largest ECDF gap between two ascending lists. Gaps are evaluated only
/// once both lists have consumed every value at or below the current
/// threshold, so tied values never open a spurious gap.
pub fn sorted_gap(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyList);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best = 0.0f64;
    while i < a.len() || j < b.len() {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        best = best.max(gap(i, na, j, nb));
    }
    Ok(best)
}

pub fn sort_values(v: &mut [f64]) {
    v.sort_unstable_by(f64::total_cmp);
}

/// A pooled list of values in ascending order, reusable across relabellings
/// of the pool into two samples.
#[derive(Clone, Debug)]
pub struct SortedPool {
    order: Vec<u32>,
    /// `last_of_group[r]` is true when rank r is the last of its tie group.
    last_of_group: Vec<bool>,
}

impl SortedPool {
    pub fn new(values: &[f64]) -> Self {
        let mut order: Vec<u32> = (0..values.len() as u32).collect();
        order.sort_unstable_by(|&x, &y| values[x as usize].total_cmp(&values[y as usize]));
        let last_of_group = (0..order.len())
            .map(|r| {
                r + 1 == order.len()
                    || values[order[r] as usize] != values[order[r + 1] as usize]
            })
            .collect();
        Self {
            order,
            last_of_group,
        }
    }

    /// Same value as [`sorted_gap`] on the two label classes.
    pub fn gap(&self, in_p: &[bool], n_p: usize, n_t: usize) -> f64 {
        let (na, nb) = (n_p as f64, n_t as f64);
        let (mut i, mut j) = (0, 0);
        let mut best = 0.0f64;
        for (&k, &last) in self.order.iter().zip(&self.last_of_group) {
            if in_p[k as usize] {
                i += 1;
            } else {
                j += 1;
            }
            if last {
                best = best.max(gap(i, na, j, nb));
            }
        }
        best
    }
}
