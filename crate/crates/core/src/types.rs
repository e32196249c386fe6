//! Shared domain types: samples, test outcomes and method identifiers.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, nonempty set of points in R^d stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Sample {
    /// Builds a sample from a row-major buffer of `n * d` values.
    pub fn new(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if data.len() % d != 0 {
            return Err(Error::Parse(format!(
                "buffer of length {} is not a multiple of d={d}",
                data.len()
            )));
        }
        let n = data.len() / d;
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptySample)?;
        let d = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, d)
    }

    /// One-dimensional sample from a list of scalars.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), 1)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, m: usize) -> Vec<f64> {
        self.rows().map(|r| r[m]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Column-major copy, one contiguous vector per dimension.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|m| self.column(m)).collect()
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Sample) -> Result<Sample> {
        check_dims(self, other)?;
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Sample {
            data,
            n: self.n + other.n,
            d: self.d,
        })
    }

    /// New sample made of the given rows, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Sample> {
        if indices.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Ok(Sample {
            data,
            n: indices.len(),
            d: self.d,
        })
    }

    /// Applies `f` to every coordinate (row index, column index, value).
    pub fn map(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Result<Sample> {
        let d = self.d;
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, &v)| f(k / d, k % d, v))
            .collect();
        Sample::new(data, d)
    }

    /// Parses CSV text: one row per point, an optional first header row in
    /// which no field is numeric.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut data = Vec::new();
        let mut d = None;
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            if line == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
                continue;
            }
            let width = record.len();
            match d {
                None => d = Some(width),
                Some(expected) if expected != width => {
                    return Err(Error::Parse(format!(
                        "line {}: expected {expected} columns, found {width}",
                        line + 1
                    )))
                }
                _ => {}
            }
            for field in record.iter() {
                let v = field.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {}: cannot parse {field:?}", line + 1))
                })?;
                data.push(v);
            }
        }
        let d = d.ok_or(Error::EmptySample)?;
        Sample::new(data, d)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for row in self.rows() {
            wtr.write_record(row.iter().map(|v| format!("{v:?}")))
                .map_err(|e| Error::Parse(e.to_string()))?;
        }
        wtr.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }
}

fn check_dims(p: &Sample, t: &Sample) -> Result<()> {
    if p.d != t.d {
        return Err(Error::DimensionMismatch {
            expected: p.d,
            found: t.d,
        });
    }
    Ok(())
}

/// Succeeds iff both samples are finite, nonempty and share a dimension.
pub fn validate_pair(p: &Sample, t: &Sample) -> Result<()> {
    check_dims(p, t)?;
    for s in [p, t] {
        if s.n == 0 {
            return Err(Error::EmptySample);
        }
        if let Some(pos) = s.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / s.d,
                col: pos % s.d,
            });
        }
    }
    Ok(())
}

/// Identifies a two-sample statistic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ddks,
    DdksNaive,
    Vdks,
    Rdks,
    Onedks,
    HotellingT2,
    KlDiv,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ddks,
        Method::DdksNaive,
        Method::Vdks,
        Method::Rdks,
        Method::Onedks,
        Method::HotellingT2,
        Method::KlDiv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ddks => "ddks",
            Method::DdksNaive => "ddks_naive",
            Method::Vdks => "vdks",
            Method::Rdks => "rdks",
            Method::Onedks => "onedks",
            Method::HotellingT2 => "hotelling_t2",
            Method::KlDiv => "kl_div",
        }
    }

    /// Statistics bounded by 1 (the Kolmogorov-Smirnov family).
    pub fn is_ks_family(self) -> bool {
        matches!(
            self,
            Method::Ddks | Method::DdksNaive | Method::Vdks | Method::Rdks | Method::Onedks
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::BadSpec(format!("unknown method {s:?}")))
    }
}

/// Result of a single two-sample test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub method: Method,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub n_p: usize,
    pub n_t: usize,
    pub d: usize,
    pub seed: u64,
    pub runtime_ns: u64,
}

impl TestOutcome {
    /// Equality on everything except the measured runtime.
    pub fn same_result(&self, other: &TestOutcome) -> bool {
        TestOutcome {
            runtime_ns: other.runtime_ns,
            ..self.clone()
        } == *other
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("TestOutcome serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}
