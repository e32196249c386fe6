//! Synthetic two-sample datasets and CSV ingestion.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSpec;
use crate::types::{validate_pair, Sample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Gaussians with shifted means.
    Gvm,
    /// Gaussians with equal means and different widths.
    Gvs,
    /// Points on the main diagonal versus the uniform cube.
    Dvu,
    /// Coordinatewise exponentials with different rates.
    Skew,
    /// Shifted Gaussians with a fraction replaced by uniform noise.
    Mm,
    /// Two CSV files.
    File,
}

impl Family {
    pub const SYNTHETIC: [Family; 5] = [Family::Gvm, Family::Gvs, Family::Dvu, Family::Skew, Family::Mm];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gvm => "gvm",
            Family::Gvs => "gvs",
            Family::Dvu => "dvu",
            Family::Skew => "skew",
            Family::Mm => "mm",
            Family::File => "file",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Family::Gvm, Family::Gvs, Family::Dvu, Family::Skew, Family::Mm, Family::File]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::BadSpec(format!("unknown dataset family {s:?}")))
    }
}

/// Family parameters. Which fields matter depends on the family:
/// gvm/mm use `center`, `delta`, `sigma`; gvs uses `center`, `sigma1`,
/// `sigma2`; skew uses `rate1`, `rate2`; mm also uses `noise_fraction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetParams {
    pub center: f64,
    pub delta: f64,
    pub sigma: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rate1: f64,
    pub rate2: f64,
    pub noise_fraction: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            center: 0.5,
            delta: 0.2,
            sigma: 0.1,
            sigma1: 0.1,
            sigma2: 0.15,
            rate1: 1.0,
            rate2: 1.3,
            noise_fraction: 0.3,
        }
    }
}

impl DatasetParams {
    /// The scalar gap between the two distributions, if the family has one.
    pub fn difference(&self, family: Family) -> Option<f64> {
        match family {
            Family::Gvm | Family::Mm => Some(self.delta),
            Family::Gvs => Some(self.sigma2 - self.sigma1),
            Family::Skew => Some(self.rate2 - self.rate1),
            Family::Dvu | Family::File => None,
        }
    }

    /// Copy with the scalar gap set to `value`.
    pub fn with_difference(&self, family: Family, value: f64) -> Result<Self> {
        let mut out = *self;
        match family {
            Family::Gvm | Family::Mm => out.delta = value,
            Family::Gvs => out.sigma2 = self.sigma1 + value,
            Family::Skew => out.rate2 = self.rate1 + value,
            Family::Dvu | Family::File => {
                return Err(Error::BadSpec(format!("{family} has no difference parameter")))
            }
        }
        Ok(out)
    }
}

/// Per-family defaults, normally read from `defaults.toml`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetDefaults {
    pub gvm: DatasetParams,
    pub gvs: DatasetParams,
    pub dvu: DatasetParams,
    pub skew: DatasetParams,
    pub mm: DatasetParams,
}

const BUILTIN_DEFAULTS: &str = include_str!("../defaults.toml");

impl DatasetDefaults {
    /// The defaults file shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_DEFAULTS).expect("bundled defaults.toml parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn for_family(&self, family: Family) -> DatasetParams {
        match family {
            Family::Gvm => self.gvm,
            Family::Gvs => self.gvs,
            Family::Dvu | Family::File => self.dvu,
            Family::Skew => self.skew,
            Family::Mm => self.mm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub family: Family,
    pub d: usize,
    pub params: DatasetParams,
    pub rng: RngSpec,
    /// (P, T) CSV paths for [`Family::File`].
    pub paths: Option<(PathBuf, PathBuf)>,
}

impl DatasetSpec {
    /// Spec with the bundled defaults for `family`.
    pub fn new(family: Family, d: usize, rng: RngSpec) -> Self {
        Self {
            family,
            d,
            params: DatasetDefaults::builtin().for_family(family),
            rng,
            paths: None,
        }
    }

    pub fn from_files(p: impl Into<PathBuf>, t: impl Into<PathBuf>) -> Self {
        Self {
            family: Family::File,
            d: 0,
            params: DatasetParams::default(),
            rng: RngSpec::new(0),
            paths: Some((p.into(), t.into())),
        }
    }

    pub fn with_params(mut self, params: DatasetParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_rng(mut self, rng: RngSpec) -> Self {
        self.rng = rng;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == Family::File {
            return match self.paths {
                Some(_) => Ok(()),
                None => Err(Error::BadSpec("file family needs two paths".into())),
            };
        }
        if self.d == 0 {
            return Err(Error::BadSpec("dimension must be at least 1".into()));
        }
        let p = &self.params;
        let positive = match self.family {
            Family::Gvm | Family::Mm => vec![("sigma", p.sigma)],
            Family::Gvs => vec![("sigma1", p.sigma1), ("sigma2", p.sigma2)],
            Family::Skew => vec![("rate1", p.rate1), ("rate2", p.rate2)],
            Family::Dvu | Family::File => vec![],
        };
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::BadSpec(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&p.noise_fraction) {
            return Err(Error::BadSpec(format!(
                "noise_fraction must lie in [0, 1], got {}",
                p.noise_fraction
            )));
        }
        if !p.center.is_finite() || !p.delta.is_finite() {
            return Err(Error::BadSpec("center and delta must be finite".into()));
        }
        Ok(())
    }
}

fn normal_sample(rng: &mut impl Rng, n: usize, d: usize, mean: f64, sd: f64) -> Vec<f64> {
    let dist = Normal::new(mean, sd).expect("validated sd");
    (0..n * d).map(|_| dist.sample(rng)).collect()
}

/// Draws `n` points per sample. P uses stream `rng.derive(0)` and T uses
/// `rng.derive(1)`.
pub fn gen_pair(spec: &DatasetSpec, n: usize) -> Result<(Sample, Sample)> {
    spec.validate()?;
    if spec.family == Family::File {
        let (p, t) = spec.paths.as_ref().expect("validated");
        return load_samples(p, t);
    }
    if n == 0 {
        return Err(Error::BadSpec("sample size must be at least 1".into()));
    }
    let d = spec.d;
    let prm = &spec.params;
    let mut rp = spec.rng.derive(0).rng();
    let mut rt = spec.rng.derive(1).rng();
    let (p, t) = match spec.family {
        Family::Gvm => (
            normal_sample(&mut rp, n, d, prm.center, prm.sigma),
            normal_sample(&mut rt, n, d, prm.center + prm.delta, prm.sigma),
        ),
        Family::Gvs => (
            normal_sample(&mut rp, n, d, prm.center, prm.sigma1),
            normal_sample(&mut rt, n, d, prm.center, prm.sigma2),
        ),
        Family::Dvu => {
            let diag = (0..n)
                .flat_map(|_| {
                    let u: f64 = rp.random();
                    std::iter::repeat_n(u, d)
                })
                .collect();
            let cube = (0..n * d).map(|_| rt.random::<f64>()).collect();
            (diag, cube)
        }
        Family::Skew => {
            let e1 = Exp::new(prm.rate1).expect("validated rate");
            let e2 = Exp::new(prm.rate2).expect("validated rate");
            (
                (0..n * d).map(|_| e1.sample(&mut rp)).collect(),
                (0..n * d).map(|_| e2.sample(&mut rt)).collect(),
            )
        }
        Family::Mm => {
            let mut p = normal_sample(&mut rp, n, d, prm.center, prm.sigma);
            let mut t = normal_sample(&mut rt, n, d, prm.center + prm.delta, prm.sigma);
            let mid = prm.center + prm.delta / 2.0;
            let (lo, hi) = (mid - 3.0 * prm.sigma, mid + 3.0 * prm.sigma);
            add_noise(&mut p, d, prm.noise_fraction, lo, hi, &mut rp);
            add_noise(&mut t, d, prm.noise_fraction, lo, hi, &mut rt);
            (p, t)
        }
        Family::File => unreachable!(),
    };
    Ok((Sample::new(p, d)?, Sample::new(t, d)?))
}

/// Replaces each row independently with probability `fraction` by a
/// uniform draw from [lo, hi]^d. Returns how many rows were replaced.
fn add_noise(data: &mut [f64], d: usize, fraction: f64, lo: f64, hi: f64, rng: &mut impl Rng) -> usize {
    let mut replaced = 0;
    for row in data.chunks_exact_mut(d) {
        if rng.random_bool(fraction) {
            for v in row.iter_mut() {
                *v = rng.random_range(lo..=hi);
            }
            replaced += 1;
        }
    }
    replaced
}

/// Reads P and T from CSV files and checks that their dimensions agree.
pub fn load_samples(path_p: impl AsRef<Path>, path_t: impl AsRef<Path>) -> Result<(Sample, Sample)> {
    let p = Sample::read_csv(path_p)?;
    let t = Sample::read_csv(path_t)?;
    validate_pair(&p, &t)?;
    Ok((p, t))
}
