//! Experiment configuration as a flat `key = value` text file.
//!
//! Lines starting with `#` and blank lines are ignored. Lists are comma
//! separated; sampling points are `rho:theta` pairs separated by `;`.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `rho` | inclusion radius | 0.4 |
//! | `sigma_out`, `sigma_in` | conductivities | 1, 1 |
//! | `sigma` | sets both conductivities | |
//! | `gamma` | transmission parameter | 1 |
//! | `n_points` | boundary grid size N | 32 |
//! | `truncation` | kernel series order | 10 |
//! | `delta`, `seed` | noise level and seed | 0, 0 |
//! | `grid_resolution`, `r_max`, `tau` | imaging grid and level | 101, 0.95, 0.5 |
//! | `methods` | `lsm`, `rfm` | `lsm, rfm` |
//! | `lsm_filters`, `rfm_filters` | e.g. `tikhonov:1e-9, cutoff:1e-9, ttls:5` | see [`ExperimentConfig::default`] |
//! | `output_dir` | output directory | `out` |
//! | `points` | sampling points for `greens`/`picard` | empty |
//! | `sweep_axis`, `sweep_values` | `delta`, `alpha` or `rho`, and values | none |

use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forward::{KernelSpec, MediumConfig};
use crate::greens::SamplingPoint;
use crate::imaging::Method;
use crate::regularize::FilterSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Delta,
    Alpha,
    Rho,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Delta => "delta",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Rho => "rho",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "delta" => Ok(SweepAxis::Delta),
            "alpha" => Ok(SweepAxis::Alpha),
            "rho" => Ok(SweepAxis::Rho),
            other => Err(Error::domain(format!("unknown sweep axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub rho: f64,
    pub sigma_out: f64,
    pub sigma_in: f64,
    pub gamma: f64,
    pub n_points: usize,
    pub truncation: usize,
    pub delta: f64,
    pub seed: u64,
    pub grid_resolution: usize,
    pub r_max: f64,
    pub tau: f64,
    pub methods: Vec<Method>,
    pub lsm_filters: Vec<FilterSpec>,
    pub rfm_filters: Vec<FilterSpec>,
    pub output_dir: PathBuf,
    /// Polar `(rho_z, theta_z)` sampling points.
    pub points: Vec<(f64, f64)>,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Vec<f64>,
}

impl Default for ExperimentConfig {
    /// Noise-free reference configuration: `rho = 0.4`, `sigma = 1`,
    /// `N = 32`, series truncated at `|n| <= 10`.
    fn default() -> Self {
        Self {
            rho: 0.4,
            sigma_out: 1.0,
            sigma_in: 1.0,
            gamma: 1.0,
            n_points: 32,
            truncation: 10,
            delta: 0.0,
            seed: 0,
            grid_resolution: crate::imaging::DEFAULT_RESOLUTION,
            r_max: crate::greens::DEFAULT_R_MAX,
            tau: crate::imaging::DEFAULT_LEVEL,
            methods: vec![Method::Lsm, Method::Rfm],
            lsm_filters: vec![
                FilterSpec::Tikhonov { alpha: 1e-9 },
                FilterSpec::SpectralCutoff { alpha: 1e-9 },
                FilterSpec::Ttls { k: 5 },
            ],
            rfm_filters: vec![
                FilterSpec::Tikhonov { alpha: 1e-16 },
                FilterSpec::SpectralCutoff { alpha: 1e-16 },
                FilterSpec::Ttls { k: 5 },
            ],
            output_dir: PathBuf::from("out"),
            points: Vec::new(),
            sweep_axis: None,
            sweep_values: Vec::new(),
        }
    }
}

const KEYS: &[&str] = &[
    "rho",
    "sigma_out",
    "sigma_in",
    "gamma",
    "n_points",
    "truncation",
    "delta",
    "seed",
    "grid_resolution",
    "r_max",
    "tau",
    "methods",
    "lsm_filters",
    "rfm_filters",
    "output_dir",
    "points",
    "sweep_axis",
    "sweep_values",
];

fn list<T: FromStr<Err = Error>>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(T::from_str)
        .collect()
}

fn real(value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::domain(format!("expected a number, got `{value}`")))
}

fn integer<T: FromStr>(value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::domain(format!("expected a nonnegative integer, got `{value}`")))
}

fn parse_points(value: &str) -> Result<Vec<(f64, f64)>> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (r, t) = pair
                .split_once(':')
                .ok_or_else(|| Error::domain(format!("point `{pair}` must be rho:theta")))?;
            Ok((real(r)?, real(t)?))
        })
        .collect()
}

impl ExperimentConfig {
    /// Parses a config file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: idx + 1,
                key: line.to_string(),
                message: "expected `key = value`".into(),
            })?;
            cfg.set_at(key.trim(), value.trim(), idx + 1)?;
        }
        Ok(cfg)
    }

    /// Overrides one key (line 0 marks a command-line override).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_at(key, value, 0)
    }

    fn set_at(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        self.apply(key, value).map_err(|e| Error::Config {
            line,
            key: key.to_string(),
            message: match e {
                Error::Domain(m) => m,
                other => other.to_string(),
            },
        })
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "rho" => self.rho = real(value)?,
            "sigma" => {
                self.sigma_out = real(value)?;
                self.sigma_in = self.sigma_out;
            }
            "sigma_out" => self.sigma_out = real(value)?,
            "sigma_in" => self.sigma_in = real(value)?,
            "gamma" => self.gamma = real(value)?,
            "n_points" => self.n_points = integer(value)?,
            "truncation" => self.truncation = integer(value)?,
            "delta" => self.delta = real(value)?,
            "seed" => self.seed = integer(value)?,
            "grid_resolution" => self.grid_resolution = integer(value)?,
            "r_max" => self.r_max = real(value)?,
            "tau" => self.tau = real(value)?,
            "methods" => self.methods = list(value)?,
            "lsm_filters" => self.lsm_filters = list(value)?,
            "rfm_filters" => self.rfm_filters = list(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "points" => self.points = parse_points(value)?,
            "sweep_axis" => {
                self.sweep_axis = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(value.parse()?)
                }
            }
            "sweep_values" => {
                self.sweep_values = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(real)
                    .collect::<Result<_>>()?
            }
            _ => {
                return Err(Error::domain(format!(
                    "unknown key; expected one of {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Canonical text form; [`ExperimentConfig::parse`] inverts it.
    pub fn to_config_string(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("rho", format!("{:?}", self.rho));
        kv("sigma_out", format!("{:?}", self.sigma_out));
        kv("sigma_in", format!("{:?}", self.sigma_in));
        kv("gamma", format!("{:?}", self.gamma));
        kv("n_points", self.n_points.to_string());
        kv("truncation", self.truncation.to_string());
        kv("delta", format!("{:?}", self.delta));
        kv("seed", self.seed.to_string());
        kv("grid_resolution", self.grid_resolution.to_string());
        kv("r_max", format!("{:?}", self.r_max));
        kv("tau", format!("{:?}", self.tau));
        kv("methods", join(self.methods.iter().map(|m| m.to_string()).collect()));
        kv("lsm_filters", join(self.lsm_filters.iter().map(|f| f.to_string()).collect()));
        kv("rfm_filters", join(self.rfm_filters.iter().map(|f| f.to_string()).collect()));
        kv("output_dir", self.output_dir.display().to_string());
        kv(
            "points",
            self.points
                .iter()
                .map(|(r, t)| format!("{r:?}:{t:?}"))
                .collect::<Vec<_>>()
                .join("; "),
        );
        kv(
            "sweep_axis",
            self.sweep_axis.map_or("none".to_string(), |a| a.to_string()),
        );
        kv(
            "sweep_values",
            join(self.sweep_values.iter().map(|v| format!("{v:?}")).collect()),
        );
        out
    }

    pub fn medium(&self) -> Result<MediumConfig> {
        MediumConfig::new(self.rho, self.sigma_out, self.sigma_in, self.gamma)
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.truncation)
    }

    pub fn sampling_points(&self) -> Result<Vec<SamplingPoint>> {
        self.points
            .iter()
            .map(|&(r, t)| SamplingPoint::with_cap(r, t, self.r_max))
            .collect()
    }

    pub fn filters_for(&self, method: Method) -> &[FilterSpec] {
        match method {
            Method::Lsm => &self.lsm_filters,
            Method::Rfm => &self.rfm_filters,
        }
    }

    /// Checks everything needed to synthesize the operator.
    pub fn validate(&self) -> Result<()> {
        let invalid = |e: Error| Error::Invalid(e.to_string());
        self.medium().map_err(invalid)?;
        self.kernel().map_err(invalid)?;
        if self.n_points == 0 {
            return Err(Error::Invalid("n_points must be positive".into()));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Invalid(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.r_max > 0.0 && self.r_max < 1.0) {
            return Err(Error::Invalid(format!("r_max must lie in (0, 1), got {}", self.r_max)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Invalid(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        Ok(())
    }

    /// Additional checks for imaging runs.
    pub fn validate_image(&self) -> Result<()> {
        self.validate()?;
        if self.grid_resolution < 2 {
            return Err(Error::Invalid("grid_resolution must be at least 2".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Invalid("methods must name at least one of lsm, rfm".into()));
        }
        for &m in &self.methods {
            let filters = self.filters_for(m);
            if filters.is_empty() {
                return Err(Error::Invalid(format!("no filters configured for {m}")));
            }
            for f in filters {
                f.validate_for(self.n_points)
                    .map_err(|e| Error::Invalid(format!("{m} filter {f}: {e}")))?;
            }
        }
        Ok(())
    }
}
