//! LSM and RFM imaging functionals over a sampling grid.
//!
//! Both indicators probe whether the Green's trace `b_z` lies in the
//! (approximate) range of the gap operator:
//!
//! * LSM: `W(z) = 1 / |f_z|` with `f_z` a regularized solution of `A f = b_z`.
//! * RFM: `W(z) = [ sum_n phi(s_n)^2 / s_n |<u_n, b_z>|^2 ]^-1`.
//!
//! Points whose functional is not a finite positive number are flagged
//! instead of carrying an infinite value.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{MediumConfig, OperatorMatrix};
use crate::greens::{robin_greens_trace, SamplingPoint, DEFAULT_R_MAX};
use crate::regularize::{decompose, FilterSpec, SpectralSystem};

pub const DEFAULT_RESOLUTION: usize = 101;
pub const DEFAULT_LEVEL: f64 = 0.5;

/// Annulus used as the "exterior" reference region in contrast scores.
pub const EXTERIOR_ANNULUS: (f64, f64) = (0.6, 0.9);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lsm,
    Rfm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lsm => "lsm",
            Method::Rfm => "rfm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lsm" => Ok(Method::Lsm),
            "rfm" => Ok(Method::Rfm),
            other => Err(Error::domain(format!("unknown imaging method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    /// Lattice column and row; row 0 is the top (`y = 1`) for raster output.
    pub ix: usize,
    pub iy: usize,
    pub x: f64,
    pub y: f64,
    pub z: SamplingPoint,
}

/// Cartesian lattice over `[-1, 1]^2` restricted to `rho_z <= r_max`.
#[derive(Debug, Clone)]
pub struct ImagingGrid {
    resolution: usize,
    r_max: f64,
    points: Vec<GridPoint>,
}

impl ImagingGrid {
    pub fn new(resolution: usize, r_max: f64) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::domain("imaging grid needs at least 2 points per axis"));
        }
        if !(r_max > 0.0 && r_max < 1.0) {
            return Err(Error::domain(format!("r_max must lie in (0, 1), got {r_max}")));
        }
        let h = 2.0 / (resolution - 1) as f64;
        let mut points = Vec::new();
        for iy in 0..resolution {
            let y = 1.0 - iy as f64 * h;
            for ix in 0..resolution {
                let x = -1.0 + ix as f64 * h;
                if x.hypot(y) <= r_max {
                    points.push(GridPoint {
                        ix,
                        iy,
                        x,
                        y,
                        z: SamplingPoint::from_cartesian(x, y, r_max)?,
                    });
                }
            }
        }
        Ok(Self {
            resolution,
            r_max,
            points,
        })
    }

    /// A grid from explicit Cartesian points (no raster layout).
    pub fn from_points(coords: &[(f64, f64)], r_max: f64) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("imaging grid is empty"));
        }
        let points = coords
            .iter()
            .map(|&(x, y)| {
                Ok(GridPoint {
                    ix: 0,
                    iy: 0,
                    x,
                    y,
                    z: SamplingPoint::from_cartesian(x, y, r_max)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            resolution: 0,
            r_max,
            points,
        })
    }

    /// Points per axis, or 0 for a grid built from explicit points.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> Option<f64> {
        (self.resolution >= 2).then(|| 2.0 / (self.resolution - 1) as f64)
    }
}

impl Default for ImagingGrid {
    fn default() -> Self {
        Self::new(DEFAULT_RESOLUTION, DEFAULT_R_MAX).expect("default grid is valid")
    }
}

#[derive(Debug, Clone)]
pub struct IndicatorMap {
    pub grid: ImagingGrid,
    pub values: Vec<f64>,
    pub flagged: Vec<bool>,
    pub method: Method,
    pub filter: FilterSpec,
    pub normalized: bool,
    /// TTLS filter terms skipped by the pole guard, summed over the grid.
    pub pole_skips: usize,
}

impl IndicatorMap {
    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|f| **f).count()
    }

    /// Index of the largest unflagged value.
    pub fn argmax(&self) -> Option<usize> {
        self.values
            .iter()
            .zip(&self.flagged)
            .enumerate()
            .filter(|(_, (v, f))| !**f && v.is_finite())
            .max_by(|a, b| a.1 .0.total_cmp(b.1 .0))
            .map(|(i, _)| i)
    }
}

struct PointValue {
    value: f64,
    flagged: bool,
    skips: usize,
}

impl PointValue {
    fn from_positive(value: f64, skips: usize) -> Self {
        if value.is_finite() && value > 0.0 {
            Self {
                value,
                flagged: false,
                skips,
            }
        } else {
            Self::flag(skips)
        }
    }

    fn flag(skips: usize) -> Self {
        Self {
            value: 0.0,
            flagged: true,
            skips,
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("conductivity must be positive, got {sigma}")))
    }
}

fn assemble(grid: &ImagingGrid, method: Method, filter: FilterSpec, vals: Vec<PointValue>) -> IndicatorMap {
    let pole_skips = vals.iter().map(|p| p.skips).sum();
    let (values, flagged) = vals.into_iter().map(|p| (p.value, p.flagged)).unzip();
    IndicatorMap {
        grid: grid.clone(),
        values,
        flagged,
        method,
        filter,
        normalized: false,
        pole_skips,
    }
}

/// Raw LSM map `1 / |f_z|` for every grid point.
pub fn lsm_indicator(
    op: &OperatorMatrix,
    grid: &ImagingGrid,
    sigma: f64,
    spec: FilterSpec,
) -> Result<IndicatorMap> {
    let sys = decompose(op)?;
    lsm_indicator_with(&sys, grid, sigma, spec)
}

/// LSM map over an already decomposed operator.
pub fn lsm_indicator_with(
    sys: &SpectralSystem,
    grid: &ImagingGrid,
    sigma: f64,
    spec: FilterSpec,
) -> Result<IndicatorMap> {
    check_sigma(sigma)?;
    if grid.is_empty() {
        return Err(Error::domain("imaging grid is empty"));
    }
    if sys.is_empty() {
        return Err(Error::ZeroOperator);
    }
    spec.validate_for(sys.dim())?;
    let boundary = crate::forward::BoundaryGrid::new(sys.dim())?;
    let vals = grid
        .points()
        .par_iter()
        .map(|p| {
            let b = robin_greens_trace(p.z, sigma, &boundary)?;
            match sys.filtered_solve(&b.values, spec) {
                Ok(f) => Ok(PointValue::from_positive(1.0 / f.norm(), 0)),
                Err(Error::NonGenericTls { .. }) => Ok(PointValue::flag(0)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(grid, Method::Lsm, spec, vals))
}

/// Raw RFM map `[sum_n phi(s_n)^2 / s_n |<u_n, b_z>|^2]^-1`.
pub fn rfm_indicator(
    sys: &SpectralSystem,
    grid: &ImagingGrid,
    sigma: f64,
    spec: FilterSpec,
) -> Result<IndicatorMap> {
    check_sigma(sigma)?;
    if grid.is_empty() {
        return Err(Error::domain("imaging grid is empty"));
    }
    if sys.is_empty() {
        return Err(Error::ZeroOperator);
    }
    spec.validate_for(sys.dim())?;
    let boundary = crate::forward::BoundaryGrid::new(sys.dim())?;
    let vals = grid
        .points()
        .par_iter()
        .map(|p| {
            let b = robin_greens_trace(p.z, sigma, &boundary)?;
            rfm_point(sys, &b.values, spec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(grid, Method::Rfm, spec, vals))
}

fn rfm_point(sys: &SpectralSystem, b: &[f64], spec: FilterSpec) -> Result<PointValue> {
    let coeffs = sys.project(b);
    let (filters, skips) = match sys.filter_factors(b, spec) {
        Ok(v) => v,
        Err(Error::NonGenericTls { .. }) => return Ok(PointValue::flag(0)),
        Err(e) => return Err(e),
    };
    let sum: f64 = sys
        .singular_values()
        .iter()
        .zip(&filters)
        .zip(coeffs.iter())
        .map(|((s, phi), c)| phi * phi / s * c * c)
        .sum();
    Ok(PointValue::from_positive(1.0 / sum, skips))
}

/// Divides by the largest unflagged value; flagged points are set to 1 and
/// keep their flag.
pub fn normalize_map(map: &IndicatorMap) -> Result<IndicatorMap> {
    let sup = map
        .values
        .iter()
        .zip(&map.flagged)
        .filter(|(v, f)| !**f && v.is_finite() && **v > 0.0)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(sup > 0.0 && sup.is_finite()) {
        return Err(Error::EmptyMap);
    }
    let values = map
        .values
        .iter()
        .zip(&map.flagged)
        .map(|(v, f)| if *f { 1.0 } else { v / sup })
        .collect();
    Ok(IndicatorMap {
        values,
        normalized: true,
        ..map.clone()
    })
}

/// Scores of a normalized map against the true concentric inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconMetrics {
    /// Mean inside the inclusion over mean in the exterior annulus.
    pub contrast: f64,
    /// Jaccard index of `{W >= tau}` and the inclusion.
    pub jaccard: f64,
    /// Distance from the argmax to the inclusion center.
    pub argmax_dist: f64,
    /// Fraction of grid points with `0.25 <= W <= 0.75`; smaller is a sharper
    /// transition.
    pub transition_band: f64,
    pub flagged: usize,
}

pub fn score(map: &IndicatorMap, truth: &MediumConfig, tau: f64) -> Result<ReconMetrics> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::domain(format!("level must lie in (0, 1), got {tau}")));
    }
    let rho = truth.rho();
    let (lo, hi) = EXTERIOR_ANNULUS;
    let mut inside = (0.0, 0usize);
    let mut exterior = (0.0, 0usize);
    let mut inter = 0usize;
    let mut union = 0usize;
    let mut band = 0usize;
    for (p, &w) in map.grid.points().iter().zip(&map.values) {
        let r = p.z.rho_z();
        let in_d = r < rho;
        if in_d {
            inside.0 += w;
            inside.1 += 1;
        }
        if (lo..=hi).contains(&r) {
            exterior.0 += w;
            exterior.1 += 1;
        }
        let level = w >= tau;
        if level && in_d {
            inter += 1;
        }
        if level || in_d {
            union += 1;
        }
        if (0.25..=0.75).contains(&w) {
            band += 1;
        }
    }
    let mean = |(s, n): (f64, usize)| if n == 0 { f64::NAN } else { s / n as f64 };
    let argmax_dist = map
        .argmax()
        .map(|i| {
            let p = map.grid.points()[i];
            p.x.hypot(p.y)
        })
        .unwrap_or(f64::NAN);
    Ok(ReconMetrics {
        contrast: mean(inside) / mean(exterior),
        jaccard: if union == 0 { 0.0 } else { inter as f64 / union as f64 },
        argmax_dist,
        transition_band: band as f64 / map.grid.len().max(1) as f64,
        flagged: map.flagged_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn constant_map(grid: ImagingGrid, c: f64) -> IndicatorMap {
        let n = grid.len();
        IndicatorMap {
            grid,
            values: vec![c; n],
            flagged: vec![false; n],
            method: Method::Rfm,
            filter: FilterSpec::tikhonov(1.0).unwrap(),
            normalized: false,
            pole_skips: 0,
        }
    }

    #[test]
    fn grid_respects_cap() {
        let grid = ImagingGrid::new(41, 0.95).unwrap();
        assert!(grid.points().iter().all(|p| p.z.rho_z() <= 0.95));
        assert!(grid.len() > 1000);
        assert!(ImagingGrid::new(1, 0.95).is_err());
        assert!(ImagingGrid::from_points(&[(0.99, 0.0)], 0.95).is_err());
    }

    #[test]
    fn constant_map_normalizes_to_ones() {
        let map = constant_map(ImagingGrid::new(11, 0.95).unwrap(), 3.5);
        let norm = normalize_map(&map).unwrap();
        assert!(norm.values.iter().all(|v| *v == 1.0));
        assert!(norm.normalized);
    }

    #[test]
    fn normalization_keeps_argmax_and_flags() {
        let grid = ImagingGrid::new(11, 0.95).unwrap();
        let mut map = constant_map(grid, 1.0);
        for (i, v) in map.values.iter_mut().enumerate() {
            *v = 1.0 + (i as f64 * 0.37).sin();
        }
        map.flagged[3] = true;
        map.values[3] = 0.0;
        let before = map.argmax();
        let norm = normalize_map(&map).unwrap();
        assert_eq!(before, norm.argmax());
        assert_eq!(norm.values[3], 1.0);
        assert!(norm.flagged[3]);
        let max = norm
            .values
            .iter()
            .zip(&norm.flagged)
            .filter(|(_, f)| !**f)
            .map(|(v, _)| *v)
            .fold(0.0, f64::max);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn all_flagged_is_an_error() {
        let mut map = constant_map(ImagingGrid::new(5, 0.95).unwrap(), 0.0);
        map.flagged.iter_mut().for_each(|f| *f = true);
        assert!(matches!(normalize_map(&map), Err(Error::EmptyMap)));
    }

    #[test]
    fn exact_indicator_scores_perfectly() {
        let truth = MediumConfig::uniform(0.4, 1.0, 1.0).unwrap();
        let grid = ImagingGrid::new(51, 0.95).unwrap();
        let mut map = constant_map(grid, 0.0);
        for (v, p) in map.values.iter_mut().zip(map.grid.points()) {
            *v = if p.z.rho_z() < 0.4 { 1.0 } else { 0.0 };
        }
        let m = score(&map, &truth, 0.5).unwrap();
        assert_eq!(m.jaccard, 1.0);
        assert!(m.argmax_dist <= map.grid.spacing().unwrap() * 2f64.sqrt() + 0.4);
    }

    #[test]
    fn unit_map_jaccard_is_area_fraction() {
        let truth = MediumConfig::uniform(0.4, 1.0, 1.0).unwrap();
        let map = constant_map(ImagingGrid::new(51, 0.95).unwrap(), 1.0);
        let m = score(&map, &truth, 0.5).unwrap();
        let inside = map.grid.points().iter().filter(|p| p.z.rho_z() < 0.4).count();
        assert_eq!(m.jaccard, inside as f64 / map.grid.len() as f64);
        assert!(score(&map, &truth, 1.0).is_err());
    }

    #[test]
    fn rfm_single_term() {
        // spectrum {1}: b = u_1 gives a unit sum
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 0)] = 1.0;
        let sys = crate::regularize::decompose_matrix(&a).unwrap();
        assert_eq!(sys.rank(), 1);
        let u1: Vec<f64> = sys.left_vectors().column(0).iter().copied().collect();
        let p = rfm_point(&sys, &u1, FilterSpec::tikhonov(0.0).unwrap()).unwrap();
        assert!(!p.flagged);
        assert!((p.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn method_parse() {
        assert_eq!("LSM".parse::<Method>().unwrap(), Method::Lsm);
        assert_eq!("rfm".parse::<Method>().unwrap(), Method::Rfm);
        assert!("dsm".parse::<Method>().is_err());
    }
}
