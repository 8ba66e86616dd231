//! Text and image encodings of operators, traces, maps and diagnostics.
//!
//! Every real number is written with 17 significant digits so that files
//! round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{MediumConfig, OperatorMatrix, NOISE_RNG};
use crate::greens::GreensTrace;
use crate::imaging::IndicatorMap;
use crate::regularize::PicardRow;

/// 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Row-major operator entries, one matrix row per line after a header.
pub fn operator_csv(op: &OperatorMatrix) -> String {
    let n = op.dim();
    let mut out = String::with_capacity(n * n * 25);
    let header: Vec<String> = (0..n).map(|j| format!("c{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| fmt17(op.entries()[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses [`operator_csv`] output back into a square matrix.
pub fn parse_operator_csv(text: &str) -> Result<nalgebra::DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    lines.next().ok_or_else(|| Error::domain("operator CSV is empty"))?;
    let rows: Vec<Vec<f64>> = lines
        .map(|l| {
            l.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::domain(format!("bad number `{v}` in operator CSV")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::domain("operator CSV is not square"));
    }
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorMetadata {
    pub n_points: usize,
    pub n_max: usize,
    pub medium: MediumConfig,
    pub delta: f64,
    pub seed: Option<u64>,
    pub rng: &'static str,
}

impl OperatorMetadata {
    pub fn new(op: &OperatorMatrix, n_max: usize, medium: MediumConfig) -> Self {
        Self {
            n_points: op.dim(),
            n_max,
            medium,
            delta: op.noise_level(),
            seed: op.seed(),
            rng: NOISE_RNG,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable record");
    s.push('\n');
    s
}

/// Rows `(phi_j, value)`.
pub fn trace_csv(angles: &[f64], trace: &GreensTrace) -> String {
    let mut out = String::from("phi,value\n");
    for (phi, v) in angles.iter().zip(&trace.values) {
        let _ = writeln!(out, "{},{}", fmt17(*phi), fmt17(*v));
    }
    out
}

pub fn picard_csv(rows: &[PicardRow]) -> String {
    let mut out = String::from("n,s_n,coef,partial_sum\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.n,
            fmt17(r.singular_value),
            fmt17(r.coefficient),
            fmt17(r.partial_sum)
        );
    }
    out
}

/// `x,y,value,flag` per grid point.
pub fn map_csv(map: &IndicatorMap) -> String {
    let mut out = String::from("x,y,value,flag\n");
    for ((p, v), f) in map.grid.points().iter().zip(&map.values).zip(&map.flagged) {
        let _ = writeln!(out, "{},{},{},{}", fmt17(p.x), fmt17(p.y), fmt17(*v), u8::from(*f));
    }
    out
}

/// Binary 8-bit PGM of a normalized map; pixels outside the sampling disk
/// are black.
pub fn map_pgm(map: &IndicatorMap) -> Result<Vec<u8>> {
    let res = map.grid.resolution();
    if res == 0 {
        return Err(Error::domain("map has no raster layout"));
    }
    let mut out = format!("P5\n{res} {res}\n255\n").into_bytes();
    let header = out.len();
    out.resize(header + res * res, 0);
    for (p, v) in map.grid.points().iter().zip(&map.values) {
        let level = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        out[header + p.iy * res + p.ix] = level;
    }
    Ok(out)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{assemble_operator, BoundaryGrid, KernelSpec};
    use crate::imaging::{ImagingGrid, Method};
    use crate::regularize::FilterSpec;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn fmt17_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn operator_csv_round_trip() {
        let medium = MediumConfig::uniform(0.4, 1.0, 1.0).unwrap();
        let op = assemble_operator(&medium, &BoundaryGrid::new(8).unwrap(), KernelSpec::default()).unwrap();
        let text = operator_csv(&op);
        assert!(text.starts_with("c0,c1,"));
        assert_eq!(text.lines().count(), 9);
        assert_eq!(&parse_operator_csv(&text).unwrap(), op.entries());
    }

    #[test]
    fn pgm_layout() {
        let grid = ImagingGrid::new(5, 0.95).unwrap();
        let n = grid.len();
        let map = IndicatorMap {
            grid,
            values: vec![1.0; n],
            flagged: vec![false; n],
            method: Method::Lsm,
            filter: FilterSpec::ttls(1).unwrap(),
            normalized: true,
            pole_skips: 0,
        };
        let pgm = map_pgm(&map).unwrap();
        let header = b"P5\n5 5\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(pgm.len(), header.len() + 25);
        // corners lie outside the disk, center inside
        assert_eq!(pgm[header.len()], 0);
        assert_eq!(pgm[header.len() + 12], 255);
    }
}
