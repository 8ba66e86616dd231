//! Experiment driver: turns an [`ExperimentConfig`] into files on disk.
//!
//! Every command writes its artifacts into the configured output directory
//! together with a `manifest.json` that lists each artifact with its SHA-256
//! digest, echoes the configuration and records the noise generator.
//! Artifact bytes depend only on the configuration, so two runs with the same
//! inputs produce identical files; only the wall-clock entry of the manifest
//! differs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, SweepAxis};
use crate::error::{Error, Result};
use crate::export::{self, OperatorMetadata};
use crate::forward::{apply_noise, assemble_operator, BoundaryGrid, MediumConfig, OperatorMatrix, NOISE_RNG};
use crate::greens::robin_greens_trace;
use crate::imaging::{
    lsm_indicator_with, normalize_map, rfm_indicator, score, ImagingGrid, IndicatorMap, Method, ReconMetrics,
};
use crate::regularize::{decompose, picard_partial_sums, FilterSpec, SpectralSystem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: String,
    pub artifacts: Vec<Artifact>,
    pub crate_version: String,
    pub rng: String,
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// Manifest plus where it was written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct ArtifactWriter {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    warnings: Vec<String>,
    started: Instant,
}

impl ArtifactWriter {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            warnings: Vec::new(),
            started: Instant::now(),
        }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        export::write_file(&self.dir.join(name), bytes)?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn finish(self, command: &str, cfg: &ExperimentConfig) -> Result<RunOutcome> {
        let manifest = RunManifest {
            command: command.to_string(),
            config: cfg.to_config_string(),
            artifacts: self.artifacts,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            rng: NOISE_RNG.to_string(),
            warnings: self.warnings,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let manifest_path = self.dir.join("manifest.json");
        export::write_file(&manifest_path, export::to_json(&manifest).as_bytes())?;
        Ok(RunOutcome {
            manifest,
            manifest_path,
        })
    }
}

/// Reads `manifest.json` in `dir` and checks every listed digest.
///
/// Returns the paths whose current contents do not match.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| Error::domain(format!("malformed manifest: {e}")))?;
    let mut mismatched = Vec::new();
    for a in &manifest.artifacts {
        let p = dir.join(&a.path);
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        if sha256_hex(&bytes) != a.sha256 {
            mismatched.push(a.path.clone());
        }
    }
    Ok(mismatched)
}

/// Noise-perturbed gap operator for a configuration.
pub fn build_operator(cfg: &ExperimentConfig) -> Result<(OperatorMatrix, MediumConfig)> {
    cfg.validate()?;
    let medium = cfg.medium()?;
    let grid = BoundaryGrid::new(cfg.n_points)?;
    let clean = assemble_operator(&medium, &grid, cfg.kernel()?).map_err(|e| e.in_stage("forward"))?;
    let op = apply_noise(&clean, cfg.delta, cfg.seed).map_err(|e| e.in_stage("noise"))?;
    Ok((op, medium))
}

/// Writes `operator.csv` and `operator_meta.json`.
pub fn run_forward(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let (op, medium) = build_operator(cfg)?;
    let mut w = ArtifactWriter::new(&cfg.output_dir);
    if op.max_abs() == 0.0 {
        w.warnings
            .push("operator is identically zero: the inclusion is invisible from the boundary".into());
    }
    w.write("operator.csv", export::operator_csv(&op).as_bytes())?;
    let meta = OperatorMetadata::new(&op, cfg.truncation, medium);
    w.write("operator_meta.json", export::to_json(&meta).as_bytes())?;
    w.finish("forward", cfg)
}

fn require_points(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.points.is_empty() {
        Err(Error::Invalid("no sampling points given (set `points` or pass --z)".into()))
    } else {
        Ok(())
    }
}

/// Writes `greens_<i>.csv` for every configured sampling point.
pub fn run_greens(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    require_points(cfg)?;
    let grid = BoundaryGrid::new(cfg.n_points)?;
    let mut w = ArtifactWriter::new(&cfg.output_dir);
    for (i, z) in cfg.sampling_points()?.into_iter().enumerate() {
        let trace = robin_greens_trace(z, cfg.sigma_out, &grid).map_err(|e| e.in_stage("greens"))?;
        w.write(&format!("greens_{i}.csv"), export::trace_csv(grid.angles(), &trace).as_bytes())?;
    }
    w.finish("greens", cfg)
}

/// One reconstructed map with its score.
#[derive(Debug, Clone)]
pub struct MapResult {
    pub method: Method,
    pub filter: FilterSpec,
    pub raw: IndicatorMap,
    pub normalized: IndicatorMap,
    pub metrics: ReconMetrics,
}

/// Computes every configured (method, filter) map on the imaging grid.
pub fn compute_maps(
    cfg: &ExperimentConfig,
    op: &OperatorMatrix,
    medium: &MediumConfig,
    grid: &ImagingGrid,
) -> Result<Vec<MapResult>> {
    let sys = decompose(op).map_err(|e| e.in_stage("decompose"))?;
    let mut out = Vec::new();
    for &method in &cfg.methods {
        for &filter in cfg.filters_for(method) {
            out.push(map_for(&sys, cfg, medium, grid, method, filter)?);
        }
    }
    Ok(out)
}

fn map_for(
    sys: &SpectralSystem,
    cfg: &ExperimentConfig,
    medium: &MediumConfig,
    grid: &ImagingGrid,
    method: Method,
    filter: FilterSpec,
) -> Result<MapResult> {
    let raw = match method {
        Method::Lsm => lsm_indicator_with(sys, grid, cfg.sigma_out, filter),
        Method::Rfm => rfm_indicator(sys, grid, cfg.sigma_out, filter),
    }
    .map_err(|e| e.in_stage("imaging"))?;
    let normalized = normalize_map(&raw).map_err(|e| e.in_stage("imaging"))?;
    let metrics = score(&normalized, medium, cfg.tau)?;
    Ok(MapResult {
        method,
        filter,
        raw,
        normalized,
        metrics,
    })
}

#[derive(Serialize)]
struct MetricsRecord<'a> {
    method: Method,
    filter: FilterSpec,
    map: &'a str,
    pole_skips: usize,
    metrics: ReconMetrics,
}

/// Writes `map_<i>_<method>_<scheme>.{csv,pgm}` per configured map and a
/// combined `metrics.json`.
pub fn run_image(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate_image()?;
    let (op, medium) = build_operator(cfg)?;
    let grid = ImagingGrid::new(cfg.grid_resolution, cfg.r_max)?;
    let maps = compute_maps(cfg, &op, &medium, &grid)?;
    let mut w = ArtifactWriter::new(&cfg.output_dir);
    let names: Vec<String> = maps
        .iter()
        .enumerate()
        .map(|(i, m)| format!("map_{i}_{}_{}", m.method, m.filter.scheme()))
        .collect();
    for (m, name) in maps.iter().zip(&names) {
        w.write(&format!("{name}.csv"), export::map_csv(&m.normalized).as_bytes())?;
        w.write(&format!("{name}.pgm"), &export::map_pgm(&m.normalized)?)?;
        if m.normalized.flagged_count() > 0 {
            w.warnings.push(format!(
                "{name}: {} grid points flagged as non-generic",
                m.normalized.flagged_count()
            ));
        }
    }
    let records: Vec<MetricsRecord> = maps
        .iter()
        .zip(&names)
        .map(|(m, name)| MetricsRecord {
            method: m.method,
            filter: m.filter,
            map: name,
            pole_skips: m.raw.pole_skips,
            metrics: m.metrics,
        })
        .collect();
    w.write("metrics.json", export::to_json(&records).as_bytes())?;
    w.finish("image", cfg)
}

/// Writes `picard_<i>.csv` with the full Picard partial sums at each point.
pub fn run_picard(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    require_points(cfg)?;
    let (op, _) = build_operator(cfg)?;
    let sys = decompose(&op).map_err(|e| e.in_stage("decompose"))?;
    let grid = op.grid().clone();
    let mut w = ArtifactWriter::new(&cfg.output_dir);
    for (i, z) in cfg.sampling_points()?.into_iter().enumerate() {
        let b = robin_greens_trace(z, cfg.sigma_out, &grid)?;
        let rows = picard_partial_sums(&sys, &b.values, sys.rank()).map_err(|e| e.in_stage("picard"))?;
        w.write(&format!("picard_{i}.csv"), export::picard_csv(&rows).as_bytes())?;
    }
    w.finish("picard", cfg)
}

/// Configuration with one sweep value applied.
pub fn sweep_config(cfg: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::Delta => c.delta = value,
        SweepAxis::Rho => c.rho = value,
        SweepAxis::Alpha => {
            let with_alpha = |f: &FilterSpec| -> Result<FilterSpec> {
                match f {
                    FilterSpec::Tikhonov { .. } => FilterSpec::tikhonov(value),
                    FilterSpec::SpectralCutoff { .. } => FilterSpec::spectral_cutoff(value),
                    FilterSpec::Ttls { .. } => Ok(*f),
                }
            };
            c.lsm_filters = c.lsm_filters.iter().map(with_alpha).collect::<Result<_>>()?;
            c.rfm_filters = c.rfm_filters.iter().map(with_alpha).collect::<Result<_>>()?;
        }
    }
    Ok(c)
}

/// One line of `sweep.csv`.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub method: Option<Method>,
    pub filter: Option<FilterSpec>,
    pub outcome: std::result::Result<ReconMetrics, String>,
}

fn sweep_rows(cfg: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<Vec<SweepRow>> {
    let c = sweep_config(cfg, axis, value)?;
    c.validate_image()?;
    let (op, medium) = build_operator(&c)?;
    let sys = decompose(&op)?;
    let grid = ImagingGrid::new(c.grid_resolution, c.r_max)?;
    let mut rows = Vec::new();
    for &method in &c.methods {
        for &filter in c.filters_for(method) {
            // TTLS does not depend on alpha, so it is left out of alpha sweeps
            if axis == SweepAxis::Alpha && matches!(filter, FilterSpec::Ttls { .. }) {
                continue;
            }
            let outcome = map_for(&sys, &c, &medium, &grid, method, filter)
                .map(|m| m.metrics)
                .map_err(|e| e.to_string());
            rows.push(SweepRow {
                value,
                method: Some(method),
                filter: Some(filter),
                outcome,
            });
        }
    }
    Ok(rows)
}

/// Evaluates metrics along one parameter axis.
///
/// A failure at one value is recorded in its row and the sweep continues.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let axis = cfg
        .sweep_axis
        .ok_or_else(|| Error::Invalid("sweep_axis is not set".into()))?;
    if cfg.sweep_values.is_empty() {
        return Err(Error::Invalid("sweep_values is empty".into()));
    }
    let mut rows = Vec::new();
    for &value in &cfg.sweep_values {
        match sweep_rows(cfg, axis, value) {
            Ok(r) => rows.extend(r),
            Err(e) => rows.push(SweepRow {
                value,
                method: None,
                filter: None,
                outcome: Err(e.to_string()),
            }),
        }
    }
    Ok(rows)
}

pub fn sweep_csv(axis: SweepAxis, rows: &[SweepRow]) -> String {
    use std::fmt::Write as _;
    let mut out = format!("{axis},method,filter,contrast,jaccard,argmax_dist,transition_band,flagged,error\n");
    for r in rows {
        let method = r.method.map(|m| m.to_string()).unwrap_or_default();
        let filter = r.filter.map(|f| f.to_string()).unwrap_or_default();
        let _ = match &r.outcome {
            Ok(m) => writeln!(
                out,
                "{},{method},{filter},{},{},{},{},{},",
                export::fmt17(r.value),
                export::fmt17(m.contrast),
                export::fmt17(m.jaccard),
                export::fmt17(m.argmax_dist),
                export::fmt17(m.transition_band),
                m.flagged
            ),
            Err(e) => writeln!(
                out,
                "{},{method},{filter},,,,,,\"{}\"",
                export::fmt17(r.value),
                e.replace('"', "'")
            ),
        };
    }
    out
}

/// Writes `sweep.csv`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let rows = sweep(cfg)?;
    let axis = cfg.sweep_axis.expect("checked by sweep");
    let mut w = ArtifactWriter::new(&cfg.output_dir);
    let failures = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failures > 0 {
        w.warnings.push(format!("{failures} sweep rows failed; see the error column"));
    }
    w.write("sweep.csv", sweep_csv(axis, &rows).as_bytes())?;
    w.finish("sweep", cfg)
}

/// One self-check line: name, measured value, tolerance.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Fast smoke checks of the numerical core, independent of any config.
pub fn self_check() -> Result<Vec<CheckLine>> {
    use crate::greens::{greens_trace_series, SamplingPoint};
    use crate::verification::symbolic_mode_solve;

    let mut lines = Vec::new();
    let grid = BoundaryGrid::new(32)?;

    let transparent = MediumConfig::uniform(0.4, 1.0, 0.0)?;
    let zero = assemble_operator(&transparent, &grid, Default::default())?;
    lines.push(CheckLine {
        name: "transparent inclusion gives a zero operator",
        value: zero.max_abs(),
        tolerance: 1e-14,
    });

    let medium = MediumConfig::uniform(0.4, 1.0, 1.0)?;
    let mut worst: f64 = 0.0;
    for n in 0..=10 {
        let a = crate::forward::solve_mode(n, &medium)?;
        let b = symbolic_mode_solve(n, &medium)?;
        for (x, y) in [(a.alpha, b.alpha), (a.beta, b.beta), (a.omega, b.omega)] {
            worst = worst.max((x - y).abs() / y.abs().max(1e-300));
        }
    }
    lines.push(CheckLine {
        name: "mode solve agrees with Cramer's rule",
        value: worst,
        tolerance: 1e-12,
    });

    let z = SamplingPoint::new(0.4, 0.7)?;
    let quad = robin_greens_trace(z, 1.0, &grid)?;
    let series = greens_trace_series(z, 1.0, &grid, 60)?;
    let diff = quad
        .values
        .iter()
        .zip(&series.trace.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    lines.push(CheckLine {
        name: "Green's trace quadrature matches the series",
        value: diff,
        tolerance: 1e-8,
    });
    Ok(lines)
}
