//! Semi-analytic forward model on the unit disk.
//!
//! The medium is a concentric inclusion of radius `rho` carrying a Robin
//! transmission interface. For a boundary impedance datum `f` with Fourier
//! coefficients `f_n`, the potential is
//!
//! ```text
//! u = a_0 + b_0 ln r + sum_{n != 0} (a_n r^|n| + b_n r^-|n|) e^{in phi}   (rho < r < 1)
//! u = c_0 + sum_{n != 0} c_n r^|n| e^{in phi}                             (r < rho)
//! ```
//!
//! and each mode is fixed by three conditions: `sigma_out u_r + u = f` at
//! `r = 1`, trace continuity at `r = rho`, and the current jump
//! `sigma_out u_r(rho+) - sigma_in u_r(rho-) = gamma u(rho)`.
//! The response is linear in `f_n`, so each mode reduces to three factors
//! `(alpha_n, beta_n, omega_n)` with `a_n = alpha_n f_n` and so on.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator used for the noise matrix. Recorded in run manifests so that a
/// seed identifies one matrix regardless of platform.
pub const NOISE_RNG: &str = "ChaCha20Rng(rand_chacha 0.9, seed_from_u64) + Uniform[-1,1](rand 0.9), row-major draw";

const SINGULAR_CONDITION: f64 = 1e14;

/// Geometry and physics of the concentric disk problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumConfig {
    rho: f64,
    sigma_out: f64,
    sigma_in: f64,
    gamma: f64,
}

impl MediumConfig {
    pub fn new(rho: f64, sigma_out: f64, sigma_in: f64, gamma: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::domain(format!("rho must lie in (0, 1), got {rho}")));
        }
        if !(sigma_out > 0.0 && sigma_out.is_finite()) {
            return Err(Error::domain(format!("sigma_out must be positive, got {sigma_out}")));
        }
        if !(sigma_in > 0.0 && sigma_in.is_finite()) {
            return Err(Error::domain(format!("sigma_in must be positive, got {sigma_in}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::domain(format!("gamma must be nonnegative, got {gamma}")));
        }
        Ok(Self {
            rho,
            sigma_out,
            sigma_in,
            gamma,
        })
    }

    /// Single conductivity on both sides of the interface.
    pub fn uniform(rho: f64, sigma: f64, gamma: f64) -> Result<Self> {
        Self::new(rho, sigma, sigma, gamma)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma_out(&self) -> f64 {
        self.sigma_out
    }

    pub fn sigma_in(&self) -> f64 {
        self.sigma_in
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// True when the medium carries no interface at all (`M = M0`).
    pub fn is_transparent(&self) -> bool {
        self.gamma == 0.0 && self.sigma_in == self.sigma_out
    }
}

/// Mode-response factors: `a_n = alpha f_n`, `b_n = beta f_n`, `c_n = omega f_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoefficients {
    pub n: i64,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
}

/// `N` equispaced angles on `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGrid {
    angles: Vec<f64>,
}

impl BoundaryGrid {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::domain("boundary grid needs at least one point"));
        }
        let step = 2.0 * PI / n_points as f64;
        Ok(Self {
            angles: (0..n_points).map(|j| j as f64 * step).collect(),
        })
    }

    pub fn n_points(&self) -> usize {
        self.angles.len()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.angles.len() as f64
    }
}

/// Truncation of the kernel series to `|n| <= truncation_order`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelSpec {
    truncation_order: usize,
}

impl KernelSpec {
    pub fn new(truncation_order: usize) -> Result<Self> {
        if truncation_order == 0 {
            return Err(Error::domain("kernel truncation order must be at least 1"));
        }
        Ok(Self { truncation_order })
    }

    pub fn truncation_order(&self) -> usize {
        self.truncation_order
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            truncation_order: 10,
        }
    }
}

/// Discrete gap operator `A ~ M - M0`, possibly perturbed by noise.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<f64>,
    grid: BoundaryGrid,
    noise_level: f64,
    seed: Option<u64>,
}

impl OperatorMatrix {
    /// Wraps an arbitrary square matrix, e.g. for solver tests. The grid is
    /// the equispaced grid matching the dimension.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::domain(format!(
                "operator must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let grid = BoundaryGrid::new(entries.nrows())?;
        Ok(Self {
            entries,
            grid,
            noise_level: 0.0,
            seed: None,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn grid(&self) -> &BoundaryGrid {
        &self.grid
    }

    pub fn noise_level(&self) -> f64 {
        self.noise_level
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.amax()
    }

    /// Largest entry of `|A - A^T|`.
    pub fn symmetry_defect(&self) -> f64 {
        (&self.entries - self.entries.transpose()).amax()
    }

    /// Multiplies every entry by `c`; metadata is kept.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: &self.entries * c,
            ..self.clone()
        }
    }
}

/// Solves the 3x3 boundary-condition system of mode `n`.
///
/// The rows are scaled before the solve: continuity is divided by
/// `rho^|n|`, the jump row by `rho^(|n|-1)`, and `b_n` is carried as
/// `b_n = rho^(2|n|) * bhat`. This keeps the system well conditioned for
/// large `|n|` without changing its solution.
pub fn solve_mode(n: i64, medium: &MediumConfig) -> Result<ModeCoefficients> {
    let m = n.unsigned_abs() as f64;
    let rho = medium.rho;
    let so = medium.sigma_out;
    let si = medium.sigma_in;
    let gamma = medium.gamma;

    let (matrix, b_scale) = if n == 0 {
        (
            Matrix3::new(
                1.0, so, 0.0, //
                1.0, rho.ln(), -1.0, //
                0.0, so / rho, -gamma,
            ),
            1.0,
        )
    } else {
        let r2m = rho.powf(2.0 * m);
        (
            Matrix3::new(
                so * m + 1.0, (1.0 - so * m) * r2m, 0.0, //
                1.0, 1.0, -1.0, //
                so * m, -so * m, -(si * m + gamma * rho),
            ),
            r2m,
        )
    };

    // row equilibration leaves the solution unchanged
    let mut matrix = matrix;
    let rhs_scale = matrix.row(0).amax();
    for mut row in matrix.row_iter_mut() {
        let scale = row.amax();
        if scale > 0.0 {
            row /= scale;
        }
    }
    let sv = matrix.singular_values();
    let condition = sv.max() / sv.min();
    if condition.is_nan() || condition > SINGULAR_CONDITION {
        return Err(Error::DegenerateMode { mode: n, condition });
    }
    let sol = matrix
        .lu()
        .solve(&Vector3::new(1.0 / rhs_scale, 0.0, 0.0))
        .ok_or(Error::DegenerateMode { mode: n, condition })?;

    Ok(ModeCoefficients {
        n,
        alpha: sol[0],
        beta: sol[1] * b_scale,
        omega: sol[2],
    })
}

/// Fourier coefficient of the gap kernel: `alpha_0 - 1` for `n = 0` and
/// `alpha_n + beta_n - 1/(sigma_out |n| + 1)` otherwise.
pub fn kernel_coefficient(n: i64, medium: &MediumConfig) -> Result<f64> {
    let mode = solve_mode(n, medium)?;
    if n == 0 {
        Ok(mode.alpha - 1.0)
    } else {
        let m = n.unsigned_abs() as f64;
        Ok(mode.alpha + mode.beta - 1.0 / (medium.sigma_out * m + 1.0))
    }
}

/// Kernel coefficients for `n = 0..=n_max`.
pub fn kernel_coefficients(medium: &MediumConfig, kernel: KernelSpec) -> Result<Vec<f64>> {
    (0..=kernel.truncation_order as i64)
        .map(|n| kernel_coefficient(n, medium))
        .collect()
}

/// Nystrom discretization of the gap operator with trapezoid weights.
///
/// `A[i][j] = (1/N) (k_0 + 2 sum_{n=1}^{n_max} k_n cos(n (phi_i - phi_j)))`.
pub fn assemble_operator(
    medium: &MediumConfig,
    grid: &BoundaryGrid,
    kernel: KernelSpec,
) -> Result<OperatorMatrix> {
    let coeffs = kernel_coefficients(medium, kernel)?;
    let n = grid.n_points();
    let angles = grid.angles();
    let weight = 1.0 / n as f64;
    let entries = DMatrix::from_fn(n, n, |i, j| {
        let diff = angles[i] - angles[j];
        let series: f64 = coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(mode, k)| 2.0 * k * (mode as f64 * diff).cos())
            .sum();
        weight * (coeffs[0] + series)
    });
    Ok(OperatorMatrix {
        entries,
        grid: grid.clone(),
        noise_level: 0.0,
        seed: None,
    })
}

/// Multiplicative noise `A_ij (1 + delta E_ij)`, with `E` uniform on `[-1, 1]`
/// rescaled to unit spectral norm.
pub fn apply_noise(op: &OperatorMatrix, delta: f64, seed: u64) -> Result<OperatorMatrix> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("noise level must be nonnegative, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(OperatorMatrix {
            seed: Some(seed),
            ..op.clone()
        });
    }

    let n = op.dim();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-1.0, 1.0).expect("valid bounds");
    let mut noise = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            noise[(i, j)] = dist.sample(&mut rng);
        }
    }
    let norm = spectral_norm(&noise);
    if norm > 0.0 {
        noise /= norm;
    }

    let entries = op
        .entries
        .zip_map(&noise, |a, e| a * (1.0 + delta * e));

    let base = spectral_norm(&op.entries);
    if base > 0.0 {
        let ratio = spectral_norm(&(&entries - &op.entries)) / base;
        if ratio > delta * (1.0 + 1e-12) {
            return Err(Error::NoiseBound { ratio, delta });
        }
    }

    Ok(OperatorMatrix {
        entries,
        grid: op.grid.clone(),
        noise_level: delta,
        seed: Some(seed),
    })
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Complex Fourier coefficients `f_n` for `|n| <= n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierData {
    coeffs: Vec<Complex64>,
    n_max: usize,
}

impl FourierData {
    /// `coeffs[k]` holds `f_{k - n_max}`.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::domain("Fourier data needs 2 n_max + 1 coefficients"));
        }
        let n_max = coeffs.len() / 2;
        Ok(Self { coeffs, n_max })
    }

    pub fn zeros(n_max: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * n_max + 1],
            n_max,
        }
    }

    pub fn single_mode(n: i64, n_max: usize, value: Complex64) -> Result<Self> {
        let mut data = Self::zeros(n_max);
        if n.unsigned_abs() as usize > n_max {
            return Err(Error::domain(format!("mode {n} exceeds n_max = {n_max}")));
        }
        data.set(n, value);
        Ok(data)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn get(&self, n: i64) -> Complex64 {
        let idx = n + self.n_max as i64;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[idx as usize]
    }

    pub fn set(&mut self, n: i64, value: Complex64) {
        let idx = (n + self.n_max as i64) as usize;
        self.coeffs[idx] = value;
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n_max = self.n_max as i64;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(k, c)| (k as i64 - n_max, *c))
    }

    /// `f(phi) = sum_n f_n e^{i n phi}`.
    pub fn evaluate(&self, phi: f64) -> Complex64 {
        self.modes()
            .map(|(n, c)| c * Complex64::from_polar(1.0, n as f64 * phi))
            .sum()
    }

    /// Boundary trace of the interface-free potential `u_0`.
    pub fn background_trace(&self, sigma: f64, phi: f64) -> Complex64 {
        self.modes()
            .map(|(n, c)| {
                let w = 1.0 / (sigma * n.unsigned_abs() as f64 + 1.0);
                c * w * Complex64::from_polar(1.0, n as f64 * phi)
            })
            .sum()
    }
}

/// Which side of the interface to evaluate at `r = rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Outer,
    Inner,
}

/// Truncated series solution for one boundary datum.
#[derive(Debug, Clone)]
pub struct SeriesSolution {
    medium: MediumConfig,
    // (n, a_n, b_n, c_n)
    modes: Vec<(i64, Complex64, Complex64, Complex64)>,
}

impl SeriesSolution {
    pub fn new(medium: &MediumConfig, f: &FourierData, kernel: KernelSpec) -> Result<Self> {
        let n_max = kernel.truncation_order.min(f.n_max()) as i64;
        let mut table = Vec::with_capacity(n_max as usize + 1);
        for m in 0..=n_max {
            table.push(solve_mode(m, medium)?);
        }
        let modes = (-n_max..=n_max)
            .map(|n| {
                let mc = table[n.unsigned_abs() as usize];
                let fnn = f.get(n);
                (n, fnn * mc.alpha, fnn * mc.beta, fnn * mc.omega)
            })
            .collect();
        Ok(Self {
            medium: *medium,
            modes,
        })
    }

    pub fn medium(&self) -> &MediumConfig {
        &self.medium
    }

    fn branch(&self, r: f64) -> Side {
        if r >= self.medium.rho {
            Side::Outer
        } else {
            Side::Inner
        }
    }

    pub fn potential(&self, r: f64, phi: f64) -> Complex64 {
        self.potential_on(self.branch(r), r, phi)
    }

    pub fn potential_on(&self, side: Side, r: f64, phi: f64) -> Complex64 {
        self.modes
            .iter()
            .map(|&(n, a, b, c)| {
                let m = n.unsigned_abs() as i32;
                let radial = match side {
                    Side::Outer if n == 0 => a + b * r.ln(),
                    Side::Outer => a * r.powi(m) + b * r.powi(-m),
                    Side::Inner => c * r.powi(m),
                };
                radial * Complex64::from_polar(1.0, n as f64 * phi)
            })
            .sum()
    }

    /// Analytic radial derivative of the series on the requested side.
    pub fn radial_derivative_on(&self, side: Side, r: f64, phi: f64) -> Complex64 {
        self.modes
            .iter()
            .map(|&(n, a, b, c)| {
                let m = n.unsigned_abs() as i32;
                let mf = m as f64;
                let radial = match side {
                    Side::Outer if n == 0 => b / r,
                    Side::Outer => a * mf * r.powi(m - 1) - b * mf * r.powi(-m - 1),
                    Side::Inner if n == 0 => Complex64::new(0.0, 0.0),
                    Side::Inner => c * mf * r.powi(m - 1),
                };
                radial * Complex64::from_polar(1.0, n as f64 * phi)
            })
            .sum()
    }

    /// Boundary trace `u(1, phi)`.
    pub fn trace(&self, phi: f64) -> Complex64 {
        self.potential_on(Side::Outer, 1.0, phi)
    }
}

/// Evaluates the truncated series for `u` at `(r, phi)`.
pub fn evaluate_potential(
    r: f64,
    phi: f64,
    medium: &MediumConfig,
    f: &FourierData,
    kernel: KernelSpec,
) -> Result<Complex64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::domain(format!("radius must lie in [0, 1], got {r}")));
    }
    Ok(SeriesSolution::new(medium, f, kernel)?.potential(r, phi))
}
