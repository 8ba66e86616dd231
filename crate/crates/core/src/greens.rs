//! Boundary trace of the Robin Green's function of the unit disk.
//!
//! On `|x| = 1` the Dirichlet part vanishes and the trace reduces to
//! `(1/2pi) int_0^1 s^(1/sigma - 1) P(rho_z s, theta_z - phi) ds` with the
//! Poisson kernel `P`. The integrand is singular at `s = 0` for `sigma > 1`;
//! the substitution `s = tau^sigma` turns the integral into
//! `sigma int_0^1 P(rho_z tau^sigma, lambda) dtau`, which is smooth.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::BoundaryGrid;

/// Sampling points are kept at `rho_z <= DEFAULT_R_MAX` unless a caller asks
/// for another cap.
pub const DEFAULT_R_MAX: f64 = 0.95;

const QUADRATURE_NODES: usize = 64;

/// Poisson kernel `(1 - t^2) / (1 - 2 t cos(lambda) + t^2)`.
pub fn poisson_kernel(t: f64, lambda: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::domain(format!("Poisson kernel needs 0 <= t < 1, got {t}")));
    }
    Ok(poisson_unchecked(t, lambda))
}

#[inline]
fn poisson_unchecked(t: f64, lambda: f64) -> f64 {
    (1.0 - t * t) / (1.0 - 2.0 * t * lambda.cos() + t * t)
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton on P_n from the Tricomi initial guess
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn default_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(QUADRATURE_NODES))
}

/// Interior sampling point in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingPoint {
    rho_z: f64,
    theta_z: f64,
}

impl SamplingPoint {
    pub fn new(rho_z: f64, theta_z: f64) -> Result<Self> {
        Self::with_cap(rho_z, theta_z, DEFAULT_R_MAX)
    }

    pub fn with_cap(rho_z: f64, theta_z: f64, r_max: f64) -> Result<Self> {
        if !(r_max > 0.0 && r_max < 1.0) {
            return Err(Error::domain(format!("r_max must lie in (0, 1), got {r_max}")));
        }
        if !(rho_z >= 0.0 && rho_z <= r_max) {
            return Err(Error::domain(format!(
                "sampling radius must lie in [0, {r_max}], got {rho_z}"
            )));
        }
        if !theta_z.is_finite() {
            return Err(Error::domain("sampling angle must be finite"));
        }
        Ok(Self {
            rho_z,
            theta_z: theta_z.rem_euclid(2.0 * PI),
        })
    }

    pub fn from_cartesian(x: f64, y: f64, r_max: f64) -> Result<Self> {
        Self::with_cap(x.hypot(y), y.atan2(x), r_max)
    }

    pub fn rho_z(&self) -> f64 {
        self.rho_z
    }

    pub fn theta_z(&self) -> f64 {
        self.theta_z
    }
}

/// Right-hand side `b_z`: the Green's trace sampled on a boundary grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GreensTrace {
    pub values: Vec<f64>,
    pub point: SamplingPoint,
    pub sigma: f64,
}

impl GreensTrace {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("conductivity must be positive, got {sigma}")))
    }
}

/// Green's trace by 64-node Gauss-Legendre quadrature after `s = tau^sigma`.
pub fn robin_greens_trace(z: SamplingPoint, sigma: f64, grid: &BoundaryGrid) -> Result<GreensTrace> {
    check_sigma(sigma)?;
    let (nodes, weights) = default_rule();
    let radii: Vec<f64> = nodes.iter().map(|tau| z.rho_z * tau.powf(sigma)).collect();
    let scale = sigma / (2.0 * PI);
    let values = grid
        .angles()
        .iter()
        .map(|phi| {
            let lambda = z.theta_z - phi;
            let integral: f64 = radii
                .iter()
                .zip(weights)
                .map(|(t, w)| w * poisson_unchecked(*t, lambda))
                .sum();
            scale * integral
        })
        .collect();
    Ok(GreensTrace {
        values,
        point: z,
        sigma,
    })
}

/// Green's trace from the termwise-integrated Poisson series.
#[derive(Debug, Clone)]
pub struct SeriesTrace {
    pub trace: GreensTrace,
    /// Upper bound on the neglected tail, uniform in the angle.
    pub truncation_bound: f64,
}

/// `(1/2pi) sum_n sigma rho_z^|n| e^{in lambda} / (1 + sigma |n|)`, truncated at `n_max`.
pub fn greens_trace_series(
    z: SamplingPoint,
    sigma: f64,
    grid: &BoundaryGrid,
    n_max: usize,
) -> Result<SeriesTrace> {
    check_sigma(sigma)?;
    let rho = z.rho_z;
    let weights: Vec<f64> = (1..=n_max)
        .map(|n| sigma * rho.powi(n as i32) / (1.0 + sigma * n as f64))
        .collect();
    let values = grid
        .angles()
        .iter()
        .map(|phi| {
            let lambda = z.theta_z - phi;
            let tail: f64 = weights
                .iter()
                .enumerate()
                .map(|(k, w)| 2.0 * w * ((k + 1) as f64 * lambda).cos())
                .sum();
            (sigma + tail) / (2.0 * PI)
        })
        .collect();

    // sum_{n > n_max} sigma rho^n / (1 + sigma n) / pi, bounded by a geometric tail
    let next = (n_max + 1) as f64;
    let truncation_bound = if rho == 0.0 {
        0.0
    } else {
        sigma / (1.0 + sigma * next) * rho.powf(next) / (1.0 - rho) / PI
    };

    Ok(SeriesTrace {
        trace: GreensTrace {
            values,
            point: z,
            sigma,
        },
        truncation_bound,
    })
}
