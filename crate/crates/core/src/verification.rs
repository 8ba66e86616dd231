//! Independent oracles for the test suite and the `--self-check` path.
//!
//! Nothing here shares code with the production mode solver or the SVD used
//! by the regularization module:
//!
//! * [`fd_forward_solve`] discretizes the transmission problem with second
//!   order finite differences on a polar mesh whose radial lines include
//!   `r = rho`. The 5-point system is circulant in the angle, so it is solved
//!   exactly by a DFT in `theta` followed by one banded radial solve per
//!   discrete wavenumber.
//! * [`symbolic_mode_solve`] applies Cramer's rule to the unscaled boundary
//!   rows, with compensated 2x2 determinants.
//! * [`direct_ttls`] forms the truncated-TLS closed form from a one-sided
//!   Jacobi SVD of `[A | b]`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::forward::{FourierData, MediumConfig, ModeCoefficients};

/// Polar mesh with `n_r` radial cells and `n_theta` angular cells.
///
/// The radial nodes are uniform on `[0, rho]` and on `[rho, 1]` separately,
/// so the interface is always a mesh line.
#[derive(Debug, Clone)]
pub struct PolarMesh {
    n_r: usize,
    n_theta: usize,
    interface: usize,
    radii: Vec<f64>,
}

impl PolarMesh {
    pub fn new(n_r: usize, n_theta: usize, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::domain(format!("interface radius must lie in (0, 1), got {rho}")));
        }
        if n_r < 6 || n_theta < 4 {
            return Err(Error::domain("polar mesh needs n_r >= 6 and n_theta >= 4"));
        }
        let interface = ((rho * n_r as f64).round() as usize).clamp(2, n_r - 3);
        let h_in = rho / interface as f64;
        let h_out = (1.0 - rho) / (n_r - interface) as f64;
        let mut radii: Vec<f64> = (0..=n_r)
            .map(|i| {
                if i <= interface {
                    i as f64 * h_in
                } else {
                    rho + (i - interface) as f64 * h_out
                }
            })
            .collect();
        radii[interface] = rho;
        radii[n_r] = 1.0;
        Ok(Self {
            n_r,
            n_theta,
            interface,
            radii,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    /// Whether `r = rho` is a mesh line; true by construction.
    pub fn aligned(&self) -> bool {
        self.radii[self.interface] == self.interface_radius()
    }

    pub fn interface_radius(&self) -> f64 {
        self.radii[self.interface]
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_theta)
            .map(|k| 2.0 * PI * k as f64 / self.n_theta as f64)
            .collect()
    }

    fn h_in(&self) -> f64 {
        self.radii[1]
    }

    fn h_out(&self) -> f64 {
        self.radii[self.n_r] - self.radii[self.n_r - 1]
    }
}

/// Boundary trace `u(1, theta_k)` of the finite-difference solution.
pub fn fd_forward_solve(medium: &MediumConfig, f: &FourierData, mesh: &PolarMesh) -> Result<Vec<Complex64>> {
    if (mesh.interface_radius() - medium.rho()).abs() > 1e-15 {
        return Err(Error::domain(format!(
            "mesh interface at r = {} does not match rho = {}",
            mesh.interface_radius(),
            medium.rho()
        )));
    }
    let n_theta = mesh.n_theta;
    let mut data: Vec<Complex64> = mesh.angles().iter().map(|t| f.evaluate(*t)).collect();

    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n_theta).process(&mut data);

    let dtheta = 2.0 * PI / n_theta as f64;
    let mut trace_hat = vec![Complex64::new(0.0, 0.0); n_theta];
    for (k, rhs) in data.iter().enumerate() {
        if rhs.norm() == 0.0 {
            continue;
        }
        let lambda = (2.0 - 2.0 * (k as f64 * dtheta).cos()) / (dtheta * dtheta);
        let u = radial_solve(medium, mesh, lambda, k == 0, *rhs)?;
        trace_hat[k] = u[mesh.n_r];
    }

    planner.plan_fft_inverse(n_theta).process(&mut trace_hat);
    let scale = 1.0 / n_theta as f64;
    Ok(trace_hat.into_iter().map(|v| v * scale).collect())
}

/// Radial system of one angular wavenumber with eigenvalue `lambda` of the
/// discrete `-d^2/dtheta^2`.
fn radial_solve(
    medium: &MediumConfig,
    mesh: &PolarMesh,
    lambda: f64,
    mean_mode: bool,
    boundary_rhs: Complex64,
) -> Result<Vec<Complex64>> {
    let n = mesh.n_r + 1;
    let iface = mesh.interface;
    let h_in = mesh.h_in();
    let h_out = mesh.h_out();
    let so = medium.sigma_out();
    let si = medium.sigma_in();

    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];

    // origin: the 5-point Laplacian averaged over angles gives u_0 = mean u_1;
    // non-constant modes vanish at a single-valued node
    a[(0, 0)] = 1.0;
    if mean_mode {
        a[(0, 1)] = -1.0;
    }

    for i in 1..mesh.n_r {
        if i == iface {
            continue;
        }
        let h = if i < iface { h_in } else { h_out };
        let r = mesh.radii[i];
        let rm = r - 0.5 * h;
        let rp = r + 0.5 * h;
        // scaled by r h^2
        a[(i, i - 1)] = rm;
        a[(i, i)] = -(rm + rp) - lambda * h * h / r;
        a[(i, i + 1)] = rp;
    }

    // sigma_out u_r(rho+) - sigma_in u_r(rho-) = gamma u(rho), one-sided second order
    let co = so / (2.0 * h_out);
    let ci = si / (2.0 * h_in);
    a[(iface, iface - 2)] = -ci;
    a[(iface, iface - 1)] = 4.0 * ci;
    a[(iface, iface)] = -3.0 * co - 3.0 * ci - medium.gamma();
    a[(iface, iface + 1)] = 4.0 * co;
    a[(iface, iface + 2)] = -co;

    // sigma_out u_r + u = f at r = 1
    let nb = mesh.n_r;
    a[(nb, nb - 2)] = co;
    a[(nb, nb - 1)] = -4.0 * co;
    a[(nb, nb)] = 3.0 * co + 1.0;
    rhs[nb] = boundary_rhs;

    banded_solve(a, rhs, 2)
}

/// Gaussian elimination with partial pivoting restricted to a band of
/// half-width `bw` (the upper band grows to `2 bw` through row swaps).
fn banded_solve(mut a: DMatrix<f64>, mut rhs: Vec<Complex64>, bw: usize) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    for col in 0..n {
        let last_row = (col + bw).min(n - 1);
        let last_col = (col + 2 * bw).min(n - 1);
        let pivot = (col..=last_row)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .unwrap_or(col);
        if a[(pivot, col)] == 0.0 {
            return Err(Error::LinearSolve(format!("zero pivot in column {col}")));
        }
        if pivot != col {
            a.swap_rows(pivot, col);
            rhs.swap(pivot, col);
        }
        let p = a[(col, col)];
        for row in col + 1..=last_row {
            let factor = a[(row, col)] / p;
            if factor == 0.0 {
                continue;
            }
            for c in col..=last_col {
                a[(row, c)] -= factor * a[(col, c)];
            }
            let r = rhs[col];
            rhs[row] -= r * factor;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let last_col = (row + 2 * bw).min(n - 1);
        let mut acc = rhs[row];
        for c in row + 1..=last_col {
            acc -= x[c] * a[(row, c)];
        }
        x[row] = acc / a[(row, row)];
    }
    Ok(x)
}

/// Relative discrete L2 distance between two sampled traces.
pub fn relative_l2(approx: &[Complex64], exact: &[Complex64]) -> f64 {
    let num: f64 = approx.iter().zip(exact).map(|(a, e)| (a - e).norm_sqr()).sum();
    let den: f64 = exact.iter().map(|e| e.norm_sqr()).sum();
    (num / den).sqrt()
}

/// `a d - b c` with one rounding error (Kahan).
fn det2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let w = b * c;
    let e = (-b).mul_add(c, w);
    let f = a.mul_add(d, -w);
    f + e
}

/// Mode factors by Cramer's rule on the boundary rows written out directly.
pub fn symbolic_mode_solve(n: i64, medium: &MediumConfig) -> Result<ModeCoefficients> {
    let rho = medium.rho();
    let so = medium.sigma_out();
    let si = medium.sigma_in();
    let g = medium.gamma();

    // rows: Robin at r = 1, continuity at rho, current jump at rho
    let m = [[0.0f64; 3]; 3];
    let mut m = m;
    if n == 0 {
        // u = a + b ln r outside, c inside
        m[0] = [1.0, so, 0.0];
        m[1] = [1.0, rho.ln(), -1.0];
        m[2] = [0.0, so / rho, -g];
    } else {
        let k = n.unsigned_abs() as i32;
        let kf = k as f64;
        m[0] = [so * kf + 1.0, 1.0 - so * kf, 0.0];
        m[1] = [rho.powi(k), rho.powi(-k), -rho.powi(k)];
        m[2] = [
            so * kf * rho.powi(k - 1),
            -so * kf * rho.powi(-k - 1),
            -(si * kf * rho.powi(k - 1) + g * rho.powi(k)),
        ];
    }

    let c11 = det2(m[1][1], m[1][2], m[2][1], m[2][2]);
    let c12 = -det2(m[1][0], m[1][2], m[2][0], m[2][2]);
    let c13 = det2(m[1][0], m[1][1], m[2][0], m[2][1]);
    let det = m[0][0] * c11 + m[0][1] * c12 + m[0][2] * c13;
    // row and column scalings only rescale the Cramer ratios, so only an
    // exactly singular or overflowed determinant is rejected
    if det == 0.0 || !det.is_finite() {
        return Err(Error::DegenerateMode {
            mode: n,
            condition: f64::INFINITY,
        });
    }
    // right-hand side (1, 0, 0): x_j = C_1j / det
    Ok(ModeCoefficients {
        n,
        alpha: c11 / det,
        beta: c12 / det,
        omega: c13 / det,
    })
}

/// One-sided Jacobi SVD. Returns singular values (descending) and the
/// matching right singular vectors as columns.
fn jacobi_svd(mut g: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = g.ncols();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = g.column(p).norm_squared();
                let beta = g.column(q).norm_squared();
                let gamma = g.column(p).dot(&g.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut g, &mut v] {
                    for row in 0..mat.nrows() {
                        let x = mat[(row, p)];
                        let y = mat[(row, q)];
                        mat[(row, p)] = c * x - s * y;
                        mat[(row, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| g.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let values = order.iter().map(|&i| norms[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vecs)
}

/// Truncated TLS solution keeping `k` components, from the SVD of `[A | b]`.
pub fn direct_ttls(a: &DMatrix<f64>, b: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
    let (rows, n) = a.shape();
    if b.len() != rows {
        return Err(Error::domain("right-hand side length does not match operator"));
    }
    if k == 0 || k > n {
        return Err(Error::domain(format!("TTLS index must satisfy 1 <= k <= {n}, got {k}")));
    }
    let mut c = DMatrix::zeros(rows.max(n + 1), n + 1);
    c.view_mut((0, 0), (rows, n)).copy_from(a);
    c.view_mut((0, n), (rows, 1)).copy_from(b);

    let (_, vbar) = jacobi_svd(c);
    let tail: Vec<f64> = (k..=n).map(|col| vbar[(n, col)]).collect();
    let tail_sq: f64 = tail.iter().map(|t| t * t).sum();
    if tail_sq <= 1e-28 {
        return Err(Error::NonGenericTls { k });
    }
    let mut x = DVector::zeros(n);
    for (offset, w) in tail.iter().enumerate() {
        let col = k + offset;
        for row in 0..n {
            x[row] -= vbar[(row, col)] * w / tail_sq;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mesh_is_aligned() {
        for (n_r, rho) in [(64, 0.4), (256, 0.4), (100, 0.1), (33, 0.77)] {
            let mesh = PolarMesh::new(n_r, 16, rho).unwrap();
            assert!(mesh.aligned());
            assert_eq!(mesh.interface_radius(), rho);
            assert!(mesh.radii.windows(2).all(|w| w[1] > w[0]));
        }
        assert!(PolarMesh::new(4, 16, 0.4).is_err());
    }

    #[test]
    fn symbolic_mode_zero_hand_solve() {
        let medium = MediumConfig::uniform(0.4, 1.0, 0.0).unwrap();
        let m = symbolic_mode_solve(0, &medium).unwrap();
        assert_relative_eq!(m.alpha, 1.0, epsilon = 1e-15);
        assert_eq!(m.beta, 0.0);
        assert_relative_eq!(m.omega, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn symbolic_is_continuous_in_gamma() {
        let m0 = symbolic_mode_solve(3, &MediumConfig::uniform(0.4, 1.0, 0.0).unwrap()).unwrap();
        let m1 = symbolic_mode_solve(3, &MediumConfig::uniform(0.4, 1.0, 1e-10).unwrap()).unwrap();
        assert!((m0.alpha - m1.alpha).abs() < 1e-8);
        assert!((m0.beta - m1.beta).abs() < 1e-8);
        assert!((m0.omega - m1.omega).abs() < 1e-8);
    }

    #[test]
    fn jacobi_svd_of_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let (s, v) = jacobi_svd(d);
        assert_eq!(s, vec![3.0, 2.0, 1.0]);
        assert_eq!(v[(1, 0)].abs(), 1.0);
    }

    #[test]
    fn ttls_full_rank_is_exact_solve() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = &a * &x;
        let sol = direct_ttls(&a, &b, 3).unwrap();
        assert!((sol - x).amax() < 1e-12);
    }

    #[test]
    fn ttls_zero_rhs() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let sol = direct_ttls(&a, &DVector::zeros(3), 2).unwrap();
        assert!(sol.amax() < 1e-15);
    }

    #[test]
    fn banded_solver_matches_dense() {
        let n = 9;
        let a = DMatrix::from_fn(n, n, |i, j| {
            let d = i as i64 - j as i64;
            if d.abs() > 2 {
                0.0
            } else {
                ((i * 3 + j * 5) % 7) as f64 - 3.0 + if d == 0 { 0.5 } else { 0.0 }
            }
        });
        let rhs: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let x = banded_solve(a.clone(), rhs.clone(), 2).unwrap();
        let re = a.clone().lu().solve(&DVector::from_iterator(n, rhs.iter().map(|c| c.re))).unwrap();
        let im = a.lu().solve(&DVector::from_iterator(n, rhs.iter().map(|c| c.im))).unwrap();
        for i in 0..n {
            assert!((x[i].re - re[i]).abs() < 1e-10);
            assert!((x[i].im - im[i]).abs() < 1e-10);
        }
    }
}
