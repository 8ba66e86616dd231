//! Filtered-SVD solvers for `A f = b`.
//!
//! Tikhonov and spectral cut-off act through scalar filter factors on the
//! singular values of `A`. Truncated total least squares (TTLS) uses the
//! SVD of the augmented matrix `[A | b]`: the solution itself comes from the
//! closed form, the filter representation is kept for RFM weighting and
//! diagnostics.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::forward::OperatorMatrix;

/// Singular values below `TRIM_RELATIVE * s_1` are dropped.
pub const TRIM_RELATIVE: f64 = 1e-15;

/// TTLS filter terms with `|sbar_m^2 - t^2| < POLE_GUARD * sbar_1^2` are skipped.
pub const POLE_GUARD: f64 = 1e-12;

/// Regularization scheme and its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSpec {
    Tikhonov { alpha: f64 },
    SpectralCutoff { alpha: f64 },
    /// Truncated TLS keeping `k` components.
    Ttls { k: usize },
}

impl FilterSpec {
    /// `alpha = 0` is accepted and means "no filtering".
    pub fn tikhonov(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(FilterSpec::Tikhonov { alpha })
    }

    pub fn spectral_cutoff(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(FilterSpec::SpectralCutoff { alpha })
    }

    pub fn ttls(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("TTLS truncation index must be at least 1"));
        }
        Ok(FilterSpec::Ttls { k })
    }

    pub fn scheme(&self) -> &'static str {
        match self {
            FilterSpec::Tikhonov { .. } => "tikhonov",
            FilterSpec::SpectralCutoff { .. } => "cutoff",
            FilterSpec::Ttls { .. } => "ttls",
        }
    }

    /// Checks the TTLS index against the operator dimension.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        if let FilterSpec::Ttls { k } = *self {
            if k > n {
                return Err(Error::domain(format!(
                    "TTLS index k = {k} must satisfy 1 <= k <= N = {n}"
                )));
            }
        }
        Ok(())
    }

    /// Rescales the parameter for the operator `c A`.
    pub fn rescaled(&self, c: f64) -> Self {
        match *self {
            FilterSpec::Tikhonov { alpha } => FilterSpec::Tikhonov { alpha: alpha * c * c },
            FilterSpec::SpectralCutoff { alpha } => FilterSpec::SpectralCutoff { alpha: alpha * c * c },
            ttls => ttls,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("regularization parameter must be >= 0, got {alpha}")))
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::Tikhonov { alpha } => write!(f, "tikhonov:{alpha:e}"),
            FilterSpec::SpectralCutoff { alpha } => write!(f, "cutoff:{alpha:e}"),
            FilterSpec::Ttls { k } => write!(f, "ttls:{k}"),
        }
    }
}

impl FromStr for FilterSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (scheme, param) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("filter `{s}` must look like scheme:parameter")))?;
        let param = param.trim();
        let real = || {
            param
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("bad filter parameter `{param}`")))
        };
        match scheme.trim().to_ascii_lowercase().as_str() {
            "tikhonov" | "tik" => FilterSpec::tikhonov(real()?),
            "cutoff" | "spectral_cutoff" | "spec" => FilterSpec::spectral_cutoff(real()?),
            "ttls" => {
                let k = param
                    .parse::<usize>()
                    .map_err(|_| Error::domain(format!("bad TTLS index `{param}`")))?;
                FilterSpec::ttls(k)
            }
            other => Err(Error::domain(format!("unknown filter scheme `{other}`"))),
        }
    }
}

impl Serialize for FilterSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Trimmed, descending SVD of an operator.
#[derive(Debug, Clone)]
pub struct SpectralSystem {
    singular_values: Vec<f64>,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    matrix: DMatrix<f64>,
}

impl SpectralSystem {
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Left singular vectors as columns.
    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.left
    }

    /// Right singular vectors as columns.
    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.right
    }

    /// The decomposed matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    /// Coefficients `<u_n, b>`.
    pub fn project(&self, b: &[f64]) -> DVector<f64> {
        self.left.tr_mul(&DVector::from_column_slice(b))
    }

    /// `f = sum_n (phi(s_n) / s_n) <u_n, b> v_n`.
    ///
    /// TTLS is evaluated through its filter representation here, which needs
    /// the augmented spectrum of `[A | b]`. Returns the solution and the
    /// number of pole-guarded terms.
    pub fn filtered_solve_with_filters(&self, b: &[f64], spec: FilterSpec) -> Result<(DVector<f64>, usize)> {
        self.check_rhs(b)?;
        if self.is_empty() {
            return Err(Error::ZeroOperator);
        }
        let coeffs = self.project(b);
        let (filters, skipped) = self.filter_factors(b, spec)?;
        let weights = DVector::from_iterator(
            self.rank(),
            self.singular_values
                .iter()
                .zip(filters.iter())
                .zip(coeffs.iter())
                .map(|((s, phi), c)| phi / s * c),
        );
        Ok((&self.right * weights, skipped))
    }

    /// Regularized solution. TTLS uses the closed form on `[A | b]`.
    pub fn filtered_solve(&self, b: &[f64], spec: FilterSpec) -> Result<DVector<f64>> {
        self.check_rhs(b)?;
        if self.is_empty() {
            return Err(Error::ZeroOperator);
        }
        match spec {
            FilterSpec::Ttls { k } => {
                spec.validate_for(self.dim())?;
                let aug = augmented_spectrum(&self.matrix, b)?;
                aug.ttls_solution(k)
            }
            _ => Ok(self.filtered_solve_with_filters(b, spec)?.0),
        }
    }

    /// Filter factors `phi(s_n)` for every retained singular value, and the
    /// number of pole-guarded TTLS terms.
    pub fn filter_factors(&self, b: &[f64], spec: FilterSpec) -> Result<(Vec<f64>, usize)> {
        match spec {
            FilterSpec::Ttls { k } => {
                spec.validate_for(self.dim())?;
                let aug = augmented_spectrum(&self.matrix, b)?;
                let mut skipped = 0;
                let mut out = Vec::with_capacity(self.rank());
                for &s in &self.singular_values {
                    let (v, sk) = aug.ttls_filter(k, s)?;
                    skipped += sk;
                    out.push(v);
                }
                Ok((out, skipped))
            }
            _ => Ok((
                self.singular_values
                    .iter()
                    .map(|&s| filter_value(spec, s, None))
                    .collect::<Result<_>>()?,
                0,
            )),
        }
    }

    fn check_rhs(&self, b: &[f64]) -> Result<()> {
        if b.len() != self.dim() {
            return Err(Error::domain(format!(
                "right-hand side has length {}, operator has dimension {}",
                b.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Trimmed SVD of `A`, singular values sorted in decreasing order.
pub fn decompose(op: &OperatorMatrix) -> Result<SpectralSystem> {
    decompose_matrix(op.entries())
}

pub fn decompose_matrix(a: &DMatrix<f64>) -> Result<SpectralSystem> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("operator has non-finite entries"));
    }
    let (n, m) = a.shape();
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let s1 = order.first().map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| s1 > 0.0 && svd.singular_values[i] >= TRIM_RELATIVE * s1)
        .collect();

    let mut left = DMatrix::zeros(n, kept.len());
    let mut right = DMatrix::zeros(m, kept.len());
    let mut singular_values = Vec::with_capacity(kept.len());
    for (col, &i) in kept.iter().enumerate() {
        singular_values.push(svd.singular_values[i]);
        left.set_column(col, &u.column(i));
        right.set_column(col, &vt.row(i).transpose());
    }
    Ok(SpectralSystem {
        singular_values,
        left,
        right,
        matrix: a.clone(),
    })
}

/// SVD data of the augmented matrix `[A | b]`.
#[derive(Debug, Clone)]
pub struct AugmentedSpectrum {
    /// `sbar_1 >= ... >= sbar_{N+1}`; the last one is zero for square `A`.
    pub singular_values: Vec<f64>,
    /// Last row of `Vbar`.
    pub v_last_row: Vec<f64>,
    right: DMatrix<f64>,
}

impl AugmentedSpectrum {
    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.right
    }

    fn tail_norm_sq(&self, k: usize) -> f64 {
        self.v_last_row[k..].iter().map(|v| v * v).sum()
    }

    /// TTLS filter factor at `t` with `k` retained components, and the number
    /// of terms skipped by the pole guard.
    pub fn ttls_filter(&self, k: usize, t: f64) -> Result<(f64, usize)> {
        let n_aug = self.singular_values.len();
        if k == 0 || k >= n_aug {
            return Err(Error::domain(format!(
                "TTLS index k = {k} must satisfy 1 <= k <= {}",
                n_aug - 1
            )));
        }
        let tail = self.tail_norm_sq(k);
        if tail == 0.0 {
            return Err(Error::NonGenericTls { k });
        }
        let guard = POLE_GUARD * self.singular_values[0].powi(2);
        let t2 = t * t;
        let mut value = 0.0;
        let mut skipped = 0;
        for m in 0..k {
            let gap = self.singular_values[m].powi(2) - t2;
            if gap.abs() < guard {
                skipped += 1;
                continue;
            }
            value += self.v_last_row[m].powi(2) / tail * t2 / gap;
        }
        Ok((value, skipped))
    }

    /// `x = -Vbar[0..N, k..] vbar_tail / |vbar_tail|^2`.
    pub fn ttls_solution(&self, k: usize) -> Result<DVector<f64>> {
        let n_aug = self.singular_values.len();
        if k == 0 || k >= n_aug {
            return Err(Error::domain(format!(
                "TTLS index k = {k} must satisfy 1 <= k <= {}",
                n_aug - 1
            )));
        }
        let tail = self.tail_norm_sq(k);
        if tail == 0.0 {
            return Err(Error::NonGenericTls { k });
        }
        let n = n_aug - 1;
        let mut x = DVector::zeros(n);
        for col in k..n_aug {
            let w = self.v_last_row[col];
            x.axpy(-w / tail, &self.right.view((0, col), (n, 1)).column(0), 1.0);
        }
        Ok(x)
    }
}

/// Full SVD of `[A | b]`, padded with a zero row so that all `N + 1` right
/// singular vectors are available.
pub fn augmented_spectrum(a: &DMatrix<f64>, b: &[f64]) -> Result<AugmentedSpectrum> {
    let (n, m) = a.shape();
    if b.len() != n {
        return Err(Error::domain("right-hand side length does not match operator"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::domain("augmented matrix has non-finite entries"));
    }
    let rows = n.max(m + 1);
    let mut c = DMatrix::zeros(rows, m + 1);
    c.view_mut((0, 0), (n, m)).copy_from(a);
    for (i, v) in b.iter().enumerate() {
        c[(i, m)] = *v;
    }
    let svd = c.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let mut right = DMatrix::zeros(m + 1, order.len());
    let mut singular_values = Vec::with_capacity(order.len());
    for (col, &i) in order.iter().enumerate() {
        singular_values.push(svd.singular_values[i]);
        right.set_column(col, &vt.row(i).transpose());
    }
    let v_last_row = right.row(m).iter().copied().collect();
    Ok(AugmentedSpectrum {
        singular_values,
        v_last_row,
        right,
    })
}

/// Filter factor `phi_alpha(t)`.
///
/// `aug` must be given for TTLS and is ignored otherwise. Pole-guarded TTLS
/// terms are dropped silently; use [`AugmentedSpectrum::ttls_filter`] to get
/// the count.
pub fn filter_value(spec: FilterSpec, t: f64, aug: Option<&AugmentedSpectrum>) -> Result<f64> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::domain(format!("filter argument must be positive, got {t}")));
    }
    match spec {
        FilterSpec::Tikhonov { alpha } => {
            let t2 = t * t;
            Ok(t2 / (t2 + alpha))
        }
        FilterSpec::SpectralCutoff { alpha } => Ok(if t * t >= alpha { 1.0 } else { 0.0 }),
        FilterSpec::Ttls { k } => {
            let aug = aug.ok_or_else(|| Error::domain("TTLS filter needs the augmented spectrum"))?;
            Ok(aug.ttls_filter(k, t)?.0)
        }
    }
}

/// Decomposes `A` and returns the regularized solution of `A f = b`.
pub fn filtered_solve(op: &OperatorMatrix, b: &[f64], spec: FilterSpec) -> Result<DVector<f64>> {
    decompose(op)?.filtered_solve(b, spec)
}

/// One line of a Picard diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardRow {
    pub n: usize,
    pub singular_value: f64,
    pub coefficient: f64,
    pub partial_sum: f64,
}

/// Partial sums of `sum_n |<u_n, b>|^2 / s_n` up to `m_max` terms.
pub fn picard_partial_sums(sys: &SpectralSystem, b: &[f64], m_max: usize) -> Result<Vec<PicardRow>> {
    sys.check_rhs(b)?;
    if m_max > sys.rank() {
        return Err(Error::domain(format!(
            "m_max = {m_max} exceeds the spectrum length {}",
            sys.rank()
        )));
    }
    let coeffs = sys.project(b);
    let mut acc = 0.0;
    Ok((0..m_max)
        .map(|i| {
            let s = sys.singular_values[i];
            let c = coeffs[i].abs();
            acc += c * c / s;
            PicardRow {
                n: i + 1,
                singular_value: s,
                coefficient: c,
                partial_sum: acc,
            }
        })
        .collect())
}
