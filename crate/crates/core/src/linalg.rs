//! Dense kernels shared by the solvers: restricted least squares with a
//! minimum-norm solution, projection residuals and Gram-matrix diagnostics.
//!
//! Every factorization goes through a singular value decomposition of the
//! column submatrix `X_J`. A singular value counts as zero when it falls
//! below `max(rows, cols) * eps * s_max`.

use nalgebra::{DMatrix, DVector, DVectorView, SymmetricEigen, SVD};
use serde::Serialize;

use crate::error::{Error, Result};

/// Dense `n x p` design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
    column_norm_tol: f64,
}

impl DesignMatrix {
    pub const DEFAULT_COLUMN_NORM_TOL: f64 = 1e-8;

    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::invalid("design matrix needs n >= 1 and p >= 1"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("design matrix has non-finite entries"));
        }
        Ok(Self {
            entries,
            column_norm_tol: Self::DEFAULT_COLUMN_NORM_TOL,
        })
    }

    /// Builds a matrix and asserts every column has unit Euclidean norm.
    pub fn with_unit_columns(entries: DMatrix<f64>) -> Result<Self> {
        let x = Self::new(entries)?;
        x.require_unit_columns()?;
        Ok(x)
    }

    /// Scales every column to unit norm. Zero columns are rejected.
    pub fn normalized(mut entries: DMatrix<f64>) -> Result<Self> {
        for mut col in entries.column_iter_mut() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::invalid("cannot normalize a zero column"));
            }
            col /= norm;
        }
        Self::new(entries)
    }

    pub fn from_row_slice(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                what: "matrix data",
                expected: n * p,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, p, data))
    }

    pub fn with_column_norm_tol(mut self, tol: f64) -> Self {
        self.column_norm_tol = tol;
        self
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.entries.column(j)
    }

    pub fn column_norm_tol(&self) -> f64 {
        self.column_norm_tol
    }

    pub fn has_unit_columns(&self) -> bool {
        self.entries
            .column_iter()
            .all(|c| (c.norm() - 1.0).abs() <= self.column_norm_tol)
    }

    pub fn require_unit_columns(&self) -> Result<()> {
        for (j, c) in self.entries.column_iter().enumerate() {
            let norm = c.norm();
            if (norm - 1.0).abs() > self.column_norm_tol {
                return Err(Error::invalid(format!(
                    "column {j} has norm {norm}, expected 1 within {}",
                    self.column_norm_tol
                )));
            }
        }
        Ok(())
    }

    /// Columns of `support`, in support order.
    pub fn select(&self, support: &SupportSet) -> DMatrix<f64> {
        self.entries.select_columns(support.indices())
    }

    /// `X^T v`.
    pub fn correlate(&self, v: &DVector<f64>) -> DVector<f64> {
        self.entries.tr_mul(v)
    }

    pub(crate) fn check_rows(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.nrows() {
            return Err(Error::DimensionMismatch {
                what: "observation vector",
                expected: self.nrows(),
                found: y.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_support(&self, support: &SupportSet) -> Result<()> {
        match support.indices().iter().find(|&&j| j >= self.ncols()) {
            Some(&j) => Err(Error::invalid(format!(
                "support index {j} out of range for {} columns",
                self.ncols()
            ))),
            None => Ok(()),
        }
    }
}

/// Ordered set of distinct column indices. Insertion order is kept, so the
/// OMP selection order survives.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let mut seen = indices.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("support indices must be distinct"));
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Indices where `|v_j| > tol * max(1, ||v||_inf)`, ascending.
    pub fn from_nonzeros(v: &DVector<f64>, tol: f64) -> Self {
        let scale = v.amax().max(1.0);
        Self(
            v.iter()
                .enumerate()
                .filter(|(_, x)| x.abs() > tol * scale)
                .map(|(j, _)| j)
                .collect(),
        )
    }

    pub fn push(&mut self, j: usize) -> Result<()> {
        if self.0.contains(&j) {
            return Err(Error::invalid(format!("index {j} already in support")));
        }
        self.0.push(j);
        Ok(())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.contains(&j)
    }

    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.0.clone();
        v.sort_unstable();
        v
    }

    /// Set equality, ignoring order.
    pub fn same_set(&self, other: &SupportSet) -> bool {
        self.len() == other.len() && self.sorted() == other.sorted()
    }

    /// Embeds `coefficients` (one per support entry) into a length-`p` vector.
    pub fn scatter(&self, coefficients: &DVector<f64>, p: usize) -> DVector<f64> {
        let mut out = DVector::zeros(p);
        for (&j, &c) in self.0.iter().zip(coefficients.iter()) {
            out[j] = c;
        }
        out
    }
}

impl From<SupportSet> for Vec<usize> {
    fn from(s: SupportSet) -> Self {
        s.0
    }
}

/// Numerical rank from singular values of a `rows x cols` matrix.
pub fn numerical_rank(singular_values: &[f64], rows: usize, cols: usize) -> usize {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let tol = rank_tolerance(rows, cols, smax);
    singular_values.iter().filter(|&&s| s > tol).count()
}

pub fn rank_tolerance(rows: usize, cols: usize, smax: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * smax
}

/// Rank of the column submatrix `X_J` under the shared rank rule.
pub fn support_rank(x: &DesignMatrix, support: &SupportSet) -> Result<usize> {
    x.check_support(support)?;
    if support.is_empty() {
        return Ok(0);
    }
    let xj = x.select(support);
    let (rows, cols) = xj.shape();
    let sv = xj.singular_values();
    Ok(numerical_rank(sv.as_slice(), rows, cols))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    /// Minimum-norm coefficients, one per support entry.
    pub coefficients: DVector<f64>,
    pub residual_sq: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `(I - P_J) y`.
    pub residual: DVector<f64>,
    pub residual_sq: f64,
    pub rank: usize,
}

struct RestrictedSolve {
    coefficients: DVector<f64>,
    residual: DVector<f64>,
    rank: usize,
}

fn restricted_solve(x: &DesignMatrix, support: &SupportSet, y: &DVector<f64>) -> Result<RestrictedSolve> {
    x.check_rows(y)?;
    x.check_support(support)?;
    if support.is_empty() {
        return Ok(RestrictedSolve {
            coefficients: DVector::zeros(0),
            residual: y.clone(),
            rank: 0,
        });
    }
    let xj = x.select(support);
    let (rows, cols) = xj.shape();
    let svd = SVD::new(xj.clone(), true, true);
    let rank = numerical_rank(svd.singular_values.as_slice(), rows, cols);
    let smax = svd.singular_values.max();
    let tol = rank_tolerance(rows, cols, smax);
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("V^T requested");

    let mut coefficients = DVector::zeros(cols);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol && smax > 0.0 {
            let weight = u.column(i).dot(y) / s;
            coefficients.axpy(weight, &v_t.row(i).transpose(), 1.0);
        }
    }
    let residual = y - &xj * &coefficients;
    Ok(RestrictedSolve {
        coefficients,
        residual,
        rank,
    })
}

/// Minimum-norm solution of `min_a ||y - X_J a||_2` and its squared residual.
pub fn least_squares_min_norm(
    x: &DesignMatrix,
    support: &SupportSet,
    y: &DVector<f64>,
) -> Result<LeastSquares> {
    if support.is_empty() {
        return Err(Error::invalid("least squares needs a nonempty support"));
    }
    let s = restricted_solve(x, support, y)?;
    Ok(LeastSquares {
        residual_sq: s.residual.norm_squared(),
        coefficients: s.coefficients,
        rank: s.rank,
    })
}

/// `(I - P_J) y`. The empty support projects onto nothing.
pub fn projection_residual(x: &DesignMatrix, support: &SupportSet, y: &DVector<f64>) -> Result<Projection> {
    let s = restricted_solve(x, support, y)?;
    Ok(Projection {
        residual_sq: s.residual.norm_squared(),
        residual: s.residual,
        rank: s.rank,
    })
}

/// Quantities of `X_J` used by the l1 rate bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramDiagnostics {
    /// `||(X_J^T X_J)^{-1}||_{inf,inf}` (max absolute row sum).
    pub gram_inverse_inf_norm: f64,
    /// `c_j = sqrt(((X_J^T X_J)^{-1})_{jj})`.
    pub diag_sqrt: Vec<f64>,
    pub min_eigenvalue: f64,
    /// `||X_J^+||_{2,1}`, the l2 -> l1 operator norm.
    pub pseudo_inverse_21_norm: f64,
    /// False when `|J|` was too large for the sign enumeration and
    /// `pseudo_inverse_21_norm` holds the upper bound `sqrt(|J|) ||X_J^+||_{2,2}`.
    pub pseudo_inverse_21_exact: bool,
    /// `||X_J^+||_{2,2} = 1 / sigma_min(X_J)`.
    pub pseudo_inverse_22_norm: f64,
}

impl GramDiagnostics {
    /// `d_j = ||Gram^{-1}||_{inf,inf} / c_j`.
    pub fn d_seq(&self) -> Vec<f64> {
        self.diag_sqrt
            .iter()
            .map(|c| self.gram_inverse_inf_norm / c)
            .collect()
    }

    /// `d_j = ||X_J^+||_{2,2} / c_j`, the variant used for l1-error.
    pub fn d_seq_spectral(&self) -> Vec<f64> {
        self.diag_sqrt
            .iter()
            .map(|c| self.pseudo_inverse_22_norm / c)
            .collect()
    }
}

const MAX_EXACT_21_COLUMNS: usize = 20;

pub fn gram_diagnostics(x: &DesignMatrix, support: &SupportSet) -> Result<GramDiagnostics> {
    x.check_support(support)?;
    if support.is_empty() {
        return Err(Error::invalid("Gram diagnostics need a nonempty support"));
    }
    let xj = x.select(support);
    let (rows, cols) = xj.shape();
    let svd = SVD::new(xj.clone(), true, true);
    let rank = numerical_rank(svd.singular_values.as_slice(), rows, cols);
    if rank < cols {
        return Err(Error::RankDeficient { rank, columns: cols });
    }
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("V^T requested");
    let sigma = &svd.singular_values;

    // pinv = V S^-1 U^T, gram_inv = V S^-2 V^T
    let v = v_t.transpose();
    let inv_s = DMatrix::from_diagonal(&sigma.map(|s| 1.0 / s));
    let pinv = &v * &inv_s * u.transpose();
    let gram_inv = &v * &inv_s * &inv_s * v_t;

    let gram_inverse_inf_norm = gram_inv
        .row_iter()
        .map(|r| r.iter().map(|a| a.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let diag_sqrt = gram_inv.diagonal().iter().map(|d| d.sqrt()).collect();

    let gram = xj.tr_mul(&xj);
    let min_eigenvalue = SymmetricEigen::new(gram).eigenvalues.min();

    let pseudo_inverse_22_norm = 1.0 / sigma.min();
    let (pseudo_inverse_21_norm, pseudo_inverse_21_exact) = if cols <= MAX_EXACT_21_COLUMNS {
        (norm_2_to_1(&pinv), true)
    } else {
        ((cols as f64).sqrt() * pseudo_inverse_22_norm, false)
    };

    Ok(GramDiagnostics {
        gram_inverse_inf_norm,
        diag_sqrt,
        min_eigenvalue,
        pseudo_inverse_21_norm,
        pseudo_inverse_21_exact,
        pseudo_inverse_22_norm,
    })
}

/// `max_{||v||_2 = 1} ||A v||_1 = max_{s in {-1,1}^m} ||A^T s||_2` for an
/// `m x n` matrix, by enumerating sign vectors (first sign fixed).
fn norm_2_to_1(a: &DMatrix<f64>) -> f64 {
    let m = a.nrows();
    let mut best: f64 = 0.0;
    let mut acc = DVector::zeros(a.ncols());
    for mask in 0u64..(1u64 << (m - 1)) {
        acc.fill(0.0);
        for i in 0..m {
            let sign = if i > 0 && mask & (1 << (i - 1)) != 0 { -1.0 } else { 1.0 };
            acc.axpy(sign, &a.row(i).transpose(), 1.0);
        }
        best = best.max(acc.norm());
    }
    best
}
