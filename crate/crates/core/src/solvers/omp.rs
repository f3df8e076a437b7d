//! Orthogonal matching pursuit with known-sparsity, residual-power and
//! residual-correlation stopping rules.

use nalgebra::DVector;

use super::{check_positive, RecoveryResult};
use crate::error::{Error, Result};
use crate::linalg::{least_squares_min_norm, projection_residual, DesignMatrix, SupportSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopKind {
    /// Exactly `k` selections.
    KnownK(usize),
    /// Stop once `||r||_2 < sigma * gamma4`.
    Rpsc(f64),
    /// Stop once `||X^T r||_inf < sigma * gamma5`.
    Rcsc(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub kind: StopKind,
    pub max_iterations: usize,
}

impl StopRule {
    pub fn known_k(k: usize, max_iterations: usize) -> Self {
        Self {
            kind: StopKind::KnownK(k),
            max_iterations,
        }
    }

    pub fn rpsc(gamma4: f64, max_iterations: usize) -> Self {
        Self {
            kind: StopKind::Rpsc(gamma4),
            max_iterations,
        }
    }

    pub fn rcsc(gamma5: f64, max_iterations: usize) -> Self {
        Self {
            kind: StopKind::Rcsc(gamma5),
            max_iterations,
        }
    }

    fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.max_iterations == 0 || self.max_iterations > n.min(p) {
            return Err(Error::invalid(format!(
                "max_iterations must be in 1..={}, got {}",
                n.min(p),
                self.max_iterations
            )));
        }
        match self.kind {
            StopKind::KnownK(k) if k > self.max_iterations => Err(Error::invalid(format!(
                "k = {k} exceeds max_iterations = {}",
                self.max_iterations
            ))),
            StopKind::Rpsc(g) | StopKind::Rcsc(g) => check_positive(g, "stopping threshold Gamma"),
            _ => Ok(()),
        }
    }
}

fn partial_result(x: &DesignMatrix, y: &DVector<f64>, support: &SupportSet, trace: Vec<(usize, f64)>) -> Result<RecoveryResult> {
    let p = x.ncols();
    let (estimate, objective) = if support.is_empty() {
        (DVector::zeros(p), y.norm_squared())
    } else {
        let ls = least_squares_min_norm(x, support, y)?;
        (support.scatter(&ls.coefficients, p), ls.residual_sq)
    };
    let iterations = trace.len();
    Ok(RecoveryResult::new(estimate, objective, iterations).with_trace(trace))
}

/// Greedy selection of the column most correlated with the residual (ties to
/// the smallest index), re-projecting `y` on the selected set after each pick.
///
/// The stopping rule is also checked before the first selection, so a
/// residual already below threshold yields the empty support. `objective` is
/// the final squared residual norm.
pub fn omp(x: &DesignMatrix, y: &DVector<f64>, sigma: f64, stop: &StopRule) -> Result<RecoveryResult> {
    x.check_rows(y)?;
    x.require_unit_columns()?;
    check_positive(sigma, "sigma")?;
    let (n, p) = (x.nrows(), x.ncols());
    stop.validate(n, p)?;

    let mut support = SupportSet::empty();
    let mut residual = y.clone();
    let mut trace = Vec::new();
    loop {
        let corr = x.correlate(&residual);
        let i = support.len();
        let done = match stop.kind {
            StopKind::KnownK(k) => i == k,
            StopKind::Rpsc(g) => residual.norm() < sigma * g,
            StopKind::Rcsc(g) => corr.amax() < sigma * g,
        };
        if done || i == stop.max_iterations {
            break;
        }
        let mut pick = None;
        let mut best = f64::NEG_INFINITY;
        for (j, c) in corr.iter().enumerate() {
            if !support.contains(j) && c.abs() > best {
                best = c.abs();
                pick = Some(j);
            }
        }
        let t = pick.expect("max_iterations <= p leaves a column to pick");
        let previous = support.clone();
        support.push(t)?;
        let proj = projection_residual(x, &support, y)?;
        if proj.rank < support.len() {
            return Err(Error::DegenerateSelection {
                index: t,
                partial: Box::new(partial_result(x, y, &previous, trace)?),
            });
        }
        residual = proj.residual;
        trace.push((t, proj.residual_sq.sqrt()));
    }
    partial_result(x, y, &support, trace)
}
