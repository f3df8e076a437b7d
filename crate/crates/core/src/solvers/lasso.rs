//! l1-penalized least squares by cyclic coordinate descent, and the
//! l1-error (constrained) form solved along the Lagrangian path.

use nalgebra::DVector;

use super::{check_positive, soft_threshold, RecoveryResult};
use crate::error::{Error, Result};
use crate::linalg::DesignMatrix;

pub const DEFAULT_TOL_KKT: f64 = 1e-8;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;
pub const DEFAULT_TOL_RES: f64 = 1e-6;

const L1_ERROR_MAX_STEPS: usize = 200;

struct Lasso<'a> {
    /// Column-major `n x p` entries.
    a: &'a [f64],
    n: usize,
    p: usize,
    y: &'a DVector<f64>,
}

struct Fit {
    b: Vec<f64>,
    residual: Vec<f64>,
    sweeps: usize,
    kkt: f64,
    converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<'a> Lasso<'a> {
    fn new(x: &'a DesignMatrix, y: &'a DVector<f64>) -> Self {
        Self {
            a: x.entries().as_slice(),
            n: x.nrows(),
            p: x.ncols(),
            y,
        }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.a[j * self.n..(j + 1) * self.n]
    }

    fn residual_of(&self, b: &[f64]) -> Vec<f64> {
        let mut r = self.y.as_slice().to_vec();
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                for (ri, xi) in r.iter_mut().zip(self.col(j)) {
                    *ri -= bj * xi;
                }
            }
        }
        r
    }

    fn objective(&self, b: &[f64], r: &[f64], lambda: f64) -> f64 {
        0.5 * dot(r, r) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Largest violation of the stationarity conditions at `b`.
    fn kkt_residual(&self, b: &[f64], r: &[f64], lambda: f64) -> f64 {
        (0..self.p)
            .map(|j| {
                let g = dot(self.col(j), r);
                if b[j] != 0.0 {
                    (g - lambda * b[j].signum()).abs()
                } else {
                    (g.abs() - lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    fn solve(
        &self,
        lambda: f64,
        tol_kkt: f64,
        max_sweeps: usize,
        warm: Option<Vec<f64>>,
        mut objectives: Option<&mut Vec<f64>>,
    ) -> Fit {
        let mut b = warm.unwrap_or_else(|| vec![0.0; self.p]);
        let mut r = self.residual_of(&b);
        let mut kkt = self.kkt_residual(&b, &r, lambda);
        let mut sweeps = 0;
        while kkt > tol_kkt && sweeps < max_sweeps {
            for j in 0..self.p {
                let col = self.col(j);
                let old = b[j];
                let new = soft_threshold(old + dot(col, &r), lambda);
                if new != old {
                    let delta = new - old;
                    for (ri, xi) in r.iter_mut().zip(col) {
                        *ri -= delta * xi;
                    }
                    b[j] = new;
                }
            }
            sweeps += 1;
            // Refresh the residual so drift never masks the KKT check.
            r = self.residual_of(&b);
            kkt = self.kkt_residual(&b, &r, lambda);
            if let Some(obj) = objectives.as_deref_mut() {
                obj.push(self.objective(&b, &r, lambda));
            }
        }
        Fit {
            converged: kkt <= tol_kkt,
            b,
            residual: r,
            sweeps,
            kkt,
        }
    }

    fn result(&self, fit: &Fit, lambda: f64) -> RecoveryResult {
        RecoveryResult::new(
            DVector::from_column_slice(&fit.b),
            self.objective(&fit.b, &fit.residual, lambda),
            fit.sweeps,
        )
    }
}

fn penalty_fit(
    x: &DesignMatrix,
    y: &DVector<f64>,
    lambda: f64,
    tol_kkt: f64,
    max_sweeps: usize,
    objectives: Option<&mut Vec<f64>>,
) -> Result<RecoveryResult> {
    x.check_rows(y)?;
    x.require_unit_columns()?;
    check_positive(lambda, "penalty weight sigma * Gamma1")?;
    if !(tol_kkt >= 0.0) {
        return Err(Error::invalid("KKT tolerance must be nonnegative"));
    }
    let lasso = Lasso::new(x, y);
    let fit = lasso.solve(lambda, tol_kkt, max_sweeps, None, objectives);
    let result = lasso.result(&fit, lambda);
    if !fit.converged {
        return Err(Error::NotConverged {
            sweeps: fit.sweeps,
            kkt_residual: fit.kkt,
            best: Box::new(result),
        });
    }
    Ok(result)
}

/// Minimizes `1/2 ||y - X b||^2 + sigma Gamma1 ||b||_1`.
///
/// Stops once every coordinate satisfies the stationarity conditions to
/// within `tol_kkt`; columns must have unit norm. `iterations` is the number
/// of full sweeps.
pub fn solve_l1_penalty(
    x: &DesignMatrix,
    y: &DVector<f64>,
    sigma: f64,
    gamma1: f64,
    tol_kkt: f64,
    max_sweeps: usize,
) -> Result<RecoveryResult> {
    check_positive(sigma, "sigma")?;
    check_positive(gamma1, "Gamma1")?;
    penalty_fit(x, y, sigma * gamma1, tol_kkt, max_sweeps, None)
}

/// Minimizes `||b||_1` subject to `||y - X b||_2 <= sigma Gamma2`.
///
/// Searches the penalty weight `lambda` of the l1-penalized problem, whose
/// residual norm is nondecreasing in `lambda`, until the residual lands in
/// `[t (1 - tol_res), t]` with `t = sigma Gamma2`. The bracket is narrowed
/// by geometric bisection while wide, then by Illinois false position.
/// `objective` is the l1 norm of the estimate; `iterations` counts penalized
/// solves.
pub fn solve_l1_error(
    x: &DesignMatrix,
    y: &DVector<f64>,
    sigma: f64,
    gamma2: f64,
    tol_res: f64,
) -> Result<RecoveryResult> {
    x.check_rows(y)?;
    x.require_unit_columns()?;
    check_positive(sigma, "sigma")?;
    check_positive(gamma2, "Gamma2")?;
    check_positive(tol_res, "residual tolerance")?;
    let p = x.ncols();
    let target = sigma * gamma2;
    if y.norm() <= target {
        return Ok(RecoveryResult::new(DVector::zeros(p), 0.0, 0));
    }

    let lasso = Lasso::new(x, y);
    let lambda_max = x.correlate(y).amax();
    // Inner solves must resolve the residual well inside the acceptance band.
    let tol_kkt = (1e-3 * tol_res * target).clamp(1e-13, DEFAULT_TOL_KKT);
    let mut steps = 0;
    let solve_at = |lambda: f64, warm: Option<Vec<f64>>, steps: &mut usize| -> Result<Fit> {
        *steps += 1;
        let fit = lasso.solve(lambda, tol_kkt, DEFAULT_MAX_SWEEPS, warm, None);
        if !fit.converged {
            return Err(Error::BisectionFailed {
                iterations: *steps,
                reason: format!("inner solve at lambda = {lambda:e} did not converge"),
            });
        }
        Ok(fit)
    };
    let finish = |fit: &Fit, steps: usize| {
        let estimate = DVector::from_column_slice(&fit.b);
        let l1 = estimate.lp_norm(1);
        RecoveryResult::new(estimate, l1, steps)
    };
    let excess = |fit: &Fit| dot(&fit.residual, &fit.residual).sqrt() - target;
    let accept = |f: f64| f <= 0.0 && f >= -tol_res * target;

    // Walk down by decades until the residual drops to the target.
    let (mut hi, mut f_hi) = (lambda_max, y.norm() - target);
    let mut lo = lambda_max;
    let mut lo_fit = None;
    while lo_fit.is_none() {
        lo /= 10.0;
        if lo < lambda_max * 1e-12 {
            return Err(Error::BisectionFailed {
                iterations: steps,
                reason: format!("residual stays above sigma Gamma2 = {target:e} for every penalty weight"),
            });
        }
        let fit = solve_at(lo, None, &mut steps)?;
        let f = excess(&fit);
        if accept(f) {
            return Ok(finish(&fit, steps));
        }
        if f > 0.0 {
            hi = lo;
            f_hi = f;
        } else {
            lo_fit = Some(fit);
        }
    }
    let mut lo_fit = lo_fit.expect("loop exits with a feasible fit");
    let mut f_lo = excess(&lo_fit);
    let mut warm = lo_fit.b.clone();
    let mut side = 0i8;
    while steps < L1_ERROR_MAX_STEPS {
        let mut c = if hi / lo > 2.0 {
            (lo * hi).sqrt()
        } else {
            (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        };
        if !(c > lo && c < hi) {
            c = 0.5 * (lo + hi);
        }
        if c <= lo || c >= hi {
            break;
        }
        let fit = solve_at(c, Some(warm), &mut steps)?;
        let f = excess(&fit);
        warm = fit.b.clone();
        if accept(f) {
            return Ok(finish(&fit, steps));
        }
        if f > 0.0 {
            hi = c;
            f_hi = f;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = c;
            f_lo = f;
            lo_fit = fit;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::BisectionFailed {
        iterations: steps,
        reason: format!(
            "bracket [{lo:e}, {hi:e}] exhausted; best feasible residual {:e} vs target {target:e}",
            dot(&lo_fit.residual, &lo_fit.residual).sqrt()
        ),
    })
}

#[cfg(test)]
pub(crate) fn objective_trace(x: &DesignMatrix, y: &DVector<f64>, lambda: f64) -> Vec<f64> {
    let mut trace = Vec::new();
    let _ = penalty_fit(x, y, lambda, 1e-12, 10_000, Some(&mut trace));
    trace
}
