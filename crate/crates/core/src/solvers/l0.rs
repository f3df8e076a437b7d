//! Exhaustive l0-penalized subset search.
//!
//! Subsets are visited level by level (cardinality 0, 1, ...), in
//! lexicographic order inside a level. Residuals come from a Cholesky factor
//! of the Gram matrix that is extended one column per tree edge, so a leaf
//! costs O(k^2). Nodes whose new pivot collapses fall back to the SVD
//! projection from `linalg`, which handles rank-deficient `X_J`.

use nalgebra::DVector;

use super::{check_positive, RecoveryResult};
use crate::error::{Error, Result};
use crate::linalg::{least_squares_min_norm, projection_residual, DesignMatrix, SupportSet};
use crate::qualifiers::subsets_up_to;
use crate::tuning::{gamma_value, TuningRule};

pub const L0_SUBSET_LIMIT: f64 = 1e7;

/// Relative pivot below which a node is handed to the SVD path.
const PIVOT_TOL: f64 = 1e-8;

struct Gram {
    p: usize,
    /// Row-major `X^T X`.
    g: Vec<f64>,
    /// `X^T y`.
    c: Vec<f64>,
    yy: f64,
}

impl Gram {
    fn new(x: &DesignMatrix, y: &DVector<f64>) -> Self {
        let g = x.entries().tr_mul(x.entries());
        let p = x.ncols();
        Self {
            p,
            g: g.transpose().as_slice().to_vec(),
            c: x.correlate(y).as_slice().to_vec(),
            yy: y.norm_squared(),
        }
    }
}

struct Best {
    objective: f64,
    support: Vec<usize>,
}

struct Level<'a> {
    x: &'a DesignMatrix,
    y: &'a DVector<f64>,
    gram: &'a Gram,
    k: usize,
    penalty: f64,
    idx: Vec<usize>,
    /// `k x k` lower-triangular factor, row-major.
    l: Vec<f64>,
    z: Vec<f64>,
    /// `zsq[d] = ||z[..d]||^2`.
    zsq: Vec<f64>,
}

impl<'a> Level<'a> {
    fn new(x: &'a DesignMatrix, y: &'a DVector<f64>, gram: &'a Gram, k: usize, penalty: f64) -> Self {
        Self {
            x,
            y,
            gram,
            k,
            penalty,
            idx: vec![0; k],
            l: vec![0.0; k * k],
            z: vec![0.0; k],
            zsq: vec![0.0; k + 1],
        }
    }

    fn descend(&mut self, depth: usize, start: usize, degenerate: bool, best: &mut Best) -> Result<()> {
        let (k, p) = (self.k, self.gram.p);
        for j in start..=(p - (k - depth)) {
            self.idx[depth] = j;
            let mut node_degenerate = degenerate;
            if !degenerate {
                let g = &self.gram.g;
                let gjj = g[j * p + j];
                let (mut s, mut zl) = (0.0, 0.0);
                for i in 0..depth {
                    let mut v = g[self.idx[i] * p + j];
                    for m in 0..i {
                        v -= self.l[i * k + m] * self.l[depth * k + m];
                    }
                    v /= self.l[i * k + i];
                    self.l[depth * k + i] = v;
                    s += v * v;
                    zl += v * self.z[i];
                }
                let d2 = gjj - s;
                if d2 <= PIVOT_TOL * gjj || gjj <= 0.0 {
                    node_degenerate = true;
                } else {
                    let d = d2.sqrt();
                    self.l[depth * k + depth] = d;
                    let zj = (self.gram.c[j] - zl) / d;
                    self.z[depth] = zj;
                    self.zsq[depth + 1] = self.zsq[depth] + zj * zj;
                }
            }
            if depth + 1 < k {
                self.descend(depth + 1, j + 1, node_degenerate, best)?;
                continue;
            }
            let rss = if node_degenerate {
                let support = SupportSet::new(self.idx.clone())?;
                projection_residual(self.x, &support, self.y)?.residual_sq
            } else {
                (self.gram.yy - self.zsq[k]).max(0.0)
            };
            let objective = rss + self.penalty;
            if objective < best.objective {
                best.objective = objective;
                best.support.clone_from(&self.idx);
            }
        }
        Ok(())
    }
}

fn check_enumeration(x: &DesignMatrix, max_card: usize, levels: f64) -> Result<()> {
    let (n, p) = (x.nrows(), x.ncols());
    if max_card > n.min(p) {
        return Err(Error::invalid(format!(
            "cardinality {max_card} exceeds min(n, p) = {}",
            n.min(p)
        )));
    }
    if levels > L0_SUBSET_LIMIT {
        return Err(Error::EnumerationGuard {
            subsets: levels,
            limit: L0_SUBSET_LIMIT,
        });
    }
    Ok(())
}

fn finish(x: &DesignMatrix, y: &DVector<f64>, support: Vec<usize>, penalty: f64, visited: usize) -> Result<RecoveryResult> {
    let p = x.ncols();
    if support.is_empty() {
        return Ok(RecoveryResult::new(DVector::zeros(p), y.norm_squared(), visited));
    }
    let support = SupportSet::new(support)?;
    let ls = least_squares_min_norm(x, &support, y)?;
    let estimate = support.scatter(&ls.coefficients, p);
    Ok(RecoveryResult::new(estimate, ls.residual_sq + penalty, visited))
}

/// Minimizes `||(I - P_J) y||^2 + sigma^2 Gamma0(|J|) |J|` over `|J| <= max_card`.
///
/// Ties go to the smaller cardinality, then to the lexicographically first
/// support. `iterations` counts the levels searched.
pub fn solve_l0(
    x: &DesignMatrix,
    y: &DVector<f64>,
    sigma_sq: f64,
    rule: &TuningRule,
    max_card: usize,
) -> Result<RecoveryResult> {
    x.check_rows(y)?;
    check_positive(sigma_sq, "noise variance")?;
    let (n, p) = (x.nrows(), x.ncols());
    check_enumeration(x, max_card, subsets_up_to(p, max_card))?;

    let mut penalty = vec![0.0; max_card + 1];
    for (k, pen) in penalty.iter_mut().enumerate().skip(1) {
        *pen = sigma_sq * gamma_value(rule, n, p, k, sigma_sq)? * k as f64;
    }
    // suffix_min[k] = min over k' >= k of the penalty: no set of
    // cardinality >= k can beat the incumbent once this reaches it.
    let mut suffix_min = penalty.clone();
    for k in (0..max_card).rev() {
        suffix_min[k] = suffix_min[k].min(suffix_min[k + 1]);
    }

    let gram = Gram::new(x, y);
    let mut best = Best {
        objective: gram.yy,
        support: Vec::new(),
    };
    let mut levels = 1;
    for k in 1..=max_card {
        if suffix_min[k] >= best.objective {
            break;
        }
        Level::new(x, y, &gram, k, penalty[k]).descend(0, 0, false, &mut best)?;
        levels += 1;
    }
    let pen = penalty[best.support.len()];
    finish(x, y, best.support, pen, levels)
}

/// Best `k_star`-subset in residual norm: the l0 search with the sparsity known.
pub fn oracle_known_k(x: &DesignMatrix, y: &DVector<f64>, k_star: usize) -> Result<RecoveryResult> {
    x.check_rows(y)?;
    if k_star == 0 {
        return Err(Error::invalid("oracle needs k* >= 1"));
    }
    let p = x.ncols();
    check_enumeration(x, k_star, crate::qualifiers::subsets_between(p, k_star, k_star))?;
    let gram = Gram::new(x, y);
    let mut best = Best {
        objective: f64::INFINITY,
        support: Vec::new(),
    };
    Level::new(x, y, &gram, k_star, 0.0).descend(0, 0, false, &mut best)?;
    finish(x, y, best.support, 0.0, 1)
}
