//! Subset-selection procedures. Every solver returns a [`RecoveryResult`]
//! whose support is read off the estimate with [`SUPPORT_TOL`].

mod dantzig;
mod l0;
mod lasso;
mod omp;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{DesignMatrix, SupportSet};
use crate::tuning::{gamma_value, Target, TuningRule};

pub use dantzig::solve_dantzig_orthonormal;
pub use l0::{oracle_known_k, solve_l0, L0_SUBSET_LIMIT};
pub use lasso::{solve_l1_error, solve_l1_penalty, DEFAULT_MAX_SWEEPS, DEFAULT_TOL_KKT, DEFAULT_TOL_RES};
pub use omp::{omp, StopKind, StopRule};

/// Relative threshold for declaring an estimate entry nonzero.
pub const SUPPORT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult {
    #[serde(serialize_with = "serialize_vector")]
    pub estimate: DVector<f64>,
    pub support: SupportSet,
    pub objective: f64,
    pub iterations: usize,
    /// OMP only: `(selected column, residual norm after the update)`.
    pub trace: Option<Vec<(usize, f64)>>,
}

impl RecoveryResult {
    pub fn new(estimate: DVector<f64>, objective: f64, iterations: usize) -> Self {
        Self {
            support: SupportSet::from_nonzeros(&estimate, SUPPORT_TOL),
            estimate,
            objective,
            iterations,
            trace: None,
        }
    }

    pub fn with_trace(mut self, trace: Vec<(usize, f64)>) -> Self {
        self.trace = Some(trace);
        self
    }
}

fn serialize_vector<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

pub(crate) fn check_positive(value: f64, what: &str) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::invalid(format!("{what} must be positive and finite, got {value}")));
    }
    Ok(())
}

pub(crate) fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Algorithm tags shared by the CLI and the Monte Carlo engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    L0,
    /// Exhaustive search with the true sparsity known.
    Oracle,
    L1Penalty,
    L1Error,
    Dantzig,
    /// OMP run for exactly `k*` iterations.
    OmpK,
    OmpRpsc,
    OmpRcsc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::L0,
        Algorithm::Oracle,
        Algorithm::L1Penalty,
        Algorithm::L1Error,
        Algorithm::Dantzig,
        Algorithm::OmpK,
        Algorithm::OmpRpsc,
        Algorithm::OmpRcsc,
    ];

    pub fn needs_rule(&self) -> bool {
        !matches!(self, Algorithm::Oracle | Algorithm::OmpK)
    }

    pub fn target(&self) -> Option<Target> {
        Some(match self {
            Algorithm::L0 => Target::L0,
            Algorithm::L1Penalty => Target::L1Penalty,
            Algorithm::L1Error => Target::L1Error,
            Algorithm::Dantzig => Target::Dantzig,
            Algorithm::OmpRpsc => Target::OmpRpsc,
            Algorithm::OmpRcsc => Target::OmpRcsc,
            Algorithm::Oracle | Algorithm::OmpK => return None,
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim().to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.to_string() == t)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {text:?}")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::L0 => "l0",
            Algorithm::Oracle => "oracle",
            Algorithm::L1Penalty => "l1_penalty",
            Algorithm::L1Error => "l1_error",
            Algorithm::Dantzig => "dantzig",
            Algorithm::OmpK => "omp_k",
            Algorithm::OmpRpsc => "omp_rpsc",
            Algorithm::OmpRcsc => "omp_rcsc",
        })
    }
}

/// Problem context an [`Algorithm`] needs beyond `(X, y, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveContext {
    /// True (or assumed) sparsity; used by `oracle`, `omp_k` and
    /// cardinality-dependent rules outside the l0 search.
    pub k_star: usize,
    /// Largest cardinality the l0 search visits.
    pub l0_max_card: usize,
}

/// Runs `algorithm` tuned by `rule` at noise variance `sigma_sq`.
pub fn solve(
    algorithm: Algorithm,
    rule: Option<&TuningRule>,
    x: &DesignMatrix,
    y: &DVector<f64>,
    sigma_sq: f64,
    ctx: &SolveContext,
) -> Result<RecoveryResult> {
    check_positive(sigma_sq, "noise variance")?;
    let sigma = sigma_sq.sqrt();
    let (n, p) = (x.nrows(), x.ncols());
    let rule = match (algorithm.needs_rule(), rule) {
        (true, Some(r)) => Some(r),
        (true, None) => return Err(Error::invalid(format!("{algorithm} needs a tuning rule"))),
        (false, _) => None,
    };
    let gamma = || gamma_value(rule.expect("checked above"), n, p, ctx.k_star, sigma_sq);
    match algorithm {
        Algorithm::L0 => solve_l0(x, y, sigma_sq, rule.expect("checked above"), ctx.l0_max_card),
        Algorithm::Oracle => oracle_known_k(x, y, ctx.k_star),
        Algorithm::L1Penalty => solve_l1_penalty(x, y, sigma, gamma()?, DEFAULT_TOL_KKT, DEFAULT_MAX_SWEEPS),
        Algorithm::L1Error => solve_l1_error(x, y, sigma, gamma()?, DEFAULT_TOL_RES),
        Algorithm::Dantzig => solve_dantzig_orthonormal(x, y, sigma, gamma()?),
        Algorithm::OmpK => omp(x, y, sigma, &StopRule::known_k(ctx.k_star, n.min(p))),
        Algorithm::OmpRpsc => omp(x, y, sigma, &StopRule::rpsc(gamma()?, n.min(p))),
        Algorithm::OmpRcsc => omp(x, y, sigma, &StopRule::rcsc(gamma()?, n.min(p))),
    }
}
