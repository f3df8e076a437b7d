//! Analytic error bounds: the Gaussian tail `Q`, the l0 error floor, the
//! chi-square tail bound, the l1-penalty rate bounds for the events
//! E1 (no false discovery) and E2 (no missed discovery), and the OMP
//! selection margin.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{gram_diagnostics, DesignMatrix, SupportSet};
use crate::qualifiers::erc_coefficient;

/// Standard normal upper tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `2 Q(sqrt(Gamma0))`: the PE floor of l0 with a sigma-independent `Gamma0`.
pub fn l0_pe_lower_bound(gamma0: f64) -> Result<f64> {
    if !(gamma0.is_finite() && gamma0 > 0.0) {
        return Err(Error::invalid(format!("Gamma0 must be positive, got {gamma0}")));
    }
    Ok(2.0 * q_function(gamma0.sqrt()))
}

/// Upper bound on `P(chi2_k > a^2)` valid for `a^2 > k`:
/// `e^{k/2} k^{-k/2} exp(-(a^2 - k ln a^2) / 2)`.
pub fn chi2_tail_bound(k: usize, a_sq: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("chi-square degrees of freedom must be positive"));
    }
    let kf = k as f64;
    if !(a_sq > kf) || !a_sq.is_finite() {
        return Err(Error::invalid(format!("bound needs a^2 > k, got a^2 = {a_sq}, k = {k}")));
    }
    Ok((0.5 * kf * (1.0 - kf.ln()) - 0.5 * (a_sq - kf * a_sq.ln())).exp())
}

/// Inputs to the l1-penalty rate bounds for one `(X, I)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateBoundInputs {
    pub n: usize,
    pub k_star: usize,
    pub erc: f64,
    pub gamma1: f64,
    pub sigma: f64,
    /// Nonzero coefficients `beta_j`, in support order.
    pub beta_support: Vec<f64>,
    pub c_seq: Vec<f64>,
    pub d_seq: Vec<f64>,
}

impl RateBoundInputs {
    /// Gathers `erc`, `c_j` and `d_j` for support `I` of `X`.
    pub fn from_design(
        x: &DesignMatrix,
        support: &SupportSet,
        beta_support: Vec<f64>,
        gamma1: f64,
        sigma: f64,
    ) -> Result<Self> {
        let diag = gram_diagnostics(x, support)?;
        Ok(Self {
            n: x.nrows(),
            k_star: support.len(),
            erc: erc_coefficient(x, support)?,
            gamma1,
            sigma,
            beta_support,
            d_seq: diag.d_seq(),
            c_seq: diag.diag_sqrt,
        })
    }

    fn validate(&self) -> Result<()> {
        let k = self.k_star;
        if k == 0 || self.n <= k {
            return Err(Error::invalid(format!("need 1 <= k* < n, got k* = {k}, n = {}", self.n)));
        }
        for (what, len) in [
            ("beta_support", self.beta_support.len()),
            ("c_seq", self.c_seq.len()),
            ("d_seq", self.d_seq.len()),
        ] {
            if len != k {
                return Err(Error::DimensionMismatch { what, expected: k, found: len });
            }
        }
        if !(0.0..1.0).contains(&self.erc) {
            return Err(Error::ErcFailure(self.erc));
        }
        if !(self.gamma1 > 0.0 && self.sigma > 0.0) {
            return Err(Error::invalid("Gamma1 and sigma must be positive"));
        }
        if self.c_seq.iter().chain(&self.d_seq).any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("c_j and d_j must be positive"));
        }
        Ok(())
    }

    /// `|beta_j| / (sigma c_j) - Gamma1 d_j`, one per support entry.
    fn e2_arguments(&self) -> Vec<f64> {
        self.beta_support
            .iter()
            .zip(&self.c_seq)
            .zip(&self.d_seq)
            .map(|((b, c), d)| b.abs() / (self.sigma * c) - self.gamma1 * d)
            .collect()
    }
}

/// A bound value before and after clamping to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Clamped {
    pub raw: f64,
    pub value: f64,
}

impl Clamped {
    fn new(raw: f64) -> Self {
        Self {
            raw,
            value: raw.clamp(0.0, 1.0),
        }
    }
}

/// Lower bound on `P(E1)`, E1 = `{||X^T (I - P_I) w||_inf < sigma Gamma1 (1 - erc)}`.
pub fn e1_rate_bound(inputs: &RateBoundInputs) -> Result<Clamped> {
    inputs.validate()?;
    let b1 = 1.0 - inputs.erc;
    let a_sq = (inputs.gamma1 * b1).powi(2);
    let dof = inputs.n - inputs.k_star;
    if !(a_sq > dof as f64) {
        return Err(Error::invalid(format!(
            "E1 bound needs Gamma1^2 (1 - erc)^2 > n - k*, got {a_sq} <= {dof}"
        )));
    }
    Ok(Clamped::new(1.0 - chi2_tail_bound(dof, a_sq)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct E2Bound {
    /// `1 - sum_j Q(x_j)`.
    pub exact_q_form: Clamped,
    /// `1 - 1/2 sum_j exp(-x_j^2 / 2)`; `None` unless every `x_j > 2`.
    pub exp_form: Option<Clamped>,
}

/// Lower bounds on `P(E2)`, E2 = `{for all j: |b^I_j| > sigma Gamma1 c_j d_j}`,
/// with `x_j = |beta_j| / (sigma c_j) - Gamma1 d_j`.
pub fn e2_rate_bound(inputs: &RateBoundInputs) -> Result<E2Bound> {
    inputs.validate()?;
    let args = inputs.e2_arguments();
    let exact = 1.0 - args.iter().map(|&x| q_function(x)).sum::<f64>();
    let exp_form = args
        .iter()
        .all(|&x| x > 2.0)
        .then(|| Clamped::new(1.0 - 0.5 * args.iter().map(|x| (-x * x / 2.0).exp()).sum::<f64>()));
    Ok(E2Bound {
        exact_q_form: Clamped::new(exact),
        exp_form,
    })
}

/// `c_I * beta_min` with `c_I = (1 - erc) lambda_min(X_I^T X_I) / (2 sqrt(k*))`:
/// while the noise correlation with every residual stays below this value,
/// each of the first `k*` OMP picks lies in `I`.
pub fn omp_selection_margin(x: &DesignMatrix, support: &SupportSet, beta_min: f64) -> Result<f64> {
    if !(beta_min.is_finite() && beta_min > 0.0) {
        return Err(Error::invalid(format!("beta_min must be positive, got {beta_min}")));
    }
    let erc = erc_coefficient(x, support)?;
    if erc >= 1.0 {
        return Err(Error::ErcFailure(erc));
    }
    let lambda_min = gram_diagnostics(x, support)?.min_eigenvalue;
    let k = support.len() as f64;
    Ok((1.0 - erc) * lambda_min / (2.0 * k.sqrt()) * beta_min)
}
