//! Tuning-parameter families: the classical fixed criteria, the literature
//! defaults for the l1 programs and OMP stopping rules, and their SNR
//! adaptations `f(sigma^2)`.
//!
//! Rule strings have the form `base[:param][*adapt[:param]]`, e.g. `ric_fg`,
//! `ebic:1*pow:0.5`, `fixed:3*loginv`. All logarithms are natural.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Base value `Gamma` before SNR adaptation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    Fixed(f64),
    /// `2`
    Aic,
    /// `ln n`
    Bic,
    /// `2 ln p`
    RicFg,
    /// `2 ln p + 2 ln ln p`
    RicZs,
    /// `ln n + (2 gamma / k) ln C(p, k)`, evaluated per candidate cardinality.
    Ebic { gamma: f64 },
    /// `2 sqrt(2 ln p)`
    L1Candes,
    /// `10 sqrt(ln p)`
    L1CandesPlan,
    /// `sqrt(8 (1 + eta) ln(p - k))`
    L1BenHaim { eta: f64 },
    /// `sqrt(n + 2 sqrt(2 n))`
    L1ErrorCandes,
    /// `sqrt(n + 2 sqrt(n ln n))`
    RpscDefault,
    /// `sqrt(c ln p)`; `c = 2 (1 + eta)` in the eta form.
    RcscDefault { c: f64 },
    /// `sqrt(2 ln p)`
    DsCandes,
    /// `3/2 + sqrt(2 ln p)`
    DsCai,
}

/// Multiplicative SNR adaptation `f(sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Adaptation {
    None,
    /// `ln(1 / sigma^2)`, clamped below at `floor` (reached for `sigma^2 >= 1`).
    LogInvSigma2 { floor: f64 },
    /// `sigma^(-alpha)`.
    PowerAlpha(f64),
}

pub const DEFAULT_LOGINV_FLOOR: f64 = 1e-6;
pub const DEFAULT_RCSC_C: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningRule {
    pub base: Criterion,
    pub adaptation: Adaptation,
}

/// Which program a rule tunes; fixes the decay exponent in the consistency
/// conditions (`sigma^2 Gamma -> 0` for l0, `sigma Gamma -> 0` otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    L0,
    L1Penalty,
    L1Error,
    Dantzig,
    OmpRpsc,
    OmpRcsc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    ConsistentSufficient,
    ViolatesGrowth,
    ViolatesDecay,
    ViolatesBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConsistencyVerdict {
    pub growth_ok: bool,
    pub decay_ok: bool,
    pub verdict: Verdict,
}

impl ConsistencyVerdict {
    fn from_flags(growth_ok: bool, decay_ok: bool) -> Self {
        let verdict = match (growth_ok, decay_ok) {
            (true, true) => Verdict::ConsistentSufficient,
            (false, true) => Verdict::ViolatesGrowth,
            (true, false) => Verdict::ViolatesDecay,
            (false, false) => Verdict::ViolatesBoth,
        };
        Self {
            growth_ok,
            decay_ok,
            verdict,
        }
    }
}

fn ln_choose(p: usize, k: usize) -> f64 {
    let (p, k) = (p as f64, k as f64);
    libm::lgamma(p + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(p - k + 1.0)
}

impl Criterion {
    /// Base value for an `n x p` problem at candidate cardinality `k`.
    pub fn value(&self, n: usize, p: usize, k: usize) -> Result<f64> {
        let (nf, pf) = (n as f64, p as f64);
        let v = match *self {
            Criterion::Fixed(v) => v,
            Criterion::Aic => 2.0,
            Criterion::Bic => nf.ln(),
            Criterion::RicFg => 2.0 * pf.ln(),
            Criterion::RicZs => 2.0 * pf.ln() + 2.0 * pf.ln().ln(),
            Criterion::Ebic { gamma } => {
                if k == 0 {
                    return Err(Error::invalid("EBIC is undefined for an empty support"));
                }
                if k > p {
                    return Err(Error::invalid(format!("EBIC cardinality {k} exceeds p = {p}")));
                }
                nf.ln() + 2.0 * gamma / k as f64 * ln_choose(p, k)
            }
            Criterion::L1Candes => 2.0 * (2.0 * pf.ln()).sqrt(),
            Criterion::L1CandesPlan => 10.0 * pf.ln().sqrt(),
            Criterion::L1BenHaim { eta } => {
                (8.0 * (1.0 + eta) * (p.saturating_sub(k) as f64).ln()).sqrt()
            }
            Criterion::L1ErrorCandes => (nf + 2.0 * (2.0 * nf).sqrt()).sqrt(),
            Criterion::RpscDefault => (nf + 2.0 * (nf * nf.ln()).sqrt()).sqrt(),
            Criterion::RcscDefault { c } => (c * pf.ln()).sqrt(),
            Criterion::DsCandes => (2.0 * pf.ln()).sqrt(),
            Criterion::DsCai => 1.5 + (2.0 * pf.ln()).sqrt(),
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!(
                "{self} is not positive for n = {n}, p = {p}, k = {k} (value {v})"
            )));
        }
        Ok(v)
    }

    /// Whether the value depends on the candidate cardinality.
    pub fn depends_on_cardinality(&self) -> bool {
        matches!(self, Criterion::Ebic { .. } | Criterion::L1BenHaim { .. })
    }
}

impl Adaptation {
    pub fn factor(&self, sigma_sq: f64) -> Result<f64> {
        check_sigma_sq(sigma_sq)?;
        Ok(match *self {
            Adaptation::None => 1.0,
            Adaptation::LogInvSigma2 { floor } => {
                let f = -sigma_sq.ln();
                if f < floor {
                    log::warn!("ln(1/sigma^2) = {f} at sigma^2 = {sigma_sq}; clamped to {floor}");
                    floor
                } else {
                    f
                }
            }
            Adaptation::PowerAlpha(alpha) => sigma_sq.powf(-alpha / 2.0),
        })
    }
}

fn check_sigma_sq(sigma_sq: f64) -> Result<()> {
    if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
        return Err(Error::invalid(format!("noise variance must be positive, got {sigma_sq}")));
    }
    Ok(())
}

impl TuningRule {
    pub fn fixed(base: Criterion) -> Self {
        Self {
            base,
            adaptation: Adaptation::None,
        }
    }

    pub fn adapted(base: Criterion, adaptation: Adaptation) -> Self {
        Self { base, adaptation }
    }

    pub fn is_sigma_independent(&self) -> bool {
        matches!(self.adaptation, Adaptation::None)
    }
}

/// `Gamma = base(n, p, k) * f(sigma^2)`.
pub fn gamma_value(rule: &TuningRule, n: usize, p: usize, k: usize, sigma_sq: f64) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::invalid("n and p must be positive"));
    }
    if k > p {
        return Err(Error::invalid(format!("cardinality {k} exceeds p = {p}")));
    }
    check_sigma_sq(sigma_sq)?;
    Ok(rule.base.value(n, p, k)? * rule.adaptation.factor(sigma_sq)?)
}

/// Symbolic limit analysis of `Gamma(sigma^2)` as `sigma^2 -> 0`.
pub fn classify_consistency(rule: &TuningRule, target: Target) -> ConsistencyVerdict {
    let decay_exponent = match target {
        Target::L0 => 2.0,
        _ => 1.0,
    };
    let (growth_ok, decay_ok) = match rule.adaptation {
        Adaptation::None => (false, true),
        Adaptation::LogInvSigma2 { .. } => (true, true),
        Adaptation::PowerAlpha(alpha) => (alpha > 0.0, alpha < decay_exponent),
    };
    ConsistencyVerdict::from_flags(growth_ok, decay_ok)
}

// ---- rule syntax ----

fn parse_num(text: &str, what: &str) -> Result<f64> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("malformed {what} {text:?}")))?;
    if !v.is_finite() {
        return Err(Error::invalid(format!("{what} must be finite")));
    }
    Ok(v)
}

fn split_param(text: &str) -> (String, Option<&str>) {
    match text.split_once(':') {
        Some((name, param)) => (name.trim().to_ascii_lowercase().replace('-', "_"), Some(param)),
        None => (text.trim().to_ascii_lowercase().replace('-', "_"), None),
    }
}

fn no_param(name: &str, param: Option<&str>) -> Result<()> {
    match param {
        Some(_) => Err(Error::invalid(format!("{name} takes no parameter"))),
        None => Ok(()),
    }
}

fn required<'a>(name: &str, param: Option<&'a str>) -> Result<&'a str> {
    param.ok_or_else(|| Error::invalid(format!("{name} needs a parameter")))
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (name, param) = split_param(text);
        let c = match name.as_str() {
            "fixed" => {
                let v = parse_num(required("fixed", param)?, "fixed value")?;
                if v <= 0.0 {
                    return Err(Error::invalid(format!("fixed value must be positive, got {v}")));
                }
                Criterion::Fixed(v)
            }
            "aic" => no_param("aic", param).map(|_| Criterion::Aic)?,
            "bic" | "mdl" => no_param("bic", param).map(|_| Criterion::Bic)?,
            "ric_fg" => no_param("ric_fg", param).map(|_| Criterion::RicFg)?,
            "ric_zs" => no_param("ric_zs", param).map(|_| Criterion::RicZs)?,
            "ebic" => {
                let gamma = param.map(|t| parse_num(t, "EBIC gamma")).transpose()?.unwrap_or(1.0);
                if gamma < 0.0 {
                    return Err(Error::invalid("EBIC gamma must be >= 0"));
                }
                Criterion::Ebic { gamma }
            }
            "l1_candes" => no_param("l1_candes", param).map(|_| Criterion::L1Candes)?,
            "l1_candes_plan" => no_param("l1_candes_plan", param).map(|_| Criterion::L1CandesPlan)?,
            "l1_ben_haim" => {
                let eta = parse_num(required("l1_ben_haim", param)?, "eta")?;
                if eta <= 0.0 {
                    return Err(Error::invalid("eta must be positive"));
                }
                Criterion::L1BenHaim { eta }
            }
            "l1_error_candes" => no_param("l1_error_candes", param).map(|_| Criterion::L1ErrorCandes)?,
            "rpsc" => no_param("rpsc", param).map(|_| Criterion::RpscDefault)?,
            "rcsc" => {
                let c = param.map(|t| parse_num(t, "RCSC constant")).transpose()?.unwrap_or(DEFAULT_RCSC_C);
                if c <= 0.0 {
                    return Err(Error::invalid("RCSC constant must be positive"));
                }
                Criterion::RcscDefault { c }
            }
            "rcsc_eta" => {
                let eta = parse_num(required("rcsc_eta", param)?, "eta")?;
                if eta <= 0.0 {
                    return Err(Error::invalid("eta must be positive"));
                }
                Criterion::RcscDefault { c: 2.0 * (1.0 + eta) }
            }
            "ds_candes" => no_param("ds_candes", param).map(|_| Criterion::DsCandes)?,
            "ds_cai" => no_param("ds_cai", param).map(|_| Criterion::DsCai)?,
            other => return Err(Error::invalid(format!("unknown tuning base {other:?}"))),
        };
        Ok(c)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Fixed(v) => write!(f, "fixed:{v}"),
            Criterion::Aic => f.write_str("aic"),
            Criterion::Bic => f.write_str("bic"),
            Criterion::RicFg => f.write_str("ric_fg"),
            Criterion::RicZs => f.write_str("ric_zs"),
            Criterion::Ebic { gamma } => write!(f, "ebic:{gamma}"),
            Criterion::L1Candes => f.write_str("l1_candes"),
            Criterion::L1CandesPlan => f.write_str("l1_candes_plan"),
            Criterion::L1BenHaim { eta } => write!(f, "l1_ben_haim:{eta}"),
            Criterion::L1ErrorCandes => f.write_str("l1_error_candes"),
            Criterion::RpscDefault => f.write_str("rpsc"),
            Criterion::RcscDefault { c } => write!(f, "rcsc:{c}"),
            Criterion::DsCandes => f.write_str("ds_candes"),
            Criterion::DsCai => f.write_str("ds_cai"),
        }
    }
}

impl FromStr for Adaptation {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (name, param) = split_param(text);
        match name.as_str() {
            "none" => no_param("none", param).map(|_| Adaptation::None),
            "loginv" => {
                let floor = param.map(|t| parse_num(t, "log floor")).transpose()?.unwrap_or(DEFAULT_LOGINV_FLOOR);
                if floor <= 0.0 {
                    return Err(Error::invalid("log floor must be positive"));
                }
                Ok(Adaptation::LogInvSigma2 { floor })
            }
            "pow" => Ok(Adaptation::PowerAlpha(parse_num(required("pow", param)?, "alpha")?)),
            other => Err(Error::invalid(format!("unknown adaptation {other:?}"))),
        }
    }
}

impl fmt::Display for Adaptation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Adaptation::None => f.write_str("none"),
            Adaptation::LogInvSigma2 { floor } if *floor == DEFAULT_LOGINV_FLOOR => f.write_str("loginv"),
            Adaptation::LogInvSigma2 { floor } => write!(f, "loginv:{floor}"),
            Adaptation::PowerAlpha(a) => write!(f, "pow:{a}"),
        }
    }
}

impl FromStr for TuningRule {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::invalid("empty rule string"));
        }
        let mut parts = text.split('*');
        let base: Criterion = parts.next().unwrap_or_default().parse()?;
        let adaptation = match parts.next() {
            Some(a) => a.parse()?,
            None => Adaptation::None,
        };
        if parts.next().is_some() {
            return Err(Error::invalid("at most one adaptation per rule"));
        }
        Ok(Self { base, adaptation })
    }
}

impl fmt::Display for TuningRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.adaptation {
            Adaptation::None => write!(f, "{}", self.base),
            a => write!(f, "{}*{a}", self.base),
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        Ok(match text.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "l0" => Target::L0,
            "l1_penalty" => Target::L1Penalty,
            "l1_error" => Target::L1Error,
            "dantzig" => Target::Dantzig,
            "omp_rpsc" => Target::OmpRpsc,
            "omp_rcsc" => Target::OmpRcsc,
            other => return Err(Error::invalid(format!("unknown target {other:?}"))),
        })
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::L0 => "l0",
            Target::L1Penalty => "l1_penalty",
            Target::L1Error => "l1_error",
            Target::Dantzig => "dantzig",
            Target::OmpRpsc => "omp_rpsc",
            Target::OmpRcsc => "omp_rcsc",
        })
    }
}
