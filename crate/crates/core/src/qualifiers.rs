//! Regularity qualifiers of a design matrix: mutual coherence, the sparsity
//! level it certifies, the exact recovery coefficient of a support, and the
//! spark.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, support_rank, DesignMatrix, SupportSet};

/// `max_{i != j} |X_i^T X_j|`.
pub fn mutual_coherence(x: &DesignMatrix) -> Result<f64> {
    let p = x.ncols();
    if p < 2 {
        return Err(Error::invalid("mutual coherence needs at least two columns"));
    }
    let gram = x.entries().tr_mul(x.entries());
    let mut mu: f64 = 0.0;
    for j in 0..p {
        for i in 0..j {
            mu = mu.max(gram[(i, j)].abs());
        }
    }
    Ok(mu)
}

/// Largest sparsity level certified by the mutual incoherence condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MicSparsity {
    Bounded(usize),
    /// `mu = 0`: the condition never binds.
    Unbounded,
}

impl fmt::Display for MicSparsity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MicSparsity::Bounded(k) => write!(f, "{k}"),
            MicSparsity::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl MicSparsity {
    pub fn admits(&self, k: usize) -> bool {
        match *self {
            MicSparsity::Bounded(max) => k <= max,
            MicSparsity::Unbounded => true,
        }
    }
}

fn mic_holds(mu: f64, k: usize) -> bool {
    k >= 1 && mu < 1.0 / (2 * k - 1) as f64
}

/// Largest `k` with `mu < 1 / (2k - 1)`; zero when no `k >= 1` qualifies.
pub fn mic_max_sparsity(mu: f64) -> Result<MicSparsity> {
    if mu.is_nan() || mu < 0.0 {
        return Err(Error::invalid(format!("mutual coherence must be >= 0, got {mu}")));
    }
    if mu == 0.0 {
        return Ok(MicSparsity::Unbounded);
    }
    if mu >= 1.0 {
        return Ok(MicSparsity::Bounded(0));
    }
    // k < (1 + 1/mu) / 2, then settle rounding by direct comparison
    let mut k = ((1.0 + 1.0 / mu) / 2.0).floor().min(usize::MAX as f64 / 4.0) as usize;
    while k > 0 && !mic_holds(mu, k) {
        k -= 1;
    }
    while mic_holds(mu, k + 1) {
        k += 1;
    }
    Ok(MicSparsity::Bounded(k))
}

fn pseudo_inverse(xj: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = xj.shape();
    let svd = xj.clone().svd(true, true);
    let rank = numerical_rank(svd.singular_values.as_slice(), rows, cols);
    if rank < cols {
        return Err(Error::RankDeficient { rank, columns: cols });
    }
    let u = svd.u.expect("U requested");
    let v_t = svd.v_t.expect("V^T requested");
    let inv_s = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    Ok(v_t.transpose() * inv_s * u.transpose())
}

/// `max_{j not in J} ||X_J^+ X_j||_1`.
pub fn erc_coefficient(x: &DesignMatrix, support: &SupportSet) -> Result<f64> {
    x.check_support(support)?;
    if support.is_empty() {
        return Err(Error::invalid("ERC needs a nonempty support"));
    }
    if support.len() >= x.ncols() {
        return Err(Error::invalid("ERC needs a column outside the support"));
    }
    let pinv = pseudo_inverse(&x.select(support))?;
    let mut erc: f64 = 0.0;
    for j in (0..x.ncols()).filter(|&j| !support.contains(j)) {
        erc = erc.max((&pinv * x.column(j)).lp_norm(1));
    }
    Ok(erc)
}

/// Outcome of the spark search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Spark {
    /// Smallest dependent subset found has this size.
    Exact(usize),
    /// Every subset up to this size is independent.
    Exceeds(usize),
}

impl Spark {
    /// Spark value with the `p + 1` convention for matrices whose full
    /// column set is independent; `None` when the search was cut short.
    pub fn conventional_value(&self, p: usize) -> Option<usize> {
        match *self {
            Spark::Exact(s) => Some(s),
            Spark::Exceeds(m) if m >= p => Some(p + 1),
            Spark::Exceeds(_) => None,
        }
    }
}

impl fmt::Display for Spark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spark::Exact(s) => write!(f, "{s}"),
            Spark::Exceeds(m) => write!(f, "> {m}"),
        }
    }
}

pub const DEFAULT_SPARK_CAP: usize = 12;

/// Subsets the spark search may visit.
pub const SPARK_SUBSET_LIMIT: f64 = 1e7;

/// Subsets visited by the default search (cheap enough for interactive use).
const DEFAULT_SPARK_BUDGET: f64 = 1e6;

/// `min(n + 1, p, 12)`, lowered until the subset count fits the default
/// budget.
pub fn default_spark_cardinality(x: &DesignMatrix) -> usize {
    let mut m = (x.nrows() + 1).min(x.ncols()).min(DEFAULT_SPARK_CAP);
    while m > 1 && subsets_up_to(x.ncols(), m) > DEFAULT_SPARK_BUDGET {
        m -= 1;
    }
    m
}

/// `sum_{k = lo..=hi} C(p, k)` in floating point.
pub(crate) fn subsets_between(p: usize, lo: usize, hi: usize) -> f64 {
    let mut total = 0.0;
    let mut c = 1.0f64; // C(p, 0)
    for k in 0..=hi.min(p) {
        if k >= lo {
            total += c;
        }
        c = c * (p - k) as f64 / (k + 1) as f64;
    }
    total
}

pub(crate) fn subsets_up_to(p: usize, hi: usize) -> f64 {
    subsets_between(p, 1, hi)
}

/// Enumerates subsets by increasing size and stops at the first one whose
/// rank falls short of its size.
pub fn spark_exhaustive(x: &DesignMatrix, max_cardinality: usize) -> Result<Spark> {
    if max_cardinality < 1 {
        return Err(Error::invalid("spark search needs max_cardinality >= 1"));
    }
    let limit = (x.nrows() + 1).min(x.ncols());
    if max_cardinality > limit {
        return Err(Error::invalid(format!(
            "max_cardinality {max_cardinality} exceeds min(n + 1, p) = {limit}"
        )));
    }
    let p = x.ncols();
    let visits = subsets_up_to(p, max_cardinality);
    if visits > SPARK_SUBSET_LIMIT {
        return Err(Error::EnumerationGuard {
            subsets: visits,
            limit: SPARK_SUBSET_LIMIT,
        });
    }
    for size in 1..=max_cardinality {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            let s = SupportSet::new(combo.clone())?;
            if support_rank(x, &s)? < size {
                return Ok(Spark::Exact(size));
            }
            if !next_combination(&mut combo, p) {
                break;
            }
        }
    }
    Ok(Spark::Exceeds(max_cardinality))
}

/// Advances `combo` to the next k-subset of `0..p` in lexicographic order.
pub(crate) fn next_combination(combo: &mut [usize], p: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < p - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Whether the spark evidence implies `spark(X) > 2 k*`.
pub fn spark_condition_holds(spark: Spark, k_star: usize) -> bool {
    match spark {
        Spark::Exact(s) => s > 2 * k_star,
        Spark::Exceeds(m) => m >= 2 * k_star,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualifierReport {
    pub n: usize,
    pub p: usize,
    pub mutual_coherence: f64,
    pub mic_max_sparsity: MicSparsity,
    pub spark: Spark,
    /// Spark with the `p + 1` convention applied when no dependent subset
    /// exists at all.
    pub spark_conventional: Option<usize>,
    pub spark_search_cardinality: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub erc_coefficient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub erc_holds: Option<bool>,
}

impl QualifierReport {
    pub fn compute(
        x: &DesignMatrix,
        support: Option<&SupportSet>,
        spark_cardinality: Option<usize>,
    ) -> Result<Self> {
        let mu = mutual_coherence(x)?;
        let card = spark_cardinality.unwrap_or_else(|| default_spark_cardinality(x));
        let spark = spark_exhaustive(x, card)?;
        let erc = support.map(|s| erc_coefficient(x, s)).transpose()?;
        Ok(Self {
            n: x.nrows(),
            p: x.ncols(),
            mutual_coherence: mu,
            mic_max_sparsity: mic_max_sparsity(mu)?,
            spark,
            spark_conventional: spark.conventional_value(x.ncols()),
            spark_search_cardinality: card,
            support: support.cloned(),
            erc_coefficient: erc,
            erc_holds: erc.map(|e| e < 1.0),
        })
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "n: {}\np: {}\nmutual_coherence: {:.6}\nmic_max_sparsity: {}\nspark: {}\n",
            self.n, self.p, self.mutual_coherence, self.mic_max_sparsity, self.spark
        );
        match self.spark_conventional {
            Some(v) if matches!(self.spark, Spark::Exceeds(_)) => {
                out.push_str(&format!("spark_conventional: {v} (no dependent column subset; p + 1 convention)\n"))
            }
            Some(v) => out.push_str(&format!("spark_conventional: {v}\n")),
            None => out.push_str("spark_conventional: unknown (search capped)\n"),
        }
        out.push_str(&format!("spark_search_cardinality: {}\n", self.spark_search_cardinality));
        if let (Some(s), Some(e), Some(h)) = (&self.support, self.erc_coefficient, self.erc_holds) {
            out.push_str(&format!("support: {:?}\nerc_coefficient: {e:.6}\nerc_holds: {h}\n", s.indices()));
        }
        out
    }
}
