//! Monte Carlo estimation of the probability of support-recovery error.
//!
//! Every trial draws from its own ChaCha stream seeded by mixing
//! `(master_seed, grid index, algorithm index, trial index)`, so a sweep is a
//! pure function of its configuration whatever the worker count.

use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{DesignMatrix, SupportSet};
use crate::qualifiers::subsets_up_to;
use crate::solvers::{solve, Algorithm, SolveContext};
use crate::textio::parse_matrix;
use crate::tuning::TuningRule;

pub const DEFAULT_TRIALS: usize = 10_000;
/// Subset budget used to pick the default l0 search depth.
pub const DEFAULT_L0_BUDGET: f64 = 1e6;

/// `[I_n | H_n / sqrt(n)]` with `H_n` the Sylvester Hadamard matrix.
pub fn gen_erc_matrix(n: usize) -> Result<DesignMatrix> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::invalid(format!("ERC matrix size must be a power of two, got {n}")));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let x = DMatrix::from_fn(n, 2 * n, |i, j| {
        if j < n {
            if i == j { 1.0 } else { 0.0 }
        } else {
            // Sylvester: H[i][j] = (-1)^{popcount(i & j)}
            let sign = if (i & (j - n)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * scale
        }
    });
    DesignMatrix::with_unit_columns(x)
}

/// Independent standard normal entries, columns scaled to unit norm.
pub fn gen_random_matrix<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<DesignMatrix> {
    if n == 0 || p == 0 {
        return Err(Error::invalid("matrix dimensions must be positive"));
    }
    let raw = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    DesignMatrix::normalized(raw)
}

/// `k_star` indices drawn uniformly without replacement, each carrying
/// `+-magnitude` with a fair-coin sign. The support is returned ascending.
pub fn gen_signal<R: Rng + ?Sized>(
    p: usize,
    k_star: usize,
    magnitude: f64,
    rng: &mut R,
) -> Result<(DVector<f64>, SupportSet)> {
    if k_star > p {
        return Err(Error::invalid(format!("k* = {k_star} exceeds p = {p}")));
    }
    let mut idx = rand::seq::index::sample(rng, p, k_star).into_vec();
    idx.sort_unstable();
    let mut beta = DVector::zeros(p);
    for &j in &idx {
        beta[j] = if rng.random::<bool>() { magnitude } else { -magnitude };
    }
    Ok((beta, SupportSet::new(idx)?))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream owned by one trial.
pub fn trial_seed(master_seed: u64, grid_index: usize, algorithm_index: usize, trial: usize) -> u64 {
    [grid_index as u64, algorithm_index as u64, trial as u64]
        .into_iter()
        .fold(splitmix64(master_seed), |h, v| splitmix64(h ^ splitmix64(v)))
}

/// Seed for a design matrix shared by all trials.
fn shared_matrix_seed(master_seed: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ 0x6d61_7472_6978)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSpec {
    ErcHadamard(usize),
    RandomGaussian { n: usize, p: usize, fresh_per_trial: bool },
    File(PathBuf),
}

impl MatrixSpec {
    /// Row count, or `None` for a file not yet read.
    pub fn rows(&self) -> Option<usize> {
        match self {
            MatrixSpec::ErcHadamard(n) | MatrixSpec::RandomGaussian { n, .. } => Some(*n),
            MatrixSpec::File(_) => None,
        }
    }
}

impl FromStr for MatrixSpec {
    type Err = Error;

    /// `erc:<n>`, `rand:<n>x<p>` (fresh per trial), `rand:<n>x<p>:fixed`, `file:<path>`.
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("matrix spec {text:?} lacks a kind prefix")))?;
        let dim = |t: &str| -> Result<usize> {
            let v: usize = t
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("malformed dimension {t:?}")))?;
            if v == 0 {
                return Err(Error::invalid("dimensions must be positive"));
            }
            Ok(v)
        };
        match kind.to_ascii_lowercase().as_str() {
            "erc" => {
                let n = dim(rest)?;
                if !n.is_power_of_two() {
                    return Err(Error::invalid(format!("ERC size must be a power of two, got {n}")));
                }
                Ok(MatrixSpec::ErcHadamard(n))
            }
            "rand" => {
                let (shape, mode) = match rest.split_once(':') {
                    Some((s, m)) => (s, Some(m)),
                    None => (rest, None),
                };
                let (n, p) = shape
                    .split_once(['x', 'X'])
                    .ok_or_else(|| Error::invalid(format!("expected <n>x<p>, got {shape:?}")))?;
                let fresh_per_trial = match mode {
                    None | Some("fresh") => true,
                    Some("fixed") => false,
                    Some(m) => return Err(Error::invalid(format!("unknown matrix mode {m:?}"))),
                };
                Ok(MatrixSpec::RandomGaussian { n: dim(n)?, p: dim(p)?, fresh_per_trial })
            }
            "file" if !rest.is_empty() => Ok(MatrixSpec::File(PathBuf::from(rest))),
            _ => Err(Error::invalid(format!("unknown matrix spec {text:?}"))),
        }
    }
}

impl fmt::Display for MatrixSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixSpec::ErcHadamard(n) => write!(f, "erc:{n}"),
            MatrixSpec::RandomGaussian { n, p, fresh_per_trial: true } => write!(f, "rand:{n}x{p}"),
            MatrixSpec::RandomGaussian { n, p, fresh_per_trial: false } => write!(f, "rand:{n}x{p}:fixed"),
            MatrixSpec::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    pub rule: Option<TuningRule>,
}

impl AlgorithmSpec {
    pub fn new(algorithm: Algorithm, rule: Option<TuningRule>) -> Result<Self> {
        if algorithm.needs_rule() && rule.is_none() {
            return Err(Error::invalid(format!("algorithm {algorithm} needs a tuning rule")));
        }
        Ok(Self { algorithm, rule })
    }

    pub fn rule_label(&self) -> String {
        match &self.rule {
            Some(r) if self.algorithm.needs_rule() => r.to_string(),
            _ => "-".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub matrix: MatrixSpec,
    pub k_star: usize,
    pub beta_magnitude: f64,
    /// Strictly decreasing noise variances.
    pub sigma_sq_grid: Vec<f64>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub trials: usize,
    pub master_seed: u64,
    /// l0 search depth; defaults to [`default_l0_max_card`].
    pub l0_max_card: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_star == 0 {
            return Err(Error::invalid("k* must be at least 1"));
        }
        if let Some(n) = self.matrix.rows() {
            if self.k_star > n {
                return Err(Error::invalid(format!("k* = {} exceeds n = {n}", self.k_star)));
            }
        }
        if !(self.beta_magnitude.is_finite() && self.beta_magnitude > 0.0) {
            return Err(Error::invalid("beta magnitude must be positive"));
        }
        if self.sigma_sq_grid.is_empty() {
            return Err(Error::invalid("sigma^2 grid is empty"));
        }
        if self.sigma_sq_grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("sigma^2 values must be positive"));
        }
        if self.sigma_sq_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("sigma^2 grid must be strictly decreasing"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("no algorithms configured"));
        }
        for a in &self.algorithms {
            if a.algorithm.needs_rule() && a.rule.is_none() {
                return Err(Error::invalid(format!("algorithm {} needs a tuning rule", a.algorithm)));
            }
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        Ok(())
    }
}

/// Largest `m <= min(n, p)` whose search over all supports of size `<= m`
/// stays within [`DEFAULT_L0_BUDGET`] subsets.
pub fn default_l0_max_card(n: usize, p: usize) -> usize {
    let mut m = 0;
    while m < n.min(p) && subsets_up_to(p, m + 1) <= DEFAULT_L0_BUDGET {
        m += 1;
    }
    m
}

/// `10 log10(k* beta^2 / (n sigma^2))`.
pub fn snr_db(k_star: usize, beta_magnitude: f64, n: usize, sigma_sq: f64) -> f64 {
    10.0 * (k_star as f64 * beta_magnitude * beta_magnitude / (n as f64 * sigma_sq)).log10()
}

/// Design matrices materialized once per sweep.
#[derive(Debug, Clone)]
pub struct PreparedMatrix {
    spec: MatrixSpec,
    fixed: Option<DesignMatrix>,
    n: usize,
    p: usize,
}

impl PreparedMatrix {
    pub fn new(spec: &MatrixSpec, master_seed: u64) -> Result<Self> {
        let fixed = match spec {
            MatrixSpec::ErcHadamard(n) => Some(gen_erc_matrix(*n)?),
            MatrixSpec::RandomGaussian { fresh_per_trial: true, .. } => None,
            MatrixSpec::RandomGaussian { n, p, fresh_per_trial: false } => {
                let mut rng = ChaCha8Rng::seed_from_u64(shared_matrix_seed(master_seed));
                Some(gen_random_matrix(*n, *p, &mut rng)?)
            }
            MatrixSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
                let x = DesignMatrix::normalized(parse_matrix(&text)?)?;
                Some(x)
            }
        };
        let (n, p) = match (spec, &fixed) {
            (_, Some(x)) => (x.nrows(), x.ncols()),
            (MatrixSpec::RandomGaussian { n, p, .. }, None) => (*n, *p),
            _ => unreachable!("only fresh random matrices are deferred"),
        };
        Ok(Self { spec: spec.clone(), fixed, n, p })
    }

    pub fn from_design(x: DesignMatrix) -> Self {
        Self {
            spec: MatrixSpec::File(PathBuf::from("<memory>")),
            n: x.nrows(),
            p: x.ncols(),
            fixed: Some(x),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.p)
    }

    pub fn spec(&self) -> &MatrixSpec {
        &self.spec
    }

    /// The shared matrix; `None` when every trial draws its own.
    pub fn design(&self) -> Option<&DesignMatrix> {
        self.fixed.as_ref()
    }

    fn draw<'a>(&'a self, rng: &mut ChaCha8Rng, scratch: &'a mut Option<DesignMatrix>) -> Result<&'a DesignMatrix> {
        match &self.fixed {
            Some(x) => Ok(x),
            None => Ok(scratch.insert(gen_random_matrix(self.n, self.p, rng)?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub success: bool,
    /// `|I_hat & I| / |I_hat|`, 1 for an empty estimate.
    pub precision: f64,
    /// `|I_hat & I| / |I|`.
    pub recall: f64,
}

/// Everything a trial needs besides its indices.
#[derive(Debug, Clone, Copy)]
pub struct TrialSetup<'a> {
    pub matrix: &'a PreparedMatrix,
    pub k_star: usize,
    pub beta_magnitude: f64,
    pub master_seed: u64,
    pub l0_max_card: usize,
}

impl TrialSetup<'_> {
    /// One draw of `(X, beta, w)`, one solve, exact support comparison.
    pub fn run_trial(
        &self,
        grid_index: usize,
        sigma_sq: f64,
        algorithm_index: usize,
        spec: &AlgorithmSpec,
        trial: usize,
    ) -> Result<TrialOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(self.master_seed, grid_index, algorithm_index, trial));
        let mut scratch = None;
        let x = self.matrix.draw(&mut rng, &mut scratch)?;
        let (beta, truth) = gen_signal(x.ncols(), self.k_star, self.beta_magnitude, &mut rng)?;
        let sigma = sigma_sq.sqrt();
        let noise = DVector::from_fn(x.nrows(), |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
        let y = x.entries() * &beta + noise;
        let ctx = SolveContext {
            k_star: self.k_star,
            l0_max_card: self.l0_max_card,
        };
        let result = solve(spec.algorithm, spec.rule.as_ref(), x, &y, sigma_sq, &ctx)?;
        let hits = result.support.indices().iter().filter(|&&j| truth.contains(j)).count();
        let precision = if result.support.is_empty() {
            1.0
        } else {
            hits as f64 / result.support.len() as f64
        };
        let recall = if truth.is_empty() { 1.0 } else { hits as f64 / truth.len() as f64 };
        Ok(TrialOutcome {
            success: result.support.same_set(&truth),
            precision,
            recall,
        })
    }

    /// Runs `trials` trials on the current rayon pool and reduces them in
    /// trial order. Errored trials count as failures.
    pub fn estimate_pe(
        &self,
        grid_index: usize,
        sigma_sq: f64,
        algorithm_index: usize,
        spec: &AlgorithmSpec,
        trials: usize,
    ) -> PeRow {
        let outcomes: Vec<Result<TrialOutcome>> = (0..trials)
            .into_par_iter()
            .map(|t| self.run_trial(grid_index, sigma_sq, algorithm_index, spec, t))
            .collect();
        let mut failures = 0;
        let mut errors = 0;
        let mut first_error = None;
        let (mut precision, mut recall) = (0.0, 0.0);
        for (t, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(o) => {
                    failures += usize::from(!o.success);
                    precision += o.precision;
                    recall += o.recall;
                }
                Err(e) => {
                    failures += 1;
                    errors += 1;
                    first_error.get_or_insert_with(|| format!("trial {t}: {e}"));
                }
            }
        }
        let pe_hat = failures as f64 / trials as f64;
        let (n, _) = self.matrix.shape();
        PeRow {
            sigma_sq,
            snr_db: snr_db(self.k_star, self.beta_magnitude, n, sigma_sq),
            algorithm: spec.algorithm,
            rule: spec.rule_label(),
            pe_hat,
            trials,
            failures,
            stderr: (pe_hat * (1.0 - pe_hat) / trials as f64).sqrt(),
            errors,
            mean_precision: precision / trials as f64,
            mean_recall: recall / trials as f64,
            first_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeRow {
    pub sigma_sq: f64,
    pub snr_db: f64,
    pub algorithm: Algorithm,
    pub rule: String,
    pub pe_hat: f64,
    pub trials: usize,
    pub failures: usize,
    pub stderr: f64,
    /// Trials whose solver returned an error (already counted as failures).
    pub errors: usize,
    /// Averaged over all trials; errored trials contribute zero.
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeCurve {
    pub rows: Vec<PeRow>,
}

pub const CSV_HEADER: &str = "sigma_sq,snr_db,algorithm,rule,pe_hat,trials,failures,stderr";

impl PeCurve {
    pub fn total_errors(&self) -> usize {
        self.rows.iter().map(|r| r.errors).sum()
    }

    /// Mandatory columns, plus `errors,precision,recall` when `diagnostics`.
    pub fn to_csv(&self, diagnostics: bool) -> String {
        let mut out = String::from(CSV_HEADER);
        if diagnostics {
            out.push_str(",errors,precision,recall");
        }
        out.push('\n');
        for r in &self.rows {
            write!(
                out,
                "{:e},{:.6},{},{},{},{},{},{}",
                r.sigma_sq, r.snr_db, r.algorithm, r.rule, r.pe_hat, r.trials, r.failures, r.stderr
            )
            .unwrap();
            if diagnostics {
                write!(out, ",{},{},{}", r.errors, r.mean_precision, r.mean_recall).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// PE for every `(sigma^2, algorithm)` pair, rows ordered grid-major.
///
/// `threads = 0` uses rayon's default pool size.
pub fn sweep(config: &ExperimentConfig, threads: usize) -> Result<PeCurve> {
    config.validate()?;
    let matrix = PreparedMatrix::new(&config.matrix, config.master_seed)?;
    sweep_prepared(config, &matrix, threads)
}

pub fn sweep_prepared(config: &ExperimentConfig, matrix: &PreparedMatrix, threads: usize) -> Result<PeCurve> {
    config.validate()?;
    let (n, p) = matrix.shape();
    if config.k_star > n.min(p) {
        return Err(Error::invalid(format!("k* = {} exceeds min(n, p) = {}", config.k_star, n.min(p))));
    }
    let setup = TrialSetup {
        matrix,
        k_star: config.k_star,
        beta_magnitude: config.beta_magnitude,
        master_seed: config.master_seed,
        l0_max_card: config.l0_max_card.unwrap_or_else(|| default_l0_max_card(n, p)),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
    let rows = pool.install(|| {
        let mut rows = Vec::new();
        for (g, &sigma_sq) in config.sigma_sq_grid.iter().enumerate() {
            for (a, spec) in config.algorithms.iter().enumerate() {
                let row = setup.estimate_pe(g, sigma_sq, a, spec, config.trials);
                if let Some(e) = &row.first_error {
                    log::warn!("{} errored trials for {} at sigma^2 = {sigma_sq:e}; first: {e}", row.errors, spec.algorithm);
                }
                rows.push(row);
            }
        }
        rows
    });
    Ok(PeCurve { rows })
}
