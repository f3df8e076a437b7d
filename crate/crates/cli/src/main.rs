use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde_json::{json, Map, Value};

use snr_sentry::bounds::{
    chi2_tail_bound, e1_rate_bound, e2_rate_bound, l0_pe_lower_bound, omp_selection_margin, q_function,
    RateBoundInputs,
};
use snr_sentry::config::{parse_algorithm_line, parse_config, parse_sigma_grid};
use snr_sentry::experiment::{
    default_l0_max_card, sweep, AlgorithmSpec, ExperimentConfig, MatrixSpec, PreparedMatrix, DEFAULT_TRIALS,
};
use snr_sentry::qualifiers::QualifierReport;
use snr_sentry::solvers::{solve, SolveContext};
use snr_sentry::textio::parse_vector;
use snr_sentry::{Algorithm, DesignMatrix, SupportSet, TuningRule};

const SEED_ENV: &str = "SNR_SENTRY_SEED";

#[derive(Debug, Parser)]
#[command(name = "snr-sentry", version, about = "Sparse support recovery at high SNR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coherence, MIC sparsity, spark and (with --support) ERC of a matrix.
    Qualify(QualifyArgs),
    /// Solve one instance and print the estimate as JSON.
    Solve(SolveArgs),
    /// Monte Carlo probability-of-error curves as CSV.
    Sweep(SweepArgs),
    /// Evaluate analytic bounds; prints JSON.
    Bounds(BoundsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct QualifyArgs {
    /// erc:<n> | rand:<n>x<p> | file:<path>
    #[arg(long)]
    matrix: MatrixSpec,
    /// Comma-separated column indices; adds the ERC coefficient.
    #[arg(long)]
    support: Option<String>,
    /// Largest subset size for the spark search.
    #[arg(long)]
    spark_card: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    matrix: MatrixSpec,
    /// Observation vector file, one value per line.
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    algo: Algorithm,
    #[arg(long)]
    rule: Option<TuningRule>,
    #[arg(long)]
    sigma_sq: f64,
    /// Assumed sparsity; needed by oracle, omp_k and cardinality-dependent rules.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l0_max_card: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Config file (key = value text, or JSON); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    matrix: Option<MatrixSpec>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    beta_mag: Option<f64>,
    /// Strictly decreasing noise variances, comma separated.
    #[arg(long)]
    sigma_grid: Option<String>,
    /// `<tag>` or `"<tag> <rule>"`; repeatable.
    #[arg(long)]
    algo: Vec<String>,
    /// Rule for a single `--algo` given without one.
    #[arg(long)]
    rule: Option<TuningRule>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    l0_max_card: Option<usize>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Append errors, precision and recall columns.
    #[arg(long)]
    diagnostics: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// 2 Q(sqrt(Gamma0)), the l0 error floor; needs --gamma0.
    #[arg(long)]
    l0_floor: bool,
    #[arg(long)]
    gamma0: Option<f64>,
    /// Gaussian tail Q(x).
    #[arg(long)]
    q: Option<f64>,
    /// Chi-square tail bound P(chi2_k > a^2); needs --k and --a-sq.
    #[arg(long)]
    chi2: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    a_sq: Option<f64>,
    /// l1-penalty E1 rate bound; needs --matrix, --support, --beta, --gamma1, --sigma-sq.
    #[arg(long)]
    e1: bool,
    /// l1-penalty E2 rate bound; same inputs as --e1.
    #[arg(long)]
    e2: bool,
    /// OMP selection margin; needs --matrix, --support, --beta-min.
    #[arg(long)]
    omp_margin: bool,
    #[arg(long)]
    matrix: Option<MatrixSpec>,
    #[arg(long)]
    support: Option<String>,
    /// Nonzero coefficients in support order, comma separated.
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    beta_min: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    sigma_sq: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV} is not an unsigned integer: {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|t| t.trim().parse().map_err(|_| usage(format!("malformed {what} entry {t:?}"))))
        .collect()
}

fn parse_support(text: &str) -> CliResult<SupportSet> {
    SupportSet::new(parse_list(text, "--support")?).map_err(|e| usage(e.to_string()))
}

/// Materializes one matrix; random specs draw a single matrix from the seed.
fn load_matrix(spec: &MatrixSpec, seed: Option<u64>) -> CliResult<DesignMatrix> {
    let spec = match spec {
        MatrixSpec::RandomGaussian { n, p, .. } => MatrixSpec::RandomGaussian { n: *n, p: *p, fresh_per_trial: false },
        other => other.clone(),
    };
    let seed = match (&spec, seed.or(env_seed()?)) {
        (MatrixSpec::RandomGaussian { .. }, None) => {
            return Err(usage(format!("random matrices need --seed or {SEED_ENV}")))
        }
        (_, s) => s.unwrap_or(0),
    };
    let prepared = PreparedMatrix::new(&spec, seed).map_err(|e| usage(e.to_string()))?;
    Ok(prepared.design().expect("fixed matrix").clone())
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(runtime)
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .map_err(|e| runtime(format!("cannot create temp file in {}: {e}", dir.display())))?;
            tmp.write_all(text.as_bytes()).map_err(runtime)?;
            tmp.persist(path)
                .map_err(|e| runtime(format!("cannot write {}: {}", path.display(), e.error)))?;
            Ok(())
        }
    }
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn run_qualify(args: QualifyArgs) -> CliResult<()> {
    let x = load_matrix(&args.matrix, args.seed)?;
    let support = args.support.as_deref().map(parse_support).transpose()?;
    let report = QualifierReport::compute(&x, support.as_ref(), args.spark_card).map_err(runtime)?;
    let text = match args.format {
        Format::Text => report.to_text(),
        Format::Json => to_json(&report),
    };
    emit(args.out.as_deref(), &text)
}

fn run_solve(args: SolveArgs) -> CliResult<()> {
    let x = load_matrix(&args.matrix, args.seed)?;
    let text = std::fs::read_to_string(&args.y)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.y.display())))?;
    let y = parse_vector(&text).map_err(|e| usage(format!("{}: {e}", args.y.display())))?;
    if y.len() != x.nrows() {
        return Err(usage(format!("y has {} entries but the matrix has {} rows", y.len(), x.nrows())));
    }
    if args.algo.needs_rule() && args.rule.is_none() {
        return Err(usage(format!("{} needs --rule", args.algo)));
    }
    let needs_k = matches!(args.algo, Algorithm::Oracle | Algorithm::OmpK)
        || (args.algo != Algorithm::L0 && args.rule.as_ref().is_some_and(|r| r.base.depends_on_cardinality()));
    let k_star = match args.k {
        Some(k) => k,
        None if needs_k => return Err(usage(format!("{} with this rule needs --k", args.algo))),
        None => 1,
    };
    let (n, p) = (x.nrows(), x.ncols());
    let ctx = SolveContext {
        k_star,
        l0_max_card: args.l0_max_card.unwrap_or_else(|| default_l0_max_card(n, p)),
    };
    let result = solve(args.algo, args.rule.as_ref(), &x, &y, args.sigma_sq, &ctx).map_err(runtime)?;
    emit(args.out.as_deref(), &to_json(&result))
}

fn sweep_config(args: &SweepArgs) -> CliResult<ExperimentConfig> {
    let seed = args.seed.or(env_seed()?);
    let mut algorithms = args
        .algo
        .iter()
        .map(|a| parse_algorithm_line(a))
        .collect::<Result<Vec<AlgorithmSpec>, _>>();
    if let Some(rule) = &args.rule {
        match args.algo.as_slice() {
            [one] if !one.trim().contains(char::is_whitespace) => {
                let algorithm: Algorithm = one.parse().map_err(|e: snr_sentry::Error| usage(e.to_string()))?;
                algorithms = AlgorithmSpec::new(algorithm, Some(*rule)).map(|a| vec![a]);
            }
            _ => return Err(usage("--rule needs exactly one --algo given without an inline rule")),
        }
    }
    let algorithms = algorithms.map_err(|e| usage(e.to_string()))?;
    let sigma_grid = args
        .sigma_grid
        .as_deref()
        .map(parse_sigma_grid)
        .transpose()
        .map_err(|e| usage(e.to_string()))?;

    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            parse_config(&text, seed).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => {
            let missing = |flag: &str| usage(format!("{flag} is required without --config"));
            ExperimentConfig {
                matrix: args.matrix.clone().ok_or_else(|| missing("--matrix"))?,
                k_star: args.k.ok_or_else(|| missing("--k"))?,
                beta_magnitude: 1.0,
                sigma_sq_grid: sigma_grid.clone().ok_or_else(|| missing("--sigma-grid"))?,
                algorithms: Vec::new(),
                trials: DEFAULT_TRIALS,
                master_seed: seed.ok_or_else(|| usage(format!("--seed or {SEED_ENV} is required")))?,
                l0_max_card: None,
            }
        }
    };
    if let Some(m) = &args.matrix {
        config.matrix = m.clone();
    }
    if let Some(k) = args.k {
        config.k_star = k;
    }
    if let Some(b) = args.beta_mag {
        config.beta_magnitude = b;
    }
    if let Some(g) = sigma_grid {
        config.sigma_sq_grid = g;
    }
    if !algorithms.is_empty() {
        config.algorithms = algorithms;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(s) = args.seed {
        config.master_seed = s;
    }
    if args.l0_max_card.is_some() {
        config.l0_max_card = args.l0_max_card;
    }
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

fn run_sweep(args: SweepArgs) -> CliResult<()> {
    let config = sweep_config(&args)?;
    let curve = sweep(&config, args.threads).map_err(runtime)?;
    emit(args.out.as_deref(), &curve.to_csv(args.diagnostics))?;
    match curve.total_errors() {
        0 => Ok(()),
        n => Err(runtime(format!("{n} trials errored and were counted as failures"))),
    }
}

fn require<T: Copy>(value: Option<T>, flag: &str, by: &str) -> CliResult<T> {
    value.ok_or_else(|| usage(format!("{by} needs {flag}")))
}

fn run_bounds(args: BoundsArgs) -> CliResult<()> {
    let mut out = Map::new();
    if args.l0_floor {
        let g = require(args.gamma0, "--gamma0", "--l0-floor")?;
        out.insert("l0_floor".into(), json!(l0_pe_lower_bound(g).map_err(|e| usage(e.to_string()))?));
    }
    if let Some(x) = args.q {
        out.insert("q".into(), json!(q_function(x)));
    }
    if args.chi2 {
        let k = require(args.k, "--k", "--chi2")?;
        let a_sq = require(args.a_sq, "--a-sq", "--chi2")?;
        out.insert("chi2_tail".into(), json!(chi2_tail_bound(k, a_sq).map_err(|e| usage(e.to_string()))?));
    }
    if args.e1 || args.e2 || args.omp_margin {
        let by = "--e1/--e2/--omp-margin";
        let spec = args.matrix.as_ref().ok_or_else(|| usage(format!("{by} needs --matrix")))?;
        let x = load_matrix(spec, args.seed)?;
        let support = parse_support(args.support.as_deref().ok_or_else(|| usage(format!("{by} needs --support")))?)?;
        if args.e1 || args.e2 {
            let beta: Vec<f64> = parse_list(args.beta.as_deref().ok_or_else(|| usage("--e1/--e2 need --beta"))?, "--beta")?;
            let gamma1 = require(args.gamma1, "--gamma1", "--e1/--e2")?;
            let sigma = require(args.sigma_sq, "--sigma-sq", "--e1/--e2")?.sqrt();
            let inputs = RateBoundInputs::from_design(&x, &support, beta, gamma1, sigma).map_err(runtime)?;
            if args.e1 {
                out.insert("e1".into(), serde_json::to_value(e1_rate_bound(&inputs).map_err(runtime)?).unwrap());
            }
            if args.e2 {
                out.insert("e2".into(), serde_json::to_value(e2_rate_bound(&inputs).map_err(runtime)?).unwrap());
            }
        }
        if args.omp_margin {
            let beta_min = require(args.beta_min, "--beta-min", "--omp-margin")?;
            out.insert("omp_margin".into(), json!(omp_selection_margin(&x, &support, beta_min).map_err(runtime)?));
        }
    }
    if out.is_empty() {
        return Err(usage("select at least one of --l0-floor, --q, --chi2, --e1, --e2, --omp-margin"));
    }
    emit(args.out.as_deref(), &to_json(&Value::Object(out)))
}

fn subcommand_usage(name: &str) -> String {
    let mut cmd = Cli::command();
    match cmd.find_subcommand_mut(name) {
        Some(sub) => sub.render_usage().to_string().replace("Usage: ", "Usage: snr-sentry "),
        None => cmd.render_usage().to_string(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let name = match &cli.command {
        Command::Qualify(_) => "qualify",
        Command::Solve(_) => "solve",
        Command::Sweep(_) => "sweep",
        Command::Bounds(_) => "bounds",
    };
    let result = match cli.command {
        Command::Qualify(a) => run_qualify(a),
        Command::Solve(a) => run_solve(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Bounds(a) => run_bounds(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("{}", subcommand_usage(name));
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
