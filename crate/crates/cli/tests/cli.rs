use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_snr-sentry"));
    cmd.env_remove("SNR_SENTRY_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn qualify_erc_text_and_json() {
    let o = run(&["qualify", "--matrix", "erc:32"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("mutual_coherence: 0.176777"), "{text}");
    assert!(text.contains("mic_max_sparsity: 3"), "{text}");

    let o = run(&["qualify", "--matrix", "erc:32", "--support", "1,5,20", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["mutual_coherence"].as_f64().unwrap() - 32f64.sqrt().recip()).abs() < 1e-12);
    assert_eq!(v["erc_holds"], serde_json::Value::Bool(true));
}

#[test]
fn bounds_l0_floor() {
    let o = run(&["bounds", "--l0-floor", "--gamma0", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let floor = v["l0_floor"].as_f64().unwrap();
    assert_eq!(format!("{floor:.4}"), "0.1573");
}

#[test]
fn bounds_rate_and_chi2() {
    let o = run(&[
        "bounds", "--chi2", "--k", "5", "--a-sq", "30", "--e1", "--e2", "--omp-margin", "--matrix", "erc:32",
        "--support", "3,17,40", "--beta", "1,-1,1", "--gamma1", "12", "--sigma-sq", "0.0016", "--beta-min", "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["chi2_tail"].as_f64().unwrap() < 1e-3);
    assert!((0.0..=1.0).contains(&v["e1"]["value"].as_f64().unwrap()));
    assert!(v["e2"]["exact_q_form"]["raw"].is_number());
    assert!(v["omp_margin"].as_f64().unwrap() > 0.0);

    let o = run(&["bounds", "--chi2", "--k", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--a-sq"));
    assert_eq!(run(&["bounds"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    let o = run(&["sweep", "--config", "missing.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.cfg"));
    assert!(stderr(&o).contains("Usage"));

    for args in [
        &["qualify", "--matrix", "erc:32", "--bogus"][..],
        &["frobnicate"],
        &["qualify", "--matrix", "erc:31"],
        &["sweep", "--matrix", "erc:8", "--k", "1", "--sigma-grid", "0.1", "--algo", "l0", "--rule", "fixed:-1", "--seed", "1"],
        &["sweep", "--matrix", "erc:8", "--k", "1", "--sigma-grid", "0.1", "--algo", "omp_k"],
        &["sweep", "--matrix", "erc:8", "--k", "1", "--sigma-grid", "0.01,0.1", "--algo", "omp_k", "--seed", "1"],
        &["qualify", "--matrix", "rand:4x8"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["sweep", "--help"]).status.code(), Some(0));
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn solve_from_files() {
    let dir = tempfile::tempdir().unwrap();
    // Columns e1, e2, (e1 + e2)/sqrt 2; y = 2 e1 + e2.
    let m = write(dir.path(), "x.txt", "2 3\n1 0 0.7071067811865476\n0 1 0.7071067811865476\n");
    let y = write(dir.path(), "y.txt", "2\n1\n");
    let spec = format!("file:{}", m.display());
    let o = run(&["solve", "--matrix", &spec, "--y", y.to_str().unwrap(), "--algo", "omp_k", "--k", "2", "--sigma-sq", "1e-4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let support: Vec<u64> = v["support"].as_array().unwrap().iter().map(|s| s.as_u64().unwrap()).collect();
    assert_eq!(support.len(), 2);
    assert!(v["objective"].as_f64().unwrap() < 1e-20);
    assert!(v["iterations"].is_number());
    assert_eq!(v["estimate"].as_array().unwrap().len(), 3);

    // The Dantzig solver rejects a non-orthonormal design at run time.
    let o = run(&["solve", "--matrix", &spec, "--y", y.to_str().unwrap(), "--algo", "dantzig", "--rule", "fixed:1", "--sigma-sq", "1e-2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let short = write(dir.path(), "short.txt", "1\n");
    let o = run(&["solve", "--matrix", &spec, "--y", short.to_str().unwrap(), "--algo", "omp_k", "--k", "1", "--sigma-sq", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["solve", "--matrix", &spec, "--y", y.to_str().unwrap(), "--algo", "l1_penalty", "--sigma-sq", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

const SWEEP: [&str; 14] = [
    "sweep", "--matrix", "rand:8x16", "--k", "2", "--sigma-grid", "1e-1,1e-2,1e-4", "--algo", "l0 bic", "--algo",
    "l1_penalty l1_candes*pow:0.3", "--algo", "omp_rcsc rcsc*loginv", "--trials",
];

fn sweep_to(out: &Path, threads: &str, seed: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(SWEEP).args(["300", "--threads", threads, "--diagnostics", "--out", out.to_str().unwrap()]);
    match seed {
        Some(s) => cmd.args(["--seed", s]),
        None => cmd.env("SNR_SENTRY_SEED", "99"),
    };
    cmd.output().unwrap()
}

#[test]
fn sweep_is_byte_identical_across_threads_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = (0..4).map(|i| dir.path().join(format!("{i}.csv"))).collect();
    for (p, threads, seed) in [
        (&paths[0], "1", Some("99")),
        (&paths[1], "8", Some("99")),
        (&paths[2], "0", Some("99")),
        (&paths[3], "2", None),
    ] {
        let o = sweep_to(p, threads, seed);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
    let first = std::fs::read(&paths[0]).unwrap();
    assert!(first.starts_with(b"sigma_sq,snr_db,algorithm,rule,pe_hat,trials,failures,stderr,errors"));
    assert_eq!(first.iter().filter(|&&b| b == b'\n').count(), 1 + 3 * 3);
    for p in &paths[1..] {
        assert_eq!(std::fs::read(p).unwrap(), first, "{}", p.display());
    }
    // Only the requested outputs remain; temp files were renamed away.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 4);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.cfg",
        "matrix = erc:8\nk = 1\nsigma_grid = 1e-1, 1e-3\ntrials = 50\nseed = 1\nalgo = omp_k\n",
    );
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--trials", "20", "--algo", "oracle"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains(",oracle,-,") && r.contains(",20,")), "{csv}");
}

#[test]
fn shipped_configs_run_quickly() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let start = Instant::now();
        let o = run(&["sweep", "--config", path.to_str().unwrap()]);
        let took = start.elapsed();
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), stderr(&o));
        assert!(stdout(&o).lines().count() > 1);
        assert!(took < Duration::from_secs(60), "{} took {took:?}", path.display());
        seen += 1;
    }
    assert!(seen >= 3);
}

#[test]
fn errored_trials_exit_two_after_writing_csv() {
    let o = run(&[
        "sweep", "--matrix", "erc:8", "--k", "1", "--sigma-grid", "0.1", "--algo", "dantzig ds_candes", "--algo", "omp_k",
        "--trials", "10", "--seed", "1", "--diagnostics",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let csv = stdout(&o);
    assert!(csv.lines().nth(1).unwrap().starts_with("1e-1,0.969100,dantzig,ds_candes,1,10,10,0,10,"), "{csv}");
    assert!(stderr(&o).contains("10 trials errored"));
}
