//! Acceptance gate for the command line tool: re-running any subcommand with
//! an identical configuration must reproduce its artifacts byte for byte.
//! Prints "ACCEPTANCE C8: PASS|FAIL (details)" before asserting.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_matlrt"))
        .args(args)
        .env_remove("MATLRT_CACHE_DIR")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn record(checks: &mut Vec<(String, bool)>, name: &str, same: bool) {
    checks.push((name.to_string(), same));
}

#[test]
fn c8_identical_configs_reproduce_artifacts_byte_for_byte() {
    let work = tempfile::tempdir().unwrap();
    let dir = |name: &str| {
        let d = work.path().join(name);
        std::fs::create_dir_all(&d).unwrap();
        d
    };
    let mut checks: Vec<(String, bool)> = Vec::new();

    // `test`: two cold runs against fresh cache directories must agree on the
    // report and on the cache file they wrote; two warm repeats against one
    // directory must also agree.
    let input = fixture("exch_m10_rho08_seed7.csv");
    let (cache_a, cache_b) = (dir("cache_a"), dir("cache_b"));
    let (rep_a, rep_b) = (work.path().join("a.json"), work.path().join("b.json"));
    let test_args = |cache: &Path, rep: &Path| {
        vec![
            "test".to_string(),
            "--input".into(),
            input.display().to_string(),
            "--S".into(),
            "3000".into(),
            "--seed".into(),
            "2".into(),
            "--cache-dir".into(),
            cache.display().to_string(),
            "--output".into(),
            rep.display().to_string(),
        ]
    };
    let run_strings =
        |args: Vec<String>| run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    run_strings(test_args(&cache_a, &rep_a));
    run_strings(test_args(&cache_b, &rep_b));
    record(&mut checks, "test report (cold)", bytes(&rep_a) == bytes(&rep_b));
    let cache_name = "null_m10_p1_S3000_seed2.qcache";
    record(
        &mut checks,
        "test cache file",
        bytes(&cache_a.join(cache_name)) == bytes(&cache_b.join(cache_name)),
    );
    let (rep_c, rep_d) = (work.path().join("c.json"), work.path().join("d.json"));
    run_strings(test_args(&cache_a, &rep_c));
    run_strings(test_args(&cache_a, &rep_d));
    record(&mut checks, "test report (warm)", bytes(&rep_c) == bytes(&rep_d));

    // `null`: independent runs write byte-identical cache files.
    let (null_a, null_b) = (dir("null_a"), dir("null_b"));
    for d in [&null_a, &null_b] {
        run(&[
            "null", "--m", "4", "--S", "2000", "--seed", "9", "--cache-dir",
            d.to_str().unwrap(),
        ]);
    }
    let null_name = "null_m4_p1_S2000_seed9.qcache";
    record(
        &mut checks,
        "null cache file",
        bytes(&null_a.join(null_name)) == bytes(&null_b.join(null_name)),
    );

    // `power`: the CSV is a pure function of the configuration.
    let (pow_a, pow_b) = (work.path().join("p1.csv"), work.path().join("p2.csv"));
    for p in [&pow_a, &pow_b] {
        run(&[
            "power", "--kind", "sparse-pair", "--m", "5", "--n-reps", "200", "--S", "2000",
            "--seed", "6", "--output", p.to_str().unwrap(),
        ]);
    }
    record(&mut checks, "power csv", bytes(&pow_a) == bytes(&pow_b));

    // `eigen`: the Gibbs chain and the p-value column are fully seeded.
    let graph = fixture("graph_m16_seed9.csv");
    let (eig_a, eig_b) = (work.path().join("e1.csv"), work.path().join("e2.csv"));
    for p in [&eig_a, &eig_b] {
        run(&[
            "eigen", "--input", graph.to_str().unwrap(), "--rank", "1", "--n-iter", "600",
            "--burn-in", "300", "--thin", "3", "--S", "1500", "--seed", "5", "--output",
            p.to_str().unwrap(),
        ]);
    }
    record(&mut checks, "eigen csv", bytes(&eig_a) == bytes(&eig_b));

    // `demean`: residual stack and coefficient report.
    let stack = fixture("stack_m6_p2_seed11.csv");
    let cov = fixture("cov_m6_p2_seed11.csv");
    let res = work.path().join("residuals.csv");
    let mut reports = Vec::new();
    let mut residuals = Vec::new();
    for _ in 0..2 {
        let out = run(&[
            "demean", "--replicates", stack.to_str().unwrap(), "--covariates",
            cov.to_str().unwrap(), "--output", res.to_str().unwrap(),
        ]);
        reports.push(out.stdout);
        residuals.push(bytes(&res));
    }
    record(&mut checks, "demean residuals", residuals[0] == residuals[1]);
    record(&mut checks, "demean report", reports[0] == reports[1]);

    let pass = checks.iter().all(|(_, same)| *same);
    let details: Vec<String> = checks
        .iter()
        .map(|(name, same)| format!("{name}: {}", if *same { "identical" } else { "DIFFERS" }))
        .collect();
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE C8: {verdict} ({})", details.join(", "));
    assert!(pass, "ACCEPTANCE C8: {verdict} ({})", details.join(", "));
}
