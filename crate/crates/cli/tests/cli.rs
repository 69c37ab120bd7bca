use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn evtsir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evtsir")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = evtsir(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    evtsir(args).status.code().expect("exited normally")
}

/// Header row and data rows of a CSV document, comment lines dropped.
fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with("# "));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn num(cell: &str) -> f64 {
    cell.parse().unwrap_or_else(|_| panic!("not a number: {cell}"))
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

#[test]
fn analytic_outputs_match_golden_files() {
    assert_eq!(stdout(&["cdf", "--preset", "table1-beta2", "--z", "0.5,1,2,10", "--L", "20"]), golden("cdf_beta2.csv"));
    assert_eq!(stdout(&["frechet", "--preset", "table1-rayleigh-n2", "--L", "20,40", "--nu", "1"]), golden("frechet_rayleigh_n2.csv"));
}

#[test]
fn column_headers_are_stable() {
    let rn1 = ["--preset", "table1-rayleigh-n1", "--L", "20", "--reps", "10000"];
    let cases: [(&[&str], &str); 6] = [
        (&["cdf", "--preset", "table1-rayleigh-n1", "--z", "1"], "z,exact,beta_prime_approx,status"),
        (&["pdf", "--preset", "table1-rayleigh-n1", "--z", "1", "--L", "20"], "z,exact,exact_max_L,asymptotic_max_L,beta_prime_approx,status"),
        (&["outage", "--gamma-t", "19"], "L,gamma_T,asymptotic,exact,simulated,simulated_se"),
        (&["rate"], "L,asymptotic,simulated,simulated_se"),
        (&["fas", "--Ls", "1"], "L,Ls,upper_bound,upper_bound_se,simulated,simulated_se,gap"),
        (&["kl"], "L,n,bins,kl,kl_raw,winsorized"),
    ];
    for (args, header) in cases {
        let mut full = args.to_vec();
        if !matches!(args[0], "cdf" | "pdf") {
            full.extend(rn1);
        }
        let text = stdout(&full);
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# evtsir "));
        assert!(lines.next().unwrap().starts_with("# config: {"));
        assert!(lines.next().unwrap().starts_with("# seed: "));
        assert_eq!(lines.next().unwrap(), header, "{args:?}");
    }
}

#[test]
fn rayleigh_closed_forms() {
    // One unit-mean Rayleigh interferer: F(z) = z/(1+z), a_L = L-1.
    let (_, rows) = csv(&stdout(&["cdf", "--preset", "table1-rayleigh-n1", "--z", "1"]));
    assert!((num(&rows[0][1]) - 0.5).abs() < 1e-12);
    let (_, rows) = csv(&stdout(&["frechet", "--preset", "table1-rayleigh-n1", "--L", "20"]));
    let (scale, shape, delta) = (num(&rows[0][1]), num(&rows[0][2]), num(&rows[0][3]));
    assert!((scale - 19.0).abs() < 1e-8 * 19.0);
    assert_eq!((shape, delta), (1.0, 1.0));
}

#[test]
fn json_output_round_trips() {
    let text = stdout(&["frechet", "--preset", "table1-beta3", "--L", "20,100", "--format", "json"]);
    let doc: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["command"], "frechet");
    assert_eq!(doc["config"]["preset"], "table1-beta3");
    assert_eq!(doc["columns"], serde_json::json!(["L", "scale", "shape", "delta"]));
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    // Same numbers as the CSV rendering, bit for bit.
    let (_, csv_rows) = csv(&stdout(&["frechet", "--preset", "table1-beta3", "--L", "20,100"]));
    for (j, c) in rows.iter().zip(&csv_rows) {
        assert_eq!(j[1].as_f64().unwrap(), num(&c[1]));
        assert_eq!(j[0].as_u64().unwrap(), c[0].parse::<u64>().unwrap());
    }
    let again: Value = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
    assert_eq!(again, doc);
}

#[test]
fn config_file_and_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"source": {"kappa": 0, "mu": 1, "m": 1}, "interferers": [{"kappa": 0, "mu": 1, "m": 1, "mean_power": 1}], "L": 20}"#,
    )
    .unwrap();
    let from_file = csv(&stdout(&["frechet", "--config", path.to_str().unwrap()])).1;
    let from_flags = csv(&stdout(&["frechet", "--preset", "table1-rayleigh-n1", "--L", "20"])).1;
    assert_eq!(from_file, from_flags);
}

#[test]
fn out_flag_writes_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cdf.csv");
    let args = ["cdf", "--preset", "table1-beta4", "--points", "5"];
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    assert!(stdout(&with_out).is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout(&args));
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["presets"]), 0);
    assert_eq!(code(&["cdf", "--preset", "table1-beta2", "--points", "0"]), 64);
    assert_eq!(code(&["frechet", "--preset", "table1-rayleigh-n1", "--L", "1"]), 64);
    assert_eq!(code(&["cdf", "--preset", "no-such-preset"]), 64);
    assert_eq!(code(&["cdf", "--bogus"]), 64);
    assert_eq!(code(&["rate", "--preset", "table1-rayleigh-n1", "--L", "20", "--reps", "10"]), 64);
    assert_eq!(code(&["fas", "--preset", "table1-rayleigh-n1", "--L", "4", "--Ls", "5"]), 64);
    // A tolerance below machine precision cannot be met.
    assert_eq!(code(&["cdf", "--preset", "table1-beta2", "--z", "1", "--rel-tol", "1e-18"]), 2);
    assert_eq!(code(&["cdf", "--preset", "table1-beta2", "--z", "1", "--out", "/nonexistent-dir/x.csv"]), 74);
}

#[test]
fn bad_config_fails_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"preset": "table1-beta2", "L": 20, "typo_field": 1}"#,
        r#"{"source": {"kappa": -1, "mu": 1, "m": 1}, "interferers": [{"kappa": 0, "mu": 1, "m": 1}], "L": 20}"#,
        r#"{"preset": "table1-beta2", "L": 20, "reps": 5}"#,
        "not json",
    ];
    for (i, body) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.json"));
        std::fs::write(&path, body).unwrap();
        let start = Instant::now();
        let c = code(&["rate", "--config", path.to_str().unwrap()]);
        let elapsed = start.elapsed();
        assert_eq!(c, 64, "{body}");
        // Process start-up included; a full-size run takes seconds.
        assert!(elapsed.as_millis() <= 100, "{body}: {elapsed:?}");
    }
}

#[test]
fn single_branch_selection_matches_plain_rate() {
    let common = ["--preset", "table1-beta2", "--L", "32", "--reps", "20000"];
    let mut fas = vec!["fas", "--Ls", "1"];
    fas.extend(common);
    let mut rate = vec!["rate"];
    rate.extend(common);
    let (_, f) = csv(&stdout(&fas));
    let (_, r) = csv(&stdout(&rate));
    let (fs, fse) = (num(&f[0][4]), num(&f[0][5]));
    let (rs, rse) = (num(&r[0][2]), num(&r[0][3]));
    assert!((fs - rs).abs() <= 3.0 * (fse * fse + rse * rse).sqrt(), "fas {fs}±{fse} vs rate {rs}±{rse}");
}

#[test]
fn reproduce_writes_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = evtsir(&["reproduce", "table1", "--out", dir.path().to_str().unwrap(), "--reps", "10000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv(&std::fs::read_to_string(dir.path().join("table1.csv")).unwrap());
    assert_eq!(header.len(), 7, "{header:?}");
    assert_eq!(header[0], "L");
    assert_eq!(rows.len(), 5);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["20", "40", "60", "80", "100"]);
    assert!(rows.iter().flatten().skip(1).all(|c| c.parse::<f64>().is_ok()));
}

#[test]
fn unknown_reproduce_target_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["reproduce", "fig99", "--out", dir.path().to_str().unwrap()]), 64);
}
