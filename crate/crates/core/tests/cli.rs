use std::path::Path;

use rmsgt::io::{read_long_csv, write_summary_csv, RunRecord};
use rmsgt::sim::generate_raw;
use rmsgt::{datasets, summarize, LmmParams, RandomStream};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["rmsgt"];
    full.extend_from_slice(args);
    let code = rmsgt::cli::run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_oximetry(dir: &Path) -> String {
    let path = dir.join("oximetry.csv");
    let mut s = String::from("m,mean\n");
    for (m, y) in datasets::OXIMETRY_M.iter().zip(datasets::OXIMETRY_MEANS) {
        s.push_str(&format!("{m},{y}\n"));
    }
    std::fs::write(&path, s).unwrap();
    path.to_str().unwrap().to_string()
}

fn record(stdout: &str) -> RunRecord {
    let line = stdout.lines().find(|l| l.starts_with('{')).expect("json line");
    serde_json::from_str(line).unwrap()
}

fn field<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no {key} in\n{stdout}"))[key.len()..]
        .trim()
}

#[test]
fn oximetry_gt_and_zscore() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_oximetry(dir.path());
    let base = ["test", "--input", &path, "--format", "summary-csv", "--sse", "221.037", "--rho0", "3", "--alpha", "0.1"];

    let mut gt = base.to_vec();
    gt.extend(["--method", "gt", "--B", "10000", "--seed", "123", "--json"]);
    let (code, out, _) = run(&gt);
    assert_eq!(code, 0);
    let rec = record(&out);
    let p = rec.p_value.unwrap();
    assert!((0.004..=0.008).contains(&p), "{p}");
    let (lo, hi) = rec.ci_rho.unwrap();
    assert!((lo - 1.665).abs() < 0.05 && (hi - 2.528).abs() < 0.05);
    assert_eq!(field(&out, "p-value"), format!("{p:.4}"));
    assert!(out.contains("# replay: rmsgt test"));
    assert!(out.contains("seed = 123"));

    let mut z = base.to_vec();
    z.extend(["--method", "zscore"]);
    let (code, out, _) = run(&z);
    assert_eq!(code, 0);
    assert_eq!(field(&out, "p-value"), "0.0102");
    assert_eq!(field(&out, "CI rho "), "[0.000, 2.687]  (90%)");
    assert!(field(&out, "CI rho^2").starts_with("[-1.447, 7.221]"));
}

#[test]
fn long_and_summary_inputs_agree_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let params = LmmParams::from_sd(0.4, 1.2, 0.9).unwrap();
    let m: Vec<usize> = (3..15).collect();
    let raw = generate_raw(&m, &params, &mut RandomStream::new(8).rng()).unwrap();
    let long = dir.path().join("long.csv");
    let mut text = String::from("subject,value\n");
    // interleave subjects and add blank lines
    let longest = raw.groups().iter().map(|(_, v)| v.len()).max().unwrap();
    for j in 0..longest {
        for (id, v) in raw.groups() {
            if let Some(y) = v.get(j) {
                text.push_str(&format!("{id},{y}\n"));
            }
        }
        text.push('\n');
    }
    std::fs::write(&long, &text).unwrap();
    let summary = summarize(&read_long_csv(text.as_bytes()).unwrap()).unwrap();
    let short = dir.path().join("summary.csv");
    let mut buf = Vec::new();
    write_summary_csv(&summary, &mut buf).unwrap();
    std::fs::write(&short, buf).unwrap();
    let sse = format!("{}", summary.sse());

    for method in ["gt", "gt-plain", "zscore", "zwald"] {
        let common = ["--rho0", "3", "--method", method, "--B", "2000", "--seed", "4", "--json"];
        let mut a = vec!["test", "--input", long.to_str().unwrap(), "--format", "long-csv"];
        a.extend(common);
        let mut b = vec!["test", "--input", short.to_str().unwrap(), "--format", "summary-csv", "--sse", &sse];
        b.extend(common);
        let (ca, oa, ea) = run(&a);
        let (cb, ob, eb) = run(&b);
        assert_eq!((ca, cb), (0, 0), "{ea}{eb}");
        let (ra, rb) = (record(&oa), record(&ob));
        assert_eq!(ra.p_value.unwrap().to_bits(), rb.p_value.unwrap().to_bits(), "{method}");
        assert_eq!(ra.ci_rho, rb.ci_rho);
        assert_eq!(ra.inputs_sha256, rb.inputs_sha256);
    }

    let (code, out, _) = run(&["summarize", "--input", long.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.starts_with(&format!("# sse = {sse}\nm,mean\n")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    std::fs::write(&one, "subject,value\na,1\na,2\n").unwrap();
    let (code, _, err) = run(&["test", "--input", one.to_str().unwrap(), "--rho0", "3"]);
    assert_eq!(code, 3);
    assert!(err.contains("at least 2 subjects"), "{err}");

    let flat = dir.path().join("flat.csv");
    std::fs::write(&flat, "subject,value\na,1\na,1\nb,2\nb,2\n").unwrap();
    let (code, _, err) = run(&["test", "--input", flat.to_str().unwrap(), "--rho0", "3"]);
    assert_eq!(code, 3);
    assert!(err.contains("sse = 0"), "{err}");
    let (code, _, _) = run(&["estimate", "--input", flat.to_str().unwrap()]);
    assert_eq!(code, 3);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "subject,value\na,1\nb,oops\n").unwrap();
    let (code, _, err) = run(&["test", "--input", bad.to_str().unwrap(), "--rho0", "3"]);
    assert_eq!(code, 2);
    assert!(err.contains("line 3, column 2"), "{err}");

    let path = write_oximetry(dir.path());
    let (code, _, _) = run(&["test", "--input", &path, "--format", "summary-csv", "--rho0", "3"]);
    assert_eq!(code, 2, "summary-csv without --sse");
    let (code, _, _) = run(&["test", "--input", &path, "--format", "summary-csv", "--sse", "221.037", "--rho0", "-1"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["test", "--input", &path, "--format", "summary-csv", "--sse", "221.037", "--rho0", "3", "--B", "10"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["test", "--input", "/nonexistent/file.csv", "--rho0", "3"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 2);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("simulate"));
}

#[test]
fn estimate_reports_fit() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_oximetry(dir.path());
    let (code, out, _) = run(&["estimate", "--input", &path, "--format", "summary-csv", "--sse", "221.037", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(field(&out, "mu"), "-0.5788");
    assert_eq!(field(&out, "boundary"), "no");
    let rec = record(&out);
    assert_eq!(rec.command, "estimate");
    assert!(rec.p_value.is_none());
    let (code, out, _) = run(&["estimate", "--input", &path, "--format", "summary-csv", "--sse", "221.037", "--reml"]);
    assert_eq!(code, 0);
    assert!(out.contains("-2 log RL"));
}

#[test]
fn estimate_recovers_known_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let truth = LmmParams::from_sd(0.8, 1.1, 0.7).unwrap();
    let (n, m) = (400usize, 8usize);
    let raw = generate_raw(&vec![m; n], &truth, &mut RandomStream::new(12).rng()).unwrap();
    let path = dir.path().join("big.csv");
    let mut text = String::from("subject,value\n");
    for (id, v) in raw.groups() {
        for y in v {
            text.push_str(&format!("{id},{y}\n"));
        }
    }
    std::fs::write(&path, text).unwrap();
    let (code, out, _) = run(&["estimate", "--input", path.to_str().unwrap(), "--json"]);
    assert_eq!(code, 0);
    let est = record(&out).estimates;
    let big_n = (n * m) as f64;
    let tau = truth.sigma_b2 + truth.sigma_w2 / m as f64;
    let se_mu = (tau / n as f64).sqrt();
    let se_sw = truth.sigma_w2.sqrt() / (2.0 * (big_n - n as f64)).sqrt();
    let se_sb = (2.0 * tau * tau / (n as f64 - 1.0)).sqrt() / (2.0 * truth.sigma_b2.sqrt());
    assert!((est.mu - truth.mu).abs() < 3.0 * se_mu);
    assert!((est.sigma_w2.sqrt() - truth.sigma_w2.sqrt()).abs() < 3.0 * se_sw);
    assert!((est.sigma_b2.sqrt() - truth.sigma_b2.sqrt()).abs() < 3.0 * se_sb);
}

#[test]
fn record_file_appends_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_oximetry(dir.path());
    let log = dir.path().join("runs.jsonl");
    for seed in ["1", "2"] {
        let (code, _, _) = run(&[
            "test", "--input", &path, "--format", "summary-csv", "--sse", "221.037", "--rho0", "3", "--seed", seed,
            "--B", "500", "--record", log.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let text = std::fs::read_to_string(&log).unwrap();
    let recs: Vec<RunRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].seed, Some(1));
    assert_eq!(recs[0].inputs_sha256, recs[1].inputs_sha256);
    assert_eq!(recs[0].version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.toml");
    std::fs::write(
        &config,
        "[[scenario]]\nid = \"g\"\nn = 6\nm = 4\nrho = 2.0\nvar_frac = [0.4]\nratio = [\"1:3\", \"3:1\"]\nrho0 = 2.0\nnsim = 40\nB = 200\nseed = 9\nmethods = [\"GT\", \"Z-Wald\"]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let (code, out, err) = run(&["simulate", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("# scenario g-f0.4-r1:3"));
    assert!(out.contains("total runtime"));
    let tables = std::fs::read_to_string(out_dir.join("tables.txt")).unwrap();
    assert!(tables.contains("1:3") && tables.contains("3:1") && tables.contains("Z-Wald"));
    let log = std::fs::read_to_string(out_dir.join("replicates.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2 * 40 * 2);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
}

#[test]
fn simulate_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[[scenario]]\nn = 6\nm = 4\nmu = 0\nsigma_w = 1\nsigma_b = 1\nrho0 = 2\nnsim = 0\nalpha = 3\n").unwrap();
    let (code, _, err) = run(&["simulate", config.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("nsim") && err.contains("alpha"), "{err}");

    std::fs::write(&config, "[[scenario]\n").unwrap();
    let (code, _, err) = run(&["simulate", config.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn bundled_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let (code, out, err) = run(&["simulate", path.to_str().unwrap(), "--dry-run"]);
        assert_eq!(code, 0, "{}: {err}", path.display());
        assert!(out.contains("# scenario"));
        seen += 1;
    }
    assert!(seen >= 5);
}
