//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test --release --test acceptance`.

use std::path::PathBuf;
use std::time::Instant;

use rmsgt::data::{Hypothesis, LmmParams, Method};
use rmsgt::estimation::fit_mle;
use rmsgt::gt::{gt_pvalue, gt_pvalue_plain, solve_qb, ssr_at, GtConfig};
use rmsgt::sim::{generate_summary, load_config, run_grid, RunOptions, Scenario, ScenarioResult};
use rmsgt::special::nc_chisq1_sf;
use rmsgt::ztest::z_score_test;
use rmsgt::{datasets, RandomStream};

use rand::Rng;
use statrs::function::gamma::{gamma_ur, ln_gamma};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn scenario(file: &str, id: &str) -> Scenario {
    load_config(&configs().join(file))
        .unwrap_or_else(|e| panic!("{file}: {e}"))
        .into_iter()
        .find(|s| s.id == id)
        .unwrap_or_else(|| panic!("{file}: no scenario {id}"))
}

fn rate(res: &ScenarioResult, method: Method) -> f64 {
    res.method(method).expect("method was run").rejection_rate
}

fn c1_oximetry_z() -> Outcome {
    let data = datasets::oximetry();
    let hyp = Hypothesis::new(3.0, 0.1).unwrap();
    let start = Instant::now();
    let res = z_score_test(&data, &hyp).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let p = res.p_value.value();
    let r2 = res.ci_rho2.unwrap();
    let r = res.ci_rho;
    let pass = within(p, 0.010, 0.002)
        && within(r2.0, -1.447, 0.01)
        && within(r2.1, 7.221, 0.01)
        && within(r.0, 0.0, 0.01)
        && within(r.1, 2.687, 0.01)
        && secs < 1.0;
    outcome(
        pass,
        format!(
            "p = {p:.4}, rho^2 CI [{:.3}, {:.3}], rho CI [{:.3}, {:.3}], {secs:.3} s",
            r2.0, r2.1, r.0, r.1
        ),
    )
}

fn c2_oximetry_gt() -> Outcome {
    let data = datasets::oximetry();
    let hyp = Hypothesis::new(3.0, 0.1).unwrap();
    let seeds = RandomStream::new(2024);
    let start = Instant::now();
    let mut good = 0;
    let mut worst = String::new();
    for k in 0..50u64 {
        let seed: u64 = seeds.substream(k).rng().random();
        let res = gt_pvalue(&data, &hyp, &GtConfig::new(10_000, seed)).unwrap();
        let p = res.p_value.value();
        let (lo, hi) = res.ci_rho;
        if (0.004..=0.008).contains(&p) && within(lo, 1.665, 0.05) && within(hi, 2.528, 0.05) {
            good += 1;
        } else if worst.is_empty() {
            worst = format!("; first miss: seed {seed} p = {p:.4}, CI [{lo:.3}, {hi:.3}]");
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(good >= 48 && secs < 5.0, format!("{good}/50 seeds in band, {secs:.2} s{worst}"))
}

fn c3_mle() -> Outcome {
    let p = fit_mle(&datasets::oximetry()).unwrap().params;
    let (mu, sw, sb) = (p.mu, p.sigma_w2.sqrt(), p.sigma_b2.sqrt());
    let pass = within(mu, -0.57, 0.01) && within(sw, 1.48, 0.01) && within(sb, 1.38, 0.01);
    outcome(
        pass,
        format!("(mu, sigma_w, sigma_b) = ({mu:.4}, {sw:.4}, {sb:.4}); target (-0.57, 1.48, 1.38)"),
    )
}

fn c4_rao_blackwell() -> Outcome {
    let root = RandomStream::new(44);
    let b = 10_000;
    let mut ok = 0;
    let mut lines = Vec::new();
    for k in 0..20u64 {
        let s = root.substream(k);
        let mut rng = s.substream(0).rng();
        let n = rng.random_range(5..=25usize);
        let m: Vec<usize> = (0..n).map(|_| rng.random_range(2..=15usize)).collect();
        let params = LmmParams::from_sd(
            rng.random_range(-1.5..1.5),
            rng.random_range(0.5..2.0),
            rng.random_range(0.0..1.5),
        )
        .unwrap();
        let data = generate_summary(&m, &params, &mut rng).unwrap();
        let rho0 = params.rms() * rng.random_range(1.0..1.4);
        let hyp = Hypothesis::new(rho0, 0.05).unwrap();
        let seed: u64 = rng.random();
        let cfg = GtConfig::new(b, seed);
        let rb = gt_pvalue(&data, &hyp, &cfg).unwrap().p_value.value();
        let plain = gt_pvalue_plain(&data, &hyp, &cfg).unwrap().p_value.value();
        let band = 4.0 * (rb * (1.0 - rb) / b as f64).sqrt();
        if (rb - plain).abs() <= band {
            ok += 1;
        } else {
            lines.push(format!("instance {k}: {rb:.4} vs {plain:.4}"));
        }
    }
    outcome(ok >= 19, format!("{ok}/20 within 4 SE {}", lines.join(", ")))
}

fn c5_root_round_trip() -> Outcome {
    let mut rng = RandomStream::new(55).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=30usize);
        let m: Vec<usize> = (0..n).map(|_| rng.random_range(1..=25usize)).collect();
        let ybar: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let qw = 10f64.powf(rng.random_range(-3.0..2.0));
        let sb2 = 10f64.powf(rng.random_range(-4.0..3.0));
        let target = ssr_at(sb2, &ybar, &m, qw);
        let got = solve_qb(&ybar, &m, qw, target).unwrap();
        worst = worst.max((got - sb2).abs() / sb2);
    }
    let ybar = [0.3, -1.2, 2.0, 0.7];
    let m = [3, 5, 2, 8];
    let at_zero = ssr_at(0.0, &ybar, &m, 0.9);
    let boundary = solve_qb(&ybar, &m, 0.9, at_zero).unwrap() == 0.0
        && solve_qb(&ybar, &m, 0.9, at_zero * 1.5).unwrap() == 0.0;
    outcome(
        worst <= 1e-8 && boundary,
        format!("max relative error {worst:.2e} over 1000 instances, boundary exact: {boundary}"),
    )
}

fn c6_table1_table3() -> Outcome {
    let null = scenario("table1.toml", "n16-a05");
    let power = scenario("table3.toml", "n16-a05");
    let start = Instant::now();
    let res = run_grid(&[null, power], &RunOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let gt_size = rate(&res[0], Method::Gt);
    let z_size = rate(&res[0], Method::ZScore);
    let gt_power = rate(&res[1], Method::Gt);
    let z_power01 = res[1].rejection_rate_at(Method::ZScore, 0.01).unwrap();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let pass = within(gt_size, 0.028, 0.012)
        && within(z_size, 0.023, 0.012)
        && within(gt_power, 0.821, 0.025)
        && within(z_power01, 0.032, 0.015)
        && secs < 300.0;
    outcome(
        pass,
        format!(
            "size GT {gt_size:.3} Z {z_size:.3}; power GT {gt_power:.3}, Z(0.01) {z_power01:.3}; {secs:.1} s on {cores} core(s)"
        ),
    )
}

fn c7_balanced_cells() -> Outcome {
    let size = scenario("table2.toml", "a05-f0.2-r1:1");
    let ci = scenario("table4.toml", "ci-f0.4-r1:1");
    let res = run_grid(&[size, ci], &RunOptions::default()).unwrap();
    let gt_size = rate(&res[0], Method::Gt);
    let gt = res[1].method(Method::Gt).unwrap();
    let pass = within(gt_size, 0.047, 0.012) && within(gt.coverage, 0.896, 0.013) && within(gt.avg_ci_width, 0.909, 0.03);
    outcome(
        pass,
        format!(
            "GT size {gt_size:.3} at (0.2, 1:1); GCI coverage {:.3}, width {:.3} at (0.4, 1:1)",
            gt.coverage, gt.avg_ci_width
        ),
    )
}

fn c8_wald_inflation() -> Outcome {
    let sc = scenario("tableS1.toml", "m5-a05-f0.2-r1:3");
    let res = run_grid(&[sc], &RunOptions::default()).unwrap();
    let wald = rate(&res[0], Method::ZWald);
    let gt = rate(&res[0], Method::Gt);
    outcome(wald > 0.08 && gt < 0.06, format!("Z-Wald size {wald:.3}, GT size {gt:.3}"))
}

/// `P(χ'²₁(λ) ≥ x)` as a Poisson mixture of central chi-square tails.
fn series_sf(x: f64, lambda: f64) -> f64 {
    let half = lambda / 2.0;
    (0..200)
        .map(|k| {
            let kf = k as f64;
            let weight = if half == 0.0 {
                if k == 0 { 1.0 } else { 0.0 }
            } else {
                (-half + kf * half.ln() - ln_gamma(kf + 1.0)).exp()
            };
            weight * gamma_ur(0.5 + kf, x / 2.0)
        })
        .sum()
}

fn c9_special_functions() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut at = (0.0, 0.0);
    for i in 1..=50 {
        let x = 40.0 * i as f64 / 50.0;
        for j in 0..50 {
            let lambda = 60.0 * j as f64 / 49.0;
            let err = (nc_chisq1_sf(x, lambda).unwrap().value() - series_sf(x, lambda)).abs();
            if err > worst {
                worst = err;
                at = (x, lambda);
            }
        }
    }
    outcome(
        worst <= 1e-10,
        format!("max |error| {worst:.2e} at (x, lambda) = ({:.2}, {:.2})", at.0, at.1),
    )
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = rmsgt::cli::run(args.iter().copied(), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap())
}

fn results_only(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("total runtime"))
        .map(String::from)
        .collect()
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("oximetry.csv");
    let mut csv = String::from("m,mean\n");
    for (m, y) in datasets::OXIMETRY_M.iter().zip(datasets::OXIMETRY_MEANS) {
        csv.push_str(&format!("{m},{y}\n"));
    }
    std::fs::write(&summary, csv).unwrap();
    let path = summary.to_str().unwrap();
    let mut mismatches = Vec::new();
    for method in ["gt", "gt-plain", "zscore", "zwald"] {
        let runs: Vec<(i32, String)> = ["1", "2", "4"]
            .iter()
            .map(|k| {
                cli(&[
                    "rmsgt", "test", "--input", path, "--format", "summary-csv", "--sse", "221.037", "--rho0", "3",
                    "--alpha", "0.1", "--method", method, "--B", "5000", "--seed", "99", "--json", "--parallelism", k,
                ])
            })
            .collect();
        if runs.iter().any(|(c, _)| *c != 0) || runs.windows(2).any(|w| results_only(&w[0].1) != results_only(&w[1].1)) {
            mismatches.push(method.to_string());
        }
    }
    let config = dir.path().join("small.toml");
    std::fs::write(
        &config,
        "[[scenario]]\nid = \"d\"\nn = 8\nm = 4\nrho = 2.0\nvar_frac = [0.4, 0.8]\nratio = [\"1:1\"]\nrho0 = 2.0\nnsim = 60\nB = 300\nseed = 5\n",
    )
    .unwrap();
    let conf = config.to_str().unwrap();
    let sims: Vec<(i32, String)> = ["1", "3"]
        .iter()
        .map(|k| cli(&["rmsgt", "simulate", conf, "--parallelism", k]))
        .collect();
    if sims.iter().any(|(c, _)| *c != 0) || results_only(&sims[0].1) != results_only(&sims[1].1) {
        mismatches.push("simulate".into());
    }
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "test (4 methods) and simulate identical across --parallelism 1/2/4 and 1/3".to_string()
        } else {
            format!("differences in {}", mismatches.join(", "))
        },
    )
}

type Criterion = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("oximetry Z-score p and CIs", c1_oximetry_z),
        ("oximetry GT p and CI over 50 seeds", c2_oximetry_gt),
        ("oximetry ML estimates", c3_mle),
        ("Rao-Blackwell vs plain Monte Carlo", c4_rao_blackwell),
        ("sigma_b^2 root round trip", c5_root_round_trip),
        ("unbalanced size and power (n = 16)", c6_table1_table3),
        ("balanced size, coverage, width (n = 20, m = 10)", c7_balanced_cells),
        ("Z-Wald inflation (n = 10, m = 5)", c8_wald_inflation),
        ("noncentral chi-square tail vs series", c9_special_functions),
        ("determinism across parallelism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("{tag} [{:>2}] {name}: {} ({:.1} s)", i + 1, o.detail, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
