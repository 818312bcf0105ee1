use rmsgt::gt::{gt_pvalue, gt_pvalue_plain, GtConfig};
use rmsgt::sim::{parse_config, read_replicate_log, run_grid, summarize_records, write_replicate_log, RunOptions};
use rmsgt::{datasets, Hypothesis, Method};

const GRID: &str = r#"
[defaults]
n = 10
m = 5
rho = 3.0
rho0 = 3.0
nsim = 80
B = 300
methods = ["GT", "GT-plain-MC", "Z-score", "Z-Wald"]

[[scenario]]
id = "cells"
var_frac = [0.2, 0.8]
ratio = ["1:3", "3:1"]
seed = 31

[[scenario]]
id = "direct"
m_list = [5, 6, 7, 8, 9, 10, 11, 12, 13, 14]
rho = 2.0
var_frac = 0.5
ratio = 1
alpha = 0.1
seed = 32
"#;

#[test]
fn grid_is_independent_of_thread_count() {
    let scs = parse_config(GRID).unwrap();
    assert_eq!(scs.len(), 5);
    let one = run_grid(&scs, &RunOptions { parallelism: Some(1), full_scale: false }).unwrap();
    let four = run_grid(&scs, &RunOptions { parallelism: Some(4), full_scale: false }).unwrap();
    for (a, b) in one.iter().zip(&four) {
        assert_eq!(a.scenario.id, b.scenario.id);
        assert_eq!(a.records, b.records);
        assert_eq!(a.methods, b.methods);
    }
}

#[test]
fn persisted_log_reproduces_every_summary() {
    let scs = parse_config(GRID).unwrap();
    let results = run_grid(&scs, &RunOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_replicate_log(&results, &mut buf).unwrap();
    let records = read_replicate_log(&buf[..]).unwrap();
    for res in &results {
        let mine: Vec<_> = records.iter().filter(|r| r.scenario == res.scenario.id).cloned().collect();
        assert_eq!(mine.len(), res.scenario.nsim * res.scenario.methods.len());
        for s in &res.methods {
            let again = summarize_records(s.method, &mine);
            assert_eq!((again.rejections, again.completed), (s.rejections, s.completed));
            assert_eq!(again.coverage, s.coverage);
            assert!(s.rejection_rate >= 0.0 && s.rejection_rate <= 1.0);
        }
    }
}

#[test]
fn gt_results_independent_of_thread_count() {
    let data = datasets::oximetry();
    let hyp = Hypothesis::new(2.5, 0.05).unwrap();
    let base = GtConfig::new(4_000, 77);
    let runs: Vec<_> = [Some(1), Some(2), Some(3), None]
        .into_iter()
        .map(|k| {
            let cfg = GtConfig { parallelism: k, ..base };
            (gt_pvalue(&data, &hyp, &cfg).unwrap(), gt_pvalue_plain(&data, &hyp, &cfg).unwrap())
        })
        .collect();
    for w in runs.windows(2) {
        assert_eq!(w[0].0.p_value.value().to_bits(), w[1].0.p_value.value().to_bits());
        assert_eq!(w[0].0.ci_rho, w[1].0.ci_rho);
        assert_eq!(w[0].1.p_value.value().to_bits(), w[1].1.p_value.value().to_bits());
        assert_eq!(w[0].1.ci_rho, w[1].1.ci_rho);
    }
}

#[test]
fn full_scale_overrides_sizes() {
    let mut scs = parse_config(GRID).unwrap();
    scs.truncate(1);
    scs[0].methods = vec![Method::ZWald];
    scs[0].nsim = 1;
    let res = run_grid(&scs, &RunOptions { parallelism: None, full_scale: true }).unwrap();
    assert_eq!(res[0].scenario.nsim, 10_000);
    assert_eq!(res[0].scenario.b, 10_000);
    assert_eq!(res[0].records.len(), 10_000);
}
