//! Plain-text tables of simulation summaries.
//!
//! Scenarios sharing a `table` label form one table. When every scenario in
//! it is a balanced cell, columns are ratio labels nested under
//! variance-fraction blocks; otherwise there is one column per scenario.

use std::fmt::Write;

use super::ScenarioResult;
use crate::data::Method;

type Column = fn(&super::MethodSummary) -> f64;

const COL: usize = 7;
const LABEL: usize = 16;

pub fn format_tables(results: &[ScenarioResult]) -> String {
    let mut labels: Vec<&str> = Vec::new();
    for r in results {
        if !labels.contains(&r.scenario.table.as_str()) {
            labels.push(&r.scenario.table);
        }
    }
    let mut out = String::new();
    for label in labels {
        let group: Vec<&ScenarioResult> = results.iter().filter(|r| r.scenario.table == label).collect();
        format_one(&mut out, label, &group);
        out.push('\n');
    }
    out
}

fn shared<T: PartialEq + std::fmt::Display>(group: &[&ScenarioResult], f: impl Fn(&ScenarioResult) -> T) -> String {
    let first = f(group[0]);
    if group.iter().all(|r| f(r) == first) {
        first.to_string()
    } else {
        "varies".into()
    }
}

fn format_one(out: &mut String, label: &str, group: &[&ScenarioResult]) {
    let m_desc = |r: &ScenarioResult| match &r.scenario.m {
        super::MSpec::Constant(m) => m.to_string(),
        super::MSpec::List(l) => format!("{}..{}", l.iter().min().unwrap_or(&0), l.iter().max().unwrap_or(&0)),
    };
    let _ = writeln!(
        out,
        "{label}  (n = {}, m = {}, rho0 = {}, alpha = {}, nsim = {}, B = {})",
        shared(group, |r| r.scenario.n),
        shared(group, m_desc),
        shared(group, |r| r.scenario.hyp.rho0),
        shared(group, |r| r.scenario.hyp.alpha),
        shared(group, |r| r.scenario.nsim),
        shared(group, |r| r.scenario.b),
    );
    let cells: Option<Vec<_>> = group.iter().map(|r| r.scenario.cell).collect();
    match cells {
        Some(cells) => {
            let mut fracs: Vec<f64> = Vec::new();
            for c in &cells {
                if !fracs.contains(&c.var_frac) {
                    fracs.push(c.var_frac);
                }
            }
            let mut top = format!("{:LABEL$}", "(sw2+sb2)/rho2");
            let mut sub = format!("{:LABEL$}", "sw2:sb2");
            for f in &fracs {
                let span = cells.iter().filter(|c| c.var_frac == *f).count();
                let _ = write!(top, "  {:^w$}", f, w = span * COL);
                sub.push_str("  ");
                for c in cells.iter().filter(|c| c.var_frac == *f) {
                    let _ = write!(sub, "{:>COL$}", c.ratio_label());
                }
            }
            let _ = writeln!(out, "{}", top.trim_end());
            let _ = writeln!(out, "{sub}");
            let order: Vec<&ScenarioResult> = fracs
                .iter()
                .flat_map(|f| group.iter().copied().filter(move |r| r.scenario.cell.map(|c| c.var_frac) == Some(*f)))
                .collect();
            body(out, &order, true);
        }
        None => {
            let mut head = format!("{:LABEL$}", "scenario");
            for r in group {
                let _ = write!(head, " {:>w$}", r.scenario.id, w = COL.max(r.scenario.id.len()));
            }
            let _ = writeln!(out, "{head}");
            body(out, group, false);
        }
    }
}

fn body(out: &mut String, order: &[&ScenarioResult], blocked: bool) {
    let mut methods: Vec<Method> = Vec::new();
    for r in order {
        for m in &r.scenario.methods {
            if !methods.contains(m) {
                methods.push(*m);
            }
        }
    }
    let sections: [(&str, Column); 3] = [
        ("rejection rate", |s| s.rejection_rate),
        ("CI coverage", |s| s.coverage),
        ("CI avg width", |s| s.avg_ci_width),
    ];
    for (title, metric) in sections {
        let _ = writeln!(out, "{title}");
        for &m in &methods {
            let mut line = format!("  {:w$}", m.label(), w = LABEL - 2);
            let mut prev_frac = None;
            for r in order {
                let width = if blocked { COL } else { COL.max(r.scenario.id.len()) };
                if blocked {
                    let f = r.scenario.cell.map(|c| c.var_frac);
                    if f != prev_frac {
                        line.push_str("  ");
                        prev_frac = f;
                    }
                } else {
                    line.push(' ');
                }
                let cell = r.method(m).map_or("-".to_string(), |s| format!("{:.3}", metric(s)));
                let _ = write!(line, "{cell:>width$}");
            }
            let _ = writeln!(out, "{line}");
        }
    }
    if let Some(fail) = order.iter().flat_map(|r| r.methods.iter()).map(|s| s.failures).max() {
        if fail > 0 {
            let _ = writeln!(out, "(some replicates failed; rates use completed replicates only)");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn result(id: &str, cell: Option<BalancedCell>, rate: f64) -> ScenarioResult {
        let sc = Scenario {
            id: id.into(),
            table: "T".into(),
            n: 20,
            m: MSpec::Constant(10),
            params: LmmParams::new(1.0, 1.0, 1.0).unwrap(),
            hyp: Hypothesis::new(3.0, 0.05).unwrap(),
            nsim: 100,
            b: 1000,
            seed: 1,
            methods: vec![Method::Gt],
            null_variance: NullVariance::Reml,
            cell,
        };
        ScenarioResult {
            scenario: sc,
            methods: vec![MethodSummary {
                method: Method::Gt,
                completed: 100,
                failures: 0,
                rejections: (rate * 100.0) as usize,
                rejection_rate: rate,
                rejection_se: 0.0,
                coverage: 0.9,
                avg_ci_width: 1.25,
            }],
            runtime_secs: 0.0,
            records: Vec::new(),
        }
    }

    #[test]
    fn blocked_layout() {
        let mut rs = Vec::new();
        for f in [0.2, 0.4] {
            for r in [1.0 / 3.0, 1.0, 3.0] {
                rs.push(result("x", Some(BalancedCell { var_frac: f, ratio: r }), f));
            }
        }
        let text = format_tables(&rs);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("T  (n = 20, m = 10"));
        assert!(lines[1].contains("0.2") && lines[1].contains("0.4"));
        assert_eq!(lines[2].matches("1:3").count(), 2);
        assert_eq!(lines[2].matches("3:1").count(), 2);
        let gt = lines.iter().find(|l| l.trim_start().starts_with("GT")).unwrap();
        assert_eq!(gt.matches("0.200").count(), 3);
        assert_eq!(gt.matches("0.400").count(), 3);
        assert!(text.contains("CI coverage") && text.contains("1.250"));
    }

    #[test]
    fn plain_layout() {
        let rs = vec![result("alpha-scenario", None, 0.05), result("b", None, 0.1)];
        let text = format_tables(&rs);
        assert!(text.contains("alpha-scenario"));
        assert!(text.contains("0.050") && text.contains("0.100"));
    }
}
