//! Long and summary CSV input: simulate raw measurements, write them as
//! `subject,value`, read them back and test.

use rmsgt::gt::{gt_pvalue, GtConfig};
use rmsgt::io::{inputs_digest, read_long_csv, read_summary_csv, write_summary_csv};
use rmsgt::sim::generate_raw;
use rmsgt::{summarize, Hypothesis, LmmParams, RandomStream};

fn main() -> rmsgt::Result<()> {
    let truth = LmmParams::from_sd(0.3, 1.0, 0.8)?;
    let m = [4, 6, 5, 8, 3, 7, 6, 5, 9, 4];
    let raw = generate_raw(&m, &truth, &mut RandomStream::new(3).rng())?;

    let mut long = String::from("subject,value\n");
    for (id, values) in raw.groups() {
        for v in values {
            long.push_str(&format!("{id},{v}\n"));
        }
    }
    let from_long = summarize(&read_long_csv(long.as_bytes())?)?;

    let mut short = Vec::new();
    write_summary_csv(&from_long, &mut short)?;
    print!("{}", String::from_utf8_lossy(&short));
    println!("sse = {}", from_long.sse());
    let from_summary = read_summary_csv(&short[..], from_long.sse())?;
    assert_eq!(inputs_digest(&from_long), inputs_digest(&from_summary));
    println!("sha256 {}", inputs_digest(&from_long));

    let hyp = Hypothesis::new(2.0, 0.05)?;
    let res = gt_pvalue(&from_summary, &hyp, &GtConfig::new(5_000, 1))?;
    println!("true rho = {:.3}; p = {:.4}, 95% CI [{:.3}, {:.3}]", truth.rms(), res.p_value.value(), res.ci_rho.0, res.ci_rho.1);
    Ok(())
}
