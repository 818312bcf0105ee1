//! Analytic integration over `Z` against plain Monte Carlo: same pivotal
//! draws, p-values across 200 seeds.

use rmsgt::gt::{GtConfig, PivotalSample, PlainSample};
use rmsgt::{datasets, RandomStream};

fn spread(v: &[f64]) -> (f64, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (mean, var.sqrt())
}

fn main() -> rmsgt::Result<()> {
    let data = datasets::oximetry();
    let rho0 = 2.3;
    let b = 2_000;
    let mut rb = Vec::new();
    let mut plain = Vec::new();
    for k in 0..200 {
        let cfg = GtConfig::new(b, k);
        let root = RandomStream::new(k);
        rb.push(PivotalSample::generate_from(&data, root, &cfg)?.pvalue(rho0).value());
        plain.push(PlainSample::generate_from(&data, root, &cfg)?.pvalue(rho0).value());
    }
    let (m1, s1) = spread(&rb);
    let (m2, s2) = spread(&plain);
    println!("rho0 = {rho0}, B = {b}, 200 seeds");
    println!("analytic   mean {m1:.5}  sd {s1:.5}");
    println!("plain MC   mean {m2:.5}  sd {s2:.5}");
    println!("variance ratio {:.1}", (s2 / s1).powi(2));
    Ok(())
}
