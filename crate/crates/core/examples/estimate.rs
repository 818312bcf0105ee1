//! Likelihood fits of the one-way random-effects model: unconstrained and
//! on the null boundary `ρ = ρ0`.

use rmsgt::datasets;
use rmsgt::estimation::{fit_mle, fit_mle_null, fit_reml, fit_reml_null, FitReport};

fn show(label: &str, r: &FitReport) {
    let p = r.params;
    println!(
        "{label:<16} mu = {:>7.4}  sigma_w = {:.4}  sigma_b = {:.4}  rho = {:.4}  -2l = {:.3}{}",
        p.mu,
        p.sigma_w2.sqrt(),
        p.sigma_b2.sqrt(),
        p.rms(),
        r.neg2loglik,
        if r.boundary_sigma_b2 { "  (sigma_b = 0)" } else { "" }
    );
}

fn main() -> rmsgt::Result<()> {
    let data = datasets::oximetry();
    println!("n = {}, N = {}, sse = {}\n", data.n(), data.total(), data.sse());
    show("ML", &fit_mle(&data)?);
    show("REML", &fit_reml(&data)?);
    for rho0 in [2.5, 3.0] {
        show(&format!("ML, rho = {rho0}"), &fit_mle_null(&data, rho0)?);
        show(&format!("REML, rho = {rho0}"), &fit_reml_null(&data, rho0)?);
    }
    Ok(())
}
