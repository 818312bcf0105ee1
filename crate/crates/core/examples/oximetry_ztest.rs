//! Large-sample Z tests on the oximetry data, with each choice of null
//! variance.

use rmsgt::ztest::{null_params, r_statistic, z_score_test_with, z_wald_test, NullVariance};
use rmsgt::{datasets, Hypothesis};

fn main() -> rmsgt::Result<()> {
    let data = datasets::oximetry();
    let hyp = Hypothesis::new(3.0, 0.1)?;
    println!("R = sum y^2 / N = {:.5}\n", r_statistic(&data));

    for mode in [NullVariance::Reml, NullVariance::Ml, NullVariance::Scaled] {
        let p = null_params(&data, hyp.rho0, mode)?;
        let res = z_score_test_with(&data, &hyp, mode)?;
        let (lo, hi) = res.ci_rho2.unwrap();
        println!(
            "score ({mode:<6}) null (mu, sw2, sb2) = ({:.3}, {:.3}, {:.3})  p = {:.4}  rho^2 CI [{lo:.3}, {hi:.3}]  rho CI [{:.3}, {:.3}]",
            p.mu, p.sigma_w2, p.sigma_b2, res.p_value.value(), res.ci_rho.0, res.ci_rho.1
        );
    }
    let wald = z_wald_test(&data, &hyp)?;
    println!(
        "Wald                                                 p = {:.4}  rho CI [{:.3}, {:.3}]",
        wald.p_value.value(),
        wald.ci_rho.0,
        wald.ci_rho.1
    );
    Ok(())
}
