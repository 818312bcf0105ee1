//! Builds a balanced-design grid in code and prints it in the blocked
//! layout (variance fraction outer, variance ratio inner).

use rmsgt::sim::{format_tables, run_grid, BalancedCell, MSpec, RunOptions, Scenario};
use rmsgt::ztest::NullVariance;
use rmsgt::{Hypothesis, Method};

fn main() -> rmsgt::Result<()> {
    let rho = 6f64.sqrt();
    let mut scenarios = Vec::new();
    for var_frac in [0.2, 0.8] {
        for ratio in [1.0 / 3.0, 3.0] {
            let cell = BalancedCell { var_frac, ratio };
            scenarios.push(Scenario {
                id: format!("f{var_frac}-r{}", cell.ratio_label()),
                table: "Power at rho = sqrt(6), n = 20, m = 10".into(),
                n: 20,
                m: MSpec::Constant(10),
                params: cell.params(rho)?,
                hyp: Hypothesis::new(3.0, 0.05)?,
                nsim: 300,
                b: 1_000,
                seed: 42,
                methods: vec![Method::Gt, Method::ZScore],
                null_variance: NullVariance::Reml,
                cell: Some(cell),
            });
        }
    }
    let results = run_grid(&scenarios, &RunOptions::default())?;
    print!("{}", format_tables(&results));
    Ok(())
}
