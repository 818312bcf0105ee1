//! Type I error of the unbalanced design from the bundled scenario file,
//! at a reduced number of replicates.
//!
//! cargo run --release --example simulate_table1 -- [nsim]

use rmsgt::sim::{format_tables, load_config, run_grid, RunOptions};

fn main() -> rmsgt::Result<()> {
    let nsim = std::env::args().nth(1).map_or(500, |s| s.parse().expect("nsim"));
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/table1.toml");
    let mut scenarios = load_config(&path)?;
    for sc in &mut scenarios {
        sc.nsim = nsim;
    }
    let results = run_grid(&scenarios, &RunOptions::default())?;
    print!("{}", format_tables(&results));
    for r in &results {
        for m in &r.methods {
            println!(
                "{:<8} {:<8} rate {:.3} (se {:.3})",
                r.scenario.id, m.method, m.rejection_rate, m.rejection_se
            );
        }
    }
    Ok(())
}
