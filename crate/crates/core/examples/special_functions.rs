//! The numerical building blocks: erfc, the normal quantile and the
//! noncentral chi-square (1 df) tail.

use rmsgt::special::{erfc, nc_chisq1_sf, std_normal_cdf, std_normal_quantile};

fn main() -> rmsgt::Result<()> {
    println!("{:>6} {:>24} {:>24}", "x", "erfc(x)", "Phi(-x)");
    for x in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 26.0] {
        println!("{x:>6} {:>24.17e} {:>24.17e}", erfc(x), std_normal_cdf(-x)?.value());
    }
    println!();
    for p in [1e-12, 0.025, 0.5, 0.95, 1.0 - 1e-12] {
        println!("quantile({p:e}) = {:.15}", std_normal_quantile(p)?);
    }
    println!("\nP(chi'^2_1(lambda) >= x)");
    print!("{:>8}", "x \\ lam");
    let lambdas = [0.0, 1.0, 4.0, 16.0];
    for l in lambdas {
        print!("{l:>12}");
    }
    println!();
    for x in [0.5, 2.0, 3.841_458_820_694_124, 10.0, 30.0] {
        print!("{x:>8.3}");
        for l in lambdas {
            print!("{:>12.3e}", nc_chisq1_sf(x, l)?.value());
        }
        println!();
    }
    Ok(())
}
