//! Implied number of homogeneous members: how much pooling a roster of
//! unequal savings is worth.
//!
//! cargo run --example implied_number

use poolfund::pool_metrics::{
    implied_number, optimal_extension_amount, worst_case_nu_bounds, worst_case_nu_exact,
};
use poolfund::SavingsVector;

fn main() -> poolfund::Result<()> {
    for spec in ["1000@1", "500@100,500@200", "800@1,200@10", "900@1,100@10", "1@1,1@10"] {
        let savings: SavingsVector = spec.parse()?;
        let nu = implied_number(&savings);
        let best = optimal_extension_amount(&savings);
        println!(
            "{spec:>16}  N={:>5}  nu={nu:>9.3}  best newcomer brings {best:.3}",
            savings.len()
        );
    }

    println!();
    println!("worst case for 1100 members with savings in [100, 1000]:");
    let bounds = worst_case_nu_bounds(1100, 100.0, 1000.0)?;
    let exact = worst_case_nu_exact(1100, 100.0, 1000.0)?;
    println!("  lower {:.3}  exact {exact:.3}  upper {:.3}", bounds.lower, bounds.upper);
    Ok(())
}
