//! Closed-form stable horizon across pool sizes, and the one-year variance
//! formulas it rests on.
//!
//! cargo run --example approximation

use poolfund::approx::{
    approx_u, overlay_income_variance, reciprocal_survival_variance, ApproxInputs,
};
use poolfund::{GompertzMakeham, LifeTable, SavingsVector};

fn main() -> poolfund::Result<()> {
    let table = LifeTable::gompertz_makeham(GompertzMakeham::SYNTHETIC_UK_LIKE, 70, 121, 0.0)?;

    println!("{:>8}  {:>8}  {:>8}", "nu", "u", "years");
    for nu in [10.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 5000.0, 20000.0] {
        let u = approx_u(&ApproxInputs::new(nu, 0.1, 0.9)?).u;
        println!("{nu:>8}  {u:>8.4}  {:>8.2}", table.f_inverse(u));
    }

    println!();
    for spec in ["1000@1", "800@1,200@10"] {
        let savings: SavingsVector = spec.parse()?;
        println!(
            "{spec:>14}  var(overlay income of member 0) = {:.3e}  var(experienced/ideal survival) = {:.3e}",
            overlay_income_variance(&savings, &table, 0)?,
            reciprocal_survival_variance(&savings, &table)?,
        );
    }
    Ok(())
}
