//! Monte Carlo stable horizon of a two-level pool next to its closed-form
//! approximation.
//!
//! cargo run --release --example stability -- [replications]

use std::time::Instant;

use poolfund::approx::{approx_u, ApproxInputs};
use poolfund::stability::estimate_max_stable_time;
use poolfund::{GompertzMakeham, LifeTable, SavingsVector, StabilityParams};

fn main() -> poolfund::Result<()> {
    let replications = std::env::args()
        .nth(1)
        .and_then(|r| r.parse().ok())
        .unwrap_or(100_000);
    let table = LifeTable::gompertz_makeham(GompertzMakeham::SYNTHETIC_UK_LIKE, 70, 121, 0.0)?;
    let params = StabilityParams::default();

    for spec in ["1000@1", "800@1,200@10", "900@1,100@10"] {
        let savings: SavingsVector = spec.parse()?;
        let started = Instant::now();
        let mc = estimate_max_stable_time(&savings, &params, &table, replications, 7)?;
        let approx = approx_u(&ApproxInputs::from_savings(&savings, params.eps_lower, params.beta)?);
        println!(
            "{spec:>14}  u_mc={:.4} (se {:.4})  u_approx={:.4}  t_mc={:.2}y  t_approx={:.2}y  [{:.1}s]",
            mc.u_star,
            mc.std_error_u,
            approx.u,
            mc.t_star.unwrap_or(f64::NAN),
            table.f_inverse(approx.u),
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
