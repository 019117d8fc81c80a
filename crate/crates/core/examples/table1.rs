//! Poor-only, rich-only and mixed pool horizons over savings ratios on the
//! synthetic table.
//!
//! cargo run --release --example table1 -- [replications]

use poolfund::experiments::{run_table1, Table1Config};
use poolfund::{GompertzMakeham, LifeTable};

fn main() -> poolfund::Result<()> {
    let replications = std::env::args().nth(1).and_then(|r| r.parse().ok()).unwrap_or(20_000);
    let table = LifeTable::gompertz_makeham(GompertzMakeham::SYNTHETIC_UK_LIKE, 70, 121, 0.0)?;
    let config = Table1Config {
        replications,
        ..Table1Config::default()
    };
    println!("{:>9}  {:>5}  {:>8}  {:>8}  {:>8}  {:>7}", "group", "m/M", "nu", "mc (y)", "approx", "error");
    for row in run_table1(&config, &table)? {
        println!(
            "{:>9}  {:>5}  {:>8.1}  {:>8.2}  {:>8.2}  {:>+7.2}",
            format!("{:?}", row.group),
            row.ratio,
            row.implied_number,
            row.mc_years,
            row.approx_years,
            row.error_years
        );
    }
    Ok(())
}
