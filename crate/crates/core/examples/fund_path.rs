//! Replays one seeded death scenario through the fund and prints how a poor
//! and a rich member's income move against their starting income.
//!
//! cargo run --example fund_path -- [seed]

use poolfund::experiments::fund_path;
use poolfund::{GompertzMakeham, LifeTable, SavingsVector};

fn main() -> poolfund::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let table = LifeTable::gompertz_makeham(GompertzMakeham::SYNTHETIC_UK_LIKE, 70, 121, 0.02)?;
    let savings: SavingsVector = "90@1,10@10".parse()?;
    let rows = fund_path(&savings, &table, seed)?;

    // Member 0 holds 1, member 90 holds 10.
    let watched = [0, 90];
    let start: Vec<f64> = watched.iter().map(|&m| rows[m].income).collect();
    println!("year  alive  income/start(poor)  income/start(rich)");
    for year in rows.chunks(savings.len()) {
        let alive = year.iter().filter(|r| r.alive).count();
        let ratio = |k: usize| {
            let r = &year[watched[k]];
            if r.alive { format!("{:.4}", r.income / start[k]) } else { "dead".into() }
        };
        println!("{:>4}  {alive:>5}  {:>18}  {:>18}", year[0].time_years, ratio(0), ratio(1));
        if alive == 0 {
            break;
        }
    }
    Ok(())
}
