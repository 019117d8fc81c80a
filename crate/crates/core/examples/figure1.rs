//! One sampled income path of a 900 + 100 pool with its tolerance band and
//! the Monte Carlo stop time, written as CSV to stdout.
//!
//! cargo run --release --example figure1 -- [replications] > path.csv

use poolfund::artifacts::csv_string;
use poolfund::experiments::{run_figure1, Figure1Config};
use poolfund::{GompertzMakeham, LifeTable};

fn main() -> poolfund::Result<()> {
    let replications = std::env::args().nth(1).and_then(|r| r.parse().ok()).unwrap_or(20_000);
    let table = LifeTable::gompertz_makeham(GompertzMakeham::SYNTHETIC_UK_LIKE, 70, 121, 0.0)?;
    let config = Figure1Config {
        replications,
        ..Figure1Config::default()
    };
    let out = run_figure1(&config, &table)?;
    eprintln!("stop time {:.2} years", out.stop_time.t_star.unwrap_or(f64::NAN));
    print!("{}", csv_string(&out.rows)?);
    Ok(())
}
