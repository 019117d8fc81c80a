//! Closed-form horizon curves as the pool shifts from rich to poor members.
//!
//! cargo run --example sweep

use poolfund::experiments::{run_sweep, HorizonMethod, SweepConfig};
use poolfund::{GompertzMakeham, LifeTable};

fn main() -> poolfund::Result<()> {
    let table = LifeTable::gompertz_makeham(GompertzMakeham::SYNTHETIC_UK_LIKE, 70, 121, 0.0)?;
    let config = SweepConfig {
        method: HorizonMethod::Approximation,
        ratios: vec![0.5, 0.1],
        poor_counts: (100..1000).step_by(100).collect(),
        ..SweepConfig::default()
    };
    for row in run_sweep(&config, &table)? {
        println!(
            "{:<9} ratio {:<4} poor {:>4} rich {:>4}  nu {:>7.1}  {:.2}y",
            format!("{:?}", row.curve),
            row.ratio.map_or("-".into(), |r| r.to_string()),
            row.poor_count,
            row.rich_count,
            row.implied_number,
            row.years
        );
    }
    Ok(())
}
