//! Savings cap advice for a synthetic roster of 1000 members in 50 savings
//! bands with log-normally spread amounts.
//!
//! cargo run --example cap_advice -- [seed] [roster.csv]
//!
//! With a second argument the roster is also written there, one amount per
//! row, for `poolfund cap-advise --savings roster.csv`.

use poolfund::pool_metrics::{cap_advise, DEFAULT_CAP_SLACK};
use poolfund::{GompertzMakeham, LifeTable, SavingsVector, StabilityParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

fn roster(seed: u64) -> poolfund::Result<SavingsVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Band levels in thousands; most members sit in the lower bands.
    let level: LogNormal<f64> = LogNormal::new(5.3, 1.1).expect("valid log-normal");
    let mut bands: Vec<f64> = (0..50).map(|_| (level.sample(&mut rng) / 10.0).round() * 10.0).collect();
    bands.sort_by(f64::total_cmp);
    let mut amounts = Vec::with_capacity(1000);
    for (i, &band) in bands.iter().enumerate() {
        let weight = 50 - i;
        let count = 1000 * weight / (50 * 51 / 2);
        amounts.extend(std::iter::repeat_n(band.max(10.0), count));
    }
    while amounts.len() < 1000 {
        amounts.push(bands[0].max(10.0));
    }
    SavingsVector::new(amounts)
}

fn main() -> poolfund::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let savings = roster(seed)?;
    if let Some(path) = std::env::args().nth(2) {
        let rows: String = savings.amounts().iter().map(|s| format!("{s}\n")).collect();
        std::fs::write(&path, format!("amount\n{rows}")).expect("roster file is writable");
    }
    let table = LifeTable::gompertz_makeham(GompertzMakeham::SYNTHETIC_UK_LIKE, 70, 121, 0.0)?;
    let advice = cap_advise(&savings, Some(&table), &StabilityParams::default(), DEFAULT_CAP_SLACK)?;

    println!("{:>8}  {:>8}  {:>9}", "amount", "members", "nu");
    for row in &advice.prefixes {
        println!("{:>8}  {:>8}  {:>9.1}", row.z, row.cumulative_count, row.cumulative_nu);
    }
    println!();
    println!(
        "cap between {} and {} ({} to {} members), nu {:.1} to {:.1}",
        advice.cap_low, advice.cap_high, advice.members_low, advice.members_high,
        advice.nu_window_min, advice.nu_window_max
    );
    println!(
        "everyone uncapped: nu {:.1}; everyone capped at {}: nu {:.1}",
        advice.nu_all_members, advice.cap_high, advice.nu_capped
    );
    if let Some(h) = advice.horizons {
        println!(
            "stable horizon: {:.2}y uncapped, {:.2}y to {:.2}y in the window, {:.2}y capped",
            h.all_members, h.window_low, h.window_high, h.capped
        );
    }
    Ok(())
}
