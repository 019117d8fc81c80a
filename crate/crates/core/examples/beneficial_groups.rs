//! Prefix scan for the best subgroup of a pool, checked against exhaustive
//! search on a small roster.
//!
//! cargo run --example beneficial_groups

use poolfund::pool_metrics::{best_prefix, brute_force_best_subgroup, is_beneficial, SavingsHashMap};

fn report(map: &SavingsHashMap) {
    let scan = best_prefix(map);
    println!("{:>10}  {:>8}  {:>10}", "amount", "members", "prefix nu");
    for (i, row) in scan.prefixes.iter().enumerate() {
        let mark = if i == scan.index { "  <- best" } else { "" };
        println!(
            "{:>10.3}  {:>8}  {:>10.3}{mark}",
            row.z, row.cumulative_count, row.cumulative_nu
        );
    }
    println!("beneficial: {}\n", is_beneficial(map));
}

fn main() -> poolfund::Result<()> {
    report(&SavingsHashMap::new(vec![1.0, 10.0], vec![800.0, 200.0])?);
    report(&SavingsHashMap::new(vec![1.0, 1.5, 2.0], vec![300.0, 200.0, 100.0])?);

    let small = SavingsHashMap::new(vec![1.0, 2.0, 7.0, 30.0], vec![4.0, 3.0, 2.0, 1.0])?;
    report(&small);
    let brute = brute_force_best_subgroup(&small)?;
    println!("exhaustive search picks counts {:?} with nu {:.6}", brute.counts, brute.nu_max);
    Ok(())
}
