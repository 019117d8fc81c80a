//! Monte Carlo estimate of how long a pool keeps its income within bounds.
//!
//! Work happens on the transformed clock `u = F(t)`, under which member
//! lifetimes become i.i.d. uniforms. Each replication draws the sorted
//! uniforms from exponential spacings, assigns the members' savings to the
//! deaths in a random order, and finds the first `u` at which the ratio of
//! ideal to experienced survival leaves `[1 - eps_lower, 1 + eps_upper]`.
//! The stable horizon is a lower empirical quantile of those exit times, so
//! it does not depend on the mortality table; only the final map back to
//! calendar years does.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::life_table::LifeTable;
use crate::savings::SavingsVector;

/// Tolerance bounds and required confidence for a stable income.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityParams {
    /// Largest tolerated relative income drop, in (0, 1).
    pub eps_lower: f64,
    /// Largest tolerated relative income rise; `f64::INFINITY` disables the
    /// upper bound.
    pub eps_upper: f64,
    /// Required probability of staying within bounds, in [0, 1].
    pub beta: f64,
}

impl StabilityParams {
    pub fn new(eps_lower: f64, eps_upper: f64, beta: f64) -> Result<Self> {
        if !(eps_lower > 0.0 && eps_lower < 1.0) {
            return Err(Error::InvalidParams(format!(
                "eps_lower must lie in (0, 1), got {eps_lower}"
            )));
        }
        // Written to reject NaN as well.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(eps_upper > 0.0) {
            return Err(Error::InvalidParams(format!(
                "eps_upper must be positive or infinite, got {eps_upper}"
            )));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParams(format!("beta must lie in [0, 1], got {beta}")));
        }
        Ok(Self {
            eps_lower,
            eps_upper,
            beta,
        })
    }

    /// Lower bound only.
    pub fn lower_only(eps_lower: f64, beta: f64) -> Result<Self> {
        Self::new(eps_lower, f64::INFINITY, beta)
    }

    pub fn has_upper_bound(&self) -> bool {
        self.eps_upper.is_finite()
    }
}

impl Default for StabilityParams {
    /// 10% lower tolerance, no upper bound, 90% confidence.
    fn default() -> Self {
        Self {
            eps_lower: 0.1,
            eps_upper: f64::INFINITY,
            beta: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityEstimate {
    /// Maximal stable transformed time.
    pub u_star: f64,
    /// `u_star` in calendar years, when a life table was supplied.
    pub t_star: Option<f64>,
    pub replications: usize,
    /// Monte Carlo standard error of `u_star`.
    pub std_error_u: f64,
}

/// Deterministic RNG for replication `index` of a run keyed by `seed`.
/// Streams are independent of how replications are split across workers.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Order statistics of `n` i.i.d. uniforms, built from normalised partial
/// sums of `n + 1` standard exponentials.
pub fn sample_order_statistics<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    fill_order_statistics(&mut out, n, rng);
    out
}

fn fill_order_statistics<R: Rng + ?Sized>(out: &mut Vec<f64>, n: usize, rng: &mut R) {
    out.clear();
    let mut running = 0.0;
    for _ in 0..n {
        running += rng.sample::<f64, _>(Exp1);
        out.push(running);
    }
    let total = running + rng.sample::<f64, _>(Exp1);
    for v in out.iter_mut() {
        *v /= total;
    }
}

/// A uniformly random death order: position `k` holds the index of the
/// member who dies `k`-th.
pub fn assign_savings_to_deaths<R: Rng + ?Sized>(savings: &SavingsVector, rng: &mut R) -> Vec<usize> {
    let n = savings.len();
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let j = rng.gen_range(k..n);
        order.swap(k, j);
    }
    order
}

/// Transformed time at which the income first leaves its band, given the
/// sorted death times and the savings of the member dying at each of them.
/// Returns 1 when the income never leaves the band.
pub fn stop_time_tau(
    order_stats: &[f64],
    savings_in_death_order: &[f64],
    params: &StabilityParams,
) -> Result<f64> {
    if order_stats.len() != savings_in_death_order.len() {
        return Err(Error::Precondition(format!(
            "{} death times but {} savings",
            order_stats.len(),
            savings_in_death_order.len()
        )));
    }
    let total: f64 = savings_in_death_order.iter().sum();
    Ok(first_exit(order_stats, total, |k| savings_in_death_order[k], params))
}

/// Scans the intervals `[U(k), U(k+1))` between consecutive deaths. The
/// survival ratio `(1 - v) / (1 - F̂)` only falls inside an interval and only
/// jumps up at deaths, so a lower breach shows at the interval's right end
/// and an upper breach at its left end.
fn first_exit(
    order_stats: &[f64],
    total: f64,
    mut savings_of_death: impl FnMut(usize) -> f64,
    params: &StabilityParams,
) -> f64 {
    let n = order_stats.len();
    let keep = 1.0 - params.eps_lower;
    let ceiling = 1.0 + params.eps_upper;
    let check_upper = params.has_upper_bound();
    let mut dead = 0.0;
    for k in 0..=n {
        let experienced = if k == n { 0.0 } else { (total - dead) / total };
        let left = if k == 0 { 0.0 } else { order_stats[k - 1] };
        if check_upper && 1.0 - left > ceiling * experienced {
            return left;
        }
        if k == n {
            break;
        }
        let right = order_stats[k];
        if 1.0 - right < keep * experienced {
            return 1.0 - keep * experienced;
        }
        dead += savings_of_death(k);
    }
    1.0
}

struct Workspace {
    order_stats: Vec<f64>,
    shuffled: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            order_stats: Vec::with_capacity(n),
            shuffled: Vec::with_capacity(n),
        }
    }

    fn tau(&mut self, savings: &SavingsVector, homogeneous: bool, params: &StabilityParams, mut rng: ChaCha8Rng) -> f64 {
        let n = savings.len();
        fill_order_statistics(&mut self.order_stats, n, &mut rng);
        let total = savings.total();
        if homogeneous {
            let amount = savings.amounts()[0];
            return first_exit(&self.order_stats, total, |_| amount, params);
        }
        // Fisher-Yates, one swap per death actually reached by the scan.
        self.shuffled.clear();
        self.shuffled.extend_from_slice(savings.amounts());
        let shuffled = &mut self.shuffled;
        first_exit(
            &self.order_stats,
            total,
            |k| {
                let j = rng.gen_range(k..n);
                shuffled.swap(k, j);
                shuffled[k]
            },
            params,
        )
    }
}

/// Draws `replications` exit times, in replication order.
pub fn tau_samples(
    savings: &SavingsVector,
    params: &StabilityParams,
    replications: usize,
    seed: u64,
) -> Vec<f64> {
    let homogeneous = savings.is_homogeneous();
    (0..replications)
        .into_par_iter()
        .map_init(
            || Workspace::new(savings.len()),
            |ws, rep| ws.tau(savings, homogeneous, params, replication_rng(seed, rep as u64)),
        )
        .collect()
}

/// 1-based rank of the lower `(1 - beta)` empirical quantile among `r`
/// sorted samples: `ceil((1 - beta) r)`.
pub fn quantile_rank(beta: f64, replications: usize) -> Result<usize> {
    let target = (1.0 - beta) * replications as f64;
    // Absorb representation error such as (1 - 0.9) * 1e6 = 100000.00000000001.
    let slack = 1e-9 * target.max(1.0);
    let rank = (target - slack).ceil();
    if target + slack < 1.0 || replications == 0 {
        return Err(Error::QuantileUndefined { replications, beta });
    }
    Ok((rank as usize).min(replications))
}

/// Quantile of sorted exit times with a binomial standard error whose
/// density estimate spans the `2 sqrt(R)` nearest order statistics.
pub fn quantile_with_error(sorted: &[f64], beta: f64) -> Result<(f64, f64)> {
    let r = sorted.len();
    let rank = quantile_rank(beta, r)?;
    let value = sorted[rank - 1];
    let half_window = (r as f64).sqrt().ceil() as usize;
    let lo = rank.saturating_sub(half_window).max(1);
    let hi = (rank + half_window).min(r);
    let spread = sorted[hi - 1] - sorted[lo - 1];
    let p = 1.0 - beta;
    let std_error = if hi > lo && spread > 0.0 {
        (p * (1.0 - p) / r as f64).sqrt() * spread * r as f64 / (hi - lo) as f64
    } else {
        0.0
    };
    Ok((value, std_error))
}

/// Largest transformed time `u` with `P[income stable on [0, u]] >= beta`.
pub fn estimate_max_stable_u(
    savings: &SavingsVector,
    params: &StabilityParams,
    replications: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    if replications == 0 {
        return Err(Error::InvalidParams("at least one replication is required".into()));
    }
    quantile_rank(params.beta, replications)?;
    let mut samples = tau_samples(savings, params, replications, seed);
    samples.sort_unstable_by(f64::total_cmp);
    let (u_star, std_error_u) = quantile_with_error(&samples, params.beta)?;
    Ok(StabilityEstimate {
        u_star,
        t_star: None,
        replications,
        std_error_u,
    })
}

/// [`estimate_max_stable_u`] mapped to calendar years through `table`.
pub fn estimate_max_stable_time(
    savings: &SavingsVector,
    params: &StabilityParams,
    table: &LifeTable,
    replications: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    let mut estimate = estimate_max_stable_u(savings, params, replications, seed)?;
    estimate.t_star = Some(table.f_inverse(estimate.u_star));
    Ok(estimate)
}

/// Remaining lifetimes in years for `n` members, by inverting the table's
/// distribution function at uniform draws.
pub fn sample_lifetimes<R: Rng + ?Sized>(table: &LifeTable, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| table.f_inverse(rng.gen::<f64>()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistics_are_sorted_in_unit_interval() {
        let mut rng = replication_rng(1, 0);
        for n in [1, 2, 10, 500] {
            let u = sample_order_statistics(n, &mut rng);
            assert_eq!(u.len(), n);
            assert!(u.windows(2).all(|w| w[0] <= w[1]));
            assert!(u.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn vacuous_bounds_never_stop() {
        let params = StabilityParams::lower_only(1.0 - 1e-15, 0.9).unwrap();
        let savings = SavingsVector::new(vec![1.0, 2.0, 5.0]).unwrap();
        let mut rng = replication_rng(3, 0);
        for _ in 0..100 {
            let u = sample_order_statistics(3, &mut rng);
            let tau = stop_time_tau(&u, savings.amounts(), &params).unwrap();
            assert_eq!(tau, 1.0);
        }
    }

    #[test]
    fn single_member() {
        let params = StabilityParams::lower_only(0.1, 0.9).unwrap();
        // Death after u = 0.1: the ratio 1 - v hits 0.9 at v = 0.1.
        assert!((stop_time_tau(&[0.4], &[3.0], &params).unwrap() - 0.1).abs() < 1e-15);
        // Death before the breach: the survivor ratio becomes infinite.
        assert_eq!(stop_time_tau(&[0.05], &[3.0], &params).unwrap(), 1.0);
        // With an upper bound the death itself is the breach.
        let both = StabilityParams::new(0.1, 0.1, 0.9).unwrap();
        assert_eq!(stop_time_tau(&[0.05], &[3.0], &both).unwrap(), 0.05);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let params = StabilityParams::default();
        assert!(stop_time_tau(&[0.1, 0.2], &[1.0], &params).is_err());
    }

    #[test]
    fn permutation_is_a_bijection() {
        let savings = SavingsVector::new((1..=50).map(f64::from).collect()).unwrap();
        let mut rng = replication_rng(9, 0);
        let mut order = assign_savings_to_deaths(&savings, &mut rng);
        order.sort_unstable();
        assert_eq!(order, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn quantile_rank_convention() {
        assert_eq!(quantile_rank(0.9, 1_000_000).unwrap(), 100_000);
        assert_eq!(quantile_rank(0.9, 10).unwrap(), 1);
        assert_eq!(quantile_rank(0.0, 10).unwrap(), 10);
        assert_eq!(quantile_rank(0.95, 30).unwrap(), 2);
        assert!(matches!(
            quantile_rank(0.95, 10),
            Err(Error::QuantileUndefined { .. })
        ));
        assert!(quantile_rank(1.0, 1000).is_err());
    }

    #[test]
    fn beta_zero_returns_largest_sample() {
        let savings = SavingsVector::homogeneous(20, 1.0).unwrap();
        let params = StabilityParams::lower_only(0.1, 0.0).unwrap();
        let est = estimate_max_stable_u(&savings, &params, 200, 5).unwrap();
        let samples = tau_samples(&savings, &params, 200, 5);
        let max = samples.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(est.u_star, max);
        assert_eq!(est.std_error_u, 0.0);
    }

    #[test]
    fn too_few_replications_for_beta() {
        let savings = SavingsVector::homogeneous(20, 1.0).unwrap();
        let params = StabilityParams::lower_only(0.1, 0.99).unwrap();
        assert!(matches!(
            estimate_max_stable_u(&savings, &params, 50, 1),
            Err(Error::QuantileUndefined { .. })
        ));
    }

    #[test]
    fn params_validation() {
        assert!(StabilityParams::new(0.0, 1.0, 0.5).is_err());
        assert!(StabilityParams::new(1.0, 1.0, 0.5).is_err());
        assert!(StabilityParams::new(0.1, 0.0, 0.5).is_err());
        assert!(StabilityParams::new(0.1, 1.0, 1.5).is_err());
        assert!(StabilityParams::new(0.1, f64::INFINITY, 1.0).is_ok());
    }
}
