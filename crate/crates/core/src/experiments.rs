//! Reproducible experiment grids: stable horizons for poor, rich and mixed
//! pools, a sample income path with its band, and per-member fund paths.

use std::collections::HashMap;

use serde::Serialize;

use crate::approx::{approx_u, ApproxInputs};
use crate::error::{Error, Result};
use crate::fund::{deaths_by_period, weighted_survival, FundState};
use crate::life_table::LifeTable;
use crate::pool_metrics::implied_number;
use crate::savings::SavingsVector;
use crate::stability::{
    estimate_max_stable_u, replication_rng, sample_lifetimes, StabilityEstimate, StabilityParams,
};

/// Which members a row's pool contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolGroup {
    PoorOnly,
    RichOnly,
    Mixed,
}

/// Two savings levels: `poor_count` members at `ratio` and `rich_count`
/// members at 1.
pub fn two_group_pool(poor_count: usize, rich_count: usize, ratio: f64) -> Result<SavingsVector> {
    SavingsVector::from_groups(&[(poor_count, ratio), (rich_count, 1.0)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Config {
    pub poor_count: usize,
    pub rich_count: usize,
    /// Poor-to-rich savings ratios `m/M`.
    pub ratios: Vec<f64>,
    pub params: StabilityParams,
    pub replications: usize,
    pub seed: u64,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            poor_count: 800,
            rich_count: 200,
            ratios: vec![1.0, 0.7, 0.5, 0.3, 0.2, 0.1],
            params: StabilityParams::default(),
            replications: 100_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table1Row {
    pub group: PoolGroup,
    pub ratio: f64,
    pub members: usize,
    pub implied_number: f64,
    pub mc_u: f64,
    pub mc_u_std_error: f64,
    pub mc_years: f64,
    pub approx_u: f64,
    pub approx_years: f64,
    pub error_years: f64,
}

fn check_ratios(ratios: &[f64]) -> Result<()> {
    if ratios.is_empty() {
        return Err(Error::InvalidParams("the ratio grid is empty".into()));
    }
    if let Some(r) = ratios.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        return Err(Error::InvalidParams(format!(
            "savings ratios must lie in (0, 1], got {r}"
        )));
    }
    Ok(())
}

/// Monte Carlo and closed-form horizons of one pool, memoised for
/// homogeneous pools by size.
struct HorizonCache<'a> {
    table: &'a LifeTable,
    params: StabilityParams,
    replications: usize,
    seed: u64,
    homogeneous: HashMap<usize, (StabilityEstimate, f64)>,
}

impl<'a> HorizonCache<'a> {
    fn new(table: &'a LifeTable, params: StabilityParams, replications: usize, seed: u64) -> Self {
        Self {
            table,
            params,
            replications,
            seed,
            homogeneous: HashMap::new(),
        }
    }

    fn approx(&self, savings: &SavingsVector) -> Result<f64> {
        let inputs =
            ApproxInputs::from_savings(savings, self.params.eps_lower, self.params.beta)?;
        Ok(approx_u(&inputs).u)
    }

    fn monte_carlo(&mut self, savings: &SavingsVector) -> Result<(StabilityEstimate, f64)> {
        let key = savings.len();
        if savings.is_homogeneous() {
            if let Some(hit) = self.homogeneous.get(&key) {
                return Ok(*hit);
            }
        }
        let mut estimate =
            estimate_max_stable_u(savings, &self.params, self.replications, self.seed)?;
        estimate.t_star = Some(self.table.f_inverse(estimate.u_star));
        let value = (estimate, self.approx(savings)?);
        if savings.is_homogeneous() {
            self.homogeneous.insert(key, value);
        }
        Ok(value)
    }

    fn row(&mut self, group: PoolGroup, ratio: f64, savings: &SavingsVector) -> Result<Table1Row> {
        let (mc, approx) = self.monte_carlo(savings)?;
        let mc_years = mc.t_star.expect("set above");
        let approx_years = self.table.f_inverse(approx);
        Ok(Table1Row {
            group,
            ratio,
            members: savings.len(),
            implied_number: implied_number(savings),
            mc_u: mc.u_star,
            mc_u_std_error: mc.std_error_u,
            mc_years,
            approx_u: approx,
            approx_years,
            error_years: mc_years - approx_years,
        })
    }
}

/// Stable horizons of the poor-only, rich-only and mixed pools for every
/// savings ratio, by Monte Carlo and by the closed-form approximation.
pub fn run_table1(config: &Table1Config, table: &LifeTable) -> Result<Vec<Table1Row>> {
    check_ratios(&config.ratios)?;
    if config.poor_count == 0 || config.rich_count == 0 {
        return Err(Error::InvalidParams("both groups need members".into()));
    }
    let mut cache = HorizonCache::new(table, config.params, config.replications, config.seed);
    let mut rows = Vec::with_capacity(3 * config.ratios.len());
    for &ratio in &config.ratios {
        let poor = SavingsVector::homogeneous(config.poor_count, ratio)?;
        let rich = SavingsVector::homogeneous(config.rich_count, 1.0)?;
        let mixed = two_group_pool(config.poor_count, config.rich_count, ratio)?;
        rows.push(cache.row(PoolGroup::PoorOnly, ratio, &poor)?);
        rows.push(cache.row(PoolGroup::RichOnly, ratio, &rich)?);
        rows.push(cache.row(PoolGroup::Mixed, ratio, &mixed)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonMethod {
    MonteCarlo,
    Approximation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Members across both groups.
    pub total: usize,
    /// Numbers of poor members to evaluate.
    pub poor_counts: Vec<usize>,
    pub ratios: Vec<f64>,
    pub params: StabilityParams,
    pub method: HorizonMethod,
    pub replications: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            total: 1000,
            poor_counts: (1..=19).map(|k| 50 * k).collect(),
            ratios: vec![0.7, 0.5, 0.3, 0.2, 0.1],
            params: StabilityParams::default(),
            method: HorizonMethod::MonteCarlo,
            replications: 100_000,
            seed: 1,
        }
    }
}

/// One point of one curve, in long format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub curve: PoolGroup,
    /// `m/M` for the mixed curves; empty for the homogeneous ones.
    pub ratio: Option<f64>,
    pub poor_count: usize,
    pub rich_count: usize,
    pub implied_number: f64,
    pub u: f64,
    pub years: f64,
}

/// Horizons of the poor-only, rich-only and mixed pools across poor member
/// counts. Groups with no members are skipped.
pub fn run_sweep(config: &SweepConfig, table: &LifeTable) -> Result<Vec<SweepRow>> {
    check_ratios(&config.ratios)?;
    if config.poor_counts.is_empty() {
        return Err(Error::InvalidParams("the poor member grid is empty".into()));
    }
    if let Some(&n) = config.poor_counts.iter().find(|&&n| n > config.total) {
        return Err(Error::InvalidParams(format!(
            "{n} poor members exceed the total of {}",
            config.total
        )));
    }
    let mut cache = HorizonCache::new(table, config.params, config.replications, config.seed);
    let mut horizon = |savings: &SavingsVector| -> Result<f64> {
        match config.method {
            HorizonMethod::MonteCarlo => Ok(cache.monte_carlo(savings)?.0.u_star),
            HorizonMethod::Approximation => cache.approx(savings),
        }
    };

    let mut rows = Vec::new();
    for &poor_count in &config.poor_counts {
        let rich_count = config.total - poor_count;
        let mut push = |curve, ratio, savings: &SavingsVector, u: f64| {
            rows.push(SweepRow {
                curve,
                ratio,
                poor_count,
                rich_count,
                implied_number: implied_number(savings),
                u,
                years: table.f_inverse(u),
            })
        };
        if poor_count > 0 {
            let poor = SavingsVector::homogeneous(poor_count, 1.0)?;
            let u = horizon(&poor)?;
            push(PoolGroup::PoorOnly, None, &poor, u);
        }
        if rich_count > 0 {
            let rich = SavingsVector::homogeneous(rich_count, 1.0)?;
            let u = horizon(&rich)?;
            push(PoolGroup::RichOnly, None, &rich, u);
        }
        if poor_count > 0 && rich_count > 0 {
            for &ratio in &config.ratios {
                let mixed = two_group_pool(poor_count, rich_count, ratio)?;
                let u = horizon(&mixed)?;
                push(PoolGroup::Mixed, Some(ratio), &mixed, u);
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Config {
    pub savings: SavingsVector,
    pub params: StabilityParams,
    pub replications: usize,
    pub seed: u64,
    /// Grid points per year on which the sample path is recorded.
    pub steps_per_year: u32,
}

impl Default for Figure1Config {
    /// 900 members at 1 and 100 at 10 with a symmetric 10% band.
    fn default() -> Self {
        Self {
            savings: SavingsVector::from_groups(&[(900, 1.0), (100, 10.0)])
                .expect("valid pool"),
            params: StabilityParams {
                eps_lower: 0.1,
                eps_upper: 0.1,
                beta: 0.9,
            },
            replications: 100_000,
            seed: 1,
            steps_per_year: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Figure1Row {
    pub time_years: f64,
    /// Ideal over experienced survival, which equals income over initial
    /// income.
    pub income_ratio: f64,
    pub band_lower_ratio: f64,
    pub band_upper_ratio: f64,
    pub stop_time_years: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure1Output {
    pub stop_time: StabilityEstimate,
    pub rows: Vec<Figure1Row>,
}

/// One seeded income-ratio path with its tolerance band and the Monte Carlo
/// stable horizon as a marker.
pub fn run_figure1(config: &Figure1Config, table: &LifeTable) -> Result<Figure1Output> {
    if config.steps_per_year == 0 {
        return Err(Error::InvalidParams("steps_per_year must be positive".into()));
    }
    let mut stop_time = estimate_max_stable_u(
        &config.savings,
        &config.params,
        config.replications,
        config.seed,
    )?;
    let marker = table.f_inverse(stop_time.u_star);
    stop_time.t_star = Some(marker);

    // A stream no replication uses.
    let mut rng = replication_rng(config.seed, u64::MAX);
    let lifetimes = sample_lifetimes(table, config.savings.len(), &mut rng);
    let upper = if config.params.has_upper_bound() {
        1.0 + config.params.eps_upper
    } else {
        f64::INFINITY
    };

    let mut rows = Vec::new();
    let mut alive = vec![true; lifetimes.len()];
    for step in 0.. {
        let t = step as f64 / config.steps_per_year as f64;
        for (a, &life) in alive.iter_mut().zip(&lifetimes) {
            *a = life > t;
        }
        let experienced = weighted_survival(&config.savings, &alive);
        if experienced == 0.0 || t >= table.horizon() as f64 {
            break;
        }
        rows.push(Figure1Row {
            time_years: t,
            income_ratio: table.survival(t) / experienced,
            band_lower_ratio: 1.0 - config.params.eps_lower,
            band_upper_ratio: upper,
            stop_time_years: marker,
        });
    }
    Ok(Figure1Output { stop_time, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundPathRow {
    pub time_years: u32,
    pub member: usize,
    pub alive: bool,
    pub wealth: f64,
    pub income: f64,
    pub credit: f64,
}

/// Replays one seeded mortality scenario through the fund and records every
/// member's account at every integer time.
pub fn fund_path(savings: &SavingsVector, table: &LifeTable, seed: u64) -> Result<Vec<FundPathRow>> {
    let mut rng = replication_rng(seed, 0);
    let lifetimes = sample_lifetimes(table, savings.len(), &mut rng);
    let periods = table.horizon() as usize;
    let states = FundState::run(savings, table, &deaths_by_period(&lifetimes, periods))?;
    let mut rows = Vec::with_capacity(states.len() * savings.len());
    for state in &states {
        let income = if state.time() < table.horizon() {
            state.income()?
        } else {
            vec![0.0; savings.len()]
        };
        for member in 0..savings.len() {
            rows.push(FundPathRow {
                time_years: state.time(),
                member,
                alive: state.alive()[member],
                wealth: state.wealth()[member],
                income: income[member],
                credit: state.credits()[member],
            });
        }
        if state.alive_count() == 0 {
            break;
        }
    }
    Ok(rows)
}
