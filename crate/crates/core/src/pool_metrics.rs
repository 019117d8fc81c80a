//! The implied number of homogeneous members and the questions it answers:
//! which members should share a pool, how bad a two-level pool can get, and
//! where to cap contributions.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::approx::{approx_time, ApproxInputs};
use crate::error::{Error, Result};
use crate::life_table::LifeTable;
use crate::savings::SavingsVector;
use crate::stability::StabilityParams;

/// Relative tolerance under which two implied numbers count as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Largest search space [`brute_force_best_subgroup`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// `(Σs)² / Σs²`; exactly the member count for equal savings.
pub fn implied_number(savings: &SavingsVector) -> f64 {
    if savings.is_homogeneous() {
        return savings.len() as f64;
    }
    let total = savings.total();
    total * total / savings.sum_of_squares()
}

fn nu_from_sums(total: f64, squares: f64) -> f64 {
    if squares == 0.0 {
        0.0
    } else {
        total * total / squares
    }
}

fn ties_or_beats(candidate: f64, incumbent: f64) -> bool {
    candidate >= incumbent * (1.0 - TIE_TOLERANCE)
}

/// Savings grouped by distinct amount.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SavingsHashMap {
    amounts: Vec<f64>,
    counts: Vec<f64>,
    weights: Vec<f64>,
}

impl SavingsHashMap {
    pub fn new(amounts: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        let weights = vec![1.0; amounts.len()];
        Self::weighted(amounts, counts, weights)
    }

    pub fn weighted(amounts: Vec<f64>, counts: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if amounts.is_empty() {
            return Err(Error::InvalidSavings("a hash map needs at least one amount".into()));
        }
        if amounts.len() != counts.len() || amounts.len() != weights.len() {
            return Err(Error::InvalidSavings(format!(
                "{} amounts, {} counts and {} weights",
                amounts.len(),
                counts.len(),
                weights.len()
            )));
        }
        let positive = |v: &f64| *v > 0.0 && v.is_finite();
        if !amounts.iter().all(positive) {
            return Err(Error::InvalidSavings("amounts must be positive and finite".into()));
        }
        if !amounts.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidSavings("amounts must be strictly increasing".into()));
        }
        if !counts.iter().all(positive) {
            return Err(Error::InvalidSavings("counts must be positive and finite".into()));
        }
        if !weights.iter().all(positive) {
            return Err(Error::InvalidSavings("weights must be positive and finite".into()));
        }
        Ok(Self {
            amounts,
            counts,
            weights,
        })
    }

    /// Groups members whose amounts are bitwise equal.
    pub fn from_savings(savings: &SavingsVector) -> Self {
        let mut groups: BTreeMap<u64, f64> = BTreeMap::new();
        // Positive finite doubles order the same as their bit patterns.
        for &s in savings.amounts() {
            *groups.entry(s.to_bits()).or_default() += 1.0;
        }
        let (amounts, counts): (Vec<f64>, Vec<f64>) = groups
            .into_iter()
            .map(|(bits, count)| (f64::from_bits(bits), count))
            .unzip();
        let weights = vec![1.0; amounts.len()];
        Self {
            amounts,
            counts,
            weights,
        }
    }

    /// Expands back into one entry per member. Counts must be whole numbers
    /// and weights must all be one.
    pub fn to_savings(&self) -> Result<SavingsVector> {
        if self.weights.iter().any(|&w| w != 1.0) {
            return Err(Error::InvalidSavings("weighted maps have no member roster".into()));
        }
        let mut groups = Vec::with_capacity(self.amounts.len());
        for (&z, &n) in self.amounts.iter().zip(&self.counts) {
            if n.fract() != 0.0 {
                return Err(Error::InvalidSavings(format!("count {n} is not a whole number")));
            }
            groups.push((n as usize, z));
        }
        SavingsVector::from_groups(&groups)
    }

    pub fn amounts(&self) -> &[f64] {
        &self.amounts
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.amounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amounts.is_empty()
    }

    /// The same map with every count multiplied by `factor`.
    pub fn scale_counts(&self, factor: f64) -> Result<Self> {
        Self::weighted(
            self.amounts.clone(),
            self.counts.iter().map(|n| n * factor).collect(),
            self.weights.clone(),
        )
    }

    fn sums(&self, counts: impl Iterator<Item = f64>) -> (f64, f64) {
        self.amounts
            .iter()
            .zip(&self.weights)
            .zip(counts)
            .fold((0.0, 0.0), |(t, q), ((&z, &w), n)| {
                (t + z * n * w, q + z * z * n * w)
            })
    }
}

/// `(Σ z n ω)² / Σ z² n ω`.
pub fn implied_number_hash(map: &SavingsHashMap) -> f64 {
    let (total, squares) = map.sums(map.counts.iter().copied());
    nu_from_sums(total, squares)
}

/// The amount whose addition raises the implied number the most, by exactly
/// one: `Σs² / Σs`.
pub fn optimal_extension_amount(savings: &SavingsVector) -> f64 {
    savings.sum_of_squares() / savings.total()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MergeComparison {
    pub nu_rich: f64,
    pub nu_merged: f64,
}

/// Implied numbers of the richer pool alone and of both pools merged.
pub fn merge_benefit_check(poor: &SavingsVector, rich: &SavingsVector) -> Result<MergeComparison> {
    if poor.max() > rich.min() {
        return Err(Error::Precondition(format!(
            "largest poor amount {} exceeds smallest rich amount {}",
            poor.max(),
            rich.min()
        )));
    }
    let mut merged = poor.amounts().to_vec();
    merged.extend_from_slice(rich.amounts());
    Ok(MergeComparison {
        nu_rich: implied_number(rich),
        nu_merged: implied_number(&SavingsVector::new(merged)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaThreshold {
    /// For every integer `λ > threshold`, `λ` copies of the poor pool alone
    /// have a larger implied number than those copies merged with the rich.
    Threshold { threshold: f64 },
    /// The rich pool is not rich enough for a threshold to exist.
    NoThreshold,
}

/// Threshold on the number of poor-pool copies beyond which the rich pool
/// dilutes the poor one.
pub fn lambda_threshold(poor: &SavingsVector, rich: &SavingsVector) -> LambdaThreshold {
    let poor_ratio = poor.sum_of_squares() / poor.total();
    let rich_ratio = rich.sum_of_squares() / rich.total();
    if 2.0 * poor_ratio >= rich_ratio {
        return LambdaThreshold::NoThreshold;
    }
    let a = (poor.total() / rich.total()) / poor_ratio * (rich_ratio - 2.0 * poor_ratio);
    LambdaThreshold::Threshold { threshold: 1.0 / a }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuBounds {
    pub lower: f64,
    pub upper: f64,
}

fn check_two_level(n: u64, low: f64, high: f64) -> Result<()> {
    if n == 0 || !(low > 0.0 && high > low && high.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "need n >= 1 and 0 < low < high, got n={n}, low={low}, high={high}"
        )));
    }
    Ok(())
}

/// Bounds on the smallest implied number of `n` members whose savings lie
/// in `[low, high]`.
pub fn worst_case_nu_bounds(n: u64, low: f64, high: f64) -> Result<NuBounds> {
    check_two_level(n, low, high)?;
    let n = n as f64;
    let lower = n * 4.0 * low * high / ((low + high) * (low + high));
    let upper = lower * (1.0 + high.powi(3) / (4.0 * low.powi(3) * n * n));
    Ok(NuBounds { lower, upper })
}

/// Smallest implied number of `n` members each holding `low` or `high`.
pub fn worst_case_nu_exact(n: u64, low: f64, high: f64) -> Result<f64> {
    check_two_level(n, low, high)?;
    let nf = n as f64;
    Ok((0..=n)
        .map(|k| {
            let share = k as f64 / nf;
            let mean = high * share + low * (1.0 - share);
            nf * mean * mean / (high * high * share + low * low * (1.0 - share))
        })
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrefixRow {
    pub z: f64,
    pub cumulative_count: f64,
    pub cumulative_nu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestPrefix {
    /// Zero-based index of the last amount in the best prefix.
    pub index: usize,
    pub nu_max: f64,
    pub prefixes: Vec<PrefixRow>,
}

/// Implied number of every cumulative prefix of amounts and the best one.
/// Ties within [`TIE_TOLERANCE`] go to the longer prefix.
pub fn best_prefix(map: &SavingsHashMap) -> BestPrefix {
    let mut total = 0.0;
    let mut squares = 0.0;
    let mut members = 0.0;
    let mut prefixes = Vec::with_capacity(map.len());
    for i in 0..map.len() {
        let (z, n, w) = (map.amounts[i], map.counts[i], map.weights[i]);
        total += z * n * w;
        squares += z * z * n * w;
        members += n;
        prefixes.push(PrefixRow {
            z,
            cumulative_count: members,
            cumulative_nu: nu_from_sums(total, squares),
        });
    }
    let mut index = 0;
    let mut nu_max = prefixes[0].cumulative_nu;
    for (i, row) in prefixes.iter().enumerate().skip(1) {
        if ties_or_beats(row.cumulative_nu, nu_max) {
            index = i;
            nu_max = nu_max.max(row.cumulative_nu);
        }
    }
    BestPrefix {
        index,
        nu_max,
        prefixes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestSubgroup {
    pub counts: Vec<u64>,
    pub nu_max: f64,
}

/// Exhaustive search over every sub-count vector. Among ties the one with
/// more members wins.
pub fn brute_force_best_subgroup(map: &SavingsHashMap) -> Result<BestSubgroup> {
    let mut limits = Vec::with_capacity(map.len());
    for &n in &map.counts {
        if n.fract() != 0.0 {
            return Err(Error::InvalidParams(format!("count {n} is not a whole number")));
        }
        limits.push(n as u64);
    }
    let size = limits
        .iter()
        .try_fold(1u128, |acc, &n| acc.checked_mul(n as u128 + 1))
        .unwrap_or(u128::MAX);
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    let better = |a: &BestSubgroup, b: &BestSubgroup| -> bool {
        let members = |c: &[u64]| c.iter().sum::<u64>();
        if a.nu_max > b.nu_max * (1.0 + TIE_TOLERANCE) {
            true
        } else if ties_or_beats(a.nu_max, b.nu_max) {
            members(&a.counts) > members(&b.counts)
        } else {
            false
        }
    };

    let inner = &limits[1..];
    (0..=limits[0])
        .into_par_iter()
        .map(|first| {
            let mut counts = vec![0u64; limits.len()];
            counts[0] = first;
            let mut best = BestSubgroup {
                counts: counts.clone(),
                nu_max: nu_of_counts(map, &counts),
            };
            // Odometer over the remaining coordinates.
            loop {
                let mut i = 0;
                while i < inner.len() && counts[i + 1] == inner[i] {
                    counts[i + 1] = 0;
                    i += 1;
                }
                if i == inner.len() {
                    break;
                }
                counts[i + 1] += 1;
                let candidate = BestSubgroup {
                    nu_max: nu_of_counts(map, &counts),
                    counts: counts.clone(),
                };
                if better(&candidate, &best) {
                    best = candidate;
                }
            }
            best
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .ok_or_else(|| Error::InvalidParams("empty map".into()))
}

fn nu_of_counts(map: &SavingsHashMap, counts: &[u64]) -> f64 {
    let (total, squares) = map.sums(counts.iter().map(|&n| n as f64));
    nu_from_sums(total, squares)
}

/// Whether the whole group attains the largest implied number of any
/// subgroup.
pub fn is_beneficial(map: &SavingsHashMap) -> bool {
    best_prefix(map).index == map.len() - 1
}

/// Adds `extra_members` at the largest amount of a beneficial pool and
/// reports whether the result is still beneficial.
pub fn cap_extension_is_beneficial(savings: &SavingsVector, extra_members: usize) -> Result<bool> {
    if !is_beneficial(&SavingsHashMap::from_savings(savings)) {
        return Err(Error::NotBeneficial);
    }
    let mut extended = savings.amounts().to_vec();
    extended.extend(std::iter::repeat_n(savings.max(), extra_members));
    Ok(is_beneficial(&SavingsHashMap::from_savings(
        &SavingsVector::new(extended)?,
    )))
}

/// Default relative slack below the best implied number that still counts
/// as inside the recommended cap window.
pub const DEFAULT_CAP_SLACK: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapHorizons {
    /// Approximate stable horizon in years with every member at full savings.
    pub all_members: f64,
    /// Horizon at the weakest prefix inside the window.
    pub window_low: f64,
    /// Horizon at the strongest prefix inside the window.
    pub window_high: f64,
    /// Horizon when all members join but contribute at most the upper cap.
    pub capped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapAdvice {
    pub prefixes: Vec<PrefixRow>,
    pub best_index: usize,
    pub nu_max: f64,
    pub slack: f64,
    /// Zero-based, inclusive prefix indices whose implied number is within
    /// `slack` of `nu_max`.
    pub window: (usize, usize),
    pub cap_low: f64,
    pub cap_high: f64,
    pub members_low: f64,
    pub members_high: f64,
    pub nu_window_min: f64,
    pub nu_window_max: f64,
    pub nu_all_members: f64,
    /// Every member joins but contributions above `cap_high` are cut to it.
    pub nu_capped: f64,
    pub horizons: Option<CapHorizons>,
}

/// Recommends a savings cap from the prefix scan.
pub fn cap_advise(
    savings: &SavingsVector,
    table: Option<&LifeTable>,
    params: &StabilityParams,
    slack: f64,
) -> Result<CapAdvice> {
    if !(0.0..1.0).contains(&slack) {
        return Err(Error::InvalidParams(format!("slack must lie in [0, 1), got {slack}")));
    }
    let map = SavingsHashMap::from_savings(savings);
    let best = best_prefix(&map);
    let floor = best.nu_max * (1.0 - slack) * (1.0 - TIE_TOLERANCE);
    let inside = |i: usize| best.prefixes[i].cumulative_nu >= floor;
    let mut first = best.index;
    while first > 0 && inside(first - 1) {
        first -= 1;
    }
    let mut last = best.index;
    while last + 1 < best.prefixes.len() && inside(last + 1) {
        last += 1;
    }
    let window_rows = &best.prefixes[first..=last];
    let nu_window_min = window_rows
        .iter()
        .map(|r| r.cumulative_nu)
        .fold(f64::INFINITY, f64::min);
    let cap_high = best.prefixes[last].z;
    let capped = SavingsVector::new(savings.amounts().iter().map(|&s| s.min(cap_high)).collect())?;
    let nu_all_members = implied_number(savings);
    let nu_capped = implied_number(&capped);

    let horizons = table
        .map(|table| -> Result<CapHorizons> {
            let years = |nu: f64| -> Result<f64> {
                Ok(approx_time(
                    &ApproxInputs::new(nu, params.eps_lower, params.beta)?,
                    table,
                ))
            };
            Ok(CapHorizons {
                all_members: years(nu_all_members)?,
                window_low: years(nu_window_min)?,
                window_high: years(best.nu_max)?,
                capped: years(nu_capped)?,
            })
        })
        .transpose()?;

    Ok(CapAdvice {
        best_index: best.index,
        nu_max: best.nu_max,
        slack,
        window: (first, last),
        cap_low: best.prefixes[first].z,
        cap_high,
        members_low: best.prefixes[first].cumulative_count,
        members_high: best.prefixes[last].cumulative_count,
        nu_window_min,
        nu_window_max: best.nu_max,
        nu_all_members,
        nu_capped,
        horizons,
        prefixes: best.prefixes,
    })
}
