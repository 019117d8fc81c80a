//! Closed-form approximation of the stable horizon and related variance
//! formulas.
//!
//! Savings enter every formula here only through the implied number of
//! homogeneous members `ν = (Σs)² / Σs²`. The horizon approximation replaces
//! the normalised gap between ideal and experienced mortality by a Brownian
//! bridge and applies the reflection principle; it covers the lower bound
//! only (no upper income bound).

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fund::overlay_income_base;
use crate::life_table::LifeTable;
use crate::normal;
use crate::pool_metrics::implied_number;
use crate::savings::SavingsVector;
use crate::stability::replication_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxInputs {
    pub implied_number: f64,
    pub eps_lower: f64,
    pub beta: f64,
}

impl ApproxInputs {
    pub fn new(implied_number: f64, eps_lower: f64, beta: f64) -> Result<Self> {
        if !(implied_number > 0.0 && implied_number.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "implied number must be positive and finite, got {implied_number}"
            )));
        }
        if !(0.0..1.0).contains(&eps_lower) {
            return Err(Error::InvalidParams(format!(
                "eps_lower must lie in [0, 1), got {eps_lower}"
            )));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParams(format!("beta must lie in [0, 1], got {beta}")));
        }
        Ok(Self {
            implied_number,
            eps_lower,
            beta,
        })
    }

    pub fn from_savings(savings: &SavingsVector, eps_lower: f64, beta: f64) -> Result<Self> {
        Self::new(implied_number(savings), eps_lower, beta)
    }
}

/// Why an approximation returned a boundary value instead of an interior one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `beta = 1`: no horizon is certain, so `u = 0`.
    FullCertainty,
    /// `eps_lower = 0`: any income drop is a breach, so `u = 0`.
    NoTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxU {
    pub u: f64,
    pub boundary: Option<Boundary>,
}

/// `u = 1 / (1 + ((1 - ε)/ε)² Φ⁻¹((1 - β)/2)² / ν)`.
pub fn approx_u(inputs: &ApproxInputs) -> ApproxU {
    if inputs.beta >= 1.0 {
        return ApproxU {
            u: 0.0,
            boundary: Some(Boundary::FullCertainty),
        };
    }
    if inputs.eps_lower <= 0.0 {
        return ApproxU {
            u: 0.0,
            boundary: Some(Boundary::NoTolerance),
        };
    }
    let z = normal::inverse_cdf((1.0 - inputs.beta) / 2.0);
    let odds = (1.0 - inputs.eps_lower) / inputs.eps_lower;
    let u = 1.0 / (1.0 + odds * odds * z * z / inputs.implied_number);
    ApproxU { u, boundary: None }
}

/// [`approx_u`] in calendar years.
pub fn approx_time(inputs: &ApproxInputs, table: &LifeTable) -> f64 {
    table.f_inverse(approx_u(inputs).u)
}

/// Scale of the Brownian bridge limit: `sqrt(Σs²) / Σs = 1 / sqrt(ν)`.
pub fn donsker_scale(savings: &SavingsVector) -> f64 {
    savings.sum_of_squares().sqrt() / savings.total()
}

fn concentration(savings: &SavingsVector) -> f64 {
    let total = savings.total();
    savings.sum_of_squares() / (total * total)
}

/// Variance of member `member`'s first income in the annuity overlay
/// variant: `p(1 - p) base² Σs² / (Σs)²`.
pub fn overlay_income_variance(
    savings: &SavingsVector,
    table: &LifeTable,
    member: usize,
) -> Result<f64> {
    let amount = *savings.amounts().get(member).ok_or(Error::MemberOutOfRange {
        index: member,
        len: savings.len(),
    })?;
    let p = table.one_year_survival(0);
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    let base = overlay_income_base(table, amount)?;
    Ok(p * (1.0 - p) * base * base * concentration(savings))
}

/// Variance of the experienced-to-ideal one-year survival ratio:
/// `((1 - p) / p) Σs² / (Σs)²`.
pub fn reciprocal_survival_variance(savings: &SavingsVector, table: &LifeTable) -> Result<f64> {
    let p = table.one_year_survival(0);
    if p == 0.0 {
        return Err(Error::ZeroSurvival);
    }
    Ok((1.0 - p) / p * concentration(savings))
}

/// Largest deviations of the simulated savings-weighted empirical process
/// from Brownian bridge moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeDiagnostic {
    pub paths: usize,
    pub grid: Vec<f64>,
    /// `max_j |mean X(u_j)|`.
    pub max_mean_deviation: f64,
    /// `max_{j,l} |cov(X(u_j), X(u_l)) - min(u)(1 - max(u))|`.
    pub max_cov_deviation: f64,
    /// Empirical covariance matrix over the grid.
    pub covariance: Vec<Vec<f64>>,
}

impl BridgeDiagnostic {
    pub fn max_deviation(&self) -> f64 {
        self.max_mean_deviation.max(self.max_cov_deviation)
    }
}

/// Simulates `X(u) = Σ s_i (u - 1{U_i <= u}) / sqrt(Σs²)` at the grid points
/// and compares its mean and covariance with a standard Brownian bridge.
pub fn bridge_covariance_check(
    savings: &SavingsVector,
    n_paths: usize,
    grid: &[f64],
    seed: u64,
) -> Result<BridgeDiagnostic> {
    if n_paths < 2 {
        return Err(Error::InvalidParams("need at least two paths".into()));
    }
    if grid.is_empty() || grid.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
        return Err(Error::InvalidParams("grid points must lie in (0, 1)".into()));
    }
    let mut sorted_grid = grid.to_vec();
    sorted_grid.sort_unstable_by(f64::total_cmp);
    let g = sorted_grid.len();
    let total = savings.total();
    let norm = savings.sum_of_squares().sqrt();
    let amounts = savings.amounts();

    let paths: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = replication_rng(seed, path as u64);
            // bucket[j]: savings of members dying in (grid[j-1], grid[j]]
            let mut bucket = vec![0.0; g];
            for &s in amounts {
                let u: f64 = rng.gen();
                let j = sorted_grid.partition_point(|&x| x < u);
                if j < g {
                    bucket[j] += s;
                }
            }
            let mut dead = 0.0;
            sorted_grid
                .iter()
                .zip(&bucket)
                .map(|(&u, &b)| {
                    dead += b;
                    (u * total - dead) / norm
                })
                .collect()
        })
        .collect();

    let n = n_paths as f64;
    let mut mean = vec![0.0; g];
    for x in &paths {
        for j in 0..g {
            mean[j] += x[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut covariance = vec![vec![0.0; g]; g];
    for x in &paths {
        for j in 0..g {
            for l in 0..g {
                covariance[j][l] += (x[j] - mean[j]) * (x[l] - mean[l]);
            }
        }
    }
    let mut max_cov_deviation: f64 = 0.0;
    for j in 0..g {
        for l in 0..g {
            covariance[j][l] /= n - 1.0;
            let (a, b) = (sorted_grid[j].min(sorted_grid[l]), sorted_grid[j].max(sorted_grid[l]));
            max_cov_deviation = max_cov_deviation.max((covariance[j][l] - a * (1.0 - b)).abs());
        }
    }
    let max_mean_deviation = mean.iter().fold(0.0_f64, |acc, m| acc.max(m.abs()));

    Ok(BridgeDiagnostic {
        paths: n_paths,
        grid: sorted_grid,
        max_mean_deviation,
        max_cov_deviation,
        covariance,
    })
}
