//! Fund account mechanics: income withdrawal, investment growth and
//! longevity credits, plus the closed-form wealth and income at integer times.
//!
//! Deaths are inputs. A scenario is a list of member indices that die in each
//! period `(t, t + 1]`; the engine itself is deterministic.

use crate::error::{Error, Result};
use crate::life_table::LifeTable;
use crate::savings::SavingsVector;

/// Accounts of all members at an integer time.
#[derive(Debug, Clone)]
pub struct FundState<'a> {
    savings: &'a SavingsVector,
    table: &'a LifeTable,
    time: u32,
    wealth: Vec<f64>,
    alive: Vec<bool>,
    credits: Vec<f64>,
    unallocated: f64,
}

impl<'a> FundState<'a> {
    /// Opens the fund at time 0 with every member alive and `W_i = s_i`.
    pub fn new(savings: &'a SavingsVector, table: &'a LifeTable) -> Self {
        let n = savings.len();
        Self {
            savings,
            table,
            time: 0,
            wealth: savings.amounts().to_vec(),
            alive: vec![true; n],
            credits: vec![0.0; n],
            unallocated: 0.0,
        }
    }

    pub fn time(&self) -> u32 {
        self.time
    }

    pub fn wealth(&self) -> &[f64] {
        &self.wealth
    }

    pub fn alive(&self) -> &[bool] {
        &self.alive
    }

    /// Longevity credits paid at this time (zero at time 0).
    pub fn credits(&self) -> &[f64] {
        &self.credits
    }

    /// Funds released by the last step that had no survivor to go to.
    pub fn unallocated(&self) -> f64 {
        self.unallocated
    }

    pub fn savings(&self) -> &'a SavingsVector {
        self.savings
    }

    pub fn table(&self) -> &'a LifeTable {
        self.table
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    /// Income `C_i(t) = W_i(t) / ä(x+t)`; zero for dead members.
    pub fn income(&self) -> Result<Vec<f64>> {
        let price = self.table.annuity_price(self.time)?;
        Ok(self.wealth.iter().map(|w| w / price).collect())
    }

    /// Advances one period: members withdraw income, the remainder grows at
    /// the fixed rate, `newly_dead` die during the period and their grown
    /// accounts are shared among survivors in proportion to initial savings.
    pub fn step(&self, newly_dead: &[usize]) -> Result<FundState<'a>> {
        let n = self.wealth.len();
        let mut dies = vec![false; n];
        for &i in newly_dead {
            if i >= n {
                return Err(Error::MemberOutOfRange { index: i, len: n });
            }
            if !self.alive[i] || dies[i] {
                return Err(Error::AlreadyDead(i));
            }
            dies[i] = true;
        }

        let price = self.table.annuity_price(self.time)?;
        let growth = 1.0 + self.table.interest_rate();
        let grown: Vec<f64> = self
            .wealth
            .iter()
            .map(|&w| (w - w / price) * growth)
            .collect();

        let s = self.savings.amounts();
        let mut released = 0.0;
        let mut dead_savings = 0.0;
        let mut surviving_savings = 0.0;
        let mut alive = self.alive.clone();
        for i in 0..n {
            if !self.alive[i] {
                continue;
            }
            if dies[i] {
                released += grown[i];
                dead_savings += s[i];
                alive[i] = false;
            } else {
                surviving_savings += s[i];
            }
        }

        let mut wealth = vec![0.0; n];
        let mut credits = vec![0.0; n];
        let mut unallocated = 0.0;
        if surviving_savings > 0.0 {
            let share = dead_savings / surviving_savings;
            for i in 0..n {
                if alive[i] {
                    credits[i] = grown[i] * share;
                    wealth[i] = grown[i] + credits[i];
                }
            }
        } else {
            unallocated = released;
        }

        Ok(FundState {
            savings: self.savings,
            table: self.table,
            time: self.time + 1,
            wealth,
            alive,
            credits,
            unallocated,
        })
    }

    /// Replays a whole scenario, returning the state at every integer time
    /// from 0 up to `deaths_by_period.len()`.
    pub fn run(
        savings: &'a SavingsVector,
        table: &'a LifeTable,
        deaths_by_period: &[Vec<usize>],
    ) -> Result<Vec<FundState<'a>>> {
        let mut states = Vec::with_capacity(deaths_by_period.len() + 1);
        states.push(FundState::new(savings, table));
        for dead in deaths_by_period {
            let next = states.last().expect("non-empty").step(dead)?;
            states.push(next);
        }
        Ok(states)
    }
}

/// Groups members by the period `(t, t + 1]` in which their lifetime ends.
/// Periods run from 0 to `periods - 1`; members outliving them are omitted.
pub fn deaths_by_period(lifetimes: &[f64], periods: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); periods];
    for (i, &life) in lifetimes.iter().enumerate() {
        let period = (life.ceil() as usize).saturating_sub(1);
        if period < periods {
            out[period].push(i);
        }
    }
    out
}

/// Savings-weighted share of the pool still alive: the experienced survival
/// rate `Σ s_i 1{alive} / Σ s_i`.
pub fn weighted_survival(savings: &SavingsVector, alive: &[bool]) -> f64 {
    let alive_mass: f64 = savings
        .amounts()
        .iter()
        .zip(alive)
        .filter(|(_, &a)| a)
        .map(|(s, _)| s)
        .sum();
    alive_mass / savings.total()
}

/// Closed-form per-member values at an integer time.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub values: Vec<f64>,
    /// Every member is dead, so the experienced survival is zero and all
    /// values are defined as 0.
    pub all_dead: bool,
}

fn closed_form(
    savings: &SavingsVector,
    table: &LifeTable,
    t: u32,
    alive: &[bool],
    base: impl Fn(f64) -> f64,
) -> Result<ClosedForm> {
    if alive.len() != savings.len() {
        return Err(Error::Precondition(format!(
            "{} alive flags for {} members",
            alive.len(),
            savings.len()
        )));
    }
    let experienced = weighted_survival(savings, alive);
    if experienced == 0.0 {
        return Ok(ClosedForm {
            values: vec![0.0; savings.len()],
            all_dead: true,
        });
    }
    let ratio = table.survival(t as f64) / experienced;
    let values = savings
        .amounts()
        .iter()
        .zip(alive)
        .map(|(&s, &a)| if a { base(s) * ratio } else { 0.0 })
        .collect();
    Ok(ClosedForm {
        values,
        all_dead: false,
    })
}

/// `W_i(t) = 1{alive} s_i (ä(x+t) / ä(x)) (tp_x / tp̂_x)`.
pub fn explicit_wealth(
    savings: &SavingsVector,
    table: &LifeTable,
    t: u32,
    alive: &[bool],
) -> Result<ClosedForm> {
    let growth = table.annuity_price(t)? / table.annuity_price(0)?;
    closed_form(savings, table, t, alive, |s| s * growth)
}

/// `C_i(t) = 1{alive} C_i(0) (tp_x / tp̂_x)` with `C_i(0) = s_i / ä(x)`.
pub fn explicit_income(
    savings: &SavingsVector,
    table: &LifeTable,
    t: u32,
    alive: &[bool],
) -> Result<ClosedForm> {
    table.annuity_price(t)?;
    let initial_price = table.annuity_price(0)?;
    closed_form(savings, table, t, alive, |s| s / initial_price)
}

/// `(W_i(0) - C_i(0))(1 + R) / α(x+1)` with `C_i(0) = s_i / α(x)`: the
/// overlay fund's first income before the mortality adjustment.
pub fn overlay_income_base(table: &LifeTable, amount: f64) -> Result<f64> {
    let initial = amount / table.overlay_annuity_price(0)?;
    let next_price = table.overlay_annuity_price(1)?;
    Ok((amount - initial) * (1.0 + table.interest_rate()) / next_price)
}

/// First-period income of the annuity overlay variant, where the recently
/// deceased share in the credits too:
/// `C_i(1) = base_i (1 + Σ_dead s_k / Σ s_k)`.
pub fn overlay_first_income(
    savings: &SavingsVector,
    table: &LifeTable,
    deaths_in_first_period: &[usize],
) -> Result<Vec<f64>> {
    let n = savings.len();
    let mut dead = vec![false; n];
    for &i in deaths_in_first_period {
        if i >= n {
            return Err(Error::MemberOutOfRange { index: i, len: n });
        }
        dead[i] = true;
    }
    let dead_mass: f64 = savings
        .amounts()
        .iter()
        .zip(&dead)
        .filter(|(_, &d)| d)
        .map(|(s, _)| s)
        .sum();
    let factor = 1.0 + dead_mass / savings.total();
    savings
        .amounts()
        .iter()
        .map(|&s| overlay_income_base(table, s).map(|b| b * factor))
        .collect()
}
