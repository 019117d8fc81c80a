//! Discrete mortality tables turned into a continuous survival curve.
//!
//! A [`LifeTable`] holds the one-year survival probabilities of a member aged
//! `base_age` up to the limiting age. The final year always has survival 0: it
//! is the year in which everybody still alive dies. Between integer ages the
//! force of mortality is held constant, except in that final year where deaths
//! are spread uniformly so the curve reaches 0 continuously at the limiting age.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LifeTable {
    base_age: u32,
    yearly_survival: Vec<f64>,
    /// `cumulative[k]` is the probability of surviving `k` years; last entry 0.
    cumulative: Vec<f64>,
    interest_rate: f64,
}

impl LifeTable {
    /// Builds a table from one-year survival probabilities starting at
    /// `base_age`. Every entry but the last must lie strictly in (0, 1); the
    /// last must be 0 and closes the table at the limiting age.
    pub fn new(base_age: u32, yearly_survival: Vec<f64>, interest_rate: f64) -> Result<Self> {
        if !(interest_rate >= 0.0 && interest_rate.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "interest rate must be finite and non-negative, got {interest_rate}"
            )));
        }
        let Some((&last, body)) = yearly_survival.split_last() else {
            return Err(Error::InvalidTable("no survival probabilities".into()));
        };
        if last != 0.0 {
            return Err(Error::InvalidTable(format!(
                "the final year must have survival 0 to close the table, got {last}"
            )));
        }
        if let Some((k, p)) = body
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p > 0.0 && p < 1.0))
        {
            return Err(Error::InvalidTable(format!(
                "one-year survival at age {} must lie strictly in (0, 1), got {p}",
                base_age as usize + k
            )));
        }

        let mut cumulative = Vec::with_capacity(yearly_survival.len() + 1);
        let mut running = 1.0;
        cumulative.push(running);
        for &p in &yearly_survival {
            running *= p;
            cumulative.push(running);
        }

        Ok(Self {
            base_age,
            yearly_survival,
            cumulative,
            interest_rate,
        })
    }

    /// Generates a table from a Gompertz–Makeham force of mortality
    /// `mu(age) = makeham + exp((age - modal_age) / dispersion) / dispersion`,
    /// closed at `limiting_age` or earlier if survival underflows.
    pub fn gompertz_makeham(
        law: GompertzMakeham,
        base_age: u32,
        limiting_age: u32,
        interest_rate: f64,
    ) -> Result<Self> {
        if limiting_age <= base_age {
            return Err(Error::InvalidTable(format!(
                "limiting age {limiting_age} must exceed base age {base_age}"
            )));
        }
        if !(law.dispersion > 0.0 && law.makeham >= 0.0) {
            return Err(Error::InvalidParams(format!("invalid Gompertz-Makeham law {law:?}")));
        }
        // A steep law can underflow to 0 before the limiting age; the table
        // then closes at that year instead.
        let mut survival: Vec<f64> = (base_age..limiting_age - 1)
            .map(|age| (-law.integrated_hazard(age as f64, age as f64 + 1.0)).exp())
            .take_while(|&p| p > 0.0)
            .collect();
        survival.push(0.0);
        Self::new(base_age, survival, interest_rate)
    }

    /// Reads a CSV mortality table and slices it at `base_age`.
    ///
    /// Columns: `age` plus `qx` and/or `lx` (lx wins where both are given).
    /// The first row with `qx = 1` closes the table one year later; with `lx`
    /// the first age with `lx = 0` is the limiting age. HMD-style open ages
    /// such as `110+` are accepted.
    pub fn load(path: impl AsRef<Path>, base_age: u32, interest_rate: f64) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file, base_age, interest_rate)
    }

    pub fn from_reader(reader: impl Read, base_age: u32, interest_rate: f64) -> Result<Self> {
        let rows = read_rows(reader)?;
        let first_age = rows[0].age;
        let survival = derive_survival(&rows)?;
        let limiting_age = first_age + survival.len() as u32;

        if base_age < first_age || base_age >= limiting_age {
            return Err(Error::InvalidTable(format!(
                "base age {base_age} outside the table range [{first_age}, {limiting_age})"
            )));
        }
        let start = (base_age - first_age) as usize;
        Self::new(base_age, survival[start..].to_vec(), interest_rate)
    }

    pub fn base_age(&self) -> u32 {
        self.base_age
    }

    /// The limiting age ω.
    pub fn limiting_age(&self) -> u32 {
        self.base_age + self.horizon()
    }

    /// Years from the base age to the limiting age.
    pub fn horizon(&self) -> u32 {
        self.yearly_survival.len() as u32
    }

    pub fn interest_rate(&self) -> f64 {
        self.interest_rate
    }

    pub fn yearly_survival(&self) -> &[f64] {
        &self.yearly_survival
    }

    /// One-year survival probability of a member aged `base_age + t`.
    pub fn one_year_survival(&self, t: u32) -> f64 {
        self.yearly_survival.get(t as usize).copied().unwrap_or(0.0)
    }

    /// Probability that a member aged `base_age` survives `t` more years.
    pub fn survival(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0, "negative time {t}");
        let horizon = self.horizon() as f64;
        if t <= 0.0 {
            return 1.0;
        }
        if t >= horizon {
            return 0.0;
        }
        let k = t.floor() as usize;
        let frac = t - k as f64;
        let at_k = self.cumulative[k];
        if frac == 0.0 {
            return at_k;
        }
        if k + 1 == self.yearly_survival.len() {
            at_k * (1.0 - frac)
        } else {
            at_k * self.yearly_survival[k].powf(frac)
        }
    }

    /// Lifetime distribution function F(t) = 1 - survival(t).
    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    /// Inverse of [`cdf`](Self::cdf): the time by which a proportion `u` of
    /// the cohort has died.
    pub fn f_inverse(&self, u: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&u), "u = {u} outside [0, 1]");
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return self.horizon() as f64;
        }
        let target = 1.0 - u;
        // Largest k with cumulative[k] >= target; cumulative is strictly decreasing.
        let k = self.cumulative.partition_point(|&s| s >= target) - 1;
        let at_k = self.cumulative[k];
        let ratio = target / at_k;
        if k + 1 == self.yearly_survival.len() {
            k as f64 + (1.0 - ratio)
        } else {
            let frac = ratio.ln() / self.yearly_survival[k].ln();
            k as f64 + frac.clamp(0.0, 1.0)
        }
    }

    fn check_time(&self, t: u32) -> Result<()> {
        if t >= self.horizon() {
            return Err(Error::BeyondLimitingAge {
                t,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }

    /// Whole-life annuity-due price ä(x+t) for a member still alive at integer
    /// time `t`, truncated at the limiting age.
    pub fn annuity_price(&self, t: u32) -> Result<f64> {
        self.check_time(t)?;
        let discount = 1.0 / (1.0 + self.interest_rate);
        let mut price = 1.0;
        let mut survival = 1.0;
        let mut factor = 1.0;
        for &p in &self.yearly_survival[t as usize..self.yearly_survival.len() - 1] {
            survival *= p;
            factor *= discount;
            price += factor * survival;
        }
        Ok(price)
    }

    /// Price α(x+t) used by the annuity overlay variant, where each year's
    /// survival factor is replaced by `1 / (2 - p)`.
    pub fn overlay_annuity_price(&self, t: u32) -> Result<f64> {
        self.check_time(t)?;
        let discount = 1.0 / (1.0 + self.interest_rate);
        let mut price = 1.0;
        let mut product = 1.0;
        let mut factor = 1.0;
        for &p in &self.yearly_survival[t as usize..self.yearly_survival.len() - 1] {
            product /= 2.0 - p;
            factor *= discount;
            price += factor * product;
        }
        Ok(price)
    }
}

/// Parameters of a Gompertz–Makeham force of mortality in modal form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GompertzMakeham {
    pub makeham: f64,
    pub modal_age: f64,
    pub dispersion: f64,
}

impl GompertzMakeham {
    /// Stand-in for a developed-country period table at retirement ages:
    /// curtate life expectancy at 70 is a little over 15 years. Synthetic,
    /// not fitted to any national table.
    pub const SYNTHETIC_UK_LIKE: GompertzMakeham = GompertzMakeham {
        makeham: 0.0005,
        modal_age: 87.5,
        dispersion: 9.5,
    };

    pub fn integrated_hazard(&self, from: f64, to: f64) -> f64 {
        let gompertz = ((to - self.modal_age) / self.dispersion).exp()
            - ((from - self.modal_age) / self.dispersion).exp();
        self.makeham * (to - from) + gompertz
    }
}

#[derive(Debug)]
struct Row {
    age: u32,
    qx: Option<f64>,
    lx: Option<f64>,
}

fn read_rows(reader: impl Read) -> Result<Vec<Row>> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
    };
    let age_col = column("age")
        .ok_or_else(|| Error::InvalidTable("missing `age` column".into()))?;
    let qx_col = column("qx");
    let lx_col = column("lx");
    if qx_col.is_none() && lx_col.is_none() {
        return Err(Error::InvalidTable("need a `qx` or `lx` column".into()));
    }

    let number = |record: &csv::StringRecord, col: usize, line: usize| -> Result<f64> {
        let raw = record.get(col).unwrap_or("");
        raw.parse::<f64>().map_err(|_| {
            Error::InvalidTable(format!("line {line}: cannot parse `{raw}` as a number"))
        })
    };

    let mut rows: Vec<Row> = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let raw_age = record.get(age_col).unwrap_or("").trim_end_matches('+');
        let age: u32 = raw_age.parse().map_err(|_| {
            Error::InvalidTable(format!("line {line}: cannot parse age `{raw_age}`"))
        })?;
        if let Some(prev) = rows.last() {
            if age != prev.age + 1 {
                return Err(Error::InvalidTable(format!(
                    "line {line}: ages must be contiguous, {} followed by {age}",
                    prev.age
                )));
            }
        }
        let qx = qx_col.map(|c| number(&record, c, line)).transpose()?;
        let lx = lx_col.map(|c| number(&record, c, line)).transpose()?;
        if let Some(q) = qx {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidTable(format!(
                    "line {line}: qx = {q} outside [0, 1]"
                )));
            }
        }
        if let Some(l) = lx {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidTable(format!("line {line}: lx = {l} is negative")));
            }
        }
        rows.push(Row { age, qx, lx });
    }
    if rows.is_empty() {
        return Err(Error::InvalidTable("no rows".into()));
    }
    Ok(rows)
}

/// One-year survival per row, truncated at (and including) the closing year.
fn derive_survival(rows: &[Row]) -> Result<Vec<f64>> {
    let mut survival = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let from_lx = match (row.lx, rows.get(i + 1).and_then(|next| next.lx)) {
            (Some(0.0), _) => {
                // Limiting age reached: nobody alive at this age.
                break;
            }
            (Some(l), Some(next)) => Some(next / l),
            _ => None,
        };
        let p = match (from_lx, row.qx) {
            (Some(p), _) => p,
            (None, Some(q)) => 1.0 - q,
            (None, None) => {
                return Err(Error::InvalidTable(format!(
                    "age {}: lx has no following row and no qx is given",
                    row.age
                )))
            }
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidTable(format!(
                "age {}: survival probability {p} outside [0, 1]",
                row.age
            )));
        }
        if p == 1.0 {
            return Err(Error::InvalidTable(format!(
                "age {}: zero mortality makes the survival curve flat",
                row.age
            )));
        }
        survival.push(p);
        if p == 0.0 {
            return Ok(survival);
        }
    }
    if survival.last() != Some(&0.0) {
        if survival.len() < rows.len() {
            // Stopped on an lx = 0 row: the previous year closes the table.
            if let Some(last) = survival.last_mut() {
                *last = 0.0;
                return Ok(survival);
            }
            return Err(Error::InvalidTable("lx is zero at the first age".into()));
        }
        return Err(Error::InvalidTable(
            "table never reaches qx = 1 or lx = 0; infinite horizons are not supported".into(),
        ));
    }
    Ok(survival)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halving_table(years: usize) -> LifeTable {
        let mut p = vec![0.5; years - 1];
        p.push(0.0);
        LifeTable::new(70, p, 0.0).unwrap()
    }

    #[test]
    fn loads_constant_hazard_qx_table() {
        let mut csv = String::from("age,qx\n");
        for age in 70..80 {
            csv.push_str(&format!("{age},0.5\n"));
        }
        csv.push_str("80,1\n");
        let table = LifeTable::from_reader(csv.as_bytes(), 70, 0.0).unwrap();
        for t in 0..=10 {
            assert!((table.survival(t as f64) - 0.5f64.powi(t)).abs() < 1e-15);
        }
        assert_eq!(table.limiting_age(), 81);
        assert_eq!(table.survival(11.0), 0.0);
    }

    #[test]
    fn lx_ratio_defines_survival() {
        let csv = "age,lx\n70,100000\n71,98000\n72,50000\n73,0\n";
        let table = LifeTable::from_reader(csv.as_bytes(), 70, 0.0).unwrap();
        assert!((table.one_year_survival(0) - 0.98).abs() < 1e-15);
        assert_eq!(table.limiting_age(), 73);
        assert_eq!(table.one_year_survival(2), 0.0);
    }

    #[test]
    fn lx_takes_precedence_over_qx() {
        let csv = "age,qx,lx\n70,0.3,100\n71,0.5,90\n72,1,45\n";
        let table = LifeTable::from_reader(csv.as_bytes(), 70, 0.0).unwrap();
        assert!((table.one_year_survival(0) - 0.9).abs() < 1e-15);
        assert!((table.one_year_survival(1) - 0.5).abs() < 1e-15);
        assert_eq!(table.one_year_survival(2), 0.0);
    }

    #[test]
    fn accepts_open_age_interval() {
        let csv = "age,qx\n108,0.6\n109,0.6\n110+,1.0\n";
        let table = LifeTable::from_reader(csv.as_bytes(), 109, 0.0).unwrap();
        assert_eq!(table.limiting_age(), 111);
    }

    #[test]
    fn rejects_bad_tables() {
        let gap = "age,qx\n70,0.1\n72,1\n";
        assert!(matches!(
            LifeTable::from_reader(gap.as_bytes(), 70, 0.0),
            Err(Error::InvalidTable(_))
        ));
        let out_of_range = "age,qx\n70,1.2\n71,1\n";
        assert!(LifeTable::from_reader(out_of_range.as_bytes(), 70, 0.0).is_err());
        let open = "age,qx\n70,0.1\n71,0.2\n";
        assert!(LifeTable::from_reader(open.as_bytes(), 70, 0.0).is_err());
        let base_too_old = "age,qx\n70,0.1\n71,1\n";
        assert!(LifeTable::from_reader(base_too_old.as_bytes(), 72, 0.0).is_err());
        let base_too_young = "age,qx\n70,0.1\n71,1\n";
        assert!(LifeTable::from_reader(base_too_young.as_bytes(), 60, 0.0).is_err());
        let no_prob = "age,mx\n70,0.1\n";
        assert!(LifeTable::from_reader(no_prob.as_bytes(), 70, 0.0).is_err());
        let increasing_lx = "age,lx\n70,100\n71,120\n72,0\n";
        assert!(LifeTable::from_reader(increasing_lx.as_bytes(), 70, 0.0).is_err());
    }

    #[test]
    fn survival_edges_and_interpolation() {
        let table = halving_table(20);
        assert_eq!(table.survival(0.0), 1.0);
        assert!((table.survival(2.5) - 0.5f64.powf(2.5)).abs() < 1e-15);
        assert!((table.survival(2.5) - 0.176_776_695_296_636_9).abs() < 1e-12);
        assert_eq!(table.survival(20.0), 0.0);
        // uniform deaths in the closing year
        let s19 = table.survival(19.0);
        assert!((table.survival(19.5) - 0.5 * s19).abs() < 1e-18);
    }

    #[test]
    fn inverse_examples() {
        let table = halving_table(20);
        assert_eq!(table.f_inverse(0.0), 0.0);
        assert!((table.f_inverse(0.75) - 2.0).abs() < 1e-12);
        assert_eq!(table.f_inverse(1.0), 20.0);
    }

    #[test]
    fn annuity_examples() {
        let closing = LifeTable::new(100, vec![0.0], 0.03).unwrap();
        assert_eq!(closing.annuity_price(0).unwrap(), 1.0);
        assert_eq!(closing.overlay_annuity_price(0).unwrap(), 1.0);

        let deep = halving_table(200);
        assert!((deep.annuity_price(0).unwrap() - 2.0).abs() < 1e-12);
        assert!((deep.overlay_annuity_price(0).unwrap() - 3.0).abs() < 1e-9);

        assert!(matches!(
            deep.annuity_price(200),
            Err(Error::BeyondLimitingAge { t: 200, .. })
        ));
    }

    #[test]
    fn annuity_recursion_and_overlay_dominance() {
        let table = LifeTable::gompertz_makeham(GompertzMakeham::SYNTHETIC_UK_LIKE, 60, 121, 0.02)
            .unwrap();
        for t in 0..table.horizon() - 1 {
            let now = table.annuity_price(t).unwrap();
            let next = table.annuity_price(t + 1).unwrap();
            let rhs = 1.0 + table.one_year_survival(t) * next / 1.02;
            assert!((now - rhs).abs() <= 1e-12 * now, "t = {t}");
            assert!(table.overlay_annuity_price(t).unwrap() >= now);
            assert!(now > 1.0);
        }
    }

    #[test]
    fn gompertz_table_is_valid() {
        let table =
            LifeTable::gompertz_makeham(GompertzMakeham::SYNTHETIC_UK_LIKE, 70, 121, 0.0).unwrap();
        assert_eq!(table.horizon(), 51);
        let e70: f64 = (1..51).map(|k| table.survival(k as f64)).sum();
        assert!(e70 > 14.0 && e70 < 17.0, "curtate life expectancy {e70}");
    }
}
