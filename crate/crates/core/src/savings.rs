//! Member savings rosters and their text formats.

use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Initial savings of every member of a closed pool, in member order.
#[derive(Debug, Clone, PartialEq)]
pub struct SavingsVector(Vec<f64>);

impl SavingsVector {
    pub fn new(amounts: Vec<f64>) -> Result<Self> {
        if amounts.is_empty() {
            return Err(Error::InvalidSavings("a pool needs at least one member".into()));
        }
        if let Some((i, s)) = amounts
            .iter()
            .enumerate()
            .find(|(_, &s)| !(s > 0.0 && s.is_finite()))
        {
            return Err(Error::InvalidSavings(format!(
                "member {i} has non-positive or non-finite savings {s}"
            )));
        }
        Ok(Self(amounts))
    }

    /// `count` members with `amount` each.
    pub fn homogeneous(count: usize, amount: f64) -> Result<Self> {
        Self::new(vec![amount; count])
    }

    /// Concatenation of homogeneous groups, in the order given.
    pub fn from_groups(groups: &[(usize, f64)]) -> Result<Self> {
        let amounts = groups
            .iter()
            .flat_map(|&(count, amount)| std::iter::repeat_n(amount, count))
            .collect();
        Self::new(amounts)
    }

    /// Reads one amount per row. A non-numeric first row is taken as a header.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut amounts = Vec::new();
        for (i, record) in csv.records().enumerate() {
            let record = record?;
            let Some(field) = record.get(0).filter(|f| !f.is_empty()) else {
                continue;
            };
            match field.parse::<f64>() {
                Ok(v) => amounts.push(v),
                Err(_) if i == 0 => continue,
                Err(_) => {
                    return Err(Error::InvalidSavings(format!(
                        "line {}: cannot parse `{field}` as an amount",
                        i + 1
                    )))
                }
            }
        }
        Self::new(amounts)
    }

    /// Accepts either an inline `count@amount[,count@amount...]` spec or a
    /// path to a CSV file.
    pub fn from_spec_or_path(input: &str) -> Result<Self> {
        if input.contains('@') {
            input.parse()
        } else {
            Self::load_csv(input)
        }
    }

    pub fn amounts(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.0.iter().map(|s| s * s).sum()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::MAX, f64::min)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.0.iter().all(|&s| s == self.0[0])
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|s| s * factor).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl FromStr for SavingsVector {
    type Err = Error;

    /// Parses `count@amount[,count@amount...]`, e.g. `800@1,200@10`.
    fn from_str(spec: &str) -> Result<Self> {
        let mut groups = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (count, amount) = part.split_once('@').ok_or_else(|| {
                Error::InvalidSavings(format!("`{part}` is not of the form count@amount"))
            })?;
            let count: usize = count.trim().parse().map_err(|_| {
                Error::InvalidSavings(format!("`{count}` is not a member count"))
            })?;
            let amount: f64 = amount.trim().parse().map_err(|_| {
                Error::InvalidSavings(format!("`{amount}` is not an amount"))
            })?;
            groups.push((count, amount));
        }
        Self::from_groups(&groups)
    }
}

impl AsRef<[f64]> for SavingsVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
